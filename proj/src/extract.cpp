#include "ddptrack/extract.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace ddptrack {
namespace extract {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

struct Hsv {
  double hue = 0.0;  // [0, 360)
  double sat = 0.0;
  bool hueDefined = false;
};

Hsv rgbToHsv(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
  double r = r8 / 255.0, g = g8 / 255.0, b = b8 / 255.0;
  double mx = std::max({r, g, b});
  double mn = std::min({r, g, b});
  double delta = mx - mn;
  Hsv out;
  out.sat = mx > 0.0 ? delta / mx : 0.0;
  if (delta <= 0.0) return out;
  double h;
  if (mx == r)
    h = std::fmod((g - b) / delta, 6.0);
  else if (mx == g)
    h = (b - r) / delta + 2.0;
  else
    h = (r - g) / delta + 4.0;
  h *= 60.0;
  if (h < 0.0) h += 360.0;
  if (h >= 360.0) h -= 360.0;
  out.hue = h;
  out.hueDefined = true;
  return out;
}

int readPnmToken(std::istream& in, std::string& tok) {
  tok.clear();
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return 0;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok.empty() ? -1 : 0;
}

}  // namespace

void ExtractionConfig::validate() const {
  if (diffThreshold < 0 || diffThreshold > 255) throw ConfigError("diffThreshold must be in 0..255");
  if (patchHalfWidth < 0) throw ConfigError("patchHalfWidth must be >= 0");
  if (hueBins < 2) throw ConfigError("hueBins must be >= 2");
  if (maxObsPerFrame && *maxObsPerFrame < 1) throw ConfigError("maxObsPerFrame must be >= 1");
  if (saturationFloor < 0.0 || saturationFloor > 1.0)
    throw ConfigError("saturationFloor must be in [0, 1]");
}

Frame readImage(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image: " + path);
  std::string tok;
  if (readPnmToken(in, tok) != 0) throw DataError("truncated PNM header: " + path);
  bool isPpm = tok == "P6";
  bool isPgm = tok == "P5";
  if (!isPpm && !isPgm) throw DataError("unsupported image format (want P6/P5): " + path);
  std::string ws, hs, maxs;
  if (readPnmToken(in, ws) != 0 || readPnmToken(in, hs) != 0 || readPnmToken(in, maxs) != 0)
    throw DataError("truncated PNM header: " + path);
  Frame f;
  f.width = std::stoi(ws);
  f.height = std::stoi(hs);
  int maxval = std::stoi(maxs);
  if (f.width <= 0 || f.height <= 0) throw DataError("bad PNM dimensions: " + path);
  if (maxval <= 0 || maxval > 255) throw DataError("only 8-bit PNM supported: " + path);
  std::size_t n = static_cast<std::size_t>(f.width) * f.height;
  std::vector<std::uint8_t> raw(isPpm ? 3 * n : n);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size())
    throw DataError("truncated PNM raster: " + path);
  if (isPpm) {
    f.pixels = std::move(raw);
  } else {
    f.pixels.resize(3 * n);
    for (std::size_t i = 0; i < n; ++i) {
      f.pixels[3 * i] = f.pixels[3 * i + 1] = f.pixels[3 * i + 2] = raw[i];
    }
  }
  return f;
}

void writePpm(const Frame& frame, const std::string& path, const std::string& comment) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write image: " + path);
  out << "P6\n";
  if (!comment.empty()) out << "# " << comment << "\n";
  out << frame.width << " " << frame.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(frame.pixels.data()),
            static_cast<std::streamsize>(frame.pixels.size()));
  if (!out) throw DataError("failed writing image: " + path);
}

std::vector<std::string> readManifest(const std::string& manifestPath, int& width, int& height) {
  std::ifstream in(manifestPath);
  if (!in) throw DataError("cannot open manifest: " + manifestPath);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("bad manifest JSON: " + std::string(e.what()));
  }
  if (!j.contains("frames") || !j["frames"].is_array()) throw DataError("manifest missing frames[]");
  width = j.value("width", 0);
  height = j.value("height", 0);
  fs::path base = fs::path(manifestPath).parent_path();
  std::vector<std::string> out;
  for (const auto& f : j["frames"]) out.push_back((base / f.get<std::string>()).string());
  return out;
}

std::vector<PixelCoord> frameDifference(const Frame& prev, const Frame& cur,
                                        const ExtractionConfig& config) {
  if (prev.width != cur.width || prev.height != cur.height)
    throw DataError("frameDifference: frame dimensions differ");
  std::vector<PixelCoord> out;
  const int tau = config.diffThreshold;
  for (int y = 0; y < cur.height; ++y) {
    for (int x = 0; x < cur.width; ++x) {
      int idx = 3 * (y * cur.width + x);
      int d0 = std::abs(int(cur.pixels[idx]) - int(prev.pixels[idx]));
      int d1 = std::abs(int(cur.pixels[idx + 1]) - int(prev.pixels[idx + 1]));
      int d2 = std::abs(int(cur.pixels[idx + 2]) - int(prev.pixels[idx + 2]));
      if (std::max({d0, d1, d2}) > tau) out.push_back({x, y});
    }
  }
  return out;
}

VecXi hueHistogram(const Frame& frame, PixelCoord center, const ExtractionConfig& config) {
  VecXi counts = VecXi::Zero(config.hueBins);
  const int hw = config.patchHalfWidth;
  const int V = config.hueBins;
  for (int dy = -hw; dy <= hw; ++dy) {
    int y = center.y + dy;
    if (y < 0 || y >= frame.height) continue;
    for (int dx = -hw; dx <= hw; ++dx) {
      int x = center.x + dx;
      if (x < 0 || x >= frame.width) continue;
      Hsv hsv = rgbToHsv(frame.r(x, y), frame.g(x, y), frame.b(x, y));
      int bin = 0;
      if (hsv.hueDefined && hsv.sat >= config.saturationFloor) {
        bin = static_cast<int>(hsv.hue * V / 360.0);
        if (bin >= V) bin = V - 1;
      }
      counts[bin] += 1;
    }
  }
  return counts;
}

Vec2 normalizeCoords(PixelCoord p, int width, int height, const ExtractionConfig& config) {
  double s = config.scaleFor(width, height);
  double cx = width / 2.0, cy = height / 2.0;
  return Vec2((p.x - cx) / s, (cy - p.y) / s);
}

PixelCoord denormalizeCoords(const Vec2& scenePos, int width, int height,
                             const ExtractionConfig& config) {
  double s = config.scaleFor(width, height);
  double cx = width / 2.0, cy = height / 2.0;
  return {static_cast<int>(std::lround(scenePos.x() * s + cx)),
          static_cast<int>(std::lround(cy - scenePos.y() * s))};
}

namespace {

std::vector<Observation> extractFrame(const Frame& prev, const Frame& cur, int t,
                                      const ExtractionConfig& config) {
  std::vector<PixelCoord> changed = frameDifference(prev, cur, config);
  if (config.maxObsPerFrame && static_cast<int>(changed.size()) > *config.maxObsPerFrame) {
    // Partial Fisher-Yates draw of cap indices, seeded per frame so parallel runs agree.
    Rng rng = makeStream(config.seed, static_cast<std::uint64_t>(t), 0xec5ULL);
    int cap = *config.maxObsPerFrame;
    for (int i = 0; i < cap; ++i) {
      std::uniform_int_distribution<int> pick(i, static_cast<int>(changed.size()) - 1);
      std::swap(changed[i], changed[pick(rng)]);
    }
    changed.resize(cap);
    std::sort(changed.begin(), changed.end(), [&](const PixelCoord& a, const PixelCoord& b) {
      return a.y != b.y ? a.y < b.y : a.x < b.x;
    });
  }
  std::vector<Observation> out;
  out.reserve(changed.size());
  for (const PixelCoord& p : changed) {
    const Frame* patchFrame = &cur;
    if (config.patchSource == PatchSource::kDominant) {
      Hsv hc = rgbToHsv(cur.r(p.x, p.y), cur.g(p.x, p.y), cur.b(p.x, p.y));
      Hsv hp = rgbToHsv(prev.r(p.x, p.y), prev.g(p.x, p.y), prev.b(p.x, p.y));
      if (hp.sat > hc.sat) patchFrame = &prev;
    }
    Observation o;
    o.frame = t;
    o.pos = normalizeCoords(p, cur.width, cur.height, config);
    o.colorCounts = hueHistogram(*patchFrame, p, config);
    out.push_back(std::move(o));
  }
  return out;
}

}  // namespace

ObservationSet extractSequence(const std::vector<Frame>& frames, const ExtractionConfig& config,
                               int workers) {
  config.validate();
  if (frames.size() < 2) throw DataError("extractSequence: need at least 2 frames");
  for (const auto& f : frames)
    if (f.width != frames[0].width || f.height != frames[0].height)
      throw DataError("extractSequence: inconsistent frame dimensions");
  int T = static_cast<int>(frames.size());
  ObservationSet obs(T);
  workers = std::max(1, workers);
  std::atomic<int> next{2};
  auto work = [&] {
    for (;;) {
      int t = next.fetch_add(1);
      if (t > T) break;
      obs[t - 1] = extractFrame(frames[t - 2], frames[t - 1], t, config);
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  return obs;
}

void writeObservations(const ObservationSet& obs, const ExtractionConfig& config, int width,
                       int height, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write observations: " + path);
  ordered_json header;
  header["type"] = "header";
  header["tool"] = "ddptrack";
  header["tau"] = config.diffThreshold;
  header["L"] = config.L();
  header["V"] = config.hueBins;
  header["cap"] = config.maxObsPerFrame ? json(*config.maxObsPerFrame) : json(nullptr);
  header["saturationFloor"] = config.saturationFloor;
  header["scale"] = config.scaleFor(width, height);
  header["patchSource"] = config.patchSource == PatchSource::kDominant ? "dominant" : "current";
  header["seed"] = config.seed;
  header["width"] = width;
  header["height"] = height;
  header["T"] = obs.size();
  out << header.dump() << "\n";
  for (const auto& frameObs : obs) {
    for (const auto& o : frameObs) {
      ordered_json rec;
      rec["t"] = o.frame;
      rec["x"] = {o.pos.x(), o.pos.y()};
      rec["c"] = std::vector<int>(o.colorCounts.data(), o.colorCounts.data() + o.colorCounts.size());
      out << rec.dump() << "\n";
    }
  }
  if (!out) throw DataError("failed writing observations: " + path);
}

ObservationSet readObservations(const std::string& path, ExtractionConfig& configOut, int& width,
                                int& height) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open observations: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty observation file: " + path);
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw DataError("bad observation header: " + std::string(e.what()));
  }
  if (header.value("type", "") != "header") throw DataError("observation file missing header line");
  configOut.diffThreshold = header.value("tau", 30);
  int L = header.value("L", 3);
  configOut.patchHalfWidth = (L - 1) / 2;
  configOut.hueBins = header.value("V", 10);
  if (header.contains("cap") && !header["cap"].is_null())
    configOut.maxObsPerFrame = header["cap"].get<int>();
  else
    configOut.maxObsPerFrame.reset();
  configOut.saturationFloor = header.value("saturationFloor", 0.1);
  configOut.spatialScale = header.value("scale", 0.0);
  configOut.patchSource = header.value("patchSource", std::string("dominant")) == "current"
                              ? PatchSource::kCurrent
                              : PatchSource::kDominant;
  configOut.seed = header.value("seed", 0ULL);
  width = header.value("width", 0);
  height = header.value("height", 0);
  int T = header.value("T", 0);
  ObservationSet obs(std::max(T, 0));
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("bad observation record: " + std::string(e.what()));
    }
    Observation o;
    o.frame = rec.at("t").get<int>();
    auto xs = rec.at("x");
    o.pos = Vec2(xs.at(0).get<double>(), xs.at(1).get<double>());
    auto cs = rec.at("c");
    o.colorCounts = VecXi(cs.size());
    for (std::size_t v = 0; v < cs.size(); ++v) o.colorCounts[static_cast<int>(v)] = cs.at(v).get<int>();
    if (o.frame < 1) throw DataError("observation with frame < 1");
    if (o.frame > static_cast<int>(obs.size())) obs.resize(o.frame);
    obs[o.frame - 1].push_back(std::move(o));
  }
  return obs;
}

}  // namespace extract
}  // namespace ddptrack
