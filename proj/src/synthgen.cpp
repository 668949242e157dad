#include "ddptrack/synthgen.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace ddptrack {
namespace synth {
namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

constexpr int kFrames = 200;
constexpr int kMeetFrame = 100;
constexpr int kSize = 500;

int lerpRound(double a, double b, double frac) { return static_cast<int>(std::lround(a + (b - a) * frac)); }

// Integer positions along a straight segment, start at frame f0, end at frame f1.
void fillPath(std::vector<std::pair<int, int>>& path, int f0, int f1, std::pair<double, double> from,
              std::pair<double, double> to) {
  for (int f = f0; f <= f1; ++f) {
    double frac = f1 > f0 ? static_cast<double>(f - f0) / (f1 - f0) : 0.0;
    path[f - 1] = {lerpRound(from.first, to.first, frac), lerpRound(from.second, to.second, frac)};
  }
}

SquareSpec crossingSquare(std::array<std::uint8_t, 3> color, int side, double startX, bool reverse,
                          int zOrder) {
  SquareSpec sq;
  sq.color = color;
  sq.zOrder = zOrder;
  sq.sizeTimeline.assign(kFrames, side);
  sq.pathTimeline.resize(kFrames);
  double mid = kSize / 2.0;  // both squares meet here at the crossing frame
  fillPath(sq.pathTimeline, 1, kMeetFrame, {startX, mid}, {mid, mid});
  double endX = reverse ? startX : mid + (mid - startX);
  fillPath(sq.pathTimeline, kMeetFrame, kFrames, {mid, mid}, {endX, mid});
  return sq;
}

}  // namespace

Scenario makeScenario(const std::string& name) {
  Scenario sc;
  sc.name = name;
  sc.frames = kFrames;
  sc.width = sc.height = kSize;
  const double leftX = 30.0, rightX = kSize - 30.0, mid = kSize / 2.0;
  if (name == "cross-continue" || name == "cross-reverse") {
    bool reverse = name == "cross-reverse";
    sc.squares.push_back(crossingSquare({255, 0, 0}, 20, leftX, reverse, 0));   // red
    sc.squares.push_back(crossingSquare({0, 0, 255}, 20, rightX, reverse, 2));  // blue on top
  } else if (name == "three-squares") {
    sc.squares.push_back(crossingSquare({255, 0, 0}, 20, leftX, true, 0));
    sc.squares.push_back(crossingSquare({0, 0, 255}, 15, rightX, true, 2));
    SquareSpec green;
    green.color = {0, 255, 0};
    green.zOrder = 1;
    green.sizeTimeline.resize(kFrames);
    for (int f = 1; f <= kFrames; ++f) {
      green.sizeTimeline[f - 1] = f <= kMeetFrame
                                      ? lerpRound(50, 10, (f - 1) / double(kMeetFrame - 1))
                                      : lerpRound(10, 50, (f - kMeetFrame) / double(kFrames - kMeetFrame));
    }
    green.pathTimeline.resize(kFrames);
    // Equidistant start on the vertical midline, meets the others at the center,
    // then deflects 20 degrees from its initial (downward) trajectory.
    double startY = 30.0;
    fillPath(green.pathTimeline, 1, kMeetFrame, {mid, startY}, {mid, mid});
    double speed = (mid - startY) / (kMeetFrame - 1);
    double rad = 20.0 * M_PI / 180.0;
    double run = speed * (kFrames - kMeetFrame);
    fillPath(green.pathTimeline, kMeetFrame, kFrames, {mid, mid},
             {mid + run * std::sin(rad), mid + run * std::cos(rad)});
    sc.squares.push_back(std::move(green));
  } else {
    throw ConfigError("unknown scenario: " + name +
                      " (expected cross-continue, cross-reverse or three-squares)");
  }
  return sc;
}

// Continuous box [xmin, ymin, xmax, ymax) covering the rendered pixels, clipped.
std::array<int, 4> squareBox(const Scenario& scenario, int squareIndex, int frameIndex) {
  const SquareSpec& sq = scenario.squares[squareIndex];
  int side = sq.sizeTimeline[frameIndex - 1];
  auto [cx, cy] = sq.pathTimeline[frameIndex - 1];
  int x0 = cx - side / 2;
  int y0 = cy - side / 2;
  return {std::max(0, x0), std::max(0, y0), std::min(scenario.width, x0 + side),
          std::min(scenario.height, y0 + side)};
}

extract::Frame renderFrame(const Scenario& scenario, int frameIndex) {
  extract::Frame f;
  f.width = scenario.width;
  f.height = scenario.height;
  f.pixels.assign(3 * static_cast<std::size_t>(f.width) * f.height, 0);
  std::vector<int> order(scenario.squares.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return scenario.squares[a].zOrder < scenario.squares[b].zOrder;
  });
  for (int s : order) {
    auto box = squareBox(scenario, s, frameIndex);
    const auto& c = scenario.squares[s].color;
    for (int y = box[1]; y < box[3]; ++y)
      for (int x = box[0]; x < box[2]; ++x) f.set(x, y, c[0], c[1], c[2]);
  }
  return f;
}

bool squareVisible(const Scenario& scenario, int squareIndex, int frameIndex) {
  auto box = squareBox(scenario, squareIndex, frameIndex);
  if (box[2] <= box[0] || box[3] <= box[1]) return false;
  int z = scenario.squares[squareIndex].zOrder;
  for (int y = box[1]; y < box[3]; ++y) {
    for (int x = box[0]; x < box[2]; ++x) {
      bool covered = false;
      for (std::size_t s = 0; s < scenario.squares.size(); ++s) {
        if (static_cast<int>(s) == squareIndex || scenario.squares[s].zOrder < z) continue;
        auto other = squareBox(scenario, static_cast<int>(s), frameIndex);
        if (x >= other[0] && x < other[2] && y >= other[1] && y < other[3]) {
          covered = true;
          break;
        }
      }
      if (!covered) return true;
    }
  }
  return false;
}

void generateScenario(const std::string& name, const std::string& outDir) {
  Scenario sc = makeScenario(name);
  fs::create_directories(outDir);
  ordered_json manifest;
  manifest["tool"] = "ddptrack";
  manifest["scenario"] = sc.name;
  manifest["width"] = sc.width;
  manifest["height"] = sc.height;
  std::vector<std::string> names;
  for (int f = 1; f <= sc.frames; ++f) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "f%04d.ppm", f);
    names.emplace_back(buf);
    extract::Frame frame = renderFrame(sc, f);
    extract::writePpm(frame, (fs::path(outDir) / buf).string(),
                      "ddptrack synth " + sc.name + " frame " + std::to_string(f));
  }
  manifest["frames"] = names;
  std::ofstream mout(fs::path(outDir) / "manifest.json");
  if (!mout) throw DataError("cannot write manifest in " + outDir);
  mout << manifest.dump(2) << "\n";

  ordered_json gt;
  gt["header"] = {{"tool", "ddptrack"}, {"scenario", sc.name}, {"frames", sc.frames}};
  ordered_json objects = ordered_json::array();
  for (std::size_t s = 0; s < sc.squares.size(); ++s) {
    ordered_json obj;
    obj["id"] = static_cast<int>(s) + 1;
    ordered_json boxes = ordered_json::object();
    for (int f = 1; f <= sc.frames; ++f) {
      if (!squareVisible(sc, static_cast<int>(s), f)) continue;
      auto box = squareBox(sc, static_cast<int>(s), f);
      boxes[std::to_string(f)] = {box[0], box[1], box[2], box[3]};
    }
    obj["boxes"] = boxes;
    objects.push_back(obj);
  }
  gt["objects"] = objects;
  std::ofstream gout(fs::path(outDir) / "gt.json");
  if (!gout) throw DataError("cannot write ground truth in " + outDir);
  gout << gt.dump(2) << "\n";
}

}  // namespace synth
}  // namespace ddptrack
