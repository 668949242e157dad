#include "ddptrack/eval.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <set>

#include <json.hpp>

namespace ddptrack {
namespace eval {
namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

constexpr double kInf = std::numeric_limits<double>::infinity();

// Shortest-augmenting-path assignment on a square matrix; ties resolve toward
// the lowest column index. Returns column per row.
std::vector<int> solveSquare(const std::vector<std::vector<double>>& a) {
  int n = static_cast<int>(a.size());
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      int i0 = p[j0], j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = a[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> rowToCol(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] != 0) rowToCol[p[j] - 1] = j - 1;
  return rowToCol;
}

std::vector<int> framesWhereAnyPresent(const GroundTruth& gt, const std::vector<BoxTrack>& tracks) {
  std::set<int> frames;
  for (const auto& o : gt.objects)
    for (const auto& [t, box] : o.boxes) frames.insert(t);
  for (const auto& tr : tracks)
    for (const auto& [t, box] : tr.boxes) frames.insert(t);
  return {frames.begin(), frames.end()};
}

}  // namespace

double overlapRatio(const Box& a, const Box& b) {
  double ix = std::min(a.xmax, b.xmax) - std::max(a.xmin, b.xmin);
  double iy = std::min(a.ymax, b.ymax) - std::max(a.ymin, b.ymin);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  double inter = ix * iy;
  double areaA = (a.xmax - a.xmin) * (a.ymax - a.ymin);
  double areaB = (b.xmax - b.xmin) * (b.ymax - b.ymin);
  return inter / (areaA + areaB - inter);
}

std::vector<int> hungarianAssign(const std::vector<std::vector<double>>& cost) {
  int n = static_cast<int>(cost.size());
  if (n == 0) return {};
  int m = static_cast<int>(cost[0].size());
  for (const auto& row : cost)
    if (static_cast<int>(row.size()) != m) throw DataError("hungarianAssign: ragged cost matrix");
  int dim = std::max(n, m);
  std::vector<std::vector<double>> padded(dim, std::vector<double>(dim, 0.0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) {
      if (!std::isfinite(cost[i][j])) throw DataError("hungarianAssign: non-finite cost");
      padded[i][j] = cost[i][j];
    }
  std::vector<int> rowToCol = solveSquare(padded);
  rowToCol.resize(n);
  for (int i = 0; i < n; ++i)
    if (rowToCol[i] >= m) rowToCol[i] = -1;
  return rowToCol;
}

double computeFda(const std::vector<Box>& gtBoxes, const std::vector<Box>& detBoxes) {
  int ng = static_cast<int>(gtBoxes.size());
  int nd = static_cast<int>(detBoxes.size());
  if (ng == 0 && nd == 0) return 1.0;  // excluded from the SFDA denominator anyway
  if (ng == 0 || nd == 0) return 0.0;
  std::vector<std::vector<double>> cost(ng, std::vector<double>(nd));
  for (int i = 0; i < ng; ++i)
    for (int j = 0; j < nd; ++j) cost[i][j] = -overlapRatio(gtBoxes[i], detBoxes[j]);
  std::vector<int> assign = hungarianAssign(cost);
  double overlapSum = 0.0;
  for (int i = 0; i < ng; ++i)
    if (assign[i] >= 0) overlapSum += -cost[i][assign[i]];
  return overlapSum / ((ng + nd) / 2.0);
}

double computeSfda(const GroundTruth& gt, const std::vector<BoxTrack>& tracks) {
  std::vector<int> frames = framesWhereAnyPresent(gt, tracks);
  if (frames.empty()) return 1.0;
  double sum = 0.0;
  for (int t : frames) {
    std::vector<Box> g, d;
    for (const auto& o : gt.objects)
      if (auto it = o.boxes.find(t); it != o.boxes.end()) g.push_back(it->second);
    for (const auto& tr : tracks)
      if (auto it = tr.boxes.find(t); it != tr.boxes.end()) d.push_back(it->second);
    sum += computeFda(g, d);
  }
  return sum / static_cast<double>(frames.size());
}

AtaResult computeAta(const GroundTruth& gt, const std::vector<BoxTrack>& tracks) {
  AtaResult res;
  int ng = static_cast<int>(gt.objects.size());
  int nd = static_cast<int>(tracks.size());
  if (ng == 0 && nd == 0) {
    res.ata = 1.0;
    return res;
  }
  std::vector<std::vector<double>> term(ng, std::vector<double>(nd, 0.0));
  for (int i = 0; i < ng; ++i) {
    for (int j = 0; j < nd; ++j) {
      std::set<int> frames;
      for (const auto& [t, b] : gt.objects[i].boxes) frames.insert(t);
      for (const auto& [t, b] : tracks[j].boxes) frames.insert(t);
      if (frames.empty()) continue;
      double s = 0.0;
      for (int t : frames) {
        auto gi = gt.objects[i].boxes.find(t);
        auto dj = tracks[j].boxes.find(t);
        if (gi != gt.objects[i].boxes.end() && dj != tracks[j].boxes.end())
          s += overlapRatio(gi->second, dj->second);
      }
      term[i][j] = s / static_cast<double>(frames.size());
    }
  }
  std::vector<int> assign;
  if (ng > 0 && nd > 0) {
    std::vector<std::vector<double>> cost(ng, std::vector<double>(nd));
    for (int i = 0; i < ng; ++i)
      for (int j = 0; j < nd; ++j) cost[i][j] = -term[i][j];
    assign = hungarianAssign(cost);
  } else {
    assign.assign(ng, -1);
  }
  for (int i = 0; i < ng; ++i) {
    if (assign[i] < 0) continue;
    double v = term[i][assign[i]];
    if (v <= 0.0) continue;  // zero-benefit pairs count as unmapped
    res.stda += v;
    res.terms.push_back({gt.objects[i].id, tracks[assign[i]].id, v});
    res.mapping.emplace_back(gt.objects[i].id, tracks[assign[i]].id);
  }
  res.ata = res.stda / ((ng + nd) / 2.0);
  return res;
}

EvalReport evaluate(const GroundTruth& gt, const std::vector<BoxTrack>& tracks) {
  EvalReport rep;
  std::vector<int> frames = framesWhereAnyPresent(gt, tracks);
  double sum = 0.0;
  for (int t : frames) {
    std::vector<Box> g, d;
    for (const auto& o : gt.objects)
      if (auto it = o.boxes.find(t); it != o.boxes.end()) g.push_back(it->second);
    for (const auto& tr : tracks)
      if (auto it = tr.boxes.find(t); it != tr.boxes.end()) d.push_back(it->second);
    double fda = computeFda(g, d);
    rep.fdaPerFrame.emplace_back(t, fda);
    sum += fda;
  }
  rep.sfda = frames.empty() ? 1.0 : sum / static_cast<double>(frames.size());
  AtaResult ata = computeAta(gt, tracks);
  rep.stda = ata.stda;
  rep.ata = ata.ata;
  rep.stdaTerms = ata.terms;
  rep.mapping = ata.mapping;
  std::set<int> mappedGt, mappedTracks;
  for (const auto& [g, d] : rep.mapping) {
    mappedGt.insert(g);
    mappedTracks.insert(d);
  }
  for (const auto& o : gt.objects)
    if (!mappedGt.count(o.id)) rep.missedGtTracks.push_back(o.id);
  for (const auto& tr : tracks)
    if (!mappedTracks.count(tr.id)) rep.falsePositiveTracks.push_back(tr.id);
  return rep;
}

GroundTruth readGroundTruth(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open ground truth: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("bad ground-truth JSON: " + std::string(e.what()));
  }
  GroundTruth gt;
  for (const auto& obj : j.at("objects")) {
    BoxTrack tr;
    tr.id = obj.at("id").get<int>();
    for (const auto& [key, val] : obj.at("boxes").items()) {
      Box b{val.at(0).get<double>(), val.at(1).get<double>(), val.at(2).get<double>(),
            val.at(3).get<double>()};
      if (!b.wellFormed()) throw DataError("malformed ground-truth box at frame " + key);
      tr.boxes[std::stoi(key)] = b;
    }
    gt.objects.push_back(std::move(tr));
  }
  return gt;
}

std::vector<BoxTrack> readTrackBoxes(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open tracks: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("bad track JSON: " + std::string(e.what()));
  }
  std::vector<BoxTrack> out;
  for (const auto& tr : j.at("tracks")) {
    BoxTrack bt;
    bt.id = tr.at("id").get<int>();
    for (const auto& e : tr.at("entries")) {
      const auto& bb = e.at("bbox");
      Box b{bb.at(0).get<double>(), bb.at(1).get<double>(), bb.at(2).get<double>(),
            bb.at(3).get<double>()};
      if (b.wellFormed()) bt.boxes[e.at("t").get<int>()] = b;
    }
    out.push_back(std::move(bt));
  }
  return out;
}

void writeReport(const EvalReport& report, const std::string& headerJson, const std::string& path) {
  ordered_json j;
  j["header"] = json::parse(headerJson);
  j["sfda"] = report.sfda;
  j["stda"] = report.stda;
  j["ata"] = report.ata;
  ordered_json fda = ordered_json::array();
  for (const auto& [t, v] : report.fdaPerFrame) fda.push_back({{"t", t}, {"fda", v}});
  j["fdaPerFrame"] = fda;
  ordered_json terms = ordered_json::array();
  for (const auto& term : report.stdaTerms)
    terms.push_back({{"gt", term.gtId}, {"track", term.trackId}, {"term", term.term}});
  j["stdaTerms"] = terms;
  ordered_json mapping = ordered_json::array();
  for (const auto& [g, d] : report.mapping) mapping.push_back({g, d});
  j["mapping"] = mapping;
  j["falsePositiveTracks"] = report.falsePositiveTracks;
  j["missedGtTracks"] = report.missedGtTracks;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write report: " + path);
  out << j.dump(2) << "\n";
}

void writeFdaCsv(const EvalReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write FDA csv: " + path);
  out << "frame,fda\n";
  for (const auto& [t, v] : report.fdaPerFrame) out << t << "," << v << "\n";
}

}  // namespace eval
}  // namespace ddptrack
