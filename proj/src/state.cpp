#include "ddptrack/state.hpp"

#include <fstream>

#include <json.hpp>

namespace ddptrack {
namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

ordered_json paramsToJson(const ClusterParams& p) {
  ordered_json j;
  j["mean"] = {p.mean.x(), p.mean.y()};
  j["cov"] = {{p.cov(0, 0), p.cov(0, 1)}, {p.cov(1, 0), p.cov(1, 1)}};
  j["colorProbs"] = std::vector<double>(p.colorProbs.data(), p.colorProbs.data() + p.colorProbs.size());
  return j;
}

ClusterParams paramsFromJson(const json& j) {
  ClusterParams p;
  p.mean = Vec2(j.at("mean").at(0).get<double>(), j.at("mean").at(1).get<double>());
  const auto& c = j.at("cov");
  p.cov << c.at(0).at(0).get<double>(), c.at(0).at(1).get<double>(), c.at(1).at(0).get<double>(),
      c.at(1).at(1).get<double>();
  const auto& q = j.at("colorProbs");
  p.colorProbs = VecX(q.size());
  for (std::size_t v = 0; v < q.size(); ++v) p.colorProbs[static_cast<int>(v)] = q.at(v).get<double>();
  return p;
}

}  // namespace

int LatentState::aliveClusterCount() const { return static_cast<int>(clusters.size()); }

void writeLatentState(const LatentState& state, const std::string& headerJson,
                      const std::string& path) {
  ordered_json j;
  j["header"] = json::parse(headerJson);
  j["T"] = state.T;
  j["V"] = state.V;
  j["logScore"] = state.logScore;
  j["width"] = state.width;
  j["height"] = state.height;
  j["scale"] = state.scale;
  ordered_json frames = ordered_json::array();
  for (int t = 1; t <= state.T; ++t) {
    ordered_json fr;
    fr["t"] = t;
    fr["assignments"] = state.assignments[t - 1];
    if (!state.deletionTimes.empty()) fr["deletionTimes"] = state.deletionTimes[t - 1];
    frames.push_back(fr);
  }
  j["frames"] = frames;
  ordered_json clusters = ordered_json::array();
  for (const auto& c : state.clusters) {
    ordered_json cj;
    cj["id"] = c.id;
    cj["birth"] = c.birth;
    cj["lastAlive"] = c.lastAlive;
    cj["sizes"] = c.sizes;
    ordered_json ps = ordered_json::array();
    for (int t = c.birth; t <= c.lastAlive; ++t) {
      ordered_json pj = paramsToJson(c.paramsAt(t));
      pj["t"] = t;
      ps.push_back(pj);
    }
    cj["params"] = ps;
    clusters.push_back(cj);
  }
  j["clusters"] = clusters;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write state: " + path);
  out << j.dump(2) << "\n";
}

LatentState readLatentState(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open state: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("bad state JSON: " + std::string(e.what()));
  }
  LatentState s;
  s.T = j.at("T").get<int>();
  s.V = j.at("V").get<int>();
  s.logScore = j.value("logScore", 0.0);
  s.width = j.value("width", 0);
  s.height = j.value("height", 0);
  s.scale = j.value("scale", 0.0);
  s.assignments.resize(s.T);
  bool anyDeletion = false;
  for (const auto& fr : j.at("frames")) {
    int t = fr.at("t").get<int>();
    s.assignments[t - 1] = fr.at("assignments").get<std::vector<int>>();
    if (fr.contains("deletionTimes")) {
      if (!anyDeletion) {
        s.deletionTimes.resize(s.T);
        anyDeletion = true;
      }
      s.deletionTimes[t - 1] = fr.at("deletionTimes").get<std::vector<int>>();
    }
  }
  for (const auto& cj : j.at("clusters")) {
    ClusterTimeline c;
    c.id = cj.at("id").get<int>();
    c.birth = cj.at("birth").get<int>();
    c.lastAlive = cj.at("lastAlive").get<int>();
    c.sizes = cj.at("sizes").get<std::vector<int>>();
    for (const auto& pj : cj.at("params")) c.params.push_back(paramsFromJson(pj));
    if (static_cast<int>(c.params.size()) != c.lastAlive - c.birth + 1)
      throw DataError("state cluster " + std::to_string(c.id) + ": params do not span alive range");
    s.clusters.push_back(std::move(c));
  }
  return s;
}

}  // namespace ddptrack
