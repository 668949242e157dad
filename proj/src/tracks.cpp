#include "ddptrack/tracks.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace ddptrack {
namespace tracks {
namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

}  // namespace

std::vector<Track> stateToTracks(const LatentState& state, double confidence) {
  if (confidence <= 0.0 || confidence >= 1.0) throw ConfigError("confidence must be in (0, 1)");
  if (state.scale <= 0.0 || state.width <= 0 || state.height <= 0)
    throw DataError("state lacks frame geometry (width/height/scale)");
  const double chi2 = chiSquareQuantile2(confidence);
  const double s = state.scale;
  const double cx = state.width / 2.0, cy = state.height / 2.0;

  // Per-frame member counts by cluster id.
  std::vector<std::map<int, int>> members(state.T);
  for (int t = 1; t <= state.T; ++t)
    for (int id : state.assignments[t - 1]) members[t - 1][id] += 1;

  std::vector<Track> out;
  for (const auto& c : state.clusters) {
    Track tr;
    tr.objectId = c.id;
    for (int t = c.birth; t <= c.lastAlive; ++t) {
      bool hasMember = members[t - 1].count(c.id) > 0;
      bool hasSize = c.sizes[t - 1] > 0;
      if (!hasMember && !hasSize) continue;
      const ClusterParams& p = c.paramsAt(t);
      TrackEntry e;
      e.frame = t;
      e.centroid = p.mean;
      e.cov = p.cov;
      Eigen::SelfAdjointEigenSolver<Mat2> eig(p.cov);
      if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 0.0)
        throw NumericalError("stateToTracks: covariance not SPD for cluster " +
                             std::to_string(c.id) + " at frame " + std::to_string(t));
      e.oval.center = p.mean;
      // largest eigenvalue first
      e.oval.axes = Vec2(std::sqrt(chi2 * eig.eigenvalues()[1]), std::sqrt(chi2 * eig.eigenvalues()[0]));
      e.oval.rotation = std::atan2(eig.eigenvectors().col(1).y(), eig.eigenvectors().col(1).x());
      double hwx = std::sqrt(chi2 * p.cov(0, 0));
      double hwy = std::sqrt(chi2 * p.cov(1, 1));
      // Scene-to-pixel: x_px = x*s + cx, y_px = cy - y*s (y axis flips).
      e.bbox[0] = (p.mean.x() - hwx) * s + cx;
      e.bbox[1] = cy - (p.mean.y() + hwy) * s;
      e.bbox[2] = (p.mean.x() + hwx) * s + cx;
      e.bbox[3] = cy - (p.mean.y() - hwy) * s;
      tr.entries.push_back(e);
    }
    if (!tr.entries.empty()) out.push_back(std::move(tr));
  }
  return out;
}

void writeTracks(const std::vector<Track>& tracks, const std::string& headerJson,
                 const std::string& path) {
  ordered_json j;
  j["header"] = json::parse(headerJson);
  ordered_json arr = ordered_json::array();
  for (const auto& tr : tracks) {
    ordered_json tj;
    tj["id"] = tr.objectId;
    ordered_json entries = ordered_json::array();
    for (const auto& e : tr.entries) {
      ordered_json ej;
      ej["t"] = e.frame;
      ej["centroid"] = {e.centroid.x(), e.centroid.y()};
      ej["cov"] = {{e.cov(0, 0), e.cov(0, 1)}, {e.cov(1, 0), e.cov(1, 1)}};
      ej["oval"] = {{"center", {e.oval.center.x(), e.oval.center.y()}},
                    {"axes", {e.oval.axes.x(), e.oval.axes.y()}},
                    {"rotation", e.oval.rotation}};
      ej["bbox"] = {e.bbox[0], e.bbox[1], e.bbox[2], e.bbox[3]};
      entries.push_back(ej);
    }
    tj["entries"] = entries;
    arr.push_back(tj);
  }
  j["tracks"] = arr;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write tracks: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace tracks
}  // namespace ddptrack
