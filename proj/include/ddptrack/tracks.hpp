#ifndef DDPTRACK_TRACKS_HPP
#define DDPTRACK_TRACKS_HPP

#include <string>

#include "ddptrack/state.hpp"

namespace ddptrack {
namespace tracks {

struct Oval {
  Vec2 center = Vec2::Zero();
  Vec2 axes = Vec2::Zero();   // semi-axes, scene units
  double rotation = 0.0;      // radians, first principal axis vs +x
};

struct TrackEntry {
  int frame = 0;
  Vec2 centroid = Vec2::Zero();  // scene units
  Mat2 cov = Mat2::Identity();
  Oval oval;
  double bbox[4] = {0, 0, 0, 0};  // pixel units: xmin, ymin, xmax, ymax
};

struct Track {
  int objectId = 0;
  std::vector<TrackEntry> entries;  // strictly increasing frames
};

// Chi-square quantile with 2 degrees of freedom; closed form.
inline double chiSquareQuantile2(double confidence) { return -2.0 * std::log1p(-confidence); }

// One track per cluster. A track has an entry at frame t when the cluster has an
// assigned observation there or positive size. Boxes map back to pixel coordinates
// through the inverse of the extraction normalization.
std::vector<Track> stateToTracks(const LatentState& state, double confidence);

void writeTracks(const std::vector<Track>& tracks, const std::string& headerJson,
                 const std::string& path);

}  // namespace tracks
}  // namespace ddptrack

#endif  // DDPTRACK_TRACKS_HPP
