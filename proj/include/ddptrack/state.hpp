#ifndef DDPTRACK_STATE_HPP
#define DDPTRACK_STATE_HPP

#include <string>

#include "ddptrack/model.hpp"

namespace ddptrack {

// Parameter timeline of one cluster over its alive range.
struct ClusterTimeline {
  int id = 0;
  int birth = 1;      // first frame with any support
  int lastAlive = 1;  // last frame with assignments or positive size
  std::vector<int> sizes;                // m_{k,t}, t = 1..T (end-of-frame values)
  std::vector<ClusterParams> params;     // one per t in [birth, lastAlive]

  const ClusterParams& paramsAt(int t) const { return params.at(t - birth); }
};

// Sampler output shared by MCMC and SMC. MCMC carries deletion times; SMC carries
// sizes only (the deletionTimes vectors stay empty).
struct LatentState {
  int T = 0;
  int V = 0;
  double logScore = 0.0;
  int width = 0;        // source frame geometry, echoed from the observation header
  int height = 0;
  double scale = 0.0;   // scene units per pixel divisor
  std::vector<std::vector<int>> assignments;    // [t-1][i] -> cluster id
  std::vector<std::vector<int>> deletionTimes;  // [t-1][i] -> d, or empty for SMC
  std::vector<ClusterTimeline> clusters;

  int aliveClusterCount() const;
};

void writeLatentState(const LatentState& state, const std::string& headerJson,
                      const std::string& path);
LatentState readLatentState(const std::string& path);

}  // namespace ddptrack

#endif  // DDPTRACK_STATE_HPP
