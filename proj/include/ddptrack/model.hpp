#ifndef DDPTRACK_MODEL_HPP
#define DDPTRACK_MODEL_HPP

#include "ddptrack/common.hpp"

namespace ddptrack {

// One extracted pixel: spatial position (scene units), hue-bin counts, frame index.
struct Observation {
  int frame = 1;        // t in [1, T]
  Vec2 pos = Vec2::Zero();
  VecXi colorCounts;    // V nonnegative entries summing to the patch size

  int countTotal() const { return colorCounts.sum(); }
};

using ObservationSet = std::vector<std::vector<Observation>>;  // [t-1] -> observations at frame t

// Appearance of one object at one time step: theta = {mu, Sigma, p}.
struct ClusterParams {
  Vec2 mean = Vec2::Zero();
  Mat2 cov = Mat2::Identity();
  VecX colorProbs;
};

// One auxiliary pseudo-observation mediating the parameter transition.
struct AuxVar {
  Vec2 pos = Vec2::Zero();
  VecXi colorCounts;
};

using AuxVarSet = std::vector<AuxVar>;  // exactly M items

struct Hyperparams {
  double alpha = 0.1;   // DP concentration
  double rho = 0.3;     // deletion parameter, in (0, 1]
  int M = 10;           // auxiliary variables per cluster per step
  Vec2 mu0 = Vec2::Zero();
  double kappa0 = 0.05;
  double nu0 = 5.0;     // > dim - 1
  Mat2 Lambda0 = Mat2::Identity();
  VecX q0;              // positive, length V
  int auxTrialCount = 9;  // multinomial trials for auxiliary color draws (L^2 by default)

  int V() const { return static_cast<int>(q0.size()); }
  void validate() const;

  static Hyperparams syntheticDefaults(int V = 10);
  static Hyperparams petsDefaults(int V = 10);
};

// C: probability of assigning one observation to each of the K current clusters or a new one,
// given current urn sizes. Returns a (K+1)-vector summing to 1.
VecX urnAssignmentPmf(const std::vector<int>& sizes, double alpha);

// D: m_{k,t} = m_{k,t-1} - Binomial(m_{k,t-1}, rho) + newAssignCount.
int sampleSizeTransition(int prevSize, int newAssignCount, double rho, Rng& rng);

// Exact probability of the above transition.
double sizeTransitionPmf(int prevSize, int newSize, int newAssignCount, double rho);

// Geometric lifetime, P(l) = rho (1-rho)^l, l = 0, 1, ...
int sampleLifetime(double rho, Rng& rng);

inline int deletionTimeFromLifetime(int t, int lifetime) { return t + lifetime + 1; }

// Size reconstruction from the deletion-variable representation:
// m_{k,t} = sum over all observations at frames t' <= t of I[c = k and t < d].
// assignments/deletionTimes are indexed [frame-1][obs]; frames are 1-based.
int reconstructSizes(const std::vector<std::vector<int>>& assignments,
                     const std::vector<std::vector<int>>& deletionTimes, int cluster, int time);

}  // namespace ddptrack

#endif  // DDPTRACK_MODEL_HPP
