#ifndef DDPTRACK_SMC_HPP
#define DDPTRACK_SMC_HPP

#include "ddptrack/state.hpp"
#include "ddptrack/stats.hpp"

namespace ddptrack {
namespace smc {

struct SmcConfig {
  int particles = 100;   // L
  int gibbsSweeps = 3;   // S, per-frame Gibbs passes
  enum class Resample { kEveryStep, kEssThreshold };
  Resample resampleMode = Resample::kEveryStep;
  double essFraction = 0.5;
  std::uint64_t seed = 0;
  Hyperparams hyper;
  int workers = 1;

  void validate() const;
};

struct FrameDiagnostics {
  int frame = 0;
  double ess = 0.0;
  bool resampled = false;
  int kBest = 0;  // alive clusters in the best-scoring particle
  double wallMs = 0.0;
};

struct SmcResult {
  LatentState map;
  std::vector<FrameDiagnostics> diagnostics;
  // Final weighted population summary: per particle, the number of distinct
  // clusters ever assigned an observation along its lineage, and its normalized
  // weight at the last frame.
  std::vector<int> finalBlockCounts;
  std::vector<double> finalWeights;
};

// Normalized assignment probabilities for one observation: urn weight times
// likelihood for clusters with positive size, concentration times the prior
// marginal for a new cluster. Entry k (0-based) matches thetas[k]; the last
// entry is the new-cluster option.
VecX smcAssignmentPmf(const Observation& x, const std::vector<int>& sizes,
                      const std::vector<const ClusterParams*>& thetas, const Hyperparams& h);

// q1: posterior draw given the member observations.
ClusterParams proposalQ1(const std::vector<const Observation*>& members, const Hyperparams& h,
                         Rng& rng);

// q2: draws M auxiliary variables from F(prevTheta), then a posterior draw given
// members and auxiliary variables jointly.
ClusterParams proposalQ2(const ClusterParams& prevTheta,
                         const std::vector<const Observation*>& members, const Hyperparams& h,
                         Rng& rng);

// Systematic resampling: returns the ancestor index for each offspring slot.
std::vector<int> systematicResample(const std::vector<double>& normalizedWeights, Rng& rng);

double effectiveSampleSize(const std::vector<double>& normalizedWeights);

SmcResult runSmc(const ObservationSet& obs, const SmcConfig& config);

void writeDiagnosticsCsv(const std::vector<FrameDiagnostics>& diags, const std::string& headerLine,
                         const std::string& path);

}  // namespace smc
}  // namespace ddptrack

#endif  // DDPTRACK_SMC_HPP
