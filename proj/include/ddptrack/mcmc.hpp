#ifndef DDPTRACK_MCMC_HPP
#define DDPTRACK_MCMC_HPP

#include "ddptrack/state.hpp"
#include "ddptrack/stats.hpp"

namespace ddptrack {
namespace mcmc {

struct McmcConfig {
  int sweeps = 200;
  std::uint64_t seed = 0;
  Hyperparams hyper;
  enum class Init { kSingleCluster, kSequentialUrn };
  Init init = Init::kSequentialUrn;
  int maxLifetimeSlack = 50;  // deletion times capped at T + slack, tail mass lumped at the cap

  void validate() const;
};

struct SweepDiagnostics {
  int sweepIndex = 0;
  double logJoint = 0.0;
  std::vector<int> kAlivePerTime;
  double auxAcceptRate = 0.0;
  double deletionAcceptRate = 0.0;
  double wallMs = 0.0;
};

// Gibbs chain in the deletion-variable formulation. Cluster ids are stable and
// never reused; each cluster keeps full parameter and auxiliary timelines, with
// only the [birth, lastAlive] segment entering the joint density.
class Chain {
 public:
  Chain(const ObservationSet& obs, const Hyperparams& hyper, int deletionCap);

  void initSingleCluster(Rng& rng);
  void initSequentialUrn(Rng& rng);

  // Resamples c_{i,t} given everything else; creates a cluster on a "new" draw.
  // Returns the chosen cluster id.
  int sampleAssignment(int t, int i, Rng& rng);

  // Metropolis-Hastings move on d_{i,t} with the geometric prior as the proposal.
  bool sampleDeletion(int t, int i, Rng& rng);

  // Conjugate draw of theta_{k,t} given its Markov blanket.
  void resampleClusterParams(int clusterId, int t, Rng& rng);

  // Per-item MH refresh of the bridge z_{k,t,1:M}; returns accepted count.
  int sampleAuxVariables(int clusterId, int t, Rng& rng);

  void sweep(Rng& rng, SweepDiagnostics* diag = nullptr);

  double logJointScratch() const;
  double logJointIncremental() const { return incLogJoint_; }
  void resetIncrementalLogJoint() { incLogJoint_ = logJointScratch(); }

  LatentState snapshot() const;

  int frameCount() const { return T_; }
  int aliveClusters() const;
  int aliveAt(int t) const;
  const std::vector<std::vector<int>>& assignments() const { return c_; }
  const std::vector<std::vector<int>>& deletionTimes() const { return d_; }
  int sizeEndOf(int clusterId, int t) const { return clusters_[clusterId - 1].mEnd[t - 1]; }
  int deletionCap() const { return dCap_; }
  const Hyperparams& hyper() const { return hyper_; }

 private:
  struct Cluster {
    int id = 0;
    bool dead = false;
    int birth = 0;      // 0 while the cluster has no members
    int lastAlive = 0;
    std::vector<ClusterParams> theta;  // [T]
    std::vector<AuxVarSet> aux;        // [T]; aux[t-1] bridges theta at t-1 -> t, t >= 2
    std::vector<int> mStart, mEnd, members;  // per-frame sizes and member counts
  };

  struct Candidate {
    int id = 0;  // 0 = new cluster
    double urnDelta = 0.0;
    double logLik = 0.0;
    bool forced = false;
  };

  Cluster& cluster(int id) { return clusters_[id - 1]; }
  const Cluster& cluster(int id) const { return clusters_[id - 1]; }

  void addBall(int clusterId, int t, int d, int sign);
  void addMember(int clusterId, int t, int sign);
  double urnW(const Cluster* c, int t, int d) const;  // null cluster = the "new" option
  double urnB(const Cluster* c, int t, int d) const;
  double logGeoCapped(int t, int d) const;
  int proposeDeletion(int t, Rng& rng) const;
  int createCluster(const Observation& seed, int t, Rng& rng);
  void refreshAliveRange(Cluster& c);
  double rangeDeltaLog(const Cluster& c, int b0, int e0, int b1, int e1) const;
  double chainSegmentLog(const Cluster& c, int birth, int lastAlive) const;
  double bridgeLog(const Cluster& c, int t) const;  // z_{k,t} and theta_{k,t} terms
  double baseLog(const ClusterParams& theta) const;
  double thetaBlanketLog(const Cluster& c, int t) const;
  double memberLikelihoodLog(const Cluster& c, int t) const;
  stats::Posterior thetaConditional(const Cluster& c, int t) const;

  int T_ = 0;
  int V_ = 0;
  int dCap_ = 0;
  Hyperparams hyper_;
  stats::NiwParams g0Niw_;
  stats::DirParams g0Dir_;
  double logAlpha_ = 0.0;
  ObservationSet obs_;
  std::vector<std::vector<int>> c_, d_;
  std::vector<std::vector<double>> logMarginalCache_;  // per observation, constant over the run
  std::vector<Cluster> clusters_;
  std::vector<int> totStart_;  // per-frame total carried-in balls
  double incLogJoint_ = 0.0;
  long auxAccepted_ = 0, auxProposed_ = 0, delAccepted_ = 0, delProposed_ = 0;
};

struct McmcResult {
  LatentState map;
  std::vector<SweepDiagnostics> diagnostics;
};

McmcResult runMcmc(const ObservationSet& obs, const McmcConfig& config);

void writeDiagnosticsCsv(const std::vector<SweepDiagnostics>& diags, const std::string& headerLine,
                         const std::string& path);

}  // namespace mcmc
}  // namespace ddptrack

#endif  // DDPTRACK_MCMC_HPP
