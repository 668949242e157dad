#include "ddptrack/model.hpp"

#include <Eigen/Cholesky>
#include <cmath>

namespace ddptrack {

void Hyperparams::validate() const {
  if (alpha <= 0.0) throw ConfigError("alpha must be > 0");
  if (rho <= 0.0 || rho > 1.0) throw ConfigError("rho must be in (0, 1]");
  if (M < 1) throw ConfigError("M must be a positive integer");
  if (kappa0 <= 0.0) throw ConfigError("kappa0 must be > 0");
  if (nu0 <= 1.0) throw ConfigError("nu0 must exceed dim - 1 = 1");
  if (q0.size() < 2) throw ConfigError("q0 must have at least 2 entries");
  if ((q0.array() <= 0.0).any()) throw ConfigError("q0 entries must be > 0");
  if (auxTrialCount < 1) throw ConfigError("auxTrialCount must be >= 1");
  Eigen::LLT<Mat2> llt(Lambda0);
  if (llt.info() != Eigen::Success) throw ConfigError("Lambda0 must be symmetric positive-definite");
}

Hyperparams Hyperparams::syntheticDefaults(int V) {
  Hyperparams h;
  h.alpha = 0.1;
  h.rho = 0.3;
  h.M = 10;
  h.mu0 = Vec2::Zero();
  h.kappa0 = 0.05;
  h.nu0 = 5.0;
  h.Lambda0 = Mat2::Identity();
  h.q0 = VecX::Constant(V, 5.0);
  h.auxTrialCount = 9;
  return h;
}

Hyperparams Hyperparams::petsDefaults(int V) {
  Hyperparams h = syntheticDefaults(V);
  h.rho = 0.8;
  h.nu0 = 6.0;
  h.q0 = VecX::Constant(V, 3.0);
  return h;
}

VecX urnAssignmentPmf(const std::vector<int>& sizes, double alpha) {
  if (alpha <= 0.0) throw ConfigError("urnAssignmentPmf: alpha must be > 0");
  double total = alpha;
  for (int m : sizes) {
    if (m < 0) throw ConfigError("urnAssignmentPmf: negative cluster size");
    total += m;
  }
  VecX p(sizes.size() + 1);
  for (std::size_t k = 0; k < sizes.size(); ++k) p[static_cast<int>(k)] = sizes[k] / total;
  p[static_cast<int>(sizes.size())] = alpha / total;
  return p;
}

int sampleSizeTransition(int prevSize, int newAssignCount, double rho, Rng& rng) {
  if (prevSize < 0 || newAssignCount < 0) throw ConfigError("sampleSizeTransition: negative count");
  if (rho <= 0.0 || rho > 1.0) throw ConfigError("sampleSizeTransition: rho out of range");
  int deletions = 0;
  if (prevSize > 0) {
    std::binomial_distribution<int> bin(prevSize, rho);
    deletions = bin(rng);
  }
  return prevSize - deletions + newAssignCount;
}

double sizeTransitionPmf(int prevSize, int newSize, int newAssignCount, double rho) {
  int deletions = prevSize - newSize + newAssignCount;
  if (deletions < 0 || deletions > prevSize) return 0.0;
  // Binomial(deletions | prevSize, rho)
  double logp = std::lgamma(prevSize + 1.0) - std::lgamma(deletions + 1.0) -
                std::lgamma(prevSize - deletions + 1.0);
  if (deletions > 0) logp += deletions * std::log(rho);
  if (prevSize - deletions > 0) logp += (prevSize - deletions) * std::log1p(-rho);
  return std::exp(logp);
}

int sampleLifetime(double rho, Rng& rng) {
  if (rho <= 0.0 || rho > 1.0) throw ConfigError("sampleLifetime: rho out of range");
  if (rho == 1.0) return 0;
  std::geometric_distribution<int> geo(rho);
  return geo(rng);
}

int reconstructSizes(const std::vector<std::vector<int>>& assignments,
                     const std::vector<std::vector<int>>& deletionTimes, int cluster, int time) {
  int m = 0;
  int frames = static_cast<int>(assignments.size());
  for (int t = 1; t <= std::min(time, frames); ++t) {
    const auto& cs = assignments[t - 1];
    const auto& ds = deletionTimes[t - 1];
    for (std::size_t i = 0; i < cs.size(); ++i) {
      if (ds[i] < t + 1) throw DataError("reconstructSizes: deletion time before t+1");
      if (cs[i] == cluster && time < ds[i]) ++m;
    }
  }
  return m;
}

}  // namespace ddptrack
