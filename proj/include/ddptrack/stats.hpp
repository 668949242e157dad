#ifndef DDPTRACK_STATS_HPP
#define DDPTRACK_STATS_HPP

#include "ddptrack/model.hpp"

namespace ddptrack {
namespace stats {

// Normal-inverse-Wishart parameters (prior or posterior side).
struct NiwParams {
  Vec2 mu = Vec2::Zero();
  double kappa = 1.0;
  double nu = 3.0;
  Mat2 Lambda = Mat2::Identity();

  void validate() const;
};

struct DirParams {
  VecX q;

  void validate() const;
};

// Conjugate update accumulator. Data enters one item at a time; the posterior
// parameters are derived from (n, sum, sumOuter, colorSum), so batch and
// sequential updates agree exactly.
class Posterior {
 public:
  Posterior(const NiwParams& niwPrior, const DirParams& dirPrior);

  void add(const Vec2& pos, const VecXi& colorCounts);
  void addSpatial(const Vec2& pos);
  void remove(const Vec2& pos, const VecXi& colorCounts);

  double n() const { return n_; }
  NiwParams niw() const;
  DirParams dir() const;

 private:
  NiwParams prior_;
  DirParams dirPrior_;
  double n_ = 0.0;
  Vec2 sum_ = Vec2::Zero();
  Mat2 sumOuter_ = Mat2::Zero();
  VecX colorSum_;
};

// Log-densities. All throw NumericalError on non-SPD covariance inputs.
double logMvnPdf(const Vec2& x, const Vec2& mu, const Mat2& cov);
double logMultinomialPmf(const VecXi& counts, const VecX& p);  // includes the coefficient
double logDirichletPdf(const VecX& p, const VecX& q);
double logInverseWishartPdf(const Mat2& sigma, double nu, const Mat2& lambda);
double logNiwPdf(const Vec2& mu, const Mat2& sigma, const NiwParams& params);
// Bivariate t with location mu, scale matrix S, dof nu:
// density proportional to (1 + q/nu)^{-(nu+2)/2}, q the Mahalanobis form under S.
double logMultivariateT2(const Vec2& x, const Vec2& mu, const Mat2& scale, double nu);
double logDirichletMultinomial(const VecXi& counts, const VecX& q);  // includes the coefficient

// F(x | theta) = N(x^s | mu, Sigma) * Mn(x^c | p), in log space.
double likelihoodF(const Observation& obs, const ClusterParams& theta);
double auxDensityGivenTheta(const AuxVar& aux, const ClusterParams& theta);

// Posterior over theta given prior hyperparameters and a data batch.
Posterior posteriorUpdate(const NiwParams& niwPrior, const DirParams& dirPrior,
                          const std::vector<std::pair<Vec2, VecXi>>& data);

NiwParams niwPriorOf(const Hyperparams& h);
DirParams dirPriorOf(const Hyperparams& h);

// Draws (mu, Sigma) ~ NiW and p ~ Dir from posterior-side parameters.
ClusterParams samplePosteriorParams(const NiwParams& niw, const DirParams& dir, Rng& rng);

// Closed form of int F(x | theta) G0(theta) dtheta: bivariate t for the spatial part,
// Dirichlet-multinomial predictive for the color counts.
double logMarginalNewCluster(const Observation& obs, const Hyperparams& h);
double logMarginalSpatial(const Vec2& pos, const Hyperparams& h);

// One step of the G0-invariant transition kernel: draw M auxiliary variables from
// F(prevTheta), then new parameters from the conjugate posterior given them.
std::pair<AuxVarSet, ClusterParams> sampleTransitionedParams(const ClusterParams& prevTheta,
                                                             const Hyperparams& h, Rng& rng);

// Conjugate posterior parameters derived from an auxiliary-variable set.
Posterior posteriorGivenAux(const AuxVarSet& aux, const Hyperparams& h);

// log NiW x Dir density of theta under the parameters derived from aux.
double transitionDensityGivenAux(const ClusterParams& theta, const AuxVarSet& aux,
                                 const Hyperparams& h);

// Elementary samplers.
Vec2 sampleMvn(const Vec2& mu, const Mat2& cov, Rng& rng);
Mat2 sampleInverseWishart(double nu, const Mat2& lambda, Rng& rng);  // Bartlett decomposition
VecX sampleDirichlet(const VecX& q, Rng& rng);
VecXi sampleMultinomialCounts(int n, const VecX& p, Rng& rng);
ClusterParams sampleBase(const Hyperparams& h, Rng& rng);  // theta ~ G0
AuxVar sampleAuxFrom(const ClusterParams& theta, const Hyperparams& h, Rng& rng);

}  // namespace stats
}  // namespace ddptrack

#endif  // DDPTRACK_STATS_HPP
