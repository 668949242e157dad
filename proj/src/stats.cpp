#include "ddptrack/stats.hpp"

#include <Eigen/Cholesky>
#include <cmath>

namespace ddptrack {
namespace stats {
namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kLogPi = 1.1447298858494001741;

Mat2 invert2(const Mat2& a, const char* what) {
  double det = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
  if (!(det > 0.0) || !(a(0, 0) > 0.0)) throw NumericalError(std::string(what) + ": matrix not SPD");
  Mat2 inv;
  inv << a(1, 1), -a(0, 1), -a(1, 0), a(0, 0);
  return inv / det;
}

double logDet2(const Mat2& a, const char* what) {
  double det = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
  if (!(det > 0.0) || !(a(0, 0) > 0.0)) throw NumericalError(std::string(what) + ": matrix not SPD");
  return std::log(det);
}

// log Gamma_2(a) = log(pi^{1/2} Gamma(a) Gamma(a - 1/2))
double logMvGamma2(double a) { return 0.5 * kLogPi + std::lgamma(a) + std::lgamma(a - 0.5); }

double sampleChiSq(double dof, Rng& rng) {
  std::gamma_distribution<double> g(dof / 2.0, 2.0);
  return g(rng);
}

}  // namespace

void NiwParams::validate() const {
  if (kappa <= 0.0) throw ConfigError("NiwParams: kappa must be > 0");
  if (nu <= 1.0) throw ConfigError("NiwParams: nu must exceed dim - 1 = 1");
  logDet2(Lambda, "NiwParams::validate");
}

void DirParams::validate() const {
  if (q.size() < 2 || (q.array() <= 0.0).any()) throw ConfigError("DirParams: q entries must be > 0");
}

Posterior::Posterior(const NiwParams& niwPrior, const DirParams& dirPrior)
    : prior_(niwPrior), dirPrior_(dirPrior), colorSum_(VecX::Zero(dirPrior.q.size())) {}

void Posterior::add(const Vec2& pos, const VecXi& colorCounts) {
  addSpatial(pos);
  colorSum_ += colorCounts.cast<double>();
}

void Posterior::addSpatial(const Vec2& pos) {
  n_ += 1.0;
  sum_ += pos;
  sumOuter_ += pos * pos.transpose();
}

void Posterior::remove(const Vec2& pos, const VecXi& colorCounts) {
  n_ -= 1.0;
  sum_ -= pos;
  sumOuter_ -= pos * pos.transpose();
  colorSum_ -= colorCounts.cast<double>();
}

NiwParams Posterior::niw() const {
  NiwParams out = prior_;
  if (n_ <= 0.0) return out;
  const double k0 = prior_.kappa;
  out.kappa = k0 + n_;
  out.nu = prior_.nu + n_;
  Vec2 mean = sum_ / n_;
  out.mu = (k0 * prior_.mu + n_ * mean) / (k0 + n_);
  Mat2 scatter = sumOuter_ - n_ * (mean * mean.transpose());
  Vec2 shift = mean - prior_.mu;
  out.Lambda = prior_.Lambda + scatter + (k0 * n_ / (k0 + n_)) * (shift * shift.transpose());
  return out;
}

DirParams Posterior::dir() const {
  DirParams out;
  out.q = dirPrior_.q + colorSum_;
  return out;
}

double logMvnPdf(const Vec2& x, const Vec2& mu, const Mat2& cov) {
  Vec2 d = x - mu;
  Mat2 inv = invert2(cov, "logMvnPdf");
  double q = d.dot(inv * d);
  return -kLog2Pi - 0.5 * logDet2(cov, "logMvnPdf") - 0.5 * q;
}

double logMultinomialPmf(const VecXi& counts, const VecX& p) {
  if (counts.size() != p.size()) throw DataError("logMultinomialPmf: size mismatch");
  int n = counts.sum();
  double lp = std::lgamma(n + 1.0);
  for (int v = 0; v < counts.size(); ++v) {
    int c = counts[v];
    if (c == 0) continue;
    if (p[v] <= 0.0) return kNegInf;
    lp += c * std::log(p[v]) - std::lgamma(c + 1.0);
  }
  return lp;
}

double logDirichletPdf(const VecX& p, const VecX& q) {
  if (p.size() != q.size()) throw DataError("logDirichletPdf: size mismatch");
  double lp = std::lgamma(q.sum());
  for (int v = 0; v < q.size(); ++v) {
    if (p[v] < 0.0) return kNegInf;
    if (q[v] != 1.0 && p[v] <= 0.0) return kNegInf;
    lp -= std::lgamma(q[v]);
    if (q[v] != 1.0) lp += (q[v] - 1.0) * std::log(p[v]);
  }
  return lp;
}

double logInverseWishartPdf(const Mat2& sigma, double nu, const Mat2& lambda) {
  constexpr int d = 2;
  Mat2 sigInv = invert2(sigma, "logInverseWishartPdf");
  double tr = (lambda * sigInv).trace();
  return 0.5 * nu * logDet2(lambda, "logInverseWishartPdf(lambda)") - 0.5 * nu * d * std::log(2.0) -
         logMvGamma2(nu / 2.0) - 0.5 * (nu + d + 1.0) * logDet2(sigma, "logInverseWishartPdf(sigma)") -
         0.5 * tr;
}

double logNiwPdf(const Vec2& mu, const Mat2& sigma, const NiwParams& params) {
  return logMvnPdf(mu, params.mu, sigma / params.kappa) +
         logInverseWishartPdf(sigma, params.nu, params.Lambda);
}

double logMultivariateT2(const Vec2& x, const Vec2& mu, const Mat2& scale, double nu) {
  if (nu <= 0.0) throw ConfigError("logMultivariateT2: dof must be > 0");
  Vec2 d = x - mu;
  Mat2 inv = invert2(scale, "logMultivariateT2");
  double q = d.dot(inv * d);
  return std::lgamma((nu + 2.0) / 2.0) - std::lgamma(nu / 2.0) - std::log(nu) - kLogPi -
         0.5 * logDet2(scale, "logMultivariateT2") - 0.5 * (nu + 2.0) * std::log1p(q / nu);
}

double logDirichletMultinomial(const VecXi& counts, const VecX& q) {
  if (counts.size() != q.size()) throw DataError("logDirichletMultinomial: size mismatch");
  int n = counts.sum();
  double qsum = q.sum();
  double lp = std::lgamma(n + 1.0) + std::lgamma(qsum) - std::lgamma(n + qsum);
  for (int v = 0; v < counts.size(); ++v) {
    lp += std::lgamma(counts[v] + q[v]) - std::lgamma(q[v]) - std::lgamma(counts[v] + 1.0);
  }
  return lp;
}

double likelihoodF(const Observation& obs, const ClusterParams& theta) {
  return logMvnPdf(obs.pos, theta.mean, theta.cov) +
         logMultinomialPmf(obs.colorCounts, theta.colorProbs);
}

double auxDensityGivenTheta(const AuxVar& aux, const ClusterParams& theta) {
  return logMvnPdf(aux.pos, theta.mean, theta.cov) +
         logMultinomialPmf(aux.colorCounts, theta.colorProbs);
}

Posterior posteriorUpdate(const NiwParams& niwPrior, const DirParams& dirPrior,
                          const std::vector<std::pair<Vec2, VecXi>>& data) {
  Posterior post(niwPrior, dirPrior);
  for (const auto& [pos, counts] : data) post.add(pos, counts);
  return post;
}

NiwParams niwPriorOf(const Hyperparams& h) {
  NiwParams p;
  p.mu = h.mu0;
  p.kappa = h.kappa0;
  p.nu = h.nu0;
  p.Lambda = h.Lambda0;
  return p;
}

DirParams dirPriorOf(const Hyperparams& h) {
  DirParams p;
  p.q = h.q0;
  return p;
}

ClusterParams samplePosteriorParams(const NiwParams& niw, const DirParams& dir, Rng& rng) {
  ClusterParams theta;
  theta.cov = sampleInverseWishart(niw.nu, niw.Lambda, rng);
  theta.mean = sampleMvn(niw.mu, theta.cov / niw.kappa, rng);
  theta.colorProbs = sampleDirichlet(dir.q, rng);
  return theta;
}

double logMarginalSpatial(const Vec2& pos, const Hyperparams& h) {
  if (h.nu0 <= 1.0) throw ConfigError("logMarginalSpatial: nu0 must exceed 1");
  Mat2 scale = h.Lambda0 * (h.kappa0 + 1.0) / (h.kappa0 * (h.nu0 - 1.0));
  return logMultivariateT2(pos, h.mu0, scale, h.nu0 - 1.0);
}

double logMarginalNewCluster(const Observation& obs, const Hyperparams& h) {
  return logMarginalSpatial(obs.pos, h) + logDirichletMultinomial(obs.colorCounts, h.q0);
}

std::pair<AuxVarSet, ClusterParams> sampleTransitionedParams(const ClusterParams& prevTheta,
                                                             const Hyperparams& h, Rng& rng) {
  AuxVarSet aux;
  aux.reserve(h.M);
  for (int m = 0; m < h.M; ++m) aux.push_back(sampleAuxFrom(prevTheta, h, rng));
  Posterior post = posteriorGivenAux(aux, h);
  return {std::move(aux), samplePosteriorParams(post.niw(), post.dir(), rng)};
}

Posterior posteriorGivenAux(const AuxVarSet& aux, const Hyperparams& h) {
  Posterior post(niwPriorOf(h), dirPriorOf(h));
  for (const auto& z : aux) post.add(z.pos, z.colorCounts);
  return post;
}

double transitionDensityGivenAux(const ClusterParams& theta, const AuxVarSet& aux,
                                 const Hyperparams& h) {
  Posterior post = posteriorGivenAux(aux, h);
  return logNiwPdf(theta.mean, theta.cov, post.niw()) + logDirichletPdf(theta.colorProbs, post.dir().q);
}

Vec2 sampleMvn(const Vec2& mu, const Mat2& cov, Rng& rng) {
  Eigen::LLT<Mat2> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericalError("sampleMvn: covariance not SPD");
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec2 z(gauss(rng), gauss(rng));
  return mu + llt.matrixL() * z;
}

Mat2 sampleInverseWishart(double nu, const Mat2& lambda, Rng& rng) {
  // W ~ Wishart(nu, lambda^{-1}) via Bartlett, then Sigma = W^{-1}.
  Mat2 lambdaInv = invert2(lambda, "sampleInverseWishart");
  Eigen::LLT<Mat2> llt(lambdaInv);
  if (llt.info() != Eigen::Success) throw NumericalError("sampleInverseWishart: scale not SPD");
  std::normal_distribution<double> gauss(0.0, 1.0);
  Mat2 a = Mat2::Zero();
  a(0, 0) = std::sqrt(sampleChiSq(nu, rng));
  a(1, 1) = std::sqrt(sampleChiSq(nu - 1.0, rng));
  a(1, 0) = gauss(rng);
  Mat2 la = llt.matrixL() * a;
  Mat2 w = la * la.transpose();
  return invert2(w, "sampleInverseWishart(result)");
}

VecX sampleDirichlet(const VecX& q, Rng& rng) {
  VecX out(q.size());
  double total = 0.0;
  for (int v = 0; v < q.size(); ++v) {
    std::gamma_distribution<double> g(q[v], 1.0);
    out[v] = g(rng);
    total += out[v];
  }
  if (total <= 0.0) throw NumericalError("sampleDirichlet: degenerate draw");
  return out / total;
}

VecXi sampleMultinomialCounts(int n, const VecX& p, Rng& rng) {
  VecXi counts = VecXi::Zero(p.size());
  double remaining = p.sum();
  int left = n;
  for (int v = 0; v < p.size() - 1 && left > 0; ++v) {
    double frac = remaining > 0.0 ? std::min(1.0, std::max(0.0, p[v] / remaining)) : 0.0;
    std::binomial_distribution<int> bin(left, frac);
    counts[v] = bin(rng);
    left -= counts[v];
    remaining -= p[v];
  }
  counts[p.size() - 1] += left;
  return counts;
}

ClusterParams sampleBase(const Hyperparams& h, Rng& rng) {
  return samplePosteriorParams(niwPriorOf(h), dirPriorOf(h), rng);
}

AuxVar sampleAuxFrom(const ClusterParams& theta, const Hyperparams& h, Rng& rng) {
  AuxVar z;
  z.pos = sampleMvn(theta.mean, theta.cov, rng);
  z.colorCounts = sampleMultinomialCounts(h.auxTrialCount, theta.colorProbs, rng);
  return z;
}

}  // namespace stats
}  // namespace ddptrack
