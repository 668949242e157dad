#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "ddptrack/stats.hpp"

using namespace ddptrack;
using namespace ddptrack::stats;

namespace {

Observation makeObs(double x, double y, std::initializer_list<int> counts, int t = 1) {
  Observation o;
  o.frame = t;
  o.pos = Vec2(x, y);
  o.colorCounts = VecXi(static_cast<int>(counts.size()));
  int i = 0;
  for (int c : counts) o.colorCounts[i++] = c;
  return o;
}

Hyperparams toyHyper(int V = 2) {
  Hyperparams h = Hyperparams::syntheticDefaults(V);
  h.q0 = VecX::Constant(V, 1.0);
  h.auxTrialCount = 3;
  return h;
}

}  // namespace

TEST_CASE("likelihoodF hand cases") {
  ClusterParams theta;
  theta.mean = Vec2(0.3, -0.2);
  theta.cov = Mat2::Identity();
  theta.colorProbs = VecX::Zero(3);
  theta.colorProbs << 1.0, 0.0, 0.0;

  Observation atMode = makeObs(0.3, -0.2, {4, 0, 0});
  CHECK(likelihoodF(atMode, theta) == doctest::Approx(std::log(1.0 / (2.0 * M_PI))).epsilon(1e-12));

  Observation shifted = makeObs(1.3, -0.2, {4, 0, 0});
  CHECK(likelihoodF(shifted, theta) ==
        doctest::Approx(std::log(1.0 / (2.0 * M_PI)) - 0.5).epsilon(1e-12));

  // uniform p: multinomial part is log C(n; counts) - n log V
  ClusterParams uni = theta;
  uni.colorProbs = VecX::Constant(3, 1.0 / 3.0);
  Observation mixed = makeObs(0.3, -0.2, {2, 1, 1});
  double coeff = std::lgamma(5.0) - std::lgamma(3.0) - std::lgamma(2.0) - std::lgamma(2.0);
  CHECK(likelihoodF(mixed, uni) ==
        doctest::Approx(std::log(1.0 / (2.0 * M_PI)) + coeff - 4.0 * std::log(3.0)).epsilon(1e-12));

  // zero-probability bin with positive count
  Observation bad = makeObs(0.3, -0.2, {0, 1, 3});
  CHECK(likelihoodF(bad, theta) == -std::numeric_limits<double>::infinity());

  ClusterParams badCov = theta;
  badCov.cov << 1.0, 2.0, 2.0, 1.0;  // not SPD
  CHECK_THROWS_AS(likelihoodF(atMode, badCov), NumericalError);
}

TEST_CASE("posteriorUpdate counts and empty-data identity") {
  Hyperparams h = Hyperparams::syntheticDefaults(4);
  NiwParams prior = niwPriorOf(h);
  DirParams dprior = dirPriorOf(h);

  Posterior empty = posteriorUpdate(prior, dprior, {});
  CHECK(empty.niw().kappa == prior.kappa);
  CHECK(empty.niw().nu == prior.nu);
  CHECK(empty.niw().mu == prior.mu);
  CHECK(empty.niw().Lambda == prior.Lambda);
  CHECK(empty.dir().q == dprior.q);

  std::vector<std::pair<Vec2, VecXi>> ten;
  for (int i = 0; i < 10; ++i) ten.emplace_back(Vec2(0.1 * i, -0.2), VecXi::Ones(4));
  Posterior post = posteriorUpdate(prior, dprior, ten);
  CHECK(post.niw().kappa == doctest::Approx(10.05).epsilon(1e-12));
  CHECK(post.niw().nu == doctest::Approx(15.0).epsilon(1e-12));
  CHECK(post.dir().q[0] == doctest::Approx(15.0).epsilon(1e-12));
}

TEST_CASE("posteriorUpdate single datum, conjugate form") {
  NiwParams prior;
  prior.mu = Vec2(0, 0);
  prior.kappa = 1.0;
  prior.nu = 5.0;
  prior.Lambda = Mat2::Identity();
  DirParams dprior;
  dprior.q = VecX::Constant(2, 1.0);

  Posterior post = posteriorUpdate(prior, dprior, {{Vec2(2, 0), VecXi::Zero(2)}});
  NiwParams n = post.niw();
  CHECK(n.mu.x() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(n.mu.y() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(n.kappa == doctest::Approx(2.0).epsilon(1e-12));
  // single datum: no scatter, only the mean-shift term (kappa0*1/(kappa0+1)) * dd^T
  Mat2 expect = Mat2::Identity();
  expect(0, 0) += 0.5 * 4.0;
  CHECK((n.Lambda - expect).norm() < 1e-12);
}

TEST_CASE("posteriorUpdate is order independent") {
  Hyperparams h = Hyperparams::syntheticDefaults(3);
  Rng rng(7);
  std::normal_distribution<double> g(0.0, 2.0);
  std::vector<std::pair<Vec2, VecXi>> A, B;
  for (int i = 0; i < 6; ++i) A.emplace_back(Vec2(g(rng), g(rng)), VecXi::Constant(3, i));
  for (int i = 0; i < 4; ++i) B.emplace_back(Vec2(g(rng), g(rng)), VecXi::Constant(3, 1));

  Posterior batch(niwPriorOf(h), dirPriorOf(h));
  for (const auto& [x, c] : A) batch.add(x, c);
  for (const auto& [x, c] : B) batch.add(x, c);

  Posterior sequential = posteriorUpdate(niwPriorOf(h), dirPriorOf(h), A);
  for (const auto& [x, c] : B) sequential.add(x, c);

  CHECK(batch.niw().mu == sequential.niw().mu);
  CHECK(batch.niw().Lambda == sequential.niw().Lambda);
  CHECK(batch.niw().kappa == sequential.niw().kappa);
  CHECK(batch.dir().q == sequential.dir().q);
}

TEST_CASE("Bayes consistency: posterior x marginal = likelihood x prior") {
  // log NiWDir(theta | post(x)) + log marginal(x) == log F(x | theta) + log NiWDir(theta | G0)
  Hyperparams h = toyHyper(3);
  Rng rng(21);
  for (int rep = 0; rep < 25; ++rep) {
    ClusterParams theta = sampleBase(h, rng);
    std::uniform_int_distribution<int> cdist(0, 4);
    Observation x = makeObs(0.5 * cdist(rng) - 1.0, 0.3 * cdist(rng) - 0.6,
                            {cdist(rng), cdist(rng), cdist(rng)});
    if (x.countTotal() == 0) x.colorCounts[0] = 1;
    Posterior post = posteriorUpdate(niwPriorOf(h), dirPriorOf(h), {{x.pos, x.colorCounts}});
    double lhs = logNiwPdf(theta.mean, theta.cov, post.niw()) +
                 logDirichletPdf(theta.colorProbs, post.dir().q) + logMarginalNewCluster(x, h);
    double rhs = likelihoodF(x, theta) + logNiwPdf(theta.mean, theta.cov, niwPriorOf(h)) +
                 logDirichletPdf(theta.colorProbs, h.q0);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
  }
}

TEST_CASE("samplePosteriorParams Monte Carlo moments") {
  NiwParams niw;
  niw.mu = Vec2(1.5, -0.5);
  niw.kappa = 4.0;
  niw.nu = 12.0;
  niw.Lambda = Mat2::Identity() * 3.0;
  DirParams dir;
  dir.q = VecX::Zero(3);
  dir.q << 2.0, 5.0, 3.0;

  Rng rng(31);
  const int n = 100000;
  Vec2 meanMu = Vec2::Zero();
  VecX meanP = VecX::Zero(3);
  for (int i = 0; i < n; ++i) {
    ClusterParams t = samplePosteriorParams(niw, dir, rng);
    meanMu += t.mean;
    meanP += t.colorProbs;
  }
  meanMu /= n;
  meanP /= n;
  // Var(mu_i) = E[Sigma_ii]/kappa = Lambda_ii/((nu-3) kappa)
  double sd = std::sqrt(3.0 / (9.0 * 4.0) / n);
  CHECK(std::abs(meanMu.x() - 1.5) < 3.5 * sd);
  CHECK(std::abs(meanMu.y() + 0.5) < 3.5 * sd);
  for (int v = 0; v < 3; ++v) {
    double m = dir.q[v] / dir.q.sum();
    double se = std::sqrt(m * (1 - m) / (dir.q.sum() + 1) / n);
    CHECK(std::abs(meanP[v] - m) < 3.5 * se);
  }
}

TEST_CASE("logMarginalNewCluster color part hand cases") {
  Hyperparams h = toyHyper(2);
  Observation one = makeObs(0, 0, {1, 0});
  double spatial = logMarginalSpatial(one.pos, h);
  CHECK(logMarginalNewCluster(one, h) - spatial == doctest::Approx(std::log(0.5)).epsilon(1e-12));

  Observation two = makeObs(0, 0, {2, 0});
  CHECK(logMarginalNewCluster(two, h) - spatial ==
        doctest::Approx(std::log(1.0 / 3.0)).epsilon(1e-12));
}

TEST_CASE("logMarginalNewCluster spatial mode value") {
  Hyperparams h = Hyperparams::syntheticDefaults(10);  // kappa0=0.05, nu0=5, Lambda0=I
  double density = std::exp(logMarginalSpatial(Vec2(0, 0), h));
  // t_{4}(0 | 0, 5.25 I): Gamma(3) / (Gamma(2) * 4 * pi * 5.25)
  double expected = 2.0 / (4.0 * M_PI * 5.25);
  CHECK(density == doctest::Approx(expected).epsilon(1e-10));
  Hyperparams bad = h;
  bad.nu0 = 1.0;
  CHECK_THROWS_AS(logMarginalSpatial(Vec2(0, 0), bad), ConfigError);
}

TEST_CASE("logMarginalNewCluster matches Monte Carlo integration") {
  Hyperparams h = Hyperparams::syntheticDefaults(4);
  Rng rng(202);
  const int n = 200000;
  std::vector<Observation> tests = {makeObs(0.5, -0.3, {5, 2, 1, 1}), makeObs(-1.0, 0.8, {0, 9, 0, 0}),
                                    makeObs(2.0, 1.5, {3, 3, 2, 1})};
  for (const auto& x : tests) {
    std::vector<double> logf(n);
    for (int i = 0; i < n; ++i) {
      ClusterParams theta = sampleBase(h, rng);
      logf[i] = likelihoodF(x, theta);
    }
    double mc = logSumExp(logf) - std::log(double(n));
    double exact = logMarginalNewCluster(x, h);
    CHECK(std::exp(mc - exact) == doctest::Approx(1.0).epsilon(0.05));
  }
}

TEST_CASE("transition kernel leaves the base distribution invariant (smoke)") {
  Hyperparams h = Hyperparams::syntheticDefaults(4);
  Rng rng(404);
  const int reps = 4000, steps = 25;
  Vec2 sumMu = Vec2::Zero();
  Mat2 sumMuSq = Mat2::Zero();
  Mat2 sumSigma = Mat2::Zero();
  VecX sumP = VecX::Zero(4);
  for (int r = 0; r < reps; ++r) {
    ClusterParams theta = sampleBase(h, rng);
    for (int s = 0; s < steps; ++s) theta = sampleTransitionedParams(theta, h, rng).second;
    sumMu += theta.mean;
    sumMuSq += theta.mean * theta.mean.transpose();
    sumSigma += theta.cov;
    sumP += theta.colorProbs;
  }
  Vec2 meanMu = sumMu / reps;
  Mat2 covMu = sumMuSq / reps - meanMu * meanMu.transpose();
  Mat2 meanSigma = sumSigma / reps;
  // Analytic: E[Sigma] = Lambda0/(nu0-3) = 0.5 I; Cov[mu] = E[Sigma]/kappa0 = 10 I; E[p] = 1/V.
  CHECK(std::abs(meanMu.x()) < 0.35);
  CHECK(std::abs(meanMu.y()) < 0.35);
  CHECK(meanSigma(0, 0) == doctest::Approx(0.5).epsilon(0.15));
  CHECK(meanSigma(1, 1) == doctest::Approx(0.5).epsilon(0.15));
  CHECK(covMu(0, 0) == doctest::Approx(10.0).epsilon(0.15));
  CHECK(covMu(1, 1) == doctest::Approx(10.0).epsilon(0.15));
  for (int v = 0; v < 4; ++v) CHECK(sumP[v] / reps == doctest::Approx(0.25).epsilon(0.05));
}

TEST_CASE("sampleTransitionedParams forced-addition and zero-scatter cases") {
  Hyperparams h = Hyperparams::syntheticDefaults(3);
  Rng rng(55);
  ClusterParams theta = sampleBase(h, rng);
  auto [aux, next] = sampleTransitionedParams(theta, h, rng);
  CHECK(aux.size() == 10);
  Posterior post = posteriorGivenAux(aux, h);
  CHECK(post.niw().kappa == doctest::Approx(10.05).epsilon(1e-12));
  CHECK(post.niw().nu == doctest::Approx(15.0).epsilon(1e-12));

  // identical positions: scatter vanishes, only the mean-shift term remains
  AuxVarSet same;
  for (int m = 0; m < 4; ++m) {
    AuxVar z;
    z.pos = Vec2(1.0, 2.0);
    z.colorCounts = VecXi::Zero(3);
    z.colorCounts[0] = h.auxTrialCount;
    same.push_back(z);
  }
  NiwParams n = posteriorGivenAux(same, h).niw();
  Vec2 shift = Vec2(1.0, 2.0) - h.mu0;
  Mat2 expect = h.Lambda0 + (h.kappa0 * 4.0 / (h.kappa0 + 4.0)) * (shift * shift.transpose());
  CHECK((n.Lambda - expect).norm() < 1e-12);
}

TEST_CASE("transitionDensityGivenAux mode dominance and scaling sign") {
  Hyperparams h = toyHyper(3);
  Rng rng(88);
  ClusterParams prev = sampleBase(h, rng);
  AuxVarSet aux;
  for (int m = 0; m < 6; ++m) aux.push_back(sampleAuxFrom(prev, h, rng));
  Posterior post = posteriorGivenAux(aux, h);
  NiwParams n = post.niw();
  DirParams d = post.dir();

  ClusterParams mode;
  mode.mean = n.mu;
  mode.cov = n.Lambda / (n.nu + 4.0);  // NiW joint mode in Sigma: Lambda/(nu+d+2)
  mode.colorProbs = (d.q.array() - 1.0).max(1e-9).matrix();
  mode.colorProbs /= mode.colorProbs.sum();
  double atMode = transitionDensityGivenAux(mode, aux, h);
  std::normal_distribution<double> g(0.0, 0.05);
  for (int i = 0; i < 100; ++i) {
    ClusterParams pert = mode;
    pert.mean += Vec2(g(rng), g(rng));
    pert.cov(0, 0) *= std::exp(g(rng));
    pert.cov(1, 1) *= std::exp(g(rng));
    VecX delta(3);
    delta << g(rng), g(rng), g(rng);
    pert.colorProbs = (mode.colorProbs + 0.1 * delta.cwiseAbs()).cwiseMax(1e-8);
    pert.colorProbs /= pert.colorProbs.sum();
    CHECK(transitionDensityGivenAux(pert, aux, h) <= atMode + 1e-9);
  }

  // Scaling the IW scale matrix by c at fixed Sigma changes the log-density by
  // nu log c - (c-1) tr(Lambda Sigma^{-1})/2; negative for this case.
  Mat2 sigma = Mat2::Identity() * 0.1;
  Mat2 lambda = Mat2::Identity();
  double nu = 10.0;
  double before = logInverseWishartPdf(sigma, nu, lambda);
  double after = logInverseWishartPdf(sigma, nu, 2.0 * lambda);
  double expected = nu * std::log(2.0) - 0.5 * (2.0 - 1.0) * (lambda * sigma.inverse()).trace();
  CHECK(after - before == doctest::Approx(expected).epsilon(1e-9));
  CHECK(after < before);
}

TEST_CASE("aux density equals likelihood at the same point") {
  Hyperparams h = toyHyper(3);
  Rng rng(99);
  ClusterParams theta = sampleBase(h, rng);
  AuxVar z;
  z.pos = theta.mean;
  z.colorCounts = VecXi::Zero(3);
  z.colorCounts[1] = 2;
  Observation o = makeObs(theta.mean.x(), theta.mean.y(), {0, 2, 0});
  CHECK(auxDensityGivenTheta(z, theta) == likelihoodF(o, theta));
}

TEST_CASE("density slices are monotone away from the center") {
  ClusterParams theta;
  theta.mean = Vec2(0, 0);
  theta.cov = Mat2::Identity();
  theta.colorProbs = VecX::Constant(2, 0.5);
  double prevVal = 1.0;
  for (double r = 0.0; r < 4.0; r += 0.25) {
    Observation o = makeObs(r, 0.0, {1, 0});
    double v = likelihoodF(o, theta);
    CHECK(std::isfinite(v));
    if (r > 0.0) CHECK(v < prevVal);
    prevVal = v;
  }
  Hyperparams h = toyHyper(2);
  prevVal = 1.0;
  for (double r = 0.0; r < 4.0; r += 0.25) {
    double v = logMarginalSpatial(Vec2(r, 0.0), h);
    CHECK(std::isfinite(v));
    if (r > 0.0) CHECK(v < prevVal);
    prevVal = v;
  }
}

TEST_CASE("inverse-Wishart sampler moments") {
  Rng rng(1234);
  const double nu = 10.0;
  Mat2 lambda;
  lambda << 2.0, 0.3, 0.3, 1.0;
  Mat2 sum = Mat2::Zero();
  const int n = 50000;
  for (int i = 0; i < n; ++i) sum += sampleInverseWishart(nu, lambda, rng);
  Mat2 mean = sum / n;
  Mat2 expect = lambda / (nu - 3.0);  // E[IW] = Lambda/(nu - d - 1)
  CHECK((mean - expect).norm() < 0.05 * expect.norm());
}
