#include <doctest.h>

#include <cmath>
#include <map>

#include "ddptrack/model.hpp"

using namespace ddptrack;

TEST_CASE("urn assignment pmf matches hand arithmetic") {
  VecX p = urnAssignmentPmf({3, 1}, 1.0);
  CHECK(p.size() == 3);
  CHECK(p[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(p[2] == doctest::Approx(0.2).epsilon(1e-12));

  VecX empty = urnAssignmentPmf({}, 2.0);
  CHECK(empty.size() == 1);
  CHECK(empty[0] == 1.0);

  VecX limit = urnAssignmentPmf({5, 0}, 1e-4);
  CHECK(limit[0] == doctest::Approx(5.0 / 5.0001).epsilon(1e-9));
  CHECK(limit[1] == 0.0);
  CHECK(limit[2] == doctest::Approx(1e-4 / 5.0001).epsilon(1e-9));

  CHECK_THROWS_AS(urnAssignmentPmf({-1, 2}, 1.0), ConfigError);
  CHECK_THROWS_AS(urnAssignmentPmf({1}, 0.0), ConfigError);
}

TEST_CASE("urn pmf sums to one for random inputs") {
  Rng rng(17);
  std::uniform_int_distribution<int> sizeDist(0, 50);
  std::uniform_real_distribution<double> alphaDist(1e-6, 20.0);
  for (int rep = 0; rep < 500; ++rep) {
    std::uniform_int_distribution<int> kDist(0, 8);
    std::vector<int> m(kDist(rng));
    for (auto& v : m) v = sizeDist(rng);
    VecX p = urnAssignmentPmf(m, alphaDist(rng));
    CHECK(std::abs(p.sum() - 1.0) < 1e-12);
    CHECK(p.minCoeff() >= 0.0);
  }
}

TEST_CASE("size transition pmf hand cases") {
  CHECK(sizeTransitionPmf(2, 2, 0, 0.3) == doctest::Approx(0.49).epsilon(1e-12));
  CHECK(sizeTransitionPmf(2, 3, 0, 0.7) == 0.0);
  CHECK(sizeTransitionPmf(1, 1, 1, 0.3) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(sizeTransitionPmf(4, 6, 2, 0.5) == doctest::Approx(0.0625).epsilon(1e-12));
}

TEST_CASE("size transition sampling degenerate cases") {
  Rng rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    CHECK(sampleSizeTransition(4, 2, 1.0, rng) == 2);
    CHECK(sampleSizeTransition(0, 3, 0.4, rng) == 3);
  }
}

TEST_CASE("size transition sampling matches pmf (chi-square)") {
  Rng rng(99);
  const int prev = 4, assign = 2, n = 100000;
  const double rho = 0.5;
  std::map<int, int> hist;
  for (int i = 0; i < n; ++i) hist[sampleSizeTransition(prev, assign, rho, rng)] += 1;
  double chi2 = 0.0;
  int df = -1;
  for (int v = assign; v <= prev + assign; ++v) {
    double e = n * sizeTransitionPmf(prev, v, assign, rho);
    double o = hist.count(v) ? hist[v] : 0;
    chi2 += (o - e) * (o - e) / e;
    ++df;
  }
  // df = 4; chi-square critical value at significance 0.001
  CHECK(df == 4);
  CHECK(chi2 < 18.467);
}

TEST_CASE("lifetime distribution and deletion time") {
  Rng rng(5);
  for (int rep = 0; rep < 20; ++rep) CHECK(sampleLifetime(1.0, rng) == 0);
  CHECK(deletionTimeFromLifetime(5, 2) == 8);

  const double rho = 0.3;
  const int n = 100000;
  long sum = 0;
  int zeros = 0, ones = 0;
  for (int i = 0; i < n; ++i) {
    int l = sampleLifetime(rho, rng);
    sum += l;
    zeros += l == 0;
    ones += l == 1;
  }
  double mean = double(sum) / n;
  double expect = (1.0 - rho) / rho;
  double se = std::sqrt((1.0 - rho) / (rho * rho) / n);
  CHECK(std::abs(mean - expect) < 3.0 * se);
  CHECK(double(zeros) / n == doctest::Approx(0.3).epsilon(0.05));
  CHECK(double(ones) / n == doctest::Approx(0.21).epsilon(0.07));
}

TEST_CASE("reconstructSizes hand cases") {
  // two observations at t=1 assigned to cluster 1, d = 3 and d = 2
  std::vector<std::vector<int>> c{{1, 1}}, d{{3, 2}};
  CHECK(reconstructSizes(c, d, 1, 1) == 2);
  CHECK(reconstructSizes(c, d, 1, 2) == 1);
  CHECK(reconstructSizes(c, d, 2, 1) == 0);  // unknown cluster

  std::vector<std::vector<int>> c2{{}}, d2{{}};
  CHECK(reconstructSizes(c2, d2, 1, 1) == 0);

  std::vector<std::vector<int>> c3{{1}}, d3{{2}};
  CHECK(reconstructSizes(c3, d3, 1, 1) == 1);
  CHECK(reconstructSizes(c3, d3, 1, 2) == 0);
}

TEST_CASE("reconstructSizes agrees with forward simulation of D") {
  // One lifetime draw per observation drives both representations.
  Rng rng(42);
  const double rho = 0.35;
  for (int rep = 0; rep < 200; ++rep) {
    const int T = 5;
    std::uniform_int_distribution<int> nDist(0, 4), kDist(1, 2);
    std::vector<std::vector<int>> c(T), d(T);
    for (int t = 1; t <= T; ++t) {
      int n = nDist(rng);
      for (int i = 0; i < n; ++i) {
        c[t - 1].push_back(kDist(rng));
        d[t - 1].push_back(deletionTimeFromLifetime(t, sampleLifetime(rho, rng)));
      }
    }
    for (int k = 1; k <= 2; ++k) {
      for (int t = 1; t <= T; ++t) {
        // survivors of earlier frames are exactly the balls with d > t
        int survivors = 0;
        for (int tp = 1; tp < t; ++tp)
          for (std::size_t i = 0; i < c[tp - 1].size(); ++i)
            if (c[tp - 1][i] == k && d[tp - 1][i] > t) ++survivors;
        int newAssign = 0;
        for (std::size_t i = 0; i < c[t - 1].size(); ++i)
          if (c[t - 1][i] == k) ++newAssign;
        CHECK(survivors + newAssign == reconstructSizes(c, d, k, t));
      }
    }
  }
}

TEST_CASE("hyperparameter validation") {
  Hyperparams h = Hyperparams::syntheticDefaults(10);
  CHECK_NOTHROW(h.validate());
  CHECK(h.alpha == 0.1);
  CHECK(h.rho == 0.3);
  CHECK(h.M == 10);
  CHECK(h.kappa0 == 0.05);
  CHECK(h.nu0 == 5.0);
  CHECK(h.q0[0] == 5.0);

  Hyperparams pets = Hyperparams::petsDefaults(10);
  CHECK(pets.rho == 0.8);
  CHECK(pets.nu0 == 6.0);
  CHECK(pets.q0[3] == 3.0);

  Hyperparams bad = h;
  bad.rho = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = h;
  bad.alpha = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = h;
  bad.nu0 = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = h;
  bad.q0[2] = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = h;
  bad.Lambda0(0, 0) = -2.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}
