#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "ddptrack/eval.hpp"

using namespace ddptrack;
using namespace ddptrack::eval;

namespace {

Box box(double x0, double y0, double x1, double y1) { return Box{x0, y0, x1, y1}; }

double bruteForceMinCost(const std::vector<std::vector<double>>& cost) {
  int n = static_cast<int>(cost.size());
  int m = static_cast<int>(cost[0].size());
  int dim = std::max(n, m);
  std::vector<int> perm(dim);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (int i = 0; i < n; ++i)
      if (perm[i] < m) total += cost[i][perm[i]];
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

double assignmentCost(const std::vector<std::vector<double>>& cost, const std::vector<int>& assign) {
  double total = 0.0;
  for (std::size_t i = 0; i < assign.size(); ++i)
    if (assign[i] >= 0) total += cost[i][assign[i]];
  return total;
}

}  // namespace

TEST_CASE("overlapRatio rectangle cases") {
  Box a = box(0, 0, 10, 10);
  CHECK(overlapRatio(a, a) == doctest::Approx(1.0));
  CHECK(overlapRatio(a, box(20, 20, 30, 30)) == 0.0);
  CHECK(overlapRatio(a, box(5, 0, 15, 10)) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("hungarianAssign hand cases") {
  std::vector<int> a = hungarianAssign({{1, 2}, {2, 4}});
  CHECK(a[0] == 1);
  CHECK(a[1] == 0);

  std::vector<int> identity = hungarianAssign({{0, 5, 5}, {5, 0, 5}, {5, 5, 0}});
  CHECK(identity == std::vector<int>{0, 1, 2});

  CHECK_THROWS_AS(hungarianAssign({{1.0, std::numeric_limits<double>::infinity()}}), DataError);
}

TEST_CASE("hungarianAssign equals brute force up to n = 7") {
  Rng rng(1001);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::uniform_int_distribution<int> dims(1, 7);
  for (int trial = 0; trial < 300; ++trial) {
    int n = dims(rng), m = dims(rng);
    std::vector<std::vector<double>> cost(n, std::vector<double>(m));
    for (auto& row : cost)
      for (auto& v : row) v = u(rng);
    // pad-with-zero semantics: clamp to <= 0 so mapping is never worse than unmapped
    for (auto& row : cost)
      for (auto& v : row) v = std::min(v, 0.0);
    std::vector<int> assign = hungarianAssign(cost);
    CHECK(assignmentCost(cost, assign) == doctest::Approx(bruteForceMinCost(cost)).epsilon(1e-9));
    // one-to-one
    std::vector<int> used;
    for (int c : assign)
      if (c >= 0) used.push_back(c);
    std::sort(used.begin(), used.end());
    CHECK(std::adjacent_find(used.begin(), used.end()) == used.end());
  }
}

TEST_CASE("computeFda hand cases") {
  Box g = box(0, 0, 10, 10);
  CHECK(computeFda({g}, {g}) == doctest::Approx(1.0));
  CHECK(computeFda({g}, {box(5, 0, 15, 10)}) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(computeFda({g}, {g, box(50, 50, 60, 60)}) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(computeFda({}, {}) == 1.0);
  CHECK(computeFda({g}, {}) == 0.0);
}

TEST_CASE("computeSfda counts only frames where anything exists") {
  GroundTruth gt;
  BoxTrack g1;
  g1.id = 1;
  g1.boxes[1] = box(0, 0, 10, 10);
  g1.boxes[2] = box(0, 0, 10, 10);
  gt.objects.push_back(g1);

  BoxTrack d1;
  d1.id = 7;
  d1.boxes[1] = box(0, 0, 10, 10);   // FDA 1
  d1.boxes[2] = box(0, 0, 10, 5);    // overlap 1/2 -> FDA 1/2
  // frames 3..12 have neither ground truth nor detections
  CHECK(computeSfda(gt, {d1}) == doctest::Approx(0.75).epsilon(1e-12));

  CHECK(computeSfda(gt, {}) == 0.0);

  std::vector<BoxTrack> perfect{g1};
  perfect[0].id = 3;
  CHECK(computeSfda(gt, perfect) == doctest::Approx(1.0));
}

TEST_CASE("computeAta hand cases") {
  GroundTruth gt;
  BoxTrack g1;
  g1.id = 1;
  for (int t = 1; t <= 10; ++t) g1.boxes[t] = box(0, 0, 10, 10);
  gt.objects.push_back(g1);

  // perfect track over all frames
  BoxTrack d = g1;
  d.id = 5;
  AtaResult perfect = computeAta(gt, {d});
  CHECK(perfect.stda == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(perfect.ata == doctest::Approx(1.0).epsilon(1e-12));

  // perfect overlap on half the frames: union has 10 frames, 5 covered
  BoxTrack half;
  half.id = 6;
  for (int t = 1; t <= 5; ++t) half.boxes[t] = box(0, 0, 10, 10);
  AtaResult h = computeAta(gt, {half});
  CHECK(h.ata == doctest::Approx(0.5).epsilon(1e-12));

  // two objects, one tracked, one missed
  GroundTruth gt2 = gt;
  BoxTrack g2;
  g2.id = 2;
  for (int t = 1; t <= 10; ++t) g2.boxes[t] = box(100, 100, 120, 120);
  gt2.objects.push_back(g2);
  AtaResult m = computeAta(gt2, {d});
  CHECK(m.ata == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  REQUIRE(m.mapping.size() == 1);
  CHECK(m.mapping[0] == std::pair<int, int>(1, 5));
}

TEST_CASE("metric bounds and permutation invariance") {
  Rng rng(77);
  std::uniform_real_distribution<double> u(0.0, 80.0);
  std::uniform_int_distribution<int> nDist(0, 4), tDist(1, 6);
  for (int trial = 0; trial < 60; ++trial) {
    GroundTruth gt;
    std::vector<BoxTrack> det;
    int ng = nDist(rng), nd = nDist(rng);
    for (int i = 0; i < ng; ++i) {
      BoxTrack b;
      b.id = i + 1;
      int frames = tDist(rng);
      for (int t = 1; t <= frames; ++t) {
        double x = u(rng), y = u(rng);
        b.boxes[t] = box(x, y, x + 5 + u(rng) / 10, y + 5 + u(rng) / 10);
      }
      gt.objects.push_back(b);
    }
    for (int i = 0; i < nd; ++i) {
      BoxTrack b;
      b.id = 100 + i;
      int frames = tDist(rng);
      for (int t = 1; t <= frames; ++t) {
        double x = u(rng), y = u(rng);
        b.boxes[t] = box(x, y, x + 5 + u(rng) / 10, y + 5 + u(rng) / 10);
      }
      det.push_back(b);
    }
    EvalReport rep = evaluate(gt, det);
    CHECK(rep.sfda >= 0.0);
    CHECK(rep.sfda <= 1.0 + 1e-12);
    CHECK(rep.ata >= 0.0);
    CHECK(rep.ata <= 1.0 + 1e-12);
    for (const auto& [t, fda] : rep.fdaPerFrame) {
      CHECK(fda >= 0.0);
      CHECK(fda <= 1.0 + 1e-12);
    }
    // mapping stays one-to-one
    std::vector<int> gts, dets;
    for (const auto& [g, d] : rep.mapping) {
      gts.push_back(g);
      dets.push_back(d);
    }
    std::sort(gts.begin(), gts.end());
    std::sort(dets.begin(), dets.end());
    CHECK(std::adjacent_find(gts.begin(), gts.end()) == gts.end());
    CHECK(std::adjacent_find(dets.begin(), dets.end()) == dets.end());

    // permuting ids and order leaves the scores unchanged
    GroundTruth gtPerm = gt;
    std::reverse(gtPerm.objects.begin(), gtPerm.objects.end());
    for (auto& o : gtPerm.objects) o.id += 1000;
    std::vector<BoxTrack> detPerm = det;
    std::reverse(detPerm.begin(), detPerm.end());
    for (auto& o : detPerm) o.id += 500;
    EvalReport rep2 = evaluate(gtPerm, detPerm);
    CHECK(rep2.sfda == doctest::Approx(rep.sfda).epsilon(1e-12));
    CHECK(rep2.ata == doctest::Approx(rep.ata).epsilon(1e-12));
  }
}
