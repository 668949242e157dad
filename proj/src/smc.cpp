#include "ddptrack/smc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <thread>

namespace ddptrack {
namespace smc {
namespace {

struct Particle {
  int K = 0;                  // clusters created so far in this lineage
  std::vector<int> carry;     // carried-in sizes for the current frame, per cluster
  std::vector<ClusterParams> thetaPrev;  // theta at t-1 per cluster
  double cumLogWeight = 0.0;  // sum of log weight increments along the lineage
  double logW = 0.0;          // unnormalized log weight since the last resample
};

// Everything needed to rebuild the chosen trajectory afterwards.
struct FrameRecord {
  int ancestor = 0;
  int K = 0;
  double cumLogWeight = 0.0;
  std::vector<int> assign;
  std::vector<int> aliveIds;
  std::vector<int> aliveSizes;
  std::vector<ClusterParams> aliveThetas;
};

struct FrameWork {
  // Scratch owned by the per-particle frame update.
  std::vector<int> sizes;
  std::vector<ClusterParams> thetaCur;
  std::vector<char> hasCur;
  std::vector<int> assign;
};

}  // namespace

void SmcConfig::validate() const {
  if (particles < 1) throw ConfigError("particles must be >= 1");
  if (gibbsSweeps < 1) throw ConfigError("gibbsSweeps must be >= 1");
  if (essFraction <= 0.0 || essFraction > 1.0) throw ConfigError("essFraction must be in (0, 1]");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  hyper.validate();
}

VecX smcAssignmentPmf(const Observation& x, const std::vector<int>& sizes,
                      const std::vector<const ClusterParams*>& thetas, const Hyperparams& h) {
  if (sizes.size() != thetas.size()) throw DataError("smcAssignmentPmf: size mismatch");
  int K = static_cast<int>(sizes.size());
  std::vector<double> logw(K + 1, kNegInf);
  for (int k = 0; k < K; ++k) {
    if (sizes[k] <= 0) continue;
    logw[k] = std::log(double(sizes[k])) + stats::likelihoodF(x, *thetas[k]);
  }
  logw[K] = std::log(h.alpha) + stats::logMarginalNewCluster(x, h);
  double lse = logSumExp(logw);
  VecX p(K + 1);
  for (int k = 0; k <= K; ++k) p[k] = logw[k] == kNegInf ? 0.0 : std::exp(logw[k] - lse);
  p /= p.sum();
  return p;
}

ClusterParams proposalQ1(const std::vector<const Observation*>& members, const Hyperparams& h,
                         Rng& rng) {
  if (members.empty()) throw DataError("proposalQ1: needs at least one member");
  stats::Posterior post(stats::niwPriorOf(h), stats::dirPriorOf(h));
  for (const Observation* o : members) post.add(o->pos, o->colorCounts);
  return stats::samplePosteriorParams(post.niw(), post.dir(), rng);
}

ClusterParams proposalQ2(const ClusterParams& prevTheta,
                         const std::vector<const Observation*>& members, const Hyperparams& h,
                         Rng& rng) {
  stats::Posterior post(stats::niwPriorOf(h), stats::dirPriorOf(h));
  for (int m = 0; m < h.M; ++m) {
    AuxVar z = stats::sampleAuxFrom(prevTheta, h, rng);
    post.add(z.pos, z.colorCounts);
  }
  for (const Observation* o : members) post.add(o->pos, o->colorCounts);
  return stats::samplePosteriorParams(post.niw(), post.dir(), rng);
}

std::vector<int> systematicResample(const std::vector<double>& normalizedWeights, Rng& rng) {
  int L = static_cast<int>(normalizedWeights.size());
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  double u = uni(rng) / L;
  std::vector<int> out(L);
  double cum = 0.0;
  int j = 0;
  for (int i = 0; i < L; ++i) {
    cum += normalizedWeights[i];
    while (j < L && u < cum) {
      out[j] = i;
      u += 1.0 / L;
      ++j;
    }
  }
  while (j < L) out[j++] = L - 1;
  return out;
}

double effectiveSampleSize(const std::vector<double>& normalizedWeights) {
  double s2 = 0.0;
  for (double w : normalizedWeights) s2 += w * w;
  return s2 > 0.0 ? 1.0 / s2 : 0.0;
}

namespace {

// Runs frame t for one particle; fills the frame record and the weight increment.
void processFrame(Particle& p, const std::vector<Observation>& frameObs, int t,
                  const SmcConfig& config, Rng& rng, FrameRecord& rec) {
  const Hyperparams& h = config.hyper;
  const int Kprev = p.K;
  const int N = static_cast<int>(frameObs.size());
  FrameWork w;
  w.sizes = p.carry;
  w.thetaCur = p.thetaPrev;  // placeholder values; refreshed below
  w.hasCur.assign(p.K, 0);
  w.assign.assign(N, 0);

  auto thetaFor = [&](int k) -> const ClusterParams& {
    return w.hasCur[k] ? w.thetaCur[k] : p.thetaPrev[k];
  };

  double proposalLog = 0.0;
  for (int s = 1; s <= config.gibbsSweeps; ++s) {
    bool finalSweep = s == config.gibbsSweeps;
    for (int i = 0; i < N; ++i) {
      const Observation& x = frameObs[i];
      if (s > 1) w.sizes[w.assign[i] - 1] -= 1;
      std::vector<const ClusterParams*> thetas(p.K);
      for (int k = 0; k < p.K; ++k) thetas[k] = &thetaFor(k);
      VecX probs = smcAssignmentPmf(x, w.sizes, thetas, h);
      std::uniform_real_distribution<double> uni(0.0, 1.0);
      double u = uni(rng), acc = 0.0;
      int pick = p.K;
      for (int k = 0; k <= p.K; ++k) {
        acc += probs[k];
        if (u <= acc) {
          pick = k;
          break;
        }
      }
      if (finalSweep) proposalLog += std::log(probs[pick]);
      if (pick == p.K) {
        p.K += 1;
        w.sizes.push_back(1);
        w.hasCur.push_back(1);
        w.thetaCur.push_back(proposalQ1({&x}, h, rng));
        if (static_cast<int>(p.thetaPrev.size()) < p.K) p.thetaPrev.resize(p.K);
        w.assign[i] = p.K;
      } else {
        w.sizes[pick] += 1;
        w.assign[i] = pick + 1;
      }
    }
    // Parameter refresh for every cluster present at this frame.
    std::vector<std::vector<const Observation*>> members(p.K);
    for (int i = 0; i < N; ++i) members[w.assign[i] - 1].push_back(&frameObs[i]);
    for (int k = 0; k < p.K; ++k) {
      if (k >= Kprev) {
        if (!members[k].empty()) {
          w.thetaCur[k] = proposalQ1(members[k], h, rng);
          w.hasCur[k] = 1;
        }
      } else if (!members[k].empty()) {
        w.thetaCur[k] = proposalQ2(p.thetaPrev[k], members[k], h, rng);
        w.hasCur[k] = 1;
      } else if (w.sizes[k] > 0) {
        w.thetaCur[k] = stats::sampleTransitionedParams(p.thetaPrev[k], h, rng).second;
        w.hasCur[k] = 1;
      }
    }
  }

  // Weight increment: joint probability of the frame's data and assignments under the
  // final parameters and urn state, over the realized proposal probability.
  double jointLog = 0.0;
  {
    std::vector<int> counts = p.carry;
    counts.resize(p.K, 0);
    double tot = 0.0;
    for (int k = 0; k < p.K; ++k) tot += counts[k];
    for (int i = 0; i < N; ++i) {
      int k = w.assign[i] - 1;
      double num = counts[k] > 0 ? double(counts[k]) : h.alpha;
      jointLog += std::log(num) - std::log(tot + h.alpha);
      jointLog += stats::likelihoodF(frameObs[i], w.thetaCur[k]);
      counts[k] += 1;
      tot += 1.0;
    }
  }
  double incr = N > 0 ? jointLog - proposalLog : 0.0;
  p.cumLogWeight += incr;
  p.logW += incr;

  // Record alive clusters, then the size transition for the next frame.
  rec.K = p.K;
  rec.cumLogWeight = p.cumLogWeight;
  rec.assign = w.assign;
  std::vector<char> hasMember(p.K, 0);
  for (int i = 0; i < N; ++i) hasMember[w.assign[i] - 1] = 1;
  for (int k = 0; k < p.K; ++k) {
    if (w.sizes[k] > 0 || hasMember[k]) {
      rec.aliveIds.push_back(k + 1);
      rec.aliveSizes.push_back(w.sizes[k]);
      rec.aliveThetas.push_back(w.hasCur[k] ? w.thetaCur[k] : p.thetaPrev[k]);
    }
  }

  p.carry.assign(p.K, 0);
  for (int k = 0; k < p.K; ++k)
    p.carry[k] = sampleSizeTransition(w.sizes[k], 0, h.rho, rng);
  p.thetaPrev.resize(p.K);
  for (int k = 0; k < p.K; ++k)
    if (w.hasCur[k]) p.thetaPrev[k] = w.thetaCur[k];
}

LatentState assembleMap(const std::vector<std::vector<FrameRecord>>& history,
                        const ObservationSet& obs, int V) {
  int T = static_cast<int>(history.size());
  int L = static_cast<int>(history[0].size());
  int best = 0;
  for (int l = 1; l < L; ++l)
    if (history[T - 1][l].cumLogWeight > history[T - 1][best].cumLogWeight) best = l;

  std::vector<const FrameRecord*> path(T);
  int cur = best;
  for (int t = T; t >= 1; --t) {
    path[t - 1] = &history[t - 1][cur];
    cur = history[t - 1][cur].ancestor;
  }

  LatentState s;
  s.T = T;
  s.V = V;
  s.logScore = history[T - 1][best].cumLogWeight;
  s.assignments.resize(T);
  int K = path[T - 1]->K;
  std::vector<int> birth(K, 0), last(K, 0);
  std::vector<std::vector<int>> sizes(K, std::vector<int>(T, 0));
  std::vector<std::vector<const ClusterParams*>> thetas(K,
                                                        std::vector<const ClusterParams*>(T, nullptr));
  for (int t = 1; t <= T; ++t) {
    const FrameRecord& r = *path[t - 1];
    s.assignments[t - 1] = r.assign;
    for (std::size_t j = 0; j < r.aliveIds.size(); ++j) {
      int k = r.aliveIds[j] - 1;
      sizes[k][t - 1] = r.aliveSizes[j];
      thetas[k][t - 1] = &r.aliveThetas[j];
      if (birth[k] == 0) birth[k] = t;
      last[k] = t;
    }
  }
  for (int k = 0; k < K; ++k) {
    if (birth[k] == 0) continue;
    ClusterTimeline ct;
    ct.id = k + 1;
    ct.birth = birth[k];
    ct.lastAlive = last[k];
    ct.sizes = sizes[k];
    for (int t = birth[k]; t <= last[k]; ++t) {
      // A cluster can momentarily lack a record if it held no size at a frame
      // between birth and death; reuse the previous parameters there.
      if (thetas[k][t - 1] != nullptr)
        ct.params.push_back(*thetas[k][t - 1]);
      else
        ct.params.push_back(ct.params.back());
    }
    s.clusters.push_back(std::move(ct));
  }
  return s;
}

}  // namespace

SmcResult runSmc(const ObservationSet& obs, const SmcConfig& config) {
  config.validate();
  std::size_t total = 0;
  for (const auto& f : obs) total += f.size();
  if (total == 0) throw DataError("runSmc: observation set is empty");
  int T = static_cast<int>(obs.size());
  int L = config.particles;

  std::vector<Particle> particles(L);
  std::vector<std::vector<FrameRecord>> history(T, std::vector<FrameRecord>(L));
  std::vector<FrameDiagnostics> diags;

  for (int t = 1; t <= T; ++t) {
    auto start = std::chrono::steady_clock::now();
    auto work = [&](int lo, int hi) {
      for (int l = lo; l < hi; ++l) {
        Rng rng = makeStream(config.seed, static_cast<std::uint64_t>(t),
                             static_cast<std::uint64_t>(l));
        processFrame(particles[l], obs[t - 1], t, config, rng, history[t - 1][l]);
      }
    };
    if (config.workers == 1 || L == 1) {
      work(0, L);
    } else {
      int nw = std::min(config.workers, L);
      std::vector<std::thread> pool;
      int chunk = (L + nw - 1) / nw;
      for (int w = 0; w < nw; ++w)
        pool.emplace_back(work, w * chunk, std::min(L, (w + 1) * chunk));
      for (auto& th : pool) th.join();
    }

    std::vector<double> logw(L);
    for (int l = 0; l < L; ++l) logw[l] = particles[l].logW;
    double lse = logSumExp(logw);
    if (lse == kNegInf)
      throw NumericalError("runSmc: particle weights collapsed at frame " + std::to_string(t));
    std::vector<double> norm(L);
    for (int l = 0; l < L; ++l) norm[l] = std::exp(logw[l] - lse);

    FrameDiagnostics d;
    d.frame = t;
    d.ess = effectiveSampleSize(norm);
    int best = 0;
    for (int l = 1; l < L; ++l)
      if (particles[l].cumLogWeight > particles[best].cumLogWeight) best = l;
    d.kBest = static_cast<int>(history[t - 1][best].aliveIds.size());

    bool doResample = config.resampleMode == SmcConfig::Resample::kEveryStep
                          ? true
                          : d.ess < config.essFraction * L;
    if (doResample && L > 1 && t < T) {
      Rng rng = makeStream(config.seed, static_cast<std::uint64_t>(t), 0x5e5a317eULL);
      std::vector<int> ancestors = systematicResample(norm, rng);
      std::vector<Particle> next(L);
      for (int l = 0; l < L; ++l) {
        next[l] = particles[ancestors[l]];
        next[l].logW = 0.0;
      }
      particles = std::move(next);
      // frame t's records are already filled; ancestry applies to frame t+1's rows
      for (int l = 0; l < L; ++l) history[t][l].ancestor = ancestors[l];
      d.resampled = true;
    } else if (t < T) {
      for (int l = 0; l < L; ++l) history[t][l].ancestor = l;
    }
    d.wallMs =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    diags.push_back(d);
  }

  SmcResult result;
  result.map = assembleMap(history, obs, config.hyper.V());
  result.diagnostics = std::move(diags);
  {
    std::vector<double> logw(L);
    for (int l = 0; l < L; ++l) logw[l] = particles[l].logW;
    double lse = logSumExp(logw);
    result.finalWeights.resize(L);
    result.finalBlockCounts.resize(L);
    for (int l = 0; l < L; ++l) {
      result.finalWeights[l] = std::exp(logw[l] - lse);
      std::set<int> blocks;
      int cur = l;
      for (int t = T; t >= 1; --t) {
        for (int id : history[t - 1][cur].assign) blocks.insert(id);
        cur = history[t - 1][cur].ancestor;
      }
      result.finalBlockCounts[l] = static_cast<int>(blocks.size());
    }
  }
  return result;
}

void writeDiagnosticsCsv(const std::vector<FrameDiagnostics>& diags, const std::string& headerLine,
                         const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write diagnostics: " + path);
  out << "# " << headerLine << "\n";
  out << "frame,ess,resampled,kBest,wallMs\n";
  for (const auto& d : diags)
    out << d.frame << "," << d.ess << "," << (d.resampled ? 1 : 0) << "," << d.kBest << ","
        << d.wallMs << "\n";
}

}  // namespace smc
}  // namespace ddptrack
