#include "ddptrack/mcmc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

namespace ddptrack {
namespace mcmc {
namespace {

// Sum of log v over v = a..b (a >= 1).
double logRangeSum(int a, int b) {
  if (b < a) return 0.0;
  return std::lgamma(b + 1.0) - std::lgamma(static_cast<double>(a));
}

// Log product of the urn numerators contributed by one cluster in one frame:
// r members drawn on top of `base` carried-in balls. A block founds with weight
// alpha at its birth frame; members over an empty urn anywhere else are impossible.
double frameLogProd(int base, int r, double logAlpha, bool isBirth) {
  if (r == 0) return 0.0;
  if (base == 0) {
    if (!isBirth) return kNegInf;
    return logAlpha + logRangeSum(1, r - 1);
  }
  return logRangeSum(base, base + r - 1);
}

double denomSum(double startTotal, double alpha, int nObs) {
  if (nObs == 0) return 0.0;
  return std::lgamma(startTotal + alpha + nObs) - std::lgamma(startTotal + alpha);
}

}  // namespace

void McmcConfig::validate() const {
  if (sweeps < 1) throw ConfigError("sweeps must be >= 1");
  if (maxLifetimeSlack < 2) throw ConfigError("maxLifetimeSlack must be >= 2");
  hyper.validate();
}

Chain::Chain(const ObservationSet& obs, const Hyperparams& hyper, int deletionCap)
    : T_(static_cast<int>(obs.size())),
      V_(hyper.V()),
      dCap_(deletionCap),
      hyper_(hyper),
      g0Niw_(stats::niwPriorOf(hyper)),
      g0Dir_(stats::dirPriorOf(hyper)),
      logAlpha_(std::log(hyper.alpha)),
      obs_(obs) {
  if (T_ < 1) throw DataError("Chain: empty observation set");
  if (dCap_ < T_ + 2) throw ConfigError("Chain: deletion cap must be at least T + 2");
  c_.resize(T_);
  d_.resize(T_);
  logMarginalCache_.resize(T_);
  totStart_.assign(T_, 0);
  for (int t = 1; t <= T_; ++t) {
    const auto& frame = obs_[t - 1];
    c_[t - 1].assign(frame.size(), 0);
    d_[t - 1].assign(frame.size(), t + 1);
    logMarginalCache_[t - 1].resize(frame.size());
    for (std::size_t i = 0; i < frame.size(); ++i) {
      if (frame[i].frame != t) throw DataError("Chain: observation frame index mismatch");
      if (static_cast<int>(frame[i].colorCounts.size()) != V_)
        throw DataError("Chain: observation color dimension mismatch");
      logMarginalCache_[t - 1][i] = stats::logMarginalNewCluster(frame[i], hyper_);
    }
  }
}

void Chain::addBall(int clusterId, int t, int d, int sign) {
  Cluster& c = cluster(clusterId);
  int hi = std::min(d - 1, T_);
  for (int tt = t; tt <= hi; ++tt) c.mEnd[tt - 1] += sign;
  for (int tt = t + 1; tt <= hi; ++tt) {
    c.mStart[tt - 1] += sign;
    totStart_[tt - 1] += sign;
  }
}

void Chain::addMember(int clusterId, int t, int sign) {
  cluster(clusterId).members[t - 1] += sign;
}

double Chain::urnW(const Cluster* c, int t, int d) const {
  if (c == nullptr) return logAlpha_;  // fresh cluster: founding factor only
  int hi = std::min(d, T_);
  int hiBall = std::min(d - 1, T_);
  int birthWith = c->birth == 0 ? t : std::min(c->birth, t);
  double w = 0.0;
  for (int tt = t; tt <= hi; ++tt) {
    int base = c->mStart[tt - 1];
    int r = c->members[tt - 1];
    if (tt == t)
      r += 1;
    else if (tt <= hiBall)
      base += 1;
    w += frameLogProd(base, r, logAlpha_, tt == birthWith);
    if (w == kNegInf) return kNegInf;
  }
  return w;
}

double Chain::urnB(const Cluster* c, int t, int d) const {
  if (c == nullptr) return 0.0;
  int hi = std::min(d, T_);
  double b = 0.0;
  for (int tt = t; tt <= hi; ++tt) {
    b += frameLogProd(c->mStart[tt - 1], c->members[tt - 1], logAlpha_, tt == c->birth);
    if (b == kNegInf) return kNegInf;
  }
  return b;
}

double Chain::logGeoCapped(int t, int d) const {
  int l = d - t - 1;
  int cap = dCap_ - t - 1;
  if (l < 0 || l > cap) return kNegInf;
  if (hyper_.rho >= 1.0) return l == 0 ? 0.0 : kNegInf;
  if (l == cap) return cap * std::log1p(-hyper_.rho);
  return std::log(hyper_.rho) + l * std::log1p(-hyper_.rho);
}

int Chain::proposeDeletion(int t, Rng& rng) const {
  int l = sampleLifetime(hyper_.rho, rng);
  return std::min(deletionTimeFromLifetime(t, l), dCap_);
}

void Chain::refreshAliveRange(Cluster& c) {
  c.birth = 0;
  c.lastAlive = 0;
  for (int t = 1; t <= T_; ++t) {
    if (c.members[t - 1] > 0) {
      c.birth = t;
      break;
    }
  }
  if (c.birth == 0) return;
  for (int t = T_; t >= 1; --t) {
    if (c.members[t - 1] > 0 || c.mEnd[t - 1] > 0) {
      c.lastAlive = t;
      break;
    }
  }
}

double Chain::baseLog(const ClusterParams& theta) const {
  return stats::logNiwPdf(theta.mean, theta.cov, g0Niw_) +
         stats::logDirichletPdf(theta.colorProbs, g0Dir_.q);
}

double Chain::bridgeLog(const Cluster& c, int t) const {
  const AuxVarSet& z = c.aux[t - 1];
  const ClusterParams& prev = c.theta[t - 2];
  double lp = 0.0;
  for (const auto& item : z) lp += stats::auxDensityGivenTheta(item, prev);
  stats::Posterior post = stats::posteriorGivenAux(z, hyper_);
  lp += stats::logNiwPdf(c.theta[t - 1].mean, c.theta[t - 1].cov, post.niw());
  lp += stats::logDirichletPdf(c.theta[t - 1].colorProbs, post.dir().q);
  return lp;
}

double Chain::chainSegmentLog(const Cluster& c, int birth, int lastAlive) const {
  if (birth == 0) return 0.0;
  double lp = baseLog(c.theta[birth - 1]);
  for (int t = birth + 1; t <= lastAlive; ++t) lp += bridgeLog(c, t);
  return lp;
}

double Chain::memberLikelihoodLog(const Cluster& c, int t) const {
  double lp = 0.0;
  const auto& cs = c_[t - 1];
  for (std::size_t i = 0; i < cs.size(); ++i)
    if (cs[i] == c.id) lp += stats::likelihoodF(obs_[t - 1][i], c.theta[t - 1]);
  return lp;
}

double Chain::thetaBlanketLog(const Cluster& c, int t) const {
  double lp;
  if (t == c.birth) {
    lp = baseLog(c.theta[t - 1]);
  } else {
    stats::Posterior post = stats::posteriorGivenAux(c.aux[t - 1], hyper_);
    lp = stats::logNiwPdf(c.theta[t - 1].mean, c.theta[t - 1].cov, post.niw()) +
         stats::logDirichletPdf(c.theta[t - 1].colorProbs, post.dir().q);
  }
  if (t + 1 <= c.lastAlive) {
    for (const auto& item : c.aux[t]) lp += stats::auxDensityGivenTheta(item, c.theta[t - 1]);
  }
  return lp + memberLikelihoodLog(c, t);
}

stats::Posterior Chain::thetaConditional(const Cluster& c, int t) const {
  stats::Posterior post(g0Niw_, g0Dir_);
  if (t != c.birth)
    for (const auto& z : c.aux[t - 1]) post.add(z.pos, z.colorCounts);
  const auto& cs = c_[t - 1];
  for (std::size_t i = 0; i < cs.size(); ++i)
    if (cs[i] == c.id) post.add(obs_[t - 1][i].pos, obs_[t - 1][i].colorCounts);
  if (t + 1 <= c.lastAlive)
    for (const auto& z : c.aux[t]) post.add(z.pos, z.colorCounts);
  return post;
}

int Chain::createCluster(const Observation& seed, int t, Rng& rng) {
  Cluster c;
  c.id = static_cast<int>(clusters_.size()) + 1;
  c.theta.resize(T_);
  c.aux.resize(T_);
  c.mStart.assign(T_, 0);
  c.mEnd.assign(T_, 0);
  c.members.assign(T_, 0);
  stats::Posterior post(g0Niw_, g0Dir_);
  post.add(seed.pos, seed.colorCounts);
  c.theta[t - 1] = stats::samplePosteriorParams(post.niw(), post.dir(), rng);
  for (int tt = t + 1; tt <= T_; ++tt) {
    auto [z, theta] = stats::sampleTransitionedParams(c.theta[tt - 2], hyper_, rng);
    c.aux[tt - 1] = std::move(z);
    c.theta[tt - 1] = theta;
  }
  for (int tt = t - 1; tt >= 1; --tt) {
    // Reverse draw through the reversible kernel: z from the later parameters,
    // earlier parameters from the conjugate posterior given z.
    auto [z, theta] = stats::sampleTransitionedParams(c.theta[tt], hyper_, rng);
    c.aux[tt] = std::move(z);
    c.theta[tt - 1] = theta;
  }
  clusters_.push_back(std::move(c));
  return clusters_.back().id;
}

int Chain::sampleAssignment(int t, int i, Rng& rng) {
  const Observation& x = obs_[t - 1][i];
  int kOld = c_[t - 1][i];
  int d = d_[t - 1][i];
  Cluster& old = cluster(kOld);
  int oldBirth = old.birth, oldLast = old.lastAlive;
  addMember(kOld, t, -1);
  addBall(kOld, t, d, -1);
  refreshAliveRange(old);

  double wOld = urnW(&old, t, d);
  double bOld = urnB(&old, t, d);
  int hiWin = std::min(d, T_);

  // Baseline orphan: with this observation removed the remaining configuration has
  // zero urn probability, so every competing hypothesis is impossible. Keep it.
  if (bOld == kNegInf) {
    addMember(kOld, t, 1);
    addBall(kOld, t, d, 1);
    refreshAliveRange(old);
    return kOld;
  }

  std::vector<Candidate> cands;
  for (const auto& cl : clusters_) {
    if (cl.dead) continue;
    bool inWindow = false;
    for (int tt = t; tt <= hiWin && !inWindow; ++tt) inWindow = cl.mEnd[tt - 1] > 0;
    if (!inWindow) continue;
    Candidate cand;
    cand.id = cl.id;
    double w = cl.id == kOld ? wOld : urnW(&cl, t, d);
    if (w == kNegInf) continue;
    double b = cl.id == kOld ? bOld : urnB(&cl, t, d);
    cand.urnDelta = w - b;
    cand.logLik = stats::likelihoodF(x, cl.theta[t - 1]);
    cands.push_back(cand);
  }
  Candidate fresh;
  fresh.id = 0;
  fresh.urnDelta = logAlpha_;
  fresh.logLik = logMarginalCache_[t - 1][i];
  cands.push_back(fresh);

  std::vector<double> scores(cands.size());
  for (std::size_t j = 0; j < cands.size(); ++j) scores[j] = cands[j].urnDelta + cands[j].logLik;
  int pick = sampleDiscreteLog(scores, rng);

  // Creating a cluster can reallocate the cluster table; take what we need from
  // the old cluster first and re-fetch references afterwards.
  double likOld = stats::likelihoodF(x, old.theta[t - 1]);
  int oldBirthRemoved = old.birth, oldLastRemoved = old.lastAlive;

  int kNew = cands[pick].id;
  double urnNumDelta;
  double likNew;
  if (kNew == 0) {
    kNew = createCluster(x, t, rng);
    urnNumDelta = logAlpha_ - (wOld - bOld);
    likNew = stats::likelihoodF(x, cluster(kNew).theta[t - 1]);
  } else {
    urnNumDelta = cands[pick].urnDelta - (wOld - bOld);
    likNew = cands[pick].logLik;
  }

  Cluster& neu = cluster(kNew);
  int neuBirth0 = kNew == kOld ? oldBirthRemoved : neu.birth;
  int neuLast0 = kNew == kOld ? oldLastRemoved : neu.lastAlive;
  c_[t - 1][i] = kNew;
  addMember(kNew, t, 1);
  addBall(kNew, t, d, 1);
  refreshAliveRange(neu);

  if (kNew != kOld) {
    Cluster& oldRef = cluster(kOld);
    incLogJoint_ += urnNumDelta + likNew - likOld;
    incLogJoint_ += rangeDeltaLog(neu, neuBirth0, neuLast0, neu.birth, neu.lastAlive);
    incLogJoint_ += rangeDeltaLog(oldRef, oldBirth, oldLast, oldRef.birth, oldRef.lastAlive);
    if (oldRef.birth == 0 && !oldRef.dead) {
      oldRef.dead = true;
      oldRef.theta.clear();
      oldRef.theta.shrink_to_fit();
      oldRef.aux.clear();
      oldRef.aux.shrink_to_fit();
    }
  }
  return kNew;
}

double Chain::rangeDeltaLog(const Cluster& c, int b0, int e0, int b1, int e1) const {
  if (b0 == b1 && e0 == e1) return 0.0;
  if (b0 == 0 && b1 == 0) return 0.0;
  if (b0 == 0) return chainSegmentLog(c, b1, e1);
  if (b1 == 0) return -chainSegmentLog(c, b0, e0);
  if (b1 > e0 || b0 > e1) return chainSegmentLog(c, b1, e1) - chainSegmentLog(c, b0, e0);
  double delta = 0.0;
  if (b1 != b0) {
    delta += baseLog(c.theta[b1 - 1]) - baseLog(c.theta[b0 - 1]);
    if (b1 > b0) {
      for (int tt = b0 + 1; tt <= b1; ++tt) delta -= bridgeLog(c, tt);
    } else {
      for (int tt = b1 + 1; tt <= b0; ++tt) delta += bridgeLog(c, tt);
    }
  }
  if (e1 > e0) {
    for (int tt = e0 + 1; tt <= e1; ++tt) delta += bridgeLog(c, tt);
  } else if (e1 < e0) {
    for (int tt = e1 + 1; tt <= e0; ++tt) delta -= bridgeLog(c, tt);
  }
  return delta;
}

bool Chain::sampleDeletion(int t, int i, Rng& rng) {
  ++delProposed_;
  int d0 = d_[t - 1][i];
  int d1 = proposeDeletion(t, rng);
  if (d1 == d0) {
    ++delAccepted_;
    return true;
  }
  int k = c_[t - 1][i];
  Cluster& c = cluster(k);
  const double alpha = hyper_.alpha;
  int lo = std::min(d0, d1), hi = std::max(d0, d1);
  bool extend = d1 > d0;
  double logr = 0.0;
  for (int tt = std::max(lo, t + 1); tt < hi && tt <= T_; ++tt) {
    int base = c.mStart[tt - 1];
    int r = c.members[tt - 1];
    int tot = totStart_[tt - 1];
    int n = static_cast<int>(obs_[tt - 1].size());
    double numDelta, denDelta;
    if (extend) {
      numDelta = frameLogProd(base + 1, r, logAlpha_, false) - frameLogProd(base, r, logAlpha_, tt == c.birth);
      denDelta = denomSum(tot + 1, alpha, n) - denomSum(tot, alpha, n);
    } else {
      numDelta = frameLogProd(base - 1, r, logAlpha_, tt == c.birth) - frameLogProd(base, r, logAlpha_, false);
      denDelta = denomSum(tot - 1, alpha, n) - denomSum(tot, alpha, n);
    }
    logr += numDelta - denDelta;
    if (logr == kNegInf) break;
  }
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  if (logr < 0.0 && std::log(uni(rng)) >= logr) return false;

  int b0 = c.birth, e0 = c.lastAlive;
  addBall(k, t, d0, -1);
  addBall(k, t, d1, 1);
  d_[t - 1][i] = d1;
  refreshAliveRange(c);
  incLogJoint_ += logr + logGeoCapped(t, d1) - logGeoCapped(t, d0);
  incLogJoint_ += rangeDeltaLog(c, b0, e0, c.birth, c.lastAlive);
  ++delAccepted_;
  return true;
}

void Chain::resampleClusterParams(int clusterId, int t, Rng& rng) {
  Cluster& c = cluster(clusterId);
  double before = thetaBlanketLog(c, t);
  stats::Posterior post = thetaConditional(c, t);
  c.theta[t - 1] = stats::samplePosteriorParams(post.niw(), post.dir(), rng);
  incLogJoint_ += thetaBlanketLog(c, t) - before;
}

int Chain::sampleAuxVariables(int clusterId, int t, Rng& rng) {
  Cluster& c = cluster(clusterId);
  if (t <= c.birth || t > c.lastAlive) throw ConfigError("sampleAuxVariables: no bridge at this frame");
  AuxVarSet& zset = c.aux[t - 1];
  const ClusterParams& prev = c.theta[t - 2];
  const ClusterParams& cur = c.theta[t - 1];
  stats::Posterior post = stats::posteriorGivenAux(zset, hyper_);
  auto evalPrev = [&](const stats::Posterior& p) {
    return stats::logNiwPdf(prev.mean, prev.cov, p.niw()) +
           stats::logDirichletPdf(prev.colorProbs, p.dir().q);
  };
  auto evalCur = [&](const stats::Posterior& p) {
    return stats::logNiwPdf(cur.mean, cur.cov, p.niw()) +
           stats::logDirichletPdf(cur.colorProbs, p.dir().q);
  };
  double curPrevDensity = evalPrev(post);
  double curThetaTerm = evalCur(post);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  int accepted = 0;
  for (int m = 0; m < hyper_.M; ++m) {
    AuxVar prop = stats::sampleAuxFrom(cur, hyper_, rng);
    post.remove(zset[m].pos, zset[m].colorCounts);
    post.add(prop.pos, prop.colorCounts);
    double propPrevDensity = evalPrev(post);
    double logr = propPrevDensity - curPrevDensity;
    ++auxProposed_;
    if (logr >= 0.0 || std::log(uni(rng)) < logr) {
      double thetaTermNew = evalCur(post);
      incLogJoint_ += stats::auxDensityGivenTheta(prop, prev) -
                      stats::auxDensityGivenTheta(zset[m], prev) + thetaTermNew - curThetaTerm;
      zset[m] = std::move(prop);
      curPrevDensity = propPrevDensity;
      curThetaTerm = thetaTermNew;
      ++accepted;
      ++auxAccepted_;
    } else {
      post.remove(prop.pos, prop.colorCounts);
      post.add(zset[m].pos, zset[m].colorCounts);
    }
  }
  return accepted;
}

void Chain::sweep(Rng& rng, SweepDiagnostics* diag) {
  auto start = std::chrono::steady_clock::now();
  auxAccepted_ = auxProposed_ = delAccepted_ = delProposed_ = 0;
  for (int t = 1; t <= T_; ++t) {
    for (std::size_t i = 0; i < obs_[t - 1].size(); ++i) {
      sampleAssignment(t, static_cast<int>(i), rng);
      sampleDeletion(t, static_cast<int>(i), rng);
    }
    for (auto& c : clusters_) {
      if (c.dead || c.birth == 0) continue;
      if (c.members[t - 1] > 0 || c.mEnd[t - 1] > 0) resampleClusterParams(c.id, t, rng);
    }
    for (auto& c : clusters_) {
      if (c.dead || c.birth == 0) continue;
      if ((c.members[t - 1] > 0 || c.mEnd[t - 1] > 0) && t > c.birth) sampleAuxVariables(c.id, t, rng);
    }
  }
  if (diag) {
    diag->auxAcceptRate = auxProposed_ > 0 ? double(auxAccepted_) / double(auxProposed_) : 0.0;
    diag->deletionAcceptRate = delProposed_ > 0 ? double(delAccepted_) / double(delProposed_) : 0.0;
    diag->kAlivePerTime.assign(T_, 0);
    for (int t = 1; t <= T_; ++t) diag->kAlivePerTime[t - 1] = aliveAt(t);
    diag->wallMs =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  }
}

double Chain::logJointScratch() const {
  double urn = 0.0;
  for (int t = 1; t <= T_; ++t) {
    urn -= denomSum(totStart_[t - 1], hyper_.alpha, static_cast<int>(obs_[t - 1].size()));
    for (const auto& c : clusters_) {
      if (c.dead || c.birth == 0) continue;
      urn += frameLogProd(c.mStart[t - 1], c.members[t - 1], logAlpha_, t == c.birth);
    }
  }
  double geo = 0.0;
  for (int t = 1; t <= T_; ++t)
    for (int d : d_[t - 1]) geo += logGeoCapped(t, d);
  double chainTerms = 0.0;
  for (const auto& c : clusters_) {
    if (c.dead || c.birth == 0) continue;
    chainTerms += chainSegmentLog(c, c.birth, c.lastAlive);
  }
  double lik = 0.0;
  for (int t = 1; t <= T_; ++t)
    for (std::size_t i = 0; i < obs_[t - 1].size(); ++i)
      lik += stats::likelihoodF(obs_[t - 1][i], cluster(c_[t - 1][i]).theta[t - 1]);
  return urn + geo + chainTerms + lik;
}

int Chain::aliveClusters() const {
  int n = 0;
  for (const auto& c : clusters_)
    if (!c.dead && c.birth != 0) ++n;
  return n;
}

int Chain::aliveAt(int t) const {
  int n = 0;
  for (const auto& c : clusters_)
    if (!c.dead && c.birth != 0 && (c.members[t - 1] > 0 || c.mEnd[t - 1] > 0)) ++n;
  return n;
}

void Chain::initSingleCluster(Rng& rng) {
  int firstFrame = 0;
  for (int t = 1; t <= T_ && firstFrame == 0; ++t)
    if (!obs_[t - 1].empty()) firstFrame = t;
  if (firstFrame == 0) throw DataError("initSingleCluster: no observations");

  // Deletion draws; the first observation of each populated frame is floored so its
  // ball bridges to the next populated frame, keeping the initial configuration valid.
  int nextPopulated = 0;
  for (int t = T_; t >= 1; --t) {
    if (obs_[t - 1].empty()) continue;
    for (std::size_t i = 0; i < obs_[t - 1].size(); ++i) {
      int d = proposeDeletion(t, rng);
      if (i == 0 && nextPopulated > 0) d = std::min(std::max(d, nextPopulated + 1), dCap_);
      d_[t - 1][i] = d;
    }
    nextPopulated = t;
  }

  Cluster c;
  c.id = 1;
  c.theta.resize(T_);
  c.aux.resize(T_);
  c.mStart.assign(T_, 0);
  c.mEnd.assign(T_, 0);
  c.members.assign(T_, 0);
  clusters_.push_back(std::move(c));
  Cluster& cl = clusters_[0];

  for (int t = 1; t <= T_; ++t)
    for (std::size_t i = 0; i < obs_[t - 1].size(); ++i) {
      c_[t - 1][i] = 1;
      addMember(1, t, 1);
      addBall(1, t, d_[t - 1][i], 1);
    }
  refreshAliveRange(cl);

  // Parameters from the posterior given each frame's members, chained through the kernel.
  {
    stats::Posterior post(g0Niw_, g0Dir_);
    for (const auto& o : obs_[firstFrame - 1]) post.add(o.pos, o.colorCounts);
    cl.theta[firstFrame - 1] = stats::samplePosteriorParams(post.niw(), post.dir(), rng);
  }
  for (int t = firstFrame + 1; t <= T_; ++t) {
    AuxVarSet z;
    z.reserve(hyper_.M);
    for (int m = 0; m < hyper_.M; ++m) z.push_back(stats::sampleAuxFrom(cl.theta[t - 2], hyper_, rng));
    stats::Posterior post(g0Niw_, g0Dir_);
    for (const auto& item : z) post.add(item.pos, item.colorCounts);
    for (const auto& o : obs_[t - 1]) post.add(o.pos, o.colorCounts);
    cl.aux[t - 1] = std::move(z);
    cl.theta[t - 1] = stats::samplePosteriorParams(post.niw(), post.dir(), rng);
  }
  for (int t = firstFrame - 1; t >= 1; --t) {
    auto [z, theta] = stats::sampleTransitionedParams(cl.theta[t], hyper_, rng);
    cl.aux[t] = std::move(z);
    cl.theta[t - 1] = theta;
  }
  resetIncrementalLogJoint();
}

void Chain::initSequentialUrn(Rng& rng) {
  for (int t = 1; t <= T_; ++t) {
    // Fresh kernel step into this frame for every cluster carrying balls, so the
    // likelihood seen by the urn walk stays anchored to the data.
    for (auto& cl : clusters_) {
      if (cl.dead || cl.birth == 0 || t <= cl.birth) continue;
      if (cl.mEnd[t - 1] <= 0) continue;
      auto [z, theta] = stats::sampleTransitionedParams(cl.theta[t - 2], hyper_, rng);
      cl.aux[t - 1] = std::move(z);
      cl.theta[t - 1] = theta;
    }
    for (std::size_t i = 0; i < obs_[t - 1].size(); ++i) {
      const Observation& x = obs_[t - 1][i];
      std::vector<int> ids;
      std::vector<double> scores;
      for (const auto& cl : clusters_) {
        if (cl.dead || cl.birth == 0) continue;
        int count = cl.mEnd[t - 1];  // carried-in balls plus same-frame joins so far
        if (count <= 0) continue;
        ids.push_back(cl.id);
        scores.push_back(std::log(double(count)) + stats::likelihoodF(x, cl.theta[t - 1]));
      }
      ids.push_back(0);
      scores.push_back(logAlpha_ + stats::logMarginalNewCluster(x, hyper_));
      int pick = sampleDiscreteLog(scores, rng);
      int k = ids[pick];
      if (k == 0) k = createCluster(x, t, rng);
      int d = proposeDeletion(t, rng);
      c_[t - 1][i] = k;
      d_[t - 1][i] = d;
      addMember(k, t, 1);
      addBall(k, t, d, 1);
      refreshAliveRange(cluster(k));
    }
    // Anchor this frame's parameters to the members before moving on.
    for (auto& cl : clusters_) {
      if (cl.dead || cl.birth == 0 || cl.members[t - 1] <= 0) continue;
      stats::Posterior post(g0Niw_, g0Dir_);
      if (t != cl.birth)
        for (const auto& z : cl.aux[t - 1]) post.add(z.pos, z.colorCounts);
      for (std::size_t i = 0; i < obs_[t - 1].size(); ++i)
        if (c_[t - 1][i] == cl.id) post.add(obs_[t - 1][i].pos, obs_[t - 1][i].colorCounts);
      cl.theta[t - 1] = stats::samplePosteriorParams(post.niw(), post.dir(), rng);
    }
  }
  resetIncrementalLogJoint();
}

LatentState Chain::snapshot() const {
  LatentState s;
  s.T = T_;
  s.V = V_;
  s.logScore = logJointScratch();
  s.assignments = c_;
  s.deletionTimes = d_;
  for (const auto& c : clusters_) {
    if (c.dead || c.birth == 0) continue;
    ClusterTimeline ct;
    ct.id = c.id;
    ct.birth = c.birth;
    ct.lastAlive = c.lastAlive;
    ct.sizes = c.mEnd;
    for (int t = c.birth; t <= c.lastAlive; ++t) ct.params.push_back(c.theta[t - 1]);
    s.clusters.push_back(std::move(ct));
  }
  return s;
}

McmcResult runMcmc(const ObservationSet& obs, const McmcConfig& config) {
  config.validate();
  std::size_t total = 0;
  for (const auto& f : obs) total += f.size();
  if (total == 0) throw DataError("runMcmc: observation set is empty");

  Chain chain(obs, config.hyper, static_cast<int>(obs.size()) + config.maxLifetimeSlack);
  Rng rng = makeStream(config.seed, 0x3cacULL);
  if (config.init == McmcConfig::Init::kSingleCluster)
    chain.initSingleCluster(rng);
  else
    chain.initSequentialUrn(rng);

  McmcResult result;
  double bestLogJoint = kNegInf;
  for (int s = 1; s <= config.sweeps; ++s) {
    SweepDiagnostics diag;
    diag.sweepIndex = s;
    chain.sweep(rng, &diag);
    diag.logJoint = chain.logJointScratch();
    if (!std::isfinite(diag.logJoint))
      throw NumericalError("runMcmc: non-finite log joint at sweep " + std::to_string(s));
    if (diag.logJoint > bestLogJoint) {
      bestLogJoint = diag.logJoint;
      result.map = chain.snapshot();
      result.map.logScore = diag.logJoint;
    }
    result.diagnostics.push_back(std::move(diag));
  }
  return result;
}

void writeDiagnosticsCsv(const std::vector<SweepDiagnostics>& diags, const std::string& headerLine,
                         const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write diagnostics: " + path);
  out << "# " << headerLine << "\n";
  out << "sweep,logJoint,kAliveMax,kAliveMean,auxAcceptRate,deletionAcceptRate,wallMs\n";
  for (const auto& d : diags) {
    int kmax = 0;
    double ksum = 0.0;
    for (int k : d.kAlivePerTime) {
      kmax = std::max(kmax, k);
      ksum += k;
    }
    double kmean = d.kAlivePerTime.empty() ? 0.0 : ksum / d.kAlivePerTime.size();
    out << d.sweepIndex << "," << d.logJoint << "," << kmax << "," << kmean << ","
        << d.auxAcceptRate << "," << d.deletionAcceptRate << "," << d.wallMs << "\n";
  }
}

}  // namespace mcmc
}  // namespace ddptrack
