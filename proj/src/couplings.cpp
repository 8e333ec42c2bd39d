#include "rtp/couplings.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "rtp/error.hpp"
#include "rtp/parallel.hpp"
#include "rtp/rates.hpp"

namespace rtp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<int> particleVelocities(const VelocityChain& chain) {
  if (chain.mechanism() == Mechanism::Instantaneous) return {-1, 1};
  return {-1, 0, 1};
}

}  // namespace

std::vector<PairTransition> pairTransitions(const VelocityChain& chain, ParticlePair p) {
  std::vector<PairTransition> out;
  if (chain.mechanism() == Mechanism::Instantaneous) {
    const double w = chain.omega();
    if (p.coupled()) {
      out.push_back({{-p.a, -p.a}, w});
    } else {
      out.push_back({{p.a, p.a}, w});
      out.push_back({{p.b, p.b}, w});
    }
    return out;
  }
  const double al = chain.alpha(), hb = 0.5 * chain.beta();
  if (p.a == 0 && p.b == 0) {
    out.push_back({{1, 1}, hb});
    out.push_back({{-1, -1}, hb});
    return out;
  }
  out.push_back({{0, 0}, al});
  if (p.a == 0) {
    out.push_back({{1, p.b}, hb});
    out.push_back({{-1, p.b}, hb});
  } else if (p.b == 0) {
    out.push_back({{p.a, 1}, hb});
    out.push_back({{p.a, -1}, hb});
  }
  return out;
}

int relativeMode(const VelocityChain& chain, int sigma1, int sigma2) {
  const int d = sigma2 - sigma1;
  ModeTag tag;
  switch (d) {
    case 2: tag = ModeTag::Plus2; break;
    case 1: tag = ModeTag::Plus1; break;
    case -1: tag = ModeTag::Minus1; break;
    case -2: tag = ModeTag::Minus2; break;
    default:
      if (chain.mechanism() == Mechanism::Instantaneous) tag = ModeTag::Zero;
      else tag = sigma1 == 0 ? ModeTag::Zero00 : ModeTag::ZeroPM;
  }
  const int idx = chain.indexOf(tag);
  require(idx >= 0, ErrorKind::Domain, "velocities outside the chain");
  return idx;
}

std::vector<std::array<int, 2>> modePreimages(const VelocityChain& chain, int mode) {
  std::vector<std::array<int, 2>> out;
  for (int s1 : particleVelocities(chain))
    for (int s2 : particleVelocities(chain))
      if (relativeMode(chain, s1, s2) == mode) out.push_back({s1, s2});
  return out;
}

CoupledSimulator::CoupledSimulator(const ProcessSpec& spec, State initA, State initB, RngStream& rng,
                                   CoupledPair* recorder, bool trackZeros)
    : spec_(spec), rng_(rng), rec_(recorder), trackZeros_(trackZeros), a_(initA), b_(initB) {
  require(std::isfinite(initA.x) && initA.x >= 0.0 && std::isfinite(initB.x) && initB.x >= 0.0,
          ErrorKind::InvalidParameter, "initial x must be >= 0");
  require(initA.mode >= 0 && initA.mode < spec.chain.size() && initB.mode >= 0 && initB.mode < spec.chain.size(),
          ErrorKind::InvalidParameter, "initial mode out of range");
  // Preimages of the two modes with the most agreeing particle velocities.
  const auto preA = modePreimages(spec.chain, initA.mode), preB = modePreimages(spec.chain, initB.mode);
  int best = -1;
  for (const auto& pa : preA)
    for (const auto& pb : preB) {
      const int m = (pa[0] == pb[0]) + (pa[1] == pb[1]);
      if (m > best) {
        best = m;
        p_ = {ParticlePair{pa[0], pb[0]}, ParticlePair{pa[1], pb[1]}};
      }
    }
  if (coalesced()) coalescence_ = 0.0;
  if (rec_) {
    *rec_ = CoupledPair{};
    rec_->pathA.events.push_back({0.0, a_, EventKind::Start});
    rec_->pathB.events.push_back({0.0, b_, EventKind::Start});
    recordEvent();
  }
  drawClock();
}

void CoupledSimulator::drawClock() {
  double total = 0.0;
  for (int i = 0; i < 2; ++i) {
    moves_[i] = pairTransitions(spec_.chain, p_[i]);
    out_[i] = 0.0;
    for (const auto& m : moves_[i]) out_[i] += m.rate;
    total += out_[i];
  }
  nextJump_ = t_ + rng_.exponential(total);
}

void CoupledSimulator::recordEvent() {
  rec_->events.push_back({t_, a_, b_, coalesced()});
}

bool CoupledSimulator::hits(const std::vector<std::array<double, 2>>& z, double t0, double t1) {
  for (auto it = z.rbegin(); it != z.rend(); ++it) {
    if ((*it)[1] < t0) return false;
    if ((*it)[0] <= t1) return true;
  }
  return false;
}

void CoupledSimulator::addZero(std::vector<std::array<double, 2>>& z, double t0, double t1) {
  if (!z.empty() && z.back()[1] >= t0) {
    z.back()[1] = std::max(z.back()[1], t1);
    return;
  }
  z.push_back({t0, t1});
}

void CoupledSimulator::segment(double dt) {
  // Time at which each copy sits at 0 from then on within the segment; +inf if never.
  auto zeroFrom = [&](const State& s) {
    if (s.x == 0.0) return isGlued(spec_, s.mode) ? 0.0 : kInf;
    const double h = hittingTimeZero(spec_, s.mode, s.x);
    return h <= dt ? h : kInf;
  };
  const double za = zeroFrom(a_), zb = zeroFrom(b_);
  if (a_.mode == b_.mode && meeting_ == kInf) {
    if (a_.x == b_.x) meeting_ = t_;
    else if (std::max(za, zb) <= dt) meeting_ = t_ + std::max(za, zb);
  }
  auto advance = [&](State& s, double z, std::vector<std::array<double, 2>>& zeros, Trajectory* path) {
    if (trackZeros_) {
      if (z <= dt) addZero(zeros, t_ + z, t_ + dt);
      else if (s.x == 0.0) addZero(zeros, t_, t_);
    }
    if (z <= dt) {
      if (z > 0.0 && path) path->events.push_back({t_ + z, {0.0, s.mode}, EventKind::HitZero});
      s.x = 0.0;
    } else {
      s.x = flow(spec_, s.mode, s.x, dt);
    }
  };
  advance(a_, za, zerosA_, rec_ ? &rec_->pathA : nullptr);
  advance(b_, zb, zerosB_, rec_ ? &rec_->pathB : nullptr);
}

void CoupledSimulator::jump() {
  double u = rng_.uniform() * (out_[0] + out_[1]);
  int which = u < out_[0] ? 0 : 1;
  if (which == 1) u -= out_[0];
  const auto& moves = moves_[which];
  std::size_t k = 0;
  for (; k + 1 < moves.size(); ++k) {
    if (u < moves[k].rate) break;
    u -= moves[k].rate;
  }
  p_[which] = moves[k].to;
  const int ma = relativeMode(spec_.chain, p_[0].a, p_[1].a);
  const int mb = relativeMode(spec_.chain, p_[0].b, p_[1].b);
  const bool changedA = ma != a_.mode, changedB = mb != b_.mode;
  a_.mode = ma;
  b_.mode = mb;
  if (coalesced() && coalescence_ == kInf) coalescence_ = t_;
  if (rec_) {
    if (changedA) rec_->pathA.events.push_back({t_, a_, EventKind::Jump});
    if (changedB) rec_->pathB.events.push_back({t_, b_, EventKind::Jump});
    recordEvent();
  }
}

void CoupledSimulator::advanceTo(double T) {
  require(T >= t_, ErrorKind::Domain, "cannot advance backwards in time");
  while (nextJump_ <= T) {
    segment(nextJump_ - t_);
    t_ = nextJump_;
    jump();
    drawClock();
  }
  segment(T - t_);
  t_ = T;
  if (a_.mode == b_.mode && a_.x == b_.x && meeting_ == kInf) meeting_ = t_;
  if (rec_) {
    rec_->horizon = rec_->pathA.horizon = rec_->pathB.horizon = T;
    rec_->coalescenceTime = coalescence_;
    rec_->meetingTime = meeting_;
  }
}

namespace {

CoupledPair runCoupling(const ProcessSpec& spec, State initA, State initB, double horizon, RngStream& rng) {
  require(horizon > 0.0 && std::isfinite(horizon), ErrorKind::InvalidParameter, "horizon must be > 0");
  CoupledPair pair;
  CoupledSimulator sim(spec, initA, initB, rng, &pair);
  sim.advanceTo(horizon);
  return pair;
}

}  // namespace

CoupledPair coupleLinearSynchronous(const ProcessSpec& spec, State initA, State initB, double horizon, RngStream& rng) {
  require(spec.potential.isLinear(), ErrorKind::InvalidParameter,
          "wrong coupling: the linear synchronous coupling needs a linear potential");
  return runCoupling(spec, initA, initB, horizon, rng);
}

CoupledPair coupleHarmonicSynchronous(const ProcessSpec& spec, State initA, State initB, double horizon,
                                      RngStream& rng) {
  require(spec.potential.isHarmonic(), ErrorKind::InvalidParameter,
          "wrong coupling: the harmonic synchronous coupling needs a harmonic potential");
  return runCoupling(spec, initA, initB, horizon, rng);
}

void writeCoupledCsv(std::ostream& os, const ProcessSpec& spec, const CoupledPair& pair) {
  os << "t,xA,sigmaA,xB,sigmaB,coalesced_flag\n" << std::setprecision(17);
  auto row = [&](double t, const State& a, const State& b, bool c) {
    os << t << ',' << a.x << ',' << spec.chain.mode(a.mode).label() << ',' << b.x << ','
       << spec.chain.mode(b.mode).label() << ',' << (c ? 1 : 0) << '\n';
  };
  for (const auto& e : pair.events) row(e.t, e.a, e.b, e.coalesced);
  row(pair.horizon, pair.pathA.stateAt(spec, pair.horizon), pair.pathB.stateAt(spec, pair.horizon),
      pair.coalescenceTime <= pair.horizon);
}

SingleVelocityDecomposition singleVelocityDominate(const ProcessSpec& spec, State init, double horizon, RngStream& rng,
                                                   double tolerance) {
  require(spec.potential.isLinear() && spec.chain.mechanism() == Mechanism::Finite, ErrorKind::InvalidParameter,
          "wrong coupling: single-velocity domination needs the finite linear process");
  require(horizon > 0.0 && std::isfinite(horizon) && init.x >= 0.0, ErrorKind::InvalidParameter,
          "domination needs horizon > 0 and x >= 0");
  const double c = spec.c(), v = spec.v, al = spec.chain.alpha(), be = spec.chain.beta();
  const auto pre = modePreimages(spec.chain, init.mode);
  int s1 = pre.front()[0], s2 = pre.front()[1];
  double x = init.x, y1 = 0.5 * init.x, y2 = 0.5 * init.x, t = 0.0;
  int mode = init.mode;
  SingleVelocityDecomposition out;
  out.horizon = horizon;
  auto check = [&]() {
    out.events.push_back({t, x, y1, y2, s1, s2, mode});
    const double excess = x - (y1 + y2);
    out.maxExcess = std::max(out.maxExcess, excess);
    if (excess > tolerance * (1.0 + std::abs(x))) ++out.violations;
  };
  auto rate = [&](int s) { return s == 0 ? be : al; };
  // Clamped linear flows; breakpoints are the clamp times.
  auto move = [](double y, double d, double dt) {
    if (d < 0.0 && y <= -d * dt) return 0.0;
    return y + d * dt;
  };
  auto hit = [](double y, double d) { return d < 0.0 && y > 0.0 ? y / -d : kInf; };
  check();
  for (;;) {
    const double hold = rng.exponential(rate(s1) + rate(s2));
    const double end = std::min(horizon, t + hold);
    const double dx = drift(spec, mode, x), d1 = -c - v * s1, d2 = -c + v * s2;
    double bps[3] = {hit(x, dx), hit(y1, d1), hit(y2, d2)};
    std::sort(bps, bps + 3);
    const double t0 = t, x0 = x, y10 = y1, y20 = y2;
    for (double b : bps) {
      if (t0 + b >= end) break;
      t = t0 + b;
      x = move(x0, dx, b);
      y1 = move(y10, d1, b);
      y2 = move(y20, d2, b);
      check();
    }
    t = end;
    x = move(x0, dx, end - t0);
    y1 = move(y10, d1, end - t0);
    y2 = move(y20, d2, end - t0);
    if (end >= horizon) {
      check();
      return out;
    }
    // Jump of one particle velocity.
    const int which = rng.uniform() * (rate(s1) + rate(s2)) < rate(s1) ? 0 : 1;
    int& s = which == 0 ? s1 : s2;
    s = s != 0 ? 0 : (rng.uniform() < 0.5 ? 1 : -1);
    mode = relativeMode(spec.chain, s1, s2);
    check();
  }
}

double MeetingTvPoint::boundSe() const { return notCoalescedSe + noHitASe + noHitBSe; }

std::vector<MeetingTvPoint> meetingTimeTV(const ProcessSpec& spec, State initA, const StateSampler& lawB,
                                          const std::vector<double>& tGrid, std::size_t n, std::uint64_t seed,
                                          std::optional<double> theta, int threads) {
  require(spec.potential.isLinear(), ErrorKind::InvalidParameter, "meeting-time TV estimate needs a linear potential");
  require(n >= 2, ErrorKind::InvalidParameter, "meeting-time TV estimate needs n >= 2");
  require(!tGrid.empty() && std::is_sorted(tGrid.begin(), tGrid.end()) && tGrid.front() >= 0.0,
          ErrorKind::InvalidParameter, "time grid must be sorted and nonnegative");
  const double th = theta ? *theta : defaultTheta(spec);
  require(th > 0.0 && th < 1.0, ErrorKind::Domain, "theta must lie in (0, 1)");
  const std::size_t K = tGrid.size();
  const int nt = resolveThreads(threads);
  const std::size_t chunks = std::min<std::size_t>(n, 64 * static_cast<std::size_t>(nt));
  // Per-chunk integer counts: [mismatch, notCoalesced, noHitA, noHitB] per grid point.
  std::vector<std::vector<std::uint64_t>> counts(chunks, std::vector<std::uint64_t>(4 * K, 0));
  parallelChunks(n, nt, chunks, [&](std::size_t b, std::size_t e, std::size_t chunk) {
    auto& cnt = counts[chunk];
    for (std::size_t i = b; i < e; ++i) {
      RngStream rng(seed, i);
      const State initB = lawB.sample(rng);
      CoupledSimulator sim(spec, initA, initB, rng, nullptr, true);
      for (std::size_t k = 0; k < K; ++k) {
        const double t = tGrid[k];
        sim.advanceTo(t);
        cnt[4 * k] += !(sim.stateA() == sim.stateB());
        cnt[4 * k + 1] += !(sim.coalescenceTime() <= th * t);
        cnt[4 * k + 2] += !sim.hitsZeroA(th * t, t);
        cnt[4 * k + 3] += !sim.hitsZeroB(th * t, t);
      }
    }
  });
  std::vector<MeetingTvPoint> out(K);
  const double N = static_cast<double>(n);
  auto est = [&](std::uint64_t c, double& p, double& se) {
    p = c / N;
    se = std::sqrt(p * (1 - p) / N);
  };
  for (std::size_t k = 0; k < K; ++k) {
    std::uint64_t tot[4] = {0, 0, 0, 0};
    for (const auto& cnt : counts)
      for (int j = 0; j < 4; ++j) tot[j] += cnt[4 * k + j];
    auto& o = out[k];
    o.t = tGrid[k];
    o.theta = th;
    est(tot[0], o.mismatch, o.mismatchSe);
    est(tot[1], o.notCoalesced, o.notCoalescedSe);
    est(tot[2], o.noHitA, o.noHitASe);
    est(tot[3], o.noHitB, o.noHitBSe);
  }
  return out;
}

std::vector<CoupledSnapshot> coupledEnsembleGrid(const ProcessSpec& spec, State initA, const StateSampler& lawB,
                                                 const std::vector<double>& tGrid, std::size_t n, std::uint64_t seed,
                                                 int threads) {
  require(!tGrid.empty() && std::is_sorted(tGrid.begin(), tGrid.end()) && tGrid.front() >= 0.0,
          ErrorKind::InvalidParameter, "time grid must be sorted and nonnegative");
  std::vector<CoupledSnapshot> out(tGrid.size());
  for (std::size_t k = 0; k < tGrid.size(); ++k) out[k] = {tGrid[k], std::vector<State>(n), std::vector<State>(n)};
  const int nt = resolveThreads(threads);
  parallelChunks(n, nt, std::min<std::size_t>(std::max<std::size_t>(n, 1), 64 * static_cast<std::size_t>(nt)),
                 [&](std::size_t b, std::size_t e, std::size_t) {
                   for (std::size_t i = b; i < e; ++i) {
                     RngStream rng(seed, i);
                     const State initB = lawB.sample(rng);
                     CoupledSimulator sim(spec, initA, initB, rng);
                     for (std::size_t k = 0; k < tGrid.size(); ++k) {
                       sim.advanceTo(tGrid[k]);
                       out[k].a[i] = sim.stateA();
                       out[k].b[i] = sim.stateB();
                     }
                   }
                 });
  return out;
}

}  // namespace rtp
