#include "rtp/dynamics.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "rtp/error.hpp"
#include "rtp/parallel.hpp"

namespace rtp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sigmaOf(const ProcessSpec& spec, int mode) { return spec.chain.mode(mode).value; }

double fixedPoint(const ProcessSpec& spec, int mode) { return spec.v * sigmaOf(spec, mode) / (2 * spec.mu()); }

void checkMode(const ProcessSpec& spec, int mode) {
  require(mode >= 0 && mode < spec.chain.size(), ErrorKind::InvalidParameter, "mode index out of range");
}

}  // namespace

ProcessSpec makeSpec(Potential potential, double v, VelocityChain chain) {
  require(std::isfinite(potential.strength) && potential.strength > 0.0, ErrorKind::InvalidParameter,
          potential.isLinear() ? "linear potential requires c > 0" : "harmonic potential requires mu > 0");
  require(std::isfinite(v) && v > 0.0, ErrorKind::InvalidParameter, "propulsion speed requires v > 0");
  if (potential.isLinear())
    require(v > potential.strength, ErrorKind::InvalidParameter, "linear potential requires v > c");
  return ProcessSpec{potential, v, std::move(chain)};
}

ProcessSpec instantaneousLinear(double omega, double c, double v) {
  return makeSpec(Potential::linear(c), v, instantaneousChain(omega));
}
ProcessSpec finiteLinear(double alpha, double beta, double c, double v) {
  return makeSpec(Potential::linear(c), v, finiteChain(alpha, beta));
}
ProcessSpec instantaneousHarmonic(double omega, double mu, double v) {
  return makeSpec(Potential::harmonic(mu), v, instantaneousChain(omega));
}
ProcessSpec finiteHarmonic(double alpha, double beta, double mu, double v) {
  return makeSpec(Potential::harmonic(mu), v, finiteChain(alpha, beta));
}

std::string processName(const ProcessSpec& spec) {
  std::string m = spec.chain.mechanism() == Mechanism::Instantaneous ? "instantaneous" : "finite";
  return m + (spec.potential.isLinear() ? "-linear" : "-harmonic");
}

const char* eventKindName(EventKind kind) {
  switch (kind) {
    case EventKind::Start: return "start";
    case EventKind::Jump: return "jump";
    case EventKind::HitZero: return "hitZero";
  }
  return "?";
}

double drift(const ProcessSpec& spec, int mode, double x) {
  const double vs = spec.v * sigmaOf(spec, mode);
  if (spec.potential.isLinear()) return vs - 2 * spec.c();
  return vs - 2 * spec.mu() * x;
}

bool isGlued(const ProcessSpec& spec, int mode) {
  checkMode(spec, mode);
  return drift(spec, mode, 0.0) <= 0.0;
}

double flow(const ProcessSpec& spec, int mode, double x0, double t) {
  require(t >= 0.0 && x0 >= 0.0, ErrorKind::Domain, "flow requires t >= 0 and x0 >= 0");
  checkMode(spec, mode);
  double x;
  if (spec.potential.isLinear()) {
    x = x0 + drift(spec, mode, x0) * t;
  } else {
    const double xs = fixedPoint(spec, mode);
    x = xs + std::exp(-2 * spec.mu() * t) * (x0 - xs);
  }
  return std::max(0.0, x);
}

double timeToReach(const ProcessSpec& spec, int mode, double x0, double target) {
  checkMode(spec, mode);
  if (x0 == target) return 0.0;
  if (spec.potential.isLinear()) {
    const double d = drift(spec, mode, x0);
    if (d == 0.0) return kInf;
    const double t = (target - x0) / d;
    return t > 0.0 ? t : kInf;
  }
  const double xs = fixedPoint(spec, mode);
  const double ratio = (target - xs) / (x0 - xs);
  if (!(ratio > 0.0 && ratio < 1.0)) return kInf;
  return -std::log(ratio) / (2 * spec.mu());
}

double hittingTimeZero(const ProcessSpec& spec, int mode, double x0) {
  checkMode(spec, mode);
  if (x0 == 0.0) return 0.0;
  if (spec.potential.isLinear()) {
    const double d = drift(spec, mode, x0);
    return d < 0.0 ? x0 / -d : kInf;
  }
  const double xs = fixedPoint(spec, mode);
  if (xs >= 0.0) return kInf;
  return std::log1p(x0 / -xs) / (2 * spec.mu());
}

State Trajectory::stateAt(const ProcessSpec& spec, double t) const {
  require(!events.empty(), ErrorKind::Domain, "empty trajectory");
  require(t >= events.front().t && t <= horizon, ErrorKind::Domain, "time outside trajectory");
  auto it = std::upper_bound(events.begin(), events.end(), t, [](double a, const Event& e) { return a < e.t; });
  const Event& e = *(it - 1);
  return {flow(spec, e.state.mode, e.state.x, t - e.t), e.state.mode};
}

PathSimulator::PathSimulator(const ProcessSpec& spec, State init, RngStream& rng, Trajectory* recorder)
    : spec_(spec), rng_(rng), rec_(recorder), s_(init) {
  require(std::isfinite(init.x) && init.x >= 0.0, ErrorKind::InvalidParameter, "initial x must be >= 0");
  checkMode(spec, init.mode);
  nextJump_ = rng_.exponential(spec_.chain.exitRate(s_.mode));
  if (rec_) {
    rec_->events.clear();
    rec_->horizon = 0.0;
  }
  record(EventKind::Start);
}

void PathSimulator::record(EventKind kind) {
  if (!rec_) return;
  rec_->events.push_back({t_, s_, kind});
  rec_->horizon = t_;
}

void PathSimulator::jumpTo(int mode) {
  checkMode(spec_, mode);
  s_.mode = mode;
  record(EventKind::Jump);
  nextJump_ = kInf;
}

void PathSimulator::advanceTo(double T) {
  require(T >= t_, ErrorKind::Domain, "cannot advance backwards in time");
  for (;;) {
    const double tEnd = std::min(nextJump_, T);
    if (s_.x > 0.0) {
      const double h = hittingTimeZero(spec_, s_.mode, s_.x);
      if (t_ + h < tEnd) {
        t_ += h;
        s_.x = 0.0;
        record(EventKind::HitZero);
      }
    }
    if (nextJump_ > T) {
      s_.x = flow(spec_, s_.mode, s_.x, T - t_);
      t_ = T;
      if (rec_) rec_->horizon = T;
      return;
    }
    s_.x = flow(spec_, s_.mode, s_.x, nextJump_ - t_);
    t_ = nextJump_;
    s_.mode = spec_.chain.successor(s_.mode, rng_.uniform());
    record(EventKind::Jump);
    nextJump_ = t_ + rng_.exponential(spec_.chain.exitRate(s_.mode));
  }
}

Trajectory simulatePath(const ProcessSpec& spec, State init, double horizon, RngStream& rng) {
  require(horizon > 0.0 && std::isfinite(horizon), ErrorKind::InvalidParameter, "horizon must be > 0");
  Trajectory traj;
  PathSimulator sim(spec, init, rng, &traj);
  sim.advanceTo(horizon);
  return traj;
}

std::vector<EnsembleSnapshot> simulateEnsembleGrid(const ProcessSpec& spec, const InitLaw& init,
                                                   const std::vector<double>& tGrid, std::size_t n,
                                                   std::uint64_t masterSeed, int threads) {
  require(n >= 1, ErrorKind::InvalidParameter, "ensemble size must be >= 1");
  require(!tGrid.empty() && std::is_sorted(tGrid.begin(), tGrid.end()) && tGrid.front() >= 0.0,
          ErrorKind::InvalidParameter, "time grid must be sorted and nonnegative");
  std::vector<EnsembleSnapshot> out(tGrid.size());
  for (std::size_t k = 0; k < tGrid.size(); ++k) {
    out[k].t = tGrid[k];
    out[k].masterSeed = masterSeed;
    out[k].samples.resize(n);
  }
  const int th = resolveThreads(threads);
  parallelChunks(n, th, std::min<std::size_t>(n, 64 * static_cast<std::size_t>(th)),
                 [&](std::size_t b, std::size_t e, std::size_t) {
                   for (std::size_t i = b; i < e; ++i) {
                     RngStream rng(masterSeed, i);
                     PathSimulator sim(spec, init.draw(rng), rng);
                     for (std::size_t k = 0; k < tGrid.size(); ++k) {
                       sim.advanceTo(tGrid[k]);
                       out[k].samples[i] = sim.state();
                     }
                   }
                 });
  return out;
}

EnsembleSnapshot simulateEnsemble(const ProcessSpec& spec, const InitLaw& init, double t, std::size_t n,
                                  std::uint64_t masterSeed, int threads) {
  return std::move(simulateEnsembleGrid(spec, init, {t}, n, masterSeed, threads).front());
}

namespace {

// Integral over [0, L] of x(s)^k along a segment that does not cross zero.
double powerIntegral(const ProcessSpec& spec, int mode, double x0, double L, int k, bool atZero) {
  if (atZero) return k == 0 ? L : 0.0;
  if (k == 0) return L;
  if (spec.potential.isLinear()) {
    const double d = drift(spec, mode, x0);
    if (d == 0.0) return std::pow(x0, k) * L;
    const double x1 = std::max(0.0, x0 + d * L);
    return (std::pow(x1, k + 1) - std::pow(x0, k + 1)) / ((k + 1) * d);
  }
  const double xs = fixedPoint(spec, mode);
  const double a = x0 - xs;
  const double m2 = 2 * spec.mu();
  double sum = 0.0, binom = 1.0;
  for (int j = 0; j <= k; ++j) {
    const double seg = j == 0 ? L : -std::expm1(-m2 * j * L) / (m2 * j);
    sum += binom * std::pow(xs, k - j) * std::pow(a, j) * seg;
    binom = binom * (k - j) / (j + 1);
  }
  return sum;
}

}  // namespace

double occupationAverage(const ProcessSpec& spec, const Trajectory& traj, const Observable& f) {
  require(traj.horizon > 0.0 && !traj.events.empty(), ErrorKind::Domain, "occupation average needs horizon > 0");
  if (auto* p = std::get_if<Polynomial>(&f); p && p->mode < 0 && p->coeffs.size() <= 1)
    return p->coeffs.empty() ? 0.0 : p->coeffs[0];
  double total = 0.0;
  const auto& ev = traj.events;
  for (std::size_t i = 0; i < ev.size(); ++i) {
    const double t0 = ev[i].t;
    const double t1 = i + 1 < ev.size() ? ev[i + 1].t : traj.horizon;
    const double L = t1 - t0;
    if (L <= 0.0) continue;
    const int mode = ev[i].state.mode;
    const double x0 = ev[i].state.x;
    const bool atZero = x0 == 0.0 && isGlued(spec, mode);
    total += std::visit(
        [&](const auto& obs) -> double {
          using T = std::decay_t<decltype(obs)>;
          if constexpr (std::is_same_v<T, AtomIndicator>) {
            return obs.mode == mode && atZero ? L : 0.0;
          } else if constexpr (std::is_same_v<T, Polynomial>) {
            if (obs.mode >= 0 && obs.mode != mode) return 0.0;
            double s = 0.0;
            for (std::size_t k = 0; k < obs.coeffs.size(); ++k)
              if (obs.coeffs[k] != 0.0) s += obs.coeffs[k] * powerIntegral(spec, mode, x0, L, static_cast<int>(k), atZero);
            return s;
          } else if constexpr (std::is_same_v<T, LevelExceedance>) {
            if (obs.mode >= 0 && obs.mode != mode) return 0.0;
            if (atZero) return 0.0 > obs.level ? L : 0.0;
            // Monotone flow: the level is crossed at most once.
            const double tc = std::min(L, timeToReach(spec, mode, x0, obs.level));
            const bool aboveStart = x0 > obs.level || (x0 == obs.level && drift(spec, mode, x0) > 0.0);
            return aboveStart ? tc : L - tc;
          } else {
            auto g = [&](double s) { return obs.f(flow(spec, mode, x0, s), mode); };
            return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(g, 0.0, L, 12, 1e-12);
          }
        },
        f);
  }
  return total / traj.horizon;
}

void writeTrajectoryCsv(std::ostream& os, const ProcessSpec& spec, const Trajectory& traj) {
  os << "t,x,sigma,event_kind\n" << std::setprecision(17);
  for (const auto& e : traj.events)
    os << e.t << ',' << e.state.x << ',' << spec.chain.mode(e.state.mode).label() << ',' << eventKindName(e.kind)
       << '\n';
  const State end = traj.finalState(spec);
  os << traj.horizon << ',' << end.x << ',' << spec.chain.mode(end.mode).label() << ",end\n";
}

void writeSnapshotCsv(std::ostream& os, const ProcessSpec& spec, const EnsembleSnapshot& snap) {
  os << "replica,x,sigma\n" << std::setprecision(17);
  for (std::size_t i = 0; i < snap.samples.size(); ++i)
    os << i << ',' << snap.samples[i].x << ',' << spec.chain.mode(snap.samples[i].mode).label() << '\n';
}

}  // namespace rtp
