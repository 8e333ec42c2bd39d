#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "rtp/couplings.hpp"
#include "rtp/error.hpp"
#include "rtp/invariant.hpp"

using namespace rtp;

namespace {

// Single-particle jump rate from velocity s to s2.
double singleRate(const VelocityChain& ch, int s, int s2) {
  if (s == s2) return 0.0;
  if (ch.mechanism() == Mechanism::Instantaneous) return ch.omega();
  if (s != 0) return s2 == 0 ? ch.alpha() : 0.0;
  return 0.5 * ch.beta();
}

struct PointSampler : StateSampler {
  State s;
  explicit PointSampler(State st) : s(st) {}
  State sample(RngStream&) const override { return s; }
};

// Two-sample Kolmogorov-Smirnov statistic.
double ks2(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<double> all(a);
  all.insert(all.end(), b.begin(), b.end());
  double d = 0.0;
  for (double g : all) {
    const double fa = double(std::upper_bound(a.begin(), a.end(), g) - a.begin()) / a.size();
    const double fb = double(std::upper_bound(b.begin(), b.end(), g) - b.begin()) / b.size();
    d = std::max(d, std::abs(fa - fb));
  }
  return d;
}

State randomState(const ProcessSpec& spec, RngStream& rng, double xmax) {
  return {rng.uniform() < 0.2 ? 0.0 : xmax * rng.uniform(), static_cast<int>(rng.uniform() * spec.chain.size())};
}

}  // namespace

TEST_CASE("pair chains have the single-particle marginals") {
  for (const auto& ch : {instantaneousChain(1.3), finiteChain(0.7, 2.1)}) {
    const std::vector<int> vel = ch.mechanism() == Mechanism::Instantaneous ? std::vector<int>{-1, 1}
                                                                             : std::vector<int>{-1, 0, 1};
    int states = 0;
    for (int a : vel)
      for (int b : vel) {
        ++states;
        const auto moves = pairTransitions(ch, {a, b});
        std::map<int, double> ra, rb;
        for (const auto& m : moves) {
          CHECK(m.rate > 0.0);
          if (m.to.a != a) ra[m.to.a] += m.rate;
          if (m.to.b != b) rb[m.to.b] += m.rate;
          if (a == b) CHECK(m.to.coupled());
        }
        for (int s : vel) {
          CHECK(ra[s] == doctest::Approx(singleRate(ch, a, s)).epsilon(1e-15));
          CHECK(rb[s] == doctest::Approx(singleRate(ch, b, s)).epsilon(1e-15));
        }
        // Every uncoupled state reaches the coupled set at rate >= lambda_Q.
        if (a != b) {
          double toCoupled = 0.0;
          for (const auto& m : moves)
            if (m.to.coupled()) toCoupled += m.rate;
          CHECK(toCoupled >= chainSpectrum(ch).spectralGap * (1 - 1e-12));
        }
      }
    CHECK(states == (ch.mechanism() == Mechanism::Instantaneous ? 4 : 9));
    for (int m = 0; m < ch.size(); ++m)
      for (const auto& p : modePreimages(ch, m)) CHECK(relativeMode(ch, p[0], p[1]) == m);
  }
  const auto fin = finiteChain(1, 1);
  CHECK(relativeMode(fin, 1, 1) == fin.indexOf("0pm"));
  CHECK(relativeMode(fin, 0, 0) == fin.indexOf("00"));
  CHECK(relativeMode(fin, 0, 1) == fin.indexOf("+1"));
}

TEST_CASE("identical starts give identical paths") {
  for (const auto& spec : {instantaneousLinear(1, 1, 2), finiteLinear(1, 1, 1, 3), instantaneousHarmonic(1, 1, 1)}) {
    RngStream rng(4, 0);
    const State s{0.7, 0};
    const auto pair = spec.potential.isLinear() ? coupleLinearSynchronous(spec, s, s, 20.0, rng)
                                                : coupleHarmonicSynchronous(spec, s, s, 20.0, rng);
    CHECK(pair.coalescenceTime == 0.0);
    CHECK(pair.meetingTime == 0.0);
    for (const auto& e : pair.events) CHECK(e.a == e.b);
    CHECK(pair.pathA.finalState(spec) == pair.pathB.finalState(spec));
  }
}

TEST_CASE("wrong couplings are rejected") {
  RngStream rng(1, 0);
  CHECK_THROWS_AS(coupleLinearSynchronous(instantaneousHarmonic(1, 1, 1), {0, 0}, {0, 0}, 1.0, rng), Error);
  CHECK_THROWS_AS(coupleHarmonicSynchronous(instantaneousLinear(1, 1, 2), {0, 0}, {0, 0}, 1.0, rng), Error);
  CHECK_THROWS_AS(singleVelocityDominate(instantaneousLinear(1, 1, 2), {0, 0}, 1.0, rng), Error);
  CHECK_THROWS_AS(singleVelocityDominate(instantaneousHarmonic(1, 1, 1), {0, 0}, 1.0, rng), Error);
}

TEST_CASE("coalescence tail envelope") {
  for (const auto& spec : {instantaneousLinear(1, 1, 2), finiteLinear(1, 1, 1, 3), instantaneousHarmonic(1, 1, 1)}) {
    const double lq = chainSpectrum(spec.chain).spectralGap;
    const int n = 100000;
    const std::vector<double> grid = {0.5 / lq, 1 / lq, 2 / lq, 3 / lq, 5 / lq};
    std::vector<int> notCoal(grid.size(), 0), differ(grid.size(), 0);
    const State a{0.0, 0}, b{1.0, spec.chain.size() - 1};
    for (int i = 0; i < n; ++i) {
      RngStream rng(77, i);
      CoupledSimulator sim(spec, a, b, rng);
      for (std::size_t k = 0; k < grid.size(); ++k) {
        sim.advanceTo(grid[k]);
        notCoal[k] += !(sim.coalescenceTime() <= grid[k]);
        differ[k] += sim.stateA().mode != sim.stateB().mode;
      }
    }
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const double p = double(notCoal[k]) / n, se = std::sqrt(p * (1 - p) / n);
      const double env = 2 * std::exp(-lq * grid[k]);
      CAPTURE(grid[k]);
      CHECK(p <= env + 4 * se);
      CHECK(differ[k] <= notCoal[k]);
    }
  }
  // Linear instantaneous, t = 2: non-coalescence at most 2 e^{-4} + 4 SE.
  const auto spec = instantaneousLinear(1, 1, 2);
  int bad = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    RngStream rng(3, i);
    CoupledSimulator sim(spec, {0.0, spec.chain.indexOf("+2")}, {2.0, spec.chain.indexOf("-2")}, rng);
    sim.advanceTo(2.0);
    bad += !sim.coalesced();
  }
  const double p = double(bad) / n;
  CHECK(p <= 2 * std::exp(-4.0) + 4 * std::sqrt(p * (1 - p) / n));
}

TEST_CASE("order preservation after coalescence (linear)") {
  int violations = 0, coalescedRuns = 0;
  for (const auto& spec : {instantaneousLinear(1, 1, 2), finiteLinear(1, 2, 1, 3)}) {
    for (int i = 0; i < 10000; ++i) {
      RngStream rng(11, i);
      const State a = randomState(spec, rng, 5.0), b = randomState(spec, rng, 5.0);
      const auto pair = coupleLinearSynchronous(spec, a, b, 10.0, rng);
      if (!(pair.coalescenceTime <= pair.horizon)) continue;
      ++coalescedRuns;
      const double tc = pair.coalescenceTime;
      const State sa = pair.pathA.stateAt(spec, tc), sb = pair.pathB.stateAt(spec, tc);
      const double sign = sa.x - sb.x;
      std::vector<double> times;
      for (const auto& e : pair.pathA.events) times.push_back(e.t);
      for (const auto& e : pair.pathB.events) times.push_back(e.t);
      times.push_back(pair.horizon);
      for (double t : times) {
        if (t < tc) continue;
        const State xa = pair.pathA.stateAt(spec, t), xb = pair.pathB.stateAt(spec, t);
        if (xa.mode != xb.mode || (xa.x - xb.x) * sign < 0.0) ++violations;
      }
    }
  }
  CHECK(coalescedRuns > 15000);
  CHECK(violations == 0);
}

TEST_CASE("harmonic contraction after coalescence") {
  const auto spec = instantaneousHarmonic(1.0, 1.0, 1.0);
  double worstSlack = INFINITY;
  int stepViolations = 0;
  for (int i = 0; i < 10000; ++i) {
    RngStream rng(19, i);
    const State a = randomState(spec, rng, 3.0), b = randomState(spec, rng, 3.0);
    const auto pair = coupleHarmonicSynchronous(spec, a, b, 6.0, rng);
    if (!(pair.coalescenceTime <= pair.horizon)) continue;
    const double tc = pair.coalescenceTime;
    const double g0 = std::abs(pair.pathA.stateAt(spec, tc).x - pair.pathB.stateAt(spec, tc).x);
    for (double t = tc; t <= pair.horizon; t += 0.05) {
      const double g = std::abs(pair.pathA.stateAt(spec, t).x - pair.pathB.stateAt(spec, t).x);
      worstSlack = std::min(worstSlack, std::exp(-2 * (t - tc)) * g0 - g);
      if (t + 1 <= pair.horizon) {
        const double g1 = std::abs(pair.pathA.stateAt(spec, t + 1).x - pair.pathB.stateAt(spec, t + 1).x);
        stepViolations += g1 > std::exp(-2.0) * g + 1e-12;
      }
    }
  }
  CHECK(worstSlack >= -1e-12);
  CHECK(stepViolations == 0);
}

TEST_CASE("single-velocity domination") {
  const auto spec = finiteLinear(1.0, 1.0, 1.0, 3.0);
  RngStream r0(2, 0);
  const auto zero = singleVelocityDominate(spec, {0.0, spec.chain.indexOf("00")}, 5.0, r0);
  CHECK(zero.events.front().y1 == 0.0);
  CHECK(zero.events.front().y2 == 0.0);
  CHECK(zero.events.front().x == 0.0);
  int violations = 0;
  for (int i = 0; i < 10000; ++i) {
    RngStream rng(23, i);
    const auto d = singleVelocityDominate(spec, randomState(spec, rng, 4.0), 50.0, rng);
    violations += d.violations;
    for (const auto& e : d.events) CHECK(relativeMode(spec.chain, e.sigma1, e.sigma2) == e.mode);
  }
  CHECK(violations == 0);
  // P(x(t) > L) <= P(y1 + y2 >= L) at t = 5.
  const int n = 20000;
  int ex = 0, ey = 0;
  for (int i = 0; i < n; ++i) {
    RngStream rng(29, i);
    const auto d = singleVelocityDominate(spec, {1.0, spec.chain.indexOf("+2")}, 5.0, rng);
    const auto& e = d.events.back();
    ex += e.x > 1.0;
    ey += e.y1 + e.y2 >= 1.0;
  }
  const double px = double(ex) / n, py = double(ey) / n;
  CHECK(px <= py + 2 * std::sqrt((px * (1 - px) + py * (1 - py)) / n));
}

TEST_CASE("coupled components have the plain marginals") {
  for (const auto& spec : {instantaneousLinear(1, 1, 2), finiteLinear(1, 1, 1, 3), instantaneousHarmonic(1.5, 1, 1)}) {
    const State a{0.5, 0}, b{2.0, spec.chain.size() - 1};
    const int n = 4000;
    std::vector<double> xa, xb, xp;
    std::vector<double> ma(spec.chain.size()), mp(spec.chain.size());
    for (int i = 0; i < n; ++i) {
      RngStream rng(31, i);
      CoupledSimulator sim(spec, a, b, rng);
      sim.advanceTo(1.0);
      xa.push_back(sim.stateA().x);
      xb.push_back(sim.stateB().x);
      ma[sim.stateA().mode] += 1;
      RngStream rp(37, i);
      const auto traj = simulatePath(spec, a, 1.0, rp);
      xp.push_back(traj.finalState(spec).x);
      mp[traj.finalState(spec).mode] += 1;
    }
    CHECK(ks2(xa, xp) < 1.63 * std::sqrt(2.0 / n));
    for (int s = 0; s < spec.chain.size(); ++s) {
      const double p = (ma[s] + mp[s]) / (2 * n);
      CHECK(std::abs(ma[s] - mp[s]) / n <= 4 * std::sqrt(2 * p * (1 - p) / n) + 1e-12);
    }
    std::vector<double> xq;
    for (int i = 0; i < n; ++i) {
      RngStream rp(41, i);
      xq.push_back(simulatePath(spec, b, 1.0, rp).finalState(spec).x);
    }
    CHECK(ks2(xb, xq) < 1.63 * std::sqrt(2.0 / n));
  }
}

TEST_CASE("meeting-time TV estimate") {
  const auto spec = instantaneousLinear(1, 1, 2);
  const State a{0.0, spec.chain.indexOf("+2")};
  const PointSampler same(a), other({0.0, spec.chain.indexOf("-2")});
  const auto p0 = meetingTimeTV(spec, a, same, {0.0}, 100, 1, 0.5);
  CHECK(p0[0].mismatch == 0.0);
  const auto p1 = meetingTimeTV(spec, a, other, {0.0}, 100, 1, 0.5);
  CHECK(p1[0].mismatch == 1.0);

  const auto pi = instantaneousLinearInvariant(1, 1, 2);
  const std::vector<double> grid = {1, 2, 4, 6, 8};
  const auto pts = meetingTimeTV(spec, a, pi, grid, 20000, 7);
  const auto again = meetingTimeTV(spec, a, pi, grid, 20000, 7, std::nullopt, 3);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    // Mismatch implies one of the three decomposition events, replica by replica.
    CHECK(pts[k].mismatch <= pts[k].bound() + 1e-15);
    CHECK(pts[k].mismatch == again[k].mismatch);
    CHECK(pts[k].noHitA == again[k].noHitA);
  }
  CHECK(pts.back().mismatch < pts.front().mismatch);
  CHECK_THROWS_AS(meetingTimeTV(instantaneousHarmonic(1, 1, 1), a, pi, grid, 10, 1), Error);
}

TEST_CASE("coupled CSV export") {
  const auto spec = instantaneousLinear(1, 1, 2);
  RngStream rng(5, 0);
  const auto pair = coupleLinearSynchronous(spec, {0.0, 0}, {1.0, 2}, 3.0, rng);
  std::ostringstream os;
  writeCoupledCsv(os, spec, pair);
  const std::string s = os.str();
  CHECK(s.rfind("t,xA,sigmaA,xB,sigmaB,coalesced_flag\n", 0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') == static_cast<long>(pair.events.size() + 2));
}
