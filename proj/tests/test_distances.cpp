#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "rtp/distances.hpp"
#include "rtp/error.hpp"

using namespace rtp;

namespace {

std::vector<State> sampleMeasure(const MixedMeasure& m, std::size_t n, std::uint64_t seed) {
  std::vector<State> out(n);
  RngStream rng(seed, 0);
  for (auto& s : out) s = m.sample(rng);
  return out;
}

}  // namespace

TEST_CASE("empirical mixed measure") {
  const std::vector<State> s = {{0.0, 0}, {0.0, 1}, {0.05, 0}, {0.1, 1}, {0.11, 1}, {5.0, 2}};
  const EmpiricalMixedMeasure e(s, 3, 0.05, 1.0);
  CHECK(e.numBins() == 20);
  CHECK(e.atomCount(0) == 1);
  CHECK(e.atomCount(1) == 1);
  CHECK(e.binCount(0, 0) == 1);
  CHECK(e.binCount(1, 1) == 1);
  CHECK(e.binCount(1, 2) == 1);
  CHECK(e.overflowCount(2) == 1);
  std::uint64_t total = 0;
  for (auto c : e.cells()) total += c;
  CHECK(total == s.size());
  CHECK_THROWS_AS(EmpiricalMixedMeasure(s, 3, 0.0, 1.0), Error);
}

TEST_CASE("TV to the analytic measure") {
  const auto m = instantaneousLinearInvariant(1.0, 1.0, 2.0);
  const double h = 0.05;
  // Cells sum to one.
  double total = 0.0;
  for (double c : analyticCells(m, 200, h, 10.0)) total += c;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

  const auto small = tvToAnalytic(sampleMeasure(m, 10000, 1), m, h);
  const auto big = tvToAnalytic(sampleMeasure(m, 1000000, 2), m, h);
  CHECK(big.value <= 0.02);
  CHECK(big.value < small.value);
  CHECK(big.standardError > 0.0);
  // With analytic bin masses the self-distance is sampling noise only; it grows with the cell count.
  const auto coarse = tvToAnalytic(sampleMeasure(m, 1000000, 2), m, 0.2);
  CHECK(coarse.value <= big.value);
  CHECK(coarse.value <= 0.02);

  // Early time from (0, +2): macroscopic distance, well above the bias floor.
  const auto spec = instantaneousLinear(1.0, 1.0, 2.0);
  const auto snap = simulateEnsemble(spec, InitLaw::pointMass({0.0, spec.chain.indexOf("+2")}), 1.0, 100000, 5, 1);
  const auto early = tvToAnalytic(snap.samples, m, h);
  CHECK(early.value > big.value + 10 * early.standardError);
  CHECK(early.value > 0.1);
  CHECK_THROWS_AS(tvToAnalytic({}, m, h), Error);
}

TEST_CASE("quantile Wasserstein") {
  std::mt19937_64 gen(3);
  std::exponential_distribution<double> e(1.0);
  std::vector<double> a(500), b(500);
  for (auto& x : a) x = e(gen);
  for (auto& x : b) x = 2 * e(gen);
  auto sa = a, sb = b;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  double mad = 0.0;
  for (int i = 0; i < 500; ++i) mad += std::abs(sa[i] - sb[i]);
  CHECK(wassersteinQuantile(a, b, 1.0) == doctest::Approx(mad / 500).epsilon(1e-12));
  CHECK(wassersteinQuantile(a, a, 2.0) == 0.0);
  // Unequal sizes: {0, 1} vs {0, 0.5, 1} -> int |F^-1 - G^-1| = 1/6 * 0.5 + 1/6 * 0.5.
  CHECK(wassersteinQuantile({0.0, 1.0}, {0.0, 0.5, 1.0}, 1.0) == doctest::Approx(1.0 / 6).epsilon(1e-14));
  CHECK_THROWS_AS(wassersteinQuantile(a, b, 0.5), Error);
}

TEST_CASE("mixed distance bracket") {
  const auto m1 = finiteLinearInvariant(1.0, 1.0, 1.0, 3.0);
  const auto m2 = finiteLinearInvariant(2.0, 1.0, 1.0, 3.0);
  const auto a = sampleMeasure(m1, 20000, 4), b = sampleMeasure(m2, 20000, 5);
  const auto br = mixedDistanceBracket(a, b, 1.0);
  CHECK(br.lower.value <= br.upper.value + 1e-12);
  CHECK(std::isfinite(br.upper.value));
  const auto same = mixedDistanceBracket(a, a, 1.0);
  CHECK(same.lower.value == 0.0);
  CHECK(same.upper.value == 0.0);
  // Pathwise bracketing on many random sample sets.
  std::mt19937_64 gen(6);
  for (int k = 0; k < 200; ++k) {
    std::vector<State> x(50), y(50);
    for (auto& s : x) s = {std::uniform_real_distribution<double>(0, 3)(gen), int(gen() % 3)};
    for (auto& s : y) s = {std::uniform_real_distribution<double>(0, 2)(gen), int(gen() % 3)};
    for (double p : {1.0, 2.0}) {
      const auto bk = mixedDistanceBracket(x, y, p);
      CHECK(bk.lower.value <= bk.upper.value + 1e-12);
      CHECK(bk.lower.value <= pairedCouplingCost(x, y, p).value + 1e-12);
    }
  }
  CHECK_THROWS_AS(mixedDistanceBracket(a, b, 0.5), Error);
  const auto paired = pairedCouplingCost({{1.0, 0}, {2.0, 1}}, {{1.5, 0}, {2.0, 0}}, 1.0);
  CHECK(paired.value == doctest::Approx(0.25 + 0.5).epsilon(1e-15));
}

TEST_CASE("rate fitting") {
  std::vector<SeriesPoint> s;
  for (int k = 0; k < 8; ++k) {
    const double t = 1.0 + k;
    s.push_back({t, 3 * std::exp(-0.7 * t), 0.0});
  }
  const auto f = fitRate(s, 0, 100);
  CHECK(std::abs(f.rate - 0.7) < 1e-12);
  CHECK(f.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(f.pointsUsed == 8);

  std::mt19937_64 gen(9);
  std::normal_distribution<double> nz(0.0, 0.05);
  int within = 0;
  for (int r = 0; r < 200; ++r) {
    std::vector<SeriesPoint> noisy;
    for (int k = 0; k < 8; ++k) {
      const double t = 1.0 + k, v = 3 * std::exp(-0.7 * t);
      noisy.push_back({t, v * (1 + nz(gen)), 0.05 * v});
    }
    const auto g = fitRate(noisy, 0, 100);
    within += std::abs(g.rate - 0.7) <= 3 * g.stderr_;
  }
  CHECK(within >= 190);

  // Plateau at a bias floor: excluded points, then too few left.
  std::vector<SeriesPoint> floorSeries;
  for (int k = 0; k < 8; ++k) {
    const double t = 1.0 + k;
    floorSeries.push_back({t, std::max(0.2, 3 * std::exp(-0.7 * t)), 0.001});
  }
  CHECK_THROWS_AS(fitRate(floorSeries, 0, 100, 0.2), Error);
  std::vector<SeriesPoint> zero = s;
  zero[5].value = 0.0;
  CHECK_THROWS_AS(fitRate(zero, 0, 100), Error);
  CHECK_THROWS_AS(fitRate(s, 0, 3), Error);
  const auto j = f.toJson();
  CHECK(j.at("points_used") == 8);

  std::ostringstream os;
  writeDecayCsv(os, {{1.0, 0.5, 0.01, "tvHistogram"}});
  CHECK(os.str() == "t,estimate,stderr,kind\n1,0.5,0.01,tvHistogram\n");
}
