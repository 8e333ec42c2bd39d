#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <random>

#include "rtp/error.hpp"
#include "rtp/invariant.hpp"

using namespace rtp;

namespace {

bool relClose(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

// Max over a grid of |F_emp - F| for the x-marginal; bounded by the KS statistic.
double gridKs(const MixedMeasure& m, std::vector<double> xs, const std::vector<double>& grid) {
  std::sort(xs.begin(), xs.end());
  double d = 0.0;
  for (double g : grid) {
    const double emp = double(std::upper_bound(xs.begin(), xs.end(), g) - xs.begin()) / xs.size();
    d = std::max(d, std::abs(emp - m.cdfX(g)));
  }
  return d;
}

// Stationary forward equation -(b_s p_s)' + sum_j Q(j, s) p_j, max over modes relative to the largest term.
double forwardResidual(const ExponentialMixtureMeasure& m, const ProcessSpec& spec, double x) {
  const auto& Q = spec.chain.Q();
  double worst = 0.0, scale = 0.0;
  for (int s = 0; s < m.numModes(); ++s) {
    double r = -drift(spec, s, x) * m.densityDerivative(x, s);
    scale = std::max(scale, std::abs(r));
    for (int j = 0; j < m.numModes(); ++j) {
      r += Q(j, s) * m.density(x, j);
      scale = std::max(scale, std::abs(Q(j, s) * m.density(x, j)));
    }
    worst = std::max(worst, std::abs(r));
  }
  return scale > 0.0 ? worst / scale : 0.0;
}

// Worst relative forward residual over 200 grid points spanning the bulk.
double forwardResidualGrid(const ExponentialMixtureMeasure& m, const ProcessSpec& spec) {
  const double L = measureScale(m);
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) worst = std::max(worst, forwardResidual(m, spec, 20.0 * L * k / 199.0));
  return worst;
}

}  // namespace

TEST_CASE("instantaneous linear closed form") {
  const auto m = instantaneousLinearInvariant(1.0, 1.0, 2.0);
  REQUIRE(m.terms().size() == 1);
  CHECK(m.terms()[0].zeta == doctest::Approx(-2.0 / 3).epsilon(1e-15));
  const double d[] = {0.0, 1.0 / 3, 2.0 / 9}, a[] = {1.0 / 6, 1.0 / 9, 1.0 / 54};
  for (int i = 0; i < 3; ++i) {
    CHECK(m.atom(i) == doctest::Approx(d[i]).epsilon(1e-15));
    CHECK(m.terms()[0].a[i] == doctest::Approx(a[i]).epsilon(1e-15));
  }
  CHECK(m.totalAtom() == doctest::Approx(5.0 / 9).epsilon(1e-15));
  const auto diag = m.diagnostics();
  CHECK(diag.massError < 1e-14);
  CHECK(diag.marginalError < 1e-14);
  CHECK(m.moment(1.0) == doctest::Approx((1.0 / 6 + 1.0 / 9 + 1.0 / 54) * 9.0 / 4).epsilon(1e-14));
  CHECK(forwardResidualGrid(m, instantaneousLinear(1.0, 1.0, 2.0)) < 1e-14);
  CHECK(m.tailRate() == doctest::Approx(2.0 / 3).epsilon(1e-15));
  CHECK(std::abs(m.tail(0.0) + m.totalAtom() - 1.0) < 1e-12);
  CHECK_THROWS_AS(instantaneousLinearInvariant(1.0, 2.0, 2.0), Error);
}

TEST_CASE("finite polynomials P2 and P3") {
  const auto pp = p2p3(1.0, 1.0, 1.0, 3.0);
  const double p2[] = {-2, -6, 8}, p3[] = {-6, 22, -6, -10};
  for (int i = 0; i < 3; ++i) CHECK(pp.p2[i] == p2[i]);
  for (int i = 0; i < 4; ++i) CHECK(pp.p3[i] == p3[i]);
  CHECK(pp.zeta2() == doctest::Approx(-0.25).epsilon(1e-15));
  REQUIRE(pp.zeta3().has_value());
  CHECK(*pp.zeta3() == doctest::Approx((-4 - std::sqrt(31.0)) / 5).epsilon(1e-15));
  CHECK_FALSE(p2p3(1.0, 1.0, 1.0, 1.8).zeta3().has_value());

  CHECK_FALSE(p2p3(1.0, 1.0, 1.0, 2.0).zeta3().has_value());
}

namespace {
// Negative real eigenvalues of the companion matrix of an ascending-coefficient polynomial.
std::vector<double> negativeRoots(const double* p, int deg) {
  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(deg, deg);
  for (int i = 1; i < deg; ++i) comp(i, i - 1) = 1.0;
  for (int i = 0; i < deg; ++i) comp(i, deg - 1) = -p[i] / p[deg];
  Eigen::EigenSolver<Eigen::MatrixXd> es(comp);
  std::vector<double> out;
  for (int i = 0; i < deg; ++i) {
    const auto r = es.eigenvalues()(i);
    if (std::abs(r.imag()) < 1e-9 * std::abs(r) && r.real() < 0) out.push_back(r.real());
  }
  return out;
}
}  // namespace

TEST_CASE("root and eigenvector suite over random parameters") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> rate(0.1, 10.0), cDist(0.1, 5.0), ratio(1.01, 6.0);
  int fastCount = 0;
  for (int k = 0; k < 1000; ++k) {
    const double al = rate(gen), be = rate(gen), c = cDist(gen), v = c * ratio(gen);
    CAPTURE(al);
    CAPTURE(be);
    CAPTURE(c);
    CAPTURE(v);
    const auto q = p2p3(al, be, c, v);
    const auto r2 = negativeRoots(q.p2.data(), 2);
    REQUIRE(r2.size() == 1);
    CHECK(relClose(q.zeta2(), r2[0], 1e-12));
    const double z2 = q.zeta2();
    CHECK(eigenvectorRhoDenominator(z2, al, be, c, v) != 0.0);
    // Rounding zeta2 to double costs accuracy like (c/(v-c))^2 as v -> c.
    const double cond = std::max(1.0, std::pow(c / (v - c), 2));
    CHECK(eigenvectorResidual(z2, eigenvectorA(z2, al, be, c, v), al, be, c, v) <= 1e-10 * cond);
    const auto r3 = negativeRoots(q.p3.data(), 3);
    if (v > 2 * c) {
      ++fastCount;
      REQUIRE(q.zeta3().has_value());
      REQUIRE(r3.size() == 1);
      const double z3 = *q.zeta3();
      CHECK(relClose(z3, r3[0], 1e-12));
      CHECK(z3 < z2);
      CHECK(eigenvectorRhoDenominator(z3, al, be, c, v) != 0.0);
      CHECK(eigenvectorResidual(z3, eigenvectorA(z3, al, be, c, v), al, be, c, v) <= 1e-10);
    } else {
      CHECK_FALSE(q.zeta3().has_value());
      CHECK(r3.empty());
    }
  }
  CHECK(fastCount > 100);
  CHECK(fastCount < 900);
}

TEST_CASE("eigenvector formula") {
  const auto a = eigenvectorA(-0.25, 1.0, 1.0, 1.0, 3.0);
  CHECK(a[0] == doctest::Approx(15.0 / 4).epsilon(1e-15));
  CHECK(eigenvectorResidual(-0.25, a, 1.0, 1.0, 1.0, 3.0) < 1e-14);
  const auto pp = p2p3(1.0, 1.0, 1.0, 3.0);
  CHECK(eigenvectorResidual(*pp.zeta3(), eigenvectorA(*pp.zeta3(), 1, 1, 1, 3), 1, 1, 1, 3) < 1e-13);
  // Away from a root of P2 P3 the vector is not in the kernel.
  CHECK(eigenvectorResidual(-0.4, eigenvectorA(-0.4, 1, 1, 1, 3), 1, 1, 1, 3) > 1e-3);
}

TEST_CASE("finite linear regimes") {
  const auto slow = finiteLinearInvariant(1.0, 1.0, 1.0, 1.5);
  CHECK(slow.terms().size() == 1);
  CHECK(slow.atom(0) == 0.0);
  CHECK(slow.atom(1) > 0.0);
  const auto fast = finiteLinearInvariant(1.0, 1.0, 1.0, 3.0);
  CHECK(fast.terms().size() == 2);
  CHECK(fast.atom(0) == 0.0);
  CHECK(fast.atom(1) == 0.0);
  for (int i = 2; i < 6; ++i) CHECK(fast.atom(i) > 0.0);
  for (const auto* m : {&slow, &fast}) {
    const auto d = m->diagnostics();
    CHECK(d.massError < 1e-12);
    CHECK(d.marginalError < 1e-12);
    CHECK(d.minDensity >= 0.0);
  }
  CHECK(forwardResidualGrid(fast, finiteLinear(1.0, 1.0, 1.0, 3.0)) < 1e-10);
  CHECK(fast.tailRate() == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(std::abs(fast.tail(0.0) + fast.totalAtom() - 1.0) < 1e-12);
  // v = 2c uses the one-term branch.
  const auto edge = finiteLinearInvariant(1.0, 1.0, 1.0, 2.0);
  CHECK(edge.terms().size() == 1);
  CHECK(edge.diagnostics().massError < 1e-12);
}

TEST_CASE("finite linear over random parameters") {
  std::mt19937_64 gen(101);
  std::uniform_real_distribution<double> rate(0.1, 10.0), cDist(0.1, 5.0), ratio(1.01, 6.0);
  for (int k = 0; k < 100; ++k) {
    const double al = rate(gen), be = rate(gen), c = cDist(gen), v = c * ratio(gen);
    CAPTURE(al);
    CAPTURE(be);
    CAPTURE(c);
    CAPTURE(v);
    const auto m = finiteLinearInvariant(al, be, c, v);
    const auto d = m.diagnostics();
    CHECK(d.massError < 1e-12);
    CHECK(d.marginalError < 1e-12);
    CHECK(d.minDensity >= -1e-15);
    CHECK(m.atom(0) == 0.0);
    CHECK((m.atom(1) == 0.0) == (v > 2 * c));
    for (int s = 2; s < 6; ++s) CHECK(m.atom(s) > 0.0);
    CHECK(forwardResidualGrid(m, finiteLinear(al, be, c, v)) < 1e-10);
    const auto inst = instantaneousLinearInvariant(al, c, v);
    CHECK(inst.diagnostics().marginalError < 1e-12);
  }
}

TEST_CASE("json round trip and sampling") {
  const auto m = finiteLinearInvariant(1.0, 2.0, 1.0, 3.0);
  const auto back = mixtureFromJson(nlohmann::json::parse(m.toJson().dump()));
  for (int s = 0; s < 6; ++s) {
    CHECK(back.atom(s) == m.atom(s));
    CHECK(back.density(0.7, s) == m.density(0.7, s));
  }
  CHECK_THROWS_AS(mixtureFromJson(nlohmann::json::parse(R"({"process":"x"})")), Error);

  RngStream rng(17, 0);
  std::vector<double> xs;
  std::vector<double> modeCount(6, 0.0);
  const int N = 20000;
  for (int i = 0; i < N; ++i) {
    const auto s = m.sample(rng);
    xs.push_back(s.x);
    modeCount[s.mode] += 1.0;
  }
  std::vector<double> grid;
  for (int k = 0; k <= 200; ++k) grid.push_back(m.xQuantile(std::min(0.999, k / 200.0)));
  CHECK(gridKs(m, xs, grid) < 1.63 / std::sqrt(double(N)));
  for (int s = 0; s < 6; ++s) {
    const double p = m.modeMass(s);
    CHECK(std::abs(modeCount[s] / N - p) < 4 * std::sqrt(p * (1 - p) / N));
  }
}

TEST_CASE("generator residuals vanish for the closed forms") {
  for (const auto& spec : {instantaneousLinear(1.0, 1.0, 2.0), finiteLinear(1.0, 1.0, 1.0, 1.5),
                           finiteLinear(0.7, 2.0, 1.0, 3.5)}) {
    const auto m = invariantFor(spec);
    for (const auto& tf : standardTestFamily(m->numModes(), measureScale(*m))) {
      CAPTURE(tf.name);
      CHECK(std::abs(generatorResidual(*m, spec, tf).value) < 1e-10);
    }
  }
  const auto spec = instantaneousLinear(1.0, 1.0, 2.0);
  const auto base = instantaneousLinearInvariant(1.0, 1.0, 2.0);
  const TestFunction one{"one", [](double, int) { return 1.0; }, [](double, int) { return 0.0; }};
  CHECK(generatorResidual(base, spec, one).value == 0.0);
  const TestFunction e{"e", [](double x, int s) { return s == 0 ? std::exp(-x) : 0.0; },
                       [](double x, int s) { return s == 0 ? -std::exp(-x) : 0.0; }};
  CHECK(std::abs(generatorResidual(base, spec, e).value) < 1e-8);
  // A perturbed atom at sigma = 0 is detected.
  const auto m = base.perturbedAtom(1, 0.01);
  double worst = 0.0;
  for (const auto& tf : standardTestFamily(3, measureScale(m)))
    worst = std::max(worst, std::abs(generatorResidual(m, spec, tf).value));
  CHECK(worst > 1e-4);
}

TEST_CASE("harmonic atoms against reference values") {
  const double ref[][2] = {{0.6, 0.4713775039339138},
                           {1.7, 0.4126245740482783},
                           {2.0, 0.4},
                           {2.5, 0.38152410293812339},
                           {4.3, 0.33296387995054959}};
  for (const auto& r : ref) {
    CAPTURE(r[0]);
    HarmonicInvariant h(r[0], 1.0, 1.0);
    CHECK(relClose(h.d0(), r[1], 1e-10));
    CHECK(relClose(h.d0ClosedForm(), r[1], 1e-10));
    CHECK(std::abs(h.c2() - h.c3()) < 1e-10);
    CHECK(relClose(h.cClosedForm(), h.c1(), 1e-9));
    for (double e : h.marginalEquationResiduals()) CHECK(std::abs(e) < 1e-10);
  }
  // Per-mode densities at x = 0.37, omega = b, mu = v = 1.
  const double dens[][3] = {{0.6, 0.16150717230243094, 0.22321585492120586},
                            {1.7, 0.30599052909451685, 0.35811837435797095},
                            {2.5, 0.35975807330165871, 0.39734387964893728},
                            {4.3, 0.40322718999567073, 0.4169282236219977}};
  for (const auto& r : dens) {
    HarmonicInvariant h(r[0], 1.0, 1.0);
    CHECK(relClose(h.density(0.37, 0), r[1], 1e-10));
    CHECK(relClose(h.density(0.37, 1), r[2], 1e-10));
    CHECK(relClose(h.densityX(0.37), h.densityXClosedForm(0.37), 1e-10));
  }
}

TEST_CASE("harmonic scaling and b = 1") {
  // Atoms depend on omega/mu only; densities scale with mu/v.
  HarmonicInvariant a(1.7, 1.0, 1.0), b(3.4, 2.0, 3.0);
  CHECK(relClose(a.d0(), b.d0(), 1e-11));
  CHECK(relClose(b.density(0.37 * 1.5, 0), a.density(0.37, 0) / 1.5, 1e-10));

  HarmonicInvariant one(1.0, 1.0, 1.0);
  CHECK(one.d0() == doctest::Approx(8.0 / (8.0 + M_PI * M_PI)).epsilon(1e-15));
  for (double x : {0.1, 0.5, 0.9}) {
    CAPTURE(x);
    CHECK(relClose(one.densityX(x), one.densityXClosedForm(x), 1e-6));
  }
  double mass = one.d0();
  for (int s = 0; s < 3; ++s) mass += one.binMass(0.0, 1.0, s);
  CHECK(std::abs(mass - 1.0) < 1e-6);
  CHECK(std::abs(one.tail(0.0) + one.d0() - 1.0) < 1e-8);
}

TEST_CASE("harmonic shape transition and pole guard") {
  HarmonicInvariant lo(0.6, 1.0, 1.0), hi(2.0, 1.0, 1.0);
  // b < 1: density grows without bound at both endpoints; b > 1: vanishes at x = v/mu.
  double prevLo = 0.0, prevHi = 0.0, prevB = INFINITY;
  for (int k = 2; k <= 10; k += 2) {
    const double h = std::pow(10.0, -k);
    CHECK(lo.densityX(h) > prevLo);
    CHECK(lo.densityX(1.0 - h) > prevHi);
    CHECK(hi.densityX(1.0 - h) < prevB);
    prevLo = lo.densityX(h);
    prevHi = lo.densityX(1.0 - h);
    prevB = hi.densityX(1.0 - h);
  }
  CHECK(prevB < 1e-3);
  CHECK(harmonicPoleGuard(3.0));
  CHECK(harmonicPoleGuard(0.5 + 1e-7));
  CHECK_FALSE(harmonicPoleGuard(1.0));
  CHECK_FALSE(harmonicPoleGuard(2.0));
  try {
    HarmonicInvariant bad(3.0, 1.0, 1.0);
    FAIL("expected pole guard");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::PoleGuard);
  }
}

TEST_CASE("harmonic sampling and residuals") {
  for (double b : {0.6, 1.0, 2.5}) {
    CAPTURE(b);
    HarmonicInvariant h(b, 1.0, 2.0);
    RngStream rng(5, 0);
    const int N = 5000;
    std::vector<double> xs;
    for (int i = 0; i < N; ++i) xs.push_back(h.sample(rng).x);
    std::vector<double> grid;
    for (int k = 0; k <= 40; ++k) grid.push_back(2.0 * k / 40.0);
    CHECK(gridKs(h, xs, grid) < 1.63 / std::sqrt(double(N)));
    const auto spec = instantaneousHarmonic(b, 1.0, 2.0);
    const double tol = b == 1.0 ? 1e-6 : 1e-8;
    for (const auto& tf : standardTestFamily(3, measureScale(h))) {
      CAPTURE(tf.name);
      CHECK(std::abs(generatorResidual(h, spec, tf).value) < tol);
    }
  }
}
