#include "rtp/invariant.hpp"

#include <algorithm>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <numeric>
#include <sstream>

#include "rtp/error.hpp"
#include "rtp/format.hpp"
#include "rtp/special_functions.hpp"

namespace rtp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kSqrtPi = std::sqrt(M_PI);

std::string describe(const char* what, double value) {
  std::ostringstream os;
  os.precision(17);
  os << what << " = " << value;
  return os.str();
}

}  // namespace

double MixedMeasure::totalAtom() const {
  double s = 0.0;
  for (int i = 0; i < numModes(); ++i) s += atom(i);
  return s;
}

double MixedMeasure::densityX(double x) const {
  double s = 0.0;
  for (int i = 0; i < numModes(); ++i) s += density(x, i);
  return s;
}

// ---------------------------------------------------------------------------
// Exponential mixtures

ExponentialMixtureMeasure::ExponentialMixtureMeasure(std::string process, VelocityChain chain, std::string regime,
                                                     nlohmann::json params, std::vector<double> atoms,
                                                     std::vector<Term> terms)
    : process_(std::move(process)),
      chain_(std::move(chain)),
      regime_(std::move(regime)),
      params_(std::move(params)),
      atoms_(std::move(atoms)),
      terms_(std::move(terms)) {
  const int n = chain_.size();
  require(static_cast<int>(atoms_.size()) == n, ErrorKind::InvalidParameter, "atom vector size mismatch");
  require(!terms_.empty(), ErrorKind::InvalidParameter, "mixture needs at least one term");
  for (const auto& t : terms_) {
    require(static_cast<int>(t.a.size()) == n, ErrorKind::InvalidParameter, "term vector size mismatch");
    require(t.zeta < 0.0 && std::isfinite(t.zeta), ErrorKind::InvalidParameter, "mixture rates must be negative");
  }
  cumAtoms_.resize(n);
  modeContMass_.resize(n);
  double cum = 0.0;
  for (int i = 0; i < n; ++i) {
    cum += atoms_[i];
    cumAtoms_[i] = cum;
    double m = 0.0;
    for (const auto& t : terms_) m += t.weight * t.a[i] / -t.zeta;
    modeContMass_[i] = m;
  }
}

double ExponentialMixtureMeasure::density(double x, int mode) const {
  double s = 0.0;
  for (const auto& t : terms_) s += t.weight * t.a[mode] * std::exp(t.zeta * x);
  return s;
}

double ExponentialMixtureMeasure::densityDerivative(double x, int mode) const {
  double s = 0.0;
  for (const auto& t : terms_) s += t.weight * t.a[mode] * t.zeta * std::exp(t.zeta * x);
  return s;
}

double ExponentialMixtureMeasure::binMass(double x0, double x1, int mode) const {
  if (!(x1 > x0)) return 0.0;
  double s = 0.0;
  for (const auto& t : terms_) {
    if (std::isinf(x1)) {
      s += t.weight * t.a[mode] * std::exp(t.zeta * x0) / -t.zeta;
    } else {
      s += t.weight * t.a[mode] * std::exp(t.zeta * x0) * std::expm1(t.zeta * (x1 - x0)) / t.zeta;
    }
  }
  return s;
}

double ExponentialMixtureMeasure::tailMode(double x, int mode) const {
  double s = 0.0;
  for (const auto& t : terms_) s += t.weight * t.a[mode] * std::exp(t.zeta * x) / -t.zeta;
  return s;
}

double ExponentialMixtureMeasure::tail(double x) const {
  double s = 0.0;
  for (int i = 0; i < numModes(); ++i) s += tailMode(x, i);
  if (x < 0.0) s += totalAtom();
  return s;
}

double ExponentialMixtureMeasure::continuousMass(int mode) const { return modeContMass_[mode]; }

double ExponentialMixtureMeasure::supportMax() const { return kInf; }

double ExponentialMixtureMeasure::moment(double p) const {
  require(p >= 0.0, ErrorKind::InvalidParameter, "moment order must be >= 0");
  double s = p == 0.0 ? totalAtom() : 0.0;
  const double g = std::tgamma(p + 1.0);
  for (int i = 0; i < numModes(); ++i)
    for (const auto& t : terms_) s += t.weight * t.a[i] * g / std::pow(-t.zeta, p + 1.0);
  return s;
}

double ExponentialMixtureMeasure::tailRate() const {
  // Slowest decaying term with nonzero total weight.
  double rate = kInf;
  for (const auto& t : terms_) {
    double w = 0.0;
    for (double a : t.a) w += std::fabs(t.weight * a);
    if (w > 0.0) rate = std::min(rate, -t.zeta);
  }
  return rate;
}

double ExponentialMixtureMeasure::expIntegral(double k, int mode) const {
  double s = atoms_[mode];
  for (const auto& t : terms_) {
    if (t.weight * t.a[mode] == 0.0) continue;
    if (k >= -t.zeta) return kInf;
    s += t.weight * t.a[mode] / -(t.zeta + k);
  }
  return s;
}

double ExponentialMixtureMeasure::integrateContinuous(const std::function<double(double, int)>& g,
                                                      double* errorEstimate) const {
  boost::math::quadrature::exp_sinh<double> es;
  auto f = [&](double x) {
    double s = 0.0;
    for (int i = 0; i < numModes(); ++i) {
      const double d = density(x, i);
      if (d != 0.0) s += g(x, i) * d;
    }
    return s;
  };
  double err = 0.0, l1 = 0.0;
  const double val = es.integrate(f, 0.0, kInf, 1e-13, &err, &l1);
  if (errorEstimate) *errorEstimate = err;
  return val;
}

double ExponentialMixtureMeasure::xQuantile(double u) const {
  require(u >= 0.0 && u < 1.0, ErrorKind::Domain, "quantile level must be in [0, 1)");
  const double atomMass = totalAtom();
  if (u <= atomMass) return 0.0;
  const double target = 1.0 - u;  // tail mass to the right of the quantile
  double lo = 0.0, hi = 1.0 / tailRate();
  while (tail(hi) > target) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (tail(mid) > target) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

State ExponentialMixtureMeasure::sample(RngStream& rng) const {
  const int n = numModes();
  double u = rng.uniform();
  for (int i = 0; i < n; ++i)
    if (u < cumAtoms_[i]) return {0.0, i};
  u -= cumAtoms_[n - 1];
  int mode = n - 1;
  for (int i = 0; i < n; ++i) {
    if (u < modeContMass_[i]) {
      mode = i;
      break;
    }
    u -= modeContMass_[i];
  }
  if (terms_.size() == 1) return {rng.exponential(-terms_[0].zeta), mode};
  // Inverse of the per-mode conditional tail by bisection.
  const double mass = modeContMass_[mode];
  const double target = (1.0 - rng.uniform()) * mass;
  double lo = 0.0, hi = 1.0 / tailRate();
  while (tailMode(hi, mode) > target) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (tailMode(mid, mode) > target) lo = mid;
    else hi = mid;
  }
  return {0.5 * (lo + hi), mode};
}

nlohmann::json ExponentialMixtureMeasure::toJson() const {
  nlohmann::json j;
  j["process"] = process_;
  j["regime"] = regime_;
  j["params"] = params_;
  std::vector<std::string> modes, atoms;
  for (int i = 0; i < numModes(); ++i) {
    modes.push_back(chain_.mode(i).label());
    atoms.push_back(num17(atoms_[i]));
  }
  j["modes"] = modes;
  j["atoms"] = atoms;
  j["terms"] = nlohmann::json::array();
  for (const auto& t : terms_) {
    std::vector<std::string> a;
    for (double x : t.a) a.push_back(num17(x));
    j["terms"].push_back({{"c", num17(t.weight)}, {"zeta", num17(t.zeta)}, {"a", a}});
  }
  j["tail_rate"] = num17(tailRate());
  return j;
}

ExponentialMixtureMeasure ExponentialMixtureMeasure::perturbedAtom(int mode, double delta) const {
  require(mode >= 0 && mode < numModes(), ErrorKind::InvalidParameter, "mode index out of range");
  const double scale = 1.0 / (1.0 + delta);
  auto atoms = atoms_;
  atoms[mode] += delta;
  for (double& d : atoms) d *= scale;
  auto terms = terms_;
  for (auto& t : terms) t.weight *= scale;
  return ExponentialMixtureMeasure(process_, chain_, regime_ + "-perturbed", params_, atoms, terms);
}

ExponentialMixtureMeasure::Diagnostics ExponentialMixtureMeasure::diagnostics() const {
  Diagnostics d{};
  double mass = 0.0;
  const auto piQ = stationaryLawClosedForm(chain_);
  for (int i = 0; i < numModes(); ++i) {
    mass += modeMass(i);
    d.marginalError = std::max(d.marginalError, std::fabs(modeMass(i) - piQ(i)));
  }
  d.massError = std::fabs(mass - 1.0);
  d.minDensity = kInf;
  const double xmax = 30.0 / tailRate();
  for (int k = 0; k < 1000; ++k) {
    const double x = xmax * k / 999.0;
    for (int i = 0; i < numModes(); ++i) d.minDensity = std::min(d.minDensity, density(x, i));
  }
  return d;
}

ExponentialMixtureMeasure instantaneousLinearInvariant(double omega, double c, double v) {
  require(omega > 0.0 && c > 0.0, ErrorKind::InvalidParameter, "instantaneous linear measure requires omega, c > 0");
  require(v > c, ErrorKind::InvalidParameter, "linear potential requires v > c");
  const double v2c2 = v * v - c * c;
  const double zeta = -2 * c * omega / v2c2;
  std::vector<double> atoms = {0.0, c / (c + v), c * v / ((c + v) * (c + v))};
  ExponentialMixtureMeasure::Term t{1.0, zeta,
                                    {c * omega / (2 * v2c2), c * omega / ((c + v) * (c + v)),
                                     c * (v - c) * omega / (2 * (c + v) * (c + v) * (c + v))}};
  nlohmann::json params = {{"omega", num17(omega)}, {"c", num17(c)}, {"v", num17(v)}};
  return ExponentialMixtureMeasure("instantaneous-linear", instantaneousChain(omega), "instantaneous", params, atoms,
                                   {t});
}

// ---------------------------------------------------------------------------
// Finite linear process

double PolynomialPair::evalP2(double x) const { return (p2[2] * x + p2[1]) * x + p2[0]; }
double PolynomialPair::evalP3(double x) const { return ((p3[3] * x + p3[2]) * x + p3[1]) * x + p3[0]; }

PolynomialPair p2p3(double alpha, double beta, double c, double v) {
  require(alpha > 0.0 && beta > 0.0 && c > 0.0, ErrorKind::InvalidParameter, "alpha, beta, c must be > 0");
  require(v > c, ErrorKind::InvalidParameter, "linear potential requires v > c");
  using R = long double;
  const R a = alpha, b = beta, C = c, V = v;
  PolynomialPair pp;
  // v^2 - c^2 and 4c^2 - v^2 are factored to avoid cancellation near v = c and v = 2c.
  pp.p2l = {-a * (a + b) * C, (2 * a + b) * C * C - b * V * V, C * (V - C) * (V + C)};
  pp.p3l = {-(2 * a * a * a + 3 * a * a * b + a * b * b), 2 * C * (5 * a * a + 5 * a * b + b * b),
            2 * (a * V * V - (8 * a + 4 * b) * C * C), 2 * C * (2 * C - V) * (2 * C + V)};
  for (int i = 0; i < 3; ++i) pp.p2[i] = static_cast<double>(pp.p2l[i]);
  for (int i = 0; i < 4; ++i) pp.p3[i] = static_cast<double>(pp.p3l[i]);
  return pp;
}

namespace {

using Real = long double;

Real evalP2L(const std::array<Real, 3>& p, Real x) { return (p[2] * x + p[1]) * x + p[0]; }
Real evalP3L(const std::array<Real, 4>& p, Real x) { return ((p[3] * x + p[2]) * x + p[1]) * x + p[0]; }

}  // namespace

double PolynomialPair::zeta2() const {
  // Stable quadratic formula; A > 0 and C < 0 give one root of each sign.
  const Real A = p2l[2], B = p2l[1], C = p2l[0];
  const Real disc = std::sqrt(B * B - 4 * A * C);
  const Real q = -0.5L * (B + (B < 0 ? -disc : disc));
  Real x = std::min(q / A, C / q);
  const Real d = 2 * A * x + B;
  if (d != 0) x -= evalP2L(p2l, x) / d;
  return static_cast<double>(x);
}

std::optional<double> PolynomialPair::zeta3() const {
  // A negative root exists iff the cubic coefficient is negative (v > 2c).
  if (!(p3l[3] < 0)) return std::nullopt;
  Real bound = 0.0;
  for (int i = 0; i < 3; ++i) bound = std::max(bound, std::fabs(p3l[i] / p3l[3]));
  Real lo = -(1 + bound), hi = 0;  // P3(lo) > 0, P3(0) < 0
  for (int it = 0; it < 200 && hi - lo > 1e-19L * std::fabs(lo); ++it) {
    const Real mid = 0.5L * (lo + hi);
    if (evalP3L(p3l, mid) > 0) lo = mid;
    else hi = mid;
  }
  Real x = 0.5L * (lo + hi);
  for (int it = 0; it < 2; ++it) {
    const Real d = (3 * p3l[3] * x + 2 * p3l[2]) * x + p3l[1];
    if (d == 0) break;
    const Real xn = x - evalP3L(p3l, x) / d;
    if (xn < lo || xn > hi) break;
    x = xn;
  }
  return static_cast<double>(x);
}

namespace {

Real eigenN(Real z, Real a, Real b, Real c, Real v) {
  return 4 * c * c * z * z - 6 * c * v * z * z + 2 * v * v * z * z - 6 * a * c * z - 2 * b * c * z + 4 * a * v * z +
         2 * b * v * z + 2 * a * a + a * b;
}

Real eigenD(Real z, Real a, Real b, Real c, Real v) {
  return 4 * c * c * z * z + 6 * c * v * z * z + 2 * v * v * z * z - 6 * a * c * z - 2 * b * c * z - 4 * a * v * z -
         2 * b * v * z + 2 * a * a + a * b;
}

// Evaluated in extended precision: the formula cancels badly near v = c and v = 2c.
std::array<Real, 6> eigenvectorL(Real z, Real a, Real b, Real c, Real v) {
  const Real N = eigenN(z, a, b, c, v);
  const Real D = eigenD(z, a, b, c, v);
  require(D != 0, ErrorKind::Numeric, "eigenvector denominator vanishes");
  const Real rho = N / D;
  const Real k = 3 * c * z - 2 * a - b;
  return {-k * a * a * b * b,
          4 * k * (c * z - v * z - a) * a * a * b,
          -2 * N * (c * z - b) * a * b,
          -4 * N * (c * z - a) * a * a,
          4 * rho * k * (c * z + v * z - a) * a * a * b,
          -rho * k * a * a * b * b};
}

}  // namespace

double eigenvectorRhoDenominator(double z, double a, double b, double c, double v) {
  return static_cast<double>(eigenD(z, a, b, c, v));
}

std::array<double, 6> eigenvectorA(double z, double a, double b, double c, double v) {
  const auto l = eigenvectorL(z, a, b, c, v);
  std::array<double, 6> out;
  for (int i = 0; i < 6; ++i) out[i] = static_cast<double>(l[i]);
  return out;
}

double eigenvectorResidual(double zeta, const std::array<double, 6>& a, double alpha, double beta, double c,
                           double v) {
  const auto Q = finiteChain(alpha, beta).Q();
  const Real V[6] = {2 * Real(v) - 2 * c, Real(v) - 2 * c, -2 * Real(c), -2 * Real(c), -Real(v) - 2 * c,
                     -2 * Real(v) - 2 * c};
  Real worst = 0, norm = 0;
  for (int s = 0; s < 6; ++s) {
    Real r = -Real(zeta) * V[s] * a[s];
    for (int j = 0; j < 6; ++j) r += Real(Q(j, s)) * a[j];
    worst = std::max(worst, std::fabs(r));
    norm = std::max(norm, std::fabs(Real(a[s])));
  }
  return static_cast<double>(worst / norm);
}

ExponentialMixtureMeasure finiteLinearInvariant(double alpha, double beta, double c, double v) {
  const auto pp = p2p3(alpha, beta, c, v);
  const double a = alpha, b = beta;
  const double s2 = (a + b) * (a + b);
  const auto chain = finiteChain(a, b);
  const auto piQ = stationaryLawClosedForm(chain);
  const double z2 = pp.zeta2();
  const auto a2 = eigenvectorA(z2, a, b, c, v);
  std::vector<ExponentialMixtureMeasure::Term> terms;
  std::string regime;
  if (v <= 2 * c) {
    regime = "finite v<=2c";
    const double c2 = -z2 / (4 * (-3 * c * z2 + 2 * a + b) * s2 * a * a);
    terms.push_back({c2, z2, {a2.begin(), a2.end()}});
  } else {
    regime = "finite v>2c";
    const double z3 = *pp.zeta3();
    const auto a3 = eigenvectorA(z3, a, b, c, v);
    const double c2 = -z2 * z3 / (4 * a * a * s2 * (3 * c * z2 - 2 * a - b) * (z2 - z3));
    const double c3 = z2 * z3 / (4 * a * a * s2 * (3 * c * z3 - 2 * a - b) * (z2 - z3));
    terms.push_back({c2, z2, {a2.begin(), a2.end()}});
    terms.push_back({c3, z3, {a3.begin(), a3.end()}});
  }
  std::vector<double> atoms(6);
  for (int i = 0; i < 6; ++i) {
    double d = piQ(i);
    for (const auto& t : terms) d += t.weight * t.a[i] / t.zeta;
    atoms[i] = d;
  }
  // Atoms that vanish analytically are set to exact zero after a consistency check.
  std::vector<int> zeroAtoms = {0};
  if (v > 2 * c) zeroAtoms.push_back(1);
  for (int i : zeroAtoms) {
    require(std::fabs(atoms[i]) <= 1e-12, ErrorKind::Verification,
            describe("boundary atom expected to vanish but is", atoms[i]));
    atoms[i] = 0.0;
  }
  for (double d : atoms)
    require(d >= -1e-14, ErrorKind::Verification, describe("negative boundary atom", d));
  for (double& d : atoms) d = std::max(0.0, d);
  nlohmann::json params = {{"alpha", num17(alpha)}, {"beta", num17(beta)}, {"c", num17(c)}, {"v", num17(v)}};
  return ExponentialMixtureMeasure("finite-linear", chain, regime, params, atoms, terms);
}

// ---------------------------------------------------------------------------
// Instantaneous harmonic process

bool harmonicPoleGuard(double b, double eps) {
  if (b == 1.0) return false;
  if (std::fabs(b - 0.5) < eps) return true;
  const double k = std::round((b - 1.0) / 2.0);
  return std::fabs(b - (2 * k + 1)) < eps;
}

namespace {

// Regularized 2F1 at argument z^2 with w = 1 - z^2 supplied for accuracy.
double reg2f1Sq(double a, double b, double c, double z2, double w) {
  if (z2 <= 0.5) return sf::hyp2f1Reg(a, b, c, z2);
  return sf::hyp2f1RegOneMinus(a, b, c, w);
}

struct Shapes {
  double p, q;
};

// Unnormalized P and Q of the bulk solution in z = mu x / v.
Shapes harmonicShapes(double b, double z, double oneMinusZ) {
  const double z2 = z * z;
  const double w = oneMinusZ * (1.0 + z);
  const double p = reg2f1Sq(1.5 - b, 1 - b / 2, (3 - b) / 2, z2, w) -
                   std::tgamma(b - 0.5) * std::pow(z, b - 1) * reg2f1Sq(0.5, 1 - b / 2, (b + 1) / 2, z2, w) / kSqrtPi;
  const double q = (2 * reg2f1Sq(0.5 - b, 1 - b / 2, (1 - b) / 2, z2, w) +
                    std::tgamma(b + 0.5) * std::pow(z, b + 1) * reg2f1Sq(1 - b / 2, 1.5, (b + 3) / 2, z2, w) / kSqrtPi) /
                   (1 - 2 * b);
  return {p, q};
}

double modeShape(const Shapes& s, double z, int mode) {
  switch (mode) {
    case 0: return 0.5 * (s.q + z * s.p);
    case 1: return s.p - s.q;
    default: return 0.5 * (s.q - z * s.p);
  }
}

// K(1 - z^2), with the logarithmic limit once z^2 underflows.
double kComplementSq(double z) {
  const double m1 = z * z;
  if (m1 < 1e-300) return std::log(4.0) - std::log(z);
  return sf::ellipticKComplement(m1);
}

// Symmetric extrapolation step for the b = 1 per-mode densities.
constexpr double kNeighbourStep = 1e-3;

}  // namespace

HarmonicInvariant::HarmonicInvariant(double omega, double mu, double v)
    : omega_(omega), mu_(mu), v_(v), chain_(instantaneousChain(omega)) {
  require(mu > 0.0 && std::isfinite(mu), ErrorKind::InvalidParameter, "harmonic potential requires mu > 0");
  require(v > 0.0 && std::isfinite(v), ErrorKind::InvalidParameter, "propulsion speed requires v > 0");
  b_ = omega / mu;
  if (harmonicPoleGuard(b_))
    fail(ErrorKind::PoleGuard,
         describe("b = omega/mu lies within 1e-6 of a pole of the closed form (1/2 or an odd integer); b", b_));
  const double L = v_ / mu_;
  if (b_ == 1.0) {
    d0Closed_ = 8.0 / (8.0 + M_PI * M_PI);
    atomZero_ = atomMinus2_ = 0.5 * d0Closed_;
    cClosed_ = 4.0 * mu_ / (v_ * (8.0 + M_PI * M_PI));
    for (double s : {kNeighbourStep, -kNeighbourStep, 2 * kNeighbourStep, -2 * kNeighbourStep})
      neighbours_.push_back(std::make_unique<HarmonicInvariant>((1.0 + s) * mu_, mu_, v_));
    setupEnvelope();
    return;
  }
  const double b = b_;
  for (int m = 0; m < 3; ++m)
    integrals_[m] = integrateZ([&](double z, double zc) { return modeShape(harmonicShapes(b, z, zc), z, m); }, 0.0, 1.0);
  c1_ = 0.25 / (L * integrals_[0]);
  atomZero_ = 0.5 - c1_ * L * integrals_[1];
  atomMinus2_ = 0.25 - c1_ * L * integrals_[2];

  const double ga = std::tgamma((b + 3) / 2);
  const double f1 = sf::reg3f2At1({0.5, 0.5 - b, 1 - b / 2}, {1.5, 0.5 - b / 2}).value;
  const double f2 = sf::reg3f2At1({1.5, 1 - b / 2, (b + 2) / 2}, {(b + 3) / 2, (b + 4) / 2}).value;
  const double D = std::pow(8.0, b) * (b - 1) * (std::pow(M_PI, 1.5) * b * (b + 1) / std::cos(M_PI * b / 2) * f1 + 4 * ga) -
                   kSqrtPi * b * (b + 1) * std::tgamma(1.5 - b / 2) * std::tgamma(2 * b + 1) * f2;
  d0Closed_ = std::pow(2.0, 3 * b + 2) * (b - 1) * ga / D;
  const double g1 = sf::reg3f2At1({0.5, 1.5 - b, 1 - b / 2}, {1.5, 1.5 - b / 2}).value;
  const double g2 = sf::reg3f2At1({0.5, 1 - b / 2, b / 2}, {(b + 1) / 2, (b + 2) / 2}).value;
  cClosed_ = 2 * kSqrtPi * (1 - d0Closed_) * (mu_ / v_) / (M_PI * g1 - std::tgamma(b - 0.5) * std::tgamma(b / 2) * g2);

  require(std::fabs(d0Closed_ - d0()) <= 1e-8, ErrorKind::Verification,
          describe("closed-form atom disagrees with the marginal-weight solution; difference", d0Closed_ - d0()));
  require(atomZero_ >= -1e-12 && atomMinus2_ >= -1e-12, ErrorKind::Verification, "negative harmonic boundary atom");
  setupEnvelope();
}

HarmonicInvariant::~HarmonicInvariant() = default;

double HarmonicInvariant::integrateZ(const std::function<double(double, double)>& f, double z0, double z1) const {
  boost::math::quadrature::tanh_sinh<double> ts;
  auto g = [&](double z, double xc) {
    // xc is the signed distance to the nearer endpoint.
    const double oneMinus = xc > 0.0 ? (1.0 - z1) + xc : 1.0 - z;
    return f(z, oneMinus);
  };
  double err = 0.0;
  const double val = ts.integrate(g, z0, z1, 1e-13, &err);
  return val;
}

double HarmonicInvariant::pShape(double z) const {
  require(b_ != 1.0, ErrorKind::Domain, "p(x) is not defined for b = 1");
  return harmonicShapes(b_, z, 1.0 - z).p;
}

double HarmonicInvariant::densityZ(double z, double oneMinusZ, int mode) const {
  if (z <= 0.0 || oneMinusZ <= 0.0) return 0.0;
  if (b_ == 1.0) {
    double g[2];
    for (int k = 0; k < 2; ++k)
      g[k] = 0.5 * (neighbours_[2 * k]->densityZ(z, oneMinusZ, mode) + neighbours_[2 * k + 1]->densityZ(z, oneMinusZ, mode));
    return (4 * g[0] - g[1]) / 3;
  }
  return c1_ * modeShape(harmonicShapes(b_, z, oneMinusZ), z, mode);
}

double HarmonicInvariant::densityXZ(double z, double oneMinusZ) const {
  if (z <= 0.0 || oneMinusZ <= 0.0) return 0.0;
  if (b_ == 1.0) return cClosed_ * kComplementSq(z);
  return c1_ * harmonicShapes(b_, z, oneMinusZ).p;
}

double HarmonicInvariant::atom(int mode) const {
  switch (mode) {
    case 1: return atomZero_;
    case 2: return atomMinus2_;
    default: return 0.0;
  }
}

double HarmonicInvariant::density(double x, int mode) const {
  const double z = mu_ * x / v_;
  return densityZ(z, 1.0 - z, mode);
}

double HarmonicInvariant::densityXClosedForm(double x) const {
  const double z = mu_ * x / v_;
  if (z <= 0.0 || z >= 1.0) return 0.0;
  if (b_ == 1.0) return cClosed_ * kComplementSq(z);
  return cClosed_ * harmonicShapes(b_, z, 1.0 - z).p;
}

double HarmonicInvariant::binMass(double x0, double x1, int mode) const {
  const double L = v_ / mu_;
  const double z0 = std::clamp(x0 / L, 0.0, 1.0), z1 = std::clamp(x1 / L, 0.0, 1.0);
  if (!(z1 > z0)) return 0.0;
  return L * integrateZ([&](double z, double zc) { return densityZ(z, zc, mode); }, z0, z1);
}

double HarmonicInvariant::tail(double x) const {
  const double L = v_ / mu_;
  if (x < 0.0) return 1.0;
  if (x >= L) return 0.0;
  return L * integrateZ([&](double z, double zc) { return densityXZ(z, zc); }, x / L, 1.0);
}

double HarmonicInvariant::continuousMass(int mode) const {
  const double piQ = mode == 1 ? 0.5 : 0.25;
  return piQ - atom(mode);
}

double HarmonicInvariant::moment(double p) const {
  require(p >= 0.0, ErrorKind::InvalidParameter, "moment order must be >= 0");
  const double L = v_ / mu_;
  const double atoms = p == 0.0 ? d0() : 0.0;
  return atoms + std::pow(L, p + 1) * integrateZ([&](double z, double zc) { return std::pow(z, p) * densityXZ(z, zc); }, 0.0, 1.0);
}

double HarmonicInvariant::tailRate() const { return kInf; }

double HarmonicInvariant::integrateContinuous(const std::function<double(double, int)>& g, double* errorEstimate) const {
  const double L = v_ / mu_;
  boost::math::quadrature::tanh_sinh<double> ts;
  auto f = [&](double z, double xc) {
    const double oneMinus = xc > 0.0 ? xc : 1.0 - z;
    double s = 0.0;
    for (int m = 0; m < 3; ++m) {
      const double d = densityZ(z, oneMinus, m);
      if (d != 0.0) s += g(L * z, m) * d;
    }
    return s;
  };
  double err = 0.0;
  const double val = L * ts.integrate(f, 0.0, 1.0, 1e-12, &err);
  if (errorEstimate) *errorEstimate = L * err;
  return val;
}

std::array<double, 3> HarmonicInvariant::marginalEquationResiduals() const {
  const double L = v_ / mu_;
  std::array<double, 3> r{};
  const double target[3] = {0.25, 0.5, 0.25};
  for (int m = 0; m < 3; ++m) {
    const double mass = L * integrateZ([&](double z, double zc) { return densityZ(z, zc, m); }, 0.0, 1.0);
    r[m] = atom(m) + mass - target[m];
  }
  return r;
}

void HarmonicInvariant::setupEnvelope() {
  // Beta(a, a) envelope in z; a below both endpoint exponents.
  envelopeShape_ = 0.9 * std::min(b_, 1.0);
  const double a = envelopeShape_;
  const double cont = 1.0 - d0();
  double m = 0.0;
  auto ratio = [&](double z, double zc) {
    const double pdf = boost::math::ibeta_derivative(a, a, z);
    return densityXZ(z, zc) * (v_ / mu_) / cont / pdf;
  };
  for (int k = 0; k <= 2000; ++k) {
    const double z = (k + 0.5) / 2001.0;
    m = std::max(m, ratio(z, 1.0 - z));
  }
  for (int e = 1; e <= 14; ++e) {
    const double h = std::pow(10.0, -e);
    m = std::max(m, ratio(h, 1.0 - h));
    m = std::max(m, ratio(1.0 - h, h));
  }
  envelopeBound_ = 1.5 * m;
}

State HarmonicInvariant::sample(RngStream& rng) const {
  double u = rng.uniform();
  if (u < atomZero_) return {0.0, 1};
  if (u < atomZero_ + atomMinus2_) return {0.0, 2};
  const double L = v_ / mu_;
  const double a = envelopeShape_;
  const double cont = 1.0 - d0();
  for (int tries = 0; tries < 100000; ++tries) {
    const double z = rng.beta(a, a);
    if (!(z > 0.0 && z < 1.0)) continue;
    const double pdf = boost::math::ibeta_derivative(a, a, z);
    const double target = densityXZ(z, 1.0 - z) * L / cont;
    if (target > envelopeBound_ * pdf)
      fail(ErrorKind::Numeric, describe("rejection envelope violated at z", z));
    if (rng.uniform() * envelopeBound_ * pdf < target) {
      double w[3], tot = 0.0;
      for (int m = 0; m < 3; ++m) tot += w[m] = std::max(0.0, densityZ(z, 1.0 - z, m));
      double r = rng.uniform() * tot;
      int mode = 2;
      for (int m = 0; m < 3; ++m) {
        if (r < w[m]) {
          mode = m;
          break;
        }
        r -= w[m];
      }
      return {L * z, mode};
    }
  }
  fail(ErrorKind::NonConvergence, "harmonic rejection sampler exceeded the trial cap");
}

nlohmann::json HarmonicInvariant::toJson() const {
  nlohmann::json j;
  j["process"] = processName();
  j["params"] = {{"omega", num17(omega_)}, {"mu", num17(mu_)}, {"v", num17(v_)}};
  j["b"] = num17(b_);
  j["d0"] = num17(d0());
  j["d0_closed_form"] = num17(d0Closed_);
  j["atoms"] = {num17(atom(0)), num17(atom(1)), num17(atom(2))};
  j["modes"] = {"+2", "0", "-2"};
  if (b_ != 1.0) {
    j["C"] = num17(cClosed_);
    j["C1"] = num17(c1_);
  }
  nlohmann::json grid = nlohmann::json::array();
  const double L = v_ / mu_;
  for (int k = 1; k < 200; ++k) {
    const double x = L * k / 200.0;
    grid.push_back({num17(x), num17(density(x, 0)), num17(density(x, 1)), num17(density(x, 2)), num17(densityX(x))});
  }
  j["density_table_columns"] = {"x", "+2", "0", "-2", "marginal"};
  j["density_table"] = grid;
  return j;
}

// ---------------------------------------------------------------------------

std::unique_ptr<MixedMeasure> invariantFor(const ProcessSpec& spec) {
  const auto& ch = spec.chain;
  if (spec.potential.isLinear()) {
    if (ch.mechanism() == Mechanism::Instantaneous)
      return std::make_unique<ExponentialMixtureMeasure>(instantaneousLinearInvariant(ch.omega(), spec.c(), spec.v));
    return std::make_unique<ExponentialMixtureMeasure>(finiteLinearInvariant(ch.alpha(), ch.beta(), spec.c(), spec.v));
  }
  if (ch.mechanism() == Mechanism::Instantaneous)
    return std::make_unique<HarmonicInvariant>(ch.omega(), spec.mu(), spec.v);
  fail(ErrorKind::InvalidParameter, "no closed-form invariant measure for the finite harmonic process");
}

ExponentialMixtureMeasure mixtureFromJson(const nlohmann::json& j) {
  try {
    const std::string process = j.at("process").get<std::string>();
    const auto& p = j.at("params");
    VelocityChain chain;
    if (process == "instantaneous-linear") chain = instantaneousChain(parseNumber(p.at("omega")));
    else if (process == "finite-linear") chain = finiteChain(parseNumber(p.at("alpha")), parseNumber(p.at("beta")));
    else fail(ErrorKind::Config, "measure file has unsupported process '" + process + "'");
    std::vector<double> atoms;
    for (const auto& a : j.at("atoms")) atoms.push_back(parseNumber(a));
    std::vector<ExponentialMixtureMeasure::Term> terms;
    for (const auto& t : j.at("terms")) {
      ExponentialMixtureMeasure::Term term{parseNumber(t.at("c")), parseNumber(t.at("zeta")), {}};
      for (const auto& a : t.at("a")) term.a.push_back(parseNumber(a));
      terms.push_back(term);
    }
    return ExponentialMixtureMeasure(process, chain, j.value("regime", std::string("imported")), p, atoms, terms);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, std::string("malformed measure file: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Stationarity oracle

ResidualResult generatorResidual(const MixedMeasure& measure, const ProcessSpec& spec, const TestFunction& tf) {
  require(measure.numModes() == spec.chain.size(), ErrorKind::InvalidParameter, "measure and process disagree");
  const auto& Q = spec.chain.Q();
  const int n = spec.chain.size();
  auto Lf = [&](double x, int s) {
    double r = 0.0;
    const double dr = drift(spec, s, x);
    if (x > 0.0 || dr >= 0.0) r += dr * tf.df(x, s);
    for (int j = 0; j < n; ++j)
      if (Q(s, j) != 0.0) r += Q(s, j) * tf.f(x, j);
    return r;
  };
  double atoms = 0.0;
  for (int s = 0; s < n; ++s)
    if (measure.atom(s) != 0.0) atoms += measure.atom(s) * Lf(0.0, s);
  double err = 0.0;
  const double bulk = measure.integrateContinuous(Lf, &err);
  return {atoms + bulk, err};
}

std::vector<TestFunction> standardTestFamily(int numModes, double scale) {
  struct Shape {
    const char* name;
    std::function<double(double)> g, dg;
  };
  const std::vector<Shape> shapes = {
      {"exp", [](double s) { return std::exp(-s); }, [](double s) { return -std::exp(-s); }},
      {"xexp", [](double s) { return s * std::exp(-s); }, [](double s) { return (1 - s) * std::exp(-s); }},
      {"rational", [](double s) { return 1 / ((1 + s) * (1 + s)); }, [](double s) { return -2 / ((1 + s) * (1 + s) * (1 + s)); }},
      {"sinexp", [](double s) { return std::sin(s) * std::exp(-s / 2); },
       [](double s) { return (std::cos(s) - 0.5 * std::sin(s)) * std::exp(-s / 2); }},
      {"cosrational", [](double s) { return std::cos(2 * s) / (1 + s); },
       [](double s) { return -2 * std::sin(2 * s) / (1 + s) - std::cos(2 * s) / ((1 + s) * (1 + s)); }},
  };
  std::vector<std::pair<const char*, std::vector<double>>> weights;
  std::vector<double> ones(numModes, 1.0), alt(numModes), ramp(numModes), mid(numModes, 0.0);
  for (int i = 0; i < numModes; ++i) {
    alt[i] = i % 2 == 0 ? 1.0 : -1.0;
    ramp[i] = (i + 1.0) / numModes;
  }
  mid[numModes / 2] = 1.0;
  weights = {{"ones", ones}, {"alternating", alt}, {"ramp", ramp}, {"middle", mid}};
  std::vector<TestFunction> out;
  for (const auto& sh : shapes) {
    for (const auto& [wn, w] : weights) {
      auto g = sh.g;
      auto dg = sh.dg;
      out.push_back({std::string(sh.name) + "/" + wn, [g, w, scale](double x, int s) { return w[s] * g(x / scale); },
                     [dg, w, scale](double x, int s) { return w[s] * dg(x / scale) / scale; }});
    }
  }
  return out;
}

double measureScale(const MixedMeasure& measure) {
  const double r = measure.tailRate();
  if (std::isfinite(r)) return 1.0 / r;
  return 0.5 * measure.supportMax();
}

}  // namespace rtp
