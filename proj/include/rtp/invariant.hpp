#pragma once

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rtp/dynamics.hpp"

namespace rtp {

// Invariant probability on [0, inf) x Sigma: atoms at (0, sigma) plus a
// density per mode on (0, supportMax()).
class MixedMeasure : public StateSampler {
 public:
  virtual std::string processName() const = 0;
  virtual const VelocityChain& chain() const = 0;
  int numModes() const { return chain().size(); }

  virtual double atom(int mode) const = 0;
  double totalAtom() const;
  // Per-mode density at x > 0.
  virtual double density(double x, int mode) const = 0;
  double densityX(double x) const;
  // Mass of (x0, x1] x {mode}, 0 <= x0 <= x1.
  virtual double binMass(double x0, double x1, int mode) const = 0;
  // pi({x' > x}) summed over modes.
  virtual double tail(double x) const = 0;
  double cdfX(double x) const { return 1.0 - tail(x); }
  // Continuous mass of a mode, int_0^inf density(x, mode) dx.
  virtual double continuousMass(int mode) const = 0;
  double modeMass(int mode) const { return atom(mode) + continuousMass(mode); }
  virtual double supportMax() const = 0;
  // int x^p dpi(x, sigma) summed over modes, p >= 0.
  virtual double moment(double p) const = 0;
  // Exponential tail rate; +inf for compact support.
  virtual double tailRate() const = 0;
  virtual nlohmann::json toJson() const = 0;
  // sum_sigma int_0^inf g(x, sigma) density(x, sigma) dx by adaptive quadrature.
  virtual double integrateContinuous(const std::function<double(double, int)>& g, double* errorEstimate = nullptr) const = 0;
};

// Exponential mixture pi = sum_sigma (d_sigma delta_0 + sum_i c_i a_sigma(zeta_i) e^{zeta_i x} dx) x delta_sigma.
class ExponentialMixtureMeasure : public MixedMeasure {
 public:
  struct Term {
    double weight;
    double zeta;
    std::vector<double> a;
  };

  ExponentialMixtureMeasure(std::string process, VelocityChain chain, std::string regime, nlohmann::json params,
                            std::vector<double> atoms, std::vector<Term> terms);

  std::string processName() const override { return process_; }
  const VelocityChain& chain() const override { return chain_; }
  const std::string& regime() const { return regime_; }
  const nlohmann::json& params() const { return params_; }
  const std::vector<Term>& terms() const { return terms_; }
  const std::vector<double>& atoms() const { return atoms_; }

  double atom(int mode) const override { return atoms_[mode]; }
  double density(double x, int mode) const override;
  double densityDerivative(double x, int mode) const;
  double binMass(double x0, double x1, int mode) const override;
  double tail(double x) const override;
  double tailMode(double x, int mode) const;
  double continuousMass(int mode) const override;
  double supportMax() const override;
  double moment(double p) const override;
  double tailRate() const override;
  // int e^{k x} dpi_sigma including the atom; +inf when k >= tailRate.
  double expIntegral(double k, int mode) const;
  double integrateContinuous(const std::function<double(double, int)>& g, double* errorEstimate = nullptr) const override;
  // Inverse CDF of the x-marginal (bisection to 1e-12).
  double xQuantile(double u) const;
  State sample(RngStream& rng) const override;
  nlohmann::json toJson() const override;

  // Copy with the atom at `mode` increased by delta and everything rescaled to mass 1.
  ExponentialMixtureMeasure perturbedAtom(int mode, double delta) const;

  struct Diagnostics {
    double massError;        // |total mass - 1|
    double minDensity;       // min per-mode density on a 1000-point grid
    double marginalError;    // max_sigma |mode mass - pi_Q(sigma)|
  };
  Diagnostics diagnostics() const;

 private:
  std::string process_;
  VelocityChain chain_;
  std::string regime_;
  nlohmann::json params_;
  std::vector<double> atoms_;
  std::vector<Term> terms_;
  std::vector<double> cumAtoms_;     // cumulative atom probabilities
  std::vector<double> modeContMass_; // continuous mass per mode
};

ExponentialMixtureMeasure instantaneousLinearInvariant(double omega, double c, double v);

struct PolynomialPair {
  std::array<double, 3> p2;  // ascending coefficients of P2
  std::array<double, 4> p3;  // ascending coefficients of P3
  // Extended-precision copies used for root finding.
  std::array<long double, 3> p2l{};
  std::array<long double, 4> p3l{};
  double evalP2(double x) const;
  double evalP3(double x) const;
  // zeta2 < 0 (always) and zeta3 < 0 (present iff v > 2c).
  double zeta2() const;
  std::optional<double> zeta3() const;
};

PolynomialPair p2p3(double alpha, double beta, double c, double v);
// Kernel vector a(zeta) of -zeta V + Q^T over the six finite modes.
std::array<double, 6> eigenvectorA(double zeta, double alpha, double beta, double c, double v);
// Denominator of rho(zeta) in the eigenvector formula.
double eigenvectorRhoDenominator(double zeta, double alpha, double beta, double c, double v);
// ||(-zeta V + Q^T) a||_inf / ||a||_inf.
double eigenvectorResidual(double zeta, const std::array<double, 6>& a, double alpha, double beta, double c,
                           double v);
ExponentialMixtureMeasure finiteLinearInvariant(double alpha, double beta, double c, double v);

// Instantaneous harmonic invariant measure, support [0, v/mu].
class HarmonicInvariant : public MixedMeasure {
 public:
  HarmonicInvariant(double omega, double mu, double v);
  ~HarmonicInvariant() override;
  HarmonicInvariant(const HarmonicInvariant&) = delete;
  HarmonicInvariant& operator=(const HarmonicInvariant&) = delete;

  std::string processName() const override { return "instantaneous-harmonic"; }
  const VelocityChain& chain() const override { return chain_; }
  double b() const { return b_; }
  double omega() const { return omega_; }
  double mu() const { return mu_; }
  double v() const { return v_; }

  // Atom of the x-marginal: pi({0} x Sigma).
  double d0() const { return atomZero_ + atomMinus2_; }
  // Closed-form x-marginal atom (3F2 expression for b != 1, 8/(8+pi^2) for b = 1).
  double d0ClosedForm() const { return d0Closed_; }
  // Closed-form normalization C of the x-marginal density C p(x) (b != 1).
  double cClosedForm() const { return cClosed_; }
  // Constants of the per-mode reconstruction (b != 1).
  double c1() const { return c1_; }
  double c2() const { return atomZero_; }
  double c3() const { return atomMinus2_; }
  // Unnormalized p(z), z = mu x / v (b != 1), as in C p(x).
  double pShape(double z) const;

  double atom(int mode) const override;
  double density(double x, int mode) const override;
  // Density of the x-marginal from the closed form (C p, or the K expression at b = 1).
  double densityXClosedForm(double x) const;
  double binMass(double x0, double x1, int mode) const override;
  double tail(double x) const override;
  double continuousMass(int mode) const override;
  double supportMax() const override { return v_ / mu_; }
  double moment(double p) const override;
  double tailRate() const override;
  State sample(RngStream& rng) const override;
  nlohmann::json toJson() const override;
  double integrateContinuous(const std::function<double(double, int)>& g, double* errorEstimate = nullptr) const override;

  // Residuals of the three marginal-weight equations after solving.
  std::array<double, 3> marginalEquationResiduals() const;

 private:
  // Per-mode density in the scaled variable z, given 1 - z for accuracy.
  double densityZ(double z, double oneMinusZ, int mode) const;
  double densityXZ(double z, double oneMinusZ) const;
  double integrateZ(const std::function<double(double, double)>& f, double z0, double z1) const;
  void setupEnvelope();

  double omega_, mu_, v_, b_;
  VelocityChain chain_;
  double c1_ = 0.0, atomZero_ = 0.0, atomMinus2_ = 0.0;
  double d0Closed_ = 0.0, cClosed_ = 0.0;
  std::array<double, 3> integrals_{};  // int_0^1 of the three unnormalized per-mode shapes
  // b = 1: per-mode densities from symmetric extrapolation in b.
  std::vector<std::unique_ptr<HarmonicInvariant>> neighbours_;
  double envelopeShape_ = 1.0, envelopeBound_ = 1.0;
};

// Pole set of the b != 1 closed form: b near 1/2 or an odd integer other than 1.
bool harmonicPoleGuard(double b, double eps = 1e-6);

std::unique_ptr<MixedMeasure> invariantFor(const ProcessSpec& spec);
// Rebuild a mixture measure from its JSON export.
ExponentialMixtureMeasure mixtureFromJson(const nlohmann::json& j);

// Test function f(x, sigma) with its x-derivative.
struct TestFunction {
  std::string name;
  std::function<double(double, int)> f;
  std::function<double(double, int)> df;
};

struct ResidualResult {
  double value;
  double errorEstimate;
};

// int L f dpi, with L the generator of the process.
ResidualResult generatorResidual(const MixedMeasure& measure, const ProcessSpec& spec, const TestFunction& f);
// Five shapes times four mode-weight vectors, scaled to the length `scale`.
std::vector<TestFunction> standardTestFamily(int numModes, double scale);
// Natural length scale of a measure: 1/tailRate or the support length.
double measureScale(const MixedMeasure& measure);

}  // namespace rtp
