#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>

#include <json.hpp>

#include "rtp/dynamics.hpp"
#include "rtp/invariant.hpp"

namespace rtp {

// Large-deviation data of the velocity chain: S = diag(pi_Q), normalized velocities sigma/2, Q.
struct ChernoffProblem {
  Eigen::VectorXd s;
  Eigen::VectorXd vt;
  Eigen::MatrixXd Q;
};

ChernoffProblem chernoffProblem(const VelocityChain& chain);
// Top eigenvalue of the S-symmetrized Q + u diag(vt); optional derivative by Hellmann-Feynman.
double chernoffLambda(const ChernoffProblem& p, double u, double* derivative = nullptr);
double instantaneousChernoffClosedForm(double omega, double u);

// Legendre transform I(R) = sup_u uR - Lambda(u) on R in [-1, 1].
class RateFunction {
 public:
  // numeric = true skips the instantaneous closed form (cross-checks).
  explicit RateFunction(const VelocityChain& chain, bool numeric = false);
  double Lambda(double u) const { return chernoffLambda(problem_, u); }
  double I(double R) const { return evaluate(R).value; }
  struct Value {
    double value;
    double maximizer;  // u attaining the sup (+-inf at |R| = 1)
  };
  Value evaluate(double R) const;
  // I'(R): closed form for the instantaneous chain, the maximizing u otherwise.
  double derivative(double R) const;
  bool closedForm() const { return closedForm_; }
  const ChernoffProblem& problem() const { return problem_; }

 private:
  ChernoffProblem problem_;
  bool closedForm_ = false;
  double omega_ = 0.0;
};

// (3 - sqrt 5)/4 min(alpha R, alpha (1 + alpha/beta) R^2).
double lezaudBound(double alpha, double beta, double R);

// E[e^{lambda tau_0}] upper bound from the large-deviation estimate.
double lyapunovBound(const ProcessSpec& spec, double x, int mode, double lambda);
struct TvUpperCurve {
  double fbar;      // Lyapunov bound at the initial state
  double piFbar;    // integral of the bound against the invariant measure
  double cBound;    // upper bound on max_sigma L f(0, sigma)
  double rate;      // lambda_Q lambda / (lambda_Q + lambda)
  double at(double t) const { return (fbar + 2.0 + piFbar + 2.0 * t * cBound) * std::exp(-rate * t); }
};
TvUpperCurve tvUpperCurve(const ProcessSpec& spec, double x, int mode, double lambda);

// Hitting exponent lim (1/L) log E[e^{u tau_L}] for the instantaneous linear process, u < 0.
double hittingLambda(double omega, double c, double v, double u);
// Same quantity as minus the positive eigenvalue of -V^{-1}(Q + uI).
double hittingLambdaEigen(const ProcessSpec& spec, double u);

struct HittingEstimate {
  double logMean;   // log E[e^{u tau_L}]
  double logSe;     // standard error of logMean (delta method)
  double exponent;  // logMean / L
  std::size_t n;
};
// Importance-sampled Monte Carlo for E[e^{u tau_L}], tau_L = inf{t : x(t) >= L}; the velocity chain is
// tilted by the positive eigenvector of -V^{-1}(Q + uI) and paths carry their likelihood ratio.
HittingEstimate hittingMonteCarlo(const ProcessSpec& spec, State init, double L, double u, std::size_t n,
                                  std::uint64_t seed, int threads = 0);

// Monte Carlo of E[e^{lambda tau_0}] with its standard error.
struct MeanEstimate {
  double mean, se;
};
MeanEstimate lyapunovMonteCarlo(const ProcessSpec& spec, State init, double lambda, std::size_t n, std::uint64_t seed,
                                int threads = 0);

// Single-particle exponent Lambda_1(u) = -max spec A_1(u), A_1(u) = -V_1^{-1}(Q_1 + uI).
Eigen::Matrix3d lambda1Matrix(double alpha, double beta, double c, double v, double u);
double lambda1(double alpha, double beta, double c, double v, double u);
// Exact derivative at u = 0 of Lambda_1 from the eigenvector perturbation formula.
double lambda1Derivative0(double alpha, double beta, double c, double v);
// Left end U of the window (U, 0) where A_1(u) keeps three distinct real eigenvalues (scan to -scanLimit).
double lambda1WindowStart(double alpha, double beta, double c, double v, double scanLimit = 50.0);

struct UpperRateFinite {
  double exact;   // (2 / Lambda_1'(0)) (-zeta_2)
  double stated;  // 4 alpha (1 + alpha/beta) (c/v)^2
  double ratio;   // exact / (alpha (1 + alpha/beta) (c/v)^2)
};
UpperRateFinite upperRateFinite(double alpha, double beta, double c, double v);

struct DecayBounds {
  std::string process;
  double lambdaQ = 0.0;
  double I = 0.0;               // I(c/v)
  double R = 0.0;               // c/v
  double r = 0.0;               // alpha/beta (finite only)
  double lowerRate = 0.0;       // lambda_Q I / (lambda_Q + I)
  double lowerHalfMin = 0.0;    // min(lambda_Q, I)/2
  double lowerStated = 0.0;     // closed-form lower bound in model parameters
  double upperRateExact = 0.0;
  double upperRateStated = 0.0;
  nlohmann::json toJson() const;
};
DecayBounds decayBounds(const ProcessSpec& spec);

// Mixing fraction theta = lambda/(lambda_Q + lambda) with lambda = 0.9 I(c/v).
double defaultTheta(const ProcessSpec& spec);

struct WassersteinRate {
  double s;            // conjugate exponent from p/q + 1/s = 1
  double contraction;  // (2 omega mu / s)/(omega/s + p mu)
  double rate;         // min(contraction, 2 omega)
  double limitRate;    // q -> inf: min(omega/p, mu)
  double p;
  double omega;
  // (1 + 2^{1/s})^{1/p} (F_q + v/mu) e^{-contraction t} + 2 e^{-2 omega t}
  double bound(double t, double fq, double v, double mu) const;
};
WassersteinRate wassersteinRate(double omega, double mu, double p, double q);
// F_q of a point mass at x.
double fqPoint(double x, double v, double mu);

}  // namespace rtp
