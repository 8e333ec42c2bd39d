#include "rtp/rates.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <limits>

#include "rtp/error.hpp"
#include "rtp/format.hpp"
#include "rtp/parallel.hpp"

namespace rtp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sigmaOf(const VelocityChain& chain, int i) { return chain.mode(i).value; }

void requireLinear(const ProcessSpec& spec, const char* what) {
  require(spec.potential.isLinear(), ErrorKind::InvalidParameter, std::string(what) + " requires a linear potential");
}

// Top eigenpair of the symmetrized restriction of Q + u diag(vt) to the index set `keep`.
double topEigen(const ChernoffProblem& p, double u, const std::vector<int>& keep, Eigen::VectorXd* vec) {
  const int n = static_cast<int>(keep.size());
  Eigen::MatrixXd M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const int a = keep[i], b = keep[j];
      const double aij = p.Q(a, b) + (a == b ? u * p.vt(a) : 0.0);
      M(i, j) = std::sqrt(p.s(a)) * aij / std::sqrt(p.s(b));
    }
  const Eigen::MatrixXd sym = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (vec) *vec = es.eigenvectors().col(n - 1);
  return es.eigenvalues()(n - 1);
}

std::vector<int> allIndices(int n) {
  std::vector<int> k(n);
  for (int i = 0; i < n; ++i) k[i] = i;
  return k;
}

}  // namespace

ChernoffProblem chernoffProblem(const VelocityChain& chain) {
  ChernoffProblem p;
  p.s = stationaryLawClosedForm(chain);
  p.Q = chain.Q();
  p.vt.resize(chain.size());
  for (int i = 0; i < chain.size(); ++i) p.vt(i) = 0.5 * sigmaOf(chain, i);
  return p;
}

double chernoffLambda(const ChernoffProblem& p, double u, double* derivative) {
  Eigen::VectorXd f;
  const double top = topEigen(p, u, allIndices(static_cast<int>(p.s.size())), &f);
  if (derivative) {
    // Similarity by S^{1/2} commutes with the diagonal velocity matrix.
    double d = 0.0;
    for (int i = 0; i < f.size(); ++i) d += f(i) * f(i) * p.vt(i);
    *derivative = d;
  }
  return top;
}

double instantaneousChernoffClosedForm(double omega, double u) { return -2 * omega + std::sqrt(u * u + 4 * omega * omega); }

RateFunction::RateFunction(const VelocityChain& chain, bool numeric) : problem_(chernoffProblem(chain)) {
  closedForm_ = !numeric && chain.mechanism() == Mechanism::Instantaneous;
  omega_ = chain.omega();
}

RateFunction::Value RateFunction::evaluate(double R) const {
  require(std::abs(R) <= 1.0, ErrorKind::Domain, "rate function needs |R| <= 1");
  if (R == 0.0) return {0.0, 0.0};
  if (closedForm_) {
    if (std::abs(R) == 1.0) return {2 * omega_, R * kInf};
    const double root = std::sqrt(1 - R * R);
    return {2 * omega_ * (1 - root), 2 * omega_ * R / root};
  }
  const double sign = R > 0 ? 1.0 : -1.0;
  const double vmax = problem_.vt.cwiseAbs().maxCoeff();
  if (std::abs(R) >= vmax) {
    // u -> +-inf: Lambda(u) - |u| vmax tends to the top eigenvalue restricted to the extreme velocity.
    std::vector<int> keep;
    for (int i = 0; i < problem_.vt.size(); ++i)
      if (sign * problem_.vt(i) == vmax) keep.push_back(i);
    return {-topEigen(problem_, 0.0, keep, nullptr), sign * kInf};
  }
  // g(u) = uR - Lambda(u) is concave; its maximizer solves Lambda'(u) = R, bracketed by doubling.
  auto slope = [&](double u) {
    double d;
    chernoffLambda(problem_, u, &d);
    return d - R;
  };
  double lo = 0.0, hi = sign;
  while (sign * slope(hi) < 0.0) {
    lo = hi;
    hi *= 2.0;
    require(std::abs(hi) < 1e12, ErrorKind::NonConvergence, "rate function bracket diverged");
  }
  if (sign < 0) std::swap(lo, hi);
  std::uintmax_t iters = 200;
  const auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-12 * std::max(1.0, std::abs(a)); };
  const auto br = boost::math::tools::toms748_solve(slope, lo, hi, slope(lo), slope(hi), tol, iters);
  const double u = 0.5 * (br.first + br.second);
  return {u * R - chernoffLambda(problem_, u), u};
}

double RateFunction::derivative(double R) const {
  require(std::abs(R) < 1.0, ErrorKind::Domain, "rate derivative needs |R| < 1");
  // The maximizing u is the derivative of the Legendre transform.
  return evaluate(R).maximizer;
}

double lezaudBound(double alpha, double beta, double R) {
  return (3.0 - std::sqrt(5.0)) / 4.0 * std::min(alpha * R, alpha * (1 + alpha / beta) * R * R);
}

namespace {

struct LyapunovData {
  double I, Iprime, a, b, K;
  Eigen::VectorXd piQ;
};

LyapunovData lyapunovData(const ProcessSpec& spec, double lambda) {
  requireLinear(spec, "Lyapunov bound");
  const double R = spec.c() / spec.v;
  RateFunction rf(spec.chain);
  LyapunovData d;
  d.I = rf.I(R);
  require(lambda > 0.0 && lambda < d.I, ErrorKind::Domain, "lambda must lie in (0, I(c/v)) = (0, " + num17(d.I) + ")");
  d.Iprime = rf.derivative(R);
  d.a = lambda / (2 * spec.c());
  d.b = d.Iprime / (2 * spec.v) - (d.I - lambda) / (2 * spec.c());
  d.K = lambda / (d.I - lambda);
  d.piQ = stationaryLawClosedForm(spec.chain);
  return d;
}

double fbar(const LyapunovData& d, double x, int mode) {
  return std::exp(d.a * x) + d.K * std::exp(d.b * x) / std::sqrt(d.piQ(mode));
}

}  // namespace

double lyapunovBound(const ProcessSpec& spec, double x, int mode, double lambda) {
  return fbar(lyapunovData(spec, lambda), x, mode);
}

TvUpperCurve tvUpperCurve(const ProcessSpec& spec, double x, int mode, double lambda) {
  const auto d = lyapunovData(spec, lambda);
  const auto pi = invariantFor(spec);
  const auto* mix = dynamic_cast<const ExponentialMixtureMeasure*>(pi.get());
  require(mix != nullptr, ErrorKind::InvalidParameter, "TV upper curve needs an exponential-mixture invariant measure");
  TvUpperCurve c;
  c.fbar = fbar(d, x, mode);
  c.piFbar = 0.0;
  const int n = spec.chain.size();
  for (int s = 0; s < n; ++s)
    c.piFbar += mix->expIntegral(d.a, s) + d.K / std::sqrt(d.piQ(s)) * mix->expIntegral(d.b, s);
  const auto& Q = spec.chain.Q();
  c.cBound = -kInf;
  for (int s = 0; s < n; ++s) {
    double v = Q(s, s);
    for (int j = 0; j < n; ++j)
      if (j != s) v += Q(s, j) * fbar(d, 0.0, j);
    c.cBound = std::max(c.cBound, v);
  }
  const double lq = chainSpectrum(spec.chain).spectralGap;
  c.rate = lq * lambda / (lq + lambda);
  return c;
}

double hittingLambda(double omega, double c, double v, double u) {
  require(u < 0.0, ErrorKind::Domain, "hitting exponent needs u < 0");
  require(v > c && c > 0.0 && omega > 0.0, ErrorKind::InvalidParameter, "hitting exponent needs v > c > 0, omega > 0");
  return (c * u - 2 * c * omega - std::sqrt(u * u * v * v - 4 * u * v * v * omega + 4 * c * c * omega * omega)) /
         (2 * (v * v - c * c));
}

namespace {

// Positive eigenvalue of -V^{-1}(Q + uI) and its eigenvector, normalized positive.
std::pair<double, Eigen::VectorXd> hittingEigen(const ProcessSpec& spec, double u) {
  requireLinear(spec, "hitting exponent");
  const int n = spec.chain.size();
  Eigen::MatrixXd A(n, n);
  for (int i = 0; i < n; ++i) {
    const double vi = drift(spec, i, 1.0);
    require(vi != 0.0, ErrorKind::Domain, "hitting exponent needs nonzero drifts");
    for (int j = 0; j < n; ++j) A(i, j) = -(spec.chain.Q()(i, j) + (i == j ? u : 0.0)) / vi;
  }
  Eigen::EigenSolver<Eigen::MatrixXd> es(A);
  int pick = -1;
  for (int i = 0; i < n; ++i) {
    const auto e = es.eigenvalues()(i);
    if (std::abs(e.imag()) <= 1e-12 * std::max(1.0, std::abs(e)) && e.real() > 0.0) {
      require(pick < 0, ErrorKind::Numeric, "hitting matrix has several positive eigenvalues");
      pick = i;
    }
  }
  require(pick >= 0, ErrorKind::Numeric, "hitting matrix has no positive eigenvalue");
  Eigen::VectorXd h = es.eigenvectors().col(pick).real();
  if (h.sum() < 0) h = -h;
  require(h.minCoeff() > 0.0, ErrorKind::Numeric, "hitting eigenvector is not positive");
  return {es.eigenvalues()(pick).real(), h / h.maxCoeff()};
}

}  // namespace

double hittingLambdaEigen(const ProcessSpec& spec, double u) {
  require(u < 0.0, ErrorKind::Domain, "hitting exponent needs u < 0");
  return -hittingEigen(spec, u).first;
}

HittingEstimate hittingMonteCarlo(const ProcessSpec& spec, State init, double L, double u, std::size_t n,
                                  std::uint64_t seed, int threads) {
  require(u < 0.0 && L > init.x && n > 0, ErrorKind::Domain, "hitting Monte Carlo needs u < 0, L > x0, n > 0");
  const auto h = hittingEigen(spec, u).second;
  const int m = spec.chain.size();
  const auto& Q = spec.chain.Q();
  // Tilted rates q(s, j) h(j) / h(s).
  Eigen::MatrixXd Qt = Eigen::MatrixXd::Zero(m, m);
  for (int s = 0; s < m; ++s)
    for (int j = 0; j < m; ++j)
      if (j != s) Qt(s, j) = Q(s, j) * h(j) / h(s);
  Eigen::VectorXd outT(m), out(m);
  for (int s = 0; s < m; ++s) {
    outT(s) = Qt.row(s).sum();
    out(s) = -Q(s, s);
  }
  std::vector<double> logY(n);
  const double tMax = 1e6 * (1.0 + L);
  parallelChunks(n, resolveThreads(threads), 64, [&](std::size_t b, std::size_t e, std::size_t) {
    for (std::size_t k = b; k < e; ++k) {
      RngStream rng(seed, k);
      double x = init.x, t = 0.0, logw = 0.0;
      int s = init.mode;
      for (;;) {
        const double hold = rng.exponential(outT(s));
        const double reach = timeToReach(spec, s, x, L);
        if (reach <= hold) {
          t += reach;
          logw += (outT(s) - out(s)) * reach;
          break;
        }
        t += hold;
        logw += (outT(s) - out(s)) * hold;
        x = flow(spec, s, x, hold);
        double r = rng.uniform() * outT(s);
        int next = -1;
        for (int j = 0; j < m; ++j) {
          if (j == s || Qt(s, j) <= 0.0) continue;
          next = j;
          if (r < Qt(s, j)) break;
          r -= Qt(s, j);
        }
        logw -= std::log(Qt(s, next) / Q(s, next));
        s = next;
        require(t < tMax, ErrorKind::NonConvergence, "tilted path did not reach the level");
      }
      logY[k] = u * t + logw;
    }
  });
  double mx = -kInf;
  for (double v : logY) mx = std::max(mx, v);
  double s1 = 0.0, s2 = 0.0;
  for (double v : logY) {
    const double y = std::exp(v - mx);
    s1 += y;
    s2 += y * y;
  }
  const double mean = s1 / n, var = std::max(0.0, s2 / n - mean * mean);
  HittingEstimate est;
  est.n = n;
  est.logMean = mx + std::log(mean);
  est.logSe = std::sqrt(var / n) / mean;
  est.exponent = est.logMean / L;
  return est;
}

MeanEstimate lyapunovMonteCarlo(const ProcessSpec& spec, State init, double lambda, std::size_t n, std::uint64_t seed,
                                int threads) {
  requireLinear(spec, "Lyapunov Monte Carlo");
  require(n > 1 && lambda >= 0.0, ErrorKind::Domain, "Lyapunov Monte Carlo needs n > 1, lambda >= 0");
  std::vector<double> y(n);
  const double tMax = 1e7;
  parallelChunks(n, resolveThreads(threads), 64, [&](std::size_t b, std::size_t e, std::size_t) {
    for (std::size_t k = b; k < e; ++k) {
      RngStream rng(seed, k);
      double x = init.x, t = 0.0;
      int s = init.mode;
      // A glued start is already at 0; otherwise tau_0 is the first return.
      if (!(x == 0.0 && isGlued(spec, s))) {
        for (;;) {
          const double hold = rng.exponential(spec.chain.exitRate(s));
          const double hit = x > 0.0 ? hittingTimeZero(spec, s, x) : (isGlued(spec, s) ? 0.0 : kInf);
          if (hit <= hold) {
            t += hit;
            break;
          }
          t += hold;
          x = flow(spec, s, x, hold);
          s = spec.chain.successor(s, rng.uniform());
          require(t < tMax, ErrorKind::NonConvergence, "path did not return to 0");
        }
      }
      y[k] = std::exp(lambda * t);
    }
  });
  double s1 = 0.0, s2 = 0.0;
  for (double v : y) {
    s1 += v;
    s2 += v * v;
  }
  const double mean = s1 / n;
  return {mean, std::sqrt(std::max(0.0, s2 / n - mean * mean) / (n - 1))};
}

Eigen::Matrix3d lambda1Matrix(double alpha, double beta, double c, double v, double u) {
  Eigen::Matrix3d Q1;
  Q1 << -alpha, alpha, 0, beta / 2, -beta, beta / 2, 0, alpha, -alpha;
  const Eigen::Vector3d V1(-c + v, -c, -c - v);
  Eigen::Matrix3d A = Q1 + u * Eigen::Matrix3d::Identity();
  for (int i = 0; i < 3; ++i) A.row(i) *= -1.0 / V1(i);
  return A;
}

namespace {

// Eigenvalues of A_1(u), sorted descending; throws unless three distinct real values.
Eigen::Vector3d lambda1Spectrum(double alpha, double beta, double c, double v, double u) {
  require(alpha > 0 && beta > 0 && c > 0 && v > c, ErrorKind::InvalidParameter, "Lambda_1 needs alpha, beta > 0, v > c > 0");
  Eigen::EigenSolver<Eigen::Matrix3d> es(lambda1Matrix(alpha, beta, c, v, u));
  Eigen::Vector3d ev;
  double scale = 0.0;
  for (int i = 0; i < 3; ++i) scale = std::max(scale, std::abs(es.eigenvalues()(i)));
  for (int i = 0; i < 3; ++i) {
    const auto e = es.eigenvalues()(i);
    require(std::abs(e.imag()) <= 1e-12 * std::max(1.0, scale), ErrorKind::Domain,
            "A_1(u) has complex eigenvalues at u = " + num17(u));
    ev(i) = e.real();
  }
  std::sort(ev.data(), ev.data() + 3, std::greater<double>());
  require(ev(0) - ev(1) > 1e-9 * std::max(1.0, scale) && ev(1) - ev(2) > 1e-9 * std::max(1.0, scale),
          ErrorKind::Domain, "A_1(u) eigenvalues are not distinct at u = " + num17(u));
  return ev;
}

}  // namespace

double lambda1(double alpha, double beta, double c, double v, double u) {
  return -lambda1Spectrum(alpha, beta, c, v, u)(0);
}

double lambda1Derivative0(double alpha, double beta, double c, double v) {
  lambda1Spectrum(alpha, beta, c, v, 0.0);
  const Eigen::Matrix3d A = lambda1Matrix(alpha, beta, c, v, 0.0);
  Eigen::EigenSolver<Eigen::Matrix3d> right(A), left(A.transpose());
  auto topIndex = [](const auto& es) {
    int k = 0;
    for (int i = 1; i < 3; ++i)
      if (es.eigenvalues()(i).real() > es.eigenvalues()(k).real()) k = i;
    return k;
  };
  const Eigen::Vector3d r = right.eigenvectors().col(topIndex(right)).real();
  const Eigen::Vector3d l = left.eigenvectors().col(topIndex(left)).real();
  // dA/du = -V_1^{-1}; simple eigenvalue derivative is l^T (dA/du) r / l^T r.
  const Eigen::Vector3d V1(-c + v, -c, -c - v);
  double num = 0.0;
  for (int i = 0; i < 3; ++i) num += l(i) * (-1.0 / V1(i)) * r(i);
  return -num / l.dot(r);
}

double lambda1WindowStart(double alpha, double beta, double c, double v, double scanLimit) {
  const int steps = 20000;
  double last = 0.0;
  for (int k = 1; k <= steps; ++k) {
    const double u = -scanLimit * k / steps;
    try {
      lambda1Spectrum(alpha, beta, c, v, u);
      last = u;
    } catch (const Error&) {
      return last;
    }
  }
  return -scanLimit;
}

UpperRateFinite upperRateFinite(double alpha, double beta, double c, double v) {
  const double z2 = p2p3(alpha, beta, c, v).zeta2();
  const double r = alpha / beta, R = c / v;
  UpperRateFinite out;
  out.exact = 2.0 / lambda1Derivative0(alpha, beta, c, v) * (-z2);
  out.stated = 4 * alpha * (1 + r) * R * R;
  out.ratio = out.exact / (alpha * (1 + r) * R * R);
  return out;
}

nlohmann::json DecayBounds::toJson() const {
  return {{"process", process},
          {"lambda_Q", num17(lambdaQ)},
          {"I", num17(I)},
          {"R", num17(R)},
          {"r", num17(r)},
          {"lower_rate", num17(lowerRate)},
          {"lower_half_min", num17(lowerHalfMin)},
          {"lower_stated", num17(lowerStated)},
          {"upper_rate_exact", num17(upperRateExact)},
          {"upper_rate_stated", num17(upperRateStated)}};
}

DecayBounds decayBounds(const ProcessSpec& spec) {
  require(spec.potential.isLinear(), ErrorKind::InvalidParameter,
          "decay bounds cover linear potentials; use the Wasserstein rate for the harmonic process");
  DecayBounds d;
  d.process = processName(spec);
  d.R = spec.c() / spec.v;
  d.lambdaQ = chainSpectrum(spec.chain).spectralGap;
  d.I = RateFunction(spec.chain).I(d.R);
  d.lowerRate = d.lambdaQ * d.I / (d.lambdaQ + d.I);
  d.lowerHalfMin = 0.5 * std::min(d.lambdaQ, d.I);
  const double R2 = d.R * d.R;
  if (spec.chain.mechanism() == Mechanism::Instantaneous) {
    const double w = spec.chain.omega(), c = spec.c(), v = spec.v;
    d.lowerStated = 0.5 * w * R2;
    d.upperRateExact = 4 * w * c * c / (c * c + v * v);
    d.upperRateStated = 4 * w * R2;
  } else {
    const double a = spec.chain.alpha(), b = spec.chain.beta();
    d.r = a / b;
    d.lowerStated = (3.0 - std::sqrt(5.0)) / 8.0 * std::min(a * d.R, a * (1 + d.r) * R2);
    const auto up = upperRateFinite(a, b, spec.c(), spec.v);
    d.upperRateExact = up.exact;
    d.upperRateStated = up.stated;
  }
  return d;
}

double defaultTheta(const ProcessSpec& spec) {
  requireLinear(spec, "default theta");
  const double lambda = 0.9 * RateFunction(spec.chain).I(spec.c() / spec.v);
  const double lq = chainSpectrum(spec.chain).spectralGap;
  return lambda / (lq + lambda);
}

WassersteinRate wassersteinRate(double omega, double mu, double p, double q) {
  require(omega > 0 && mu > 0, ErrorKind::InvalidParameter, "Wasserstein rate needs omega, mu > 0");
  require(p >= 1.0 && p < q, ErrorKind::Domain, "Wasserstein rate needs 1 <= p < q");
  WassersteinRate w;
  w.p = p;
  w.omega = omega;
  w.s = std::isinf(q) ? 1.0 : q / (q - p);
  w.contraction = (2 * omega * mu / w.s) / (omega / w.s + p * mu);
  w.rate = std::min(w.contraction, 2 * omega);
  w.limitRate = std::min(omega / p, mu);
  return w;
}

double WassersteinRate::bound(double t, double fq, double v, double mu) const {
  return std::pow(1 + std::pow(2.0, 1.0 / s), 1.0 / p) * (fq + v / mu) * std::exp(-contraction * t) +
         2 * std::exp(-2 * omega * t);
}

double fqPoint(double x, double v, double mu) { return std::max(x, v / mu); }

}  // namespace rtp
