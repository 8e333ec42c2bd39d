#include "rtp/special_functions.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/polygamma.hpp>
#include <cmath>
#include <limits>
#include <sstream>

#include "rtp/error.hpp"

namespace rtp::sf {

namespace {

constexpr double kEps = 1e-16;
constexpr long kMaxTerms = 1000000;

double pochhammer(double a, int k) {
  double p = 1.0;
  for (int i = 0; i < k; ++i) p *= a + i;
  return p;
}

double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

bool nearInteger(double s, double tol) { return std::fabs(s - std::round(s)) < tol; }

// Sum of a terminating series; a or b is a nonpositive integer and c is not.
double terminatingSum(double a, double b, double c, double z) {
  double sum = 1.0, t = 1.0;
  for (int n = 0; n < 100000; ++n) {
    t *= (a + n) * (b + n) / ((c + n) * (n + 1)) * z;
    if (t == 0.0) return sum;
    sum += t;
  }
  fail(ErrorKind::NonConvergence, "terminating hypergeometric series did not terminate");
}

double regImpl(double a, double b, double c, double z, double w);

}  // namespace

bool isNonPositiveInteger(double x) { return x <= 0.0 && x == std::floor(x); }

double gamma(double x) {
  if (isNonPositiveInteger(x)) {
    std::ostringstream os;
    os << "Gamma has a pole at " << x;
    fail(ErrorKind::PoleGuard, os.str());
  }
  return std::tgamma(x);
}

double rgamma(double x) {
  if (isNonPositiveInteger(x)) return 0.0;
  if (x > 171.0) return std::exp(-std::lgamma(x));
  return 1.0 / std::tgamma(x);
}

SeriesResult hyp2f1Series(double a, double b, double c, double z) {
  if (isNonPositiveInteger(c)) fail(ErrorKind::PoleGuard, "2F1 series with c a nonpositive integer");
  if (!(std::fabs(z) < 1.0)) fail(ErrorKind::Domain, "2F1 power series needs |z| < 1");
  SeriesResult r;
  double sum = 1.0, t = 1.0;
  for (long n = 0; n < kMaxTerms; ++n) {
    const double ratio = (a + n) * (b + n) / ((c + n) * (n + 1.0)) * z;
    t *= ratio;
    sum += t;
    if (t == 0.0) {
      r.value = sum;
      r.termsUsed = n + 2;
      r.truncationBound = 0.0;
      return r;
    }
    const double nextRatio =
        std::fabs((a + n + 1) * (b + n + 1) / ((c + n + 1) * (n + 2.0)) * z);
    const double rmax = std::max(nextRatio, std::fabs(z));
    if (n > 2 && rmax < 1.0) {
      const double bound = std::fabs(t) * nextRatio / (1.0 - rmax);
      if (bound <= kEps * std::fabs(sum)) {
        r.value = sum;
        r.termsUsed = n + 2;
        r.truncationBound = bound;
        return r;
      }
    }
  }
  fail(ErrorKind::NonConvergence, "2F1 series exceeded the term cap");
}

namespace {

double series(double a, double b, double c, double z) { return hyp2f1Series(a, b, c, z).value; }

// Regularized 2F1(a,b;a+b+m;1-w) for integer m >= 0, logarithmic case of
// the 1-z connection formula; a, b are not nonpositive integers.
double regLogCase(double a, double b, int m, double w) {
  using boost::math::digamma;
  double finite = 0.0;
  if (m > 0) {
    double t = 1.0;
    for (int n = 0; n < m; ++n) {
      finite += t;
      t *= (a + n) * (b + n) / ((n + 1.0) * (1.0 - m + n)) * w;
    }
    finite *= factorial(m - 1) * rgamma(a + m) * rgamma(b + m);
  }
  const double lw = std::log(w);
  double psi1 = digamma(1.0), psi2 = digamma(m + 1.0), psi3 = digamma(a + m), psi4 = digamma(b + m);
  double t = 1.0 / factorial(m), sum = 0.0;
  for (long n = 0; n < kMaxTerms; ++n) {
    const double term = t * (lw - psi1 - psi2 + psi3 + psi4);
    sum += term;
    if (n > 4 && std::fabs(term) <= kEps * std::fabs(sum)) break;
    if (n + 1 == kMaxTerms) fail(ErrorKind::NonConvergence, "2F1 logarithmic series exceeded the term cap");
    t *= (a + m + n) * (b + m + n) / ((n + 1.0) * (n + m + 1.0)) * w;
    psi1 += 1.0 / (n + 1.0);
    psi2 += 1.0 / (n + m + 1.0);
    psi3 += 1.0 / (a + m + n);
    psi4 += 1.0 / (b + m + n);
  }
  const double sign = m % 2 == 0 ? 1.0 : -1.0;
  return finite - sign * std::pow(w, m) * rgamma(a) * rgamma(b) * sum;
}

double regImpl(double a, double b, double c, double z, double w) {
  if (z == 0.0) return rgamma(c);
  if (isNonPositiveInteger(c)) {
    const int m = static_cast<int>(-c);
    const double coef = pochhammer(a, m + 1) * pochhammer(b, m + 1) / factorial(m + 1) *
                        std::pow(z, m + 1);
    if (coef == 0.0) return 0.0;
    return coef * regImpl(a + m + 1, b + m + 1, m + 2, z, w) * factorial(m + 1);
  }
  if (isNonPositiveInteger(a) || isNonPositiveInteger(b)) return rgamma(c) * terminatingSum(a, b, c, z);
  if (z < 0.0) {
    // Pfaff: F(a,b;c;z) = (1-z)^{-a} F(a,c-b;c;z/(z-1)).
    return std::pow(w, -a) * regImpl(a, c - b, c, z / (z - 1.0), 1.0 / w);
  }
  if (z <= 0.5) return rgamma(c) * series(a, b, c, z);
  if (isNonPositiveInteger(c - a) || isNonPositiveInteger(c - b)) {
    // Euler: F(a,b;c;z) = (1-z)^{c-a-b} F(c-a,c-b;c;z), terminating here.
    return std::pow(w, c - a - b) * regImpl(c - a, c - b, c, z, w);
  }
  const double s = c - a - b;
  if (nearInteger(s, 1e-8)) {
    const int m = static_cast<int>(std::round(s));
    if (m < 0) return std::pow(w, s) * regImpl(c - a, c - b, c, z, w);
    return regLogCase(a, b, m, w);
  }
  const double t1 = std::tgamma(s) * rgamma(c - a) * rgamma(c - b) * series(a, b, 1.0 - s, w);
  double t2 = 0.0;
  const double ra = rgamma(a) * rgamma(b);
  if (ra != 0.0) t2 = std::pow(w, s) * std::tgamma(-s) * ra * series(c - a, c - b, 1.0 + s, w);
  return t1 + t2;
}

}  // namespace

double hyp2f1RegOneMinus(double a, double b, double c, double w) {
  if (!(w > 0.0)) fail(ErrorKind::Domain, "2F1 requires z < 1");
  return regImpl(a, b, c, 1.0 - w, w);
}

double hyp2f1Reg(double a, double b, double c, double z) {
  if (!(z < 1.0)) fail(ErrorKind::Domain, "2F1 requires z < 1");
  return regImpl(a, b, c, z, 1.0 - z);
}

double hyp2f1(double a, double b, double c, double z) {
  if (isNonPositiveInteger(c)) fail(ErrorKind::PoleGuard, "2F1 with c a nonpositive integer");
  if (!(z < 1.0)) fail(ErrorKind::Domain, "2F1 requires z < 1");
  if (z == 0.0) return 1.0;
  if (z <= 0.5 && z >= 0.0) return series(a, b, c, z);
  return std::tgamma(c) * regImpl(a, b, c, z, 1.0 - z);
}

namespace {

// Gamma(x+a)/Gamma(x+b), stable for large x.
double gammaRatio(double x, double a, double b) {
  return boost::math::tgamma_delta_ratio(x + a, b - a);
}

}  // namespace

SeriesResult reg3f2At1(const std::array<double, 3>& a, const std::array<double, 2>& b) {
  SeriesResult r;
  int terminatingAt = -1;
  for (double ai : a) {
    if (isNonPositiveInteger(ai)) {
      const int m = static_cast<int>(-ai);
      if (terminatingAt < 0 || m < terminatingAt) terminatingAt = m;
    }
  }
  auto directTerm = [&](int n) {
    double t = 1.0;
    for (double ai : a) t *= pochhammer(ai, n);
    t /= factorial(n);
    for (double bj : b) t *= rgamma(bj + n);
    return t;
  };
  if (terminatingAt >= 0) {
    double sum = 0.0;
    for (int n = 0; n <= terminatingAt; ++n) sum += directTerm(n);
    r.value = sum;
    r.termsUsed = terminatingAt + 1;
    return r;
  }
  const double excess = b[0] + b[1] - a[0] - a[1] - a[2];
  if (!(excess > 0.0)) {
    std::ostringstream os;
    os << "3F2 at unit argument diverges: sum(b) - sum(a) = " << excess;
    fail(ErrorKind::Domain, os.str());
  }

  int n0 = 0;
  double maxAbs = 1.0;
  for (double bj : b) {
    if (isNonPositiveInteger(bj)) n0 = std::max(n0, static_cast<int>(-bj) + 1);
    maxAbs = std::max(maxAbs, std::fabs(bj));
  }
  for (double ai : a) maxAbs = std::max(maxAbs, std::fabs(ai));
  const int N = std::max(n0 + 64, static_cast<int>(2.0 * maxAbs) + 40);

  double t = directTerm(n0);
  double sum = 0.0;
  for (int n = n0; n < N; ++n) {
    sum += t;
    t *= (a[0] + n) * (a[1] + n) * (a[2] + n) / ((b[0] + n) * (b[1] + n) * (n + 1.0));
  }
  const double tN = t;
  const double xN = N;

  // Tail sum_{n>=N} t(n) by Euler-Maclaurin on the smooth interpolant
  // t(x) = tN * prod_k [G_k(x)/G_k(N)], G_k(x) = Gamma(x+a_k)/Gamma(x+b'_k)
  // with b' = (b1, b2, 1).
  const std::array<double, 3> bb{b[0], b[1], 1.0};
  std::array<double, 3> refRatio{};
  for (int k = 0; k < 3; ++k) refRatio[k] = gammaRatio(xN, a[k], bb[k]);
  auto tOf = [&](double x) {
    double v = tN;
    for (int k = 0; k < 3; ++k) v *= gammaRatio(x, a[k], bb[k]) / refRatio[k];
    return v;
  };
  const double xBig = 1e14 * xN;
  const double cInf = tOf(xBig) * std::pow(xBig, 1.0 + excess);
  auto integrand = [&](double w) {
    if (w <= 0.0) return cInf * std::pow(xN, -excess) / excess;
    const double x = xN * std::pow(w, -1.0 / excess);
    if (!std::isfinite(x) || x > xBig) return cInf * std::pow(xN, -excess) / excess;
    return tOf(x) * (xN / excess) * std::pow(w, -1.0 / excess - 1.0);
  };
  boost::math::quadrature::tanh_sinh<double> ts;
  double errEst = 0.0;
  const double integral = ts.integrate(integrand, 0.0, 1.0, 1e-15, &errEst);

  auto ell = [&](int k) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i) {
      s += boost::math::polygamma(k - 1, xN + a[i]) - boost::math::polygamma(k - 1, xN + bb[i]);
    }
    return s;
  };
  const double l1 = ell(1), l2 = ell(2), l3 = ell(3), l4 = ell(4), l5 = ell(5);
  const double d1 = tN * l1;
  const double d3 = tN * (l3 + 3 * l1 * l2 + l1 * l1 * l1);
  const double d5 = tN * (l5 + 5 * l1 * l4 + 10 * l2 * l3 + 10 * l1 * l1 * l3 + 15 * l1 * l2 * l2 +
                          10 * l1 * l1 * l1 * l2 + std::pow(l1, 5));
  const double tail = integral + tN / 2 - d1 / 12 + d3 / 720 - d5 / 30240;
  r.value = sum + tail;
  r.termsUsed = N - n0;
  r.truncationBound = std::fabs(d5 / 30240) + errEst;
  if (!std::isfinite(r.value)) fail(ErrorKind::NonConvergence, "3F2 at unit argument produced a non-finite value");
  return r;
}

namespace {

double agm(double a, double g) {
  for (int i = 0; i < 64; ++i) {
    if (std::fabs(a - g) <= 1e-16 * a) return a;
    const double an = 0.5 * (a + g);
    g = std::sqrt(a * g);
    a = an;
  }
  return a;
}

}  // namespace

double ellipticK(double m) {
  if (!(m < 1.0)) fail(ErrorKind::Domain, "elliptic K requires m < 1");
  return M_PI / (2.0 * agm(1.0, std::sqrt(1.0 - m)));
}

double ellipticKComplement(double m1) {
  if (!(m1 > 0.0)) fail(ErrorKind::Domain, "elliptic K requires m < 1");
  return M_PI / (2.0 * agm(1.0, std::sqrt(m1)));
}

}  // namespace rtp::sf
