#pragma once

#include <array>

namespace rtp::sf {

struct SeriesResult {
  double value = 0.0;
  long termsUsed = 0;
  double truncationBound = 0.0;
};

// Gamma function; throws PoleGuard at nonpositive integers.
double gamma(double x);
// 1/Gamma(x), exactly zero at the poles of Gamma.
double rgamma(double x);

bool isNonPositiveInteger(double x);

// Gauss hypergeometric function 2F1(a,b;c;z) for real z < 1.
double hyp2f1(double a, double b, double c, double z);
// Regularized variant 2F1(a,b;c;z)/Gamma(c); defined for every c.
double hyp2f1Reg(double a, double b, double c, double z);
// Regularized variant evaluated at z = 1 - w, with w supplied directly so
// that arguments very close to 1 keep full relative precision.
double hyp2f1RegOneMinus(double a, double b, double c, double w);

// Plain power series, exposed for diagnostics; |z| < 1.
SeriesResult hyp2f1Series(double a, double b, double c, double z);

// Regularized 3F2(a1,a2,a3; b1,b2; 1) = 3F2(...;1)/(Gamma(b1)Gamma(b2)).
// Requires b1 + b2 - a1 - a2 - a3 > 0 unless the series terminates.
SeriesResult reg3f2At1(const std::array<double, 3>& a, const std::array<double, 2>& b);

// Complete elliptic integral of the first kind, parameter convention:
// K(m) = int_0^{pi/2} (1 - m sin^2 t)^{-1/2} dt, m < 1.
double ellipticK(double m);
// K(1 - m1), accurate when m1 is tiny.
double ellipticKComplement(double m1);

}  // namespace rtp::sf
