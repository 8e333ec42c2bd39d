#include "rtp/velocity_chain.hpp"

#include <algorithm>
#include <cmath>

#include "rtp/error.hpp"

namespace rtp {

std::string Mode::label() const {
  switch (tag) {
    case ModeTag::Plus2: return "+2";
    case ModeTag::Plus1: return "+1";
    case ModeTag::Zero: return "0";
    case ModeTag::ZeroPM: return "0pm";
    case ModeTag::Zero00: return "00";
    case ModeTag::Minus1: return "-1";
    case ModeTag::Minus2: return "-2";
  }
  return "?";
}

Mode modeFromTag(ModeTag tag) {
  switch (tag) {
    case ModeTag::Plus2: return {tag, 2};
    case ModeTag::Plus1: return {tag, 1};
    case ModeTag::Minus1: return {tag, -1};
    case ModeTag::Minus2: return {tag, -2};
    default: return {tag, 0};
  }
}

int VelocityChain::indexOf(const std::string& label) const {
  for (int i = 0; i < size(); ++i)
    if (modes_[i].label() == label) return i;
  return -1;
}

int VelocityChain::indexOf(ModeTag tag) const {
  for (int i = 0; i < size(); ++i)
    if (modes_[i].tag == tag) return i;
  return -1;
}

int VelocityChain::successor(int i, double u) const {
  const auto& s = successors_[i];
  for (const auto& [j, cum] : s)
    if (u < cum) return j;
  return s.back().first;
}

VelocityChain buildChain(Mechanism mechanism, double rate1, double rate2) {
  VelocityChain ch;
  ch.mechanism_ = mechanism;
  if (mechanism == Mechanism::Instantaneous) {
    require(rate1 > 0.0 && std::isfinite(rate1), ErrorKind::InvalidParameter,
            "instantaneous tumbling requires omega > 0");
    const double w = rate1;
    ch.omega_ = w;
    for (auto t : {ModeTag::Plus2, ModeTag::Zero, ModeTag::Minus2}) ch.modes_.push_back(modeFromTag(t));
    ch.Q_.resize(3, 3);
    ch.Q_ << -2 * w, 2 * w, 0,
             w, -2 * w, w,
             0, 2 * w, -2 * w;
  } else {
    require(rate1 > 0.0 && std::isfinite(rate1), ErrorKind::InvalidParameter,
            "finite tumbling requires alpha > 0");
    require(rate2 > 0.0 && std::isfinite(rate2), ErrorKind::InvalidParameter,
            "finite tumbling requires beta > 0");
    const double a = rate1, b = rate2;
    ch.alpha_ = a;
    ch.beta_ = b;
    for (auto t : {ModeTag::Plus2, ModeTag::Plus1, ModeTag::ZeroPM, ModeTag::Zero00, ModeTag::Minus1,
                   ModeTag::Minus2})
      ch.modes_.push_back(modeFromTag(t));
    ch.Q_.resize(6, 6);
    ch.Q_ << -2 * a, 2 * a, 0, 0, 0, 0,
             b / 2, -a - b, b / 2, a, 0, 0,
             0, a, -2 * a, 0, a, 0,
             0, b, 0, -2 * b, b, 0,
             0, 0, b / 2, a, -a - b, b / 2,
             0, 0, 0, 0, 2 * a, -2 * a;
  }
  const int n = ch.size();
  ch.successors_.resize(n);
  for (int i = 0; i < n; ++i) {
    const double out = -ch.Q_(i, i);
    double cum = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j == i || ch.Q_(i, j) <= 0.0) continue;
      cum += ch.Q_(i, j) / out;
      ch.successors_[i].push_back({j, cum});
    }
    ch.successors_[i].back().second = 1.0;
  }
  return ch;
}

VelocityChain instantaneousChain(double omega) { return buildChain(Mechanism::Instantaneous, omega); }
VelocityChain finiteChain(double alpha, double beta) { return buildChain(Mechanism::Finite, alpha, beta); }

Eigen::VectorXd stationaryLawClosedForm(const VelocityChain& chain) {
  Eigen::VectorXd p(chain.size());
  if (chain.mechanism() == Mechanism::Instantaneous) {
    p << 0.25, 0.5, 0.25;
  } else {
    const double a = chain.alpha(), b = chain.beta();
    const double s = (a + b) * (a + b);
    p << b * b / 4 / s, a * b / s, b * b / 2 / s, a * a / s, a * b / s, b * b / 4 / s;
  }
  return p;
}

Eigen::VectorXd stationaryLawSolve(const VelocityChain& chain) {
  const int n = chain.size();
  Eigen::MatrixXd A(n + 1, n);
  A.topRows(n) = chain.Q().transpose();
  A.row(n).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
  rhs(n) = 1.0;
  Eigen::VectorXd p = A.colPivHouseholderQr().solve(rhs);
  return p;
}

ChainSpectrum chainSpectrum(const VelocityChain& chain) {
  ChainSpectrum s;
  s.stationaryLaw = stationaryLawSolve(chain);
  if (chain.mechanism() == Mechanism::Instantaneous) {
    const double w = chain.omega();
    s.eigenvalues = {0.0, -2 * w, -4 * w};
  } else {
    const double a = chain.alpha(), b = chain.beta();
    s.eigenvalues = {0.0, -a, -2 * a, -a - b, -2 * a - b, -2 * a - 2 * b};
  }
  double top = -INFINITY;
  for (double e : s.eigenvalues)
    if (e != 0.0) top = std::max(top, e);
  s.spectralGap = -top;
  return s;
}

}  // namespace rtp
