#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

namespace rtp {

enum class Mechanism { Instantaneous, Finite };

enum class ModeTag { Plus2, Plus1, Zero, ZeroPM, Zero00, Minus1, Minus2 };

struct Mode {
  ModeTag tag;
  int value;

  std::string label() const;
  bool operator==(const Mode& o) const { return tag == o.tag; }
};

Mode modeFromTag(ModeTag tag);

class VelocityChain {
 public:
  Mechanism mechanism() const { return mechanism_; }
  const std::vector<Mode>& modes() const { return modes_; }
  int size() const { return static_cast<int>(modes_.size()); }
  const Mode& mode(int i) const { return modes_[i]; }
  // Index of the mode with the given label ("+2", "0pm", ...); -1 if absent.
  int indexOf(const std::string& label) const;
  int indexOf(ModeTag tag) const;

  const Eigen::MatrixXd& Q() const { return Q_; }
  double exitRate(int i) const { return -Q_(i, i); }
  // Successors of state i with cumulative jump probabilities.
  const std::vector<std::pair<int, double>>& successors(int i) const { return successors_[i]; }
  // Successor index for a uniform draw u in [0,1).
  int successor(int i, double u) const;

  double omega() const { return omega_; }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }

  friend VelocityChain buildChain(Mechanism mechanism, double rate1, double rate2);

 private:
  Mechanism mechanism_ = Mechanism::Instantaneous;
  std::vector<Mode> modes_;
  Eigen::MatrixXd Q_;
  std::vector<std::vector<std::pair<int, double>>> successors_;
  double omega_ = 0.0, alpha_ = 0.0, beta_ = 0.0;
};

// rate1 = omega (instantaneous) or alpha (finite); rate2 = beta (finite only).
VelocityChain buildChain(Mechanism mechanism, double rate1, double rate2 = 0.0);
VelocityChain instantaneousChain(double omega);
VelocityChain finiteChain(double alpha, double beta);

struct ChainSpectrum {
  Eigen::VectorXd stationaryLaw;
  double spectralGap = 0.0;
  std::vector<double> eigenvalues;
};

ChainSpectrum chainSpectrum(const VelocityChain& chain);

// pi_Q from the closed-form expressions.
Eigen::VectorXd stationaryLawClosedForm(const VelocityChain& chain);
// pi_Q from the linear system pi Q = 0, sum pi = 1.
Eigen::VectorXd stationaryLawSolve(const VelocityChain& chain);

}  // namespace rtp
