#pragma once

#include <array>
#include <iosfwd>
#include <limits>
#include <optional>
#include <vector>

#include "rtp/dynamics.hpp"

namespace rtp {

// Velocities (sigma_i, sigma~_i) of particle i in the two copies; values in {-1, 0, 1}.
struct ParticlePair {
  int a = 0, b = 0;
  bool coupled() const { return a == b; }
  bool operator==(const ParticlePair& o) const { return a == o.a && b == o.b; }
};

struct PairTransition {
  ParticlePair to;
  double rate;
};
// Jumps of the pair chain of one particle (4 states instantaneous, 9 states finite).
std::vector<PairTransition> pairTransitions(const VelocityChain& chain, ParticlePair p);
// Relative mode index of the velocities (sigma_1, sigma_2).
int relativeMode(const VelocityChain& chain, int sigma1, int sigma2);
// Preimages (sigma_1, sigma_2) of a relative mode.
std::vector<std::array<int, 2>> modePreimages(const VelocityChain& chain, int mode);

struct CoupledEvent {
  double t;
  State a, b;
  bool coalesced;
};

struct CoupledPair {
  Trajectory pathA, pathB;
  std::vector<CoupledEvent> events;  // start and every pair-chain jump
  double horizon = 0.0;
  double coalescenceTime = std::numeric_limits<double>::infinity();  // both pair chains coupled
  double meetingTime = std::numeric_limits<double>::infinity();      // (x, sigma) = (x~, sigma~)
};

// Synchronous coupling driven by two independent pair chains on a shared event clock.
class CoupledSimulator {
 public:
  CoupledSimulator(const ProcessSpec& spec, State initA, State initB, RngStream& rng, CoupledPair* recorder = nullptr,
                   bool trackZeros = false);
  void advanceTo(double T);
  double time() const { return t_; }
  const State& stateA() const { return a_; }
  const State& stateB() const { return b_; }
  const std::array<ParticlePair, 2>& particles() const { return p_; }
  bool coalesced() const { return p_[0].coupled() && p_[1].coupled(); }
  double coalescenceTime() const { return coalescence_; }
  double meetingTime() const { return meeting_; }
  // Closed intervals on which x = 0 (tracked when requested).
  const std::vector<std::array<double, 2>>& zerosA() const { return zerosA_; }
  const std::vector<std::array<double, 2>>& zerosB() const { return zerosB_; }
  // Whether x hits 0 somewhere in [t0, t1] (t1 <= time()).
  bool hitsZeroA(double t0, double t1) const { return hits(zerosA_, t0, t1); }
  bool hitsZeroB(double t0, double t1) const { return hits(zerosB_, t0, t1); }

 private:
  void segment(double dt);
  void jump();
  void drawClock();
  void recordEvent();
  static bool hits(const std::vector<std::array<double, 2>>& z, double t0, double t1);
  static void addZero(std::vector<std::array<double, 2>>& z, double t0, double t1);

  const ProcessSpec& spec_;
  RngStream& rng_;
  CoupledPair* rec_;
  bool trackZeros_;
  State a_, b_;
  std::array<ParticlePair, 2> p_;
  std::array<std::vector<PairTransition>, 2> moves_;
  std::array<double, 2> out_{};
  double t_ = 0.0, nextJump_ = 0.0;
  double coalescence_ = std::numeric_limits<double>::infinity();
  double meeting_ = std::numeric_limits<double>::infinity();
  std::vector<std::array<double, 2>> zerosA_, zerosB_;
};

CoupledPair coupleLinearSynchronous(const ProcessSpec& spec, State initA, State initB, double horizon, RngStream& rng);
CoupledPair coupleHarmonicSynchronous(const ProcessSpec& spec, State initA, State initB, double horizon,
                                      RngStream& rng);

// Columns t, xA, sigmaA, xB, sigmaB, coalesced_flag; one row per joint event plus the horizon.
void writeCoupledCsv(std::ostream& os, const ProcessSpec& spec, const CoupledPair& pair);

struct DominationEvent {
  double t;
  double x, y1, y2;
  int sigma1, sigma2;
  int mode;
};

struct SingleVelocityDecomposition {
  std::vector<DominationEvent> events;  // every jump and every breakpoint of the clamped flows
  double horizon = 0.0;
  double maxExcess = -std::numeric_limits<double>::infinity();  // max of x - (y1 + y2) over breakpoints
  int violations = 0;                                           // breakpoints with excess > tolerance
};

// Finite linear process with dominating paths y1' = -c - v sigma_1, y2' = -c + v sigma_2 (clamped at 0).
SingleVelocityDecomposition singleVelocityDominate(const ProcessSpec& spec, State init, double horizon, RngStream& rng,
                                                   double tolerance = 1e-12);

struct MeetingTvPoint {
  double t;
  double theta;
  double mismatch, mismatchSe;          // P(X(t) != X~(t))
  double notCoalesced, notCoalescedSe;  // P(pair chains not coupled by theta t)
  double noHitA, noHitASe;              // P(x misses 0 on [theta t, t])
  double noHitB, noHitBSe;
  double bound() const { return notCoalesced + noHitA + noHitB; }
  double boundSe() const;
};

// Synchronous coupling with the B copy drawn from lawB; theta defaults to defaultTheta(spec).
std::vector<MeetingTvPoint> meetingTimeTV(const ProcessSpec& spec, State initA, const StateSampler& lawB,
                                          const std::vector<double>& tGrid, std::size_t n, std::uint64_t seed,
                                          std::optional<double> theta = std::nullopt, int threads = 0);

struct CoupledSnapshot {
  double t;
  std::vector<State> a, b;  // replica i of both copies at time t
};
// Synchronous coupling ensemble with the B copy drawn from lawB; replica i uses stream (seed, i).
std::vector<CoupledSnapshot> coupledEnsembleGrid(const ProcessSpec& spec, State initA, const StateSampler& lawB,
                                                 const std::vector<double>& tGrid, std::size_t n, std::uint64_t seed,
                                                 int threads = 0);

}  // namespace rtp
