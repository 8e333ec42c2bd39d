#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "rtp/rng.hpp"
#include "rtp/velocity_chain.hpp"

namespace rtp {

struct Potential {
  enum class Kind { Linear, Harmonic };
  Kind kind = Kind::Linear;
  double strength = 1.0;  // c for linear, mu for harmonic

  static Potential linear(double c) { return {Kind::Linear, c}; }
  static Potential harmonic(double mu) { return {Kind::Harmonic, mu}; }
  bool isLinear() const { return kind == Kind::Linear; }
  bool isHarmonic() const { return kind == Kind::Harmonic; }
};

struct ProcessSpec {
  Potential potential;
  double v = 1.0;
  VelocityChain chain;

  double c() const { return potential.strength; }
  double mu() const { return potential.strength; }
};

// Validates parameters (positivity, v > c for the linear potential).
ProcessSpec makeSpec(Potential potential, double v, VelocityChain chain);
ProcessSpec instantaneousLinear(double omega, double c, double v);
ProcessSpec finiteLinear(double alpha, double beta, double c, double v);
ProcessSpec instantaneousHarmonic(double omega, double mu, double v);
ProcessSpec finiteHarmonic(double alpha, double beta, double mu, double v);
std::string processName(const ProcessSpec& spec);

struct State {
  double x = 0.0;
  int mode = 0;
  bool operator==(const State& o) const { return x == o.x && mode == o.mode; }
};

enum class EventKind { Start, Jump, HitZero };
const char* eventKindName(EventKind kind);

struct Event {
  double t;
  State state;
  EventKind kind;
};

// Velocity -2V'(x) + v*sigma, using V'(0+) = c for the linear kink.
double drift(const ProcessSpec& spec, int mode, double x);
bool isGlued(const ProcessSpec& spec, int mode);
// Clamped closed-form flow started at x0 for a duration t.
double flow(const ProcessSpec& spec, int mode, double x0, double t);
// Time for the unclamped flow to move from x0 to target; +inf if never.
double timeToReach(const ProcessSpec& spec, int mode, double x0, double target);
double hittingTimeZero(const ProcessSpec& spec, int mode, double x0);

struct Trajectory {
  std::vector<Event> events;
  double horizon = 0.0;

  State stateAt(const ProcessSpec& spec, double t) const;
  State finalState(const ProcessSpec& spec) const { return stateAt(spec, horizon); }
};

// Exact event-driven simulator.  advanceTo moves the path to an arbitrary
// later time; the pending jump time is kept so repeated calls are exact.
class PathSimulator {
 public:
  PathSimulator(const ProcessSpec& spec, State init, RngStream& rng, Trajectory* recorder = nullptr);
  void advanceTo(double T);
  const State& state() const { return s_; }
  double time() const { return t_; }
  // Force the next jump at a prescribed time instead of a random one.
  void setNextJump(double t) { nextJump_ = t; }
  // Apply a jump to the given mode now (frozen-mode-sequence tests).
  void jumpTo(int mode);

 private:
  void record(EventKind kind);
  const ProcessSpec& spec_;
  RngStream& rng_;
  Trajectory* rec_;
  State s_;
  double t_ = 0.0;
  double nextJump_ = 0.0;
};

Trajectory simulatePath(const ProcessSpec& spec, State init, double horizon, RngStream& rng);

class StateSampler {
 public:
  virtual ~StateSampler() = default;
  virtual State sample(RngStream& rng) const = 0;
};

struct InitLaw {
  State point;
  const StateSampler* sampler = nullptr;  // null: point mass at `point`

  static InitLaw pointMass(State s) { return {s, nullptr}; }
  static InitLaw fromSampler(const StateSampler& s) { return {State{}, &s}; }
  State draw(RngStream& rng) const { return sampler ? sampler->sample(rng) : point; }
};

struct EnsembleSnapshot {
  double t = 0.0;
  std::vector<State> samples;
  std::uint64_t masterSeed = 0;  // sample i used stream (masterSeed, i)
};

EnsembleSnapshot simulateEnsemble(const ProcessSpec& spec, const InitLaw& init, double t, std::size_t n,
                                  std::uint64_t masterSeed, int threads = 1);
// One pass per replica, recording states at every time in tGrid (sorted).
std::vector<EnsembleSnapshot> simulateEnsembleGrid(const ProcessSpec& spec, const InitLaw& init,
                                                   const std::vector<double>& tGrid, std::size_t n,
                                                   std::uint64_t masterSeed, int threads = 1);

// Observables for occupation averages.
struct AtomIndicator {
  int mode;
};
struct Polynomial {
  std::vector<double> coeffs;  // ascending powers of x
  int mode = -1;               // -1: every mode
};
struct LevelExceedance {
  double level;
  int mode = -1;
};
struct GenericObservable {
  std::function<double(double, int)> f;
};
using Observable = std::variant<AtomIndicator, Polynomial, LevelExceedance, GenericObservable>;

// (1/horizon) * int_0^horizon f(X(s)) ds along the exact path.
double occupationAverage(const ProcessSpec& spec, const Trajectory& traj, const Observable& f);

void writeTrajectoryCsv(std::ostream& os, const ProcessSpec& spec, const Trajectory& traj);
void writeSnapshotCsv(std::ostream& os, const ProcessSpec& spec, const EnsembleSnapshot& snap);

}  // namespace rtp
