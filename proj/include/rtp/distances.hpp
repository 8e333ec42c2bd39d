#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rtp/dynamics.hpp"
#include "rtp/invariant.hpp"

namespace rtp {

// Histogram of samples: exact atoms at x = 0, per-mode bins of width h on (0, xMax], overflow beyond xMax.
class EmpiricalMixedMeasure {
 public:
  EmpiricalMixedMeasure(const std::vector<State>& samples, int numModes, double h, double xMax);
  std::size_t n() const { return n_; }
  int numModes() const { return static_cast<int>(atoms_.size()); }
  double binWidth() const { return h_; }
  double xMax() const { return xMax_; }
  int numBins() const { return bins_; }
  std::uint64_t atomCount(int mode) const { return atoms_[mode]; }
  std::uint64_t binCount(int mode, int bin) const { return hist_[mode][bin]; }
  std::uint64_t overflowCount(int mode) const { return overflow_[mode]; }
  // Flattened cell counts: per mode, atom, bins, overflow.
  std::vector<std::uint64_t> cells() const;

 private:
  std::size_t n_ = 0;
  double h_, xMax_;
  int bins_;
  std::vector<std::uint64_t> atoms_, overflow_;
  std::vector<std::vector<std::uint64_t>> hist_;
};

enum class EstimatorKind { TvHistogram, WassersteinXQuantile, MixedUpper, MixedLower, CouplingMismatch };
const char* estimatorKindName(EstimatorKind kind);

struct DistanceEstimate {
  double value = 0.0;
  EstimatorKind kind = EstimatorKind::TvHistogram;
  double standardError = 0.0;
};

// Analytic cell masses matching EmpiricalMixedMeasure::cells().
std::vector<double> analyticCells(const MixedMeasure& measure, int bins, double h, double xMax);
// Default bin width: 0.05 times the natural length scale of the measure.
double defaultBinWidth(const MixedMeasure& measure);

// Half the L1 distance between empirical and analytic cell masses, with a multinomial bootstrap SE.
DistanceEstimate tvToAnalytic(const std::vector<State>& samples, const MixedMeasure& measure, double h,
                              std::uint64_t bootstrapSeed = 1, int resamples = 200);

// p-Wasserstein distance between the x-marginals via the quantile coupling (any sample sizes).
double wassersteinQuantile(std::vector<double> a, std::vector<double> b, double p);

struct DistanceBracket {
  DistanceEstimate lower, upper;
};
// lower: quantile W_p of the x-marginals; upper: cost of an explicit coupling of the two equal-size samples
// (within-mode sorted matching, then the remainder sorted across modes).
DistanceBracket mixedDistanceBracket(const std::vector<State>& a, const std::vector<State>& b, double p);
// Cost (mean |x - x~|^p)^{1/p} + P(sigma != sigma~) of paired samples (a[i], b[i]); delta-method SE.
DistanceEstimate pairedCouplingCost(const std::vector<State>& a, const std::vector<State>& b, double p);

struct SeriesPoint {
  double t, value, stderr_;
};

struct RateFit {
  double rate = 0.0;
  double intercept = 0.0;  // log-value at t = 0
  double stderr_ = 0.0;
  double tMin = 0.0, tMax = 0.0;
  int pointsUsed = 0;
  std::vector<double> residuals;  // weighted log residuals of the used points
  std::vector<double> times;
  nlohmann::json toJson() const;
};

// Weighted least squares of log(value) on t over points in [tMin, tMax]; points within 3 SE of the bias
// floor are excluded first. Weights (value/stderr)^2, or uniform when every stderr is 0.
RateFit fitRate(const std::vector<SeriesPoint>& series, double tMin, double tMax,
                std::optional<double> biasFloor = std::nullopt);

struct DecayPoint {
  double t, estimate, stderr_;
  std::string kind;
};
void writeDecayCsv(std::ostream& os, const std::vector<DecayPoint>& points);

}  // namespace rtp
