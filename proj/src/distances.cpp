#include "rtp/distances.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "rtp/error.hpp"
#include "rtp/format.hpp"

namespace rtp {

EmpiricalMixedMeasure::EmpiricalMixedMeasure(const std::vector<State>& samples, int numModes, double h, double xMax)
    : n_(samples.size()), h_(h), xMax_(xMax) {
  require(h > 0.0 && xMax >= h, ErrorKind::InvalidParameter, "histogram needs h > 0 and xMax >= h");
  require(numModes > 0, ErrorKind::InvalidParameter, "histogram needs at least one mode");
  bins_ = static_cast<int>(std::llround(xMax / h));
  require(std::abs(bins_ * h - xMax) <= 1e-9 * xMax, ErrorKind::InvalidParameter, "xMax must be a multiple of h");
  atoms_.assign(numModes, 0);
  overflow_.assign(numModes, 0);
  hist_.assign(numModes, std::vector<std::uint64_t>(bins_, 0));
  for (const auto& s : samples) {
    require(s.mode >= 0 && s.mode < numModes && s.x >= 0.0, ErrorKind::InvalidParameter, "sample outside the state space");
    if (s.x == 0.0) {
      ++atoms_[s.mode];
    } else if (s.x > xMax_) {
      ++overflow_[s.mode];
    } else {
      // Bin k covers (k h, (k+1) h].
      const int k = std::min(bins_ - 1, static_cast<int>(std::ceil(s.x / h_)) - 1);
      ++hist_[s.mode][std::max(0, k)];
    }
  }
}

std::vector<std::uint64_t> EmpiricalMixedMeasure::cells() const {
  std::vector<std::uint64_t> out;
  out.reserve(numModes() * (bins_ + 2));
  for (int s = 0; s < numModes(); ++s) {
    out.push_back(atoms_[s]);
    out.insert(out.end(), hist_[s].begin(), hist_[s].end());
    out.push_back(overflow_[s]);
  }
  return out;
}

const char* estimatorKindName(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::TvHistogram: return "tvHistogram";
    case EstimatorKind::WassersteinXQuantile: return "wassersteinXQuantile";
    case EstimatorKind::MixedUpper: return "mixedUpper";
    case EstimatorKind::MixedLower: return "mixedLower";
    case EstimatorKind::CouplingMismatch: return "couplingMismatch";
  }
  return "unknown";
}

std::vector<double> analyticCells(const MixedMeasure& measure, int bins, double h, double xMax) {
  std::vector<double> out;
  out.reserve(measure.numModes() * (bins + 2));
  for (int s = 0; s < measure.numModes(); ++s) {
    out.push_back(measure.atom(s));
    double inside = 0.0;
    for (int k = 0; k < bins; ++k) {
      const double m = measure.binMass(k * h, k + 1 == bins ? xMax : (k + 1) * h, s);
      out.push_back(m);
      inside += m;
    }
    out.push_back(std::max(0.0, measure.continuousMass(s) - inside));
  }
  return out;
}

double defaultBinWidth(const MixedMeasure& measure) { return 0.05 * measureScale(measure); }

namespace {

double halfL1(const std::vector<std::uint64_t>& counts, const std::vector<double>& mass, double n) {
  double d = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) d += std::abs(counts[i] / n - mass[i]);
  return 0.5 * d;
}

}  // namespace

DistanceEstimate tvToAnalytic(const std::vector<State>& samples, const MixedMeasure& measure, double h,
                              std::uint64_t bootstrapSeed, int resamples) {
  require(!samples.empty(), ErrorKind::InvalidParameter, "empty snapshot");
  require(h > 0.0, ErrorKind::InvalidParameter, "bin width must be > 0");
  double maxX = 0.0;
  for (const auto& s : samples) maxX = std::max(maxX, s.x);
  maxX = std::min(maxX, measure.supportMax());
  const double xMax = h * std::max(1.0, std::ceil(maxX / h));
  const EmpiricalMixedMeasure emp(samples, measure.numModes(), h, xMax);
  const auto counts = emp.cells();
  const auto mass = analyticCells(measure, emp.numBins(), h, xMax);
  const double n = static_cast<double>(samples.size());
  DistanceEstimate est;
  est.kind = EstimatorKind::TvHistogram;
  est.value = halfL1(counts, mass, n);
  // Multinomial bootstrap by sequential conditional binomials.
  std::vector<double> freq(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) freq[i] = counts[i] / n;
  double s1 = 0.0, s2 = 0.0;
  std::vector<std::uint64_t> draw(counts.size());
  for (int r = 0; r < resamples; ++r) {
    RngStream rng(bootstrapSeed, static_cast<std::uint64_t>(r));
    std::uint64_t left = samples.size();
    double pLeft = 1.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      if (left == 0 || freq[i] == 0.0) {
        draw[i] = 0;
        continue;
      }
      const double p = pLeft > 0.0 ? std::min(1.0, freq[i] / pLeft) : 1.0;
      draw[i] = rng.binomial(left, p);
      left -= draw[i];
      pLeft -= freq[i];
    }
    const double v = halfL1(draw, mass, n);
    s1 += v;
    s2 += v * v;
  }
  if (resamples > 1) {
    const double m = s1 / resamples;
    est.standardError = std::sqrt(std::max(0.0, (s2 - resamples * m * m) / (resamples - 1)));
  }
  return est;
}

double wassersteinQuantile(std::vector<double> a, std::vector<double> b, double p) {
  require(p >= 1.0, ErrorKind::Domain, "Wasserstein order p must be >= 1");
  require(!a.empty() && !b.empty(), ErrorKind::InvalidParameter, "Wasserstein distance needs nonempty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double n = static_cast<double>(a.size()), m = static_cast<double>(b.size());
  double acc = 0.0, u = 0.0;
  std::size_t i = 0, j = 0;
  // Integrate |F_a^{-1}(u) - F_b^{-1}(u)|^p over the merged quantile breakpoints.
  while (i < a.size() && j < b.size()) {
    const double ua = (i + 1) / n, ub = (j + 1) / m;
    const double next = std::min(ua, ub);
    acc += (next - u) * std::pow(std::abs(a[i] - b[j]), p);
    u = next;
    if (ua <= next) ++i;
    if (ub <= next) ++j;
  }
  return std::pow(acc, 1.0 / p);
}

namespace {

struct PairCost {
  double sum = 0.0, sumSq = 0.0;
  std::size_t mismatches = 0, n = 0;
  void add(double dx, bool mismatch, double p) {
    const double c = std::pow(std::abs(dx), p);
    sum += c;
    sumSq += c * c;
    mismatches += mismatch;
    ++n;
  }
  DistanceEstimate estimate(double p, EstimatorKind kind) const {
    const double N = static_cast<double>(n), mean = sum / N, q = mismatches / N;
    const double seMean = std::sqrt(std::max(0.0, sumSq / N - mean * mean) / N);
    DistanceEstimate e;
    e.kind = kind;
    const double root = std::pow(mean, 1.0 / p);
    e.value = root + q;
    const double dRoot = mean > 0.0 ? root / (p * mean) : 0.0;
    e.standardError = dRoot * seMean + std::sqrt(q * (1 - q) / N);
    return e;
  }
};

}  // namespace

DistanceEstimate pairedCouplingCost(const std::vector<State>& a, const std::vector<State>& b, double p) {
  require(p >= 1.0, ErrorKind::Domain, "Wasserstein order p must be >= 1");
  require(!a.empty() && a.size() == b.size(), ErrorKind::InvalidParameter, "paired cost needs equal nonempty samples");
  PairCost pc;
  for (std::size_t i = 0; i < a.size(); ++i) pc.add(a[i].x - b[i].x, a[i].mode != b[i].mode, p);
  return pc.estimate(p, EstimatorKind::MixedUpper);
}

DistanceBracket mixedDistanceBracket(const std::vector<State>& a, const std::vector<State>& b, double p) {
  require(p >= 1.0, ErrorKind::Domain, "Wasserstein order p must be >= 1");
  require(!a.empty() && a.size() == b.size(), ErrorKind::InvalidParameter,
          "mixed distance bracket needs two nonempty samples of equal size");
  DistanceBracket out;
  std::vector<double> xa, xb;
  int modes = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    xa.push_back(a[i].x);
    xb.push_back(b[i].x);
    modes = std::max({modes, a[i].mode + 1, b[i].mode + 1});
  }
  out.lower.kind = EstimatorKind::MixedLower;
  out.lower.value = wassersteinQuantile(xa, xb, p);

  std::vector<std::vector<double>> byA(modes), byB(modes);
  for (const auto& s : a) byA[s.mode].push_back(s.x);
  for (const auto& s : b) byB[s.mode].push_back(s.x);
  PairCost pc;
  std::vector<double> restA, restB;
  for (int s = 0; s < modes; ++s) {
    auto& A = byA[s];
    auto& B = byB[s];
    std::sort(A.begin(), A.end());
    std::sort(B.begin(), B.end());
    const bool aSmall = A.size() <= B.size();
    const auto& S = aSmall ? A : B;
    const auto& L = aSmall ? B : A;
    auto& restL = aSmall ? restB : restA;
    // Match the smaller set to evenly spaced order statistics of the larger one.
    std::vector<char> used(L.size(), 0);
    for (std::size_t k = 0; k < S.size(); ++k) {
      const std::size_t idx = static_cast<std::size_t>((k + 0.5) * L.size() / S.size());
      used[idx] = 1;
      pc.add(S[k] - L[idx], false, p);
    }
    for (std::size_t k = 0; k < L.size(); ++k)
      if (!used[k]) restL.push_back(L[k]);
  }
  std::sort(restA.begin(), restA.end());
  std::sort(restB.begin(), restB.end());
  for (std::size_t k = 0; k < restA.size(); ++k) pc.add(restA[k] - restB[k], true, p);
  out.upper = pc.estimate(p, EstimatorKind::MixedUpper);
  return out;
}

nlohmann::json RateFit::toJson() const {
  nlohmann::json r = nlohmann::json::array();
  for (double v : residuals) r.push_back(num17(v));
  nlohmann::json t = nlohmann::json::array();
  for (double v : times) t.push_back(num17(v));
  return {{"rate", num17(rate)},         {"stderr", num17(stderr_)}, {"intercept", num17(intercept)},
          {"window", {num17(tMin), num17(tMax)}}, {"points_used", pointsUsed}, {"times", t},
          {"residuals", r}};
}

RateFit fitRate(const std::vector<SeriesPoint>& series, double tMin, double tMax, std::optional<double> biasFloor) {
  std::vector<SeriesPoint> pts;
  for (const auto& s : series) {
    if (s.t < tMin || s.t > tMax) continue;
    if (biasFloor && s.value <= *biasFloor + 3 * s.stderr_) continue;
    require(s.value > 0.0, ErrorKind::Domain,
            "nonpositive value at t = " + num17(s.t) + " inside the fit window (bias floor reached?)");
    pts.push_back(s);
  }
  require(pts.size() >= 4, ErrorKind::Domain,
          "rate fit needs at least 4 points above the bias floor in the window, got " + std::to_string(pts.size()));
  bool weighted = true;
  for (const auto& s : pts) weighted = weighted && s.stderr_ > 0.0;
  double W = 0.0, St = 0.0, Sy = 0.0;
  std::vector<double> w(pts.size()), y(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    w[i] = weighted ? std::pow(pts[i].value / pts[i].stderr_, 2) : 1.0;
    y[i] = std::log(pts[i].value);
    W += w[i];
    St += w[i] * pts[i].t;
    Sy += w[i] * y[i];
  }
  const double tb = St / W, yb = Sy / W;
  double Stt = 0.0, Sty = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    Stt += w[i] * (pts[i].t - tb) * (pts[i].t - tb);
    Sty += w[i] * (pts[i].t - tb) * (y[i] - yb);
  }
  require(Stt > 0.0, ErrorKind::Domain, "rate fit needs distinct times");
  const double slope = Sty / Stt;
  RateFit f;
  f.rate = -slope;
  f.intercept = yb - slope * tb;
  f.tMin = tMin;
  f.tMax = tMax;
  f.pointsUsed = static_cast<int>(pts.size());
  double chi2 = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double r = y[i] - (f.intercept + slope * pts[i].t);
    f.residuals.push_back(std::sqrt(w[i]) * r);
    f.times.push_back(pts[i].t);
    chi2 += w[i] * r * r;
  }
  const double scale = chi2 / (pts.size() - 2);
  f.stderr_ = std::sqrt((weighted ? std::max(1.0, scale) : scale) / Stt);
  return f;
}

void writeDecayCsv(std::ostream& os, const std::vector<DecayPoint>& points) {
  os << "t,estimate,stderr,kind\n";
  for (const auto& p : points) os << num17(p.t) << ',' << num17(p.estimate) << ',' << num17(p.stderr_) << ',' << p.kind << '\n';
}

}  // namespace rtp
