#include "rtp/rtp.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rtp/couplings.hpp"
#include "rtp/distances.hpp"
#include "rtp/error.hpp"
#include "rtp/format.hpp"
#include "rtp/invariant.hpp"
#include "rtp/parallel.hpp"
#include "rtp/rates.hpp"

#ifndef RTP_VERSION
#define RTP_VERSION "0.0.0"
#endif

struct rtp_process {
  rtp::ProcessSpec spec;
  std::string name;
  std::vector<std::string> labels;
};

struct rtp_measure {
  std::unique_ptr<rtp::MixedMeasure> measure;
  nlohmann::json json;  // cached export, carries the process parameters
};

struct rtp_trajectory {
  rtp::Trajectory traj;
};

namespace {

thread_local std::string lastError;

rtp_status statusFor(rtp::ErrorKind kind) {
  using rtp::ErrorKind;
  switch (kind) {
    case ErrorKind::InvalidParameter: return RTP_ERR_INVALID_PARAMETER;
    case ErrorKind::Domain: return RTP_ERR_DOMAIN;
    case ErrorKind::PoleGuard: return RTP_ERR_POLE_GUARD;
    case ErrorKind::NonConvergence: return RTP_ERR_NON_CONVERGENCE;
    case ErrorKind::Numeric: return RTP_ERR_NUMERIC;
    case ErrorKind::Verification: return RTP_ERR_VERIFICATION;
    case ErrorKind::Config: return RTP_ERR_CONFIG;
    case ErrorKind::Io: return RTP_ERR_IO;
  }
  return RTP_ERR_INTERNAL;
}

// Runs fn, translating exceptions into status codes and the thread-local message.
template <class Fn>
rtp_status guarded(Fn&& fn) {
  try {
    fn();
    lastError.clear();
    return RTP_OK;
  } catch (const rtp::Error& e) {
    lastError = e.what();
    return statusFor(e.kind());
  } catch (const nlohmann::json::exception& e) {
    lastError = std::string("malformed JSON: ") + e.what();
    return RTP_ERR_CONFIG;
  } catch (const std::bad_alloc&) {
    lastError = "out of memory";
    return RTP_ERR_INTERNAL;
  } catch (const std::exception& e) {
    lastError = e.what();
    return RTP_ERR_INTERNAL;
  }
}

void needPtr(const void* p, const char* what) {
  rtp::require(p != nullptr, rtp::ErrorKind::InvalidParameter, std::string(what) + " must not be null");
}

char* dupString(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

rtp::State toState(const rtp_state& s) { return {s.x, s.mode}; }
rtp_state fromState(const rtp::State& s) { return {s.x, s.mode}; }

void checkMode(const rtp_process* p, int mode) {
  rtp::require(mode >= 0 && mode < p->spec.chain.size(), rtp::ErrorKind::InvalidParameter, "mode index out of range");
}

void checkInit(const rtp_process* p, const rtp_state& s) {
  checkMode(p, s.mode);
  rtp::require(std::isfinite(s.x) && s.x >= 0.0, rtp::ErrorKind::InvalidParameter, "initial position requires x >= 0");
}

std::vector<double> gridOf(const double* tgrid, size_t nt) {
  needPtr(tgrid, "time grid");
  rtp::require(nt > 0, rtp::ErrorKind::InvalidParameter, "time grid must not be empty");
  return std::vector<double>(tgrid, tgrid + nt);
}

rtp_process* wrap(rtp::ProcessSpec spec) {
  auto* p = new rtp_process{std::move(spec), {}, {}};
  p->name = rtp::processName(p->spec);
  for (const auto& m : p->spec.chain.modes()) p->labels.push_back(m.label());
  return p;
}

rtp_measure* wrapMeasure(std::unique_ptr<rtp::MixedMeasure> m) {
  auto* out = new rtp_measure{std::move(m), {}};
  out->json = out->measure->toJson();
  return out;
}

}  // namespace

extern "C" {

const char* rtp_version(void) { return RTP_VERSION; }

const char* rtp_last_error(void) { return lastError.c_str(); }

const char* rtp_status_name(rtp_status status) {
  switch (status) {
    case RTP_OK: return "ok";
    case RTP_ERR_INVALID_PARAMETER: return "invalid-parameter";
    case RTP_ERR_DOMAIN: return "domain";
    case RTP_ERR_POLE_GUARD: return "pole-guard";
    case RTP_ERR_NON_CONVERGENCE: return "non-convergence";
    case RTP_ERR_NUMERIC: return "numeric";
    case RTP_ERR_VERIFICATION: return "verification";
    case RTP_ERR_CONFIG: return "config";
    case RTP_ERR_IO: return "io";
    case RTP_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

int rtp_exit_code(rtp_status status) {
  switch (status) {
    case RTP_OK: return 0;
    case RTP_ERR_VERIFICATION: return 3;
    case RTP_ERR_NON_CONVERGENCE:
    case RTP_ERR_NUMERIC:
    case RTP_ERR_INTERNAL: return 4;
    default: return 2;
  }
}

void rtp_string_free(char* s) { std::free(s); }

rtp_status rtp_format_number(double x, char* buf, size_t cap) {
  return guarded([&] {
    needPtr(buf, "buffer");
    const std::string s = rtp::num17(x);
    rtp::require(s.size() < cap, rtp::ErrorKind::InvalidParameter, "buffer too small");
    std::memcpy(buf, s.c_str(), s.size() + 1);
  });
}

rtp_status rtp_process_create(const rtp_process_params* params, rtp_process** out) {
  return guarded([&] {
    needPtr(params, "params");
    needPtr(out, "out");
    *out = nullptr;
    rtp::require(params->process != nullptr, rtp::ErrorKind::Config, "process name must not be null");
    const std::string kind = params->process;
    if (kind == "instantaneous-linear")
      *out = wrap(rtp::instantaneousLinear(params->omega, params->c, params->v));
    else if (kind == "finite-linear")
      *out = wrap(rtp::finiteLinear(params->alpha, params->beta, params->c, params->v));
    else if (kind == "instantaneous-harmonic")
      *out = wrap(rtp::instantaneousHarmonic(params->omega, params->mu, params->v));
    else if (kind == "finite-harmonic")
      *out = wrap(rtp::finiteHarmonic(params->alpha, params->beta, params->mu, params->v));
    else
      rtp::fail(rtp::ErrorKind::Config, "unknown process '" + kind + "'");
  });
}

void rtp_process_free(rtp_process* p) { delete p; }

const char* rtp_process_name(const rtp_process* p) { return p ? p->name.c_str() : nullptr; }

int rtp_process_num_modes(const rtp_process* p) { return p ? p->spec.chain.size() : 0; }

const char* rtp_process_mode_label(const rtp_process* p, int mode) {
  if (!p || mode < 0 || mode >= static_cast<int>(p->labels.size())) return nullptr;
  return p->labels[mode].c_str();
}

int rtp_process_mode_velocity(const rtp_process* p, int mode) {
  if (!p || mode < 0 || mode >= p->spec.chain.size()) return 0;
  return p->spec.chain.mode(mode).value;
}

int rtp_process_mode_index(const rtp_process* p, const char* label) {
  if (!p || !label) return -1;
  return p->spec.chain.indexOf(std::string(label));
}

rtp_status rtp_process_spectral_gap(const rtp_process* p, double* out) {
  return guarded([&] {
    needPtr(p, "process");
    needPtr(out, "out");
    *out = rtp::chainSpectrum(p->spec.chain).spectralGap;
  });
}

rtp_status rtp_process_stationary_law(const rtp_process* p, double* out) {
  return guarded([&] {
    needPtr(p, "process");
    needPtr(out, "out");
    const auto pi = rtp::stationaryLawClosedForm(p->spec.chain);
    for (int i = 0; i < pi.size(); ++i) out[i] = pi(i);
  });
}

rtp_status rtp_trajectory_simulate(const rtp_process* p, rtp_state init, double horizon, uint64_t seed,
                                   rtp_trajectory** out) {
  return guarded([&] {
    needPtr(p, "process");
    needPtr(out, "out");
    *out = nullptr;
    checkInit(p, init);
    rtp::require(std::isfinite(horizon) && horizon >= 0.0, rtp::ErrorKind::InvalidParameter,
                 "horizon requires a finite value >= 0");
    rtp::RngStream rng(seed, 0);
    auto tr = std::make_unique<rtp_trajectory>();
    tr->traj = rtp::simulatePath(p->spec, toState(init), horizon, rng);
    *out = tr.release();
  });
}

void rtp_trajectory_free(rtp_trajectory* tr) { delete tr; }

size_t rtp_trajectory_num_events(const rtp_trajectory* tr) { return tr ? tr->traj.events.size() : 0; }

rtp_status rtp_trajectory_event(const rtp_trajectory* tr, size_t i, double* t, rtp_state* state, int* kind) {
  return guarded([&] {
    needPtr(tr, "trajectory");
    rtp::require(i < tr->traj.events.size(), rtp::ErrorKind::InvalidParameter, "event index out of range");
    const auto& e = tr->traj.events[i];
    if (t) *t = e.t;
    if (state) *state = fromState(e.state);
    if (kind) *kind = static_cast<int>(e.kind);
  });
}

rtp_status rtp_trajectory_state_at(const rtp_process* p, const rtp_trajectory* tr, double t, rtp_state* out) {
  return guarded([&] {
    needPtr(p, "process");
    needPtr(tr, "trajectory");
    needPtr(out, "out");
    rtp::require(t >= 0.0 && t <= tr->traj.horizon, rtp::ErrorKind::InvalidParameter, "time outside the path");
    *out = fromState(tr->traj.stateAt(p->spec, t));
  });
}

rtp_status rtp_trajectory_csv(const rtp_process* p, const rtp_trajectory* tr, char** out) {
  return guarded([&] {
    needPtr(p, "process");
    needPtr(tr, "trajectory");
    needPtr(out, "out");
    std::ostringstream os;
    rtp::writeTrajectoryCsv(os, p->spec, tr->traj);
    *out = dupString(os.str());
  });
}

rtp_status rtp_simulate_ensemble_grid(const rtp_process* p, rtp_state init, const double* tgrid, size_t nt,
                                      size_t n, uint64_t seed, int threads, rtp_state* out) {
  return guarded([&] {
    needPtr(p, "process");
    needPtr(out, "out");
    checkInit(p, init);
    const auto grid = gridOf(tgrid, nt);
    const auto snaps = rtp::simulateEnsembleGrid(p->spec, rtp::InitLaw::pointMass(toState(init)), grid, n, seed,
                                                 threads);
    for (size_t k = 0; k < nt; ++k)
      for (size_t i = 0; i < n; ++i) out[k * n + i] = fromState(snaps[k].samples[i]);
  });
}

rtp_status rtp_measure_create(const rtp_process* p, rtp_measure** out) {
  return guarded([&] {
    needPtr(p, "process");
    needPtr(out, "out");
    *out = nullptr;
    *out = wrapMeasure(rtp::invariantFor(p->spec));
  });
}

rtp_status rtp_measure_from_json(const char* json, rtp_measure** out) {
  return guarded([&] {
    needPtr(json, "json");
    needPtr(out, "out");
    *out = nullptr;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(json);
    } catch (const nlohmann::json::exception& e) {
      rtp::fail(rtp::ErrorKind::Config, std::string("measure file is not valid JSON: ") + e.what());
    }
    rtp::require(j.is_object() && j.contains("process"), rtp::ErrorKind::Config, "measure file lacks 'process'");
    if (j.at("process") == "instantaneous-harmonic") {
      const auto& q = j.at("params");
      *out = wrapMeasure(std::make_unique<rtp::HarmonicInvariant>(
          rtp::parseNumber(q.at("omega")), rtp::parseNumber(q.at("mu")), rtp::parseNumber(q.at("v"))));
      return;
    }
    auto m = std::make_unique<rtp::ExponentialMixtureMeasure>(rtp::mixtureFromJson(j));
    auto* w = new rtp_measure{std::move(m), {}};
    w->json = w->measure->toJson();
    *out = w;
  });
}

void rtp_measure_free(rtp_measure* m) { delete m; }

rtp_status rtp_measure_to_json(const rtp_measure* m, char** out) {
  return guarded([&] {
    needPtr(m, "measure");
    needPtr(out, "out");
    *out = dupString(m->json.dump(2));
  });
}

rtp_status rtp_measure_process(const rtp_measure* m, rtp_process** out) {
  return guarded([&] {
    needPtr(m, "measure");
    needPtr(out, "out");
    *out = nullptr;
    const std::string process = m->json.at("process").get<std::string>();
    const auto& q = m->json.at("params");
    auto num = [&](const char* key) { return rtp::parseNumber(q.at(key)); };
    if (process == "instantaneous-linear")
      *out = wrap(rtp::instantaneousLinear(num("omega"), num("c"), num("v")));
    else if (process == "finite-linear")
      *out = wrap(rtp::finiteLinear(num("alpha"), num("beta"), num("c"), num("v")));
    else if (process == "instantaneous-harmonic")
      *out = wrap(rtp::instantaneousHarmonic(num("omega"), num("mu"), num("v")));
    else
      rtp::fail(rtp::ErrorKind::Config, "measure has unsupported process '" + process + "'");
  });
}

int rtp_measure_num_modes(const rtp_measure* m) { return m ? m->measure->numModes() : 0; }

rtp_status rtp_measure_atom(const rtp_measure* m, int mode, double* out) {
  return guarded([&] {
    needPtr(m, "measure");
    needPtr(out, "out");
    rtp::require(mode >= 0 && mode < m->measure->numModes(), rtp::ErrorKind::InvalidParameter,
                 "mode index out of range");
    *out = m->measure->atom(mode);
  });
}

rtp_status rtp_measure_density(const rtp_measure* m, double x, int mode, double* out) {
  return guarded([&] {
    needPtr(m, "measure");
    needPtr(out, "out");
    rtp::require(mode >= 0 && mode < m->measure->numModes(), rtp::ErrorKind::InvalidParameter,
                 "mode index out of range");
    rtp::require(x > 0.0, rtp::ErrorKind::Domain, "density requires x > 0");
    *out = m->measure->density(x, mode);
  });
}

rtp_status rtp_measure_tail(const rtp_measure* m, double x, double* out) {
  return guarded([&] {
    needPtr(m, "measure");
    needPtr(out, "out");
    *out = m->measure->tail(x);
  });
}

rtp_status rtp_measure_support_max(const rtp_measure* m, double* out) {
  return guarded([&] {
    needPtr(m, "measure");
    needPtr(out, "out");
    *out = m->measure->supportMax();
  });
}

rtp_status rtp_measure_tail_rate(const rtp_measure* m, double* out) {
  return guarded([&] {
    needPtr(m, "measure");
    needPtr(out, "out");
    *out = m->measure->tailRate();
  });
}

rtp_status rtp_measure_scale(const rtp_measure* m, double* out) {
  return guarded([&] {
    needPtr(m, "measure");
    needPtr(out, "out");
    *out = rtp::measureScale(*m->measure);
  });
}

rtp_status rtp_measure_sample(const rtp_measure* m, size_t n, uint64_t seed, rtp_state* out) {
  return guarded([&] {
    needPtr(m, "measure");
    needPtr(out, "out");
    for (size_t i = 0; i < n; ++i) {
      rtp::RngStream rng(seed, i);
      out[i] = fromState(m->measure->sample(rng));
    }
  });
}

rtp_status rtp_stationarity_residuals(const rtp_measure* m, const rtp_process* p, rtp_residual* out, size_t cap,
                                      size_t* count) {
  return guarded([&] {
    needPtr(m, "measure");
    needPtr(p, "process");
    const auto family = rtp::standardTestFamily(p->spec.chain.size(), rtp::measureScale(*m->measure));
    if (count) *count = family.size();
    for (size_t i = 0; i < family.size() && i < cap; ++i) {
      const auto r = rtp::generatorResidual(*m->measure, p->spec, family[i]);
      auto& o = out[i];
      std::memset(o.name, 0, sizeof o.name);
      std::strncpy(o.name, family[i].name.c_str(), sizeof o.name - 1);
      o.value = r.value;
      o.error_estimate = r.errorEstimate;
    }
  });
}

rtp_status rtp_chernoff_lambda(const rtp_process* p, double u, double* value, double* derivative) {
  return guarded([&] {
    needPtr(p, "process");
    needPtr(value, "value");
    *value = rtp::chernoffLambda(rtp::chernoffProblem(p->spec.chain), u, derivative);
  });
}

rtp_status rtp_rate_function(const rtp_process* p, double R, double* value, double* maximizer) {
  return guarded([&] {
    needPtr(p, "process");
    needPtr(value, "value");
    const auto v = rtp::RateFunction(p->spec.chain).evaluate(R);
    *value = v.value;
    if (maximizer) *maximizer = v.maximizer;
  });
}

rtp_status rtp_rate_function_derivative(const rtp_process* p, double R, double* out) {
  return guarded([&] {
    needPtr(p, "process");
    needPtr(out, "out");
    *out = rtp::RateFunction(p->spec.chain).derivative(R);
  });
}

rtp_status rtp_lezaud_bound(double alpha, double beta, double R, double* out) {
  return guarded([&] {
    needPtr(out, "out");
    *out = rtp::lezaudBound(alpha, beta, R);
  });
}

rtp_status rtp_hitting_exponent(const rtp_process* p, double u, double* out) {
  return guarded([&] {
    needPtr(p, "process");
    needPtr(out, "out");
    rtp::require(p->spec.potential.isLinear(), rtp::ErrorKind::InvalidParameter,
                 "hitting exponent needs a linear potential");
    *out = rtp::hittingLambdaEigen(p->spec, u);
  });
}

rtp_status rtp_decay_bounds_compute(const rtp_process* p, rtp_decay_bounds* out) {
  return guarded([&] {
    needPtr(p, "process");
    needPtr(out, "out");
    const auto b = rtp::decayBounds(p->spec);
    *out = {b.lambdaQ,     b.I,           b.R, b.r, b.lowerRate, b.lowerHalfMin, b.lowerStated, b.upperRateExact,
            b.upperRateStated};
  });
}

rtp_status rtp_wasserstein_rate_compute(double omega, double mu, double p, double q, rtp_wasserstein_rate* out) {
  return guarded([&] {
    needPtr(out, "out");
    const auto w = rtp::wassersteinRate(omega, mu, p, q);
    *out = {w.s, w.contraction, w.rate, w.limitRate};
  });
}

rtp_status rtp_finite_roots_compute(double alpha, double beta, double c, double v, rtp_finite_roots* out) {
  return guarded([&] {
    needPtr(out, "out");
    rtp::finiteLinear(alpha, beta, c, v);  // parameter validation
    const auto pp = rtp::p2p3(alpha, beta, c, v);
    rtp_finite_roots r{};
    r.zeta2 = pp.zeta2();
    const auto a2 = rtp::eigenvectorA(r.zeta2, alpha, beta, c, v);
    std::copy(a2.begin(), a2.end(), r.a2);
    r.residual2 = rtp::eigenvectorResidual(r.zeta2, a2, alpha, beta, c, v);
    r.p2_at_zeta2 = pp.evalP2(r.zeta2);
    const auto z3 = pp.zeta3();
    r.has_zeta3 = z3.has_value();
    r.zeta3 = r.p3_at_zeta3 = r.residual3 = std::nan("");
    std::fill(r.a3, r.a3 + 6, std::nan(""));
    if (z3) {
      r.zeta3 = *z3;
      const auto a3 = rtp::eigenvectorA(*z3, alpha, beta, c, v);
      std::copy(a3.begin(), a3.end(), r.a3);
      r.residual3 = rtp::eigenvectorResidual(*z3, a3, alpha, beta, c, v);
      r.p3_at_zeta3 = pp.evalP3(*z3);
    }
    *out = r;
  });
}

rtp_status rtp_upper_rate_finite(double alpha, double beta, double c, double v, rtp_upper_rate* out) {
  return guarded([&] {
    needPtr(out, "out");
    rtp::finiteLinear(alpha, beta, c, v);
    const auto u = rtp::upperRateFinite(alpha, beta, c, v);
    *out = {u.exact, u.stated, u.ratio};
  });
}

rtp_status rtp_tv_decay(const rtp_process* p, rtp_state init, const double* tgrid, size_t nt, size_t n,
                        uint64_t seed, int threads, double bin_width, rtp_tv_point* out) {
  return guarded([&] {
    needPtr(p, "process");
    needPtr(out, "out");
    checkInit(p, init);
    rtp::require(p->spec.potential.isLinear(), rtp::ErrorKind::InvalidParameter,
                 "total variation decay needs a linear potential");
    const auto grid = gridOf(tgrid, nt);
    const auto measure = rtp::invariantFor(p->spec);
    const double h = bin_width > 0.0 ? bin_width : rtp::defaultBinWidth(*measure);
    const auto meet = rtp::meetingTimeTV(p->spec, toState(init), *measure, grid, n, seed, std::nullopt, threads);
    // Independent replicas (seed + 1) for the histogram estimate.
    const auto snaps =
        rtp::simulateEnsembleGrid(p->spec, rtp::InitLaw::pointMass(toState(init)), grid, n, seed + 1, threads);
    std::vector<rtp::State> exact(n);
    for (size_t i = 0; i < n; ++i) {
      rtp::RngStream rng(seed + 2, i);
      exact[i] = measure->sample(rng);
    }
    const double floor = rtp::tvToAnalytic(exact, *measure, h, seed + 3).value;
    for (size_t k = 0; k < nt; ++k) {
      const auto tv = rtp::tvToAnalytic(snaps[k].samples, *measure, h, seed + 4 + k);
      out[k] = {grid[k],          tv.value,           tv.standardError, floor,         meet[k].mismatch,
                meet[k].mismatchSe, meet[k].bound(), meet[k].boundSe(), meet[k].theta};
    }
  });
}

rtp_status rtp_wasserstein_decay(const rtp_process* p, rtp_state init, const double* tgrid, size_t nt, size_t n,
                                 uint64_t seed, int threads, double p_exponent, rtp_wasserstein_point* out) {
  return guarded([&] {
    needPtr(p, "process");
    needPtr(out, "out");
    checkInit(p, init);
    rtp::require(p_exponent >= 1.0, rtp::ErrorKind::Domain, "Wasserstein order requires p >= 1");
    const auto grid = gridOf(tgrid, nt);
    const auto measure = rtp::invariantFor(p->spec);
    const auto snaps = rtp::coupledEnsembleGrid(p->spec, toState(init), *measure, grid, n, seed, threads);
    for (size_t k = 0; k < nt; ++k) {
      const auto br = rtp::mixedDistanceBracket(snaps[k].a, snaps[k].b, p_exponent);
      const auto paired = rtp::pairedCouplingCost(snaps[k].a, snaps[k].b, p_exponent);
      out[k] = {grid[k],      br.lower.value, br.upper.value, paired.value, paired.standardError,
                std::min(br.upper.value, paired.value)};
    }
  });
}

rtp_status rtp_fit_rate(const double* t, const double* value, const double* se, size_t n, double t_min,
                        double t_max, double bias_floor, rtp_rate_fit* out) {
  return guarded([&] {
    needPtr(t, "t");
    needPtr(value, "value");
    needPtr(out, "out");
    std::vector<rtp::SeriesPoint> series(n);
    for (size_t i = 0; i < n; ++i) series[i] = {t[i], value[i], se ? se[i] : 0.0};
    std::optional<double> floor;
    if (!std::isnan(bias_floor)) floor = bias_floor;
    const auto f = rtp::fitRate(series, t_min, t_max, floor);
    *out = {f.rate, f.intercept, f.stderr_, f.tMin, f.tMax, f.pointsUsed};
  });
}

}  // extern "C"
