// Experiment runner over the rtp C library.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rtp/rtp.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Failure carrying the exit status.
struct RunError : std::runtime_error {
  int code;
  RunError(int c, const std::string& m) : std::runtime_error(m), code(c) {}
};

[[noreturn]] void configError(const std::string& m) { throw RunError(2, m); }

void check(rtp_status s) {
  if (s != RTP_OK) throw RunError(rtp_exit_code(s), std::string(rtp_status_name(s)) + ": " + rtp_last_error());
}

std::string num(double x) {
  char buf[64];
  check(rtp_format_number(x, buf, sizeof buf));
  return buf;
}

struct ProcessDeleter {
  void operator()(rtp_process* p) const { rtp_process_free(p); }
};
struct MeasureDeleter {
  void operator()(rtp_measure* m) const { rtp_measure_free(m); }
};
struct TrajectoryDeleter {
  void operator()(rtp_trajectory* t) const { rtp_trajectory_free(t); }
};
using ProcessPtr = std::unique_ptr<rtp_process, ProcessDeleter>;
using MeasurePtr = std::unique_ptr<rtp_measure, MeasureDeleter>;
using TrajectoryPtr = std::unique_ptr<rtp_trajectory, TrajectoryDeleter>;

std::string takeString(char* s) {
  std::string out(s);
  rtp_string_free(s);
  return out;
}

// Flag values as parsed; unset flags fall back to the config file, then to defaults.
struct Flags {
  std::optional<std::string> process, tGrid, out, config, measure, mode0;
  std::optional<double> omega, alpha, beta, c, mu, v, horizon, binWidth, x0, p, tMin, tMax, tolerance;
  std::optional<long long> n, seed, threads;
};

struct Config {
  std::string experiment;
  std::string process;
  double omega = 1, alpha = 1, beta = 1, c = 1, mu = 1, v = 2;
  long long n = 0;
  std::vector<double> tGrid;
  double horizon = 0;
  long long seed = 1;
  double binWidth = 0;  // 0: default from the measure
  std::string out = "rtp-out";
  long long threads = 1;
  double x0 = 0;
  std::string mode0;
  double p = 1;
  double tMin = 0, tMax = 0;
  double tolerance = 0;
  std::string measure;

  bool linear() const { return process.find("linear") != std::string::npos; }
  bool finite() const { return process.rfind("finite", 0) == 0; }

  json toJson() const {
    json j;
    j["experiment"] = experiment;
    j["process"] = process;
    if (finite()) {
      j["alpha"] = num(alpha);
      j["beta"] = num(beta);
    } else {
      j["omega"] = num(omega);
    }
    if (linear()) j["c"] = num(c);
    else j["mu"] = num(mu);
    j["v"] = num(v);
    j["seed"] = seed;
    j["out"] = out;
    if (experiment == "simulate" || experiment == "tv-decay" || experiment == "wasserstein-decay") {
      j["x0"] = num(x0);
      j["mode0"] = mode0;
      j["n"] = n;
      std::vector<std::string> g;
      for (double t : tGrid) g.push_back(num(t));
      j["t_grid"] = g;
    }
    if (experiment == "simulate") j["horizon"] = num(horizon);
    if (experiment == "tv-decay") j["bin_width"] = binWidth > 0 ? json(num(binWidth)) : json("default");
    if (experiment == "wasserstein-decay") j["p"] = num(p);
    if (experiment == "tv-decay" || experiment == "wasserstein-decay") {
      j["fit_window"] = {num(tMin), num(tMax)};
    }
    if (experiment == "verify-stationarity") {
      j["tolerance"] = num(tolerance);
      j["measure"] = measure.empty() ? json("analytic") : json(measure);
    }
    return j;
  }
};

std::vector<double> parseGrid(const std::string& s) {
  std::vector<double> g;
  auto toD = [&](const std::string& x) {
    try {
      std::size_t pos = 0;
      const double d = std::stod(x, &pos);
      if (pos != x.size()) throw std::invalid_argument(x);
      return d;
    } catch (const std::exception&) {
      configError("t-grid entry '" + x + "' is not a number");
    }
  };
  if (s.find(':') != std::string::npos) {
    // start:stop:step
    std::vector<std::string> parts;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ':')) parts.push_back(part);
    if (parts.size() != 3) configError("t-grid range must be start:stop:step");
    const double a = toD(parts[0]), b = toD(parts[1]), h = toD(parts[2]);
    if (!(h > 0) || b < a) configError("t-grid range requires step > 0 and stop >= start");
    const long long k = static_cast<long long>(std::floor((b - a) / h + 1e-9));
    for (long long i = 0; i <= k; ++i) g.push_back(a + i * h);
  } else {
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ',')) g.push_back(toD(part));
  }
  if (g.empty()) configError("t-grid must not be empty");
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(g[i] >= 0) || !std::isfinite(g[i])) configError("t-grid requires finite times >= 0");
    if (i > 0 && g[i] <= g[i - 1]) configError("t-grid must be strictly increasing");
  }
  return g;
}

double jnum(const json& j, const std::string& key) {
  const auto& x = j.at(key);
  if (x.is_number()) return x.get<double>();
  if (x.is_string()) {
    try {
      return std::stod(x.get<std::string>());
    } catch (const std::exception&) {
    }
  }
  configError("config key '" + key + "' must be a number");
}

long long jint(const json& j, const std::string& key) {
  const double d = jnum(j, key);
  if (d != std::floor(d) || std::abs(d) > 9e15) configError("config key '" + key + "' must be an integer");
  return static_cast<long long>(d);
}

Config resolve(const std::string& experiment, const Flags& f) {
  json file = json::object();
  if (f.config) {
    std::ifstream in(*f.config);
    if (!in) configError("cannot read config file '" + *f.config + "'");
    try {
      file = json::parse(in);
    } catch (const json::exception& e) {
      configError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!file.is_object()) configError("config file must hold a JSON object");
    static const std::vector<std::string> known = {
        "experiment", "process", "omega", "alpha",   "beta",  "c",  "mu",    "v",       "n",         "t-grid",
        "horizon",    "seed",    "bin-width", "out", "threads", "x0", "mode0", "p", "t-min", "t-max", "tolerance",
        "measure"};
    for (auto it = file.begin(); it != file.end(); ++it)
      if (std::find(known.begin(), known.end(), it.key()) == known.end())
        configError("unknown config key '" + it.key() + "'");
    if (file.contains("experiment") && file["experiment"] != experiment)
      configError("config file is for experiment '" + file["experiment"].get<std::string>() + "', not '" +
                  experiment + "'");
  }
  auto pickD = [&](const std::optional<double>& flag, const char* key, double def) {
    if (flag) return *flag;
    if (file.contains(key)) return jnum(file, key);
    return def;
  };
  auto pickI = [&](const std::optional<long long>& flag, const char* key, long long def) {
    if (flag) return *flag;
    if (file.contains(key)) return jint(file, key);
    return def;
  };
  auto pickS = [&](const std::optional<std::string>& flag, const char* key, const std::string& def) {
    if (flag) return *flag;
    if (file.contains(key)) {
      if (!file[key].is_string()) configError(std::string("config key '") + key + "' must be a string");
      return file[key].get<std::string>();
    }
    return def;
  };

  // A measure file under verification fixes the process and its parameters.
  const std::string measureFile = pickS(f.measure, "measure", "");
  json fromMeasure = json::object();
  if (experiment == "verify-stationarity" && !measureFile.empty()) {
    std::ifstream in(measureFile);
    if (!in) configError("cannot read measure file '" + measureFile + "'");
    json m;
    try {
      m = json::parse(in);
    } catch (const json::exception& e) {
      configError(std::string("measure file is not valid JSON: ") + e.what());
    }
    // Accept the runner's own export, which wraps the measure with config and version.
    if (m.is_object() && m.contains("measure") && m["measure"].is_object()) m = json(m["measure"]);
    if (!m.is_object() || !m.contains("process") || !m["process"].is_string() || !m.contains("params") ||
        !m["params"].is_object())
      configError("measure file needs 'process' and 'params'");
    fromMeasure = m["params"];
    fromMeasure["process"] = m["process"];
  }

  Config c;
  c.experiment = experiment;
  const std::string defProcess = experiment == "wasserstein-decay" ? "instantaneous-harmonic"
                                 : experiment == "roots"           ? "finite-linear"
                                                                   : "instantaneous-linear";
  c.process = pickS(f.process, "process", defProcess);
  if (c.process != "instantaneous-linear" && c.process != "finite-linear" && c.process != "instantaneous-harmonic")
    configError("process must be instantaneous-linear, finite-linear or instantaneous-harmonic, got '" + c.process +
                "'");
  c.omega = pickD(f.omega, "omega", 1.0);
  c.alpha = pickD(f.alpha, "alpha", 1.0);
  c.beta = pickD(f.beta, "beta", 1.0);
  c.c = pickD(f.c, "c", 1.0);
  c.mu = pickD(f.mu, "mu", 1.0);
  c.v = pickD(f.v, "v", !c.linear() ? 1.0 : c.finite() ? 3.0 : 2.0);
  if (!fromMeasure.empty()) {
    c.process = fromMeasure["process"].get<std::string>();
    for (auto [key, field] : {std::pair{"omega", &c.omega}, {"alpha", &c.alpha}, {"beta", &c.beta}, {"c", &c.c},
                              {"mu", &c.mu}, {"v", &c.v}})
      if (fromMeasure.contains(key)) *field = jnum(fromMeasure, key);
  }
  c.seed = pickI(f.seed, "seed", 1);
  if (c.seed < 0) configError("seed requires a value >= 0");
  c.threads = pickI(f.threads, "threads", 1);
  if (c.threads < 0) configError("threads requires a value >= 0 (0: all cores)");
  c.out = pickS(f.out, "out", "rtp-out");

  const bool tv = experiment == "tv-decay", w = experiment == "wasserstein-decay", sim = experiment == "simulate";
  c.n = pickI(f.n, "n", sim ? 0 : 100000);
  if (c.n < 0 || ((tv || w) && c.n < 2)) configError("n requires a replica count >= 2");
  std::string grid;
  if (f.tGrid) grid = *f.tGrid;
  else if (file.contains("t-grid")) {
    const auto& g = file["t-grid"];
    if (g.is_string()) grid = g.get<std::string>();
    else if (g.is_array()) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (!g[i].is_number()) configError("t-grid entries must be numbers");
        grid += (i ? "," : "") + num(g[i].get<double>());
      }
    } else configError("t-grid must be a string or an array");
  } else if (tv) grid = "2:12:1";
  else if (w) grid = "1:6:1";
  if (!grid.empty()) c.tGrid = parseGrid(grid);
  c.horizon = pickD(f.horizon, "horizon", 10.0);
  if (!(c.horizon >= 0) || !std::isfinite(c.horizon)) configError("horizon requires a finite value >= 0");
  c.binWidth = pickD(f.binWidth, "bin-width", 0.0);
  if (c.binWidth < 0) configError("bin-width requires a value > 0");
  c.x0 = pickD(f.x0, "x0", w ? 3.0 : 0.0);
  if (!(c.x0 >= 0) || !std::isfinite(c.x0)) configError("x0 requires a finite value >= 0");
  c.mode0 = pickS(f.mode0, "mode0", "+2");
  c.p = pickD(f.p, "p", 1.0);
  if (!(c.p >= 1)) configError("p requires a value >= 1");
  c.tMin = pickD(f.tMin, "t-min", c.tGrid.empty() ? 0.0 : c.tGrid.front());
  c.tMax = pickD(f.tMax, "t-max", c.tGrid.empty() ? 0.0 : c.tGrid.back());
  c.tolerance = pickD(f.tolerance, "tolerance", c.linear() ? 1e-8 : 1e-6);
  if (!(c.tolerance > 0)) configError("tolerance requires a value > 0");
  c.measure = measureFile;
  if (sim && c.n > 0 && c.tGrid.empty()) configError("simulate with n > 0 requires a t-grid");
  return c;
}

ProcessPtr makeProcess(const Config& c) {
  rtp_process_params p{};
  p.process = c.process.c_str();
  p.omega = c.omega;
  p.alpha = c.alpha;
  p.beta = c.beta;
  p.c = c.c;
  p.mu = c.mu;
  p.v = c.v;
  rtp_process* out = nullptr;
  const rtp_status s = rtp_process_create(&p, &out);
  // Parameter constraints are configuration errors.
  if (s != RTP_OK) configError(rtp_last_error());
  return ProcessPtr(out);
}

int modeIndex(const rtp_process* p, const std::string& label) {
  const int m = rtp_process_mode_index(p, label.c_str());
  if (m < 0) configError("mode0 '" + label + "' is not a mode of " + rtp_process_name(p));
  return m;
}

// Artifacts are assembled in memory and written only after the experiment succeeds.
class Artifacts {
 public:
  Artifacts(fs::path dir, json config) : dir_(std::move(dir)), config_(std::move(config)) {}

  void addJson(const std::string& name, json body) {
    body["config"] = config_;
    body["version"] = rtp_version();
    files_.emplace_back(name, body.dump(2) + "\n");
  }
  // CSV with provenance comment lines ahead of the header.
  void addCsv(const std::string& name, const std::string& body) {
    std::string s = "# rtpctl " + std::string(rtp_version()) + "\n# config " + config_.dump() + "\n" + body;
    files_.emplace_back(name, std::move(s));
  }

  void write() {
    std::vector<fs::path> written;
    try {
      std::error_code ec;
      fs::create_directories(dir_, ec);
      if (ec) throw RunError(2, "cannot create output directory '" + dir_.string() + "': " + ec.message());
      for (const auto& [name, content] : files_) {
        const fs::path path = dir_ / name;
        std::ofstream os(path, std::ios::binary);
        if (!os) throw RunError(2, "cannot write '" + path.string() + "'");
        written.push_back(path);
        os << content;
        os.close();
        if (!os) throw RunError(2, "cannot write '" + path.string() + "'");
      }
    } catch (...) {
      std::error_code ec;
      for (const auto& p : written) fs::remove(p, ec);
      throw;
    }
  }

  const std::vector<std::pair<std::string, std::string>>& files() const { return files_; }

 private:
  fs::path dir_;
  json config_;
  std::vector<std::pair<std::string, std::string>> files_;
};

json boundsJson(const rtp_decay_bounds& b) {
  return {{"lambda_Q", num(b.lambda_q)},
          {"I", num(b.I)},
          {"R", num(b.R)},
          {"r", num(b.r)},
          {"lower_rate", num(b.lower_rate)},
          {"lower_half_min", num(b.lower_half_min)},
          {"lower_stated", num(b.lower_stated)},
          {"upper_rate_exact", num(b.upper_rate_exact)},
          {"upper_rate_stated", num(b.upper_rate_stated)}};
}

json fitJson(const std::vector<double>& t, const std::vector<double>& v, const std::vector<double>& se, double tMin,
             double tMax, double floor) {
  rtp_rate_fit f{};
  const rtp_status s = rtp_fit_rate(t.data(), v.data(), se.data(), t.size(), tMin, tMax, floor, &f);
  if (s != RTP_OK) return {{"error", rtp_last_error()}};
  return {{"rate", num(f.rate)},       {"intercept", num(f.intercept)}, {"stderr", num(f.std_error)},
          {"t_min", num(f.t_min)},     {"t_max", num(f.t_max)},         {"points_used", f.points_used}};
}

void runSimulate(const Config& c, const rtp_process* p, Artifacts& art) {
  const rtp_state init{c.x0, modeIndex(p, c.mode0)};
  rtp_trajectory* raw = nullptr;
  check(rtp_trajectory_simulate(p, init, c.horizon, static_cast<uint64_t>(c.seed), &raw));
  TrajectoryPtr tr(raw);
  std::ostringstream os;
  os << "t,x,sigma,event_kind\n";
  const std::size_t ne = rtp_trajectory_num_events(tr.get());
  static const char* kinds[] = {"start", "jump", "hitZero"};
  for (std::size_t i = 0; i < ne; ++i) {
    double t;
    rtp_state s;
    int kind;
    check(rtp_trajectory_event(tr.get(), i, &t, &s, &kind));
    os << num(t) << ',' << num(s.x) << ',' << rtp_process_mode_label(p, s.mode) << ',' << kinds[kind] << '\n';
  }
  rtp_state end;
  check(rtp_trajectory_state_at(p, tr.get(), c.horizon, &end));
  os << num(c.horizon) << ',' << num(end.x) << ',' << rtp_process_mode_label(p, end.mode) << ",end\n";
  art.addCsv("trajectory.csv", os.str());
  json summary = {{"events", ne},
                  {"final_state", {{"x", num(end.x)}, {"sigma", rtp_process_mode_label(p, end.mode)}}}};
  if (c.n > 0) {
    std::vector<rtp_state> states(c.tGrid.size() * static_cast<std::size_t>(c.n));
    check(rtp_simulate_ensemble_grid(p, init, c.tGrid.data(), c.tGrid.size(), static_cast<std::size_t>(c.n),
                                     static_cast<uint64_t>(c.seed), static_cast<int>(c.threads), states.data()));
    std::ostringstream es;
    es << "t,replica,x,sigma\n";
    for (std::size_t k = 0; k < c.tGrid.size(); ++k)
      for (long long i = 0; i < c.n; ++i) {
        const auto& s = states[k * c.n + i];
        es << num(c.tGrid[k]) << ',' << i << ',' << num(s.x) << ',' << rtp_process_mode_label(p, s.mode) << '\n';
      }
    art.addCsv("ensemble.csv", es.str());
    summary["ensemble_rows"] = states.size();
  }
  art.addJson("simulate.json", summary);
}

void runInvariant(const Config&, const rtp_process* p, Artifacts& art) {
  rtp_measure* raw = nullptr;
  check(rtp_measure_create(p, &raw));
  MeasurePtr m(raw);
  char* js = nullptr;
  check(rtp_measure_to_json(m.get(), &js));
  json measure = json::parse(takeString(js));
  double supportMax, scale;
  check(rtp_measure_support_max(m.get(), &supportMax));
  check(rtp_measure_scale(m.get(), &scale));
  const int modes = rtp_process_num_modes(p);
  // Grid over the support, or 15 tail lengths for unbounded support; endpoints excluded.
  const double L = std::isfinite(supportMax) ? supportMax : 15.0 * scale;
  const int K = 400;
  std::ostringstream os;
  os << "x";
  for (int s = 0; s < modes; ++s) os << ",density_" << rtp_process_mode_label(p, s);
  os << ",marginal\n";
  for (int k = 1; k < K; ++k) {
    const double x = L * k / K;
    double total = 0.0;
    os << num(x);
    for (int s = 0; s < modes; ++s) {
      double d;
      check(rtp_measure_density(m.get(), x, s, &d));
      total += d;
      os << ',' << num(d);
    }
    os << ',' << num(total) << '\n';
  }
  art.addJson("measure.json", {{"measure", measure}});
  art.addCsv("density.csv", os.str());
}

int runVerify(const Config& c, const rtp_process* p, Artifacts& art) {
  MeasurePtr m;
  ProcessPtr fileProcess;
  const rtp_process* proc = p;
  if (!c.measure.empty()) {
    std::ifstream in(c.measure);
    if (!in) configError("cannot read measure file '" + c.measure + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    try {
      const json j = json::parse(text);
      if (j.is_object() && j.contains("measure") && j["measure"].is_object()) text = j["measure"].dump();
    } catch (const json::exception&) {
      // Reported by the library below.
    }
    rtp_measure* raw = nullptr;
    const rtp_status s = rtp_measure_from_json(text.c_str(), &raw);
    if (s != RTP_OK) configError(rtp_last_error());
    m.reset(raw);
    rtp_process* rp = nullptr;
    check(rtp_measure_process(m.get(), &rp));
    fileProcess.reset(rp);
    proc = fileProcess.get();
  } else {
    rtp_measure* raw = nullptr;
    check(rtp_measure_create(p, &raw));
    m.reset(raw);
  }
  std::vector<rtp_residual> res(20);
  std::size_t count = 0;
  check(rtp_stationarity_residuals(m.get(), proc, res.data(), res.size(), &count));
  if (count > res.size()) {
    res.resize(count);
    check(rtp_stationarity_residuals(m.get(), proc, res.data(), res.size(), &count));
  }
  std::ostringstream os;
  os << "test_function,residual,error_estimate\n";
  double worst = 0.0;
  std::string worstName;
  for (std::size_t i = 0; i < count; ++i) {
    os << res[i].name << ',' << num(res[i].value) << ',' << num(res[i].error_estimate) << '\n';
    if (!(std::abs(res[i].value) <= worst)) {
      worst = std::abs(res[i].value);
      worstName = res[i].name;
    }
  }
  const bool pass = worst <= c.tolerance;
  art.addCsv("residuals.csv", os.str());
  art.addJson("verdict.json", {{"process", rtp_process_name(proc)},
                               {"max_abs_residual", num(worst)},
                               {"worst_test_function", worstName},
                               {"tolerance", num(c.tolerance)},
                               {"pass", pass}});
  std::cout << (pass ? "PASS" : "FAIL") << " max |residual| = " << num(worst) << " (" << worstName
            << "), tolerance " << num(c.tolerance) << '\n';
  return pass ? 0 : 3;
}

void runTvDecay(const Config& c, const rtp_process* p, Artifacts& art) {
  const rtp_state init{c.x0, modeIndex(p, c.mode0)};
  std::vector<rtp_tv_point> pts(c.tGrid.size());
  check(rtp_tv_decay(p, init, c.tGrid.data(), c.tGrid.size(), static_cast<std::size_t>(c.n),
                     static_cast<uint64_t>(c.seed), static_cast<int>(c.threads), c.binWidth, pts.data()));
  std::ostringstream os;
  os << "t,estimate,stderr,kind\n";
  std::vector<double> t, mis, misSe, hist, histSe;
  for (const auto& q : pts) {
    os << num(q.t) << ',' << num(q.mismatch) << ',' << num(q.mismatch_se) << ",couplingMismatch\n";
    os << num(q.t) << ',' << num(q.meeting_bound) << ',' << num(q.meeting_bound_se) << ",meetingTimeBound\n";
    os << num(q.t) << ',' << num(q.histogram) << ',' << num(q.histogram_se) << ",tvHistogram\n";
    t.push_back(q.t);
    mis.push_back(q.mismatch);
    misSe.push_back(q.mismatch_se);
    hist.push_back(q.histogram);
    histSe.push_back(q.histogram_se);
  }
  rtp_decay_bounds b{};
  check(rtp_decay_bounds_compute(p, &b));
  art.addCsv("tv_decay.csv", os.str());
  art.addJson("fit.json", {{"coupling_mismatch_fit", fitJson(t, mis, misSe, c.tMin, c.tMax, NAN)},
                           {"tv_histogram_fit", fitJson(t, hist, histSe, c.tMin, c.tMax, pts.front().histogram_floor)},
                           {"tv_histogram_bias_floor", num(pts.front().histogram_floor)},
                           {"theta", num(pts.front().theta)},
                           {"decay_bounds", boundsJson(b)}});
}

void runWassersteinDecay(const Config& c, const rtp_process* p, Artifacts& art) {
  const rtp_state init{c.x0, modeIndex(p, c.mode0)};
  std::vector<rtp_wasserstein_point> pts(c.tGrid.size());
  check(rtp_wasserstein_decay(p, init, c.tGrid.data(), c.tGrid.size(), static_cast<std::size_t>(c.n),
                              static_cast<uint64_t>(c.seed), static_cast<int>(c.threads), c.p, pts.data()));
  std::ostringstream os;
  os << "t,estimate,stderr,kind\n";
  std::vector<double> t, up, upSe, lo, zero;
  for (const auto& q : pts) {
    const double se = q.upper == q.upper_paired ? q.upper_paired_se : 0.0;
    os << num(q.t) << ',' << num(q.upper) << ',' << num(se) << ",mixedUpper\n";
    os << num(q.t) << ',' << num(q.upper_paired) << ',' << num(q.upper_paired_se) << ",mixedUpperPaired\n";
    os << num(q.t) << ',' << num(q.upper_greedy) << ",0,mixedUpperGreedy\n";
    os << num(q.t) << ',' << num(q.lower) << ",0,mixedLower\n";
    t.push_back(q.t);
    up.push_back(q.upper);
    upSe.push_back(se);
    lo.push_back(q.lower);
    zero.push_back(0.0);
  }
  json bounds;
  if (c.linear()) {
    rtp_decay_bounds b{};
    check(rtp_decay_bounds_compute(p, &b));
    bounds = boundsJson(b);
  } else {
    rtp_wasserstein_rate w{};
    check(rtp_wasserstein_rate_compute(c.omega, c.mu, c.p, std::numeric_limits<double>::infinity(), &w));
    bounds = {{"contraction_rate", num(w.contraction)},
              {"rate", num(w.rate)},
              {"limit_rate", num(w.limit_rate)},
              {"min_omega_mu", num(std::min(c.omega, c.mu))}};
  }
  art.addCsv("wasserstein_decay.csv", os.str());
  art.addJson("fit.json", {{"mixed_upper_fit", fitJson(t, up, upSe, c.tMin, c.tMax, NAN)},
                           {"mixed_lower_fit", fitJson(t, lo, zero, c.tMin, c.tMax, NAN)},
                           {"analytic_bounds", bounds}});
}

void runRates(const Config& c, const rtp_process* p, Artifacts& art) {
  std::ostringstream lam;
  lam << "u,Lambda,Lambda_derivative\n";
  for (int k = -20; k <= 20; ++k) {
    const double u = 0.25 * k;
    double v, d;
    check(rtp_chernoff_lambda(p, u, &v, &d));
    lam << num(u) << ',' << num(v) << ',' << num(d) << '\n';
  }
  std::ostringstream rf;
  rf << "R,I,maximizer" << (c.finite() ? ",lezaud" : "") << '\n';
  for (int k = 0; k <= 20; ++k) {
    const double R = 0.05 * k;
    double v, u;
    check(rtp_rate_function(p, R, &v, &u));
    rf << num(R) << ',' << num(v) << ',' << num(u);
    if (c.finite()) {
      double l;
      check(rtp_lezaud_bound(c.alpha, c.beta, R, &l));
      rf << ',' << num(l);
    }
    rf << '\n';
  }
  art.addCsv("lambda.csv", lam.str());
  art.addCsv("rate_function.csv", rf.str());
  json body;
  if (c.linear()) {
    rtp_decay_bounds b{};
    check(rtp_decay_bounds_compute(p, &b));
    std::ostringstream tb;
    tb << "quantity,value\n";
    const std::pair<const char*, double> rows[] = {
        {"lambda_Q", b.lambda_q},         {"I", b.I},
        {"R", b.R},                       {"r", b.r},
        {"lower_rate", b.lower_rate},     {"lower_half_min", b.lower_half_min},
        {"lower_stated", b.lower_stated}, {"upper_rate_exact", b.upper_rate_exact},
        {"upper_rate_stated", b.upper_rate_stated}};
    for (const auto& [name, value] : rows) tb << name << ',' << num(value) << '\n';
    art.addCsv("decay_bounds.csv", tb.str());
    body["decay_bounds"] = boundsJson(b);
    double dI;
    check(rtp_rate_function_derivative(p, b.R, &dI));
    body["I_derivative_at_R"] = num(dI);
    std::cout << tb.str();
  } else {
    rtp_wasserstein_rate w{};
    check(rtp_wasserstein_rate_compute(c.omega, c.mu, 1.0, std::numeric_limits<double>::infinity(), &w));
    body["wasserstein_rate_p1"] = {{"contraction", num(w.contraction)}, {"limit_rate", num(w.limit_rate)}};
  }
  double gap;
  check(rtp_process_spectral_gap(p, &gap));
  body["spectral_gap"] = num(gap);
  art.addJson("rates.json", body);
}

void runRoots(const Config& c, const rtp_process*, Artifacts& art) {
  if (c.process != "finite-linear") configError("roots requires the finite-linear process");
  rtp_finite_roots r{};
  check(rtp_finite_roots_compute(c.alpha, c.beta, c.c, c.v, &r));
  auto vec = [](const double* a) {
    std::vector<std::string> out;
    for (int i = 0; i < 6; ++i) out.push_back(num(a[i]));
    return out;
  };
  json body = {{"modes", {"+2", "+1", "0pm", "00", "-1", "-2"}},
               {"zeta2", num(r.zeta2)},
               {"eigenvector_zeta2", vec(r.a2)},
               {"residual_zeta2", num(r.residual2)},
               {"P2_at_zeta2", num(r.p2_at_zeta2)},
               {"has_zeta3", r.has_zeta3 != 0}};
  if (r.has_zeta3) {
    body["zeta3"] = num(r.zeta3);
    body["eigenvector_zeta3"] = vec(r.a3);
    body["residual_zeta3"] = num(r.residual3);
    body["P3_at_zeta3"] = num(r.p3_at_zeta3);
  }
  rtp_upper_rate up{};
  check(rtp_upper_rate_finite(c.alpha, c.beta, c.c, c.v, &up));
  body["upper_rate"] = {{"exact", num(up.exact)}, {"stated", num(up.stated)}, {"ratio", num(up.ratio)}};
  art.addJson("roots.json", body);
  std::cout << "zeta2 = " << num(r.zeta2);
  if (r.has_zeta3) std::cout << ", zeta3 = " << num(r.zeta3);
  std::cout << '\n';
}

void addFlags(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "JSON config file; flags override its keys");
  sub->add_option("--process", f.process, "instantaneous-linear | finite-linear | instantaneous-harmonic");
  sub->add_option("--omega", f.omega, "tumble rate (instantaneous)");
  sub->add_option("--alpha", f.alpha, "tumble rate (finite)");
  sub->add_option("--beta", f.beta, "tumble end rate (finite)");
  sub->add_option("--c", f.c, "linear potential slope");
  sub->add_option("--mu", f.mu, "harmonic potential stiffness");
  sub->add_option("--v", f.v, "propulsion speed");
  sub->add_option("--n", f.n, "replica count");
  sub->add_option("--t-grid", f.tGrid, "times: a,b,c or start:stop:step");
  sub->add_option("--horizon", f.horizon, "path horizon");
  sub->add_option("--seed", f.seed, "master seed");
  sub->add_option("--bin-width", f.binWidth, "histogram bin width");
  sub->add_option("--out", f.out, "output directory");
  sub->add_option("--threads", f.threads, "worker threads (0: all cores)");
  sub->add_option("--x0", f.x0, "initial distance");
  sub->add_option("--mode0", f.mode0, "initial mode label");
  sub->add_option("--p", f.p, "Wasserstein order");
  sub->add_option("--t-min", f.tMin, "fit window start");
  sub->add_option("--t-max", f.tMax, "fit window end");
  sub->add_option("--tolerance", f.tolerance, "stationarity tolerance");
  sub->add_option("--measure", f.measure, "measure JSON file to verify");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Run-and-tumble pair experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(rtp_version()));
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"simulate", "exact path and optional ensemble snapshots"},
      {"invariant", "invariant measure JSON and density grid"},
      {"verify-stationarity", "generator residuals of a measure"},
      {"tv-decay", "total variation decay curve and rate fit"},
      {"wasserstein-decay", "mixed Wasserstein decay curve and rate fit"},
      {"rates", "Chernoff eigenvalue, rate function and decay bounds"},
      {"roots", "finite-tumble roots and eigenvectors"}};
  Flags flags;
  std::vector<CLI::App*> subs;
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    addFlags(sub, flags);
    subs.push_back(sub);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int r = app.exit(e);
    return r == 0 ? 0 : 2;
  }
  std::string experiment;
  for (auto* s : subs)
    if (s->parsed()) experiment = s->get_name();

  try {
    const Config cfg = resolve(experiment, flags);
    const ProcessPtr proc = makeProcess(cfg);
    Artifacts art(cfg.out, cfg.toJson());
    int status = 0;
    if (experiment == "simulate") runSimulate(cfg, proc.get(), art);
    else if (experiment == "invariant") runInvariant(cfg, proc.get(), art);
    else if (experiment == "verify-stationarity") status = runVerify(cfg, proc.get(), art);
    else if (experiment == "tv-decay") runTvDecay(cfg, proc.get(), art);
    else if (experiment == "wasserstein-decay") runWassersteinDecay(cfg, proc.get(), art);
    else if (experiment == "rates") runRates(cfg, proc.get(), art);
    else if (experiment == "roots") runRoots(cfg, proc.get(), art);
    art.write();
    for (const auto& f : art.files()) std::cerr << "wrote " << (fs::path(cfg.out) / f.first).string() << '\n';
    return status;
  } catch (const RunError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
}
