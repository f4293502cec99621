#include "gst/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <json.hpp>

#include "gst/acceptance.hpp"
#include "gst/closedloop.hpp"
#include "gst/openloop.hpp"
#include "gst/simulate.hpp"

namespace gst {

namespace {

constexpr double kNominalNocc = 8.8e3;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty() || !std::isfinite(v)) {
    throw UsageError(fmt::format("{}: expected a number, got '{}'", key, text));
  }
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw UsageError(fmt::format("{}: expected a non-negative integer, got '{}'", key, text));
  }
  return v;
}

std::string num(double v) { return fmt::format("{:.17g}", v); }

template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  auto worker = [&](unsigned w) {
    try {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    } catch (...) {
      errors[w] = std::current_exception();
      next = n;
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker, t);
  worker(0);
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

ScenarioSpec scenario_spec(const RunConfig& cfg, double mu, const FieldMode& source, FilterMode mode,
                           std::optional<double> r) {
  ScenarioSpec spec;
  spec.params = cfg.params();
  spec.source = source;
  spec.mu = mu;
  spec.mode = mode;
  spec.r = r;
  spec.alpha_in = cfg.alpha_in;
  spec.drive = cfg.drive;
  return spec;
}

double variance_after(const std::vector<SynVec>& series, Eigen::Index component, std::size_t from) {
  double mean = 0.0;
  double sq = 0.0;
  const double n = static_cast<double>(series.size() - from);
  for (std::size_t k = from; k < series.size(); ++k) mean += series[k](component);
  mean /= n;
  for (std::size_t k = from; k < series.size(); ++k) sq += std::pow(series[k](component) - mean, 2);
  return sq / (n - 1);
}

std::string trajectory_stem(const std::string& out) {
  if (out.empty()) return "trajectory";
  if (out.size() > 4 && out.compare(out.size() - 4, 4, ".csv") == 0) return out.substr(0, out.size() - 4);
  return out;
}

}  // namespace

MemoryParams nominal_params() { return MemoryParams::from_hz(30e3, 1.0, kNominalNocc); }

Vec6 nominal_drive() {
  Vec6 d;
  d << 100, 0, 100, 0, 100, 0;
  return d;
}

Range Range::parse(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(item);
  if (parts.size() != 3) throw UsageError(fmt::format("range '{}' must be start:stop:count", text));
  Range r;
  r.start = parse_double("range start", parts[0]);
  r.stop = parse_double("range stop", parts[1]);
  const std::uint64_t count = parse_u64("range count", parts[2]);
  if (count < 1 || count > 1000000) throw UsageError(fmt::format("range '{}' needs a count >= 1", text));
  r.count = static_cast<int>(count);
  return r;
}

std::vector<double> Range::values() const {
  std::vector<double> v;
  if (count < 1) throw UsageError("range count must be >= 1");
  if (count == 1) return {start};
  for (int i = 0; i < count; ++i) {
    v.push_back(i == count - 1 ? stop : start + (stop - start) * i / (count - 1));
  }
  return v;
}

std::string Range::str() const { return fmt::format("{}:{}:{}", num(start), num(stop), count); }

void RunConfig::set(const std::string& raw_key, const std::string& value) {
  const std::string key = trim(raw_key);
  if (key == "nu_hz") {
    nu_hz = parse_double(key, value);
  } else if (key == "gamma_hz") {
    gamma_hz = parse_double(key, value);
  } else if (key == "n_occ") {
    n_occ = parse_double(key, value);
  } else if (key == "temp_k") {
    temp_k = parse_double(key, value);
  } else if (key == "omega_m_hz") {
    omega_m_hz = parse_double(key, value);
  } else if (key == "alpha_in") {
    alpha_in = parse_double(key, value);
  } else if (key == "mu") {
    mu = parse_double(key, value);
  } else if (key == "mu1") {
    mu1 = parse_double(key, value);
  } else if (key == "r") {
    r = parse_double(key, value);
  } else if (key == "filter_mode") {
    try {
      mode = parse_filter_mode(trim(value));
    } catch (const std::exception&) {
      throw UsageError(fmt::format("filter_mode: expected s1 or s2, got '{}'", value));
    }
  } else if (key == "drive") {
    std::vector<std::string> parts;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) parts.push_back(item);
    if (parts.size() != 6) throw UsageError("drive: expected six comma-separated numbers");
    for (int i = 0; i < 6; ++i) drive(i) = parse_double(key, parts[i]);
  } else if (key == "seed") {
    seed = parse_u64(key, value);
  } else if (key == "dt") {
    dt = parse_double(key, value);
  } else if (key == "duration") {
    duration = parse_double(key, value);
  } else if (key == "ntraj") {
    ntraj = parse_u64(key, value);
  } else {
    throw UsageError(fmt::format("unknown configuration key '{}'", key));
  }
}

double RunConfig::resolved_n_occ() const {
  if (n_occ) return *n_occ;
  if (temp_k && omega_m_hz) return thermal_occupation(*temp_k, kTwoPi * *omega_m_hz);
  return kNominalNocc;
}

MemoryParams RunConfig::params() const { return MemoryParams::from_hz(nu_hz, gamma_hz, resolved_n_occ()); }

void RunConfig::validate() const {
  if (n_occ && (temp_k || omega_m_hz)) {
    throw UsageError("n_occ: give either n_occ or temp_k with omega_m_hz, not both");
  }
  if (temp_k.has_value() != omega_m_hz.has_value()) {
    throw UsageError(temp_k ? "omega_m_hz: required together with temp_k" : "temp_k: required together with omega_m_hz");
  }
  if (!(nu_hz > 0)) throw UsageError("nu_hz: must be > 0");
  if (!(gamma_hz >= 0)) throw UsageError("gamma_hz: must be >= 0");
  if (n_occ && !(*n_occ >= 0)) throw UsageError("n_occ: must be >= 0");
  if (temp_k && !(*temp_k > 0)) throw UsageError("temp_k: must be > 0");
  if (omega_m_hz && !(*omega_m_hz > 0)) throw UsageError("omega_m_hz: must be > 0");
  if (!(r > 0)) throw UsageError("r: must be > 0");
  if (dt && !(*dt > 0)) throw UsageError("dt: must be > 0");
  if (duration && !(*duration > 0)) throw UsageError("duration: must be > 0");
  if (ntraj && *ntraj < 1) throw UsageError("ntraj: must be >= 1");
}

std::vector<std::string> RunConfig::describe() const {
  std::vector<std::string> out;
  out.push_back("nu_hz=" + num(nu_hz));
  out.push_back("gamma_hz=" + num(gamma_hz));
  if (temp_k) out.push_back("temp_k=" + num(*temp_k));
  if (omega_m_hz) out.push_back("omega_m_hz=" + num(*omega_m_hz));
  out.push_back("n_occ=" + num(resolved_n_occ()));
  out.push_back("alpha_in=" + num(alpha_in));
  out.push_back("mu=" + num(mu));
  out.push_back("mu1=" + num(mu1));
  out.push_back("r=" + num(r));
  out.push_back(std::string("filter_mode=") + to_string(mode));
  out.push_back(fmt::format("drive={},{},{},{},{},{}", num(drive(0)), num(drive(1)), num(drive(2)), num(drive(3)),
                            num(drive(4)), num(drive(5))));
  out.push_back(fmt::format("seed={}", seed));
  if (dt) out.push_back("dt=" + num(*dt));
  if (duration) out.push_back("duration=" + num(*duration));
  if (ntraj) out.push_back(fmt::format("ntraj={}", *ntraj));
  return out;
}

RunConfig parse_config(std::istream& in, RunConfig base) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(fmt::format("config line {}: expected key = value, got '{}'", lineno, line));
    }
    base.set(line.substr(0, eq), line.substr(eq + 1));
  }
  return base;
}

RunConfig load_config(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw UsageError(fmt::format("config: cannot open '{}'", path));
  return parse_config(in, std::move(base));
}

ExperimentKind parse_kind(const std::string& text) {
  if (text == "steady") return ExperimentKind::Steady;
  if (text == "sweep-fidelity") return ExperimentKind::SweepFidelity;
  if (text == "sweep-squeezed") return ExperimentKind::SweepSqueezed;
  if (text == "trajectory") return ExperimentKind::Trajectory;
  if (text == "validate") return ExperimentKind::Validate;
  throw UsageError(fmt::format("unknown experiment kind '{}'", text));
}

const char* to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Steady: return "steady";
    case ExperimentKind::SweepFidelity: return "sweep-fidelity";
    case ExperimentKind::SweepSqueezed: return "sweep-squeezed";
    case ExperimentKind::Trajectory: return "trajectory";
    case ExperimentKind::Validate: return "validate";
  }
  return "?";
}

Range default_sweep_mu() { return {-3.0, 0.5, 36}; }
Range default_sweep_log2r() { return {10.0, 40.0, 31}; }
Range default_squeezed_mu() { return {-3.0, 0.0, 31}; }
Range default_squeezed_mu1() { return {-1.0, 1.0, 101}; }

std::vector<FidelityRow> sweep_fidelity(const RunConfig& cfg, const Range& mu, const Range& log2r_neg,
                                        unsigned threads) {
  const auto mus = mu.values();
  const auto lrs = log2r_neg.values();
  std::vector<double> uncontrolled(mus.size());
  parallel_for(mus.size(), threads, [&](std::size_t i) {
    const Scenario sc = build_scenario(scenario_spec(cfg, mus[i], FieldMode::vacuum(), cfg.mode, std::nullopt));
    uncontrolled[i] = fidelity(steady_state(sc.sys, sc.noise).cov, sc.V_in);
  });
  std::vector<FidelityRow> rows(mus.size() * lrs.size());
  parallel_for(rows.size(), threads, [&](std::size_t k) {
    const std::size_t i = k / lrs.size();
    const std::size_t j = k % lrs.size();
    const double r = std::exp2(-lrs[j]);
    const Scenario sc = build_scenario(scenario_spec(cfg, mus[i], FieldMode::vacuum(), cfg.mode, r));
    rows[k] = {mus[i], lrs[j], analyze(sc).fidelity, uncontrolled[i]};
  });
  return rows;
}

std::vector<SqueezedRow> sweep_squeezed(const RunConfig& cfg, const Range& mu, const Range& mu1, unsigned threads) {
  const auto mus = mu.values();
  const auto mu1s = mu1.values();
  std::vector<SqueezedRow> rows(mus.size() * mu1s.size());
  parallel_for(rows.size(), threads, [&](std::size_t k) {
    const double m = mus[k / mu1s.size()];
    const double m1 = mu1s[k % mu1s.size()];
    const FieldMode source = squeezed_vacuum(m1);
    const double f1 = analyze(build_scenario(scenario_spec(cfg, m, source, FilterMode::S1, cfg.r))).fidelity;
    const double f2 = analyze(build_scenario(scenario_spec(cfg, m, source, FilterMode::S2, cfg.r))).fidelity;
    rows[k] = {m, m1, f1, f2};
  });
  return rows;
}

std::string steady_report(const RunConfig& cfg) {
  using nlohmann::ordered_json;
  const MemoryParams params = cfg.params();
  const Scenario open = build_scenario(scenario_spec(cfg, cfg.mu, FieldMode::vacuum(), cfg.mode, std::nullopt));
  const GaussianState st = steady_state(open.sys, open.noise);
  const Scenario ctl = build_scenario(scenario_spec(cfg, cfg.mu, FieldMode::vacuum(), cfg.mode, cfg.r));
  const ClosedLoopResult cl = analyze(ctl);
  const Eigen::VectorXd cl_mean = closed_loop_mean(ctl.am, ctl.sys.drive);
  const SingleModeMoments sm = single_mode_check(params, cfg.alpha_in);
  const Eigen::Vector3d syn = syndrome_statistics(st.cov);
  const double ps = psys(st.cov);

  auto matrix = [](const Eigen::MatrixXd& m) {
    ordered_json rows = ordered_json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      ordered_json row = ordered_json::array();
      for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
      rows.push_back(row);
    }
    return rows;
  };
  auto vector = [](const Eigen::VectorXd& v) {
    ordered_json a = ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
  };

  ordered_json j;
  j["schema"] = "gst-steady/1";
  j["version"] = GST_VERSION;
  ordered_json p;
  p["nu"] = params.nu;
  p["gamma"] = params.gamma;
  p["n_occ"] = params.n_occ;
  p["mu"] = cfg.mu;
  p["r"] = cfg.r;
  p["filter_mode"] = to_string(cfg.mode);
  p["alpha_in"] = cfg.alpha_in;
  p["drive"] = vector(cfg.drive);
  j["parameters"] = p;
  j["single_mode"] = {{"mean_re", sm.mean.real()}, {"mean_im", sm.mean.imag()}, {"variance", sm.variance}};
  const Mat6 vpm = coherent_steady_covariance(params, cfg.mu);
  j["v_plus_minus"] = matrix(vpm);
  j["steady_covariance"] = matrix(st.cov);
  j["steady_mean"] = vector(st.mean);
  j["pfd_rate"] = pfd_rate(cfg.mu, FieldMode::vacuum());
  j["psys"] = ps;
  j["psys_closed_form"] = psys_closed_form(cfg.mu, params);
  j["entangled"] = ps < kEntanglementThreshold;
  j["syndrome_variances"] = vector(syn);
  j["ideal_syndrome_variance"] = ideal_syndrome_variance(params);
  j["fidelity"] = fidelity(st.cov, open.V_in);
  j["fidelity_closed_form"] = fidelity_closed_form(cfg.mu, params);
  j["fidelity_controlled"] = cl.fidelity;
  j["closed_loop_mean"] = vector(cl_mean.head<6>());
  return j.dump(2) + "\n";
}

std::vector<std::string> output_header(ExperimentKind kind, const ExperimentSpec& spec) {
  std::vector<std::string> h;
  h.push_back(fmt::format("gst-transfer {}", GST_VERSION));
  h.push_back(fmt::format("kind={}", to_string(kind)));
  for (auto& line : spec.cfg.describe()) h.push_back(line);
  return h;
}

namespace {

void write_text(const ExperimentSpec& spec, std::ostream& out, const std::string& text) {
  if (spec.out.empty()) {
    out << text;
    return;
  }
  std::ofstream f(spec.out, std::ios::binary);
  if (!f) throw UsageError(fmt::format("out: cannot write '{}'", spec.out));
  f << text;
}

std::string header_text(const std::vector<std::string>& lines) {
  std::string s;
  for (const auto& l : lines) s += "# " + l + "\n";
  return s;
}

int run_trajectory(const ExperimentSpec& spec, std::ostream& out) {
  const RunConfig& cfg = spec.cfg;
  const Scenario sc = build_scenario(scenario_spec(cfg, cfg.mu, FieldMode::vacuum(), cfg.mode, cfg.r));
  TrajectoryConfig tc = TrajectoryConfig::for_params(sc.spec.params, cfg.mode, cfg.seed);
  if (cfg.dt) tc.dt = *cfg.dt;
  if (cfg.duration) tc.duration = *cfg.duration;
  tc.time_varying_gain = true;
  const std::vector<bool> settings = spec.control.empty() ? std::vector<bool>{false, true} : spec.control;
  const std::string stem = trajectory_stem(spec.out);

  std::optional<double> var_on;
  std::optional<double> var_off;
  for (bool on : settings) {
    tc.control_enabled = on;
    const Trajectory tr = simulate_trajectory(tc, sc);
    auto header = output_header(ExperimentKind::Trajectory, spec);
    header.push_back(fmt::format("control={}", on ? "on" : "off"));
    header.push_back("dt_used=" + num(tc.dt));
    header.push_back("duration_used=" + num(tc.duration));
    header.push_back("pi_s rows are Btil x; the last row is (q2 - q3)/sqrt(2)");
    const std::string path = fmt::format("{}_control_{}.csv", stem, on ? "on" : "off");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw UsageError(fmt::format("out: cannot write '{}'", path));
    write_trajectory_csv(f, tr, header);
    const double v = variance_after(tr.pi_s, tr.pi_s.front().size() - 1, tr.size() / 5);
    (on ? var_on : var_off) = v;
    fmt::print(out, "{} control={} syndrome_variance={}\n", path, on ? "on" : "off", num(v));
  }
  if (var_on && var_off) fmt::print(out, "syndrome_variance_ratio={}\n", num(*var_on / *var_off));
  return 0;
}

}  // namespace

int run_experiment(const ExperimentSpec& spec, std::ostream& out, std::ostream& err) {
  spec.cfg.validate();
  switch (spec.kind) {
    case ExperimentKind::Steady:
      write_text(spec, out, steady_report(spec.cfg));
      return 0;
    case ExperimentKind::SweepFidelity: {
      const Range mu = spec.mu.value_or(default_sweep_mu());
      const Range lr = spec.log2r.value_or(default_sweep_log2r());
      auto header = output_header(spec.kind, spec);
      header.push_back("mu_range=" + mu.str());
      header.push_back("log2r_neg_range=" + lr.str());
      std::string text = header_text(header) + "mu,log2r_neg,fidelity_controlled,fidelity_uncontrolled\n";
      for (const auto& row : sweep_fidelity(spec.cfg, mu, lr, spec.threads)) {
        text += fmt::format("{},{},{},{}\n", num(row.mu), num(row.log2r_neg), num(row.controlled),
                            num(row.uncontrolled));
      }
      write_text(spec, out, text);
      return 0;
    }
    case ExperimentKind::SweepSqueezed: {
      const Range mu = spec.mu.value_or(default_squeezed_mu());
      const Range mu1 = spec.mu1.value_or(default_squeezed_mu1());
      auto header = output_header(spec.kind, spec);
      header.push_back("mu_range=" + mu.str());
      header.push_back("mu1_range=" + mu1.str());
      std::string text = header_text(header) + "mu,mu1,fidelity_s1,fidelity_s2\n";
      for (const auto& row : sweep_squeezed(spec.cfg, mu, mu1, spec.threads)) {
        text += fmt::format("{},{},{},{}\n", num(row.mu), num(row.mu1), num(row.s1), num(row.s2));
      }
      write_text(spec, out, text);
      return 0;
    }
    case ExperimentKind::Trajectory:
      return run_trajectory(spec, out);
    case ExperimentKind::Validate: {
      AcceptanceOptions opts;
      opts.seed = spec.cfg.seed;
      opts.threads = spec.threads;
      if (spec.cfg.ntraj) opts.ntraj = *spec.cfg.ntraj;
      bool ok = true;
      for (int id = 1; id <= kCriterionCount; ++id) {
        const CriterionResult r = run_criterion(id, opts, &err);
        out << format_result(r) << '\n' << std::flush;
        ok = ok && r.passed;
      }
      return ok ? 0 : 1;
    }
  }
  return 2;
}

}  // namespace gst
