#pragma once

// Experiment driver: flat key=value configuration, parameter sweeps,
// trajectory export, the steady-state report and the validation run.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gst/model.hpp"

namespace gst {

/// Invalid configuration or command line; the message names the offending key.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

MemoryParams nominal_params();
Vec6 nominal_drive();

/// start:stop:count, count points inclusive of both ends.
struct Range {
  double start = 0.0;
  double stop = 0.0;
  int count = 1;

  static Range parse(const std::string& text);
  static Range single(double v) { return {v, v, 1}; }
  std::vector<double> values() const;
  std::string str() const;
};

struct RunConfig {
  double nu_hz = 30e3;
  double gamma_hz = 1.0;
  std::optional<double> n_occ;
  std::optional<double> temp_k;
  std::optional<double> omega_m_hz;
  /// Informational; the plant drive comes from `drive`.
  double alpha_in = -230.0;
  double mu = -0.4;
  double mu1 = 0.0;
  double r = 1e-9;
  FilterMode mode = FilterMode::S1;
  Vec6 drive = nominal_drive();
  std::uint64_t seed = 1;
  std::optional<double> dt;
  std::optional<double> duration;
  std::optional<std::size_t> ntraj;

  /// Throws UsageError naming the key for unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  /// n_occ if given, else the thermal occupation at (temp_k, omega_m_hz), else 8.8e3.
  double resolved_n_occ() const;
  MemoryParams params() const;
  void validate() const;
  /// Resolved key=value lines for output headers.
  std::vector<std::string> describe() const;
};

/// Applies every `key = value` line; '#' starts a comment.
RunConfig parse_config(std::istream& in, RunConfig base = {});
RunConfig load_config(const std::string& path, RunConfig base = {});

enum class ExperimentKind { Steady, SweepFidelity, SweepSqueezed, Trajectory, Validate };

ExperimentKind parse_kind(const std::string& text);
const char* to_string(ExperimentKind kind);

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::Steady;
  RunConfig cfg;
  std::optional<Range> mu;
  std::optional<Range> mu1;
  std::optional<Range> log2r;
  /// File path; empty writes to the output stream. For trajectories it is
  /// the stem of <stem>_control_on.csv / <stem>_control_off.csv.
  std::string out;
  /// Control settings for trajectory runs; empty means both.
  std::vector<bool> control;
  unsigned threads = 0;
};

struct FidelityRow {
  double mu;
  double log2r_neg;
  double controlled;
  double uncontrolled;
};

struct SqueezedRow {
  double mu;
  double mu1;
  double s1;
  double s2;
};

Range default_sweep_mu();
Range default_sweep_log2r();
Range default_squeezed_mu();
Range default_squeezed_mu1();

/// Coherent source; r = 2^−log2r_neg.
std::vector<FidelityRow> sweep_fidelity(const RunConfig& cfg, const Range& mu, const Range& log2r_neg,
                                        unsigned threads = 0);

/// Source squeezed by mu1, ancillas by mu, r from cfg; s2 uses the source-blind filter.
std::vector<SqueezedRow> sweep_squeezed(const RunConfig& cfg, const Range& mu, const Range& mu1,
                                        unsigned threads = 0);

/// JSON text of the steady-state and witness quantities at cfg.
std::string steady_report(const RunConfig& cfg);

std::vector<std::string> output_header(ExperimentKind kind, const ExperimentSpec& spec);

/// Returns the process exit status. Diagnostics go to err.
int run_experiment(const ExperimentSpec& spec, std::ostream& out, std::ostream& err);

}  // namespace gst
