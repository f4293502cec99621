#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gst/experiment.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::string> mu;
  std::optional<std::string> mu1;
  std::optional<std::string> log2r;
  std::optional<std::string> r;
  std::optional<std::string> filter;
  std::optional<std::string> seed;
  std::optional<std::string> dt;
  std::optional<std::string> duration;
  std::optional<std::string> ntraj;
  std::string out;
  std::vector<std::string> control;
  unsigned threads = 0;
};

void add_flags(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "flat key = value configuration file");
  sub->add_option("--mu", f.mu, "ancilla squeezing, a value or a start:stop:count range");
  sub->add_option("--mu1", f.mu1, "source squeezing, a value or a start:stop:count range");
  sub->add_option("--log2r", f.log2r, "range of -log2 r, start:stop:count");
  sub->add_option("--r", f.r, "control penalty r");
  sub->add_option("--filter", f.filter, "syndrome filter, s1 or s2");
  sub->add_option("--seed", f.seed, "master seed");
  sub->add_option("--dt", f.dt, "time step in seconds");
  sub->add_option("--duration", f.duration, "trajectory length in seconds");
  sub->add_option("--ntraj", f.ntraj, "number of Monte Carlo trajectories");
  sub->add_option("--out", f.out, "output path (trajectory: file stem)");
  sub->add_option("--control", f.control, "on or off; repeat for both")->check(CLI::IsMember({"on", "off"}));
  sub->add_option("--threads", f.threads, "worker threads (0 = hardware concurrency)");
}

void apply_value_or_range(gst::RunConfig& cfg, std::optional<gst::Range>& range, const char* key,
                          const std::optional<std::string>& text) {
  if (!text) return;
  if (text->find(':') != std::string::npos) {
    range = gst::Range::parse(*text);
  } else {
    cfg.set(key, *text);
  }
}

gst::ExperimentSpec make_spec(const std::string& kind, const Flags& f) {
  gst::ExperimentSpec spec;
  spec.kind = gst::parse_kind(kind);
  if (!f.config.empty()) spec.cfg = gst::load_config(f.config);
  apply_value_or_range(spec.cfg, spec.mu, "mu", f.mu);
  apply_value_or_range(spec.cfg, spec.mu1, "mu1", f.mu1);
  if (f.log2r) spec.log2r = gst::Range::parse(*f.log2r);
  if (f.r) spec.cfg.set("r", *f.r);
  if (f.filter) spec.cfg.set("filter_mode", *f.filter);
  if (f.seed) spec.cfg.set("seed", *f.seed);
  if (f.dt) spec.cfg.set("dt", *f.dt);
  if (f.duration) spec.cfg.set("duration", *f.duration);
  if (f.ntraj) spec.cfg.set("ntraj", *f.ntraj);
  spec.out = f.out;
  for (const auto& c : f.control) spec.control.push_back(c == "on");
  spec.threads = f.threads;
  return spec;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian state transfer into a feedback-protected three-mode memory"};
  app.set_version_flag("--version", std::string(GST_VERSION));
  app.require_subcommand(1);
  Flags flags;
  const std::vector<std::pair<std::string, std::string>> kinds = {
      {"steady", "steady-state moments and witnesses as JSON"},
      {"sweep-fidelity", "controlled and uncontrolled fidelity over (mu, -log2 r)"},
      {"sweep-squeezed", "fidelity over (mu, mu1) with the s1 and s2 filters"},
      {"trajectory", "closed-loop trajectories with control on and off"},
      {"validate", "run the acceptance suite"},
  };
  for (const auto& [name, help] : kinds) add_flags(app.add_subcommand(name, help), flags);
  CLI11_PARSE(app, argc, argv);

  const std::string kind = app.get_subcommands().front()->get_name();
  try {
    return gst::run_experiment(make_spec(kind, flags), std::cout, std::cerr);
  } catch (const gst::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
