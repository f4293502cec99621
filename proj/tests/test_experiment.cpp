#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gst/experiment.hpp"
#include "gst/openloop.hpp"

using namespace gst;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("gst_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + GST_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("range parsing") {
  const Range r = Range::parse("-3:0.5:36");
  CHECK(r.count == 36);
  const auto v = r.values();
  CHECK(v.front() == -3.0);
  CHECK(v.back() == 0.5);
  CHECK(Range::parse("1.5:1.5:1").values() == std::vector<double>{1.5});
  CHECK_THROWS_AS(Range::parse("1.5"), UsageError);
  CHECK(Range::single(2.0).count == 1);
  CHECK_THROWS_AS(Range::parse("1:2"), UsageError);
  CHECK_THROWS_AS(Range::parse("1:2:0"), UsageError);
  CHECK_THROWS_AS(Range::parse("a:b:3"), UsageError);
  CHECK(Range::parse(r.str()).values() == v);
}

TEST_CASE("config parsing") {
  std::istringstream in("# memory\nnu_hz = 20000\ngamma_hz=2  # lossy\nmu = -1.5\nfilter_mode = s2\n\nseed = 42\n");
  const RunConfig cfg = parse_config(in);
  CHECK(cfg.nu_hz == 20000.0);
  CHECK(cfg.gamma_hz == 2.0);
  CHECK(cfg.mu == -1.5);
  CHECK(cfg.mode == FilterMode::S2);
  CHECK(cfg.seed == 42);
  CHECK(cfg.resolved_n_occ() == 8.8e3);

  std::istringstream bad("nu_hz = 1\nbogus_key = 3\n");
  try {
    parse_config(bad);
    FAIL("expected a usage error");
  } catch (const UsageError& e) {
    CHECK(std::string(e.what()).find("bogus_key") != std::string::npos);
  }
  RunConfig c;
  CHECK_THROWS_AS(c.set("mu", "abc"), UsageError);
  CHECK_THROWS_AS(load_config("/nonexistent/gst.cfg"), UsageError);
}

TEST_CASE("thermal occupation from temperature") {
  RunConfig cfg;
  cfg.set("temp_k", "4");
  cfg.set("omega_m_hz", "1e7");
  CHECK(cfg.resolved_n_occ() == doctest::Approx(8.3e3).epsilon(0.01));
  CHECK_NOTHROW(cfg.validate());
  cfg.set("n_occ", "100");
  try {
    cfg.validate();
    FAIL("expected a conflict");
  } catch (const UsageError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("n_occ") != std::string::npos);
    CHECK(msg.find("temp_k") != std::string::npos);
  }
}

TEST_CASE("fidelity sweep") {
  RunConfig cfg;
  const auto rows = sweep_fidelity(cfg, Range::parse("-1:0:3"), Range::parse("20:30:2"), 2);
  REQUIRE(rows.size() == 6);
  for (const auto& row : rows) {
    CHECK(row.uncontrolled == doctest::Approx(fidelity_closed_form(row.mu, cfg.params())).epsilon(1e-10));
    CHECK(row.controlled > row.uncontrolled);
  }
}

TEST_CASE("squeezed-source sweep") {
  RunConfig cfg;
  const auto rows = sweep_squeezed(cfg, Range::single(-0.4), Range::parse("-0.3:0.3:3"), 1);
  REQUIRE(rows.size() == 3);
  CHECK(rows[1].mu1 == 0.0);
  CHECK(rows[0].s2 <= rows[1].s2 + 1e-12);
  CHECK(rows[2].s2 <= rows[1].s2 + 1e-12);
}

TEST_CASE("steady report") {
  RunConfig cfg;
  cfg.mu = 0.0;
  const auto j = nlohmann::json::parse(steady_report(cfg));
  CHECK(j["schema"] == "gst-steady/1");
  CHECK(j["pfd_rate"].get<double>() == 7.5);
  CHECK(j["fidelity"].get<double>() == doctest::Approx(fidelity_closed_form(0.0, cfg.params())).epsilon(1e-10));
  CHECK(j["steady_covariance"].size() == 6);
  CHECK(j["parameters"]["filter_mode"] == "s1");
}

TEST_CASE("experiment output is reproducible") {
  ExperimentSpec spec;
  spec.kind = ExperimentKind::SweepFidelity;
  spec.mu = Range::parse("-1:0:4");
  spec.log2r = Range::parse("10:30:3");
  std::ostringstream a, b, err;
  CHECK(run_experiment(spec, a, err) == 0);
  spec.threads = 3;
  CHECK(run_experiment(spec, b, err) == 0);
  CHECK(a.str() == b.str());
  CHECK(a.str().rfind("# gst-transfer", 0) == 0);
  CHECK(a.str().find("mu,log2r_neg,fidelity_controlled,fidelity_uncontrolled\n") != std::string::npos);
}

TEST_CASE("trajectory experiment writes both runs") {
  const fs::path dir = scratch_dir("traj");
  ExperimentSpec spec;
  spec.kind = ExperimentKind::Trajectory;
  spec.cfg.duration = 20.0 / spec.cfg.params().total_rate();
  spec.out = (dir / "run.csv").string();
  std::ostringstream out, err;
  REQUIRE(run_experiment(spec, out, err) == 0);
  const std::string on = slurp(dir / "run_control_on.csv");
  const std::string off = slurp(dir / "run_control_off.csv");
  CHECK(on.rfind("# gst-transfer", 0) == 0);
  CHECK(off.find("# control=off") != std::string::npos);
  const std::string report = out.str();
  const auto pos = report.find("syndrome_variance_ratio=");
  REQUIRE(pos != std::string::npos);
  CHECK(std::stod(report.substr(pos + 24)) < 1.0);
  fs::remove_all(dir);
}

TEST_CASE("kind names") {
  CHECK(parse_kind("sweep-fidelity") == ExperimentKind::SweepFidelity);
  CHECK(std::string(to_string(ExperimentKind::Validate)) == "validate");
  CHECK_THROWS_AS(parse_kind("nope"), UsageError);
}

TEST_CASE("command line") {
  const fs::path dir = scratch_dir("cli");
  const fs::path json = dir / "steady.json";
  CHECK(run_cli("steady --mu -0.4 --out \"" + json.string() + "\"") == 0);
  CHECK(nlohmann::json::parse(slurp(json))["parameters"]["mu"].get<double>() == -0.4);

  const fs::path sweep = dir / "sweep.csv";
  CHECK(run_cli("sweep-fidelity --mu -1:0:3 --log2r 20:30:2 --out \"" + sweep.string() + "\"") == 0);
  CHECK(slurp(sweep).find("mu_range=-1:0:3") != std::string::npos);

  const fs::path cfg = dir / "bad.cfg";
  std::ofstream(cfg) << "nope = 1\n";
  CHECK(run_cli("steady --config \"" + cfg.string() + "\"") == 2);
  CHECK(run_cli("steady --filter s7") == 2);
  CHECK(run_cli("frobnicate") != 0);
  CHECK(run_cli("--version") == 0);
  fs::remove_all(dir);
}
