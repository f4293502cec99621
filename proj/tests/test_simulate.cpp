#include <doctest.h>

#include <sstream>

#include "gst/numerics.hpp"
#include "gst/simulate.hpp"

using namespace gst;

namespace {

const MemoryParams kSmall{1.0, 0.5, 1.0};

Scenario small_scenario(FilterMode mode, std::optional<double> r, double mu = -0.4,
                        const MemoryParams& p = kSmall) {
  ScenarioSpec spec;
  spec.params = p;
  spec.mu = mu;
  spec.mode = mode;
  spec.r = r;
  return build_scenario(spec);
}

TrajectoryConfig small_config(const MemoryParams& p, FilterMode mode, bool control, double duration) {
  TrajectoryConfig cfg;
  cfg.dt = 1e-2 / p.total_rate();
  cfg.duration = duration / p.total_rate();
  cfg.seed = 17;
  cfg.mode = mode;
  cfg.control_enabled = control;
  cfg.record_stride = 10;
  cfg.innovation_stride = 100;
  return cfg;
}

double max_rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("noise sampler factor") {
  const NoiseModel noise = NoiseModel::encoded(squeezed_vacuum(0.6), -1.0, 3.0);
  const NoiseSampler s(noise.SigmaW);
  CHECK((s.factor() * s.factor().transpose() - noise.SigmaW).norm() < 1e-12);

  Mat12 tiny = Mat12::Identity();
  tiny(0, 0) = -1e-13;
  CHECK_NOTHROW(NoiseSampler{tiny});
  Mat12 bad = Mat12::Identity();
  bad(0, 0) = -1e-6;
  CHECK_THROWS_AS(NoiseSampler{bad}, std::invalid_argument);
}

TEST_CASE("plant and sensor noise share one increment") {
  const Scenario sc = small_scenario(FilterMode::S1, std::nullopt);
  const MeasurementModel& mm = sc.filter.mm;
  NoiseSampler sampler(sc.noise.SigmaW);
  auto rng = make_stream(3, 0);
  const double dt = 0.01;
  const int n = 200000;
  Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(6, 3);
  for (int k = 0; k < n; ++k) {
    const auto dw = sampler.draw(rng, dt);
    cross += (sc.sys.B * dw) * (mm.D * dw).transpose();
  }
  cross /= n;
  const Eigen::MatrixXd expected = noise_cross_covariance(sc.sys, sc.noise, mm) * dt;
  CHECK(max_rel_diff(cross, expected) < 0.05);
}

TEST_CASE("configuration checks") {
  const Scenario sc = small_scenario(FilterMode::S1, std::nullopt);
  TrajectoryConfig cfg = small_config(kSmall, FilterMode::S1, false, 1.0);
  cfg.dt = 0.0;
  CHECK_THROWS_AS(simulate_trajectory(cfg, sc), std::invalid_argument);
  cfg = small_config(kSmall, FilterMode::S2, false, 1.0);
  CHECK_THROWS_AS(simulate_trajectory(cfg, sc), std::invalid_argument);
  cfg = small_config(kSmall, FilterMode::S1, true, 1.0);
  CHECK_THROWS_AS(simulate_trajectory(cfg, sc), std::invalid_argument);
  const TrajectoryConfig nominal = TrajectoryConfig::for_params(kSmall, FilterMode::S1, 1);
  CHECK(nominal.dt == doctest::Approx(1e-3 / kSmall.total_rate()));
  CHECK(nominal.steps() == 100000);
}

TEST_CASE("trajectories are reproducible") {
  const Scenario sc = small_scenario(FilterMode::S1, 1e-3);
  const TrajectoryConfig cfg = small_config(kSmall, FilterMode::S1, true, 20.0);
  const Trajectory a = simulate_trajectory(cfg, sc);
  const Trajectory b = simulate_trajectory(cfg, sc);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.x[i] == b.x[i]);
    CHECK(a.pi_s[i] == b.pi_s[i]);
  }
  TrajectoryConfig other = cfg;
  other.stream_index = 1;
  CHECK(simulate_trajectory(other, sc).x.back() != a.x.back());
}

TEST_CASE("syndrome filter tracks the projected full filter in a run") {
  const Scenario sc = small_scenario(FilterMode::S1, 1e-3);
  const Trajectory t = simulate_trajectory(small_config(kSmall, FilterMode::S1, true, 20.0), sc);
  double worst = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    worst = std::max(worst, (t.pi_s[i] - sc.filter.mm.Btil * t.pi_x[i]).norm());
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("time-varying gain settles on the stationary error band") {
  const Scenario sc = small_scenario(FilterMode::S1, std::nullopt);
  TrajectoryConfig cfg = small_config(kSmall, FilterMode::S1, false, 40.0);
  cfg.time_varying_gain = true;
  const Trajectory t = simulate_trajectory(cfg, sc);
  const Eigen::VectorXd band =
      (sc.filter.mm.Btil * sc.filter.Vc * sc.filter.mm.Btil.transpose()).diagonal().cwiseSqrt();
  CHECK((t.err_band.back() - band).norm() / band.norm() < 1e-3);
  CHECK((t.err_band.front() - band).norm() / band.norm() > 1e-2);
}

TEST_CASE("divergence is reported with the step") {
  const Scenario sc = small_scenario(FilterMode::S1, std::nullopt);
  TrajectoryConfig cfg = small_config(kSmall, FilterMode::S1, false, 10.0);
  cfg.divergence_bound = 1e-3;
  try {
    simulate_trajectory(cfg, sc);
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
}

TEST_CASE("lossless unsqueezed memory holds vacuum variance") {
  const MemoryParams p{1.0, 0.0, 0.0};
  const Scenario sc = small_scenario(FilterMode::S1, std::nullopt, 0.0, p);
  TrajectoryConfig cfg = small_config(p, FilterMode::S1, false, 10.0);
  const EnsembleStatistics st = ensemble_statistics(run_ensemble(cfg, sc, 500));
  for (int i = 0; i < 6; ++i) CHECK(st.steady_cov(i, i) == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("ensemble covariance matches the Lyapunov solutions") {
  for (bool control : {false, true}) {
    const Scenario sc = small_scenario(FilterMode::S1, control ? std::optional<double>(1e-2) : std::nullopt);
    const TrajectoryConfig cfg = small_config(kSmall, FilterMode::S1, control, 50.0);
    const EnsembleStatistics st = ensemble_statistics(run_ensemble(cfg, sc, 1000));
    const Eigen::MatrixXd ref = analyze(sc).cov.Vz;
    CHECK((st.steady_cov - ref).norm() / ref.norm() < 0.05);
  }
}

TEST_CASE("ensemble reduction ignores the thread count") {
  const Scenario sc = small_scenario(FilterMode::S2, 1e-2);
  const TrajectoryConfig cfg = small_config(kSmall, FilterMode::S2, true, 5.0);
  const EnsembleStatistics a = ensemble_statistics(run_ensemble(cfg, sc, 40, 1));
  const EnsembleStatistics b = ensemble_statistics(run_ensemble(cfg, sc, 40, 3));
  CHECK(a.steady_cov == b.steady_cov);
  CHECK(a.mean.back() == b.mean.back());
}

TEST_CASE("single trajectory statistics") {
  const Scenario sc = small_scenario(FilterMode::S1, std::nullopt);
  const TrajectoryConfig cfg = small_config(kSmall, FilterMode::S1, false, 2.0);
  const Trajectory t = simulate_trajectory(cfg, sc);
  const EnsembleStatistics st = ensemble_statistics(std::vector<Trajectory>{t});
  CHECK(st.n == 1);
  CHECK(st.mean.back().head<6>() == Eigen::VectorXd(t.x.back()));
  CHECK(st.cov.back().norm() == 0.0);

  EnsembleAccumulator acc;
  acc.add(t);
  TrajectoryConfig longer = cfg;
  longer.duration *= 2;
  CHECK_THROWS_AS(acc.add(simulate_trajectory(longer, sc)), std::invalid_argument);
  CHECK_THROWS_AS(ensemble_statistics(EnsembleAccumulator{}), std::invalid_argument);
}

TEST_CASE("innovations of the s2 filter") {
  const double mu = -2.0;
  const Scenario sc = small_scenario(FilterMode::S2, std::nullopt, mu);
  const TrajectoryConfig cfg = small_config(kSmall, FilterMode::S2, false, 200.0);
  const EnsembleAccumulator acc = run_ensemble(cfg, sc, 50);
  const SynMat expected = std::exp(mu) * SynMat::Identity(2, 2);
  CHECK((innovation_covariance(sc.filter.mm, sc.noise) - expected).norm() < 1e-14);
  const InnovationReport rep = innovation_diagnostics(acc.innovations(), expected);
  CHECK(rep.covariance_rel_error < 0.05);
  CHECK(rep.white);
  CHECK(rep.unbiased);
  CHECK(rep.passed());
}

TEST_CASE("a mistuned gain leaves coloured innovations") {
  const Scenario sc = small_scenario(FilterMode::S1, std::nullopt, -1.0);
  TrajectoryConfig cfg = small_config(kSmall, FilterMode::S1, false, 200.0);
  const SynMat expected = innovation_covariance(sc.filter.mm, sc.noise);
  const InnovationReport good = innovation_diagnostics(run_ensemble(cfg, sc, 50).innovations(), expected);
  cfg.gain_scale = 2.0;
  const InnovationReport bad = innovation_diagnostics(run_ensemble(cfg, sc, 50).innovations(), expected);
  CHECK(good.white);
  CHECK_FALSE(bad.white);
  CHECK(bad.lag1 > good.lag1);
}

TEST_CASE("trajectory csv") {
  const Scenario sc = small_scenario(FilterMode::S2, 1e-2);
  TrajectoryConfig cfg = small_config(kSmall, FilterMode::S2, true, 1.0);
  const Trajectory t = simulate_trajectory(cfg, sc);
  std::ostringstream os;
  write_trajectory_csv(os, t, {"kind=trajectory", "mode=s2"});
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "# kind=trajectory");
  std::getline(is, line);
  std::getline(is, line);
  CHECK(line == "t,x1,x2,x3,x4,x5,x6,pis1,pis2,u1,u2,u3,u4,u5,u6,errband1,errband2");
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 16);
  }
  CHECK(rows == t.size());
}
