#include <doctest.h>

#include <random>

#include "gst/control.hpp"
#include "gst/numerics.hpp"

using namespace gst;

namespace {

const MemoryParams kNominal = MemoryParams::from_hz(30e3, 1.0, 8.8e3);

Vec6 random_state(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Vec6 x;
  for (int i = 0; i < 6; ++i) x(i) = g(rng);
  return x;
}

}  // namespace

TEST_CASE("syndrome weights reproduce the penalty expansions") {
  const Encoding enc = Encoding::make();
  const SynMat q1 = syndrome_weights(FilterMode::S1);
  const SynMat q2 = syndrome_weights(FilterMode::S2);
  CHECK(q1.rows() == 3);
  CHECK(q2.rows() == 2);

  Vec6 e1 = Vec6::Zero();
  e1(0) = 1.0;
  const Eigen::Vector3d s_e1 = enc.Btil1 * e1;
  CHECK(s_e1.dot(q1 * s_e1) == doctest::Approx(2.0));

  std::mt19937_64 rng(21);
  for (int k = 0; k < 10; ++k) {
    const Vec6 x = random_state(rng);
    const double q_1 = x(0), q_2 = x(2), q_3 = x(4);
    const double p_sum = x(1) + x(3) + x(5);
    const double pairwise = std::pow(q_1 - q_2, 2) + std::pow(q_2 - q_3, 2) + std::pow(q_3 - q_1, 2);
    const Eigen::Vector2d s2 = enc.Btil2 * x;
    const Eigen::Vector3d s1 = enc.Btil1 * x;
    CHECK(s2.dot(q2 * s2) == doctest::Approx(pairwise).epsilon(1e-12));
    CHECK(s1.dot(q1 * s1) == doctest::Approx(pairwise + 3 * p_sum * p_sum).epsilon(1e-12));
  }
}

TEST_CASE("Riccati rate") {
  // ν+Γ = 2, r = 3, weight 3: f² + 2f − 1 = 0.
  CHECK(riccati_rate(3.0, MemoryParams{1.5, 0.5, 0.0}, 3.0) == doctest::Approx(std::sqrt(2.0) - 1).epsilon(1e-14));
  // Cheap-control limit f ≈ √(w/r) stays finite and accurate.
  const double f = riccati_rate(9.0, kNominal, 1e-15);
  const double k = kNominal.half_rate();
  CHECK(f == doctest::Approx(-k + std::sqrt(k * k + 9e15)).epsilon(1e-12));
  CHECK(f * f + 2 * k * f == doctest::Approx(9e15).epsilon(1e-12));
}

TEST_CASE("CARE solution is r diag{f}") {
  const Encoding enc = Encoding::make(-230.0);
  for (FilterMode mode : {FilterMode::S1, FilterMode::S2}) {
    for (double r : {1.0, 1e-3, 1e-9, 1e-12}) {
      const LqgConfig cfg = LqgConfig::make(mode, r);
      const Gains g = lqg_gains(cfg, kNominal, enc);
      const double k = kNominal.half_rate();
      const double f1 = (9.0 / r) / (k + std::sqrt(k * k + 9.0 / r));
      const double f2 = (3.0 / r) / (k + std::sqrt(k * k + 3.0 / r));
      SynVec f(enc.syndrome_map(mode).rows());
      if (mode == FilterMode::S1) {
        f << f1, f2, f2;
      } else {
        f << f2, f2;
      }
      const SynMat expected = r * SynMat(f.asDiagonal());
      CHECK((g.P - expected).norm() / expected.norm() < 1e-8);
      CHECK(g.f1 == doctest::Approx(f1).epsilon(1e-14));
      CHECK(g.f2 == doctest::Approx(f2).epsilon(1e-14));
      CHECK((g.Fgain + enc.syndrome_map(mode).transpose() * SynMat(f.asDiagonal())).norm() /
                (f.maxCoeff()) <
            1e-8);
      CHECK(sign_coefficient(g) == g.f2 / 3.0);
    }
  }
}

TEST_CASE("feedback structure on position differences") {
  const Encoding enc = Encoding::make();
  const Gains g = lqg_gains(LqgConfig::make(FilterMode::S1, 1e-9), kNominal, enc);
  const double lambda = sign_coefficient(g);
  std::mt19937_64 rng(4);
  for (int k = 0; k < 5; ++k) {
    const Vec6 x = random_state(rng);
    const Vec6 u = control_input(g, SynVec(enc.Btil1 * x));
    const double q[3] = {x(0), x(2), x(4)};
    const double p_sum = x(1) + x(3) + x(5);
    for (int j = 0; j < 3; ++j) {
      double diff = 0.0;
      for (int i = 0; i < 3; ++i) diff += q[i] - q[j];
      CHECK(u(2 * j) == doctest::Approx(lambda * diff).epsilon(1e-7));
      CHECK(u(2 * j + 1) == doctest::Approx(-g.f1 / 3.0 * p_sum).epsilon(1e-7));
    }
  }
}

TEST_CASE("codespace states receive no feedback") {
  const Encoding enc = Encoding::make();
  const Gains g = lqg_gains(LqgConfig::make(FilterMode::S1, 1e-9), kNominal, enc);
  Vec6 code;
  code << 1.7, 0, 1.7, 0, 1.7, 0;
  CHECK(control_input(g, SynVec(enc.Btil1 * code)).norm() < 1e-6);
  CHECK(control_input(g, SynVec::Zero(3)).norm() == 0.0);
}

TEST_CASE("expensive control switches off") {
  const Encoding enc = Encoding::make();
  const Gains g = lqg_gains(LqgConfig::make(FilterMode::S2, 1e12), kNominal, enc);
  CHECK(g.Fgain.norm() < 1e-15);
}

TEST_CASE("literal diagonal convention inflates the gain by 1/r") {
  const Encoding enc = Encoding::make();
  const LqgConfig cfg = LqgConfig::make(FilterMode::S1, 1e-3);
  const Gains g = lqg_gains(cfg, kNominal, enc);
  const Gains lit = literal_diagonal_gains(cfg, kNominal, enc);
  CHECK((lit.Fgain * cfg.r - g.Fgain).norm() / g.Fgain.norm() < 1e-8);
}

TEST_CASE("control errors") {
  CHECK_THROWS_AS(LqgConfig::make(FilterMode::S1, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(LqgConfig::make(FilterMode::S1, -1.0), std::invalid_argument);
  const Gains g = lqg_gains(LqgConfig::make(FilterMode::S2, 1.0), kNominal, Encoding::make());
  CHECK_THROWS_AS(control_input(g, SynVec::Zero(3)), std::invalid_argument);
}

TEST_CASE("cost rate") {
  const Encoding enc = Encoding::make();
  const MeasurementModel mm = measurement_model(FilterMode::S2, enc, kNominal);
  const LqgConfig cfg = LqgConfig::make(FilterMode::S2, 2.0);
  const Gains g = lqg_gains(cfg, kNominal, enc);
  Eigen::MatrixXd vz = Eigen::MatrixXd::Identity(8, 8) / 2;
  const Eigen::VectorXd mean = Eigen::VectorXd::Zero(8);
  // S = I/2 and U = F F^T / 2.
  const double expected = 0.5 * cfg.Qw.trace() + cfg.r * 0.5 * (g.Fgain * g.Fgain.transpose()).trace();
  CHECK(cost_rate(vz, mean, g, cfg, mm) == doctest::Approx(expected).epsilon(1e-14));
  CHECK_THROWS_AS(cost_rate(Eigen::MatrixXd::Identity(9, 9), Eigen::VectorXd::Zero(9), g, cfg, mm),
                  std::invalid_argument);
}
