#include "gst/control.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "gst/numerics.hpp"

namespace gst {

SynMat syndrome_weights(FilterMode mode) {
  SynVec w(mode == FilterMode::S1 ? 3 : 2);
  if (mode == FilterMode::S1) {
    w << 9, 3, 3;
  } else {
    w << 3, 3;
  }
  return w.asDiagonal();
}

LqgConfig LqgConfig::make(FilterMode mode, double r) {
  if (!(r > 0)) throw std::invalid_argument(fmt::format("control penalty r must be > 0, got {}", r));
  return LqgConfig{mode, r, syndrome_weights(mode)};
}

double riccati_rate(double weight, const MemoryParams& params, double r) {
  const double k = params.half_rate();
  const double c = weight / r;
  return c / (k + std::sqrt(k * k + c));
}

Gains lqg_gains(const LqgConfig& cfg, const MemoryParams& params, const Encoding& enc) {
  if (!(cfg.r > 0)) throw std::invalid_argument("lqg_gains: r must be > 0");
  const SynBy6 btil = enc.syndrome_map(cfg.mode);
  const Eigen::Index m = btil.rows();
  const Eigen::MatrixXd a_til = -params.half_rate() * Eigen::MatrixXd::Identity(m, m);
  const Eigen::MatrixXd r = cfg.r * Eigen::MatrixXd::Identity(6, 6);

  Gains g;
  g.P = numerics::solve_care(a_til, Eigen::MatrixXd(btil), Eigen::MatrixXd(cfg.Qw), r);
  g.Fgain = -(1.0 / cfg.r) * btil.transpose() * g.P;
  g.f1 = riccati_rate(9.0, params, cfg.r);
  g.f2 = riccati_rate(3.0, params, cfg.r);
  return g;
}

Gains literal_diagonal_gains(const LqgConfig& cfg, const MemoryParams& params, const Encoding& enc) {
  const SynBy6 btil = enc.syndrome_map(cfg.mode);
  Gains g;
  g.f1 = riccati_rate(9.0, params, cfg.r);
  g.f2 = riccati_rate(3.0, params, cfg.r);
  SynVec diag(btil.rows());
  if (cfg.mode == FilterMode::S1) {
    diag << g.f1, g.f2, g.f2;
  } else {
    diag << g.f2, g.f2;
  }
  g.P = diag.asDiagonal();
  g.Fgain = -(1.0 / cfg.r) * btil.transpose() * g.P;
  return g;
}

Vec6 control_input(const Gains& g, const SynVec& pi_s) {
  if (pi_s.size() != g.Fgain.cols()) {
    throw std::invalid_argument(
        fmt::format("control_input: estimate has {} entries, gain expects {}", pi_s.size(), g.Fgain.cols()));
  }
  return g.Fgain * pi_s;
}

double cost_rate(const Eigen::MatrixXd& vz, const Eigen::VectorXd& z_mean, const Gains& g, const LqgConfig& cfg,
                 const MeasurementModel& mm) {
  const Eigen::Index m = mm.dim();
  if (vz.rows() != 6 + m || vz.cols() != 6 + m || z_mean.size() != 6 + m) {
    throw std::invalid_argument("cost_rate: joint covariance must be (6+m)x(6+m)");
  }
  const Eigen::MatrixXd second = vz + z_mean * z_mean.transpose();
  const Eigen::MatrixXd s = mm.Btil * second.topLeftCorner(6, 6) * mm.Btil.transpose();
  const Eigen::MatrixXd u = g.Fgain * second.bottomRightCorner(m, m) * g.Fgain.transpose();
  return (cfg.Qw * s).trace() + cfg.r * u.trace();
}

}  // namespace gst
