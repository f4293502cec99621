#include "gst/estimation.hpp"

#include <cmath>
#include <iostream>
#include <mutex>

#include "gst/errors.hpp"
#include "gst/numerics.hpp"

namespace gst {

namespace {

void warn_coarse_step(double dt, const MemoryParams& params) {
  static std::once_flag once;
  if (dt * params.total_rate() > 0.1) {
    std::call_once(once, [&] {
      std::clog << "gst: warning: filter step dt*(nu+gamma) = " << dt * params.total_rate()
                << " exceeds 0.1; Euler updates will be inaccurate\n";
    });
  }
}

SynMat inverse_innovation(const SynMat& rn) {
  Eigen::LLT<SynMat> llt(rn);
  if (llt.info() != Eigen::Success || !(llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 0)) {
    throw SingularMatrixError(
        "innovation covariance 2 Z Lambda Z^T is singular; use the squeezing cap mu = kMuFloor instead of "
        "an infinite squeezing");
  }
  return llt.solve(SynMat::Identity(rn.rows(), rn.rows()));
}

}  // namespace

MeasurementModel measurement_model(FilterMode mode, const Encoding& enc, const MemoryParams& params) {
  params.validate();
  MeasurementModel mm;
  mm.mode = mode;
  mm.Z = enc.selector(mode);
  mm.Btil = enc.syndrome_map(mode);
  mm.C = std::sqrt(2.0 * params.nu) * mm.Btil;
  mm.D = SynBy12::Zero(mm.Z.rows(), 12);
  mm.D.leftCols<6>() = std::sqrt(2.0) * mm.Z;
  return mm;
}

SynMat innovation_covariance(const MeasurementModel& mm, const NoiseModel& noise) {
  return numerics::symmetrize(SynMat(mm.D * noise.SigmaW * mm.D.transpose()));
}

SixBySyn noise_cross_covariance(const SystemMatrices& sys, const NoiseModel& noise, const MeasurementModel& mm) {
  return sys.B * noise.SigmaW * mm.D.transpose();
}

SixBySyn kalman_gain(const Mat6& vc, const MeasurementModel& mm, const Encoding& enc, const MemoryParams& params,
                     const NoiseModel& noise) {
  const SynMat rn = 2.0 * mm.Z * noise.Lambda * mm.Z.transpose();
  const SixBySyn numer =
      vc * mm.C.transpose() - std::sqrt(2.0 * params.nu) * enc.T * noise.Lambda * mm.Z.transpose();
  return numer * inverse_innovation(rn);
}

Mat6 riccati_flow(const Mat6& vc, const MeasurementModel& mm, const Encoding& enc, const MemoryParams& params,
                  const NoiseModel& noise) {
  const SixBySyn k = kalman_gain(vc, mm, enc, params, noise);
  const SynMat zlz = mm.Z * noise.Lambda * mm.Z.transpose();
  const double a = -params.half_rate();
  const Mat6 flow = 2.0 * a * vc + params.nu * enc.T * noise.Lambda * enc.T.transpose() +
                    params.gamma * (params.n_occ + 0.5) * Mat6::Identity() - 2.0 * k * zlz * k.transpose();
  return numerics::symmetrize(flow);
}

Mat6 steady_conditional_covariance(const MeasurementModel& mm, const SystemMatrices& sys, const NoiseModel& noise) {
  const SynMat rn = innovation_covariance(mm, noise);
  const SynMat rn_inv = inverse_innovation(rn);
  const SixBySyn s = noise_cross_covariance(sys, noise, mm);
  const Mat6 qn = diffusion(sys, noise);

  // Removing the correlated part leaves a standard filtering Riccati equation
  // whose dual is a control CARE in (Af^T, C^T).
  const Mat6 af = sys.A - s * rn_inv * mm.C;
  const Mat6 qf = numerics::symmetrize(Mat6(qn - s * rn_inv * s.transpose()));
  const Eigen::MatrixXd vc = numerics::solve_care(af.transpose(), mm.C.transpose(), qf, rn);
  return vc;
}

NoiseModel filter_noise_view(const NoiseModel& noise, FilterMode mode) {
  if (mode == FilterMode::S1) return noise;
  NoiseModel blind = noise;
  blind.Lambda.topLeftCorner<2, 2>() = Eigen::Matrix2d::Identity() / 2;
  blind.SigmaW.topLeftCorner<2, 2>() = Eigen::Matrix2d::Identity() / 2;
  return blind;
}

FilterDesign design_stationary_filter(FilterMode mode, const Encoding& enc, const MemoryParams& params,
                                      const NoiseModel& filter_noise) {
  FilterDesign fd;
  fd.mm = measurement_model(mode, enc, params);
  const SystemMatrices sys = system_matrices(params, enc);
  fd.Vc = steady_conditional_covariance(fd.mm, sys, filter_noise);
  fd.K = kalman_gain(fd.Vc, fd.mm, enc, params, filter_noise);
  fd.Ktil = fd.mm.Btil * fd.K;
  return fd;
}

FilterState filter_step(const FilterState& fs, const SynVec& dy, const Vec6& u, double dt,
                        const MeasurementModel& mm, const SystemMatrices& sys, const Encoding& enc,
                        const MemoryParams& params, const NoiseModel& noise) {
  warn_coarse_step(dt, params);
  const SixBySyn k = kalman_gain(fs.Vc, mm, enc, params, noise);
  FilterState next;
  next.pi_x = estimate_step(fs.pi_x, dy, u, dt, k, mm, sys);
  next.Vc = numerics::symmetrize(Mat6(fs.Vc + dt * riccati_flow(fs.Vc, mm, enc, params, noise)));
  return next;
}

Vec6 estimate_step(const Vec6& pi_x, const SynVec& dy, const Vec6& u, double dt, const SixBySyn& K,
                   const MeasurementModel& mm, const SystemMatrices& sys) {
  const SynVec innovation = dy - mm.C * pi_x * dt;
  return pi_x + (sys.A * pi_x + u + sys.drive) * dt + K * innovation;
}

SyndromeFilterState syndrome_filter_step(const SyndromeFilterState& ss, const SynVec& dy, const Vec6& u,
                                         double dt, const SynMat& Ktil, const MeasurementModel& mm,
                                         const MemoryParams& params) {
  warn_coarse_step(dt, params);
  const SynVec innovation = dy - std::sqrt(2.0 * params.nu) * ss.pi_s * dt;
  SyndromeFilterState next;
  next.pi_s = ss.pi_s + (-params.half_rate() * ss.pi_s + mm.Btil * u) * dt + Ktil * innovation;
  return next;
}

}  // namespace gst
