#pragma once

// Continuous-time Kalman filter for the memory and its projection onto the
// syndrome coordinates. The plant noise B dW and the sensor noise D dW share
// the field increments, so the gain carries a cross-covariance term.

#include "gst/model.hpp"
#include "gst/openloop.hpp"

namespace gst {

/// dY = C x dt + D dW with C = √(2ν) Z T^T and D = √2 (Z, 0).
struct MeasurementModel {
  FilterMode mode = FilterMode::S1;
  SynBy6 C;
  SynBy12 D;
  SynBy6 Z;
  SynBy6 Btil;

  Eigen::Index dim() const { return C.rows(); }
};

MeasurementModel measurement_model(FilterMode mode, const Encoding& enc, const MemoryParams& params);

/// D Σ_W D^T = 2 Z Λ Z^T, the innovation covariance per unit time.
SynMat innovation_covariance(const MeasurementModel& mm, const NoiseModel& noise);

/// B Σ_W D^T, the plant/sensor noise cross-covariance per unit time.
SixBySyn noise_cross_covariance(const SystemMatrices& sys, const NoiseModel& noise, const MeasurementModel& mm);

/// K = (V_c C^T − √(2ν) T Λ Z^T)(2 Z Λ Z^T)⁻¹.
/// Throws SingularMatrixError when the innovation covariance is singular
/// (exactly infinite squeezing); use kMuFloor instead.
SixBySyn kalman_gain(const Mat6& vc, const MeasurementModel& mm, const Encoding& enc, const MemoryParams& params,
                     const NoiseModel& noise);

/// Right-hand side of the conditional-covariance Riccati flow.
Mat6 riccati_flow(const Mat6& vc, const MeasurementModel& mm, const Encoding& enc, const MemoryParams& params,
                  const NoiseModel& noise);

/// Stationary V_c, solved as the dual algebraic Riccati equation after
/// decorrelating plant and sensor noise.
Mat6 steady_conditional_covariance(const MeasurementModel& mm, const SystemMatrices& sys, const NoiseModel& noise);

/// The filter's view of the noise. Mode s2 is run for an unknown source, so
/// the source block of Λ is replaced by a vacuum placeholder; s1 sees it all.
NoiseModel filter_noise_view(const NoiseModel& noise, FilterMode mode);

/// Frozen stationary filter used by the closed loop.
struct FilterDesign {
  MeasurementModel mm;
  Mat6 Vc;
  SixBySyn K;
  /// Btil K, the syndrome-filter gain.
  SynMat Ktil;
};

FilterDesign design_stationary_filter(FilterMode mode, const Encoding& enc, const MemoryParams& params,
                                      const NoiseModel& filter_noise);

struct FilterState {
  Vec6 pi_x = Vec6::Zero();
  Mat6 Vc = Mat6::Identity() / 2;
};

/// One Euler step of the full filter with a time-varying gain; V_c is
/// advanced deterministically by riccati_flow.
FilterState filter_step(const FilterState& fs, const SynVec& dy, const Vec6& u, double dt,
                        const MeasurementModel& mm, const SystemMatrices& sys, const Encoding& enc,
                        const MemoryParams& params, const NoiseModel& noise);

/// Mean update of the full filter with a frozen gain K.
Vec6 estimate_step(const Vec6& pi_x, const SynVec& dy, const Vec6& u, double dt, const SixBySyn& K,
                   const MeasurementModel& mm, const SystemMatrices& sys);

struct SyndromeFilterState {
  SynVec pi_s;
};

/// dπ(s) = Ã π(s) dt + Btil u dt + K̃ (dy − √(2ν) π(s) dt), Ã = −(ν+Γ)/2.
SyndromeFilterState syndrome_filter_step(const SyndromeFilterState& ss, const SynVec& dy, const Vec6& u,
                                         double dt, const SynMat& Ktil, const MeasurementModel& mm,
                                         const MemoryParams& params);

}  // namespace gst
