#pragma once

// LQG synthesis on the syndrome estimate: weights, CARE solution, feedback
// gain and stationary cost.

#include <Eigen/Dense>

#include "gst/estimation.hpp"
#include "gst/model.hpp"

namespace gst {

/// Q1 = diag{9, 3, 3} for s1, Q2 = diag{3, 3} for s2.
SynMat syndrome_weights(FilterMode mode);

struct LqgConfig {
  FilterMode mode = FilterMode::S1;
  /// Control penalty; R = r I6.
  double r = 1e-9;
  SynMat Qw;

  static LqgConfig make(FilterMode mode, double r);
};

struct Gains {
  SynMat P;
  /// u = Fgain π(s), Fgain = −R⁻¹ Btil^T P.
  SixBySyn Fgain;
  double f1 = 0.0;
  double f2 = 0.0;
};

/// Positive root f of −(ν+Γ) f + w/r − f² = 0, i.e.
/// −(ν+Γ)/2 + √((ν+Γ)²/4 + w/r), in a cancellation-free form.
double riccati_rate(double weight, const MemoryParams& params, double r);

/// Numeric CARE solve for Ã = −(ν+Γ)/2 I, B̃, Q_w, R = r I6.
Gains lqg_gains(const LqgConfig& cfg, const MemoryParams& params, const Encoding& enc);

/// The same structure with P = diag{f} taken literally (no factor r), which
/// inflates the gain by 1/r. Only used to compare conventions.
Gains literal_diagonal_gains(const LqgConfig& cfg, const MemoryParams& params, const Encoding& enc);

/// Coefficient λ of the sign-function reading of u*: λ = f2/3.
inline double sign_coefficient(const Gains& g) { return g.f2 / 3.0; }

Vec6 control_input(const Gains& g, const SynVec& pi_s);

/// tr(Q_w S) + tr(R U) from the stationary covariance and mean of
/// z = (x, π(s)); S and U are the second moments of Btil x and u = F π(s).
double cost_rate(const Eigen::MatrixXd& vz, const Eigen::VectorXd& z_mean, const Gains& g, const LqgConfig& cfg,
                 const MeasurementModel& mm);

}  // namespace gst
