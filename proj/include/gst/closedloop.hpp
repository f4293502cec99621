#pragma once

// Joint covariance of the plant and the syndrome estimate under stationary
// LQG feedback, plus the scenario pipeline tying the modules together.

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gst/control.hpp"
#include "gst/estimation.hpp"
#include "gst/model.hpp"
#include "gst/openloop.hpp"

namespace gst {

/// dz = Az z dt + Bz dW for z = (x, π(s)), with Sigma the 12x12 noise covariance.
struct AugmentedModel {
  Eigen::MatrixXd Az;
  Eigen::MatrixXd Bz;
  Eigen::MatrixXd Sigma;
  Eigen::Index m = 0;
};

/// Throws UnstableError ("closed loop unstable") naming the eigenvalue with
/// the largest real part when Az is not Hurwitz.
AugmentedModel build_augmented(const MemoryParams& params, const SystemMatrices& sys, const NoiseModel& noise,
                               const MeasurementModel& mm, const SynMat& Ktil, const SixBySyn& F);

struct ClosedLoopCovariance {
  Eigen::MatrixXd Vz;
  Mat6 Vprime;
};

ClosedLoopCovariance closed_loop_covariance(const AugmentedModel& am);

/// Stationary mean of z under the constant drive; reported apart from the
/// mean-matched fidelity.
Eigen::VectorXd closed_loop_mean(const AugmentedModel& am, const Vec6& drive);

/// How the unadorned gain symbol of the explicit V'∞ formula is read.
enum class GainReading {
  /// K is the full 6xm Kalman gain and the filter noise block is K D.
  FullKalmanGain,
  /// K is the syndrome gain lifted back to the memory, Btil^T K̃.
  LiftedSyndromeGain,
};

const char* to_string(GainReading reading);

/// Evaluates the explicit steady V'∞ expression verbatim under a reading.
/// Throws SingularMatrixError naming the first singular factor.
Mat6 vprime_explicit(const MemoryParams& params, const SystemMatrices& sys, const NoiseModel& noise,
                     const MeasurementModel& mm, const SixBySyn& K, const SixBySyn& F, GainReading reading);

struct ExplicitFormulaReport {
  struct Reading {
    GainReading reading;
    double relative_error = 0.0;
    bool matches = false;
    /// "xx(i,j)"-style labels of 2x2 mode blocks whose relative error exceeds tol.
    std::vector<std::string> mismatched_blocks;
    std::string error;
  };
  std::vector<Reading> readings;
  double tolerance = 1e-6;

  bool any_match() const;
};

/// Compares both readings against the augmented Lyapunov result, which is authoritative.
ExplicitFormulaReport compare_vprime_explicit(const MemoryParams& params, const SystemMatrices& sys,
                                              const NoiseModel& noise, const MeasurementModel& mm,
                                              const SixBySyn& K, const SixBySyn& F, const Mat6& vprime_lyapunov,
                                              double tol = 1e-6);

double controlled_fidelity(const Mat6& vprime, const Mat6& v_in);

/// Everything needed to analyse or simulate one operating point.
struct ScenarioSpec {
  MemoryParams params;
  FieldMode source = FieldMode::vacuum();
  double mu = 0.0;
  FilterMode mode = FilterMode::S1;
  /// Control penalty; empty means feedback off.
  std::optional<double> r;
  double alpha_in = 0.0;
  /// Overrides −√ν β as the plant drive.
  std::optional<Vec6> drive;
};

struct Scenario {
  ScenarioSpec spec;
  Encoding enc;
  NoiseModel noise;
  NoiseModel filter_noise;
  SystemMatrices sys;
  FilterDesign filter;
  /// Full filter built from the true noise; read only by the evaluation
  /// layer (trajectory π(x), unbiasedness checks), never by the controller.
  FilterDesign eval_filter;
  std::optional<LqgConfig> lqg;
  std::optional<Gains> gains;
  /// Feedback map in use (zero when control is off).
  SixBySyn F;
  AugmentedModel am;
  Mat6 V_in;
};

Scenario build_scenario(const ScenarioSpec& spec);

struct ClosedLoopResult {
  ClosedLoopCovariance cov;
  double fidelity = 0.0;
};

ClosedLoopResult analyze(const Scenario& sc);

}  // namespace gst
