#pragma once

#include <Eigen/Dense>

#include <complex>
#include <optional>
#include <string>

namespace gst {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat12 = Eigen::Matrix<double, 12, 12>;
using Mat6x12 = Eigen::Matrix<double, 6, 12>;

// Syndrome-space objects have 2 or 3 rows; the max-size bound keeps them on the stack.
using SynVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 3, 1>;
using SynMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>;
using SynBy6 = Eigen::Matrix<double, Eigen::Dynamic, 6, 0, 3, 6>;
using SixBySyn = Eigen::Matrix<double, 6, Eigen::Dynamic, 0, 6, 3>;
using SynBy12 = Eigen::Matrix<double, Eigen::Dynamic, 12, 0, 3, 12>;

/// Position-squeezing cap standing in for the ideal limit μ → −∞.
inline constexpr double kMuFloor = -20.0;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Which output quadratures are measured: s1 (p-sum plus both q-syndromes)
/// or s2 (q-syndromes only, blind to the source statistics).
enum class FilterMode { S1, S2 };

const char* to_string(FilterMode mode);
FilterMode parse_filter_mode(const std::string& text);

/// Couplings and bath strength of each of the three identical memory modes.
/// Rates are angular frequencies (rad/s).
struct MemoryParams {
  double nu = 0.0;
  double gamma = 0.0;
  double n_occ = 0.0;

  static MemoryParams from_hz(double nu_over_2pi_hz, double gamma_over_2pi_hz, double n_occ);

  double total_rate() const { return nu + gamma; }
  /// Uniform damping rate (ν+Γ)/2 of every quadrature.
  double half_rate() const { return 0.5 * (nu + gamma); }
  void validate() const;
};

/// Field statistics of one input mode: dA dA† = (N+1)dt, dA² = M dt.
struct FieldMode {
  double N = 0.0;
  std::complex<double> M{0.0, 0.0};

  /// Set by squeezed_vacuum(); lets the quadrature variances be formed
  /// without the N + M cancellation that ruins strongly squeezed modes.
  std::optional<double> squeezing{};

  static FieldMode vacuum() { return {}; }
  /// N + Re M + 1/2
  double q_variance() const;
  /// N − Re M + 1/2
  double p_variance() const;
  bool satisfies_heisenberg(double tol = 1e-12) const;
  bool is_pure(double tol = 1e-12) const;
};

struct SourceSpec {
  double alpha_in = 0.0;
  FieldMode mode{};
  bool covariance_known = true;
  bool mean_known = false;
};

/// Tritter encoding and the syndrome maps derived from it.
struct Encoding {
  Mat6 T;
  Vec6 beta;
  Eigen::Matrix<double, 3, 6> Z1;
  Eigen::Matrix<double, 2, 6> Z2;
  Eigen::Matrix<double, 3, 6> Btil1;
  Eigen::Matrix<double, 2, 6> Btil2;

  /// Builds the encoding for a real source amplitude and asserts the
  /// orthogonality, isometry and drive-blindness invariants to 1e-12.
  static Encoding make(double alpha_in = 0.0);

  SynBy6 selector(FilterMode mode) const;
  SynBy6 syndrome_map(FilterMode mode) const;
};

/// Input-field covariance Λ and the joint (field, bath) noise covariance.
struct NoiseModel {
  Mat6 Lambda;
  Mat12 SigmaW;
  double n_occ = 0.0;

  static NoiseModel make(const FieldMode& m1, const FieldMode& m2, const FieldMode& m3, double n_occ);
  /// Source mode m1 with both ancillas squeezed by μ.
  static NoiseModel encoded(const FieldMode& source, double mu, double n_occ);
};

Mat6 tritter();
FieldMode squeezed_vacuum(double mu);
Vec6 drive_vector(double alpha_in);

/// Mean thermal occupation 1/(exp(ħω/k_B T) − 1), ω in rad/s.
double thermal_occupation(double temp_kelvin, double omega);

Mat6 lambda_matrix(const FieldMode& m1, const FieldMode& m2, const FieldMode& m3);
Mat6 input_covariance(const Mat6& lambda);

}  // namespace gst
