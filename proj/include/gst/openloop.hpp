#pragma once

// Uncontrolled moment dynamics of the three-mode memory.

#include <complex>

#include "gst/model.hpp"

namespace gst {

struct GaussianState {
  Vec6 mean = Vec6::Zero();
  Mat6 cov = Mat6::Identity() / 2;

  /// Symmetric and strictly positive (min eigenvalue >= 1e-12).
  bool is_physical() const;
};

/// dx = A x dt + u dt + drive dt + B dW, drive = −√ν β.
struct SystemMatrices {
  Mat6 A;
  Mat6x12 B;
  Vec6 drive;
};

SystemMatrices system_matrices(const MemoryParams& params, const Encoding& enc);

/// B Σ_W B^T = ν T Λ T^T + Γ(n + 1/2) I.
Mat6 diffusion(const SystemMatrices& sys, const NoiseModel& noise);

/// Right-hand side of the covariance Lyapunov flow.
Mat6 covariance_flow(const Mat6& v, const SystemMatrices& sys, const NoiseModel& noise);

/// Steady mean and covariance; the covariance comes from the Lyapunov solver
/// so any source statistics are allowed.
GaussianState steady_state(const SystemMatrices& sys, const NoiseModel& noise);
GaussianState steady_state(const MemoryParams& params, const Encoding& enc, const NoiseModel& noise);

/// v±_j closed form of the steady covariance for a coherent source.
Mat6 coherent_steady_covariance(const MemoryParams& params, double mu);

struct SingleModeMoments {
  std::complex<double> mean;
  double variance;
};

/// One memory mode driven by a coherent field of real amplitude alpha_in.
SingleModeMoments single_mode_check(const MemoryParams& params, double alpha_in);

/// Overlap 1/√det(V + V_in) of mean-matched Gaussian states.
double fidelity(const Mat6& v, const Mat6& v_in);

/// Triple product over σ ∈ {0, +μ, −μ} for a coherent source.
double fidelity_closed_form(double mu, const MemoryParams& params);

/// Growth rate of the field witness P_fd for ancillas squeezed by μ.
double pfd_rate(double mu, const FieldMode& source);

/// Σ pairwise ⟨Δ(q_i − q_j)²⟩ + 3⟨Δ(p1 + p2 + p3)²⟩ evaluated on V.
double psys(const Mat6& v);
double psys_closed_form(double mu, const MemoryParams& params);

/// Below this value the symmetric three-mode state is certified entangled.
inline constexpr double kEntanglementThreshold = 6.0;

/// ⟨Δ(q_i − q_j)²⟩ for the pairs (1,2), (2,3), (3,1).
Eigen::Vector3d syndrome_statistics(const Mat6& v);

/// Γ(2n + 1)/(ν + Γ): the syndrome variance in the ideal-encoding limit.
double ideal_syndrome_variance(const MemoryParams& params);

}  // namespace gst
