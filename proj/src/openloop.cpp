#include "gst/openloop.hpp"

#include <cmath>

#include "gst/errors.hpp"
#include "gst/numerics.hpp"

namespace gst {

namespace {

// Unit directions picking out q_i − q_j and p1 + p2 + p3 from x = (q1,p1,q2,p2,q3,p3).
Vec6 q_difference(int i, int j) {
  Vec6 w = Vec6::Zero();
  w(2 * i) = 1.0;
  w(2 * j) = -1.0;
  return w;
}

Vec6 p_sum() {
  Vec6 w;
  w << 0, 1, 0, 1, 0, 1;
  return w;
}

double quadratic_form(const Vec6& w, const Mat6& v) { return w.dot(v * w); }

}  // namespace

bool GaussianState::is_physical() const {
  return (cov - cov.transpose()).cwiseAbs().maxCoeff() == 0.0 && numerics::min_eigenvalue(cov) >= 1e-12;
}

SystemMatrices system_matrices(const MemoryParams& params, const Encoding& enc) {
  params.validate();
  SystemMatrices sys;
  sys.A = -params.half_rate() * Mat6::Identity();
  sys.B.leftCols<6>() = -std::sqrt(params.nu) * enc.T;
  sys.B.rightCols<6>() = -std::sqrt(params.gamma) * Mat6::Identity();
  sys.drive = -std::sqrt(params.nu) * enc.beta;
  return sys;
}

Mat6 diffusion(const SystemMatrices& sys, const NoiseModel& noise) {
  return numerics::symmetrize(sys.B * noise.SigmaW * sys.B.transpose());
}

Mat6 covariance_flow(const Mat6& v, const SystemMatrices& sys, const NoiseModel& noise) {
  return sys.A * v + v * sys.A.transpose() + diffusion(sys, noise);
}

GaussianState steady_state(const SystemMatrices& sys, const NoiseModel& noise) {
  GaussianState s;
  s.mean = -sys.A.partialPivLu().solve(sys.drive);
  s.cov = numerics::solve_lyapunov_steady(sys.A, diffusion(sys, noise));
  return s;
}

GaussianState steady_state(const MemoryParams& params, const Encoding& enc, const NoiseModel& noise) {
  return steady_state(system_matrices(params, enc), noise);
}

Mat6 coherent_steady_covariance(const MemoryParams& params, double mu) {
  const double nu = params.nu;
  const double bath = params.gamma * (1.0 + 2.0 * params.n_occ);
  const double denom = 2.0 * params.total_rate();
  const double v_source = (nu + bath) / denom;
  const double v_plus = (nu * std::exp(mu) + bath) / denom;
  const double v_minus = (nu * std::exp(-mu) + bath) / denom;

  Vec6 diag;
  diag << v_source, v_source, v_plus, v_minus, v_plus, v_minus;
  const Mat6 t = tritter();
  return numerics::symmetrize(t * diag.asDiagonal() * t.transpose());
}

SingleModeMoments single_mode_check(const MemoryParams& params, double alpha_in) {
  const double rate = params.total_rate();
  return {std::complex<double>(-2.0 * std::sqrt(params.nu) * alpha_in / rate, 0.0),
          0.5 + params.gamma * params.n_occ / rate};
}

double fidelity(const Mat6& v, const Mat6& v_in) {
  const double det = (v + v_in).determinant();
  if (!(det > 0) || !std::isfinite(det)) {
    throw SingularMatrixError("fidelity: V + V_in is singular or indefinite");
  }
  return 1.0 / std::sqrt(det);
}

double fidelity_closed_form(double mu, const MemoryParams& params) {
  const double rate = params.total_rate();
  double f = 1.0;
  for (double sigma : {0.0, mu, -mu}) {
    const double e = std::exp(sigma);
    f *= 2.0 * rate / (2.0 * params.nu * e + params.gamma * (e + 1.0 + 2.0 * params.n_occ));
  }
  return f;
}

double pfd_rate(double mu, const FieldMode& source) {
  return 3.0 * std::exp(mu) + 9.0 * source.p_variance();
}

double psys(const Mat6& v) {
  return quadratic_form(q_difference(0, 1), v) + quadratic_form(q_difference(1, 2), v) +
         quadratic_form(q_difference(2, 0), v) + 3.0 * quadratic_form(p_sum(), v);
}

double psys_closed_form(double mu, const MemoryParams& params) {
  const double rate = params.total_rate();
  return (4.5 + 3.0 * std::exp(mu)) * params.nu / rate + (7.5 + 15.0 * params.n_occ) * params.gamma / rate;
}

Eigen::Vector3d syndrome_statistics(const Mat6& v) {
  return {quadratic_form(q_difference(0, 1), v), quadratic_form(q_difference(1, 2), v),
          quadratic_form(q_difference(2, 0), v)};
}

double ideal_syndrome_variance(const MemoryParams& params) {
  return params.gamma * (2.0 * params.n_occ + 1.0) / params.total_rate();
}

}  // namespace gst
