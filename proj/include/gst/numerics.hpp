#pragma once

// Dense real-matrix kernel: Lyapunov and Riccati solvers, flow integration
// to steady state, symmetric/PSD helpers. Everything is templated on the
// scalar type carried by the Eigen expressions passed in.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

#include "gst/errors.hpp"

namespace gst::numerics {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Derived>
typename Derived::PlainObject symmetrize(const Eigen::MatrixBase<Derived>& m) {
  return (m + m.transpose()) / typename Derived::Scalar(2);
}

template <typename Derived>
typename Derived::Scalar min_eigenvalue(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  const Matrix<Scalar> sym = symmetrize(m.eval());
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

template <typename Derived>
bool is_psd(const Eigen::MatrixBase<Derived>& m, typename Derived::Scalar tol = 1e-10) {
  return min_eigenvalue(m) >= -tol;
}

/// Largest real part over the spectrum of a square matrix.
template <typename Derived>
typename Derived::Scalar spectral_abscissa(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  Eigen::EigenSolver<Matrix<Scalar>> es(Matrix<Scalar>(a), false);
  return es.eigenvalues().real().maxCoeff();
}

template <typename Derived>
bool is_hurwitz(const Eigen::MatrixBase<Derived>& a) {
  return spectral_abscissa(a) < 0;
}

/// Steady solution X of A X + X A^T + Qn = 0 (Bartels-Stewart on the complex
/// Schur form of A). A must be Hurwitz.
template <typename DerivedA, typename DerivedQ>
Matrix<typename DerivedA::Scalar> solve_lyapunov_steady(const Eigen::MatrixBase<DerivedA>& a,
                                                        const Eigen::MatrixBase<DerivedQ>& qn) {
  using Scalar = typename DerivedA::Scalar;
  using Complex = std::complex<Scalar>;
  using CMatrix = Matrix<Complex>;

  const Eigen::Index n = a.rows();
  if (a.cols() != n || qn.rows() != n || qn.cols() != n) {
    throw std::invalid_argument("solve_lyapunov_steady: dimension mismatch");
  }

  Eigen::ComplexSchur<CMatrix> schur(a.template cast<Complex>());
  const CMatrix& s = schur.matrixT();
  const CMatrix& u = schur.matrixU();

  Scalar abscissa = -std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) abscissa = std::max(abscissa, s(i, i).real());
  if (!(abscissa < 0)) {
    throw UnstableError("unstable drift: spectral abscissa " + std::to_string(abscissa) + " >= 0",
                        abscissa);
  }

  // S Y + Y S^H = W, solved column by column from the right.
  const CMatrix w = -(u.adjoint() * qn.template cast<Complex>() * u);
  CMatrix y = CMatrix::Zero(n, n);
  Eigen::Matrix<Complex, Eigen::Dynamic, 1> rhs(n);
  for (Eigen::Index j = n - 1; j >= 0; --j) {
    rhs = w.col(j);
    for (Eigen::Index k = j + 1; k < n; ++k) rhs -= std::conj(s(j, k)) * y.col(k);
    const Complex shift = std::conj(s(j, j));
    for (Eigen::Index i = n - 1; i >= 0; --i) {
      Complex acc = rhs(i);
      for (Eigen::Index l = i + 1; l < n; ++l) acc -= s(i, l) * y(l, j);
      y(i, j) = acc / (s(i, i) + shift);
    }
  }
  const Matrix<Scalar> x = (u * y * u.adjoint()).real();
  return symmetrize(x);
}

/// ‖A X + X A^T + Qn‖_F
template <typename DA, typename DX, typename DQ>
typename DA::Scalar lyapunov_residual(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DX>& x,
                                      const Eigen::MatrixBase<DQ>& qn) {
  return (a * x + x * a.transpose() + qn).norm();
}

struct SteadySolveOptions {
  double step = 1e-3;
  double convergence_tol = 1e-10;
  double max_time = 50.0;
  /// Rate used to make the flow residual dimensionless (‖rhs‖ carries 1/time).
  double rate_scale = 1.0;

  /// Defaults tied to the slowest relaxation rate of the problem.
  static SteadySolveOptions for_rate(double rate) {
    return SteadySolveOptions{1e-3 / rate, 1e-10, 50.0 / rate, rate};
  }

  void validate() const {
    if (!(step > 0) || !(convergence_tol > 0) || !(max_time > step) || !(rate_scale > 0)) {
      throw std::invalid_argument(
          "SteadySolveOptions: need step > 0, convergence_tol > 0, max_time > step, rate_scale > 0");
    }
  }
};

/// Time-march dX/dt = rhs(X) with classical RK4 until
/// ‖rhs(X)‖ / (rate_scale · max(1, ‖X‖)) < convergence_tol.
/// Iterates are re-symmetrized; the step is halved whenever the residual jumps.
template <typename Flow, typename Derived>
Matrix<typename Derived::Scalar> integrate_to_steady(Flow&& rhs, const Eigen::MatrixBase<Derived>& x0,
                                                     const SteadySolveOptions& opts) {
  using Scalar = typename Derived::Scalar;
  using Mat = Matrix<Scalar>;
  opts.validate();

  auto residual_of = [&](const Mat& x, const Mat& dx) {
    return dx.norm() / (opts.rate_scale * std::max(Scalar(1), x.norm()));
  };

  Mat x = symmetrize(Mat(x0));
  Mat fx = rhs(x);
  Scalar residual = residual_of(x, fx);
  if (residual < opts.convergence_tol) return x;

  Scalar h = opts.step;
  const Scalar min_step = opts.step * 1e-8;
  Scalar t = 0;
  while (t < opts.max_time) {
    const Mat k1 = fx;
    const Mat k2 = rhs(Mat(symmetrize(x + (h / 2) * k1)));
    const Mat k3 = rhs(Mat(symmetrize(x + (h / 2) * k2)));
    const Mat k4 = rhs(Mat(symmetrize(x + h * k3)));
    Mat next = symmetrize(x + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4));
    Mat fnext = rhs(next);
    const Scalar next_residual = residual_of(next, fnext);

    if (!std::isfinite(next_residual) || next_residual > Scalar(1.5) * residual) {
      h /= 2;
      if (h < min_step) {
        throw ConvergenceError("steady state not reached: step underflow, residual " +
                                   std::to_string(residual),
                               residual);
      }
      continue;
    }
    x = std::move(next);
    fx = std::move(fnext);
    residual = next_residual;
    t += h;
    if (residual < opts.convergence_tol) return x;
  }
  throw ConvergenceError("steady state not reached within max_time, residual " + std::to_string(residual),
                         residual);
}

struct CareOptions {
  /// Accept P when the residual is below tol · ‖Q‖_F.
  double tol = 1e-8;
  int max_newton = 80;
  int max_sign = 100;
};

/// ‖A^T P + P A + Q − P B R⁻¹ B^T P‖_F
template <typename DA, typename DB, typename DQ, typename DR, typename DP>
typename DA::Scalar care_residual(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b,
                                  const Eigen::MatrixBase<DQ>& q, const Eigen::MatrixBase<DR>& r,
                                  const Eigen::MatrixBase<DP>& p) {
  using Mat = Matrix<typename DA::Scalar>;
  const Mat g = b * Mat(r).llt().solve(Mat(b.transpose()));
  return (a.transpose() * p + p * a + q - p * g * p).norm();
}

namespace detail {

/// Initial guess for the stabilizing CARE solution from the matrix sign
/// function of the Hamiltonian. Returns false when the iteration breaks down.
template <typename Scalar>
bool care_sign_guess(const Matrix<Scalar>& a, const Matrix<Scalar>& g, const Matrix<Scalar>& q, int max_iter,
                     Matrix<Scalar>& p) {
  using Mat = Matrix<Scalar>;
  const Eigen::Index m = a.rows();
  Mat z(2 * m, 2 * m);
  z << a, -g, -q, -a.transpose();

  for (int it = 0; it < max_iter; ++it) {
    Eigen::PartialPivLU<Mat> lu(z);
    const auto diag = lu.matrixLU().diagonal();
    Scalar logdet = 0;
    for (Eigen::Index i = 0; i < diag.size(); ++i) {
      const Scalar d = std::abs(diag(i));
      if (!(d > 0) || !std::isfinite(d)) return false;
      logdet += std::log(d);
    }
    const Scalar c = std::exp(logdet / Scalar(2 * m));
    const Mat next = (z / c + c * lu.inverse()) / Scalar(2);
    if (!next.allFinite()) return false;
    const Scalar change = (next - z).norm();
    z = next;
    if (change <= Scalar(1e-13) * z.norm()) break;
  }

  const Mat ident = Mat::Identity(m, m);
  Mat lhs(2 * m, m);
  Mat rhs(2 * m, m);
  lhs << z.topRightCorner(m, m), z.bottomRightCorner(m, m) + ident;
  rhs << -(z.topLeftCorner(m, m) + ident), -z.bottomLeftCorner(m, m);
  p = symmetrize(Mat(lhs.colPivHouseholderQr().solve(rhs)));
  return p.allFinite();
}

}  // namespace detail

/// Stabilizing solution of A^T P + P A + Q − P B R⁻¹ B^T P = 0.
/// Sign-function initial guess refined by Newton–Kleinman iteration.
template <typename DA, typename DB, typename DQ, typename DR>
Matrix<typename DA::Scalar> solve_care(const Eigen::MatrixBase<DA>& a_in, const Eigen::MatrixBase<DB>& b_in,
                                       const Eigen::MatrixBase<DQ>& q_in, const Eigen::MatrixBase<DR>& r_in,
                                       const CareOptions& opts = {}) {
  using Scalar = typename DA::Scalar;
  using Mat = Matrix<Scalar>;
  const Mat a = a_in;
  const Mat b = b_in;
  const Mat q = symmetrize(Mat(q_in));
  const Mat r = r_in;
  const Eigen::Index m = a.rows();
  if (a.cols() != m || b.rows() != m || q.rows() != m || q.cols() != m || r.rows() != b.cols() ||
      r.cols() != b.cols()) {
    throw std::invalid_argument("solve_care: dimension mismatch");
  }
  if ((r - r.transpose()).norm() > Scalar(1e-12) * r.norm()) {
    throw std::invalid_argument("solve_care: R must be symmetric");
  }
  Eigen::LLT<Mat> r_llt(r);
  if (r_llt.info() != Eigen::Success || !(min_eigenvalue(r) > 0)) {
    throw std::invalid_argument("solve_care: R must be positive definite");
  }

  const Mat g = symmetrize(Mat(b * r_llt.solve(Mat(b.transpose()))));
  const Scalar q_norm = q.norm();

  auto residual_of = [&](const Mat& p) { return (a.transpose() * p + p * a + q - p * g * p).norm(); };
  auto scale_of = [&](const Mat& p) { return q_norm > 0 ? q_norm : (p * g * p).norm(); };

  Mat p;
  const bool a_stable = is_hurwitz(a);
  if (!detail::care_sign_guess(a, g, q, opts.max_sign, p) || !is_hurwitz(Mat(a - g * p))) {
    if (!a_stable) {
      throw ConvergenceError("solve_care: no stabilizing initial guess (pair not stabilizable?)",
                             std::numeric_limits<Scalar>::infinity());
    }
    p = Mat::Zero(m, m);
  }

  Scalar residual = residual_of(p);
  Scalar best = residual;
  Mat best_p = p;
  int stalled = 0;
  for (int it = 0; it < opts.max_newton; ++it) {
    if (residual <= Scalar(opts.tol) * scale_of(p)) return p;
    const Mat closed = a - g * p;
    Mat next;
    try {
      next = solve_lyapunov_steady(closed.transpose(), Mat(q + p * g * p));
    } catch (const UnstableError&) {
      break;
    }
    p = next;
    residual = residual_of(p);
    if (residual < best) {
      best = residual;
      best_p = p;
      stalled = 0;
    } else if (++stalled >= 4) {
      break;
    }
  }
  if (best <= Scalar(opts.tol) * scale_of(best_p)) return best_p;
  throw ConvergenceError("solve_care: residual " + std::to_string(best) + " above tolerance", best);
}

}  // namespace gst::numerics
