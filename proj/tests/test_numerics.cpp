#include <doctest.h>

#include <random>

#include <unsupported/Eigen/KroneckerProduct>

#include "gst/numerics.hpp"

using namespace gst;
using numerics::Matrix;

namespace {

Eigen::MatrixXd random_hurwitz(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = g(rng);
  const double shift = numerics::spectral_abscissa(a) + 0.5;
  return a - shift * Eigen::MatrixXd::Identity(n, n);
}

Eigen::MatrixXd random_psd(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd l(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) l(i, j) = g(rng);
  return l * l.transpose();
}

// vec(A X + X A^T) = (I ⊗ A + A ⊗ I) vec(X)
Eigen::MatrixXd kronecker_lyapunov(const Eigen::MatrixXd& a, const Eigen::MatrixXd& q) {
  const Eigen::Index n = a.rows();
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd op = Eigen::kroneckerProduct(id, a) + Eigen::kroneckerProduct(a, id);
  const Eigen::VectorXd vq = Eigen::Map<const Eigen::VectorXd>(q.data(), n * n);
  const Eigen::VectorXd vx = op.fullPivLu().solve(-vq);
  return Eigen::Map<const Eigen::MatrixXd>(vx.data(), n, n);
}

}  // namespace

TEST_CASE("scalar Lyapunov") {
  Eigen::MatrixXd a(1, 1), q(1, 1);
  a << -1.0;
  q << 2.0;
  CHECK(numerics::solve_lyapunov_steady(a, q)(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("Lyapunov matches the Kronecker-product linear system") {
  std::mt19937_64 rng(11);
  for (int n : {2, 5, 9}) {
    const Eigen::MatrixXd a = random_hurwitz(n, rng);
    const Eigen::MatrixXd q = random_psd(n, rng);
    const Eigen::MatrixXd x = numerics::solve_lyapunov_steady(a, q);
    const Eigen::MatrixXd ref = kronecker_lyapunov(a, q);
    CHECK((x - ref).norm() / ref.norm() < 1e-10);
    CHECK(numerics::lyapunov_residual(a, x, q) < 1e-10 * q.norm());
    CHECK((x - x.transpose()).norm() == 0.0);
    CHECK(numerics::is_psd(x));
  }
}

TEST_CASE("Lyapunov solver is generic in the scalar type") {
  Eigen::Matrix<long double, 2, 2> a;
  a << -2.0L, 1.0L, 0.0L, -3.0L;
  const Eigen::Matrix<long double, 2, 2> q = Eigen::Matrix<long double, 2, 2>::Identity();
  const Matrix<long double> x = numerics::solve_lyapunov_steady(a, q);
  CHECK(static_cast<double>((a * x + x * a.transpose() + q).norm()) < 1e-15);
}

TEST_CASE("Lyapunov rejects unstable drift and bad shapes") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(3, 3);
  CHECK_THROWS_AS(numerics::solve_lyapunov_steady(a, Eigen::MatrixXd::Identity(3, 3)), UnstableError);
  a = -a;
  CHECK_THROWS_AS(numerics::solve_lyapunov_steady(a, Eigen::MatrixXd::Identity(2, 2)), std::invalid_argument);
}

TEST_CASE("time marching reaches the algebraic solution") {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd a = random_hurwitz(4, rng);
  const Eigen::MatrixXd q = random_psd(4, rng);
  auto rhs = [&](const Eigen::MatrixXd& x) -> Eigen::MatrixXd { return a * x + x * a.transpose() + q; };
  const double rate = -numerics::spectral_abscissa(a);
  auto opts = numerics::SteadySolveOptions::for_rate(rate);
  opts.step = 0.01 / rate;
  opts.max_time = 200.0 / rate;
  const Eigen::MatrixXd x = numerics::integrate_to_steady(rhs, Eigen::MatrixXd::Zero(4, 4), opts);
  const Eigen::MatrixXd ref = numerics::solve_lyapunov_steady(a, q);
  CHECK((x - ref).norm() / ref.norm() < 1e-8);
}

TEST_CASE("time marching reports non-convergence") {
  Eigen::MatrixXd a(1, 1);
  a << 1.0;
  auto rhs = [&](const Eigen::MatrixXd& x) -> Eigen::MatrixXd { return 2 * a * x + Eigen::MatrixXd::Ones(1, 1); };
  numerics::SteadySolveOptions opts{1e-3, 1e-10, 1.0, 1.0};
  CHECK_THROWS_AS(numerics::integrate_to_steady(rhs, Eigen::MatrixXd::Zero(1, 1), opts), ConvergenceError);
}

TEST_CASE("scalar CARE root") {
  // −2k p + q − p²/r = 0 with the positive root p = r(−k + √(k² + q/r)).
  for (double r : {3.0, 1e-3, 1e-9}) {
    const double k = 1.0, q = 1.0;
    Eigen::MatrixXd a(1, 1), b(1, 1), qq(1, 1), rr(1, 1);
    a << -k;
    b << 1.0;
    qq << q;
    rr << r;
    const double p = numerics::solve_care(a, b, qq, rr)(0, 0);
    const double ref = r * q / r / (k + std::sqrt(k * k + q / r));
    CHECK(p == doctest::Approx(ref).epsilon(1e-10));
  }
}

TEST_CASE("CARE example: diagonal syndrome problem") {
  // Ã = −(ν+Γ)/2 I3 with an isometric Btil gives P = r diag{f}.
  const double k = 0.5 * 2 * M_PI * (30e3 + 1.0);
  Eigen::Matrix<double, 3, 6> btil = Eigen::Matrix<double, 3, 6>::Zero();
  btil(0, 1) = btil(1, 2) = btil(2, 4) = 1.0;
  Eigen::Vector3d w(9, 3, 3);
  for (double r : {1e-6, 1e-9, 1e-12, 1e-15}) {
    const Eigen::MatrixXd p = numerics::solve_care(Eigen::MatrixXd(-k * Eigen::MatrixXd::Identity(3, 3)),
                                                   Eigen::MatrixXd(btil), Eigen::MatrixXd(w.asDiagonal()),
                                                   Eigen::MatrixXd(r * Eigen::MatrixXd::Identity(6, 6)));
    for (int i = 0; i < 3; ++i) {
      const double f = (w(i) / r) / (k + std::sqrt(k * k + w(i) / r));
      CHECK(p(i, i) == doctest::Approx(r * f).epsilon(1e-10));
    }
    CHECK(std::abs(p(0, 1)) < 1e-12 * p.norm());
  }
}

TEST_CASE("CARE on a random stabilizable system") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  Eigen::MatrixXd a(4, 4), b(4, 2);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) a(i, j) = g(rng);
    for (int j = 0; j < 2; ++j) b(i, j) = g(rng);
  }
  const Eigen::MatrixXd q = Eigen::MatrixXd::Identity(4, 4);
  const Eigen::MatrixXd r = Eigen::MatrixXd::Identity(2, 2);
  const Eigen::MatrixXd p = numerics::solve_care(a, b, q, r);
  CHECK(numerics::care_residual(a, b, q, r, p) < 1e-8);
  CHECK(numerics::is_psd(p));
  CHECK(numerics::is_hurwitz(Eigen::MatrixXd(a - b * b.transpose() * p)));
}

TEST_CASE("CARE rejects an indefinite input weight") {
  const Eigen::MatrixXd a = -Eigen::MatrixXd::Identity(2, 2);
  const Eigen::MatrixXd b = Eigen::MatrixXd::Identity(2, 2);
  const Eigen::MatrixXd r = -Eigen::MatrixXd::Identity(2, 2);
  CHECK_THROWS_AS(numerics::solve_care(a, b, b, r), std::invalid_argument);
}

TEST_CASE("symmetric helpers") {
  Eigen::Matrix2d m;
  m << 1, 2, 0, 1;
  CHECK(numerics::symmetrize(m)(0, 1) == 1.0);
  CHECK(numerics::min_eigenvalue(numerics::symmetrize(m)) == doctest::Approx(0.0));
  CHECK(numerics::is_psd(numerics::symmetrize(m)));
  CHECK_FALSE(numerics::is_psd(Eigen::Matrix2d(-Eigen::Matrix2d::Identity())));
  CHECK(numerics::spectral_abscissa(m) == doctest::Approx(1.0));
  CHECK_FALSE(numerics::is_hurwitz(m));
}
