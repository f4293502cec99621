#include "gst/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace gst {

namespace {

constexpr double kHbar = 1.054571817e-34;      // J s
constexpr double kBoltzmann = 1.380649e-23;    // J / K
constexpr double kEncodingTol = 1e-12;

Eigen::Matrix2d lambda_block(const FieldMode& m) {
  Eigen::Matrix2d b;
  b << m.q_variance(), m.M.imag(),
       m.M.imag(), m.p_variance();
  return b;
}

void require(bool ok, const char* what) {
  if (!ok) throw std::logic_error(fmt::format("encoding invariant violated: {}", what));
}

}  // namespace

const char* to_string(FilterMode mode) { return mode == FilterMode::S1 ? "s1" : "s2"; }

FilterMode parse_filter_mode(const std::string& text) {
  if (text == "s1" || text == "S1") return FilterMode::S1;
  if (text == "s2" || text == "S2") return FilterMode::S2;
  throw std::invalid_argument(fmt::format("filter mode must be s1 or s2, got '{}'", text));
}

MemoryParams MemoryParams::from_hz(double nu_over_2pi_hz, double gamma_over_2pi_hz, double n_occ) {
  MemoryParams p{kTwoPi * nu_over_2pi_hz, kTwoPi * gamma_over_2pi_hz, n_occ};
  p.validate();
  return p;
}

void MemoryParams::validate() const {
  if (!(nu > 0)) throw std::invalid_argument(fmt::format("nu must be > 0, got {}", nu));
  if (!(gamma >= 0)) throw std::invalid_argument(fmt::format("gamma must be >= 0, got {}", gamma));
  if (!(n_occ >= 0)) throw std::invalid_argument(fmt::format("n_occ must be >= 0, got {}", n_occ));
}

double FieldMode::q_variance() const {
  return squeezing ? 0.5 * std::exp(*squeezing) : N + M.real() + 0.5;
}

double FieldMode::p_variance() const {
  return squeezing ? 0.5 * std::exp(-*squeezing) : N - M.real() + 0.5;
}

bool FieldMode::satisfies_heisenberg(double tol) const {
  return N >= 0 && N * (N + 1) - std::norm(M) >= -tol * std::max(1.0, N * (N + 1));
}

bool FieldMode::is_pure(double tol) const {
  return std::abs(N * (N + 1) - std::norm(M)) <= tol * std::max(1.0, N * (N + 1));
}

Mat6 tritter() {
  const double a = std::sqrt(1.0 / 3.0);
  const double b = std::sqrt(2.0 / 3.0);
  const double c = std::sqrt(1.0 / 6.0);
  const double d = std::sqrt(1.0 / 2.0);
  Mat6 t;
  t << a, 0, -b, 0, 0, 0,
       0, a, 0, -b, 0, 0,
       a, 0, c, 0, d, 0,
       0, a, 0, c, 0, d,
       a, 0, c, 0, -d, 0,
       0, a, 0, c, 0, -d;
  return t;
}

FieldMode squeezed_vacuum(double mu) {
  const double ep = std::exp(mu);
  const double em = std::exp(-mu);
  return FieldMode{(ep + em - 2.0) / 4.0, {(ep - em) / 4.0, 0.0}, mu};
}

Vec6 drive_vector(double alpha_in) {
  Vec6 v;
  v << 1, 0, 1, 0, 1, 0;
  return std::sqrt(2.0 / 3.0) * alpha_in * v;
}

double thermal_occupation(double temp_kelvin, double omega) {
  if (!(temp_kelvin > 0) || !(omega > 0)) {
    throw std::invalid_argument("thermal_occupation: temperature and frequency must be positive");
  }
  const double x = kHbar * omega / (kBoltzmann * temp_kelvin);
  if (x > 700.0) return 0.0;
  return 1.0 / std::expm1(x);
}

Mat6 lambda_matrix(const FieldMode& m1, const FieldMode& m2, const FieldMode& m3) {
  const FieldMode* modes[3] = {&m1, &m2, &m3};
  Mat6 lambda = Mat6::Zero();
  for (int j = 0; j < 3; ++j) {
    if (!modes[j]->satisfies_heisenberg()) {
      throw std::invalid_argument(fmt::format(
          "field mode {} violates N(N+1) >= |M|^2 (N={}, |M|={})", j + 1, modes[j]->N, std::abs(modes[j]->M)));
    }
    lambda.block<2, 2>(2 * j, 2 * j) = lambda_block(*modes[j]);
  }
  return lambda;
}

Mat6 input_covariance(const Mat6& lambda) {
  const Mat6 t = tritter();
  const Mat6 v = t * lambda * t.transpose();
  return (v + v.transpose()) / 2;
}

Encoding Encoding::make(double alpha_in) {
  Encoding e;
  e.T = tritter();
  e.beta = drive_vector(alpha_in);
  e.Z1.setZero();
  e.Z1(0, 1) = e.Z1(1, 2) = e.Z1(2, 4) = 1.0;
  e.Z2.setZero();
  e.Z2(0, 2) = e.Z2(1, 4) = 1.0;
  e.Btil1 = e.Z1 * e.T.transpose();
  e.Btil2 = e.Z2 * e.T.transpose();

  require((e.T.transpose() * e.T - Mat6::Identity()).cwiseAbs().maxCoeff() < kEncodingTol, "T^T T = I");
  require((e.Btil1 * e.Btil1.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < kEncodingTol,
          "Btil1 isometry");
  require((e.Btil2 * e.Btil2.transpose() - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() < kEncodingTol,
          "Btil2 isometry");
  const double scale = std::max(1.0, e.beta.norm());
  require((e.Btil1 * e.beta).norm() < kEncodingTol * scale, "Btil1 beta = 0");
  require((e.Btil2 * e.beta).norm() < kEncodingTol * scale, "Btil2 beta = 0");
  return e;
}

SynBy6 Encoding::selector(FilterMode mode) const {
  return mode == FilterMode::S1 ? SynBy6(Z1) : SynBy6(Z2);
}

SynBy6 Encoding::syndrome_map(FilterMode mode) const {
  return mode == FilterMode::S1 ? SynBy6(Btil1) : SynBy6(Btil2);
}

NoiseModel NoiseModel::make(const FieldMode& m1, const FieldMode& m2, const FieldMode& m3, double n_occ) {
  if (!(n_occ >= 0)) throw std::invalid_argument("n_occ must be >= 0");
  NoiseModel nm;
  nm.Lambda = lambda_matrix(m1, m2, m3);
  nm.n_occ = n_occ;
  nm.SigmaW.setZero();
  nm.SigmaW.topLeftCorner<6, 6>() = nm.Lambda;
  nm.SigmaW.bottomRightCorner<6, 6>() = (n_occ + 0.5) * Mat6::Identity();
  return nm;
}

NoiseModel NoiseModel::encoded(const FieldMode& source, double mu, double n_occ) {
  const FieldMode ancilla = squeezed_vacuum(mu);
  return make(source, ancilla, ancilla, n_occ);
}

}  // namespace gst
