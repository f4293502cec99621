#include "gst/closedloop.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>

#include <fmt/format.h>

#include "gst/errors.hpp"
#include "gst/numerics.hpp"

namespace gst {

namespace {

Mat6 checked_inverse(const Mat6& m, const char* name) {
  Eigen::FullPivLU<Mat6> lu(m);
  if (!lu.isInvertible()) {
    throw SingularMatrixError(fmt::format("vprime_explicit: factor {} is singular", name));
  }
  return lu.inverse();
}

}  // namespace

AugmentedModel build_augmented(const MemoryParams& params, const SystemMatrices& sys, const NoiseModel& noise,
                               const MeasurementModel& mm, const SynMat& Ktil, const SixBySyn& F) {
  const Eigen::Index m = mm.dim();
  if (Ktil.rows() != m || Ktil.cols() != m || F.cols() != m) {
    throw std::invalid_argument("build_augmented: gain dimensions do not match the measurement mode");
  }
  const Eigen::MatrixXd a_til = -params.half_rate() * Eigen::MatrixXd::Identity(m, m);

  AugmentedModel am;
  am.m = m;
  am.Az.resize(6 + m, 6 + m);
  am.Az.topLeftCorner(6, 6) = sys.A;
  am.Az.topRightCorner(6, m) = F;
  am.Az.bottomLeftCorner(m, 6) = Ktil * mm.C;
  am.Az.bottomRightCorner(m, m) = a_til - Ktil * mm.C * mm.Btil.transpose() + mm.Btil * F;

  am.Bz.resize(6 + m, 12);
  am.Bz.topRows(6) = sys.B;
  am.Bz.bottomRows(m) = Ktil * mm.D;
  am.Sigma = noise.SigmaW;

  Eigen::EigenSolver<Eigen::MatrixXd> es(am.Az, false);
  Eigen::Index worst = 0;
  es.eigenvalues().real().maxCoeff(&worst);
  const std::complex<double> lambda = es.eigenvalues()(worst);
  if (!(lambda.real() < 0)) {
    throw UnstableError(
        fmt::format("closed loop unstable: eigenvalue {} {:+}i has non-negative real part", lambda.real(),
                    lambda.imag()),
        lambda.real());
  }
  return am;
}

ClosedLoopCovariance closed_loop_covariance(const AugmentedModel& am) {
  ClosedLoopCovariance out;
  const Eigen::MatrixXd q = numerics::symmetrize(Eigen::MatrixXd(am.Bz * am.Sigma * am.Bz.transpose()));
  out.Vz = numerics::solve_lyapunov_steady(am.Az, q);
  out.Vprime = out.Vz.topLeftCorner(6, 6);
  return out;
}

Eigen::VectorXd closed_loop_mean(const AugmentedModel& am, const Vec6& drive) {
  Eigen::VectorXd forcing = Eigen::VectorXd::Zero(6 + am.m);
  forcing.head<6>() = drive;
  return -am.Az.partialPivLu().solve(forcing);
}

const char* to_string(GainReading reading) {
  return reading == GainReading::FullKalmanGain ? "full_kalman_gain" : "lifted_syndrome_gain";
}

Mat6 vprime_explicit(const MemoryParams& params, const SystemMatrices& sys, const NoiseModel& noise,
                     const MeasurementModel& mm, const SixBySyn& K, const SixBySyn& F, GainReading reading) {
  const SixBySyn k = reading == GainReading::FullKalmanGain
                         ? K
                         : SixBySyn(mm.Btil.transpose() * (mm.Btil * K));
  const Mat6& a = sys.A;
  const Mat6 fb = F * mm.Btil;
  const Mat6 kc = k * mm.C;

  Eigen::Matrix<double, 6, 12> row;
  row << a - kc + fb, -fb;
  Eigen::Matrix<double, 12, 12> noise_map;
  noise_map << sys.B, k * mm.D;
  Eigen::Matrix<double, 12, 6> col;
  col << (a - kc + fb).transpose(), -fb.transpose();

  const Mat6 inner = row * noise_map * noise.SigmaW * noise_map.transpose() * col *
                     checked_inverse(a - kc, "(A - K C)") * checked_inverse(fb + a, "(F Btil + A)");
  const Mat6 bath = params.gamma * (params.n_occ + 0.5) * Mat6::Identity() +
                    params.nu * input_covariance(noise.Lambda);
  return -0.5 * checked_inverse(2 * a - kc + fb, "(2A - K C + F Btil)") * (inner + bath);
}

bool ExplicitFormulaReport::any_match() const {
  for (const auto& r : readings) {
    if (r.matches) return true;
  }
  return false;
}

ExplicitFormulaReport compare_vprime_explicit(const MemoryParams& params, const SystemMatrices& sys,
                                              const NoiseModel& noise, const MeasurementModel& mm,
                                              const SixBySyn& K, const SixBySyn& F, const Mat6& vprime_lyapunov,
                                              double tol) {
  ExplicitFormulaReport report;
  report.tolerance = tol;
  for (GainReading reading : {GainReading::FullKalmanGain, GainReading::LiftedSyndromeGain}) {
    ExplicitFormulaReport::Reading entry;
    entry.reading = reading;
    try {
      const Mat6 v = vprime_explicit(params, sys, noise, mm, K, F, reading);
      entry.relative_error = (v - vprime_lyapunov).norm() / vprime_lyapunov.norm();
      entry.matches = entry.relative_error < tol;
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
          const auto ref = vprime_lyapunov.block<2, 2>(2 * i, 2 * j);
          const double err = (v.block<2, 2>(2 * i, 2 * j) - ref).norm() / vprime_lyapunov.norm();
          if (err >= tol) entry.mismatched_blocks.push_back(fmt::format("Vprime({},{})", i + 1, j + 1));
        }
      }
    } catch (const SingularMatrixError& e) {
      entry.relative_error = std::numeric_limits<double>::infinity();
      entry.error = e.what();
    }
    report.readings.push_back(std::move(entry));
  }
  return report;
}

double controlled_fidelity(const Mat6& vprime, const Mat6& v_in) { return fidelity(vprime, v_in); }

Scenario build_scenario(const ScenarioSpec& spec) {
  spec.params.validate();
  Scenario sc;
  sc.spec = spec;
  sc.enc = Encoding::make(spec.alpha_in);
  sc.noise = NoiseModel::encoded(spec.source, spec.mu, spec.params.n_occ);
  sc.filter_noise = filter_noise_view(sc.noise, spec.mode);
  sc.sys = system_matrices(spec.params, sc.enc);
  if (spec.drive) sc.sys.drive = *spec.drive;
  sc.filter = design_stationary_filter(spec.mode, sc.enc, spec.params, sc.filter_noise);
  sc.eval_filter = spec.mode == FilterMode::S1 ? sc.filter
                                               : design_stationary_filter(spec.mode, sc.enc, spec.params, sc.noise);

  const Eigen::Index m = sc.filter.mm.dim();
  if (spec.r) {
    sc.lqg = LqgConfig::make(spec.mode, *spec.r);
    sc.gains = lqg_gains(*sc.lqg, spec.params, sc.enc);
    sc.F = sc.gains->Fgain;
  } else {
    sc.F = SixBySyn::Zero(6, m);
  }
  sc.am = build_augmented(spec.params, sc.sys, sc.noise, sc.filter.mm, sc.filter.Ktil, sc.F);
  sc.V_in = input_covariance(sc.noise.Lambda);
  return sc;
}

ClosedLoopResult analyze(const Scenario& sc) {
  ClosedLoopResult out;
  out.cov = closed_loop_covariance(sc.am);
  out.fidelity = controlled_fidelity(out.cov.Vprime, sc.V_in);
  return out;
}

}  // namespace gst
