#include "gst/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "gst/errors.hpp"
#include "gst/numerics.hpp"

namespace gst {

TrajectoryConfig TrajectoryConfig::for_params(const MemoryParams& params, FilterMode mode, std::uint64_t seed) {
  TrajectoryConfig cfg;
  cfg.dt = 1e-3 / params.total_rate();
  cfg.duration = 100.0 / params.total_rate();
  cfg.seed = seed;
  cfg.mode = mode;
  cfg.record_stride = 50;
  cfg.innovation_stride = 1000;
  return cfg;
}

std::int64_t TrajectoryConfig::steps() const { return std::llround(duration / dt); }

void TrajectoryConfig::validate() const {
  if (!(dt > 0)) throw std::invalid_argument(fmt::format("trajectory dt must be > 0, got {}", dt));
  if (!(duration >= dt)) throw std::invalid_argument("trajectory duration must be >= dt");
  if (record_stride < 1) throw std::invalid_argument("record_stride must be >= 1");
  if (innovation_stride < 1) throw std::invalid_argument("innovation_stride must be >= 1");
  if (!(burn_in_fraction >= 0 && burn_in_fraction < 1)) throw std::invalid_argument("burn_in_fraction must be in [0, 1)");
}

InnovationAccumulator::InnovationAccumulator(Eigen::Index m_, double dt_, int block_)
    : m(m_),
      dt(dt_),
      block(block_),
      sum(Eigen::VectorXd::Zero(m_)),
      outer(Eigen::MatrixXd::Zero(m_, m_)),
      block_sum(Eigen::VectorXd::Zero(m_)),
      block_outer(Eigen::MatrixXd::Zero(m_, m_)),
      lag_cross(Eigen::VectorXd::Zero(m_)),
      lag_first(Eigen::VectorXd::Zero(m_)),
      lag_second(Eigen::VectorXd::Zero(m_)) {}

void InnovationAccumulator::add_step(const SynVec& increment) {
  sum += increment;
  outer.noalias() += increment * increment.transpose();
  ++steps;
}

void InnovationAccumulator::add_blocks(const std::vector<SynVec>& bs) {
  for (std::size_t k = 0; k < bs.size(); ++k) {
    block_sum += bs[k];
    block_outer.noalias() += bs[k] * bs[k].transpose();
    ++blocks;
    if (k + 1 < bs.size()) {
      lag_cross += bs[k].cwiseProduct(bs[k + 1]);
      lag_first += bs[k];
      lag_second += bs[k + 1];
      ++pairs;
    }
  }
}

void InnovationAccumulator::merge(const InnovationAccumulator& o) {
  if (o.m == 0) return;
  if (m == 0) {
    *this = o;
    return;
  }
  if (o.m != m || o.block != block || o.dt != dt) {
    throw std::invalid_argument("cannot merge innovation statistics from different configurations");
  }
  steps += o.steps;
  sum += o.sum;
  outer += o.outer;
  blocks += o.blocks;
  block_sum += o.block_sum;
  block_outer += o.block_outer;
  pairs += o.pairs;
  lag_cross += o.lag_cross;
  lag_first += o.lag_first;
  lag_second += o.lag_second;
}

NoiseSampler::NoiseSampler(const Mat12& sigma) {
  Eigen::SelfAdjointEigenSolver<Mat12> es(0.5 * (sigma + sigma.transpose()));
  Eigen::Matrix<double, 12, 1> ev = es.eigenvalues();
  for (int i = 0; i < 12; ++i) {
    if (ev(i) < -1e-12) {
      throw std::invalid_argument(fmt::format("noise covariance is not PSD: eigenvalue {}", ev(i)));
    }
    ev(i) = std::sqrt(std::max(ev(i), 0.0));
  }
  factor_ = es.eigenvectors() * ev.asDiagonal();
}

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream_index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_index), static_cast<std::uint32_t>(stream_index >> 32)};
  return std::mt19937_64(seq);
}

namespace {

SynVec band(const Mat6& vc, const MeasurementModel& mm) {
  return (mm.Btil * vc * mm.Btil.transpose()).diagonal().cwiseMax(0.0).cwiseSqrt();
}

}  // namespace

Trajectory simulate_trajectory(const TrajectoryConfig& cfg, const Scenario& sc) {
  cfg.validate();
  if (cfg.mode != sc.spec.mode) throw std::invalid_argument("trajectory mode does not match the scenario");
  if (cfg.control_enabled && !sc.gains) {
    throw std::invalid_argument("control enabled but the scenario has no control penalty r");
  }
  const MemoryParams& params = sc.spec.params;
  const MeasurementModel& mm = sc.filter.mm;
  const Eigen::Index m = mm.dim();
  const double dt = cfg.dt;
  const double out_rate = std::sqrt(2.0 * params.nu);
  const std::int64_t n = cfg.steps();
  const std::int64_t burn_in = static_cast<std::int64_t>(std::ceil(cfg.burn_in_fraction * n));

  auto rng = make_stream(cfg.seed, cfg.stream_index);
  NoiseSampler sampler(sc.noise.SigmaW);
  std::normal_distribution<double> normal(0.0, 1.0);

  const SixBySyn F = cfg.control_enabled ? sc.gains->Fgain : SixBySyn::Zero(6, m);
  SynMat ktil = cfg.gain_scale * sc.filter.Ktil;
  Mat6 vc = cfg.time_varying_gain ? Mat6(Mat6::Identity() / 2) : sc.filter.Vc;

  Trajectory tr;
  tr.dt = dt;
  tr.stride = cfg.record_stride;
  tr.mode = cfg.mode;
  tr.control_enabled = cfg.control_enabled;
  tr.innovation_stats = InnovationAccumulator(m, dt, cfg.innovation_stride);
  const std::size_t records = static_cast<std::size_t>(n / cfg.record_stride) + 1;
  tr.times.reserve(records);
  tr.x.reserve(records);
  tr.pi_s.reserve(records);
  tr.pi_x.reserve(records);
  tr.u.reserve(records);
  tr.err_band.reserve(records);

  Vec6 x;
  for (int i = 0; i < 6; ++i) x(i) = std::sqrt(0.5) * normal(rng);
  SyndromeFilterState ss{SynVec::Zero(m)};
  Vec6 pi_x = Vec6::Zero();
  Vec6 u = Vec6::Zero();

  auto record = [&](std::int64_t step) {
    tr.times.push_back(static_cast<double>(step) * dt);
    tr.x.push_back(x);
    tr.pi_s.push_back(ss.pi_s);
    tr.pi_x.push_back(pi_x);
    tr.u.push_back(u);
    tr.err_band.push_back(band(vc, mm));
  };
  record(0);

  SynVec block = SynVec::Zero(m);
  int in_block = 0;
  for (std::int64_t step = 1; step <= n; ++step) {
    const Eigen::Matrix<double, 12, 1> dw = sampler.draw(rng, dt);
    const SynVec dy = mm.C * x * dt + mm.D * dw;
    x += (sc.sys.A * x + u + sc.sys.drive) * dt + sc.sys.B * dw;

    if (cfg.time_varying_gain) {
      ktil = cfg.gain_scale * mm.Btil * kalman_gain(vc, mm, sc.enc, params, sc.filter_noise);
      vc = numerics::symmetrize(Mat6(vc + dt * riccati_flow(vc, mm, sc.enc, params, sc.filter_noise)));
    }
    const SynVec innovation = dy - out_rate * ss.pi_s * dt;
    ss = syndrome_filter_step(ss, dy, u, dt, ktil, mm, params);
    pi_x = estimate_step(pi_x, dy, u, dt, sc.eval_filter.K, sc.eval_filter.mm, sc.sys);
    u = F * ss.pi_s;

    if (step > burn_in) {
      tr.innovation_stats.add_step(innovation);
      block += innovation;
      if (++in_block == cfg.innovation_stride) {
        tr.innovations.push_back(block);
        block.setZero();
        in_block = 0;
      }
    }
    if (!(x.cwiseAbs().maxCoeff() <= cfg.divergence_bound)) {
      throw Error(fmt::format("trajectory diverged at step {} (|x| > {})", step, cfg.divergence_bound));
    }
    if (step % cfg.record_stride == 0) record(step);
  }
  tr.innovation_stats.add_blocks(tr.innovations);
  return tr;
}

void EnsembleAccumulator::check_compatible(double dt, int stride, std::size_t records, Eigen::Index m,
                                           FilterMode mode, bool control) const {
  if (dt != dt_ || stride != stride_ || records != times_.size() || m != m_ || mode != mode_ ||
      control != control_) {
    throw std::invalid_argument("ensemble trajectories have mismatched configurations");
  }
}

void EnsembleAccumulator::add(const Trajectory& tr) {
  const Eigen::Index m = tr.pi_s.empty() ? 0 : tr.pi_s.front().size();
  if (n_ == 0) {
    dt_ = tr.dt;
    stride_ = tr.stride;
    m_ = m;
    mode_ = tr.mode;
    control_ = tr.control_enabled;
    times_ = tr.times;
    sum_z_.assign(tr.size(), Eigen::VectorXd::Zero(6 + m));
    sum_zz_.assign(tr.size(), Eigen::MatrixXd::Zero(6 + m, 6 + m));
  } else {
    check_compatible(tr.dt, tr.stride, tr.size(), m, tr.mode, tr.control_enabled);
  }
  Eigen::VectorXd z(6 + m);
  for (std::size_t k = 0; k < tr.size(); ++k) {
    z << tr.x[k], tr.pi_s[k];
    sum_z_[k] += z;
    sum_zz_[k].noalias() += z * z.transpose();
  }
  const Vec6 e = tr.x.back() - tr.pi_x.back();
  err_sum_ += e;
  err_outer_ += e * e.transpose();
  innov_.merge(tr.innovation_stats);
  ++n_;
}

void EnsembleAccumulator::merge(const EnsembleAccumulator& o) {
  if (o.n_ == 0) return;
  if (n_ == 0) {
    *this = o;
    return;
  }
  check_compatible(o.dt_, o.stride_, o.times_.size(), o.m_, o.mode_, o.control_);
  for (std::size_t k = 0; k < times_.size(); ++k) {
    sum_z_[k] += o.sum_z_[k];
    sum_zz_[k] += o.sum_zz_[k];
  }
  err_sum_ += o.err_sum_;
  err_outer_ += o.err_outer_;
  innov_.merge(o.innov_);
  n_ += o.n_;
}

EnsembleStatistics ensemble_statistics(const EnsembleAccumulator& acc) {
  if (acc.n_ == 0) throw std::invalid_argument("ensemble_statistics needs at least one trajectory");
  EnsembleStatistics st;
  const double n = static_cast<double>(acc.n_);
  st.n = acc.n_;
  st.times = acc.times_;
  const std::size_t records = acc.times_.size();
  for (std::size_t k = 0; k < records; ++k) {
    const Eigen::VectorXd mean = acc.sum_z_[k] / n;
    st.mean.push_back(mean);
    if (acc.n_ > 1) {
      st.cov.push_back((acc.sum_zz_[k] - n * mean * mean.transpose()) / (n - 1));
    } else {
      st.cov.push_back(Eigen::MatrixXd::Zero(mean.size(), mean.size()));
    }
  }
  const std::size_t tail = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(0.2 * records)));
  st.steady_cov = Eigen::MatrixXd::Zero(6 + acc.m_, 6 + acc.m_);
  for (std::size_t k = records - tail; k < records; ++k) st.steady_cov += st.cov[k];
  st.steady_cov /= static_cast<double>(tail);

  st.final_error_mean = acc.err_sum_ / n;
  if (acc.n_ > 1) {
    const Vec6 var = (acc.err_outer_.diagonal() - n * st.final_error_mean.cwiseAbs2()) / (n - 1);
    st.final_error_sem = (var.cwiseMax(0.0) / n).cwiseSqrt();
  }
  return st;
}

EnsembleStatistics ensemble_statistics(const std::vector<Trajectory>& trajs) {
  EnsembleAccumulator acc;
  for (const auto& t : trajs) acc.add(t);
  return ensemble_statistics(acc);
}

InnovationReport innovation_diagnostics(const InnovationAccumulator& acc, const SynMat& expected_rate) {
  if (acc.steps < 2 || acc.m != expected_rate.rows()) {
    throw std::invalid_argument("innovation_diagnostics: no recorded innovations of the expected size");
  }
  InnovationReport rep;
  const double steps = static_cast<double>(acc.steps);
  const double total_time = steps * acc.dt;
  const Eigen::VectorXd step_mean = acc.sum / steps;
  const Eigen::MatrixXd step_cov = (acc.outer - steps * step_mean * step_mean.transpose()) / (steps - 1);
  rep.covariance_rate = step_cov / acc.dt;
  rep.expected_rate = expected_rate;
  rep.covariance_rel_error = (rep.covariance_rate - rep.expected_rate).norm() / rep.expected_rate.norm();
  rep.covariance_ok = rep.covariance_rel_error < 0.05;

  rep.mean_rate = acc.sum / total_time;
  rep.mean_bound = 3.0 * (step_cov.diagonal() * steps).cwiseSqrt() / total_time;
  rep.unbiased = (rep.mean_rate.cwiseAbs().array() < rep.mean_bound.array()).all();

  rep.lag1 = 0.0;
  if (acc.pairs > 1 && acc.blocks > 1) {
    const double nb = static_cast<double>(acc.blocks);
    const double np = static_cast<double>(acc.pairs);
    for (Eigen::Index i = 0; i < acc.m; ++i) {
      const double mean = acc.block_sum(i) / nb;
      const double var = acc.block_outer(i, i) / nb - mean * mean;
      const double cov = acc.lag_cross(i) / np - (acc.lag_first(i) / np) * (acc.lag_second(i) / np);
      rep.lag1 = std::max(rep.lag1, std::abs(cov / var));
    }
    rep.white = rep.lag1 < 0.05;
  }
  return rep;
}

InnovationReport innovation_diagnostics(const Trajectory& traj, const SynMat& expected_rate) {
  return innovation_diagnostics(traj.innovation_stats, expected_rate);
}

EnsembleAccumulator run_ensemble(const TrajectoryConfig& cfg, const Scenario& sc, std::size_t ntraj,
                                 unsigned threads) {
  constexpr std::size_t kChunk = 16;
  const std::size_t chunks = (ntraj + kChunk - 1) / kChunk;
  std::vector<EnsembleAccumulator> partial(chunks);
  std::vector<std::exception_ptr> errors(chunks);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t c = next++; c < chunks; c = next++) {
      try {
        for (std::size_t i = c * kChunk; i < std::min(ntraj, (c + 1) * kChunk); ++i) {
          TrajectoryConfig tc = cfg;
          tc.stream_index = i;
          partial[c].add(simulate_trajectory(tc, sc));
        }
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(chunks, 1)));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  EnsembleAccumulator total;
  for (std::size_t c = 0; c < chunks; ++c) {
    if (errors[c]) std::rethrow_exception(errors[c]);
    total.merge(partial[c]);
  }
  return total;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& tr, const std::vector<std::string>& comments) {
  for (const auto& c : comments) fmt::print(os, "# {}\n", c);
  const Eigen::Index m = tr.pi_s.empty() ? 0 : tr.pi_s.front().size();
  fmt::print(os, "t,x1,x2,x3,x4,x5,x6");
  for (Eigen::Index i = 1; i <= m; ++i) fmt::print(os, ",pis{}", i);
  fmt::print(os, ",u1,u2,u3,u4,u5,u6");
  for (Eigen::Index i = 1; i <= m; ++i) fmt::print(os, ",errband{}", i);
  os << '\n';
  for (std::size_t k = 0; k < tr.size(); ++k) {
    fmt::print(os, "{:.17g}", tr.times[k]);
    for (int i = 0; i < 6; ++i) fmt::print(os, ",{:.17g}", tr.x[k](i));
    for (Eigen::Index i = 0; i < m; ++i) fmt::print(os, ",{:.17g}", tr.pi_s[k](i));
    for (int i = 0; i < 6; ++i) fmt::print(os, ",{:.17g}", tr.u[k](i));
    for (Eigen::Index i = 0; i < m; ++i) fmt::print(os, ",{:.17g}", tr.err_band[k](i));
    os << '\n';
  }
}

}  // namespace gst
