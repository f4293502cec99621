#pragma once

// Seeded Euler-Maruyama simulation of the plant, the measurement record, the
// filters and the feedback, with streaming ensemble statistics.

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gst/closedloop.hpp"

namespace gst {

struct TrajectoryConfig {
  double dt = 0.0;
  double duration = 0.0;
  std::uint64_t seed = 0;
  bool control_enabled = true;
  FilterMode mode = FilterMode::S1;
  int record_stride = 1;
  /// Steps summed into one innovation block for the whiteness statistic.
  int innovation_stride = 1000;
  /// Leading fraction of the run excluded from innovation statistics.
  double burn_in_fraction = 0.2;
  /// Propagate V_c with the Riccati flow and use the time-varying gain.
  bool time_varying_gain = false;
  /// Multiplies the syndrome-filter gain; 1 is the designed filter.
  double gain_scale = 1.0;
  /// Trajectory index; the random stream is derived from (seed, stream_index).
  std::uint64_t stream_index = 0;
  /// Any |x_i| above this aborts the run.
  double divergence_bound = 1e8;

  /// dt = 1e-3/(ν+Γ), duration = 100/(ν+Γ), record every 50 steps.
  static TrajectoryConfig for_params(const MemoryParams& params, FilterMode mode, std::uint64_t seed);
  std::int64_t steps() const;
  void validate() const;
};

/// Streaming sums over innovation increments dy − √(2ν) π(s) dt.
struct InnovationAccumulator {
  Eigen::Index m = 0;
  double dt = 0.0;
  int block = 1;
  std::int64_t steps = 0;
  Eigen::VectorXd sum;
  Eigen::MatrixXd outer;
  std::int64_t blocks = 0;
  Eigen::VectorXd block_sum;
  Eigen::MatrixXd block_outer;
  std::int64_t pairs = 0;
  /// Σ b_k ∘ b_{k+1}, Σ b_k and Σ b_{k+1} over consecutive pairs, per component.
  Eigen::VectorXd lag_cross;
  Eigen::VectorXd lag_first;
  Eigen::VectorXd lag_second;

  InnovationAccumulator() = default;
  InnovationAccumulator(Eigen::Index m, double dt, int block);
  void add_step(const SynVec& increment);
  /// Adds one trajectory's block sums in time order.
  void add_blocks(const std::vector<SynVec>& blocks);
  void merge(const InnovationAccumulator& other);
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Vec6> x;
  std::vector<SynVec> pi_s;
  /// Full-state estimate from the evaluation filter; it reads the true noise.
  std::vector<Vec6> pi_x;
  std::vector<Vec6> u;
  /// Innovation increments summed over innovation_stride steps after burn-in.
  std::vector<SynVec> innovations;
  /// √ of the diagonal of Btil V_c Btil^T at each record.
  std::vector<SynVec> err_band;
  InnovationAccumulator innovation_stats;
  double dt = 0.0;
  int stride = 1;
  FilterMode mode = FilterMode::S1;
  bool control_enabled = false;

  std::size_t size() const { return times.size(); }
};

/// Draws dW ~ N(0, Σ_W dt) through a spectral factor of Σ_W.
class NoiseSampler {
 public:
  /// Eigenvalues down to −1e-12 are clipped to zero; anything more negative throws.
  explicit NoiseSampler(const Mat12& sigma);
  const Mat12& factor() const { return factor_; }

  template <typename Rng>
  Eigen::Matrix<double, 12, 1> draw(Rng& rng, double dt) {
    Eigen::Matrix<double, 12, 1> xi;
    for (int i = 0; i < 12; ++i) xi(i) = normal_(rng);
    return std::sqrt(dt) * (factor_ * xi);
  }

 private:
  Mat12 factor_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream_index);

/// One closed-loop run. Plant and sensor increments share the same dW.
/// Throws Error naming the step when the state leaves divergence_bound.
Trajectory simulate_trajectory(const TrajectoryConfig& cfg, const Scenario& sc);

struct EnsembleStatistics;

/// Streaming per-record moments of z = (x, π(s)) across trajectories.
class EnsembleAccumulator {
 public:
  EnsembleAccumulator() = default;
  void add(const Trajectory& traj);
  void merge(const EnsembleAccumulator& other);

  std::size_t count() const { return n_; }
  const InnovationAccumulator& innovations() const { return innov_; }

 private:
  friend EnsembleStatistics ensemble_statistics(const EnsembleAccumulator& acc);
  void check_compatible(double dt, int stride, std::size_t records, Eigen::Index m, FilterMode mode,
                        bool control) const;

  std::size_t n_ = 0;
  double dt_ = 0.0;
  int stride_ = 0;
  Eigen::Index m_ = 0;
  FilterMode mode_ = FilterMode::S1;
  bool control_ = false;
  std::vector<double> times_;
  std::vector<Eigen::VectorXd> sum_z_;
  std::vector<Eigen::MatrixXd> sum_zz_;
  Vec6 err_sum_ = Vec6::Zero();
  Mat6 err_outer_ = Mat6::Zero();
  InnovationAccumulator innov_;
};

struct EnsembleStatistics {
  std::size_t n = 0;
  std::vector<double> times;
  std::vector<Eigen::VectorXd> mean;
  /// Unbiased sample covariance of z per record; zero for a single trajectory.
  std::vector<Eigen::MatrixXd> cov;
  /// Per-record covariances averaged over the final 20% of records.
  Eigen::MatrixXd steady_cov;
  /// Mean and standard error of x − π(x) at the final time.
  Vec6 final_error_mean = Vec6::Zero();
  Vec6 final_error_sem = Vec6::Zero();
};

EnsembleStatistics ensemble_statistics(const EnsembleAccumulator& acc);
EnsembleStatistics ensemble_statistics(const std::vector<Trajectory>& trajs);

struct InnovationReport {
  Eigen::MatrixXd covariance_rate;
  Eigen::MatrixXd expected_rate;
  double covariance_rel_error = 0.0;
  /// Largest |lag-1 autocorrelation| of the block sums over components.
  double lag1 = 0.0;
  Eigen::VectorXd mean_rate;
  Eigen::VectorXd mean_bound;
  bool covariance_ok = false;
  bool white = false;
  bool unbiased = false;

  bool passed() const { return covariance_ok && white && unbiased; }
};

/// Thresholds: covariance within 5% of 2 Z Λ Z^T, |lag-1| < 0.05, |mean| < 3σ.
InnovationReport innovation_diagnostics(const InnovationAccumulator& acc, const SynMat& expected_rate);
InnovationReport innovation_diagnostics(const Trajectory& traj, const SynMat& expected_rate);

/// Runs ntraj trajectories with stream indices 0..ntraj−1. Results are
/// reduced in index order, so they do not depend on the thread count.
EnsembleAccumulator run_ensemble(const TrajectoryConfig& cfg, const Scenario& sc, std::size_t ntraj,
                                 unsigned threads = 0);

/// CSV: t, x1..x6, pis1..pism, u1..u6, errband1..errbandm, preceded by
/// '#'-prefixed comment lines.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj, const std::vector<std::string>& comments);

}  // namespace gst
