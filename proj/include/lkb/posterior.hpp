#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "lkb/kernel.hpp"

namespace lkb {

enum class Phase { exact, recursive };

struct Prediction {
  double mean = 0.0;
  double variance = 0.0;  // clipped at zero
  double sigma = 0.0;
};

struct Observation {
  GridPoint point;
  double y = 0.0;
};

struct StepDiagnostics {
  int t = 0;
  std::size_t clip_count = 0;
  double logdet_increment = 0.0;
};

/// Switch round that never fires: the state stays in the exact phase.
inline constexpr int kNeverSwitch = std::numeric_limits<int>::max();
inline constexpr double kCholeskyJitter = 1e-8;

/// GP posterior over the user x arm grid with noise/ridge lambda.
///
/// Exact phase: a Cholesky factor of K_t + lambda I grown one row per
/// observation, plus L^{-1} y. Predictions cost O(t^2) and work off-grid.
///
/// Recursive phase: grid arrays mu, sigma^2 and the covariance table q over
/// every grid point, updated by the rank-one recursions
///   mu  += q(., x_t) (y_t - mu(x_t)) / d
///   s2  -= q(., x_t)^2 / d
///   q   -= q(., x_t) q(x_t, .) / d,        d = lambda + s2(x_t)
/// at O(N^2) per step for N = users * arms.
///
/// `update` runs the exact phase while fewer than t_star observations have
/// been seen, materializes the grid state once the count reaches t_star, and
/// recurses afterwards.
class PosteriorState {
 public:
  /// t_star defaults to min(1500, floor(users^{1/3}) * arms).
  PosteriorState(GridKernel kernel, double lambda,
                 std::optional<int> t_star = std::nullopt);

  static int default_t_star(int users, int arms);

  Phase phase() const { return phase_; }
  int t() const { return static_cast<int>(history_.size()); }
  double lambda() const { return lambda_; }
  int t_star() const { return t_star_; }
  const GridKernel& kernel() const { return kernel_; }
  const std::vector<Observation>& history() const { return history_; }

  /// sum_s log(1 + sigma^2_{s-1}(x_s) / lambda) = log det(I + K_t / lambda).
  double log_det() const { return log_det_; }
  std::size_t clip_count() const { return clip_count_; }
  std::size_t symmetry_violations() const { return symmetry_violations_; }
  const std::vector<StepDiagnostics>& diagnostics() const { return diagnostics_; }

  Prediction predict(GridPoint p) const;
  /// Arbitrary context for user `user`; exact phase only.
  Prediction predict(std::span<const double> x, int user) const;

  /// Hybrid step.
  void update(GridPoint p, double y);
  void update_exact(GridPoint p, double y);
  void update_recursive(GridPoint p, double y);

  /// Rebuilds from the stored history under a new kernel and/or lambda. The
  /// phase restarts per the hybrid rule.
  void rebuild(GridKernel kernel);
  void rebuild(GridKernel kernel, double lambda);
  void set_lambda(double lambda);

  /// Lower-triangular t x t factor; exact phase only.
  Eigen::MatrixXd cholesky_factor() const;
  Eigen::VectorXd grid_means() const;
  Eigen::VectorXd grid_variances() const;
  /// Recursive phase only.
  const Eigen::MatrixXd& grid_covariance() const;
  double symmetry_violation() const;

  /// `t,clip_count,logdet_increment` rows.
  void write_diagnostics_csv(std::ostream& out) const;

 private:
  void check_point(GridPoint p) const;
  void check_reward(double y) const;
  void reset_to_prior();
  void apply(GridPoint p, double y);
  double apply_exact(GridPoint p, double y);
  double apply_recursive(GridPoint p, double y, double noise);
  void maybe_transition();
  void transition_to_recursive();
  void record(double increment);
  Eigen::VectorXd kernel_vector(GridPoint p) const;
  double clip(double variance) const;

  GridKernel kernel_;
  double lambda_;
  int t_star_;
  Phase phase_ = Phase::exact;
  std::vector<Observation> history_;

  Eigen::MatrixXd chol_;       // leading t x t block is valid
  Eigen::VectorXd whitened_y_; // L^{-1} y, leading t entries valid

  Eigen::VectorXd mu_;
  Eigen::VectorXd var_;
  Eigen::MatrixXd q_;
  std::size_t recursive_steps_ = 0;

  double log_det_ = 0.0;
  mutable std::size_t clip_count_ = 0;
  std::size_t symmetry_violations_ = 0;
  std::vector<StepDiagnostics> diagnostics_;
};

}  // namespace lkb
