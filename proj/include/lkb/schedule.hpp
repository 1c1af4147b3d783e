#pragma once

#include <optional>

namespace lkb {

inline constexpr double kLambdaMin = 1e-6;
inline constexpr double kLambdaMax = 1e-1;
inline constexpr int kFirstEpoch = 200;
inline constexpr double kRebuildThreshold = 0.2;

/// clip(lambda_base * s_spec * T / (T + t), kLambdaMin, kLambdaMax).
double lambda_schedule(double lambda_base, double s_spec, int horizon, int t);

/// True for t = 200 * 2^k, k >= 0.
bool is_epoch_boundary(int t);

/// Tracks the ridge currently applied to a posterior. Scheduled values are
/// only considered at epoch boundaries and only adopted when they differ from
/// the applied value by more than 20% relative.
class LambdaScheduler {
 public:
  LambdaScheduler(double lambda_base, double s_spec, int horizon);

  double initial() const { return applied_; }
  double current() const { return applied_; }

  /// Called before round t (t observations seen); returns the new ridge when
  /// a rebuild is due.
  std::optional<double> on_round(int t);

 private:
  double lambda_base_;
  double s_spec_;
  int horizon_;
  double applied_;
};

}  // namespace lkb
