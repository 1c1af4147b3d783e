#include "lkb/schedule.hpp"

#include <algorithm>
#include <cmath>

#include "lkb/error.hpp"

namespace lkb {

double lambda_schedule(double lambda_base, double s_spec, int horizon, int t) {
  if (horizon < 1) throw ParameterError("horizon must be at least 1");
  if (!(lambda_base > 0.0)) throw ParameterError("lambda_base must be positive");
  const double raw = lambda_base * s_spec * static_cast<double>(horizon) /
                     static_cast<double>(horizon + t);
  return std::clamp(raw, kLambdaMin, kLambdaMax);
}

bool is_epoch_boundary(int t) {
  if (t < kFirstEpoch || t % kFirstEpoch != 0) return false;
  const int k = t / kFirstEpoch;
  return (k & (k - 1)) == 0;
}

LambdaScheduler::LambdaScheduler(double lambda_base, double s_spec, int horizon)
    : lambda_base_(lambda_base),
      s_spec_(s_spec),
      horizon_(horizon),
      applied_(lambda_schedule(lambda_base, s_spec, horizon, 0)) {}

std::optional<double> LambdaScheduler::on_round(int t) {
  if (!is_epoch_boundary(t)) return std::nullopt;
  const double next = lambda_schedule(lambda_base_, s_spec_, horizon_, t);
  if (std::abs(next - applied_) <= kRebuildThreshold * applied_) return std::nullopt;
  applied_ = next;
  return next;
}

}  // namespace lkb
