#include "lkb/policy.hpp"

#include <cmath>
#include <random>

#include "lkb/error.hpp"

namespace lkb {

std::size_t argmax_lowest(std::span<const double> scores) {
  if (scores.empty()) throw ProtocolError("empty candidate set");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

std::size_t select_ucb(std::span<const Prediction> predictions, double beta) {
  std::vector<double> scores(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    scores[i] = predictions[i].mean + beta * predictions[i].sigma;
  }
  return argmax_lowest(scores);
}

std::size_t select_ts(std::span<const Prediction> predictions, double nu, Rng& rng) {
  if (predictions.empty()) throw ProtocolError("empty candidate set");
  std::normal_distribution<double> normal;
  std::vector<double> scores(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double z = normal(rng);
    scores[i] = predictions[i].mean + nu * z * predictions[i].sigma;
  }
  return argmax_lowest(scores);
}

double theoretical_beta(const ConfidenceParams& cp, double lambda, double log_det) {
  if (!(cp.delta > 0.0 && cp.delta <= 1.0)) throw ParameterError("delta must lie in (0, 1]");
  if (!(lambda > 0.0)) throw ParameterError("lambda must be positive");
  const double inner = 2.0 * std::log(1.0 / cp.delta) + log_det;
  return cp.b_rho + std::sqrt(cp.sigma_sub * cp.sigma_sub / lambda * std::max(inner, 0.0));
}

namespace {

double initial_lambda(const RidgeSchedule& ridge) {
  if (!(ridge.lambda_base > 0.0)) throw ParameterError("lambda_base must be positive");
  return ridge.enabled
             ? lambda_schedule(ridge.lambda_base, ridge.s_spec, ridge.horizon, 0)
             : ridge.lambda_base;
}

bool is_learned(const std::optional<AgentRefresh>& r) {
  return r && r->agent.kind == AgentKernel::Kind::learned_mmd;
}

}  // namespace

KernelPolicy::KernelPolicy(std::string name, GridKernel kernel, DecisionRule rule,
                           Exploration exploration, RidgeSchedule ridge,
                           std::uint64_t seed, std::optional<int> t_star,
                           std::optional<AgentRefresh> refresh)
    : name_(std::move(name)),
      rule_(rule),
      exploration_(exploration),
      posterior_(std::move(kernel), initial_lambda(ridge), t_star),
      rng_(seed),
      refresh_(std::move(refresh)) {
  if (ridge.enabled) scheduler_.emplace(ridge.lambda_base, ridge.s_spec, ridge.horizon);
  if (is_learned(refresh_)) {
    if (!refresh_->spectrum) throw ParameterError("agent refresh needs a spectrum");
    if (refresh_->agent.update_interval < 1) {
      throw ParameterError("update_interval must be positive");
    }
    const GridKernel& k = posterior_.kernel();
    embeddings_ = std::make_unique<MeanEmbeddings>(
        k.kernel().base(), refresh_->context_dim, k.users(),
        refresh_->agent.feature_dim, derive_seed(seed, 0, "features"));
    double bw = 0.0;
    Eigen::MatrixXd kz = agent_kernel_matrix(refresh_->agent, *refresh_->spectrum,
                                             embeddings_.get(), &bw);
    posterior_.rebuild(k.with_user_kernel(std::move(kz)));
  }
}

double KernelPolicy::current_scale() const {
  if (exploration_.mode == ExplorationMode::tuned) return exploration_.scale;
  return theoretical_beta(exploration_.confidence, posterior_.lambda(), posterior_.log_det());
}

void KernelPolicy::before_round(int t) {
  std::optional<double> lambda;
  if (scheduler_) lambda = scheduler_->on_round(t);
  const bool refresh_due =
      is_learned(refresh_) && t > 0 && t % refresh_->agent.update_interval == 0;
  if (refresh_due) {
    double bw = 0.0;
    Eigen::MatrixXd kz = agent_kernel_matrix(refresh_->agent, *refresh_->spectrum,
                                             embeddings_.get(), &bw);
    bandwidths_.push_back(bw);
    posterior_.rebuild(posterior_.kernel().with_user_kernel(std::move(kz)),
                       lambda.value_or(posterior_.lambda()));
    ++rebuilds_;
  } else if (lambda) {
    posterior_.set_lambda(*lambda);
    ++rebuilds_;
  }
}

std::size_t KernelPolicy::select(const RoundView& round) {
  if (round.candidates.empty()) throw ProtocolError("empty candidate set");
  before_round(posterior_.t());
  scratch_.clear();
  for (const int arm : round.candidates) {
    scratch_.push_back(posterior_.predict(GridPoint{arm, round.user}));
  }
  const double scale = current_scale();
  return rule_ == DecisionRule::ucb ? select_ucb(scratch_, scale)
                                    : select_ts(scratch_, scale, rng_);
}

void KernelPolicy::learn(const RoundView& round, std::size_t chosen, double reward) {
  if (chosen >= round.candidates.size()) throw ProtocolError("chosen position outside candidates");
  const int arm = round.candidates[chosen];
  posterior_.update(GridPoint{arm, round.user}, reward);
  if (embeddings_) {
    const Eigen::VectorXd x = posterior_.kernel().pool().row(arm).transpose();
    embeddings_->observe(round.user, {x.data(), static_cast<std::size_t>(x.size())});
  }
}

}  // namespace lkb
