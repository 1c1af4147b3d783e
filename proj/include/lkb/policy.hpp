#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lkb/agent_kernel.hpp"
#include "lkb/graph.hpp"
#include "lkb/kernel.hpp"
#include "lkb/posterior.hpp"
#include "lkb/rng.hpp"
#include "lkb/schedule.hpp"

namespace lkb {

/// What a policy sees before choosing: the served user and the candidate arms
/// as indices into the context pool.
struct RoundView {
  int t = 0;
  int user = 0;
  std::span<const int> candidates;
};

/// Round protocol: select returns a position into `round.candidates`, then
/// learn receives the reward of that candidate.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string_view name() const = 0;
  virtual std::size_t select(const RoundView& round) = 0;
  virtual void learn(const RoundView& round, std::size_t chosen, double reward) = 0;
};

/// Index of the largest score; the first one wins ties. Throws ProtocolError
/// on an empty list.
std::size_t argmax_lowest(std::span<const double> scores);

/// argmax of mean + beta * sigma.
std::size_t select_ucb(std::span<const Prediction> predictions, double beta);

/// Draws one standard normal z per candidate in candidate order and returns
/// argmax of mean + nu * z * sigma.
std::size_t select_ts(std::span<const Prediction> predictions, double nu, Rng& rng);

struct ConfidenceParams {
  double b_rho = 1.0;      // RKHS norm bound
  double sigma_sub = 0.1;  // sub-Gaussian noise proxy
  double delta = 0.05;
};

/// B + sqrt((sigma^2 / lambda) (2 log(1/delta) + logdet)).
double theoretical_beta(const ConfidenceParams& cp, double lambda, double log_det);

enum class ExplorationMode { tuned, theoretical };
enum class DecisionRule { ucb, ts };

struct Exploration {
  ExplorationMode mode = ExplorationMode::tuned;
  double scale = 1.0;  // beta, nu or alpha in tuned mode
  ConfidenceParams confidence;
};

/// Ridge schedule inputs for GP-style learners. `enabled == false` keeps
/// lambda fixed at `lambda_base`.
struct RidgeSchedule {
  bool enabled = true;
  double lambda_base = 0.01;
  double s_spec = 1.0;
  int horizon = 1000;
};

/// Mean-embedding refresh for a learned agent kernel.
struct AgentRefresh {
  AgentKernel agent;
  std::shared_ptr<const LaplacianSpectrum> spectrum;
  int context_dim = 0;
};

/// GP learner on the user x arm grid with a UCB or TS decision rule. Covers
/// LK-GP-UCB/TS (Laplacian user kernel), GP-UCB (identity user kernel) and
/// Coop-KernelUCB (agent kernel; learned kernels refresh and rebuild the
/// posterior every `update_interval` rounds).
class KernelPolicy final : public Policy {
 public:
  KernelPolicy(std::string name, GridKernel kernel, DecisionRule rule,
               Exploration exploration, RidgeSchedule ridge, std::uint64_t seed,
               std::optional<int> t_star = std::nullopt,
               std::optional<AgentRefresh> refresh = std::nullopt);

  std::string_view name() const override { return name_; }
  std::size_t select(const RoundView& round) override;
  void learn(const RoundView& round, std::size_t chosen, double reward) override;

  const PosteriorState& posterior() const { return posterior_; }
  /// Exploration multiplier for the next decision.
  double current_scale() const;
  /// Bandwidths chosen at each learned-kernel refresh.
  const std::vector<double>& refresh_bandwidths() const { return bandwidths_; }
  int rebuild_count() const { return rebuilds_; }

 private:
  void before_round(int t);

  std::string name_;
  DecisionRule rule_;
  Exploration exploration_;
  std::optional<LambdaScheduler> scheduler_;
  PosteriorState posterior_;
  Rng rng_;
  std::optional<AgentRefresh> refresh_;
  std::unique_ptr<MeanEmbeddings> embeddings_;
  std::vector<double> bandwidths_;
  std::vector<Prediction> scratch_;
  int rebuilds_ = 0;
};

/// Ridge design of a LinUCB-style learner.
enum class LinearDesign { per_user, pooled, graph };

inline constexpr int kMaxGraphDimension = 4000;

/// LinUCB over pool contexts: score = theta^T phi + alpha sqrt(phi^T M^{-1} phi)
/// with Sherman-Morrison updates of M^{-1}.
///   per_user: one d-dim ridge per user, M_u = I + sum x x^T
///   pooled:   one d-dim ridge shared by all users
///   graph:    nd-dim features e_u (x) x with M = A (x) I_d + sum phi phi^T,
///             where A is the given n x n regularizer (L + rho I or I + L)
class LinUcbPolicy final : public Policy {
 public:
  LinUcbPolicy(std::string name, LinearDesign design, Eigen::MatrixXd pool,
               int users, double alpha,
               std::optional<Eigen::MatrixXd> regularizer = std::nullopt);

  std::string_view name() const override { return name_; }
  std::size_t select(const RoundView& round) override;
  void learn(const RoundView& round, std::size_t chosen, double reward) override;

  LinearDesign design() const { return design_; }
  /// M^{-1} of block `b` (the user for per_user, 0 otherwise).
  const Eigen::MatrixXd& inverse(int block) const;

 private:
  struct Block {
    Eigen::MatrixXd inverse;
    Eigen::VectorXd b;
  };
  Block& block_for(int user);
  int offset_for(int user) const;
  void project(const Block& blk, int offset, int arm, Eigen::VectorXd& v) const;

  std::string name_;
  LinearDesign design_;
  Eigen::MatrixXd pool_;
  int users_;
  int dim_;
  double alpha_;
  std::vector<Block> blocks_;
  Eigen::VectorXd v_;
};

}  // namespace lkb
