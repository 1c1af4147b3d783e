#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lkb/graph.hpp"
#include "lkb/kernel.hpp"

namespace lkb {

/// m unit-norm contexts in R^d, one per row.
class ContextPool {
 public:
  explicit ContextPool(Eigen::MatrixXd contexts);

  /// Rows drawn from N(0, I_d) (row-major order) and normalized.
  static ContextPool sample(int m, int d, std::uint64_t seed);

  const Eigen::MatrixXd& contexts() const { return contexts_; }
  int size() const { return static_cast<int>(contexts_.rows()); }
  int dim() const { return static_cast<int>(contexts_.cols()); }

 private:
  Eigen::MatrixXd contexts_;
};

enum class Regime { linear_gob, lk_gp_draw, lk_representer };

std::string to_string(Regime r);
Regime parse_regime(const std::string& s);

/// Ground truth over the pool x users grid. truth(i, u) = f(x_i, u).
struct Environment {
  Regime regime = Regime::lk_gp_draw;
  ContextPool pool;
  UserGraph graph;
  Eigen::MatrixXd truth;  // arms x users
  double noise_sigma = 0.1;
  std::optional<Eigen::MatrixXd> theta;  // users x d, linear regime only

  int arms() const { return pool.size(); }
  int users() const { return graph.size(); }
  double reward(int arm, int user) const { return truth(arm, user); }
  double range() const { return truth.maxCoeff() - truth.minCoeff(); }
};

/// Theta = (I + eta L)^{-1} Theta_0 with Theta_0 rows ~ N(0, I_d).
Environment make_linear_gob(ContextPool pool, UserGraph graph, double eta,
                            std::uint64_t seed, double noise_sigma = 0.1);

/// Largest grid accepted by the dense GP draw.
inline constexpr int kMaxDenseGrid = 5000;

/// Joint GP draw over the grid with covariance `kernel.full()`; noise sigma is
/// 0.01 * range(f).
Environment make_gp_draw(ContextPool pool, UserGraph graph, const GridKernel& kernel,
                         std::uint64_t seed);

/// f = Gram * alpha, alpha ~ N(0, 1) over the grid.
Environment make_representer(ContextPool pool, UserGraph graph, const GridKernel& kernel,
                             std::uint64_t seed, double noise_sigma = 0.1);
Environment make_representer_from_coefficients(ContextPool pool, UserGraph graph,
                                               const GridKernel& kernel,
                                               const Eigen::VectorXd& alpha,
                                               double noise_sigma = 0.1);

/// One pre-generated round. The noise draw belongs to the round, not to an
/// arm, so every policy sees the same epsilon.
struct Round {
  int t = 0;
  int user = 0;
  std::vector<int> candidates;
  double epsilon = 0.0;
};

/// u_t ~ Unif(users), M distinct pool indices via partial Fisher-Yates, then
/// epsilon ~ N(0, 1), per round in that order.
std::vector<Round> pregenerate_rounds(int users, int arms, int candidates, int horizon,
                                      std::uint64_t seed);

struct Outcome {
  double reward = 0.0;  // f + sigma * epsilon
  double regret = 0.0;  // best candidate f minus chosen f
  int arm = 0;
};

/// Throws ProtocolError unless chosen < candidates.size().
Outcome realize(const Environment& env, const Round& round, std::size_t chosen);

/// SHA-1 over (u_t, D_t, epsilon_t) for every round.
std::string stream_hash(std::span<const Round> rounds);
/// SHA-1 over the truth table in column-major order.
std::string truth_hash(const Environment& env);

/// `arm,user,f` rows.
void write_truth_csv(const Environment& env, std::ostream& out);

}  // namespace lkb
