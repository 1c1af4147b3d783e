#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "lkb/kernel.hpp"

namespace lkb {

/// Eigenvalues of the base-kernel Gram divided by its size are treated as
/// zero below this.
inline constexpr double kEigenFloor = 1e-12;

/// log det(I + K / lambda) by Cholesky; one jittered retry before failing.
double info_gain(const Eigen::MatrixXd& gram, double lambda);

/// info_gain / log(1 + T k_max / lambda) with T = gram size.
double effective_dimension(const Eigen::MatrixXd& gram, double lambda, double k_max,
                           int horizon);

struct CrudeBound {
  double total = 0.0;
  /// Row i: sum_j log(1 + (T / lambda) lambda_i^G nu_j).
  Eigen::VectorXd per_user;
};

/// sum_i sum_j log(1 + (T / lambda) lambda_i^G nu_j) over the non-negligible
/// base eigenvalues nu_j.
CrudeBound bound_crude(const Eigen::VectorXd& graph_eigs, const Eigen::VectorXd& base_eigs,
                       int horizon, double lambda);

/// sum_i sum_j log(1 + (T / (n lambda)) lambda_i^G nu_hat_j), nu_hat the
/// eigenvalues of base_gram_m / m. Requires T == n m.
double bound_regular(const Eigen::VectorXd& graph_eigs, const Eigen::MatrixXd& base_gram_m,
                     int horizon, double lambda);

/// Eigenvalues of base_gram / m, clamped at zero, ascending.
Eigen::VectorXd empirical_base_eigs(const Eigen::MatrixXd& base_gram_m);

/// Psi_hat(s) = sum_j log(1 + s nu_hat_j).
double psi_hat(double s, const Eigen::MatrixXd& base_gram_m);

struct HeadTail {
  double head = 0.0;
  double tail = 0.0;
  double total() const { return head + tail; }
};

/// Complete graph on n users: Psi_hat(T / (n rho lambda)) plus
/// (n - 1) Psi_hat(T / (n (n + rho) lambda)).
HeadTail clique_head_tail(int n, double rho, double lambda, int horizon,
                          const Eigen::MatrixXd& base_gram_m);

/// (C / lambda)(1 / rho + 1)(trace(base_gram_m) / m + 1).
double clique_bound(double c, double rho, double lambda, const Eigen::MatrixXd& base_gram_m);

/// Eigenvalues of K_x(sample) / |sample| above kEigenFloor, descending.
Eigen::VectorXd base_population_eigs(const BaseKernel& kernel, const Eigen::MatrixXd& sample);

enum class GraphFamily { empty, complete, erdos_renyi };
enum class ContextDistribution { uniform_cube, unit_sphere };

struct SweepConfig {
  std::string name = "sweep";
  std::vector<int> users{10, 20, 40};
  /// T = horizon_multiplier * n unless `horizons` is non-empty, in which case
  /// every (n, T) pair is swept.
  int horizon_multiplier = 2;
  std::vector<int> horizons;
  GraphFamily graph = GraphFamily::complete;
  double edge_probability = 0.2;
  double rho = 1.0;
  double lambda = 1.0;
  double lengthscale = 1.0;
  int dim = 5;
  ContextDistribution contexts = ContextDistribution::uniform_cube;
  int seeds = 10;
  int population_sample = 400;
  std::uint64_t master_seed = 0;
};

struct SweepRow {
  int n = 0;
  int horizon = 0;
  double gamma_actual = 0.0;
  double bound_crude = 0.0;
  /// NaN when n does not divide T.
  double bound_regular = 0.0;
  double d_eff = 0.0;
};

/// Information gain of i.i.d. designs (x ~ context distribution, u ~ Unif)
/// against both spectral bounds, averaged over seeds.
std::vector<SweepRow> rank_collapse_sweep(const SweepConfig& config);

/// Header `n,T,gamma_actual,bound_crude,bound_regular,d_eff`.
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

}  // namespace lkb
