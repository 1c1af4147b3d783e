#pragma once

#include <Eigen/Dense>
#include <memory>
#include <span>
#include <vector>

#include "lkb/graph.hpp"

namespace lkb {

/// Kernel over arm contexts.
struct BaseKernel {
  enum class Kind { squared_exponential, linear };

  Kind kind = Kind::squared_exponential;
  double lengthscale = 1.0;  // SE only

  static BaseKernel squared_exponential(double lengthscale);
  static BaseKernel linear();

  /// exp(-||x-y||^2 / (2 l^2)) or x.y; throws ParameterError on a dimension
  /// mismatch.
  double operator()(std::span<const double> x, std::span<const double> y) const;

  /// alpha^2, the bound on K_x(x, x) (1 for SE; 1 for linear on unit vectors).
  double diagonal_bound() const { return 1.0; }
};

double eval_base(const BaseKernel& k, std::span<const double> x,
                 std::span<const double> y);

/// Gram matrix of the base kernel over the rows of `points`.
Eigen::MatrixXd base_gram(const BaseKernel& k, const Eigen::MatrixXd& points);

/// Median of pairwise Euclidean distances between rows (median heuristic).
double median_pairwise_distance(const Eigen::MatrixXd& points);

/// K((x,u),(x',u')) = U[u,u'] * K_x(x,x'), where the user kernel U is
/// (L + rho I)^{-1} for the Laplacian kernel or any PSD agent kernel.
class MultiUserKernel {
 public:
  MultiUserKernel(BaseKernel base, Eigen::MatrixXd user_kernel);

  static MultiUserKernel laplacian(BaseKernel base,
                                   const LaplacianSpectrum& spectrum);

  const BaseKernel& base() const { return base_; }
  const Eigen::MatrixXd& user_kernel() const { return user_kernel_; }
  int users() const { return static_cast<int>(user_kernel_.rows()); }
  /// alpha^2 * max_u U[u,u]
  double k_max() const { return k_max_; }

  /// Throws ParameterError on a user index outside [0, users).
  double operator()(std::span<const double> x, int u,
                    std::span<const double> y, int v) const;

 private:
  BaseKernel base_;
  Eigen::MatrixXd user_kernel_;
  double k_max_;
};

double eval_multi(const MultiUserKernel& k, std::span<const double> x, int u,
                  std::span<const double> y, int v);

struct ContextUserPair {
  Eigen::VectorXd x;
  int user = 0;
};

/// t x t Gram matrix of `eval_multi` over the pairs.
Eigen::MatrixXd gram(const MultiUserKernel& k,
                     std::span<const ContextUserPair> pairs);

/// A point of the user x arm grid; `arm` indexes the context pool.
struct GridPoint {
  int arm = 0;
  int user = 0;
  friend bool operator==(const GridPoint&, const GridPoint&) = default;
};

/// Multi-user kernel restricted to a fixed context pool. The base Gram over
/// the pool is computed once and shared between copies (kernel swaps keep
/// it). Grid index of (arm i, user u) is u * arms + i.
class GridKernel {
 public:
  GridKernel(MultiUserKernel kernel, Eigen::MatrixXd pool);

  /// Same pool and cached base Gram, different user kernel.
  GridKernel with_user_kernel(Eigen::MatrixXd user_kernel) const;

  const MultiUserKernel& kernel() const { return kernel_; }
  const Eigen::MatrixXd& pool() const { return *pool_; }
  const Eigen::MatrixXd& base_gram() const { return *base_gram_; }
  int arms() const { return static_cast<int>(pool_->rows()); }
  int users() const { return kernel_.users(); }
  int size() const { return arms() * users(); }

  int index(GridPoint p) const { return p.user * arms() + p.arm; }
  GridPoint point(int index) const { return {index % arms(), index / arms()}; }
  bool contains(GridPoint p) const {
    return p.arm >= 0 && p.arm < arms() && p.user >= 0 && p.user < users();
  }

  double operator()(GridPoint a, GridPoint b) const {
    return kernel_.user_kernel()(a.user, b.user) * (*base_gram_)(a.arm, b.arm);
  }
  /// Kernel between an arbitrary context and a pool point.
  double operator()(std::span<const double> x, int u, GridPoint b) const;

  /// Full (users*arms)^2 Gram in grid order: user_kernel (x) base_gram.
  Eigen::MatrixXd full() const;

 private:
  MultiUserKernel kernel_;
  std::shared_ptr<const Eigen::MatrixXd> pool_;
  std::shared_ptr<const Eigen::MatrixXd> base_gram_;
};

/// Kronecker product A (x) B.
Eigen::MatrixXd kronecker(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Joint penalty of n functions f_i = sum_k coeffs(i,k) K_x(., x_k):
///   1/2 sum_ij w_ij ||f_i - f_j||^2 + rho sum_i ||f_i||^2
/// evaluated term by term from the base Gram of the expansion points.
double joint_penalty(const UserGraph& graph, double rho,
                     const Eigen::MatrixXd& coeffs,
                     const Eigen::MatrixXd& base_gram);

}  // namespace lkb
