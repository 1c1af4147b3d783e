#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>

#include "lkb/graph.hpp"
#include "lkb/kernel.hpp"

namespace lkb {

/// User-similarity kernel K_z for Coop-KernelUCB. Defaults follow the tuned
/// values of the experiments (rho 0.1, tau 1, k 8, 256 features, refresh
/// every 200 rounds, at least 5 observations to cooperate). A bandwidth <= 0
/// selects the median heuristic.
struct AgentKernel {
  enum class Kind { laplacian_inv, heat, spectral_rbf, all_ones, learned_mmd };

  Kind kind = Kind::learned_mmd;
  double rho = 0.1;
  double tau = 1.0;
  int k = 8;
  double bandwidth = 0.0;
  int feature_dim = 256;
  int update_interval = 200;
  int min_count = 5;
};

/// Per-user empirical kernel mean embeddings of observed contexts. For an SE
/// base kernel the feature map is random Fourier features
///   phi(x) = sqrt(2/D) cos(W x + b),  W_ij ~ N(0, 1/l^2),  b ~ U[0, 2 pi),
/// drawn row by row from the given seed; for a linear base kernel phi(x) = x.
class MeanEmbeddings {
 public:
  MeanEmbeddings(const BaseKernel& base, int context_dim, int users,
                 int feature_dim, std::uint64_t seed);

  void observe(int user, std::span<const double> x);
  int count(int user) const { return counts_(user); }
  int users() const { return static_cast<int>(counts_.size()); }
  int feature_dim() const { return static_cast<int>(sums_.cols()); }

  Eigen::VectorXd features(std::span<const double> x) const;
  /// Row u = mean feature vector of user u (zero when unobserved).
  Eigen::MatrixXd means() const;

  /// K_z[u,v] = exp(-||psi_u - psi_v||^2 / (2 s^2)) among users with at
  /// least `min_count` observations; everyone else only has K_z[u,u] = 1.
  /// `bandwidth` <= 0 uses the median pairwise embedding distance among the
  /// cooperating users (1 when there is none); the value used is written to
  /// `used_bandwidth` when non-null.
  Eigen::MatrixXd similarity(int min_count, double bandwidth,
                             double* used_bandwidth = nullptr) const;

 private:
  BaseKernel base_;
  Eigen::MatrixXd frequencies_;  // D x d
  Eigen::VectorXd phases_;       // D
  Eigen::MatrixXd sums_;         // users x D
  Eigen::VectorXi counts_;
};

/// Materializes K_z. `embeddings` is required for learned_mmd and ignored
/// otherwise.
Eigen::MatrixXd agent_kernel_matrix(const AgentKernel& a,
                                    const LaplacianSpectrum& spectrum,
                                    const MeanEmbeddings* embeddings = nullptr,
                                    double* used_bandwidth = nullptr);

}  // namespace lkb
