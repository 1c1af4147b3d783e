#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>

namespace lkb {

/// Weighted undirected user graph. Weights are symmetric, non-negative, with
/// a zero diagonal; construction rejects anything else.
class UserGraph {
 public:
  explicit UserGraph(Eigen::MatrixXd weights);

  static UserGraph empty(int n);
  static UserGraph complete(int n);
  /// Node 0 is the hub.
  static UserGraph star(int n);

  int size() const { return static_cast<int>(weights_.rows()); }
  const Eigen::MatrixXd& weights() const { return weights_; }
  double weight(int i, int j) const { return weights_(i, j); }
  /// Number of undirected pairs with positive weight.
  int edge_count() const;

  /// L = D - W.
  Eigen::MatrixXd laplacian() const;

 private:
  Eigen::MatrixXd weights_;
};

/// Laplacian with its symmetric eigendecomposition and the regularized
/// inverse (L + rho I)^{-1}. Immutable once built.
class LaplacianSpectrum {
 public:
  LaplacianSpectrum(const UserGraph& graph, double rho);

  int size() const { return static_cast<int>(laplacian_.rows()); }
  double rho() const { return rho_; }
  const Eigen::MatrixXd& laplacian() const { return laplacian_; }
  /// Ascending, clamped at zero from below.
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  /// Orthonormal columns matching `eigenvalues()`.
  const Eigen::MatrixXd& eigenvectors() const { return eigenvectors_; }
  /// (L + rho I)^{-1}
  const Eigen::MatrixXd& inv_reg() const { return inv_reg_; }

  /// (L + r I)^{-1} for an arbitrary r > 0, via the cached eigenbasis.
  Eigen::MatrixXd regularized_inverse(double r) const;
  /// exp(-tau L)
  Eigen::MatrixXd heat_kernel(double tau) const;
  /// U diag(g(lambda_i)) U^T
  template <class F>
  Eigen::MatrixXd spectral_map(F&& g) const {
    Eigen::VectorXd d(eigenvalues_.size());
    for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = g(eigenvalues_(i));
    return eigenvectors_ * d.asDiagonal() * eigenvectors_.transpose();
  }

 private:
  double rho_;
  Eigen::MatrixXd laplacian_;
  Eigen::VectorXd eigenvalues_;
  Eigen::MatrixXd eigenvectors_;
  Eigen::MatrixXd inv_reg_;
};

LaplacianSpectrum build_laplacian(const UserGraph& graph, double rho);

/// Each pair (i<j), visited in row-major order, consumes exactly one
/// uniform draw u and becomes a unit-weight edge iff u < p.
UserGraph gen_erdos_renyi(int n, double p, std::uint64_t seed);

/// Latent positions z_i ~ N(0, I_q), row i = z_i, drawn row-major.
Eigen::MatrixXd draw_rbf_latents(int n, int q, std::uint64_t seed);
/// w_ij = exp(-rho_l ||z_i - z_j||^2), zeroed where below `threshold`.
UserGraph rbf_graph_from_latents(const Eigen::MatrixXd& latents, double rho_l,
                                 double threshold);
UserGraph gen_rbf_graph(int n, int q, double rho_l, double threshold,
                        std::uint64_t seed);

/// Block of user i is floor(i * k / n). Same pair order and one draw per pair
/// as `gen_erdos_renyi`, so p_in == p_out reproduces the ER graph exactly.
UserGraph gen_sbm(int n, int k, double p_in, double p_out, std::uint64_t seed);

/// Eigenvalues at or below this are treated as zero for the Fiedler value.
inline constexpr double kZeroEigenvalue = 1e-9;

struct SpectralScale {
  double value = 0.0;
  bool degenerate = false;  // edgeless graph
};

/// Fiedler value over the largest Laplacian eigenvalue.
SpectralScale spectral_scale(const LaplacianSpectrum& spectrum);

/// `u,v,w` rows, one per undirected edge with u < v, after a header row.
void write_edges_csv(std::ostream& out, const UserGraph& graph);

}  // namespace lkb
