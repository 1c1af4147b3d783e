#include "lkb/graph.hpp"

#include <cmath>
#include <ostream>
#include <random>
#include <string>

#include "lkb/error.hpp"
#include "lkb/rng.hpp"

namespace lkb {

UserGraph::UserGraph(Eigen::MatrixXd weights) : weights_(std::move(weights)) {
  const Eigen::Index n = weights_.rows();
  if (n < 1 || weights_.cols() != n) {
    throw ValidationError("user graph weights must be a non-empty square matrix");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (weights_(i, i) != 0.0) {
      throw ValidationError("user graph weights must have a zero diagonal");
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      const double w = weights_(i, j);
      if (!std::isfinite(w) || w < 0.0) {
        throw ValidationError("user graph weights must be finite and non-negative");
      }
      if (w != weights_(j, i)) {
        throw ValidationError("user graph weights must be symmetric");
      }
    }
  }
}

UserGraph UserGraph::empty(int n) {
  if (n < 1) throw ParameterError("graph needs at least one user");
  return UserGraph(Eigen::MatrixXd::Zero(n, n));
}

UserGraph UserGraph::complete(int n) {
  if (n < 1) throw ParameterError("graph needs at least one user");
  Eigen::MatrixXd w = Eigen::MatrixXd::Ones(n, n);
  w.diagonal().setZero();
  return UserGraph(std::move(w));
}

UserGraph UserGraph::star(int n) {
  if (n < 1) throw ParameterError("graph needs at least one user");
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) w(0, i) = w(i, 0) = 1.0;
  return UserGraph(std::move(w));
}

int UserGraph::edge_count() const {
  int count = 0;
  for (int i = 0; i < size(); ++i) {
    for (int j = i + 1; j < size(); ++j) count += weights_(i, j) > 0.0 ? 1 : 0;
  }
  return count;
}

Eigen::MatrixXd UserGraph::laplacian() const {
  Eigen::MatrixXd lap = -weights_;
  lap.diagonal() = weights_.rowwise().sum();
  return lap;
}

LaplacianSpectrum::LaplacianSpectrum(const UserGraph& graph, double rho)
    : rho_(rho), laplacian_(graph.laplacian()) {
  if (!(rho > 0.0) || !std::isfinite(rho)) {
    throw ParameterError("rho must be positive, got " + std::to_string(rho));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(laplacian_);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("Laplacian eigendecomposition failed");
  }
  eigenvalues_ = solver.eigenvalues().cwiseMax(0.0);
  eigenvectors_ = solver.eigenvectors();
  inv_reg_ = regularized_inverse(rho_);
}

Eigen::MatrixXd LaplacianSpectrum::regularized_inverse(double r) const {
  if (!(r > 0.0)) throw ParameterError("regularizer must be positive");
  return spectral_map([r](double lam) { return 1.0 / (lam + r); });
}

Eigen::MatrixXd LaplacianSpectrum::heat_kernel(double tau) const {
  if (tau < 0.0) throw ParameterError("heat kernel time must be non-negative");
  return spectral_map([tau](double lam) { return std::exp(-tau * lam); });
}

LaplacianSpectrum build_laplacian(const UserGraph& graph, double rho) {
  return LaplacianSpectrum(graph, rho);
}

namespace {

void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ParameterError(std::string(name) + " must lie in [0, 1]");
  }
}

}  // namespace

UserGraph gen_erdos_renyi(int n, double p, std::uint64_t seed) {
  if (n < 1) throw ParameterError("graph needs at least one user");
  check_probability(p, "edge probability");
  // Same draw sequence as gen_sbm.
  return gen_sbm(n, 1, p, p, seed);
}

UserGraph gen_sbm(int n, int k, double p_in, double p_out, std::uint64_t seed) {
  if (n < 1) throw ParameterError("graph needs at least one user");
  if (k < 1 || k > n) throw ParameterError("block count must lie in [1, n]");
  check_probability(p_in, "p_in");
  check_probability(p_out, "p_out");
  if (p_out > p_in) throw ParameterError("p_out must not exceed p_in");

  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto block = [n, k](int i) {
    return static_cast<int>(static_cast<long long>(i) * k / n);
  };
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double u = unif(rng);
      const double p = block(i) == block(j) ? p_in : p_out;
      if (u < p) w(i, j) = w(j, i) = 1.0;
    }
  }
  return UserGraph(std::move(w));
}

Eigen::MatrixXd draw_rbf_latents(int n, int q, std::uint64_t seed) {
  if (n < 1) throw ParameterError("graph needs at least one user");
  if (q < 1) throw ParameterError("latent dimension must be at least 1");
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd z(n, q);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < q; ++c) z(i, c) = normal(rng);
  }
  return z;
}

UserGraph rbf_graph_from_latents(const Eigen::MatrixXd& latents, double rho_l,
                                 double threshold) {
  if (!(rho_l > 0.0)) throw ParameterError("rho_L must be positive");
  if (!(threshold >= 0.0)) throw ParameterError("sparsity threshold must be >= 0");
  const Eigen::Index n = latents.rows();
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d2 = (latents.row(i) - latents.row(j)).squaredNorm();
      const double wij = std::exp(-rho_l * d2);
      if (wij >= threshold) w(i, j) = w(j, i) = wij;
    }
  }
  return UserGraph(std::move(w));
}

UserGraph gen_rbf_graph(int n, int q, double rho_l, double threshold,
                        std::uint64_t seed) {
  return rbf_graph_from_latents(draw_rbf_latents(n, q, seed), rho_l, threshold);
}

SpectralScale spectral_scale(const LaplacianSpectrum& spectrum) {
  const Eigen::VectorXd& ev = spectrum.eigenvalues();
  const double lmax = ev.maxCoeff();
  if (!(lmax > kZeroEigenvalue)) return {0.0, true};
  double fiedler = lmax;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) > kZeroEigenvalue) {
      fiedler = ev(i);
      break;
    }
  }
  return {fiedler / lmax, false};
}

void write_edges_csv(std::ostream& out, const UserGraph& graph) {
  out << "u,v,w\n";
  const auto old_precision = out.precision(17);
  for (int i = 0; i < graph.size(); ++i) {
    for (int j = i + 1; j < graph.size(); ++j) {
      if (graph.weight(i, j) > 0.0) out << i << ',' << j << ',' << graph.weight(i, j) << '\n';
    }
  }
  out.precision(old_precision);
}

}  // namespace lkb
