#include "lkb/agent_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "lkb/error.hpp"
#include "lkb/rng.hpp"

namespace lkb {

namespace {

double median_positive_distance(const Eigen::MatrixXd& rows) {
  std::vector<double> d;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < rows.rows(); ++j) {
      const double v = (rows.row(i) - rows.row(j)).norm();
      if (v > 0.0) d.push_back(v);
    }
  }
  if (d.empty()) return 1.0;
  std::sort(d.begin(), d.end());
  const std::size_t h = d.size() / 2;
  return d.size() % 2 == 1 ? d[h] : 0.5 * (d[h - 1] + d[h]);
}

Eigen::MatrixXd rbf_on_rows(const Eigen::MatrixXd& rows, double bandwidth) {
  const Eigen::Index n = rows.rows();
  Eigen::MatrixXd k(n, n);
  const double denom = 2.0 * bandwidth * bandwidth;
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = std::exp(-(rows.row(i) - rows.row(j)).squaredNorm() / denom);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

}  // namespace

MeanEmbeddings::MeanEmbeddings(const BaseKernel& base, int context_dim,
                               int users, int feature_dim, std::uint64_t seed)
    : base_(base) {
  if (context_dim < 1 || users < 1) {
    throw ParameterError("embedding needs positive context dimension and users");
  }
  if (base_.kind == BaseKernel::Kind::linear) {
    feature_dim = context_dim;
  } else {
    if (feature_dim < 1) throw ParameterError("feature_dim must be positive");
    Rng rng = make_rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0 / base_.lengthscale);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    frequencies_.resize(feature_dim, context_dim);
    phases_.resize(feature_dim);
    for (int r = 0; r < feature_dim; ++r) {
      for (int c = 0; c < context_dim; ++c) frequencies_(r, c) = normal(rng);
      phases_(r) = phase(rng);
    }
  }
  sums_ = Eigen::MatrixXd::Zero(users, feature_dim);
  counts_ = Eigen::VectorXi::Zero(users);
}

Eigen::VectorXd MeanEmbeddings::features(std::span<const double> x) const {
  const Eigen::Map<const Eigen::VectorXd> v(x.data(),
                                            static_cast<Eigen::Index>(x.size()));
  if (base_.kind == BaseKernel::Kind::linear) {
    if (v.size() != sums_.cols()) throw ParameterError("context dimension mismatch");
    return v;
  }
  if (v.size() != frequencies_.cols()) throw ParameterError("context dimension mismatch");
  const double scale = std::sqrt(2.0 / static_cast<double>(frequencies_.rows()));
  return scale * ((frequencies_ * v + phases_).array().cos()).matrix();
}

void MeanEmbeddings::observe(int user, std::span<const double> x) {
  if (user < 0 || user >= users()) throw ParameterError("user index out of range");
  sums_.row(user) += features(x).transpose();
  counts_(user) += 1;
}

Eigen::MatrixXd MeanEmbeddings::means() const {
  Eigen::MatrixXd m = sums_;
  for (int u = 0; u < users(); ++u) {
    if (counts_(u) > 0) m.row(u) /= static_cast<double>(counts_(u));
  }
  return m;
}

Eigen::MatrixXd MeanEmbeddings::similarity(int min_count, double bandwidth,
                                           double* used_bandwidth) const {
  const Eigen::MatrixXd psi = means();
  std::vector<int> active;
  for (int u = 0; u < users(); ++u) {
    if (counts_(u) >= min_count) active.push_back(u);
  }
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(active.size()), psi.cols());
  for (std::size_t i = 0; i < active.size(); ++i) {
    rows.row(static_cast<Eigen::Index>(i)) = psi.row(active[i]);
  }
  const double bw = bandwidth > 0.0 ? bandwidth : median_positive_distance(rows);
  if (used_bandwidth != nullptr) *used_bandwidth = bw;

  Eigen::MatrixXd k = Eigen::MatrixXd::Identity(users(), users());
  const Eigen::MatrixXd sub = rbf_on_rows(rows, bw);
  for (std::size_t i = 0; i < active.size(); ++i) {
    for (std::size_t j = 0; j < active.size(); ++j) {
      k(active[i], active[j]) =
          sub(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  }
  return k;
}

Eigen::MatrixXd agent_kernel_matrix(const AgentKernel& a,
                                    const LaplacianSpectrum& spectrum,
                                    const MeanEmbeddings* embeddings,
                                    double* used_bandwidth) {
  const int n = spectrum.size();
  switch (a.kind) {
    case AgentKernel::Kind::laplacian_inv:
      return spectrum.regularized_inverse(a.rho);
    case AgentKernel::Kind::heat:
      return spectrum.heat_kernel(a.tau);
    case AgentKernel::Kind::spectral_rbf: {
      if (a.k < 1 || a.k >= n) {
        throw ParameterError("spectral_rbf needs 1 <= k < number of users");
      }
      // Skip the first (constant) eigenvector.
      const Eigen::MatrixXd z = spectrum.eigenvectors().middleCols(1, a.k);
      const double bw = a.bandwidth > 0.0 ? a.bandwidth : median_positive_distance(z);
      if (used_bandwidth != nullptr) *used_bandwidth = bw;
      return rbf_on_rows(z, bw);
    }
    case AgentKernel::Kind::all_ones:
      return Eigen::MatrixXd::Ones(n, n);
    case AgentKernel::Kind::learned_mmd:
      if (embeddings == nullptr) {
        throw ParameterError("learned_mmd needs per-user observation history");
      }
      if (embeddings->users() != n) {
        throw ParameterError("embedding user count does not match the graph");
      }
      return embeddings->similarity(a.min_count, a.bandwidth, used_bandwidth);
  }
  throw ParameterError("unknown agent kernel kind");
}

}  // namespace lkb
