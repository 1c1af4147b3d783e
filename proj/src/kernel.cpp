#include "lkb/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lkb/error.hpp"
#include "lkb/simd.hpp"

namespace lkb {

namespace {

std::span<const double> row_span(const Eigen::MatrixXd& m, Eigen::Index i,
                                 Eigen::VectorXd& scratch) {
  scratch = m.row(i).transpose();
  return {scratch.data(), static_cast<std::size_t>(scratch.size())};
}

}  // namespace

BaseKernel BaseKernel::squared_exponential(double lengthscale) {
  if (!(lengthscale > 0.0) || !std::isfinite(lengthscale)) {
    throw ParameterError("SE lengthscale must be positive");
  }
  return {Kind::squared_exponential, lengthscale};
}

BaseKernel BaseKernel::linear() { return {Kind::linear, 1.0}; }

double BaseKernel::operator()(std::span<const double> x,
                              std::span<const double> y) const {
  if (x.size() != y.size()) {
    throw ParameterError("context dimension mismatch: " +
                         std::to_string(x.size()) + " vs " +
                         std::to_string(y.size()));
  }
  if (kind == Kind::linear) return simd::dot(x, y);
  const double d2 = simd::squared_distance(x, y);
  return std::exp(-d2 / (2.0 * lengthscale * lengthscale));
}

double eval_base(const BaseKernel& k, std::span<const double> x,
                 std::span<const double> y) {
  return k(x, y);
}

Eigen::MatrixXd base_gram(const BaseKernel& k, const Eigen::MatrixXd& points) {
  // Row-major copy so each point is contiguous.
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> p =
      points;
  const Eigen::Index m = p.rows();
  const auto d = static_cast<std::size_t>(p.cols());
  Eigen::MatrixXd g(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const std::span<const double> xi(p.row(i).data(), d);
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = k(xi, std::span<const double>(p.row(j).data(), d));
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  return g;
}

double median_pairwise_distance(const Eigen::MatrixXd& points) {
  std::vector<double> dists;
  const Eigen::Index m = points.rows();
  dists.reserve(static_cast<std::size_t>(m * (m - 1) / 2));
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      dists.push_back((points.row(i) - points.row(j)).norm());
    }
  }
  if (dists.empty()) return 1.0;
  const auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
  std::nth_element(dists.begin(), mid, dists.end());
  if (dists.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(dists.begin(), mid);
  return 0.5 * (lower + upper);
}

MultiUserKernel::MultiUserKernel(BaseKernel base, Eigen::MatrixXd user_kernel)
    : base_(base), user_kernel_(std::move(user_kernel)) {
  if (user_kernel_.rows() < 1 || user_kernel_.rows() != user_kernel_.cols()) {
    throw ValidationError("user kernel must be a non-empty square matrix");
  }
  k_max_ = base_.diagonal_bound() * user_kernel_.diagonal().maxCoeff();
}

MultiUserKernel MultiUserKernel::laplacian(BaseKernel base,
                                           const LaplacianSpectrum& spectrum) {
  return MultiUserKernel(base, spectrum.inv_reg());
}

double MultiUserKernel::operator()(std::span<const double> x, int u,
                                   std::span<const double> y, int v) const {
  if (u < 0 || u >= users() || v < 0 || v >= users()) {
    throw ParameterError("user index out of range");
  }
  return user_kernel_(u, v) * base_(x, y);
}

double eval_multi(const MultiUserKernel& k, std::span<const double> x, int u,
                  std::span<const double> y, int v) {
  return k(x, u, y, v);
}

Eigen::MatrixXd gram(const MultiUserKernel& k,
                     std::span<const ContextUserPair> pairs) {
  const auto t = static_cast<Eigen::Index>(pairs.size());
  Eigen::MatrixXd g(t, t);
  for (Eigen::Index i = 0; i < t; ++i) {
    const auto& a = pairs[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j <= i; ++j) {
      const auto& b = pairs[static_cast<std::size_t>(j)];
      const double v = k({a.x.data(), static_cast<std::size_t>(a.x.size())}, a.user,
                         {b.x.data(), static_cast<std::size_t>(b.x.size())}, b.user);
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  return g;
}

GridKernel::GridKernel(MultiUserKernel kernel, Eigen::MatrixXd pool)
    : kernel_(std::move(kernel)),
      pool_(std::make_shared<const Eigen::MatrixXd>(std::move(pool))) {
  if (pool_->rows() < 1) throw ParameterError("context pool is empty");
  base_gram_ = std::make_shared<const Eigen::MatrixXd>(
      lkb::base_gram(kernel_.base(), *pool_));
}

GridKernel GridKernel::with_user_kernel(Eigen::MatrixXd user_kernel) const {
  if (user_kernel.rows() != users()) {
    throw ParameterError("replacement user kernel has the wrong size");
  }
  GridKernel copy = *this;
  copy.kernel_ = MultiUserKernel(kernel_.base(), std::move(user_kernel));
  return copy;
}

double GridKernel::operator()(std::span<const double> x, int u,
                              GridPoint b) const {
  Eigen::VectorXd scratch;
  return kernel_(x, u, row_span(*pool_, b.arm, scratch), b.user);
}

Eigen::MatrixXd GridKernel::full() const {
  return kronecker(kernel_.user_kernel(), *base_gram_);
}

Eigen::MatrixXd kronecker(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

double joint_penalty(const UserGraph& graph, double rho,
                     const Eigen::MatrixXd& coeffs,
                     const Eigen::MatrixXd& base_gram) {
  const int n = graph.size();
  if (coeffs.rows() != n || coeffs.cols() != base_gram.rows()) {
    throw ParameterError("coefficient matrix does not match graph/Gram sizes");
  }
  const auto sq_norm = [&](const Eigen::VectorXd& a) {
    return a.dot(base_gram * a);
  };
  double smooth = 0.0;
  double ridge = 0.0;
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd ai = coeffs.row(i).transpose();
    ridge += sq_norm(ai);
    for (int j = 0; j < n; ++j) {
      const double w = graph.weight(i, j);
      if (w == 0.0) continue;
      const Eigen::VectorXd diff = ai - coeffs.row(j).transpose();
      smooth += w * sq_norm(diff);
    }
  }
  return 0.5 * smooth + rho * ridge;
}

}  // namespace lkb
