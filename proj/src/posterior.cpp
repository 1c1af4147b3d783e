#include "lkb/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <string>

#include "lkb/error.hpp"
#include "lkb/simd.hpp"

namespace lkb {

namespace {

constexpr double kSymmetryTolerance = 1e-10;
constexpr std::size_t kSymmetryCheckEvery = 128;

int integer_cube_root(int n) {
  int r = static_cast<int>(std::cbrt(static_cast<double>(n)));
  while ((r + 1) * (r + 1) * (r + 1) <= n) ++r;
  while (r > 0 && r * r * r > n) --r;
  return r;
}

}  // namespace

PosteriorState::PosteriorState(GridKernel kernel, double lambda,
                               std::optional<int> t_star)
    : kernel_(std::move(kernel)),
      lambda_(lambda),
      t_star_(t_star.value_or(default_t_star(kernel_.users(), kernel_.arms()))) {
  if (!(lambda_ > 0.0) || !std::isfinite(lambda_)) {
    throw ParameterError("lambda must be positive");
  }
  if (t_star_ < 0) throw ParameterError("t_star must be non-negative");
  reset_to_prior();
}

int PosteriorState::default_t_star(int users, int arms) {
  return std::min(1500, integer_cube_root(users) * arms);
}

void PosteriorState::check_point(GridPoint p) const {
  if (!kernel_.contains(p)) throw ProtocolError("grid point outside the tracked grid");
}

void PosteriorState::check_reward(double y) const {
  if (!std::isfinite(y)) throw ValidationError("reward must be finite");
}

double PosteriorState::clip(double variance) const {
  if (variance < 0.0) {
    ++clip_count_;
    return 0.0;
  }
  return variance;
}

void PosteriorState::reset_to_prior() {
  phase_ = Phase::exact;
  chol_.resize(0, 0);
  whitened_y_.resize(0);
  mu_.resize(0);
  var_.resize(0);
  q_.resize(0, 0);
  recursive_steps_ = 0;
  log_det_ = 0.0;
  if (t_star_ == 0) transition_to_recursive();
}

Eigen::VectorXd PosteriorState::kernel_vector(GridPoint p) const {
  Eigen::VectorXd k(t());
  for (int s = 0; s < t(); ++s) {
    k(s) = kernel_(history_[static_cast<std::size_t>(s)].point, p);
  }
  return k;
}

Prediction PosteriorState::predict(GridPoint p) const {
  check_point(p);
  if (phase_ == Phase::recursive) {
    const int g = kernel_.index(p);
    const double v = clip(var_(g));
    return {mu_(g), v, std::sqrt(v)};
  }
  const double prior = kernel_(p, p);
  if (t() == 0) {
    const double v = clip(prior);
    return {0.0, v, std::sqrt(v)};
  }
  const Eigen::VectorXd k = kernel_vector(p);
  const Eigen::VectorXd l =
      chol_.topLeftCorner(t(), t()).triangularView<Eigen::Lower>().solve(k);
  const auto n = static_cast<std::size_t>(t());
  const double mean = simd::dot({l.data(), n}, {whitened_y_.data(), n});
  const double v = clip(prior - simd::dot({l.data(), n}, {l.data(), n}));
  return {mean, v, std::sqrt(v)};
}

Prediction PosteriorState::predict(std::span<const double> x, int user) const {
  if (phase_ != Phase::exact) {
    throw ProtocolError("off-grid prediction is only available in the exact phase");
  }
  if (user < 0 || user >= kernel_.users()) throw ParameterError("user index out of range");
  const double prior = kernel_.kernel()(x, user, x, user);
  if (t() == 0) {
    const double v = clip(prior);
    return {0.0, v, std::sqrt(v)};
  }
  Eigen::VectorXd k(t());
  for (int s = 0; s < t(); ++s) {
    k(s) = kernel_(x, user, history_[static_cast<std::size_t>(s)].point);
  }
  const Eigen::VectorXd l =
      chol_.topLeftCorner(t(), t()).triangularView<Eigen::Lower>().solve(k);
  const double v = clip(prior - l.squaredNorm());
  return {l.dot(whitened_y_.head(t())), v, std::sqrt(v)};
}

double PosteriorState::apply_exact(GridPoint p, double y) {
  const int t0 = t();
  const Eigen::VectorXd k = kernel_vector(p);
  Eigen::VectorXd l;
  if (t0 > 0) {
    l = chol_.topLeftCorner(t0, t0).triangularView<Eigen::Lower>().solve(k);
  } else {
    l.resize(0);
  }
  const auto n = static_cast<std::size_t>(t0);
  const double explained = simd::dot({l.data(), n}, {l.data(), n});
  const double variance = kernel_(p, p) - explained;
  double pivot2 = variance + lambda_;
  if (!(pivot2 > 0.0)) {
    pivot2 += kCholeskyJitter;
    if (!(pivot2 > 0.0)) {
      throw NumericalError("Cholesky pivot not positive after jitter at t=" +
                           std::to_string(t0 + 1));
    }
  }
  const double pivot = std::sqrt(pivot2);

  if (chol_.rows() <= t0) {
    const Eigen::Index cap = std::max<Eigen::Index>(16, 2 * chol_.rows());
    chol_.conservativeResize(cap, cap);
    whitened_y_.conservativeResize(cap);
  }
  chol_.row(t0).head(t0) = l.transpose();
  chol_(t0, t0) = pivot;
  const double projected =
      simd::dot({l.data(), n}, {whitened_y_.data(), n});
  whitened_y_(t0) = (y - projected) / pivot;

  history_.push_back({p, y});
  const double increment = std::log1p(clip(variance) / lambda_);
  log_det_ += increment;
  return increment;
}

double PosteriorState::apply_recursive(GridPoint p, double y, double noise) {
  const int g = kernel_.index(p);
  const double s2 = clip(var_(g));
  const double denom = noise + s2;
  if (!(denom > 0.0)) throw NumericalError("non-positive recursion denominator");

  const Eigen::VectorXd c = q_.col(g);
  const auto n = static_cast<std::size_t>(c.size());
  const double residual = y - mu_(g);
  const simd::KernelTable& kt = simd::active();
  kt.axpy(residual / denom, c.data(), mu_.data(), n);
  var_.array() -= c.array().square() / denom;
  kt.rank_one_update(q_.data(), n, n, n, c.data(), c.data(), 1.0 / denom);

  if (++recursive_steps_ % kSymmetryCheckEvery == 0 &&
      symmetry_violation() > kSymmetryTolerance) {
    ++symmetry_violations_;
  }
  return std::log1p(s2 / noise);
}

void PosteriorState::transition_to_recursive() {
  const int n = kernel_.size();
  q_ = kernel_.full();
  if (t() == 0) {
    mu_ = Eigen::VectorXd::Zero(n);
  } else {
    // Row s of the cross-covariance is U(u_s, .) (x) Kx(a_s, .).
    Eigen::MatrixXd cross(t(), n);
    const Eigen::MatrixXd& user_k = kernel_.kernel().user_kernel();
    const Eigen::MatrixXd& base_k = kernel_.base_gram();
    const int m = kernel_.arms();
    for (int s = 0; s < t(); ++s) {
      const GridPoint hp = history_[static_cast<std::size_t>(s)].point;
      for (int v = 0; v < kernel_.users(); ++v) {
        cross.row(s).segment(v * m, m) = user_k(hp.user, v) * base_k.row(hp.arm);
      }
    }
    const Eigen::MatrixXd whitened =
        chol_.topLeftCorner(t(), t()).triangularView<Eigen::Lower>().solve(cross);
    q_.noalias() -= whitened.transpose() * whitened;
    mu_ = whitened.transpose() * whitened_y_.head(t());
  }
  var_ = q_.diagonal();
  chol_.resize(0, 0);
  whitened_y_.resize(0);
  phase_ = Phase::recursive;
}

void PosteriorState::maybe_transition() {
  if (phase_ == Phase::exact && t() >= t_star_) transition_to_recursive();
}

void PosteriorState::apply(GridPoint p, double y) {
  if (phase_ == Phase::exact) {
    record(apply_exact(p, y));
    maybe_transition();
  } else {
    const double inc = apply_recursive(p, y, lambda_);
    history_.push_back({p, y});
    log_det_ += inc;
    record(inc);
  }
}

void PosteriorState::record(double increment) {
  diagnostics_.push_back({t(), clip_count_, increment});
}

void PosteriorState::update(GridPoint p, double y) {
  check_point(p);
  check_reward(y);
  apply(p, y);
}

void PosteriorState::update_exact(GridPoint p, double y) {
  if (phase_ != Phase::exact) throw ProtocolError("update_exact called in recursive phase");
  check_point(p);
  check_reward(y);
  record(apply_exact(p, y));
}

void PosteriorState::update_recursive(GridPoint p, double y) {
  if (phase_ != Phase::recursive) throw ProtocolError("update_recursive called in exact phase");
  check_point(p);
  check_reward(y);
  const double inc = apply_recursive(p, y, lambda_);
  history_.push_back({p, y});
  log_det_ += inc;
  record(inc);
}

void PosteriorState::rebuild(GridKernel kernel) { rebuild(std::move(kernel), lambda_); }

void PosteriorState::set_lambda(double lambda) { rebuild(kernel_, lambda); }

void PosteriorState::rebuild(GridKernel kernel, double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ParameterError("lambda must be positive");
  if (kernel.arms() != kernel_.arms() || kernel.users() != kernel_.users()) {
    throw ParameterError("rebuild kernel must keep the grid shape");
  }
  kernel_ = std::move(kernel);
  lambda_ = lambda;
  std::vector<Observation> replay;
  replay.swap(history_);
  reset_to_prior();

  if (static_cast<int>(replay.size()) < t_star_) {
    for (const Observation& o : replay) {
      apply_exact(o.point, o.y);
      maybe_transition();
    }
    return;
  }

  // The history ends in the recursive phase either way. Conditioning on c
  // repeated observations at one grid point equals one observation of their
  // mean with noise lambda / c, so the replay folds duplicates together; the
  // log-determinant follows from det(I_t + P K P^T / lambda) =
  // det(I_U + C^{1/2} K_U C^{1/2} / lambda).
  if (phase_ == Phase::exact) transition_to_recursive();
  std::vector<int> order;
  std::map<int, std::pair<int, double>> folded;  // grid index -> (count, sum)
  for (const Observation& o : replay) {
    const int g = kernel_.index(o.point);
    auto [it, inserted] = folded.try_emplace(g, 0, 0.0);
    if (inserted) order.push_back(g);
    it->second.first += 1;
    it->second.second += o.y;
  }
  for (const int g : order) {
    const auto [count, sum] = folded.at(g);
    const double noise = lambda_ / count;
    log_det_ += apply_recursive(kernel_.point(g), sum / count, noise);
  }
  history_ = std::move(replay);
}

Eigen::MatrixXd PosteriorState::cholesky_factor() const {
  if (phase_ != Phase::exact) throw ProtocolError("no Cholesky factor in recursive phase");
  Eigen::MatrixXd l = chol_.topLeftCorner(t(), t());
  return l.triangularView<Eigen::Lower>();
}

Eigen::VectorXd PosteriorState::grid_means() const {
  if (phase_ == Phase::recursive) return mu_;
  Eigen::VectorXd m(kernel_.size());
  for (int g = 0; g < kernel_.size(); ++g) m(g) = predict(kernel_.point(g)).mean;
  return m;
}

Eigen::VectorXd PosteriorState::grid_variances() const {
  if (phase_ == Phase::recursive) return var_.cwiseMax(0.0);
  Eigen::VectorXd v(kernel_.size());
  for (int g = 0; g < kernel_.size(); ++g) v(g) = predict(kernel_.point(g)).variance;
  return v;
}

const Eigen::MatrixXd& PosteriorState::grid_covariance() const {
  if (phase_ != Phase::recursive) throw ProtocolError("no covariance table in exact phase");
  return q_;
}

double PosteriorState::symmetry_violation() const {
  if (phase_ != Phase::recursive) return 0.0;
  double worst = 0.0;
  const Eigen::Index n = q_.rows();
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j + 1; i < n; ++i) {
      worst = std::max(worst, std::abs(q_(i, j) - q_(j, i)));
    }
  }
  return worst;
}

void PosteriorState::write_diagnostics_csv(std::ostream& out) const {
  out << "t,clip_count,logdet_increment\n";
  const auto old = out.precision(17);
  for (const StepDiagnostics& d : diagnostics_) {
    out << d.t << ',' << d.clip_count << ',' << d.logdet_increment << '\n';
  }
  out.precision(old);
}

}  // namespace lkb
