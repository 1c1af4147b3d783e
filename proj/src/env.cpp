#include "lkb/env.hpp"

#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "lkb/error.hpp"
#include "lkb/hash.hpp"
#include "lkb/rng.hpp"

namespace lkb {

ContextPool::ContextPool(Eigen::MatrixXd contexts) : contexts_(std::move(contexts)) {
  if (contexts_.rows() < 1 || contexts_.cols() < 1) throw ValidationError("empty context pool");
  for (Eigen::Index i = 0; i < contexts_.rows(); ++i) {
    if (std::abs(contexts_.row(i).norm() - 1.0) > 1e-12) {
      throw ValidationError("pool contexts must have unit norm");
    }
  }
}

ContextPool ContextPool::sample(int m, int d, std::uint64_t seed) {
  if (m < 1 || d < 1) throw ParameterError("pool needs m >= 1 and d >= 1");
  Rng rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd x(m, d);
  for (int i = 0; i < m; ++i) {
    for (;;) {
      for (int k = 0; k < d; ++k) x(i, k) = normal(rng);
      const double norm = x.row(i).norm();
      if (norm > 0.0) {
        x.row(i) /= norm;
        break;
      }
    }
  }
  return ContextPool(std::move(x));
}

std::string to_string(Regime r) {
  switch (r) {
    case Regime::linear_gob:
      return "linear_gob";
    case Regime::lk_gp_draw:
      return "lk_gp_draw";
    case Regime::lk_representer:
      return "lk_representer";
  }
  return "unknown";
}

Regime parse_regime(const std::string& s) {
  if (s == "linear_gob") return Regime::linear_gob;
  if (s == "lk_gp_draw") return Regime::lk_gp_draw;
  if (s == "lk_representer") return Regime::lk_representer;
  throw ConfigError("unknown regime '" + s + "'");
}

namespace {

void check_grid(const ContextPool& pool, const UserGraph& graph, const GridKernel& kernel) {
  if (kernel.arms() != pool.size() || kernel.users() != graph.size()) {
    throw ParameterError("kernel grid does not match pool and graph");
  }
}

Eigen::MatrixXd grid_to_table(const Eigen::VectorXd& f, int arms, int users) {
  return Eigen::Map<const Eigen::MatrixXd>(f.data(), arms, users);
}

}  // namespace

Environment make_linear_gob(ContextPool pool, UserGraph graph, double eta,
                            std::uint64_t seed, double noise_sigma) {
  if (!(eta >= 0.0)) throw ParameterError("eta must be non-negative");
  const int n = graph.size();
  const int d = pool.dim();
  Rng rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd theta0(n, d);
  for (int u = 0; u < n; ++u) {
    for (int k = 0; k < d; ++k) theta0(u, k) = normal(rng);
  }
  // Any rho works here; only the eigenpairs of L are used.
  const LaplacianSpectrum spectrum(graph, 1.0);
  const Eigen::MatrixXd smoother =
      spectrum.spectral_map([eta](double l) { return 1.0 / (1.0 + eta * l); });
  Eigen::MatrixXd theta = eta == 0.0 ? theta0 : Eigen::MatrixXd(smoother * theta0);
  Eigen::MatrixXd truth = pool.contexts() * theta.transpose();
  return Environment{Regime::linear_gob, std::move(pool), std::move(graph), std::move(truth),
                     noise_sigma, std::move(theta)};
}

Environment make_gp_draw(ContextPool pool, UserGraph graph, const GridKernel& kernel,
                         std::uint64_t seed) {
  check_grid(pool, graph, kernel);
  const int size = kernel.size();
  if (size > kMaxDenseGrid) {
    throw ParameterError("grid of " + std::to_string(size) + " points exceeds dense limit");
  }
  const Eigen::MatrixXd gram = kernel.full();
  const double scale = std::max(gram.diagonal().maxCoeff(), 1.0);
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 1e-10 * scale;
  for (;;) {
    llt.compute(gram + jitter * Eigen::MatrixXd::Identity(size, size));
    if (llt.info() == Eigen::Success) break;
    jitter *= 10.0;
    if (jitter > 1e-4 * scale) throw NumericalError("GP draw factorization failed");
  }
  Rng rng(seed);
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(size);
  for (int i = 0; i < size; ++i) z(i) = normal(rng);
  const Eigen::VectorXd f = llt.matrixL() * z;
  Eigen::MatrixXd truth = grid_to_table(f, kernel.arms(), kernel.users());
  const double range = truth.maxCoeff() - truth.minCoeff();
  return Environment{Regime::lk_gp_draw, std::move(pool), std::move(graph), std::move(truth),
                     0.01 * range, std::nullopt};
}

Environment make_representer_from_coefficients(ContextPool pool, UserGraph graph,
                                               const GridKernel& kernel,
                                               const Eigen::VectorXd& alpha,
                                               double noise_sigma) {
  check_grid(pool, graph, kernel);
  if (alpha.size() != kernel.size()) throw ParameterError("alpha must cover the grid");
  const Eigen::VectorXd f = kernel.full() * alpha;
  Eigen::MatrixXd truth = grid_to_table(f, kernel.arms(), kernel.users());
  return Environment{Regime::lk_representer, std::move(pool), std::move(graph),
                     std::move(truth), noise_sigma, std::nullopt};
}

Environment make_representer(ContextPool pool, UserGraph graph, const GridKernel& kernel,
                             std::uint64_t seed, double noise_sigma) {
  Rng rng(seed);
  std::normal_distribution<double> normal;
  Eigen::VectorXd alpha(kernel.size());
  for (Eigen::Index i = 0; i < alpha.size(); ++i) alpha(i) = normal(rng);
  return make_representer_from_coefficients(std::move(pool), std::move(graph), kernel, alpha,
                                            noise_sigma);
}

std::vector<Round> pregenerate_rounds(int users, int arms, int candidates, int horizon,
                                      std::uint64_t seed) {
  if (users < 1 || arms < 1) throw ParameterError("need at least one user and one arm");
  if (candidates < 1 || candidates > arms) {
    throw ParameterError("candidate count must lie in [1, arms]");
  }
  if (horizon < 1) throw ParameterError("horizon must be at least 1");
  Rng rng(seed);
  std::uniform_int_distribution<int> pick_user(0, users - 1);
  std::normal_distribution<double> normal;
  std::vector<int> deck(static_cast<std::size_t>(arms));
  std::vector<Round> rounds;
  rounds.reserve(static_cast<std::size_t>(horizon));
  for (int t = 0; t < horizon; ++t) {
    Round r;
    r.t = t;
    r.user = pick_user(rng);
    std::iota(deck.begin(), deck.end(), 0);
    for (int i = 0; i < candidates; ++i) {
      std::uniform_int_distribution<int> pick(i, arms - 1);
      std::swap(deck[static_cast<std::size_t>(i)],
                deck[static_cast<std::size_t>(pick(rng))]);
    }
    r.candidates.assign(deck.begin(), deck.begin() + candidates);
    r.epsilon = normal(rng);
    rounds.push_back(std::move(r));
  }
  return rounds;
}

Outcome realize(const Environment& env, const Round& round, std::size_t chosen) {
  if (chosen >= round.candidates.size()) throw ProtocolError("chosen arm is not a candidate");
  const int arm = round.candidates[chosen];
  double best = env.reward(round.candidates.front(), round.user);
  for (const int a : round.candidates) best = std::max(best, env.reward(a, round.user));
  const double f = env.reward(arm, round.user);
  return {f + env.noise_sigma * round.epsilon, best - f, arm};
}

std::string stream_hash(std::span<const Round> rounds) {
  StreamHasher h;
  for (const Round& r : rounds) {
    h.add(static_cast<long long>(r.user));
    h.add(static_cast<long long>(r.candidates.size()));
    for (const int a : r.candidates) h.add(static_cast<long long>(a));
    h.add(r.epsilon);
  }
  return h.hex();
}

std::string truth_hash(const Environment& env) {
  StreamHasher h;
  h.add(static_cast<long long>(env.truth.rows()));
  h.add(static_cast<long long>(env.truth.cols()));
  for (Eigen::Index i = 0; i < env.truth.size(); ++i) h.add(env.truth.data()[i]);
  return h.hex();
}

void write_truth_csv(const Environment& env, std::ostream& out) {
  const auto old = out.precision(17);
  out << "arm,user,f\n";
  for (int u = 0; u < env.users(); ++u) {
    for (int i = 0; i < env.arms(); ++i) out << i << ',' << u << ',' << env.reward(i, u) << '\n';
  }
  out.precision(old);
}

}  // namespace lkb
