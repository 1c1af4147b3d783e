#include "lkb/analysis.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <random>

#include "lkb/error.hpp"
#include "lkb/graph.hpp"
#include "lkb/rng.hpp"

namespace lkb {

double info_gain(const Eigen::MatrixXd& gram, double lambda) {
  if (!(lambda > 0.0)) throw ParameterError("lambda must be positive");
  if (gram.rows() != gram.cols()) throw ValidationError("gram must be square");
  if (gram.rows() == 0) return 0.0;
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(gram.rows(), gram.cols()) + gram / lambda;
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) {
    a.diagonal().array() += 1e-8;
    llt.compute(a);
    if (llt.info() != Eigen::Success) throw NumericalError("info_gain factorization failed");
  }
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

double effective_dimension(const Eigen::MatrixXd& gram, double lambda, double k_max,
                           int horizon) {
  if (horizon != gram.rows()) throw ParameterError("horizon must equal the gram size");
  if (!(k_max > 0.0)) throw ParameterError("k_max must be positive");
  return info_gain(gram, lambda) / std::log1p(horizon * k_max / lambda);
}

CrudeBound bound_crude(const Eigen::VectorXd& graph_eigs, const Eigen::VectorXd& base_eigs,
                       int horizon, double lambda) {
  if (!(lambda > 0.0)) throw ParameterError("lambda must be positive");
  CrudeBound out;
  out.per_user = Eigen::VectorXd::Zero(graph_eigs.size());
  const double s = static_cast<double>(horizon) / lambda;
  for (Eigen::Index i = 0; i < graph_eigs.size(); ++i) {
    const double g = std::max(graph_eigs(i), 0.0);
    for (Eigen::Index j = 0; j < base_eigs.size(); ++j) {
      if (base_eigs(j) < kEigenFloor) continue;
      out.per_user(i) += std::log1p(s * g * base_eigs(j));
    }
  }
  out.total = out.per_user.sum();
  return out;
}

Eigen::VectorXd empirical_base_eigs(const Eigen::MatrixXd& base_gram_m) {
  if (base_gram_m.rows() == 0 || base_gram_m.rows() != base_gram_m.cols()) {
    throw ValidationError("base gram must be square and non-empty");
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      base_gram_m / static_cast<double>(base_gram_m.rows()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseMax(0.0);
}

double psi_hat(double s, const Eigen::MatrixXd& base_gram_m) {
  const Eigen::VectorXd nu = empirical_base_eigs(base_gram_m);
  double total = 0.0;
  for (Eigen::Index j = 0; j < nu.size(); ++j) total += std::log1p(s * nu(j));
  return total;
}

double bound_regular(const Eigen::VectorXd& graph_eigs, const Eigen::MatrixXd& base_gram_m,
                     int horizon, double lambda) {
  if (!(lambda > 0.0)) throw ParameterError("lambda must be positive");
  const auto n = graph_eigs.size();
  const auto m = base_gram_m.rows();
  if (static_cast<long long>(horizon) != static_cast<long long>(n) * m) {
    throw ParameterError("regular design needs T == n * m");
  }
  const Eigen::VectorXd nu = empirical_base_eigs(base_gram_m);
  const double s = static_cast<double>(horizon) / (static_cast<double>(n) * lambda);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double g = std::max(graph_eigs(i), 0.0);
    for (Eigen::Index j = 0; j < nu.size(); ++j) total += std::log1p(s * g * nu(j));
  }
  return total;
}

HeadTail clique_head_tail(int n, double rho, double lambda, int horizon,
                          const Eigen::MatrixXd& base_gram_m) {
  if (n < 1) throw ParameterError("n must be positive");
  if (!(rho > 0.0) || !(lambda > 0.0)) throw ParameterError("rho and lambda must be positive");
  const double t = static_cast<double>(horizon);
  HeadTail ht;
  ht.head = psi_hat(t / (n * rho * lambda), base_gram_m);
  ht.tail = n == 1 ? 0.0 : (n - 1) * psi_hat(t / (n * (n + rho) * lambda), base_gram_m);
  return ht;
}

double clique_bound(double c, double rho, double lambda, const Eigen::MatrixXd& base_gram_m) {
  const double trace = base_gram_m.trace() / static_cast<double>(base_gram_m.rows());
  return (c / lambda) * (1.0 / rho + 1.0) * (trace + 1.0);
}

Eigen::VectorXd base_population_eigs(const BaseKernel& kernel, const Eigen::MatrixXd& sample) {
  const Eigen::MatrixXd g = base_gram(kernel, sample);
  const Eigen::VectorXd all = empirical_base_eigs(g);
  std::vector<double> kept;
  for (Eigen::Index j = all.size() - 1; j >= 0; --j) {
    if (all(j) >= kEigenFloor) kept.push_back(all(j));
  }
  return Eigen::Map<const Eigen::VectorXd>(kept.data(), static_cast<Eigen::Index>(kept.size()));
}

namespace {

Eigen::MatrixXd draw_contexts(ContextDistribution dist, int count, int dim, Rng& rng) {
  Eigen::MatrixXd x(count, dim);
  if (dist == ContextDistribution::uniform_cube) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int i = 0; i < count; ++i) {
      for (int k = 0; k < dim; ++k) x(i, k) = unif(rng);
    }
  } else {
    std::normal_distribution<double> normal;
    for (int i = 0; i < count; ++i) {
      for (int k = 0; k < dim; ++k) x(i, k) = normal(rng);
      x.row(i).normalize();
    }
  }
  return x;
}

UserGraph sweep_graph(const SweepConfig& c, int n, std::uint64_t seed) {
  switch (c.graph) {
    case GraphFamily::empty:
      return UserGraph::empty(n);
    case GraphFamily::complete:
      return UserGraph::complete(n);
    case GraphFamily::erdos_renyi:
      return gen_erdos_renyi(n, c.edge_probability, seed);
  }
  throw ParameterError("unknown graph family");
}

}  // namespace

std::vector<SweepRow> rank_collapse_sweep(const SweepConfig& c) {
  if (c.users.empty()) throw ConfigError("sweep needs at least one n");
  if (c.seeds < 1) throw ConfigError("sweep needs at least one seed");
  const BaseKernel base = BaseKernel::squared_exponential(c.lengthscale);

  Rng pop_rng = make_rng(c.master_seed, 0, "sweep/population");
  const Eigen::VectorXd population =
      base_population_eigs(base, draw_contexts(c.contexts, c.population_sample, c.dim, pop_rng));

  std::vector<SweepRow> rows;
  for (const int n : c.users) {
    std::vector<int> horizons = c.horizons;
    if (horizons.empty()) horizons.push_back(c.horizon_multiplier * n);
    for (const int horizon : horizons) {
      SweepRow row{n, horizon, 0.0, 0.0, 0.0, 0.0};
      const bool regular = horizon % n == 0;
      double crude_sum = 0.0;
      for (int s = 0; s < c.seeds; ++s) {
        const auto cell = static_cast<std::uint64_t>(s);
        const UserGraph graph = sweep_graph(c, n, derive_seed(c.master_seed, cell, "sweep/graph"));
        const LaplacianSpectrum spectrum(graph, c.rho);
        const MultiUserKernel kernel = MultiUserKernel::laplacian(base, spectrum);
        const Eigen::VectorXd graph_eigs = spectrum.inv_reg().selfadjointView<Eigen::Lower>()
                                               .eigenvalues();

        Rng rng = make_rng(c.master_seed, cell, "sweep/design");
        const Eigen::MatrixXd x = draw_contexts(c.contexts, horizon, c.dim, rng);
        std::uniform_int_distribution<int> pick(0, n - 1);
        std::vector<int> users(static_cast<std::size_t>(horizon));
        for (int& u : users) u = pick(rng);

        Eigen::MatrixXd gram(horizon, horizon);
        const Eigen::MatrixXd kx = base_gram(base, x);
        for (int i = 0; i < horizon; ++i) {
          for (int j = 0; j < horizon; ++j) {
            gram(i, j) = kernel.user_kernel()(users[static_cast<std::size_t>(i)],
                                              users[static_cast<std::size_t>(j)]) *
                         kx(i, j);
          }
        }
        const double gamma = info_gain(gram, c.lambda);
        row.gamma_actual += gamma;
        row.d_eff += gamma / std::log1p(horizon * kernel.k_max() / c.lambda);
        crude_sum += bound_crude(graph_eigs, population, horizon, c.lambda).total;

        if (regular) {
          Rng action_rng = make_rng(c.master_seed, cell, "sweep/actions");
          const Eigen::MatrixXd actions =
              draw_contexts(c.contexts, horizon / n, c.dim, action_rng);
          row.bound_regular += bound_regular(graph_eigs, base_gram(base, actions), horizon,
                                             c.lambda);
        }
      }
      const double k = static_cast<double>(c.seeds);
      row.gamma_actual /= k;
      row.d_eff /= k;
      row.bound_crude = crude_sum / k;
      row.bound_regular = regular ? row.bound_regular / k
                                  : std::numeric_limits<double>::quiet_NaN();
      rows.push_back(row);
    }
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  const auto old = out.precision(17);
  out << "n,T,gamma_actual,bound_crude,bound_regular,d_eff\n";
  for (const SweepRow& r : rows) {
    out << r.n << ',' << r.horizon << ',' << r.gamma_actual << ',' << r.bound_crude << ',';
    if (std::isnan(r.bound_regular)) {
      out << "nan";
    } else {
      out << r.bound_regular;
    }
    out << ',' << r.d_eff << '\n';
  }
  out.precision(old);
}

}  // namespace lkb
