#include "lkb/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <nlohmann/json.hpp>
#include <sstream>
#include <thread>

#include "lkb/error.hpp"
#include "lkb/hash.hpp"
#include "lkb/rng.hpp"
#include "lkb/simd.hpp"

namespace lkb {

using nlohmann::json;

UserGraph build_graph(const RunConfig& c, int trial) {
  const GraphSpec& g = c.graph;
  const int n = c.task.users;
  const std::uint64_t seed =
      derive_seed(c.seed, g.per_trial ? static_cast<std::uint64_t>(trial) : 0, "graph");
  switch (g.kind) {
    case GraphSpec::Kind::erdos_renyi:
      return gen_erdos_renyi(n, g.p, seed);
    case GraphSpec::Kind::rbf:
      return gen_rbf_graph(n, g.latent_dim, g.rho_l, g.threshold, seed);
    case GraphSpec::Kind::sbm:
      return gen_sbm(n, g.blocks, g.p_in, g.p_out, seed);
    case GraphSpec::Kind::empty:
      return UserGraph::empty(n);
    case GraphSpec::Kind::complete:
      return UserGraph::complete(n);
    case GraphSpec::Kind::star:
      return UserGraph::star(n);
  }
  throw ConfigError("unknown graph kind");
}

TrialContext build_trial(const RunConfig& c, int trial) {
  const auto index = static_cast<std::uint64_t>(trial);
  UserGraph graph = build_graph(c, trial);
  ContextPool pool =
      ContextPool::sample(c.task.arms, c.task.dim, derive_seed(c.seed, index, "pool"));
  const Eigen::MatrixXd contexts = pool.contexts();
  auto spectrum = std::make_shared<const LaplacianSpectrum>(graph, c.model.rho);
  const std::uint64_t truth_seed = derive_seed(c.seed, index, "truth");

  std::optional<Environment> env;
  if (c.env.regime == Regime::linear_gob) {
    env.emplace(make_linear_gob(std::move(pool), graph, c.env.eta, truth_seed, c.env.noise_sigma));
  } else {
    const LaplacianSpectrum env_spectrum(graph, c.env.rho);
    const GridKernel env_kernel(
        MultiUserKernel::laplacian(BaseKernel::squared_exponential(c.env.lengthscale),
                                   env_spectrum),
        contexts);
    if (c.env.regime == Regime::lk_gp_draw) {
      env.emplace(make_gp_draw(std::move(pool), graph, env_kernel, truth_seed));
    } else {
      env.emplace(make_representer(std::move(pool), graph, env_kernel, truth_seed,
                                   c.env.noise_sigma));
    }
  }

  const double lengthscale = c.model.lengthscale.value_or(median_pairwise_distance(contexts));
  SpectralScale scale = spectral_scale(*spectrum);

  std::vector<Round> rounds =
      pregenerate_rounds(c.task.users, c.task.arms, c.task.candidates, c.task.horizon,
                         derive_seed(c.seed, index, "rounds"));
  std::string sh = stream_hash(rounds);
  std::string th = truth_hash(*env);
  return TrialContext{trial,
                      c.seed,
                      std::move(*env),
                      std::move(rounds),
                      std::move(spectrum),
                      BaseKernel::squared_exponential(lengthscale > 0.0 ? lengthscale : 1.0),
                      scale,
                      std::move(sh),
                      std::move(th)};
}

std::uint64_t policy_seed(std::uint64_t master, int trial, AlgoKind kind) {
  return derive_seed(master, static_cast<std::uint64_t>(trial), "policy/" + to_string(kind));
}

std::unique_ptr<Policy> make_policy(const AlgorithmSpec& a, const TrialContext& ctx,
                                    const RunConfig& c) {
  const Eigen::MatrixXd& pool = ctx.env.pool.contexts();
  const int n = ctx.env.users();
  const std::uint64_t seed = policy_seed(ctx.master_seed, ctx.trial, a.kind);
  Exploration exploration{a.mode, a.scale, c.model.confidence};
  RidgeSchedule ridge{c.model.schedule, c.model.lambda_base,
                      ctx.s_spec.degenerate ? 1.0 : ctx.s_spec.value, c.task.horizon};
  auto grid = [&](Eigen::MatrixXd user_kernel) {
    return GridKernel(MultiUserKernel(ctx.model_base, std::move(user_kernel)), pool);
  };
  switch (a.kind) {
    case AlgoKind::lk_gp_ucb:
    case AlgoKind::lk_gp_ts:
      return std::make_unique<KernelPolicy>(
          a.label, grid(ctx.spectrum->inv_reg()),
          a.kind == AlgoKind::lk_gp_ucb ? DecisionRule::ucb : DecisionRule::ts, exploration,
          ridge, seed, c.model.t_star);
    case AlgoKind::gp_ucb:
      return std::make_unique<KernelPolicy>(a.label, grid(Eigen::MatrixXd::Identity(n, n)),
                                            DecisionRule::ucb, exploration, ridge, seed,
                                            c.model.t_star);
    case AlgoKind::coop_kernel_ucb: {
      std::optional<AgentRefresh> refresh;
      Eigen::MatrixXd kz;
      if (a.agent.kind == AgentKernel::Kind::learned_mmd) {
        kz = Eigen::MatrixXd::Identity(n, n);
        refresh = AgentRefresh{a.agent, ctx.spectrum, ctx.env.pool.dim()};
      } else {
        kz = agent_kernel_matrix(a.agent, *ctx.spectrum);
      }
      return std::make_unique<KernelPolicy>(a.label, grid(std::move(kz)), DecisionRule::ucb,
                                            exploration, ridge, seed, c.model.t_star,
                                            std::move(refresh));
    }
    case AlgoKind::gob_lin: {
      Eigen::MatrixXd reg = Eigen::MatrixXd::Identity(n, n) + ctx.spectrum->laplacian();
      return std::make_unique<LinUcbPolicy>(a.label, LinearDesign::graph, pool, n, a.scale,
                                            std::move(reg));
    }
    case AlgoKind::graph_ucb: {
      const double rho = a.rho.value_or(c.model.rho);
      Eigen::MatrixXd reg =
          ctx.spectrum->laplacian() + rho * Eigen::MatrixXd::Identity(n, n);
      return std::make_unique<LinUcbPolicy>(a.label, LinearDesign::graph, pool, n, a.scale,
                                            std::move(reg));
    }
    case AlgoKind::pooled_linucb:
      return std::make_unique<LinUcbPolicy>(a.label, LinearDesign::pooled, pool, n, a.scale);
    case AlgoKind::peruser_linucb:
      return std::make_unique<LinUcbPolicy>(a.label, LinearDesign::per_user, pool, n, a.scale);
  }
  throw ConfigError("unknown algorithm");
}

namespace {

RegretTrace run_policy(Policy& policy, const AlgorithmSpec& a, const TrialContext& ctx) {
  RegretTrace tr;
  tr.algo = a.label;
  tr.trial = ctx.trial;
  tr.seed = policy_seed(ctx.master_seed, ctx.trial, a.kind);
  const std::size_t horizon = ctx.rounds.size();
  tr.users.reserve(horizon);
  tr.arms.reserve(horizon);
  tr.rewards.reserve(horizon);
  tr.instantaneous.reserve(horizon);
  tr.cumulative.reserve(horizon);
  double cum = 0.0;
  for (const Round& r : ctx.rounds) {
    const RoundView view{r.t, r.user, r.candidates};
    const std::size_t chosen = policy.select(view);
    const Outcome o = realize(ctx.env, r, chosen);
    policy.learn(view, chosen, o.reward);
    cum += o.regret;
    tr.users.push_back(r.user);
    tr.arms.push_back(o.arm);
    tr.rewards.push_back(o.reward);
    tr.instantaneous.push_back(o.regret);
    tr.cumulative.push_back(cum);
  }
  tr.stream_hash = stream_hash(ctx.rounds);
  if (const auto* kp = dynamic_cast<const KernelPolicy*>(&policy)) {
    tr.clip_count = kp->posterior().clip_count();
    tr.symmetry_violations = kp->posterior().symmetry_violations();
    tr.rebuilds = kp->rebuild_count();
    tr.bandwidths = kp->refresh_bandwidths();
  }
  return tr;
}

}  // namespace

TrialResult run_trial(const RunConfig& c, int trial, const PolicyFactory& factory) {
  TrialResult result;
  result.trial = trial;
  try {
    const TrialContext ctx = build_trial(c, trial);
    result.stream_hash = ctx.stream_hash;
    result.truth_hash = ctx.truth_hash;
    result.noise_sigma = ctx.env.noise_sigma;
    result.lengthscale = ctx.model_base.lengthscale;
    result.s_spec = ctx.s_spec.value;
    result.s_spec_degenerate = ctx.s_spec.degenerate;
    result.edges = ctx.env.graph.edge_count();
    for (const AlgorithmSpec& a : c.algorithms) {
      std::unique_ptr<Policy> policy = factory(a, ctx, c);
      result.traces.push_back(run_policy(*policy, a, ctx));
    }
  } catch (const std::exception& e) {
    result.aborted = true;
    result.error = e.what();
    result.traces.clear();
  }
  return result;
}

std::vector<TrialResult> run_trials(const RunConfig& c, int workers, const PolicyFactory& factory) {
  std::vector<TrialResult> results(static_cast<std::size_t>(c.trials));
  const int threads = std::max(1, std::min(workers, c.trials));
  std::atomic<int> next{0};
  auto work = [&] {
    for (int i = next++; i < c.trials; i = next++) {
      results[static_cast<std::size_t>(i)] = run_trial(c, i, factory);
    }
  };
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int k = 0; k < threads; ++k) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  return results;
}

const AlgoSummary& Summary::at(const std::string& algo) const {
  for (const AlgoSummary& a : algorithms) {
    if (a.algo == algo) return a;
  }
  throw ParameterError("no summary for algorithm '" + algo + "'");
}

namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (const double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double se_of(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double ss = 0.0;
  for (const double x : v) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  return sd / std::sqrt(static_cast<double>(v.size()));
}

double window_mean(const std::vector<double>& v, std::size_t begin, std::size_t end) {
  if (end <= begin) return 0.0;
  double s = 0.0;
  for (std::size_t i = begin; i < end; ++i) s += v[i];
  return s / static_cast<double>(end - begin);
}

}  // namespace

Summary summarize(const std::vector<RegretTrace>& traces) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const RegretTrace*>> by_algo;
  for (const RegretTrace& t : traces) {
    auto [it, inserted] = by_algo.try_emplace(t.algo);
    if (inserted) order.push_back(t.algo);
    it->second.push_back(&t);
  }
  Summary s;
  for (const std::string& algo : order) {
    const auto& group = by_algo.at(algo);
    AlgoSummary a;
    a.algo = algo;
    a.trials = static_cast<int>(group.size());
    std::vector<double> finals, firsts, lasts;
    std::size_t horizon = group.front()->cumulative.size();
    for (const RegretTrace* t : group) {
      if (t->cumulative.size() != horizon) throw ValidationError("traces differ in length");
      finals.push_back(t->final_regret());
      const std::size_t q = horizon / 4;
      firsts.push_back(window_mean(t->instantaneous, 0, q));
      lasts.push_back(window_mean(t->instantaneous, horizon - q, horizon));
    }
    a.mean = mean_of(finals);
    a.se = se_of(finals, a.mean);
    a.se_undefined = group.size() < 2;
    a.first_quarter = mean_of(firsts);
    a.last_quarter = mean_of(lasts);
    a.curve_mean.resize(horizon);
    a.curve_se.resize(horizon);
    std::vector<double> column(group.size());
    for (std::size_t t = 0; t < horizon; ++t) {
      for (std::size_t k = 0; k < group.size(); ++k) column[k] = group[k]->cumulative[t];
      a.curve_mean[t] = mean_of(column);
      a.curve_se[t] = se_of(column, a.curve_mean[t]);
    }
    s.algorithms.push_back(std::move(a));
  }
  return s;
}

void write_summary_json(std::ostream& out, const Summary& s) {
  json algos = json::array();
  for (const AlgoSummary& a : s.algorithms) {
    algos.push_back({{"algo", a.algo},
                     {"trials", a.trials},
                     {"mean_final_regret", a.mean},
                     {"se", a.se},
                     {"se_undefined", a.se_undefined},
                     {"first_quarter_mean_regret", a.first_quarter},
                     {"last_quarter_mean_regret", a.last_quarter}});
  }
  out << json{{"algorithms", algos}}.dump(2) << '\n';
}

void write_curves_csv(std::ostream& out, const Summary& s) {
  const auto old = out.precision(17);
  out << "t,algo,mean_cum_regret,se\n";
  for (const AlgoSummary& a : s.algorithms) {
    for (std::size_t t = 0; t < a.curve_mean.size(); ++t) {
      out << (t + 1) << ',' << a.algo << ',' << a.curve_mean[t] << ',' << a.curve_se[t] << '\n';
    }
  }
  out.precision(old);
}

void write_trial_csv(std::ostream& out, const TrialResult& r) {
  const auto old = out.precision(17);
  out << "t,algo,user,arm,reward,regret,cum_regret\n";
  for (const RegretTrace& tr : r.traces) {
    for (std::size_t t = 0; t < tr.cumulative.size(); ++t) {
      out << (t + 1) << ',' << tr.algo << ',' << tr.users[t] << ',' << tr.arms[t] << ','
          << tr.rewards[t] << ',' << tr.instantaneous[t] << ',' << tr.cumulative[t] << '\n';
    }
  }
  out.precision(old);
}

int default_pilot_horizon(int horizon) { return horizon <= 1000 ? 1000 : 1500; }

std::vector<PilotChoice> pilot_tune(const RunConfig& c, int workers, const PolicyFactory& factory) {
  RunConfig pilot = c;
  pilot.seed = derive_seed(c.seed, 0, "pilot");
  pilot.trials = c.pilot.trials;
  pilot.task.horizon = std::min(c.task.horizon, c.pilot.horizon.value_or(
                                                    default_pilot_horizon(c.task.horizon)));
  std::vector<PilotChoice> out;
  for (const AlgorithmSpec& a : c.algorithms) {
    PilotChoice choice;
    choice.algo = a.label;
    choice.grid = a.grid;
    std::sort(choice.grid.begin(), choice.grid.end());
    double best = std::numeric_limits<double>::infinity();
    for (const double scale : choice.grid) {
      AlgorithmSpec probe = a;
      probe.mode = ExplorationMode::tuned;
      probe.scale = scale;
      pilot.algorithms = {probe};
      const std::vector<TrialResult> results = run_trials(pilot, workers, factory);
      double total = 0.0;
      for (const TrialResult& r : results) {
        if (r.aborted) throw Error("pilot trial aborted for " + a.label + ": " + r.error);
        total += r.traces.front().final_regret();
      }
      const double mean = total / static_cast<double>(results.size());
      choice.mean_regret.push_back(mean);
      if (mean < best) {
        best = mean;
        choice.scale = scale;
      }
    }
    out.push_back(std::move(choice));
  }
  return out;
}

void apply_pilot(RunConfig& c, const std::vector<PilotChoice>& choices) {
  for (const PilotChoice& p : choices) {
    for (AlgorithmSpec& a : c.algorithms) {
      if (a.label == p.algo) {
        a.mode = ExplorationMode::tuned;
        a.scale = p.scale;
      }
    }
  }
}

std::filesystem::path make_run_directory(const std::filesystem::path& root,
                                         const std::string& name) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream stamp;
  stamp << std::put_time(&tm, "%Y%m%dT%H%M%SZ");
  const std::filesystem::path base = root / name;
  std::filesystem::create_directories(base);
  std::filesystem::path dir = base / stamp.str();
  for (int k = 1; !std::filesystem::create_directory(dir); ++k) {
    dir = base / (stamp.str() + "-" + std::to_string(k));
  }
  return dir;
}

namespace {

json config_echo(const RunConfig& c) {
  json algos = json::array();
  for (const AlgorithmSpec& a : c.algorithms) {
    algos.push_back({{"algo", to_string(a.kind)},
                     {"label", a.label},
                     {"exploration", a.mode == ExplorationMode::tuned ? "tuned" : "theoretical"},
                     {"scale", a.scale},
                     {"grid", a.grid}});
  }
  return {{"name", c.name},
          {"task",
           {{"arms", c.task.arms},
            {"candidates", c.task.candidates},
            {"users", c.task.users},
            {"dim", c.task.dim},
            {"horizon", c.task.horizon}}},
          {"graph",
           {{"kind", to_string(c.graph.kind)},
            {"p", c.graph.p},
            {"latent_dim", c.graph.latent_dim},
            {"rho_l", c.graph.rho_l},
            {"threshold", c.graph.threshold},
            {"blocks", c.graph.blocks},
            {"p_in", c.graph.p_in},
            {"p_out", c.graph.p_out},
            {"per_trial", c.graph.per_trial}}},
          {"env",
           {{"regime", to_string(c.env.regime)},
            {"eta", c.env.eta},
            {"rho", c.env.rho},
            {"lengthscale", c.env.lengthscale},
            {"noise_sigma", c.env.noise_sigma}}},
          {"model",
           {{"rho", c.model.rho},
            {"lengthscale", c.model.lengthscale ? json(*c.model.lengthscale) : json("median")},
            {"lambda_base", c.model.lambda_base},
            {"schedule", c.model.schedule},
            {"t_star", c.model.t_star ? json(*c.model.t_star) : json("auto")},
            {"confidence",
             {{"b_rho", c.model.confidence.b_rho},
              {"sigma", c.model.confidence.sigma_sub},
              {"delta", c.model.confidence.delta}}}}},
          {"algorithms", algos},
          {"trials", c.trials},
          {"seed", c.seed}};
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

}  // namespace

RunOutcome run_experiment(RunConfig c, const RunOptions& options, const PolicyFactory& factory) {
  c.validate();
  RunOutcome outcome;
  if (c.pilot.enabled) {
    outcome.pilot = pilot_tune(c, options.workers, factory);
    apply_pilot(c, outcome.pilot);
  }
  const std::vector<TrialResult> results = run_trials(c, options.workers, factory);

  std::vector<RegretTrace> traces;
  json trials = json::array();
  for (const TrialResult& r : results) {
    json algo_hashes = json::object();
    json diagnostics = json::object();
    if (r.aborted) {
      ++outcome.aborted;
    } else {
      for (const RegretTrace& t : r.traces) {
        traces.push_back(t);
        algo_hashes[t.algo] = t.stream_hash;
        diagnostics[t.algo] = {{"variance_clips", t.clip_count},
                               {"symmetry_violations", t.symmetry_violations},
                               {"rebuilds", t.rebuilds},
                               {"mmd_bandwidths", t.bandwidths}};
      }
    }
    trials.push_back({{"trial", r.trial},
                      {"aborted", r.aborted},
                      {"error", r.error},
                      {"stream_hash", r.stream_hash},
                      {"algorithm_stream_hashes", algo_hashes},
                      {"truth_hash", r.truth_hash},
                      {"noise_sigma", r.noise_sigma},
                      {"model_lengthscale", r.lengthscale},
                      {"s_spec", r.s_spec},
                      {"s_spec_degenerate", r.s_spec_degenerate},
                      {"edges", r.edges},
                      {"diagnostics", diagnostics}});
  }
  outcome.summary = summarize(traces);

  json pilot = json::array();
  for (const PilotChoice& p : outcome.pilot) {
    pilot.push_back({{"algo", p.algo}, {"scale", p.scale}, {"grid", p.grid},
                     {"mean_regret", p.mean_regret}});
  }

  outcome.dir = make_run_directory(options.out, c.name);
  json manifest = {{"config", config_echo(c)},
                   {"config_hash", git_blob_hash(c.source)},
                   {"simd", std::string(simd::isa_name(simd::active().isa))},
                   {"pilot", pilot},
                   {"aborted_trials", outcome.aborted},
                   {"trials", trials}};
  write_file(outcome.dir / "manifest.json", manifest.dump(2) + "\n");
  std::ostringstream summary, curves;
  write_summary_json(summary, outcome.summary);
  write_curves_csv(curves, outcome.summary);
  write_file(outcome.dir / "summary.json", summary.str());
  write_file(outcome.dir / "curves.csv", curves.str());
  if (options.write_per_trial) {
    std::filesystem::create_directories(outcome.dir / "per-trial");
    for (const TrialResult& r : results) {
      std::ostringstream os;
      write_trial_csv(os, r);
      write_file(outcome.dir / "per-trial" / ("trial_" + std::to_string(r.trial) + ".csv"),
                 os.str());
    }
  }
  return outcome;
}

}  // namespace lkb
