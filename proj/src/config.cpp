#include "lkb/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "lkb/error.hpp"

namespace lkb {

namespace {

struct PresetEntry {
  const char* name;
  TaskShape shape;
};

constexpr PresetEntry kPresets[] = {
    {"easy", {10, 5, 20, 5, 1000}},
    {"medium", {20, 5, 20, 10, 3000}},
    {"hard", {50, 5, 20, 20, 5000}},
    {"hard-3000", {50, 5, 20, 20, 3000}},
};

void check_keys(const YAML::Node& node, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!node.IsMap()) throw ConfigError(where + " must be a mapping");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!ok.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <class T>
void read(const YAML::Node& node, const char* key, T& into) {
  if (const YAML::Node v = node[key]) {
    try {
      into = v.as<T>();
    } catch (const YAML::Exception& e) {
      throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
  }
}

void read_seed(const YAML::Node& node, const char* key, std::uint64_t& into) {
  if (const YAML::Node v = node[key]) {
    try {
      into = v.as<std::uint64_t>();
    } catch (const YAML::Exception&) {
      throw ConfigError(std::string("'") + key + "' must be a non-negative integer");
    }
  }
}

GraphSpec::Kind parse_graph_kind(const std::string& s) {
  if (s == "erdos_renyi" || s == "er") return GraphSpec::Kind::erdos_renyi;
  if (s == "rbf") return GraphSpec::Kind::rbf;
  if (s == "sbm") return GraphSpec::Kind::sbm;
  if (s == "empty") return GraphSpec::Kind::empty;
  if (s == "complete") return GraphSpec::Kind::complete;
  if (s == "star") return GraphSpec::Kind::star;
  throw ConfigError("unknown graph kind '" + s + "'");
}

AgentKernel::Kind parse_agent_kind(const std::string& s) {
  if (s == "laplacian_inv") return AgentKernel::Kind::laplacian_inv;
  if (s == "heat") return AgentKernel::Kind::heat;
  if (s == "spectral_rbf") return AgentKernel::Kind::spectral_rbf;
  if (s == "all_ones") return AgentKernel::Kind::all_ones;
  if (s == "learned_mmd") return AgentKernel::Kind::learned_mmd;
  throw ConfigError("unknown agent kernel '" + s + "'");
}

void parse_task(const YAML::Node& n, TaskShape& t) {
  check_keys(n, "task", {"arms", "candidates", "users", "dim", "horizon"});
  read(n, "arms", t.arms);
  read(n, "candidates", t.candidates);
  read(n, "users", t.users);
  read(n, "dim", t.dim);
  read(n, "horizon", t.horizon);
}

void parse_graph(const YAML::Node& n, GraphSpec& g) {
  check_keys(n, "graph", {"kind", "p", "latent_dim", "rho_l", "threshold", "blocks", "p_in",
                          "p_out", "per_trial"});
  if (n["kind"]) g.kind = parse_graph_kind(n["kind"].as<std::string>());
  read(n, "p", g.p);
  read(n, "latent_dim", g.latent_dim);
  read(n, "rho_l", g.rho_l);
  read(n, "threshold", g.threshold);
  read(n, "blocks", g.blocks);
  read(n, "p_in", g.p_in);
  read(n, "p_out", g.p_out);
  read(n, "per_trial", g.per_trial);
}

void parse_env(const YAML::Node& n, EnvSpec& e) {
  check_keys(n, "env", {"regime", "eta", "rho", "lengthscale", "noise_sigma"});
  if (n["regime"]) e.regime = parse_regime(n["regime"].as<std::string>());
  read(n, "eta", e.eta);
  read(n, "rho", e.rho);
  read(n, "lengthscale", e.lengthscale);
  read(n, "noise_sigma", e.noise_sigma);
}

void parse_model(const YAML::Node& n, ModelSpec& m) {
  check_keys(n, "model", {"rho", "lengthscale", "lambda_base", "schedule", "t_star", "confidence"});
  read(n, "rho", m.rho);
  if (const YAML::Node l = n["lengthscale"]) {
    if (l.as<std::string>() == "median") {
      m.lengthscale.reset();
    } else {
      double v = 0.0;
      read(n, "lengthscale", v);
      m.lengthscale = v;
    }
  }
  read(n, "lambda_base", m.lambda_base);
  read(n, "schedule", m.schedule);
  if (const YAML::Node s = n["t_star"]) {
    const auto text = s.as<std::string>();
    if (text == "auto") {
      m.t_star.reset();
    } else if (text == "never") {
      m.t_star = kNeverSwitch;
    } else {
      int v = 0;
      read(n, "t_star", v);
      m.t_star = v;
    }
  }
  if (const YAML::Node c = n["confidence"]) {
    check_keys(c, "model.confidence", {"b_rho", "sigma", "delta"});
    read(c, "b_rho", m.confidence.b_rho);
    read(c, "sigma", m.confidence.sigma_sub);
    read(c, "delta", m.confidence.delta);
  }
}

AlgorithmSpec parse_algorithm(const YAML::Node& n) {
  AlgorithmSpec a;
  if (n.IsScalar()) {
    a.kind = parse_algo(n.as<std::string>());
    a.label = to_string(a.kind);
    return a;
  }
  check_keys(n, "algorithms entry", {"algo", "label", "exploration", "beta", "nu", "alpha",
                                     "grid", "agent_kernel", "rho"});
  if (!n["algo"]) throw ConfigError("algorithm entry needs 'algo'");
  a.kind = parse_algo(n["algo"].as<std::string>());
  a.label = to_string(a.kind);
  read(n, "label", a.label);
  if (const YAML::Node e = n["exploration"]) {
    const auto mode = e.as<std::string>();
    if (mode == "tuned") {
      a.mode = ExplorationMode::tuned;
    } else if (mode == "theoretical") {
      a.mode = ExplorationMode::theoretical;
    } else {
      throw ConfigError("exploration must be 'tuned' or 'theoretical'");
    }
  }
  int scales = 0;
  for (const char* key : {"beta", "nu", "alpha"}) {
    if (n[key]) {
      read(n, key, a.scale);
      ++scales;
    }
  }
  if (scales > 1) throw ConfigError("give at most one of beta, nu, alpha");
  read(n, "grid", a.grid);
  if (n["rho"]) {
    double r = 0.0;
    read(n, "rho", r);
    a.rho = r;
  }
  if (const YAML::Node k = n["agent_kernel"]) {
    check_keys(k, "agent_kernel", {"kind", "rho", "tau", "k", "bandwidth", "feature_dim",
                                   "update_interval", "min_count"});
    if (k["kind"]) a.agent.kind = parse_agent_kind(k["kind"].as<std::string>());
    read(k, "rho", a.agent.rho);
    read(k, "tau", a.agent.tau);
    read(k, "k", a.agent.k);
    read(k, "bandwidth", a.agent.bandwidth);
    read(k, "feature_dim", a.agent.feature_dim);
    read(k, "update_interval", a.agent.update_interval);
    read(k, "min_count", a.agent.min_count);
  }
  return a;
}

YAML::Node load_yaml(const std::string& text) {
  try {
    return YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("invalid YAML: ") + e.what());
  }
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TaskShape task_preset(const std::string& name) {
  for (const auto& p : kPresets) {
    if (name == p.name) return p.shape;
  }
  throw ConfigError("unknown preset '" + name + "'");
}

std::vector<std::string> task_preset_names() {
  std::vector<std::string> out;
  for (const auto& p : kPresets) out.emplace_back(p.name);
  return out;
}

std::string to_string(AlgoKind k) {
  switch (k) {
    case AlgoKind::lk_gp_ucb:
      return "lk_gp_ucb";
    case AlgoKind::lk_gp_ts:
      return "lk_gp_ts";
    case AlgoKind::gp_ucb:
      return "gp_ucb";
    case AlgoKind::coop_kernel_ucb:
      return "coop_kernel_ucb";
    case AlgoKind::gob_lin:
      return "gob_lin";
    case AlgoKind::graph_ucb:
      return "graph_ucb";
    case AlgoKind::pooled_linucb:
      return "pooled_linucb";
    case AlgoKind::peruser_linucb:
      return "peruser_linucb";
  }
  return "unknown";
}

AlgoKind parse_algo(const std::string& s) {
  for (const AlgoKind k : all_algorithms()) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown algorithm '" + s + "'");
}

std::vector<AlgoKind> all_algorithms() {
  return {AlgoKind::lk_gp_ucb,   AlgoKind::lk_gp_ts,  AlgoKind::gp_ucb,
          AlgoKind::coop_kernel_ucb, AlgoKind::gob_lin, AlgoKind::graph_ucb,
          AlgoKind::pooled_linucb, AlgoKind::peruser_linucb};
}

std::string to_string(GraphSpec::Kind k) {
  switch (k) {
    case GraphSpec::Kind::erdos_renyi:
      return "erdos_renyi";
    case GraphSpec::Kind::rbf:
      return "rbf";
    case GraphSpec::Kind::sbm:
      return "sbm";
    case GraphSpec::Kind::empty:
      return "empty";
    case GraphSpec::Kind::complete:
      return "complete";
    case GraphSpec::Kind::star:
      return "star";
  }
  return "unknown";
}

void RunConfig::validate() const {
  const TaskShape& t = task;
  if (t.arms < 1 || t.users < 1 || t.dim < 1) throw ConfigError("arms, users and dim must be positive");
  if (t.candidates < 1 || t.candidates > t.arms) throw ConfigError("candidates must lie in [1, arms]");
  if (t.horizon < 1) throw ConfigError("horizon must be at least 1");
  if (trials < 1) throw ConfigError("trials must be at least 1");
  if (workers < 1) throw ConfigError("workers must be at least 1");
  if (algorithms.empty()) throw ConfigError("no algorithms configured");
  if (!(model.rho > 0.0) || !(env.rho > 0.0)) throw ConfigError("rho must be positive");
  if (!(model.lambda_base > 0.0)) throw ConfigError("lambda_base must be positive");
  if (model.lengthscale && !(*model.lengthscale > 0.0)) throw ConfigError("lengthscale must be positive");
  if (!(env.lengthscale > 0.0)) throw ConfigError("env lengthscale must be positive");
  if (pilot.trials < 1) throw ConfigError("pilot trials must be at least 1");
  if (pilot.horizon && *pilot.horizon < 1) throw ConfigError("pilot horizon must be positive");
  std::set<std::string> labels;
  for (const AlgorithmSpec& a : algorithms) {
    if (!labels.insert(a.label).second) throw ConfigError("duplicate algorithm label '" + a.label + "'");
    if (a.grid.empty()) throw ConfigError("empty tuning grid for " + a.label);
  }
}

RunConfig parse_run_config(const std::string& yaml_text) {
  const YAML::Node root = load_yaml(yaml_text);
  RunConfig c;
  c.source = yaml_text;
  if (!root || root.IsNull()) {
    c.algorithms.clear();
  } else {
    check_keys(root, "config", {"name", "preset", "task", "graph", "env", "model", "algorithms",
                                "pilot", "trials", "seed", "workers", "out"});
    read(root, "name", c.name);
    if (root["preset"]) c.task = task_preset(root["preset"].as<std::string>());
    if (root["task"]) parse_task(root["task"], c.task);
    if (root["graph"]) parse_graph(root["graph"], c.graph);
    if (root["env"]) parse_env(root["env"], c.env);
    if (root["model"]) parse_model(root["model"], c.model);
    if (const YAML::Node algos = root["algorithms"]) {
      if (!algos.IsSequence()) throw ConfigError("'algorithms' must be a list");
      for (const auto& a : algos) c.algorithms.push_back(parse_algorithm(a));
    }
    if (const YAML::Node p = root["pilot"]) {
      check_keys(p, "pilot", {"enabled", "horizon", "trials"});
      read(p, "enabled", c.pilot.enabled);
      if (p["horizon"]) {
        int h = 0;
        read(p, "horizon", h);
        c.pilot.horizon = h;
      }
      read(p, "trials", c.pilot.trials);
    }
    read(root, "trials", c.trials);
    read_seed(root, "seed", c.seed);
    read(root, "workers", c.workers);
    read(root, "out", c.out);
  }
  if (c.algorithms.empty()) {
    for (const AlgoKind k : all_algorithms()) {
      AlgorithmSpec a;
      a.kind = k;
      a.label = to_string(k);
      c.algorithms.push_back(a);
    }
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) { return parse_run_config(slurp(path)); }

RunConfig preset_run_config(const std::string& preset) {
  RunConfig c = parse_run_config("");
  c.name = preset;
  c.task = task_preset(preset);
  c.validate();
  return c;
}

void apply_preset(RunConfig& config, const std::string& preset) {
  config.task = task_preset(preset);
  config.validate();
}

SweepConfig parse_sweep_config(const std::string& yaml_text) {
  const YAML::Node root = load_yaml(yaml_text);
  SweepConfig s;
  if (!root || root.IsNull()) return s;
  check_keys(root, "sweep", {"name", "users", "horizon_multiplier", "horizons", "graph",
                             "edge_probability", "rho", "lambda", "lengthscale", "dim",
                             "contexts", "seeds", "population_sample", "seed"});
  read(root, "name", s.name);
  read(root, "users", s.users);
  read(root, "horizon_multiplier", s.horizon_multiplier);
  read(root, "horizons", s.horizons);
  if (const YAML::Node g = root["graph"]) {
    const auto kind = g.as<std::string>();
    if (kind == "empty") {
      s.graph = GraphFamily::empty;
    } else if (kind == "complete") {
      s.graph = GraphFamily::complete;
    } else if (kind == "erdos_renyi" || kind == "er") {
      s.graph = GraphFamily::erdos_renyi;
    } else {
      throw ConfigError("sweep graph must be empty, complete or erdos_renyi");
    }
  }
  read(root, "edge_probability", s.edge_probability);
  read(root, "rho", s.rho);
  read(root, "lambda", s.lambda);
  read(root, "lengthscale", s.lengthscale);
  read(root, "dim", s.dim);
  if (const YAML::Node d = root["contexts"]) {
    const auto kind = d.as<std::string>();
    if (kind == "uniform_cube") {
      s.contexts = ContextDistribution::uniform_cube;
    } else if (kind == "unit_sphere") {
      s.contexts = ContextDistribution::unit_sphere;
    } else {
      throw ConfigError("contexts must be uniform_cube or unit_sphere");
    }
  }
  read(root, "seeds", s.seeds);
  read(root, "population_sample", s.population_sample);
  read_seed(root, "seed", s.master_seed);
  if (s.users.empty() || std::any_of(s.users.begin(), s.users.end(), [](int n) { return n < 1; })) {
    throw ConfigError("users must be a non-empty list of positive integers");
  }
  if (s.horizons.empty() && s.horizon_multiplier < 1) {
    throw ConfigError("horizon_multiplier must be positive");
  }
  if (s.seeds < 1 || s.dim < 1 || s.population_sample < 1) {
    throw ConfigError("seeds, dim and population_sample must be positive");
  }
  return s;
}

SweepConfig load_sweep_config(const std::string& path) { return parse_sweep_config(slurp(path)); }

}  // namespace lkb
