#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lkb/agent_kernel.hpp"
#include "lkb/analysis.hpp"
#include "lkb/env.hpp"
#include "lkb/policy.hpp"

namespace lkb {

struct TaskShape {
  int arms = 10;        // m, pool size
  int candidates = 5;   // M_t
  int users = 20;       // n
  int dim = 5;          // d
  int horizon = 1000;   // T
};

/// Named shapes: easy, medium, hard (T = 5000) and hard-3000.
TaskShape task_preset(const std::string& name);
std::vector<std::string> task_preset_names();

struct GraphSpec {
  enum class Kind { erdos_renyi, rbf, sbm, empty, complete, star };
  Kind kind = Kind::erdos_renyi;
  double p = 0.2;
  int latent_dim = 4;
  double rho_l = 0.1;
  double threshold = 0.1;
  int blocks = 2;
  double p_in = 0.5;
  double p_out = 0.05;
  /// Draw a fresh graph per trial instead of one per configuration.
  bool per_trial = false;
};

struct EnvSpec {
  Regime regime = Regime::lk_gp_draw;
  double eta = 1.0;
  double rho = 0.01;
  double lengthscale = 1.0;
  double noise_sigma = 0.1;  // ignored by lk_gp_draw
};

struct ModelSpec {
  double rho = 0.1;
  /// Unset selects the median heuristic over the context pool.
  std::optional<double> lengthscale;
  double lambda_base = 0.01;
  bool schedule = true;
  /// Unset uses the default switch; kNeverSwitch keeps the exact phase.
  std::optional<int> t_star;
  ConfidenceParams confidence;
};

enum class AlgoKind {
  lk_gp_ucb,
  lk_gp_ts,
  gp_ucb,
  coop_kernel_ucb,
  gob_lin,
  graph_ucb,
  pooled_linucb,
  peruser_linucb
};

std::string to_string(AlgoKind k);
AlgoKind parse_algo(const std::string& s);
std::vector<AlgoKind> all_algorithms();

struct AlgorithmSpec {
  AlgoKind kind = AlgoKind::lk_gp_ucb;
  std::string label;  // defaults to the kind name
  ExplorationMode mode = ExplorationMode::tuned;
  double scale = 1.0;
  std::vector<double> grid{0.5, 1.0, 2.0, 4.0};
  AgentKernel agent;            // coop_kernel_ucb
  std::optional<double> rho;    // graph_ucb regularizer, defaults to the model rho
};

struct PilotSpec {
  bool enabled = false;
  /// Unset picks 1000 for horizons up to 1000 and 1500 otherwise.
  std::optional<int> horizon;
  int trials = 5;
};

struct RunConfig {
  std::string name = "run";
  TaskShape task;
  GraphSpec graph;
  EnvSpec env;
  ModelSpec model;
  std::vector<AlgorithmSpec> algorithms;
  PilotSpec pilot;
  int trials = 20;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string out = "results";
  /// Raw text the config was parsed from (hashed into the manifest).
  std::string source;

  /// Throws ConfigError on M_t > m, T < 1, R < 1 and similar.
  void validate() const;
};

RunConfig parse_run_config(const std::string& yaml_text);
RunConfig load_run_config(const std::string& path);
/// Config for a preset with every algorithm and default settings.
RunConfig preset_run_config(const std::string& preset);
/// Replaces the task shape; keeps everything else.
void apply_preset(RunConfig& config, const std::string& preset);

SweepConfig parse_sweep_config(const std::string& yaml_text);
SweepConfig load_sweep_config(const std::string& path);

std::string to_string(GraphSpec::Kind k);

}  // namespace lkb
