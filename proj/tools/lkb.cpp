#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>

#include "lkb/analysis.hpp"
#include "lkb/config.hpp"
#include "lkb/error.hpp"
#include "lkb/graph.hpp"
#include "lkb/harness.hpp"

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::optional<std::string> out;
  std::optional<int> workers;
  std::optional<std::string> preset;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "Master seed");
  cmd->add_option("--trials", o.trials, "Number of trials R")->check(CLI::PositiveNumber);
  cmd->add_option("--out", o.out, "Output root directory");
  cmd->add_option("--workers", o.workers, "Concurrent trial workers")->check(CLI::PositiveNumber);
  cmd->add_option("--preset", o.preset, "Task shape preset")
      ->check(CLI::IsMember(lkb::task_preset_names()));
}

lkb::RunConfig load(const std::string& path, const Overrides& o) {
  lkb::RunConfig c = lkb::load_run_config(path);
  if (o.preset) lkb::apply_preset(c, *o.preset);
  if (o.seed) c.seed = *o.seed;
  if (o.trials) c.trials = *o.trials;
  if (o.out) c.out = *o.out;
  if (o.workers) c.workers = *o.workers;
  c.validate();
  return c;
}

void print_summary(const lkb::Summary& s) {
  std::cout << std::left << std::setw(20) << "algo" << std::right << std::setw(16)
            << "final regret" << std::setw(12) << "se" << '\n';
  for (const lkb::AlgoSummary& a : s.algorithms) {
    std::cout << std::left << std::setw(20) << a.algo << std::right << std::fixed
              << std::setprecision(2) << std::setw(16) << a.mean << std::setw(12) << a.se
              << (a.se_undefined ? "  (single trial)" : "") << '\n';
  }
  std::cout.unsetf(std::ios::floatfield);
}

int cmd_run(const std::string& path, const Overrides& o) {
  const lkb::RunConfig c = load(path, o);
  const lkb::RunOutcome r = lkb::run_experiment(c, {c.out, c.workers, true});
  for (const lkb::PilotChoice& p : r.pilot) {
    std::cout << "pilot " << p.algo << ": scale " << p.scale << '\n';
  }
  print_summary(r.summary);
  std::cout << "results in " << r.dir.string() << '\n';
  if (r.aborted > 0) {
    std::cerr << r.aborted << " trial(s) aborted; see manifest.json\n";
    return 1;
  }
  return 0;
}

int cmd_tune(const std::string& path, const Overrides& o) {
  const lkb::RunConfig c = load(path, o);
  const std::vector<lkb::PilotChoice> choices = lkb::pilot_tune(c, c.workers);
  nlohmann::json out = nlohmann::json::array();
  for (const lkb::PilotChoice& p : choices) {
    std::cout << p.algo << ": scale " << p.scale << " (grid";
    for (std::size_t i = 0; i < p.grid.size(); ++i) {
      std::cout << ' ' << p.grid[i] << "->" << p.mean_regret[i];
    }
    std::cout << ")\n";
    out.push_back({{"algo", p.algo}, {"scale", p.scale}, {"grid", p.grid},
                   {"mean_regret", p.mean_regret}});
  }
  const std::filesystem::path dir = lkb::make_run_directory(c.out, c.name + "-pilot");
  std::ofstream(dir / "pilot.json") << out.dump(2) << '\n';
  std::cout << "pilot choices in " << (dir / "pilot.json").string() << '\n';
  return 0;
}

int cmd_analyze(const std::string& path, const Overrides& o) {
  lkb::SweepConfig s = lkb::load_sweep_config(path);
  if (o.seed) s.master_seed = *o.seed;
  if (o.trials) s.seeds = *o.trials;
  const std::vector<lkb::SweepRow> rows = lkb::rank_collapse_sweep(s);
  lkb::write_sweep_csv(std::cout, rows);
  if (o.out) {
    const std::filesystem::path dir = lkb::make_run_directory(*o.out, s.name);
    std::ofstream csv(dir / "rank_collapse.csv");
    lkb::write_sweep_csv(csv, rows);
    std::cerr << "sweep written to " << (dir / "rank_collapse.csv").string() << '\n';
  }
  return 0;
}

int cmd_dump_graph(const std::string& path, const Overrides& o) {
  const lkb::RunConfig c = load(path, o);
  const lkb::UserGraph g = lkb::build_graph(c, 0);
  if (o.out) {
    std::ofstream csv(*o.out);
    if (!csv) throw lkb::Error("cannot write " + *o.out);
    lkb::write_edges_csv(csv, g);
  } else {
    lkb::write_edges_csv(std::cout, g);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Laplacian-kernelized multi-user bandit simulator"};
  app.require_subcommand(1);

  std::string run_path, tune_path, sweep_path, graph_path;
  Overrides run_o, tune_o, sweep_o, graph_o;

  auto* run = app.add_subcommand("run", "Run all configured algorithms over R trials");
  run->add_option("config", run_path, "Experiment config (YAML)")->required()->check(CLI::ExistingFile);
  add_common(run, run_o);

  auto* tune = app.add_subcommand("tune", "Pilot grid search over exploration scales");
  tune->add_option("config", tune_path, "Experiment config (YAML)")->required()->check(CLI::ExistingFile);
  add_common(tune, tune_o);

  auto* analyze = app.add_subcommand("analyze", "Information-gain sweep against spectral bounds");
  analyze->add_option("sweep-config", sweep_path, "Sweep config (YAML)")
      ->required()
      ->check(CLI::ExistingFile);
  add_common(analyze, sweep_o);

  auto* dump = app.add_subcommand("dump-graph", "Write the configured user graph as u,v,w CSV");
  dump->add_option("config", graph_path, "Experiment config (YAML)")->required()->check(CLI::ExistingFile);
  add_common(dump, graph_o);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(run_path, run_o);
    if (*tune) return cmd_tune(tune_path, tune_o);
    if (*analyze) return cmd_analyze(sweep_path, sweep_o);
    if (*dump) return cmd_dump_graph(graph_path, graph_o);
  } catch (const lkb::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
