#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "lkb/config.hpp"
#include "lkb/env.hpp"
#include "lkb/graph.hpp"
#include "lkb/policy.hpp"

namespace lkb {

/// Everything a trial's policies share: the environment, the pre-generated
/// round stream and the model-side graph quantities.
struct TrialContext {
  int trial = 0;
  std::uint64_t master_seed = 0;
  Environment env;
  std::vector<Round> rounds;
  std::shared_ptr<const LaplacianSpectrum> spectrum;  // model rho
  BaseKernel model_base;
  SpectralScale s_spec;
  std::string stream_hash;
  std::string truth_hash;
};

/// Graph of a trial; the seed index is the trial only when graphs are drawn
/// per trial.
UserGraph build_graph(const RunConfig& config, int trial);
TrialContext build_trial(const RunConfig& config, int trial);

/// Seed of an algorithm's private stream. Keyed by the algorithm kind, so two
/// entries of the same kind replay identically.
std::uint64_t policy_seed(std::uint64_t master, int trial, AlgoKind kind);

using PolicyFactory = std::function<std::unique_ptr<Policy>(
    const AlgorithmSpec&, const TrialContext&, const RunConfig&)>;

std::unique_ptr<Policy> make_policy(const AlgorithmSpec& algo, const TrialContext& ctx,
                                    const RunConfig& config);

struct RegretTrace {
  std::string algo;
  int trial = 0;
  std::uint64_t seed = 0;
  std::vector<int> users;
  std::vector<int> arms;
  std::vector<double> rewards;
  std::vector<double> instantaneous;
  std::vector<double> cumulative;
  std::string stream_hash;  // of the rounds this algorithm consumed
  std::size_t clip_count = 0;
  std::size_t symmetry_violations = 0;
  int rebuilds = 0;
  std::vector<double> bandwidths;

  double final_regret() const { return cumulative.empty() ? 0.0 : cumulative.back(); }
};

struct TrialResult {
  int trial = 0;
  bool aborted = false;
  std::string error;
  std::vector<RegretTrace> traces;
  std::string stream_hash;
  std::string truth_hash;
  double noise_sigma = 0.0;
  double lengthscale = 0.0;
  double s_spec = 0.0;
  bool s_spec_degenerate = false;
  int edges = 0;
};

/// Replays the trial's shared stream through every configured algorithm.
/// Exceptions abort the trial and are reported in the result.
TrialResult run_trial(const RunConfig& config, int trial,
                      const PolicyFactory& factory = make_policy);

/// Trials 0..R-1 on up to `workers` threads; results in trial order.
std::vector<TrialResult> run_trials(const RunConfig& config, int workers,
                                    const PolicyFactory& factory = make_policy);

struct AlgoSummary {
  std::string algo;
  int trials = 0;
  double mean = 0.0;
  double se = 0.0;
  /// Set when a single trial makes the SE undefined (reported as 0).
  bool se_undefined = false;
  double first_quarter = 0.0;  // mean per-round regret over the first T/4 rounds
  double last_quarter = 0.0;
  std::vector<double> curve_mean;
  std::vector<double> curve_se;
};

struct Summary {
  std::vector<AlgoSummary> algorithms;
  const AlgoSummary& at(const std::string& algo) const;
};

/// Groups traces by algorithm in first-seen order. SE = sample std / sqrt(R).
Summary summarize(const std::vector<RegretTrace>& traces);

void write_summary_json(std::ostream& out, const Summary& s);
/// `t,algo,mean_cum_regret,se` with t from 1.
void write_curves_csv(std::ostream& out, const Summary& s);
/// `t,algo,user,arm,reward,regret,cum_regret` for one trial.
void write_trial_csv(std::ostream& out, const TrialResult& r);

struct PilotChoice {
  std::string algo;
  double scale = 0.0;
  std::vector<double> grid;
  std::vector<double> mean_regret;  // per grid entry
};

/// Pilot horizon used when none is configured.
int default_pilot_horizon(int horizon);

/// Runs every grid value of every algorithm on pilot trials and keeps the
/// value with the lowest mean cumulative regret (smallest value on ties).
/// Pilot trials use their own master seed so they never overlap evaluation.
std::vector<PilotChoice> pilot_tune(const RunConfig& config, int workers,
                                    const PolicyFactory& factory = make_policy);

/// Copies pilot choices into the algorithm specs.
void apply_pilot(RunConfig& config, const std::vector<PilotChoice>& choices);

struct RunOptions {
  std::filesystem::path out;
  int workers = 1;
  bool write_per_trial = true;
};

struct RunOutcome {
  std::filesystem::path dir;
  int aborted = 0;
  Summary summary;
  std::vector<PilotChoice> pilot;
};

/// Creates `<out>/<name>/<timestamp>[-k]/` and writes manifest.json,
/// summary.json, curves.csv and per-trial/*.csv. File contents never depend
/// on the clock.
RunOutcome run_experiment(RunConfig config, const RunOptions& options,
                          const PolicyFactory& factory = make_policy);

/// Fresh output directory under `root`, suffixed on collision.
std::filesystem::path make_run_directory(const std::filesystem::path& root,
                                         const std::string& name);

}  // namespace lkb
