#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "topoinfer/emcda.hpp"
#include "topoinfer/sim.hpp"
#include "topoinfer/types.hpp"

namespace topoinfer {

/// Link-detection confusion counts over off-diagonal ordered pairs.
struct Confusion {
  long long tp = 0, fp = 0, tn = 0, fn = 0;
};

Confusion confusion(const Adjacency& truth, const Adjacency& estimate);

struct Rates {
  double p_fa = 0.0;
  double p_d = 1.0;
};

/// P_FA = FP/(FP+TN), P_D = TP/(TP+FN). Degenerate 0/0 cases: P_FA = 0
/// (no negatives to misfire on) and P_D = 1 (no positives to miss).
Rates rates(const Confusion& c);

enum class Algorithm { kCdaGc, kCdaTe, kEmCdaGc, kEmCdaTe, kEmEs };

std::string algorithm_name(Algorithm a);
Algorithm algorithm_from_name(const std::string& name);

enum class SweepParam { kNone, kLossRate, kNSlots, kActiveFraction, kNNodes };

std::string sweep_param_name(SweepParam p);
SweepParam sweep_param_from_name(const std::string& name);

struct ExperimentConfig {
  SimConfig sim;
  std::vector<Algorithm> algorithms;
  MetricConfig metric;  // CDA metric parameters (kind overridden per algorithm)
  EmConfig em;          // EM parameters (metric kind overridden per algorithm)
  int n_trials = 1;
  std::uint64_t base_seed = 1;
  SweepParam sweep = SweepParam::kNone;
  std::vector<double> sweep_values;  // empty for kNone

  void validate() const;
};

/// One result row: final estimate (iteration = 0 for one-shot algorithms)
/// or a per-EM-iteration snapshot.
struct ResultRow {
  SweepParam sweep_param = SweepParam::kNone;
  double sweep_value = 0.0;
  Algorithm algorithm = Algorithm::kCdaGc;
  int trial = 0;
  int iteration = 0;  // 0 = final for non-EM; EM rows are 1-based
  double p_d = 1.0;
  double p_fa = 0.0;
  double wall_ms = 0.0;
};

struct AggregateRow {
  SweepParam sweep_param = SweepParam::kNone;
  double sweep_value = 0.0;
  Algorithm algorithm = Algorithm::kCdaGc;
  int iteration = 0;
  double mean_p_d = 0.0, std_p_d = 0.0;
  double mean_p_fa = 0.0, std_p_fa = 0.0;
  int n = 0;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
  std::vector<AggregateRow> aggregated;
};

/// Describes the job matrix without running it (CLI --dry-run).
std::vector<std::string> experiment_plan(const ExperimentConfig& cfg);

/// Runs every sweep point x trial x algorithm. Trial t uses seed
/// base_seed + t. Per-iteration rows are recorded for EM algorithms.
/// Trials are independent jobs executed by a worker pool of `jobs` threads
/// (<= 0 means hardware concurrency); the row order is deterministic and
/// independent of the thread count. `progress`, when set, is called once
/// per completed trial (from worker threads).
ExperimentResult run_experiment(const ExperimentConfig& cfg, int jobs = 1,
                                const std::function<void(const std::string&)>& progress = {});

}  // namespace topoinfer
