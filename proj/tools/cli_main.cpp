// topoinfer: simulate traffic, infer topologies, run experiment sweeps.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "topoinfer/cda.hpp"
#include "topoinfer/emcda.hpp"
#include "topoinfer/eval.hpp"
#include "topoinfer/io.hpp"
#include "topoinfer/sim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace topoinfer;

namespace {

enum class LogLevel { kQuiet = 0, kInfo = 1, kDebug = 2 };

LogLevel log_level() {
  const char* env = std::getenv("TOPOINFER_LOG");
  if (!env) return LogLevel::kInfo;
  const std::string v(env);
  if (v == "quiet") return LogLevel::kQuiet;
  if (v == "debug") return LogLevel::kDebug;
  return LogLevel::kInfo;
}

void log(LogLevel at, const std::string& msg) {
  if (static_cast<int>(log_level()) >= static_cast<int>(at)) std::cerr << msg << "\n";
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open config file: " + path);
  try {
    return json::parse(in, nullptr, /*allow_exceptions=*/true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw InvalidInput(path + ": " + e.what());
  }
}

// Required-field accessor so schema errors name the missing key.
const json& require_field(const json& j, const std::string& key, const std::string& ctx) {
  auto it = j.find(key);
  if (it == j.end())
    throw InvalidInput("config schema error: missing field '" + key + "' in " + ctx);
  return *it;
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  auto it = j.find(key);
  return it == j.end() ? fallback : it->get<T>();
}

SimConfig parse_sim_config(const json& j) {
  SimConfig cfg;
  cfg.n_nodes = require_field(j, "n_nodes", "sim config").get<int>();
  cfg.rate_star = require_field(j, "rate_star", "sim config").get<double>();
  cfg.n_slots = require_field(j, "n_slots", "sim config").get<int>();
  const std::string mode = require_field(j, "mode", "sim config").get<std::string>();
  if (mode == "model_faithful")
    cfg.mode = SimMode::kModelFaithful;
  else if (mode == "realistic")
    cfg.mode = SimMode::kRealistic;
  else
    throw InvalidInput("config schema error: mode must be model_faithful or realistic, got '" +
                       mode + "'");
  cfg.loss_star = get_or(j, "loss_star", cfg.loss_star);
  cfg.active_fraction = get_or(j, "active_fraction", cfg.active_fraction);
  cfg.delay_star = get_or(j, "delay_star", cfg.delay_star);
  cfg.slot_duration = get_or(j, "slot_duration", cfg.slot_duration);
  cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed);
  cfg.retransmission_limit = get_or(j, "retransmission_limit", cfg.retransmission_limit);
  cfg.ack_timeout_slots = get_or(j, "ack_timeout_slots", cfg.ack_timeout_slots);
  cfg.per_slot_node_capacity = get_or(j, "per_slot_node_capacity", cfg.per_slot_node_capacity);
  cfg.delay_jitter_span = get_or(j, "delay_jitter_span", cfg.delay_jitter_span);
  if (auto it = j.find("explicit_links"); it != j.end())
    for (const auto& pair : *it) {
      if (!pair.is_array() || pair.size() != 2)
        throw InvalidInput("config schema error: explicit_links entries must be [i, j] pairs");
      cfg.explicit_links.emplace_back(pair[0].get<int>() - 1, pair[1].get<int>() - 1);
    }
  return cfg;
}

MetricConfig parse_metric_config(const json& j, MetricConfig cfg = {}) {
  cfg.ar_order = get_or(j, "ar_order", cfg.ar_order);
  cfg.te_src_window = get_or(j, "te_src_window", cfg.te_src_window);
  cfg.te_dst_window = get_or(j, "te_dst_window", cfg.te_dst_window);
  cfg.permutations = get_or(j, "permutations", cfg.permutations);
  cfg.alpha = get_or(j, "alpha", cfg.alpha);
  cfg.max_delay = get_or(j, "max_delay", cfg.max_delay);
  return cfg;
}

EmConfig parse_em_config(const json& j, EmConfig cfg = {}) {
  cfg.n_samples = get_or(j, "n_samples", cfg.n_samples);
  cfg.burn_in_sweeps = get_or(j, "burn_in_sweeps", cfg.burn_in_sweeps);
  cfg.max_iterations = get_or(j, "max_iterations", cfg.max_iterations);
  cfg.learning_rate_hold = get_or(j, "learning_rate_hold", cfg.learning_rate_hold);
  cfg.em_permutations = get_or(j, "em_permutations", cfg.em_permutations);
  cfg.tau_max = get_or(j, "tau_max", cfg.tau_max);
  cfg.convergence_patience = get_or(j, "convergence_patience", cfg.convergence_patience);
  if (auto it = j.find("metric"); it != j.end()) cfg.metric = parse_metric_config(*it, cfg.metric);
  return cfg;
}

ExperimentConfig parse_experiment_config(const json& j) {
  ExperimentConfig cfg;
  cfg.sim = parse_sim_config(require_field(j, "sim", "experiment config"));
  for (const auto& name : require_field(j, "algorithms", "experiment config"))
    cfg.algorithms.push_back(algorithm_from_name(name.get<std::string>()));
  cfg.n_trials = require_field(j, "n_trials", "experiment config").get<int>();
  cfg.base_seed = get_or<std::uint64_t>(j, "base_seed", cfg.base_seed);
  if (auto it = j.find("metric"); it != j.end()) cfg.metric = parse_metric_config(*it);
  if (auto it = j.find("em"); it != j.end()) cfg.em = parse_em_config(*it);
  if (auto it = j.find("sweep"); it != j.end()) {
    cfg.sweep = sweep_param_from_name(require_field(*it, "param", "sweep").get<std::string>());
    for (const auto& v : require_field(*it, "values", "sweep"))
      cfg.sweep_values.push_back(v.get<double>());
  }
  return cfg;
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                 std::uint64_t seed_override, bool has_seed) {
  SimConfig cfg = parse_sim_config(load_json(config_path));
  if (has_seed) cfg.seed = seed_override;
  cfg.validate();
  fs::create_directories(out_dir);
  const fs::path out(out_dir);

  if (cfg.mode == SimMode::kModelFaithful) {
    const auto res = gen_model_faithful(cfg);
    write_observations_csv((out / "observations.csv").string(), res.obs);
    write_adjacency_csv((out / "adjacency.csv").string(), res.truth.adjacency);
    write_latent_csv((out / "latent.csv").string(), res.latent);
    log(LogLevel::kInfo, "simulate: wrote observations.csv, adjacency.csv, latent.csv to " +
                             out_dir);
  } else {
    const auto res = gen_realistic(cfg);
    write_observations_csv((out / "observations.csv").string(), res.obs);
    write_adjacency_csv((out / "adjacency.csv").string(), res.truth_adjacency);
    log(LogLevel::kInfo, "simulate: wrote observations.csv, adjacency.csv to " + out_dir);
  }
  return 0;
}

int cmd_infer(const std::string& obs_path, const std::string& algo,
              const std::string& metric_name, const std::string& out_dir,
              const std::string& truth_path, double slot_duration, std::uint64_t seed,
              const MetricConfig& mc_in, const EmConfig& em_in) {
  MetricConfig mc = mc_in;
  if (metric_name == "gc")
    mc.kind = MetricKind::kGC;
  else if (metric_name == "te")
    mc.kind = MetricKind::kTE;
  else
    throw InvalidInput("unknown metric '" + metric_name + "' (expected gc or te)");

  const ObservationSet obs = read_observations_csv(obs_path, slot_duration);
  fs::create_directories(out_dir);
  const fs::path out(out_dir);

  Adjacency truth(0);
  const bool have_truth = !truth_path.empty();
  if (have_truth) truth = read_adjacency_csv(truth_path, obs.n_nodes);

  if (algo == "cda") {
    const Adjacency est = infer_cda(obs, mc, seed);
    write_adjacency_csv((out / "adjacency.csv").string(), est);
    log(LogLevel::kInfo, "infer: cda found " + std::to_string(est.n_links()) + " links");
    return 0;
  }
  if (algo == "em-cda" || algo == "em-es") {
    EmConfig em = em_in;
    em.metric = mc;
    em.rng_seed = seed;
    const EmResult res = algo == "em-es" ? run_em_es(obs, em) : run_em_cda(obs, em);
    write_adjacency_csv((out / "adjacency.csv").string(), res.adjacency);
    write_em_trace_csv((out / "trace.csv").string(), res.trace, have_truth ? &truth : nullptr);
    log(LogLevel::kInfo, "infer: " + algo + " converged after " +
                             std::to_string(res.trace.size()) + " iterations, " +
                             std::to_string(res.adjacency.n_links()) + " links");
    return 0;
  }
  throw InvalidInput("unknown algorithm '" + algo + "' (expected cda, em-cda, or em-es)");
}

int cmd_experiment(const std::string& config_path, const std::string& out_dir, int jobs,
                   bool dry_run, std::uint64_t seed_override, bool has_seed) {
  ExperimentConfig cfg = parse_experiment_config(load_json(config_path));
  if (has_seed) cfg.base_seed = seed_override;

  if (dry_run) {
    for (const auto& line : experiment_plan(cfg)) std::cout << line << "\n";
    return 0;
  }
  fs::create_directories(out_dir);
  const fs::path out(out_dir);
  const auto res = run_experiment(cfg, jobs, [](const std::string& msg) {
    log(LogLevel::kDebug, "experiment: " + msg);
  });
  write_results_csv((out / "results.csv").string(), res.rows);
  write_aggregated_csv((out / "aggregated.csv").string(), res.aggregated);
  log(LogLevel::kInfo, "experiment: wrote results.csv (" + std::to_string(res.rows.size()) +
                           " rows), aggregated.csv to " + out_dir);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Passive network-topology inference from packet timing meta-data"};
  app.require_subcommand(1);

  std::string config_path, out_dir = ".", obs_path, algo = "cda", metric = "gc",
              truth_path, te_windows;
  std::uint64_t seed = 1;
  double slot_duration = 0.0015;
  int jobs = 0;
  bool dry_run = false;
  MetricConfig mc;
  EmConfig em;

  auto* sim = app.add_subcommand("simulate", "Generate seeded traffic observations");
  sim->add_option("--config", config_path, "Simulation config (JSON)")->required();
  sim->add_option("--out", out_dir, "Output directory");
  auto* sim_seed = sim->add_option("--seed", seed, "Override the config seed");

  auto* inf = app.add_subcommand("infer", "Infer a topology from an observation CSV");
  inf->add_option("--obs", obs_path, "Observation CSV")->required();
  inf->add_option("--algo", algo, "cda | em-cda | em-es");
  inf->add_option("--metric", metric, "gc | te");
  inf->add_option("--out", out_dir, "Output directory");
  inf->add_option("--truth", truth_path, "Ground-truth adjacency CSV (annotates the trace)");
  inf->add_option("--seed", seed, "RNG seed");
  inf->add_option("--slot-duration", slot_duration, "Slot duration in seconds");
  inf->add_option("--alpha", mc.alpha, "Significance level");
  inf->add_option("--ar-order", mc.ar_order, "GC autoregressive order");
  inf->add_option("--te-windows", te_windows, "TE windows as s,r");
  inf->add_option("--permutations", mc.permutations, "Permutation count S");
  inf->add_option("--tau-max", mc.max_delay, "Max ACK delay scanned");
  inf->add_option("--samples", em.n_samples, "EM posterior samples M");
  inf->add_option("--max-iters", em.max_iterations, "EM iteration cap");

  auto* exp = app.add_subcommand("experiment", "Run a trial/sweep matrix from a config");
  exp->add_option("--config", config_path, "Experiment config (JSON)")->required();
  exp->add_option("--out", out_dir, "Output directory");
  exp->add_option("--jobs", jobs, "Worker threads (0 = available cores)");
  exp->add_flag("--dry-run", dry_run, "Print the job matrix without running");
  auto* exp_seed = exp->add_option("--seed", seed, "Override the config base seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(config_path, out_dir, seed, sim_seed->count() > 0);
    if (inf->parsed()) {
      if (!te_windows.empty()) {
        char comma = 0;
        std::istringstream ss(te_windows);
        if (!(ss >> mc.te_src_window >> comma >> mc.te_dst_window) || comma != ',')
          throw InvalidInput("--te-windows expects s,r (e.g. 1,1)");
      }
      em.tau_max = mc.max_delay;
      return cmd_infer(obs_path, algo, metric, out_dir, truth_path, slot_duration, seed, mc,
                       em);
    }
    if (exp->parsed())
      return cmd_experiment(config_path, out_dir, jobs, dry_run, seed, exp_seed->count() > 0);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
