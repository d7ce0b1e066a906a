#include "topoinfer/eval.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <thread>

#include "topoinfer/cda.hpp"
#include "topoinfer/forward.hpp"
#include "topoinfer/rng.hpp"

namespace topoinfer {

Confusion confusion(const Adjacency& truth, const Adjacency& estimate) {
  if (truth.n_nodes != estimate.n_nodes)
    throw InvalidInput("confusion: adjacency sizes differ");
  Confusion c;
  for (int i = 0; i < truth.n_nodes; ++i)
    for (int j = 0; j < truth.n_nodes; ++j) {
      if (i == j) continue;
      const bool t = truth.at(i, j);
      const bool e = estimate.at(i, j);
      if (t && e)
        ++c.tp;
      else if (t && !e)
        ++c.fn;
      else if (!t && e)
        ++c.fp;
      else
        ++c.tn;
    }
  return c;
}

Rates rates(const Confusion& c) {
  Rates r;
  r.p_fa = (c.fp + c.tn) > 0 ? static_cast<double>(c.fp) / static_cast<double>(c.fp + c.tn)
                             : 0.0;
  r.p_d = (c.tp + c.fn) > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn)
                            : 1.0;
  return r;
}

std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::kCdaGc: return "CDA-GC";
    case Algorithm::kCdaTe: return "CDA-TE";
    case Algorithm::kEmCdaGc: return "EMCDA-GC";
    case Algorithm::kEmCdaTe: return "EMCDA-TE";
    case Algorithm::kEmEs: return "EMES";
  }
  return "?";
}

Algorithm algorithm_from_name(const std::string& name) {
  if (name == "CDA-GC") return Algorithm::kCdaGc;
  if (name == "CDA-TE") return Algorithm::kCdaTe;
  if (name == "EMCDA-GC") return Algorithm::kEmCdaGc;
  if (name == "EMCDA-TE") return Algorithm::kEmCdaTe;
  if (name == "EMES") return Algorithm::kEmEs;
  throw InvalidInput("unknown algorithm name: " + name);
}

std::string sweep_param_name(SweepParam p) {
  switch (p) {
    case SweepParam::kNone: return "none";
    case SweepParam::kLossRate: return "loss_rate";
    case SweepParam::kNSlots: return "n_slots";
    case SweepParam::kActiveFraction: return "active_fraction";
    case SweepParam::kNNodes: return "n_nodes";
  }
  return "?";
}

SweepParam sweep_param_from_name(const std::string& name) {
  if (name == "none") return SweepParam::kNone;
  if (name == "loss_rate") return SweepParam::kLossRate;
  if (name == "n_slots") return SweepParam::kNSlots;
  if (name == "active_fraction") return SweepParam::kActiveFraction;
  if (name == "n_nodes") return SweepParam::kNNodes;
  throw InvalidInput("unknown sweep parameter: " + name);
}

void ExperimentConfig::validate() const {
  sim.validate();
  if (n_trials < 1) throw InvalidInput("experiment config: n_trials must be >= 1");
  if (algorithms.empty()) throw InvalidInput("experiment config: no algorithms listed");
  if (sweep != SweepParam::kNone && sweep_values.empty())
    throw InvalidInput("experiment config: sweep declared but no sweep values");
}

namespace {

SimConfig apply_sweep(SimConfig sim, SweepParam param, double value) {
  switch (param) {
    case SweepParam::kNone: break;
    case SweepParam::kLossRate: sim.loss_star = value; break;
    case SweepParam::kNSlots: sim.n_slots = static_cast<int>(value); break;
    case SweepParam::kActiveFraction: sim.active_fraction = value; break;
    case SweepParam::kNNodes: sim.n_nodes = static_cast<int>(value); break;
  }
  return sim;
}

struct GeneratedData {
  ObservationSet obs;
  Adjacency truth;
};

GeneratedData generate(const SimConfig& cfg) {
  if (cfg.mode == SimMode::kModelFaithful) {
    auto out = gen_model_faithful(cfg);
    return {std::move(out.obs), out.truth.adjacency};
  }
  auto out = gen_realistic(cfg);
  return {std::move(out.obs), std::move(out.truth_adjacency)};
}

}  // namespace

std::vector<std::string> experiment_plan(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<double> points =
      cfg.sweep == SweepParam::kNone ? std::vector<double>{0.0} : cfg.sweep_values;
  std::vector<std::string> plan;
  for (double v : points)
    for (int t = 0; t < cfg.n_trials; ++t)
      for (Algorithm a : cfg.algorithms) {
        std::string label = sweep_param_name(cfg.sweep);
        plan.push_back(label + "=" + std::to_string(v) + " trial=" + std::to_string(t) +
                       " seed=" + std::to_string(cfg.base_seed + t) +
                       " algo=" + algorithm_name(a));
      }
  return plan;
}

namespace {

// One sweep-point x trial unit of work; produces its rows independently of
// every other job so trials can run on a worker pool.
std::vector<ResultRow> run_trial_job(const ExperimentConfig& cfg, double point, int trial) {
  std::vector<ResultRow> rows;
  SimConfig sim = apply_sweep(cfg.sim, cfg.sweep, point);
  sim.seed = cfg.base_seed + static_cast<std::uint64_t>(trial);
  const auto data = generate(sim);
  const std::uint64_t algo_seed = derive_seed(cfg.base_seed, 0xA1, trial);

  for (Algorithm algo : cfg.algorithms) {
    const auto t0 = std::chrono::steady_clock::now();
    auto record = [&](int iteration, const Adjacency& est, double wall_ms) {
      const auto r = rates(confusion(data.truth, est));
      rows.push_back({cfg.sweep, point, algo, trial, iteration, r.p_d, r.p_fa, wall_ms});
    };
    auto elapsed_ms = [&t0] {
      return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
          .count();
    };

    switch (algo) {
      case Algorithm::kCdaGc:
      case Algorithm::kCdaTe: {
        MetricConfig mc = cfg.metric;
        mc.kind = algo == Algorithm::kCdaGc ? MetricKind::kGC : MetricKind::kTE;
        const auto est = infer_cda(data.obs, mc, algo_seed);
        record(0, est, elapsed_ms());
        break;
      }
      case Algorithm::kEmCdaGc:
      case Algorithm::kEmCdaTe:
      case Algorithm::kEmEs: {
        EmConfig em = cfg.em;
        em.rng_seed = algo_seed;
        em.metric.kind = algo == Algorithm::kEmCdaTe ? MetricKind::kTE : MetricKind::kGC;
        const auto res =
            algo == Algorithm::kEmEs ? run_em_es(data.obs, em) : run_em_cda(data.obs, em);
        const double total_ms = elapsed_ms();
        for (const auto& row : res.trace)
          record(row.iteration, row.adjacency, total_ms * row.iteration / res.trace.size());
        break;
      }
    }
  }
  return rows;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, int jobs,
                                const std::function<void(const std::string&)>& progress) {
  cfg.validate();
  ExperimentResult result;
  std::vector<double> points =
      cfg.sweep == SweepParam::kNone ? std::vector<double>{0.0} : cfg.sweep_values;

  struct Job {
    double point;
    int trial;
  };
  std::vector<Job> job_list;
  for (double point : points)
    for (int trial = 0; trial < cfg.n_trials; ++trial) job_list.push_back({point, trial});

  if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
  jobs = std::max(1, std::min<int>(jobs, static_cast<int>(job_list.size())));

  // Each job writes into its own slot; rows are merged in job order so the
  // output is byte-identical regardless of thread count.
  std::vector<std::vector<ResultRow>> slots(job_list.size());
  std::atomic<std::size_t> next{0};
  std::mutex progress_mu;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= job_list.size()) return;
      try {
        slots[idx] = run_trial_job(cfg, job_list[idx].point, job_list[idx].trial);
      } catch (...) {
        std::lock_guard<std::mutex> lock(progress_mu);
        if (!failure) failure = std::current_exception();
        return;
      }
      if (progress) {
        std::lock_guard<std::mutex> lock(progress_mu);
        progress(sweep_param_name(cfg.sweep) + "=" + std::to_string(job_list[idx].point) +
                 " trial=" + std::to_string(job_list[idx].trial) + " done");
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  for (auto& slot : slots)
    result.rows.insert(result.rows.end(), slot.begin(), slot.end());

  // aggregate mean/std per (sweep point, algorithm, iteration)
  for (double point : points)
    for (Algorithm algo : cfg.algorithms) {
      int max_iter = 0;
      for (const auto& r : result.rows)
        if (r.sweep_value == point && r.algorithm == algo) max_iter = std::max(max_iter, r.iteration);
      for (int it = 0; it <= max_iter; ++it) {
        double sd = 0, sd2 = 0, sf = 0, sf2 = 0;
        int count = 0;
        for (const auto& r : result.rows) {
          if (r.sweep_value != point || r.algorithm != algo || r.iteration != it) continue;
          sd += r.p_d;
          sd2 += r.p_d * r.p_d;
          sf += r.p_fa;
          sf2 += r.p_fa * r.p_fa;
          ++count;
        }
        if (count == 0) continue;
        AggregateRow a;
        a.sweep_param = cfg.sweep;
        a.sweep_value = point;
        a.algorithm = algo;
        a.iteration = it;
        a.n = count;
        a.mean_p_d = sd / count;
        a.mean_p_fa = sf / count;
        a.std_p_d = count > 1 ? std::sqrt(std::max(0.0, (sd2 - sd * sd / count) / (count - 1)))
                              : 0.0;
        a.std_p_fa = count > 1 ? std::sqrt(std::max(0.0, (sf2 - sf * sf / count) / (count - 1)))
                               : 0.0;
        result.aggregated.push_back(a);
      }
    }
  return result;
}

}  // namespace topoinfer
