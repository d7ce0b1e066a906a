// Microbenchmarks for the hot paths: pairwise metrics, the Poisson-binomial
// convolution, and a full Gibbs E-step sweep.

#include <benchmark/benchmark.h>

#include <vector>

#include "topoinfer/causality.hpp"
#include "topoinfer/emcda.hpp"
#include "topoinfer/rng.hpp"
#include "topoinfer/sim.hpp"

using namespace topoinfer;

namespace {

TimingSeries bernoulli_series(int k, double p, std::uint64_t seed) {
  Rng rng(seed);
  TimingSeries s;
  s.counts.resize(k);
  for (int t = 0; t < k; ++t) s.counts[t] = rng.bernoulli(p) ? 1 : 0;
  return s;
}

void BM_GcStatistic(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  const TimingSeries source = bernoulli_series(k, 0.1, 1);
  const TimingSeries target = bernoulli_series(k, 0.1, 2);
  for (auto _ : state) benchmark::DoNotOptimize(gc_statistic(source, target, 3));
  state.SetItemsProcessed(state.iterations() * k);
}
BENCHMARK(BM_GcStatistic)->Arg(1000)->Arg(5000)->Arg(40000);

void BM_TeStatistic(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  const TimingSeries source = bernoulli_series(k, 0.1, 1);
  const TimingSeries target = bernoulli_series(k, 0.1, 2);
  for (auto _ : state) benchmark::DoNotOptimize(te_statistic(source, target, 1, 1));
  state.SetItemsProcessed(state.iterations() * k);
}
BENCHMARK(BM_TeStatistic)->Arg(1000)->Arg(5000)->Arg(40000);

void BM_PermutationThreshold(benchmark::State& state) {
  const TimingSeries source = bernoulli_series(5000, 0.1, 1);
  const TimingSeries target = bernoulli_series(5000, 0.1, 2);
  MetricConfig cfg;
  cfg.permutations = static_cast<int>(state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(permutation_threshold(source, target, cfg, ++seed));
}
BENCHMARK(BM_PermutationThreshold)->Arg(19)->Arg(100);

void BM_PoissonBinomialPmf(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(7);
  std::vector<double> probs(n);
  for (auto& p : probs) p = rng.uniform();
  for (auto _ : state) benchmark::DoNotOptimize(poisson_binomial_pmf(n / 2, probs));
}
BENCHMARK(BM_PoissonBinomialPmf)->Arg(4)->Arg(16)->Arg(64);

void BM_GibbsEStep(benchmark::State& state) {
  SimConfig sim;
  sim.n_nodes = 4;
  sim.active_fraction = 0.5;
  sim.rate_star = 0.1;
  sim.loss_star = 0.2;
  sim.n_slots = static_cast<int>(state.range(0));
  const auto out = gen_model_faithful(sim);

  EmConfig cfg;
  cfg.n_samples = 1;
  cfg.burn_in_sweeps = 0;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    cfg.rng_seed = ++seed;
    benchmark::DoNotOptimize(draw_samples(out.obs, out.truth, cfg));
  }
  state.SetItemsProcessed(state.iterations() * sim.n_slots * out.truth.adjacency.n_links());
}
BENCHMARK(BM_GibbsEStep)->Arg(1000)->Arg(5000);

}  // namespace

BENCHMARK_MAIN();
