#include "topoinfer/cda.hpp"

#include "topoinfer/forward.hpp"
#include "topoinfer/rng.hpp"

namespace topoinfer {

PairDecision cda_pair_test(const TimingSeries& source, const TimingSeries& target,
                           const MetricConfig& cfg, std::uint64_t pair_seed) {
  PairDecision d;
  auto scan = delay_scan(source, target, cfg);
  d.best_delay = scan.best_delay;
  d.value = scan.best_value;
  // The null distribution must match the statistic actually thresholded,
  // so permute the delay-aligned series, not the raw pair.
  auto [src, tgt] = align_at_delay(source, target, scan.best_delay);
  d.threshold = permutation_threshold(src, tgt, cfg, pair_seed);
  d.active = d.value > d.threshold;
  return d;
}

Adjacency infer_cda(const ObservationSet& obs, const MetricConfig& cfg,
                    std::uint64_t rng_seed) {
  require_valid(obs);
  cfg.validate(obs.n_slots());
  const int n = obs.n_nodes;
  Adjacency a(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      auto scan = delay_scan(obs.data[i], obs.acks[j], cfg);
      auto [src, tgt] = align_at_delay(obs.data[i], obs.acks[j], scan.best_delay);
      a.set(i, j, permutation_detects(scan.best_value, src, tgt, cfg,
                                      derive_seed(rng_seed, static_cast<std::uint64_t>(i) + 1,
                                                  static_cast<std::uint64_t>(j) + 1)));
    }
  return a;
}

}  // namespace topoinfer
