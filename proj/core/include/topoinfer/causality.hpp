#pragma once

#include <cstdint>
#include <utility>

#include "topoinfer/types.hpp"

namespace topoinfer {

enum class MetricKind { kGC, kTE };

/// Configuration for the pairwise causal-dependence machinery.
struct MetricConfig {
  MetricKind kind = MetricKind::kGC;
  int ar_order = 3;        // AR order R for GC
  int te_src_window = 1;   // s, source past window for TE
  int te_dst_window = 1;   // r, target past window for TE
  int permutations = 100;  // S, permutation count for thresholds
  double alpha = 0.05;     // significance level
  int max_delay = 2;       // tau_max for delay scanning

  void validate(int n_slots) const;
};

/// Granger-causality F-type statistic of source -> target with AR order R.
/// Both AR models include an intercept term (count series have nonzero
/// mean); fits use ridge-regularized least squares (1e-10) so rank-deficient
/// regressors degrade to zero contribution instead of failing.
/// Nonnegative; negative numerators are clamped to 0.
double gc_statistic(const TimingSeries& source, const TimingSeries& target, int order);

/// Plug-in transfer entropy of source -> target in bits: the empirical
/// conditional mutual information between target[k] and the source past
/// window of length s given the target past window of length r. Counts are
/// clipped to the alphabet {0, 1, >=2} before histogramming.
double te_statistic(const TimingSeries& source, const TimingSeries& target, int s, int r);

/// Dispatches to gc_statistic or te_statistic per cfg.kind.
double metric_statistic(const TimingSeries& source, const TimingSeries& target,
                        const MetricConfig& cfg);

/// Permutation-test threshold: evaluates the metric on cfg.permutations
/// independently permuted copies of both series and returns the (1-alpha)
/// empirical quantile (1-based index ceil((1-alpha)*S) of the sorted values).
/// Decision form of the permutation test: true iff `observed` is strictly
/// above the threshold permutation_threshold would return for the same seed.
/// Permutations are generated in the same order, but the scan stops as soon
/// as the outcome is decided, which is much cheaper for clear-cut pairs.
bool permutation_detects(double observed, const TimingSeries& source, const TimingSeries& target,
                         const MetricConfig& cfg, std::uint64_t rng_seed);

double permutation_threshold(const TimingSeries& source, const TimingSeries& target,
                             const MetricConfig& cfg, std::uint64_t rng_seed);

struct DelayScanResult {
  int best_delay = 1;
  double best_value = 0.0;
};

/// Aligns the pair at each candidate ACK delay tau in [1, cfg.max_delay]
/// and returns the tau maximizing the metric (ties broken toward the
/// smallest tau). The alignment advances the target by tau-1 slots so that
/// a true ACK delay of tau appears at metric lag 1; tau = 1 evaluates the
/// unshifted pair.
DelayScanResult delay_scan(const TimingSeries& source, const TimingSeries& target,
                           const MetricConfig& cfg);

/// The aligned pair used by delay_scan at a given delay; exposed so that
/// thresholds can be computed on the same series the decision statistic
/// sees. Truncates both series to length K - tau + 1.
std::pair<TimingSeries, TimingSeries> align_at_delay(const TimingSeries& source,
                                                     const TimingSeries& target, int tau);

}  // namespace topoinfer
