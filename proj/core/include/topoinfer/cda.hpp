#pragma once

#include <cstdint>

#include "topoinfer/causality.hpp"
#include "topoinfer/types.hpp"

namespace topoinfer {

/// Baseline causality-discovery topology estimator. For every ordered pair
/// (i, j), scans ACK delays on (Y_i^D, Y_j^A), computes a permutation-test
/// threshold on the best-delay-aligned pair, and declares a link when the
/// scan's best metric value exceeds the threshold. Diagonal is always zero.
Adjacency infer_cda(const ObservationSet& obs, const MetricConfig& cfg,
                    std::uint64_t rng_seed);

/// Per-pair detail of infer_cda, useful for delay initialization.
struct PairDecision {
  int best_delay = 1;
  double value = 0.0;
  double threshold = 0.0;
  bool active = false;
};

/// Runs the per-pair test for one ordered pair (i used only for seeding).
PairDecision cda_pair_test(const TimingSeries& source, const TimingSeries& target,
                           const MetricConfig& cfg, std::uint64_t pair_seed);

}  // namespace topoinfer
