#pragma once

#include <optional>
#include <string>

#include "topoinfer/types.hpp"

namespace topoinfer {

/// Deterministic forward observation map: aggregates per-link transmission
/// and error indicators into per-node data/ACK counts. ACKs whose emission
/// slot falls beyond the observation window are dropped.
///
///   Y_i^D[k] = sum_{j:(i,j) active} d[i,j,k]
///   Y_j^A[k] = sum_{i:(i,j) active} (1 - e[i,j,k-tau_ij]) d[i,j,k-tau_ij]
ObservationSet forward_observe(const LatentSample& sample, const ModelParams& params);

enum class ValidationCode {
  kBadNodeCount,
  kSeriesCountMismatch,
  kLengthMismatch,
  kNegativeCount,
  kBadSlotDuration,
};

struct ValidationError {
  ValidationCode code;
  std::string message;
};

/// Checks ObservationSet invariants; returns the first violation, if any.
std::optional<ValidationError> validate_observations(const ObservationSet& obs);

/// Throwing wrapper around validate_observations.
void require_valid(const ObservationSet& obs);

}  // namespace topoinfer
