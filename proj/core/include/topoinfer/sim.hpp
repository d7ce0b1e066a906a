#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "topoinfer/types.hpp"

namespace topoinfer {

enum class SimMode { kModelFaithful, kRealistic };

/// Seeded traffic generator configuration. Links can be listed explicitly
/// or selected at random as a fraction of the N(N-1) ordered pairs.
struct SimConfig {
  int n_nodes = 4;
  std::vector<std::pair<int, int>> explicit_links;  // if empty, use active_fraction
  double active_fraction = 0.5;
  double rate_star = 0.1;    // per-link transmission probability
  double loss_star = 0.05;   // per-link loss probability
  int delay_star = 1;        // base ACK delay in slots
  int n_slots = 5000;
  double slot_duration = 0.0015;
  SimMode mode = SimMode::kModelFaithful;
  std::uint64_t seed = 1;

  // realistic-mode extras
  int retransmission_limit = 3;
  int ack_timeout_slots = 8;
  int per_slot_node_capacity = 1;   // <= 0 means unlimited
  int delay_jitter_span = 2;        // ACK delay uniform in [delay_star, delay_star+span]

  void validate() const;
};

/// One timestamped packet record from an external capture.
struct TraceRecord {
  double timestamp = 0.0;  // seconds
  int node = 1;            // 1-based node id
  bool is_ack = false;
};

struct ModelFaithfulOutput {
  ObservationSet obs;
  ModelParams truth;
  LatentSample latent;
};

/// Draws the per-link transmission/error indicators from the parametric
/// model (D ~ Bernoulli(R*), E|D=1 ~ Bernoulli(L*)) and emits the exact
/// forward observation. Each (link, slot) uses its own derived RNG stream.
ModelFaithfulOutput gen_model_faithful(const SimConfig& cfg);

struct RealisticOutput {
  ObservationSet obs;
  Adjacency truth_adjacency;
};

/// Event-driven per-slot simulation with retransmissions after ACK timeout,
/// jittered ACK delays, and a per-node per-slot transmission cap with FIFO
/// deferral. No latent ground truth is returned: losses are entangled with
/// retransmissions.
RealisticOutput gen_realistic(const SimConfig& cfg);

/// Bins timestamped records into slots of the given duration. K is inferred
/// from the largest timestamp (empty input yields all-zero series of length 1).
ObservationSet ingest_trace(const std::vector<TraceRecord>& records,
                            double slot_duration, int n_nodes);

/// Selects the active link set for a config: explicit links when given,
/// otherwise a seeded uniform choice of round(fraction * N(N-1)) ordered pairs.
Adjacency select_links(const SimConfig& cfg);

}  // namespace topoinfer
