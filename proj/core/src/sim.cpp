#include "topoinfer/sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "topoinfer/forward.hpp"
#include "topoinfer/rng.hpp"

namespace topoinfer {

void SimConfig::validate() const {
  if (n_nodes < 1) throw InvalidInput("sim config: n_nodes must be >= 1");
  if (n_slots < 1) throw InvalidInput("sim config: n_slots must be >= 1");
  if (slot_duration <= 0) throw InvalidInput("sim config: slot_duration must be > 0");
  if (rate_star < 0.0 || rate_star > 1.0)
    throw InvalidInput("sim config: rate_star must be in [0,1]");
  if (loss_star < 0.0 || loss_star > 1.0)
    throw InvalidInput("sim config: loss_star must be in [0,1]");
  if (delay_star < 1) throw InvalidInput("sim config: delay_star must be >= 1");
  if (active_fraction < 0.0 || active_fraction > 1.0)
    throw InvalidInput("sim config: active_fraction must be in [0,1]");
  if (retransmission_limit < 0)
    throw InvalidInput("sim config: retransmission_limit must be >= 0");
  if (ack_timeout_slots < 1) throw InvalidInput("sim config: ack_timeout_slots must be >= 1");
  if (delay_jitter_span < 0) throw InvalidInput("sim config: delay_jitter_span must be >= 0");
  for (auto [i, j] : explicit_links) {
    if (i == j) throw InvalidInput("sim config: self-link in explicit_links");
    if (i < 0 || j < 0 || i >= n_nodes || j >= n_nodes)
      throw InvalidInput("sim config: explicit link node out of range");
  }
}

Adjacency select_links(const SimConfig& cfg) {
  Adjacency a(cfg.n_nodes);
  if (!cfg.explicit_links.empty()) {
    for (auto [i, j] : cfg.explicit_links) a.set(i, j, true);
    return a;
  }
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < cfg.n_nodes; ++i)
    for (int j = 0; j < cfg.n_nodes; ++j)
      if (i != j) pairs.emplace_back(i, j);
  const int n_active =
      static_cast<int>(std::lround(cfg.active_fraction * static_cast<double>(pairs.size())));
  Rng rng(derive_seed(cfg.seed, 0x11));
  rng.shuffle(pairs);
  for (int l = 0; l < n_active; ++l) a.set(pairs[l].first, pairs[l].second, true);
  return a;
}

namespace {

// One RNG stream per (link, slot). Both generators draw from these streams
// in the same order, so the realistic mode with retransmissions disabled,
// degenerate jitter and unlimited capacity reduces to the model-faithful
// output bit for bit.
Rng site_rng(std::uint64_t seed, int i, int j, int k) {
  return Rng(derive_seed(seed, static_cast<std::uint64_t>(i) + 1,
                         static_cast<std::uint64_t>(j) + 1,
                         static_cast<std::uint64_t>(k) + 1));
}

}  // namespace

ModelFaithfulOutput gen_model_faithful(const SimConfig& cfg) {
  cfg.validate();
  if (cfg.mode != SimMode::kModelFaithful)
    throw InvalidInput("gen_model_faithful: config mode is not model_faithful");

  ModelFaithfulOutput out;
  out.truth = ModelParams::zeros(cfg.n_nodes);
  out.truth.adjacency = select_links(cfg);
  for (auto [i, j] : out.truth.adjacency.links()) {
    out.truth.rate(i, j) = cfg.rate_star;
    out.truth.loss(i, j) = cfg.loss_star;
    out.truth.set_delay(i, j, cfg.delay_star);
  }

  out.latent = LatentSample(out.truth.adjacency, cfg.n_slots);
  for (std::size_t l = 0; l < out.latent.links.size(); ++l) {
    auto [i, j] = out.latent.links[l];
    for (int k = 0; k < cfg.n_slots; ++k) {
      Rng rng = site_rng(cfg.seed, i, j, k);
      if (rng.bernoulli(cfg.rate_star)) {
        out.latent.d[l][k] = 1;
        out.latent.e[l][k] = rng.bernoulli(cfg.loss_star) ? 1 : 0;
      }
    }
  }
  out.obs = forward_observe(out.latent, out.truth);
  for (auto& s : out.obs.data) s.slot_duration = cfg.slot_duration;
  for (auto& s : out.obs.acks) s.slot_duration = cfg.slot_duration;
  return out;
}

RealisticOutput gen_realistic(const SimConfig& cfg) {
  cfg.validate();
  if (cfg.mode != SimMode::kRealistic)
    throw InvalidInput("gen_realistic: config mode is not realistic");

  RealisticOutput out;
  out.truth_adjacency = select_links(cfg);
  const int n = cfg.n_nodes;
  const int k_slots = cfg.n_slots;
  out.obs.n_nodes = n;
  out.obs.data.assign(n, TimingSeries{std::vector<int>(k_slots, 0), cfg.slot_duration});
  out.obs.acks.assign(n, TimingSeries{std::vector<int>(k_slots, 0), cfg.slot_duration});

  const auto links = out.truth_adjacency.links();
  const int n_links = static_cast<int>(links.size());

  // per-node out-link indices, for the capacity round-robin
  std::vector<std::vector<int>> out_links(n);
  for (int l = 0; l < n_links; ++l) out_links[links[l].first].push_back(l);

  // FIFO of pending packets per link; value = retransmissions already used
  std::vector<std::deque<int>> ready(n_links);
  // retransmissions becoming ready at slot k: (link, retries_used)
  std::vector<std::vector<std::pair<int, int>>> wakeups(k_slots);

  const bool unlimited = cfg.per_slot_node_capacity <= 0;

  for (int k = 0; k < k_slots; ++k) {
    for (auto [l, retries] : wakeups[k]) ready[l].push_back(retries);

    // new arrivals, one offered packet per link per slot at rate R*
    std::vector<Rng> slot_rngs;
    slot_rngs.reserve(n_links);
    for (int l = 0; l < n_links; ++l) {
      auto [i, j] = links[l];
      slot_rngs.push_back(site_rng(cfg.seed, i, j, k));
      if (slot_rngs[l].bernoulli(cfg.rate_star)) ready[l].push_back(0);
    }

    // transmissions: at most one packet per link per slot, per-node cap with
    // FIFO deferral; round-robin start so no link is starved
    for (int i = 0; i < n; ++i) {
      const auto& ls = out_links[i];
      if (ls.empty()) continue;
      int budget = unlimited ? static_cast<int>(ls.size()) : cfg.per_slot_node_capacity;
      const int start = k % static_cast<int>(ls.size());
      for (std::size_t off = 0; off < ls.size() && budget > 0; ++off) {
        const int l = ls[(start + off) % ls.size()];
        if (ready[l].empty()) continue;
        const int retries = ready[l].front();
        ready[l].pop_front();
        --budget;
        out.obs.data[i].counts[k] += 1;
        const int j = links[l].second;
        Rng& rng = slot_rngs[l];
        if (rng.bernoulli(cfg.loss_star)) {
          if (retries < cfg.retransmission_limit) {
            const int retry_slot = k + cfg.ack_timeout_slots;
            if (retry_slot < k_slots) wakeups[retry_slot].emplace_back(l, retries + 1);
          }
        } else {
          const int delay =
              cfg.delay_star +
              (cfg.delay_jitter_span > 0 ? rng.uniform_int(0, cfg.delay_jitter_span) : 0);
          const int ack_slot = k + delay;
          if (ack_slot < k_slots) out.obs.acks[j].counts[ack_slot] += 1;
        }
      }
    }
  }
  return out;
}

ObservationSet ingest_trace(const std::vector<TraceRecord>& records,
                            double slot_duration, int n_nodes) {
  if (slot_duration <= 0) throw InvalidInput("ingest_trace: slot_duration must be > 0");
  if (n_nodes < 1) throw InvalidInput("ingest_trace: n_nodes must be >= 1");
  double max_ts = 0.0;
  for (const auto& r : records) {
    if (r.timestamp < 0) throw InvalidInput("ingest_trace: negative timestamp");
    if (r.node < 1 || r.node > n_nodes)
      throw InvalidInput("ingest_trace: node id " + std::to_string(r.node) + " out of range");
    max_ts = std::max(max_ts, r.timestamp);
  }
  const int k_slots = static_cast<int>(std::floor(max_ts / slot_duration)) + 1;

  ObservationSet obs;
  obs.n_nodes = n_nodes;
  obs.data.assign(n_nodes, TimingSeries{std::vector<int>(k_slots, 0), slot_duration});
  obs.acks.assign(n_nodes, TimingSeries{std::vector<int>(k_slots, 0), slot_duration});
  for (const auto& r : records) {
    const int slot = static_cast<int>(std::floor(r.timestamp / slot_duration));
    auto& series = r.is_ack ? obs.acks[r.node - 1] : obs.data[r.node - 1];
    series.counts[slot] += 1;
  }
  return obs;
}

}  // namespace topoinfer
