#include "topoinfer/forward.hpp"

namespace topoinfer {

ObservationSet forward_observe(const LatentSample& sample, const ModelParams& params) {
  const int n = params.n_nodes();
  const int k_slots = sample.n_slots;
  if (sample.n_nodes != n)
    throw InvalidInput("forward_observe: sample has " + std::to_string(sample.n_nodes) +
                       " nodes, params have " + std::to_string(n));

  ObservationSet obs;
  obs.n_nodes = n;
  obs.data.assign(n, TimingSeries{std::vector<int>(k_slots, 0), 0.0015});
  obs.acks.assign(n, TimingSeries{std::vector<int>(k_slots, 0), 0.0015});

  for (std::size_t l = 0; l < sample.links.size(); ++l) {
    auto [i, j] = sample.links[l];
    if (!params.adjacency.at(i, j))
      throw InvalidInput("forward_observe: sample link outside params adjacency");
    const int tau = params.delay_at(i, j);
    if (tau < 1) throw InvalidInput("forward_observe: delay < 1");
    const auto& dl = sample.d[l];
    const auto& el = sample.e[l];
    auto& yd = obs.data[i].counts;
    auto& ya = obs.acks[j].counts;
    for (int k = 0; k < k_slots; ++k) {
      yd[k] += dl[k];
      const int ack_slot = k + tau;
      if (ack_slot < k_slots && dl[k] && !el[k]) ya[ack_slot] += 1;
    }
  }
  return obs;
}

std::optional<ValidationError> validate_observations(const ObservationSet& obs) {
  auto err = [](ValidationCode c, std::string msg) {
    return ValidationError{c, std::move(msg)};
  };
  if (obs.n_nodes < 1)
    return err(ValidationCode::kBadNodeCount, "n_nodes must be >= 1");
  if (static_cast<int>(obs.data.size()) != obs.n_nodes ||
      static_cast<int>(obs.acks.size()) != obs.n_nodes)
    return err(ValidationCode::kSeriesCountMismatch,
               "data/acks must each hold exactly n_nodes series");
  const int k_slots = obs.data.front().length();
  if (k_slots < 1)
    return err(ValidationCode::kLengthMismatch, "series length must be >= 1");
  const double ts = obs.data.front().slot_duration;
  for (int i = 0; i < obs.n_nodes; ++i) {
    for (const TimingSeries* s : {&obs.data[i], &obs.acks[i]}) {
      if (s->length() != k_slots)
        return err(ValidationCode::kLengthMismatch,
                   "series of node " + std::to_string(i + 1) + " has length " +
                       std::to_string(s->length()) + ", expected " + std::to_string(k_slots));
      if (s->slot_duration <= 0 || s->slot_duration != ts)
        return err(ValidationCode::kBadSlotDuration,
                   "slot_duration must be positive and shared by all series");
      for (int c : s->counts)
        if (c < 0)
          return err(ValidationCode::kNegativeCount,
                     "negative count in series of node " + std::to_string(i + 1));
    }
  }
  return std::nullopt;
}

void require_valid(const ObservationSet& obs) {
  if (auto e = validate_observations(obs)) throw InvalidInput(e->message);
}

}  // namespace topoinfer
