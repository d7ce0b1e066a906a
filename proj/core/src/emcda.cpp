#include "topoinfer/emcda.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "topoinfer/forward.hpp"
#include "topoinfer/rng.hpp"

namespace topoinfer {

void EmConfig::validate() const {
  if (n_samples < 1) throw InvalidInput("em config: n_samples must be >= 1");
  if (max_iterations < 1) throw InvalidInput("em config: max_iterations must be >= 1");
  if (burn_in_sweeps < 0) throw InvalidInput("em config: burn_in_sweeps must be >= 0");
  if (tau_max < 1) throw InvalidInput("em config: tau_max must be >= 1");
  if (em_permutations < 1) throw InvalidInput("em config: em_permutations must be >= 1");
  if (convergence_patience < 1) throw InvalidInput("em config: convergence_patience must be >= 1");
}

double poisson_binomial_pmf(int y, const std::vector<double>& probs) {
  if (y < 0) return 0.0;
  for (double p : probs)
    if (!(p >= 0.0 && p <= 1.0))
      throw InvalidInput("poisson_binomial_pmf: probability outside [0,1]");
  if (y > static_cast<int>(probs.size())) return 0.0;
  std::vector<double> pmf(probs.size() + 1, 0.0);
  pmf[0] = 1.0;
  int len = 0;
  for (double p : probs) {
    ++len;
    for (int t = len; t >= 1; --t) pmf[t] = pmf[t] * (1.0 - p) + pmf[t - 1] * p;
    pmf[0] *= (1.0 - p);
  }
  return pmf[y];
}

namespace {

std::vector<double> poisson_binomial_table(const std::vector<double>& probs) {
  std::vector<double> pmf(probs.size() + 1, 0.0);
  pmf[0] = 1.0;
  int len = 0;
  for (double p : probs) {
    ++len;
    for (int t = len; t >= 1; --t) pmf[t] = pmf[t] * (1.0 - p) + pmf[t - 1] * p;
    pmf[0] *= (1.0 - p);
  }
  return pmf;
}

inline double table_at(const std::vector<double>& t, int x) {
  return (x < 0 || x >= static_cast<int>(t.size())) ? 0.0 : t[x];
}

// Rates of i's active out-links other than (i,j).
std::vector<double> other_out_rates(const ModelParams& p, int i, int j) {
  std::vector<double> r;
  for (int l = 0; l < p.n_nodes(); ++l)
    if (l != j && l != i && p.adjacency.at(i, l)) r.push_back(p.rate(i, l));
  return r;
}

// Success probabilities R(1-L) of j's active in-links other than (i,j).
std::vector<double> other_in_success(const ModelParams& p, int i, int j) {
  std::vector<double> r;
  for (int l = 0; l < p.n_nodes(); ++l)
    if (l != i && l != j && p.adjacency.at(l, j))
      r.push_back(p.rate(l, j) * (1.0 - p.loss(l, j)));
  return r;
}

GibbsDistribution site_distribution(double rate, double loss, int y_data, bool have_ack,
                                    int y_ack, const std::vector<double>& pb_data,
                                    const std::vector<double>& pb_ack) {
  const double d0 = table_at(pb_data, y_data);
  const double d1 = table_at(pb_data, y_data - 1);
  const double a_same = have_ack ? table_at(pb_ack, y_ack) : 1.0;
  const double a_less = have_ack ? table_at(pb_ack, y_ack - 1) : 1.0;

  GibbsDistribution g;
  g.p00 = (1.0 - rate) * d0 * a_same;
  g.p10 = rate * (1.0 - loss) * d1 * a_less;
  g.p11 = rate * loss * d1 * a_same;
  const double total = g.p00 + g.p10 + g.p11;
  if (total <= 0.0) {
    g.p00 = g.p10 = g.p11 = 1.0 / 3.0;  // observations incompatible with support
  } else {
    g.p00 /= total;
    g.p10 /= total;
    g.p11 /= total;
  }
  return g;
}

}  // namespace

GibbsDistribution gibbs_conditional(int i, int j, int k, const ObservationSet& obs,
                                    const ModelParams& params) {
  if (!params.adjacency.at(i, j))
    throw InvalidInput("gibbs_conditional: (i,j) is not an active link");
  const int k_slots = obs.n_slots();
  if (k < 0 || k >= k_slots) throw InvalidInput("gibbs_conditional: slot out of range");

  const auto pb_data = poisson_binomial_table(other_out_rates(params, i, j));
  const auto pb_ack = poisson_binomial_table(other_in_success(params, i, j));
  const int ack_slot = k + params.delay_at(i, j);
  const bool have_ack = ack_slot < k_slots;
  return site_distribution(params.rate(i, j), params.loss(i, j), obs.data[i].counts[k],
                           have_ack, have_ack ? obs.acks[j].counts[ack_slot] : 0, pb_data,
                           pb_ack);
}

namespace {

// Exploration floor for the sampling pass only: a link whose current rate
// estimate hit (or started near) zero would never be assigned a packet again,
// so its estimate could not recover even when the ACK evidence supports it —
// and symmetrically for a loss estimate stuck at either endpoint. Parameter
// estimates themselves are never floored; only the conditional used to
// propose latent states is kept away from the absorbing endpoints.
constexpr double kExploreFloor = 0.02;

}  // namespace

std::vector<LatentSample> draw_samples(const ObservationSet& obs, const ModelParams& params,
                                       const EmConfig& cfg) {
  require_valid(obs);
  const int n = params.n_nodes();
  const int k_slots = obs.n_slots();
  Rng rng(cfg.rng_seed);

  LatentSample chain(params.adjacency, k_slots);
  const auto& links = chain.links;
  const int n_links = static_cast<int>(links.size());

  // Per-link conditional ingredients fixed for the whole E-step:
  // the conditional marginalizes the other links through their rates.
  std::vector<std::vector<double>> pb_data(n_links), pb_ack(n_links);
  std::vector<double> rate(n_links), loss(n_links);
  std::vector<int> tau(n_links);
  for (int l = 0; l < n_links; ++l) {
    auto [i, j] = links[l];
    pb_data[l] = poisson_binomial_table(other_out_rates(params, i, j));
    pb_ack[l] = poisson_binomial_table(other_in_success(params, i, j));
    rate[l] = std::max(params.rate(i, j), kExploreFloor);
    loss[l] = std::clamp(params.loss(i, j), kExploreFloor, 1.0 - kExploreFloor);
    tau[l] = params.delay_at(i, j);
  }

  // Initialize D by spreading each node's observed counts uniformly over its
  // active out-links; E starts at zero.
  std::vector<std::vector<int>> out_links(n);
  for (int l = 0; l < n_links; ++l) out_links[links[l].first].push_back(l);
  for (int i = 0; i < n; ++i) {
    if (out_links[i].empty()) continue;
    std::vector<int> ls = out_links[i];
    for (int k = 0; k < k_slots; ++k) {
      int c = std::min<int>(obs.data[i].counts[k], static_cast<int>(ls.size()));
      if (c == 0) continue;
      rng.shuffle(ls);
      for (int t = 0; t < c; ++t) chain.d[ls[t]][k] = 1;
    }
  }

  std::vector<LatentSample> samples;
  samples.reserve(cfg.n_samples);
  const int total_sweeps = cfg.burn_in_sweeps + cfg.n_samples;
  for (int sweep = 0; sweep < total_sweeps; ++sweep) {
    for (int l = 0; l < n_links; ++l) {
      auto [i, j] = links[l];
      const int* yd = obs.data[i].counts.data();
      const int* ya = obs.acks[j].counts.data();
      auto& dl = chain.d[l];
      auto& el = chain.e[l];
      const int t = tau[l];
      for (int k = 0; k < k_slots; ++k) {
        const int ack_slot = k + t;
        const bool have_ack = ack_slot < k_slots;
        const auto g = site_distribution(rate[l], loss[l], yd[k], have_ack,
                                         have_ack ? ya[ack_slot] : 0, pb_data[l], pb_ack[l]);
        const double u = rng.uniform();
        if (u < g.p00) {
          dl[k] = 0;
          el[k] = 0;
        } else if (u < g.p00 + g.p10) {
          dl[k] = 1;
          el[k] = 0;
        } else {
          dl[k] = 1;
          el[k] = 1;
        }
      }
    }
    if (sweep >= cfg.burn_in_sweeps) samples.push_back(chain);
  }
  return samples;
}


std::pair<std::vector<TimingSeries>, std::vector<TimingSeries>> reconstruct_sequences(
    const LatentSample& sample, const ObservationSet& obs, const ModelParams& params) {
  const int n = sample.n_nodes;
  const int k_slots = sample.n_slots;
  if (obs.n_nodes != n || obs.n_slots() != k_slots)
    throw InvalidInput("reconstruct_sequences: dimension mismatch");

  const double ts = obs.slot_duration();
  std::vector<TimingSeries> est_data(n, TimingSeries{std::vector<int>(k_slots, 0), ts});
  std::vector<TimingSeries> est_acks(n);
  for (int j = 0; j < n; ++j) est_acks[j] = obs.acks[j];

  for (std::size_t l = 0; l < sample.links.size(); ++l) {
    auto [i, j] = sample.links[l];
    const int tau = params.delay_at(i, j);
    const auto& dl = sample.d[l];
    const auto& el = sample.e[l];
    for (int k = 0; k < k_slots; ++k) {
      est_data[i].counts[k] += dl[k];
      if (k >= tau && el[k - tau]) est_acks[j].counts[k] += 1;
    }
  }
  return {std::move(est_data), std::move(est_acks)};
}

ModelParams m_step(const std::vector<LatentSample>& samples, const ObservationSet& obs,
                   const EmState& state, const EmConfig& cfg) {
  const int n = state.params.n_nodes();
  const int k_slots = obs.n_slots();
  const int m_total = static_cast<int>(samples.size());
  const int iteration = state.iteration + 1;  // 1-based index of this update
  const double gamma = cfg.learning_rate(iteration);

  MetricConfig mc = cfg.metric;
  mc.max_delay = cfg.tau_max;
  mc.permutations = cfg.em_permutations;

  std::vector<int> votes(static_cast<std::size_t>(n) * n, 0);
  // delay_votes[(i*n+j)*tau_max + (tau-1)]
  std::vector<int> delay_votes(static_cast<std::size_t>(n) * n * cfg.tau_max, 0);

  for (int m = 0; m < m_total; ++m) {
    auto [est_data, est_acks] = reconstruct_sequences(samples[m], obs, state.params);
    // a node with no active out-links has a vacuous (all-zero) estimated data
    // sequence; fall back to its observed sequence so the tests can still
    // re-detect links leaving that node
    for (int i = 0; i < n; ++i) {
      bool has_out = false;
      for (int j = 0; j < n && !has_out; ++j)
        has_out = i != j && state.params.adjacency.at(i, j);
      if (!has_out) est_data[i] = obs.data[i];
    }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const auto scan = delay_scan(est_data[i], est_acks[j], mc);
        auto [src, tgt] = align_at_delay(est_data[i], est_acks[j], scan.best_delay);
        if (permutation_detects(scan.best_value, src, tgt, mc,
                                derive_seed(cfg.rng_seed, 0x35u + static_cast<std::uint64_t>(iteration),
                                            static_cast<std::uint64_t>(m) + 1,
                                            static_cast<std::uint64_t>(i) * n + j + 1)))
          ++votes[static_cast<std::size_t>(i) * n + j];
        ++delay_votes[(static_cast<std::size_t>(i) * n + j) * cfg.tau_max +
                      (scan.best_delay - 1)];
      }
  }

  ModelParams next = state.params;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      next.adjacency.set(i, j, 2 * votes[static_cast<std::size_t>(i) * n + j] >= m_total);
    }

  // delays: majority vote across samples, smallest-tau tie-break; entries of
  // links leaving the active set stay frozen
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j || !next.adjacency.at(i, j)) continue;
      int best_tau = 1, best_count = -1;
      for (int tau = 1; tau <= cfg.tau_max; ++tau) {
        const int c =
            delay_votes[(static_cast<std::size_t>(i) * n + j) * cfg.tau_max + (tau - 1)];
        if (c > best_count) {
          best_count = c;
          best_tau = tau;
        }
      }
      next.set_delay(i, j, best_tau);
    }

  // rate/loss updates on links active both before and after the update
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j || !next.adjacency.at(i, j) || !state.params.adjacency.at(i, j)) continue;
      long long sum_d = 0, sum_e = 0;
      for (const auto& s : samples) {
        const int l = s.index_of(i, j);
        if (l < 0) continue;
        for (int k = 0; k < k_slots; ++k) {
          sum_d += s.d[l][k];
          sum_e += s.e[l][k];
        }
      }
      const double mk = static_cast<double>(m_total) * k_slots;
      next.rate(i, j) =
          (1.0 - gamma) * state.params.rate(i, j) + gamma * (static_cast<double>(sum_d) / mk);
      if (sum_d > 0)
        next.loss(i, j) = (1.0 - gamma) * state.params.loss(i, j) +
                          gamma * (static_cast<double>(sum_e) / static_cast<double>(sum_d));
    }
  return next;
}

namespace {

ModelParams initialize_params(const ObservationSet& obs, const EmConfig& cfg) {
  const int n = obs.n_nodes;
  ModelParams p = ModelParams::zeros(n);
  p.adjacency = Adjacency(n);
  Rng rng(derive_seed(cfg.rng_seed, 0x1717));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      p.adjacency.set(i, j, true);
      p.rate(i, j) = rng.uniform();
      p.loss(i, j) = rng.uniform();
    }
  MetricConfig mc = cfg.metric;
  mc.max_delay = cfg.tau_max;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      p.set_delay(i, j, delay_scan(obs.data[i], obs.acks[j], mc).best_delay);
    }
  return p;
}

// A lost packet leaves the same evidence no matter which out-link it is
// attributed to, so the complete-data likelihood cannot distinguish between
// them: a link supported exclusively by loss-imputed events is spurious by
// construction, and its self-imputed ACKs would keep winning the metric vote
// forever. Guard the adjacency update by requiring a minimum acknowledged
// throughput (empirical rate of delivered-and-acknowledged packets). Skipped
// on the first iteration so that links whose initial delay guess was wrong get
// one delay re-estimation pass before being judged.
constexpr double kAckThroughputFloor = 0.02;

void apply_identifiability_guard(ModelParams& next, const std::vector<LatentSample>& samples,
                                 int k_slots) {
  const double mk = static_cast<double>(samples.size()) * k_slots;
  const int n = next.n_nodes();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j || !next.adjacency.at(i, j)) continue;
      long long delivered = 0;
      bool sampled = false;
      for (const auto& s : samples) {
        const int l = s.index_of(i, j);
        if (l < 0) continue;
        sampled = true;
        for (int k = 0; k < k_slots; ++k) delivered += s.d[l][k] - s.e[l][k];
      }
      // links that re-entered the adjacency this iteration have no sampled
      // mass yet; they are judged once the next E-step has covered them
      if (sampled && static_cast<double>(delivered) / mk < kAckThroughputFloor)
        next.adjacency.set(i, j, false);
    }
}

EmIterate make_trace_row(int iteration, const ModelParams& params, const Adjacency& prev) {
  EmIterate row;
  row.iteration = iteration;
  row.adjacency = params.adjacency;
  int dist = 0;
  for (std::size_t t = 0; t < prev.entries.size(); ++t)
    dist += prev.entries[t] != params.adjacency.entries[t];
  row.edit_distance = dist;
  double sr = 0.0, sl = 0.0;
  int c = 0;
  for (auto [i, j] : params.adjacency.links()) {
    sr += params.rate(i, j);
    sl += params.loss(i, j);
    ++c;
  }
  if (c > 0) {
    row.mean_rate = sr / c;
    row.mean_loss = sl / c;
  }
  return row;
}

}  // namespace

EmResult run_em_cda(const ObservationSet& obs, const EmConfig& cfg) {
  require_valid(obs);
  cfg.validate();
  cfg.metric.validate(obs.n_slots() - cfg.tau_max + 1);

  EmState state;
  state.params = initialize_params(obs, cfg);

  EmResult result;
  int unchanged = 0;
  for (int n_iter = 1; n_iter <= cfg.max_iterations; ++n_iter) {
    EmConfig sweep_cfg = cfg;
    sweep_cfg.rng_seed = derive_seed(cfg.rng_seed, 0xE5, static_cast<std::uint64_t>(n_iter));
    const auto samples = draw_samples(obs, state.params, sweep_cfg);
    ModelParams next = m_step(samples, obs, state, cfg);
    if (n_iter >= 2) apply_identifiability_guard(next, samples, obs.n_slots());

    result.trace.push_back(make_trace_row(n_iter, next, state.params.adjacency));
    unchanged = (next.adjacency == state.params.adjacency) ? unchanged + 1 : 0;
    state.params = std::move(next);
    state.iteration = n_iter;
    state.adjacency_history.push_back(state.params.adjacency);
    if (unchanged >= cfg.convergence_patience) break;
  }
  result.adjacency = state.params.adjacency;
  return result;
}

namespace {

constexpr double kMismatchPenalty = -12.0;  // per unit of count mismatch

double clamp_prob(double p) { return std::clamp(p, 1e-9, 1.0 - 1e-9); }

struct EsTables {
  // data_mis[i][mask]: mismatched data slots of node i when its active
  // out-neighbors are the mask over the ordered list of other nodes
  std::vector<std::vector<long long>> data_mis;
  // ack_mis_best[j][mask] / ack_best_combo[j][mask]: best (over per-link
  // delay assignments) mismatched ACK slots of node j for an in-neighbor
  // mask, and the delays achieving it (mixed-radix code, digit per set bit)
  std::vector<std::vector<long long>> ack_mis_best;
  std::vector<std::vector<int>> ack_best_combo;
  // row_llp[i][mask]: complete-data log-likelihood of the latent tensors on
  // node i's out-links in the mask, under the closed-form R/L maximizers
  std::vector<std::vector<double>> row_llp;
  // closed-form maximizers per ordered pair
  Matrix rate_hat, loss_hat;
};

std::vector<int> others_of(int node, int n) {
  std::vector<int> o;
  for (int t = 0; t < n; ++t)
    if (t != node) o.push_back(t);
  return o;
}

EsTables build_es_tables(const std::vector<LatentSample>& samples, const ObservationSet& obs,
                         int tau_max) {
  const int n = obs.n_nodes;
  const int k_slots = obs.n_slots();
  const int m_total = static_cast<int>(samples.size());
  const int n_other = n - 1;
  const int n_masks = 1 << n_other;

  EsTables t;
  t.data_mis.assign(n, std::vector<long long>(n_masks, 0));
  t.ack_mis_best.assign(n, std::vector<long long>(n_masks, 0));
  t.ack_best_combo.assign(n, std::vector<int>(n_masks, 0));
  t.row_llp.assign(n, std::vector<double>(n_masks, 0.0));
  t.rate_hat = Matrix(n);
  t.loss_hat = Matrix(n);

  // data side
  for (int i = 0; i < n; ++i) {
    const auto others = others_of(i, n);
    std::vector<int> sums(n_masks);
    std::vector<int> dval(n_other);
    for (const auto& s : samples) {
      std::vector<const std::uint8_t*> dptr(n_other, nullptr);
      for (int b = 0; b < n_other; ++b) {
        const int l = s.index_of(i, others[b]);
        if (l >= 0) dptr[b] = s.d[l].data();
      }
      for (int k = 0; k < k_slots; ++k) {
        for (int b = 0; b < n_other; ++b) dval[b] = dptr[b] ? dptr[b][k] : 0;
        sums[0] = 0;
        for (int mask = 1; mask < n_masks; ++mask) {
          const int low = mask & (-mask);
          sums[mask] = sums[mask ^ low] + dval[__builtin_ctz(low)];
        }
        const int y = obs.data[i].counts[k];
        for (int mask = 0; mask < n_masks; ++mask)
          t.data_mis[i][mask] += (sums[mask] != y);
      }
    }
  }

  // ACK side: per-link delayed success series, then mask x delay-combo scans
  for (int j = 0; j < n; ++j) {
    const auto others = others_of(j, n);
    for (int mask = 0; mask < n_masks; ++mask) {
      std::vector<int> bits;
      for (int b = 0; b < n_other; ++b)
        if (mask & (1 << b)) bits.push_back(b);
      const int n_combos = static_cast<int>(std::pow(tau_max, bits.size()) + 0.5);
      long long best = -1;
      int best_combo = 0;
      for (int combo = 0; combo < n_combos; ++combo) {
        std::vector<int> taus(bits.size());
        int code = combo;
        for (std::size_t b = 0; b < bits.size(); ++b) {
          taus[b] = 1 + code % tau_max;
          code /= tau_max;
        }
        long long mis = 0;
        for (const auto& s : samples) {
          std::vector<const std::uint8_t*> dptr(bits.size(), nullptr);
          std::vector<const std::uint8_t*> eptr(bits.size(), nullptr);
          for (std::size_t b = 0; b < bits.size(); ++b) {
            const int l = s.index_of(others[bits[b]], j);
            if (l >= 0) {
              dptr[b] = s.d[l].data();
              eptr[b] = s.e[l].data();
            }
          }
          for (int k = 0; k < k_slots; ++k) {
            int sum = 0;
            for (std::size_t b = 0; b < bits.size(); ++b) {
              const int kk = k - taus[b];
              if (kk >= 0 && dptr[b] && dptr[b][kk] && !eptr[b][kk]) ++sum;
            }
            mis += (sum != obs.acks[j].counts[k]);
          }
        }
        if (best < 0 || mis < best) {
          best = mis;
          best_combo = combo;
        }
      }
      t.ack_mis_best[j][mask] = best;
      t.ack_best_combo[j][mask] = best_combo;
    }
  }

  // closed-form maximizers and per-link log-likelihood terms
  Matrix llp(n);
  const double total = static_cast<double>(m_total) * k_slots;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      long long sum_d = 0, sum_e = 0;
      for (const auto& s : samples) {
        const int l = s.index_of(i, j);
        if (l < 0) continue;
        for (int k = 0; k < k_slots; ++k) {
          sum_d += s.d[l][k];
          sum_e += s.e[l][k];
        }
      }
      t.rate_hat(i, j) = static_cast<double>(sum_d) / total;
      t.loss_hat(i, j) =
          sum_d > 0 ? static_cast<double>(sum_e) / static_cast<double>(sum_d) : 0.0;
      const double r = clamp_prob(t.rate_hat(i, j));
      const double l = clamp_prob(t.loss_hat(i, j));
      llp(i, j) = sum_d * std::log(r) + (total - sum_d) * std::log(1.0 - r) +
                  sum_e * std::log(l) + (sum_d - sum_e) * std::log(1.0 - l);
    }
  for (int i = 0; i < n; ++i) {
    const auto others = others_of(i, n);
    for (int mask = 0; mask < n_masks; ++mask) {
      double v = 0.0;
      for (int b = 0; b < n_other; ++b)
        if (mask & (1 << b)) v += llp(i, others[b]);
      t.row_llp[i][mask] = v;
    }
  }
  return t;
}

// M-step of EM-ES: maximize the penalized Monte-Carlo complete-data
// log-likelihood over all adjacency candidates and per-link delays.
ModelParams es_m_step(const std::vector<LatentSample>& samples, const ObservationSet& obs,
                      const EmState& state, const EmConfig& cfg, bool search_adjacency) {
  const int n = obs.n_nodes;
  const auto tables = build_es_tables(samples, obs, cfg.tau_max);
  const int n_other = n - 1;
  const int n_masks = 1 << n_other;

  // candidate = one out-mask per node (row), in-masks derived
  const long long n_candidates = 1LL << (static_cast<long long>(n) * n_other);
  double best_score = 0.0;
  long long best_cand = -1;

  std::vector<int> row_mask(n), col_mask(n);
  if (!search_adjacency) {
    // warm-up mode: keep the current support, only refresh delays and the
    // closed-form rate/loss maximizers from the fresh samples
    best_cand = 0;
    const auto& adj = state.params.adjacency;
    for (int i = n - 1; i >= 0; --i) {
      const auto others = others_of(i, n);
      int mask = 0;
      for (int b = 0; b < n_other; ++b)
        if (adj.at(i, others[b])) mask |= 1 << b;
      best_cand = best_cand << n_other | mask;
    }
  }
  for (long long cand = 0; search_adjacency && cand < n_candidates; ++cand) {
    long long c = cand;
    for (int i = 0; i < n; ++i) {
      row_mask[i] = static_cast<int>(c & (n_masks - 1));
      c >>= n_other;
    }
    // derive in-masks: bit b of col_mask[j] corresponds to others_of(j)[b]
    std::fill(col_mask.begin(), col_mask.end(), 0);
    for (int i = 0; i < n; ++i) {
      const auto others = others_of(i, n);
      for (int b = 0; b < n_other; ++b) {
        if (!(row_mask[i] & (1 << b))) continue;
        const int j = others[b];
        const auto in_others = others_of(j, n);
        for (int bb = 0; bb < n_other; ++bb)
          if (in_others[bb] == i) col_mask[j] |= 1 << bb;
      }
    }
    long long mismatches = 0;
    double llp = 0.0;
    for (int v = 0; v < n; ++v) {
      mismatches += tables.data_mis[v][row_mask[v]] + tables.ack_mis_best[v][col_mask[v]];
      llp += tables.row_llp[v][row_mask[v]];
    }
    const double score = kMismatchPenalty * static_cast<double>(mismatches) + llp;
    if (best_cand < 0 || score > best_score) {
      best_score = score;
      best_cand = cand;
    }
  }

  ModelParams next = state.params;
  next.adjacency = Adjacency(n);
  long long c = best_cand;
  for (int i = 0; i < n; ++i) {
    row_mask[i] = static_cast<int>(c & (n_masks - 1));
    c >>= n_other;
    const auto others = others_of(i, n);
    for (int b = 0; b < n_other; ++b)
      if (row_mask[i] & (1 << b)) next.adjacency.set(i, others[b], true);
  }
  // delays from the best combo of each receiver's in-mask; in warm-up mode
  // the initial delay-scan estimates are kept (junk first-round samples make
  // the combo tables unreliable, and a wrong delay poisons the next E-step)
  for (int j = 0; search_adjacency && j < n; ++j) {
    const auto others = others_of(j, n);
    int mask = 0;
    for (int b = 0; b < n_other; ++b)
      if (next.adjacency.at(others[b], j)) mask |= 1 << b;
    int code = tables.ack_best_combo[j][mask];
    for (int b = 0; b < n_other; ++b) {
      if (!(mask & (1 << b))) continue;
      next.set_delay(others[b], j, 1 + code % cfg.tau_max);
      code /= cfg.tau_max;
    }
  }
  // closed-form maximizers (learning rate 1)
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j || !next.adjacency.at(i, j)) continue;
      next.rate(i, j) = tables.rate_hat(i, j);
      next.loss(i, j) = tables.loss_hat(i, j);
    }
  return next;
}

}  // namespace

EmResult run_em_es(const ObservationSet& obs, const EmConfig& cfg) {
  require_valid(obs);
  cfg.validate();
  if (obs.n_nodes > 5)
    throw InvalidInput("run_em_es: exhaustive search limited to N <= 5 (got N=" +
                       std::to_string(obs.n_nodes) + ")");

  EmState state;
  state.params = initialize_params(obs, cfg);

  EmResult result;
  int unchanged = 0;
  for (int n_iter = 1; n_iter <= cfg.max_iterations; ++n_iter) {
    EmConfig sweep_cfg = cfg;
    sweep_cfg.rng_seed = derive_seed(cfg.rng_seed, 0xE5, static_cast<std::uint64_t>(n_iter));
    const auto samples = draw_samples(obs, state.params, sweep_cfg);
    // the first sample sets are drawn under (near-)random parameters;
    // committing to a topology from them is unreliable and (because pruned
    // links leave the sampling support) irreversible, so the first two
    // iterations only refresh the parameter estimates
    constexpr int kWarmupIterations = 2;
    const bool search = n_iter > kWarmupIterations;
    ModelParams next = es_m_step(samples, obs, state, cfg, search);
    if (search) apply_identifiability_guard(next, samples, obs.n_slots());

    result.trace.push_back(make_trace_row(n_iter, next, state.params.adjacency));
    unchanged = (search && next.adjacency == state.params.adjacency) ? unchanged + 1 : 0;
    state.params = std::move(next);
    state.iteration = n_iter;
    state.adjacency_history.push_back(state.params.adjacency);
    if (unchanged >= cfg.convergence_patience) break;
  }
  result.adjacency = state.params.adjacency;
  return result;
}

}  // namespace topoinfer
