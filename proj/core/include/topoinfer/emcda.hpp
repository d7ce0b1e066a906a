#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "topoinfer/causality.hpp"
#include "topoinfer/types.hpp"

namespace topoinfer {

/// Configuration of the stochastic EM loop.
struct EmConfig {
  int n_samples = 30;        // M, posterior samples per E-step
  int burn_in_sweeps = 10;   // Gibbs sweeps discarded before recording
  int max_iterations = 30;
  int learning_rate_hold = 5;  // gamma = 1 for n <= hold, then 1/(n - hold)
  MetricConfig metric;         // metric used by the CDA-based M-step
  // Reduced S for per-sample thresholds inside EM. 19 makes the threshold
  // the maximum of the null draws, so the per-pair level is exactly
  // 1/(S+1) = alpha at alpha = 0.05.
  int em_permutations = 19;
  int tau_max = 2;
  int convergence_patience = 2;  // stop after this many unchanged adjacencies
  std::uint64_t rng_seed = 1;

  double learning_rate(int iteration) const {  // iteration is 1-based
    return iteration <= learning_rate_hold
               ? 1.0
               : 1.0 / static_cast<double>(iteration - learning_rate_hold);
  }
  void validate() const;
};

/// Exact probability that a sum of independent Bernoulli(p_i) equals y,
/// by iterative convolution. Empty probs: 1 iff y == 0.
double poisson_binomial_pmf(int y, const std::vector<double>& probs);

/// Three-point conditional distribution of one latent site
/// Z_ij[k] in {(D=0,E=0), (D=1,E=0), (D=1,E=1)}.
struct GibbsDistribution {
  double p00 = 0.0;
  double p10 = 0.0;
  double p11 = 0.0;
};

/// Single-site Gibbs conditional: prior {(1-R), R(1-L), RL} times
/// Poisson-binomial likelihoods of the residual data/ACK counts explained
/// by the other active links (marginalized through their rate parameters).
/// If the observations are incompatible with the model support (zero total
/// mass), returns the uniform distribution over the three states so the
/// chain stays ergodic on misspecified data.
GibbsDistribution gibbs_conditional(int i, int j, int k, const ObservationSet& obs,
                                    const ModelParams& params);

/// Gibbs sampler: burn_in_sweeps full sweeps over all active (link, slot)
/// sites, then one recorded LatentSample per subsequent sweep until
/// cfg.n_samples are collected. Deterministic given cfg.rng_seed.
std::vector<LatentSample> draw_samples(const ObservationSet& obs, const ModelParams& params,
                                       const EmConfig& cfg);

/// Loss-imputed per-node sequences for one sample:
///   est_data_i[k]  = sum_j D_ij[k]
///   est_acks_j[k]  = Y_j^A[k] + sum_{(i,j)} E_ij[k - tau_ij]
/// (observed ACKs plus imputed ACKs for packets the sampler deems lost).
std::pair<std::vector<TimingSeries>, std::vector<TimingSeries>> reconstruct_sequences(
    const LatentSample& sample, const ObservationSet& obs, const ModelParams& params);

/// EM loop state handed to the M-step.
struct EmState {
  ModelParams params;
  int iteration = 0;  // completed iterations
  std::vector<Adjacency> adjacency_history;
};

/// CDA-based M-step: per-sample delay scans and thresholded metric votes on
/// the reconstructed sequences, majority aggregation (ties count as active),
/// and gamma-weighted closed-form rate/loss updates on links active both
/// before and after the adjacency update.
ModelParams m_step(const std::vector<LatentSample>& samples, const ObservationSet& obs,
                   const EmState& state, const EmConfig& cfg);

/// One trace row per EM iteration.
struct EmIterate {
  int iteration = 0;
  Adjacency adjacency;
  double mean_rate = 0.0;   // over links active after this iteration
  double mean_loss = 0.0;
  int edit_distance = 0;    // Hamming distance to previous adjacency
};

struct EmResult {
  Adjacency adjacency;
  std::vector<EmIterate> trace;
};

/// Full EM-CDA: uniform random L/R init, all-ones adjacency, delays from a
/// scan of the raw observations, then E/M iterations until the adjacency is
/// unchanged for cfg.convergence_patience iterations or max_iterations.
EmResult run_em_cda(const ObservationSet& obs, const EmConfig& cfg);

/// Reference EM with an exhaustive-search M-step over all adjacency
/// candidates and per-link delays. Cost-guarded to N <= 5.
EmResult run_em_es(const ObservationSet& obs, const EmConfig& cfg);

}  // namespace topoinfer
