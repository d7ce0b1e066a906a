// Pairwise causal-dependence metrics, permutation thresholds, delay scans.

#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "topoinfer/causality.hpp"
#include "topoinfer/rng.hpp"

using namespace topoinfer;

namespace {

TimingSeries bernoulli_series(int k, double p, Rng& rng) {
  TimingSeries s;
  s.counts.resize(k);
  for (int t = 0; t < k; ++t) s.counts[t] = rng.bernoulli(p) ? 1 : 0;
  return s;
}

// Independent reference for the Granger F-type statistic: explicit normal
// equations solved with long-double Gaussian elimination (no ridge, no
// Eigen). Mirrors the statistic's definition, not its solver.
long double oracle_ssr(const std::vector<std::vector<long double>>& rows,
                       const std::vector<long double>& ys, int p) {
  std::vector<std::vector<long double>> a(p, std::vector<long double>(p + 1, 0.0L));
  for (std::size_t n = 0; n < rows.size(); ++n)
    for (int i = 0; i < p; ++i) {
      for (int j = 0; j < p; ++j) a[i][j] += rows[n][i] * rows[n][j];
      a[i][p] += rows[n][i] * ys[n];
    }
  long double max_diag = 0.0L;
  for (int c = 0; c < p; ++c) max_diag = std::max(max_diag, a[c][c]);
  const long double pivot_tol = 1e-14L * std::max(max_diag, 1.0L);
  for (int c = 0; c < p; ++c) {  // Gaussian elimination with partial pivoting
    int pivot = c;
    for (int r = c + 1; r < p; ++r)
      if (std::abs(a[r][c]) > std::abs(a[pivot][c])) pivot = r;
    std::swap(a[c], a[pivot]);
    // Rank-deficient column (exactly collinear regressors): drop it. SSR is
    // invariant to which of the collinear columns carries the coefficient.
    if (std::abs(a[c][c]) <= pivot_tol) continue;
    for (int r = 0; r < p; ++r) {
      if (r == c) continue;
      const long double f = a[r][c] / a[c][c];
      for (int j = c; j <= p; ++j) a[r][j] -= f * a[c][j];
    }
  }
  std::vector<long double> beta(p, 0.0L);
  for (int c = 0; c < p; ++c)
    if (std::abs(a[c][c]) > pivot_tol) beta[c] = a[c][p] / a[c][c];
  long double ssr = 0.0L;
  for (std::size_t n = 0; n < rows.size(); ++n) {
    long double pred = 0.0L;
    for (int i = 0; i < p; ++i) pred += beta[i] * rows[n][i];
    const long double e = ys[n] - pred;
    ssr += e * e;
  }
  return ssr;
}

double oracle_gc(const TimingSeries& source, const TimingSeries& target, int r) {
  const int k = target.length();
  const int p = 2 * r + 1;
  std::vector<std::vector<long double>> full, restricted;
  std::vector<long double> ys;
  for (int t = r; t < k; ++t) {
    std::vector<long double> row(p);
    row[0] = 1.0L;
    for (int lag = 1; lag <= r; ++lag) {
      row[lag] = target.counts[t - lag];
      row[r + lag] = source.counts[t - lag];
    }
    restricted.push_back({row.begin(), row.begin() + r + 1});
    full.push_back(std::move(row));
    ys.push_back(target.counts[t]);
  }
  const long double ssr_f = oracle_ssr(full, ys, p);
  const long double ssr_r = oracle_ssr(restricted, ys, r + 1);
  const long double num = std::max(ssr_r - ssr_f, 0.0L) / r;
  const long double den = ssr_f / (k - 3 * r - 1);
  return static_cast<double>(num / den);
}

// Retraces permutation_threshold's shuffle stream so the empirical-quantile
// index rule can be asserted independently.
std::vector<double> replay_permutation_values(const TimingSeries& source,
                                              const TimingSeries& target,
                                              const MetricConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  TimingSeries src = source, tgt = target;
  std::vector<double> values(cfg.permutations);
  for (int p = 0; p < cfg.permutations; ++p) {
    rng.shuffle(src.counts);
    rng.shuffle(tgt.counts);
    values[p] = metric_statistic(src, tgt, cfg);
  }
  std::sort(values.begin(), values.end());
  return values;
}

}  // namespace

TEST_CASE("gc_statistic: all-zero source contributes nothing") {
  Rng rng(7);
  TimingSeries target = bernoulli_series(200, 0.5, rng);
  TimingSeries source{std::vector<int>(200, 0), 0.0015};
  CHECK(gc_statistic(source, target, 3) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("gc_statistic matches the normal-equations oracle") {
  SUBCASE("strong but noisy one-lag coupling, K=40, R=2") {
    Rng rng(11);
    TimingSeries source = bernoulli_series(40, 0.5, rng);
    TimingSeries target{std::vector<int>(40, 0), 0.0015};
    for (int k = 1; k < 40; ++k)
      target.counts[k] = rng.bernoulli(0.1) ? 1 - source.counts[k - 1] : source.counts[k - 1];
    const double got = gc_statistic(source, target, 2);
    const double want = oracle_gc(source, target, 2);
    CHECK(got == doctest::Approx(want).epsilon(1e-8));
  }

  SUBCASE("an exact copy saturates: the full model has zero residual") {
    Rng rng(11);
    TimingSeries source = bernoulli_series(40, 0.5, rng);
    TimingSeries target{std::vector<int>(40, 0), 0.0015};
    for (int k = 1; k < 40; ++k) target.counts[k] = source.counts[k - 1];
    CHECK(gc_statistic(source, target, 2) == 1e15);
  }

  SUBCASE("50 seeded random cases") {
    for (std::uint64_t c = 0; c < 50; ++c) {
      Rng rng(derive_seed(31, c));
      const int k = 40 + static_cast<int>(rng.below(200));
      const int r = 1 + static_cast<int>(rng.below(3));
      TimingSeries source = bernoulli_series(k, 0.3, rng);
      TimingSeries target = bernoulli_series(k, 0.4, rng);
      if (rng.bernoulli(0.5))  // half the cases get a genuine coupling
        for (int t = 1; t < k; ++t) target.counts[t] += source.counts[t - 1];
      const double got = gc_statistic(source, target, r);
      const double want = oracle_gc(source, target, r);
      CHECK(got == doctest::Approx(want).epsilon(1e-8));
    }
  }
}

TEST_CASE("gc_statistic input validation") {
  TimingSeries s{std::vector<int>(10, 1), 0.0015};
  CHECK_THROWS_AS(gc_statistic(s, s, 3), InvalidInput);  // K <= 3R+1
  TimingSeries shorter{std::vector<int>(9, 1), 0.0015};
  CHECK_THROWS_AS(gc_statistic(shorter, s, 1), InvalidInput);
}

TEST_CASE("te_statistic analytic anchors") {
  Rng rng(5);
  TimingSeries source = bernoulli_series(10000, 0.5, rng);

  SUBCASE("deterministic one-step coupling carries one bit") {
    TimingSeries target{std::vector<int>(10000, 0), 0.0015};
    for (int k = 1; k < 10000; ++k) target.counts[k] = source.counts[k - 1];
    CHECK(te_statistic(source, target, 1, 1) == doctest::Approx(1.0).epsilon(0.05));
  }

  SUBCASE("independent pair carries (almost) none") {
    TimingSeries target = bernoulli_series(10000, 0.5, rng);
    CHECK(te_statistic(source, target, 1, 1) <= 0.02);
  }

  SUBCASE("constant source is exactly zero") {
    TimingSeries target = bernoulli_series(10000, 0.5, rng);
    TimingSeries constant{std::vector<int>(10000, 0), 0.0015};
    CHECK(te_statistic(constant, target, 1, 1) == 0.0);
  }
}

TEST_CASE("permutation_threshold uses the ceil((1-alpha)S) order statistic") {
  Rng rng(23);
  TimingSeries source = bernoulli_series(120, 0.5, rng);
  TimingSeries target = bernoulli_series(120, 0.5, rng);
  MetricConfig cfg;
  cfg.kind = MetricKind::kGC;
  cfg.ar_order = 2;

  SUBCASE("S=100, alpha=0.05 returns the 95th sorted value") {
    cfg.permutations = 100;
    cfg.alpha = 0.05;
    const auto values = replay_permutation_values(source, target, cfg, 99);
    CHECK(permutation_threshold(source, target, cfg, 99) == values[94]);
  }

  SUBCASE("S=2, alpha=0.5 returns the smaller value") {
    cfg.permutations = 2;
    cfg.alpha = 0.5;
    const auto values = replay_permutation_values(source, target, cfg, 99);
    CHECK(permutation_threshold(source, target, cfg, 99) == values[0]);
  }
}

TEST_CASE("permutation_detects agrees with the threshold comparison") {
  MetricConfig cfg;
  cfg.permutations = 25;
  cfg.alpha = 0.05;
  cfg.ar_order = 2;
  int detections = 0;
  for (std::uint64_t c = 0; c < 30; ++c) {
    Rng rng(derive_seed(77, c));
    cfg.kind = rng.bernoulli(0.5) ? MetricKind::kGC : MetricKind::kTE;
    TimingSeries source = bernoulli_series(150, 0.5, rng);
    TimingSeries target = bernoulli_series(150, 0.5, rng);
    if (rng.bernoulli(0.5))
      for (int k = 1; k < 150; ++k) target.counts[k] = source.counts[k - 1];
    const double observed = metric_statistic(source, target, cfg);
    const std::uint64_t seed = derive_seed(78, c);
    const bool expected = observed > permutation_threshold(source, target, cfg, seed);
    CHECK(permutation_detects(observed, source, target, cfg, seed) == expected);
    detections += expected;
  }
  CHECK(detections > 0);  // both outcomes exercised
  CHECK(detections < 30);
}

TEST_CASE("permutation test is calibrated on independent pairs") {
  MetricConfig cfg;
  cfg.permutations = 60;
  cfg.alpha = 0.05;
  cfg.ar_order = 2;
  int detected = 0;
  const int n_pairs = 200;
  for (std::uint64_t c = 0; c < n_pairs; ++c) {
    Rng rng(derive_seed(123, c));
    TimingSeries source = bernoulli_series(400, 0.5, rng);
    TimingSeries target = bernoulli_series(400, 0.5, rng);
    const double observed = metric_statistic(source, target, cfg);
    detected += permutation_detects(observed, source, target, cfg, derive_seed(124, c));
  }
  const double bound = 0.05 + 2 * std::sqrt(0.05 * 0.95 / n_pairs);
  CHECK(static_cast<double>(detected) / n_pairs <= bound);
}

TEST_CASE("align_at_delay shifts the target and truncates both series") {
  TimingSeries source{{1, 2, 3, 4, 5}, 0.0015};
  TimingSeries target{{9, 8, 7, 6, 5}, 0.0015};
  auto [src, tgt] = align_at_delay(source, target, 2);
  CHECK(src.counts == std::vector<int>{1, 2, 3, 4});
  CHECK(tgt.counts == std::vector<int>{8, 7, 6, 5});
  CHECK_THROWS_AS(align_at_delay(source, target, 0), InvalidInput);
  CHECK_THROWS_AS(align_at_delay(source, target, 5), InvalidInput);
}

TEST_CASE("delay_scan finds the true lag") {
  Rng rng(41);
  TimingSeries source = bernoulli_series(5000, 0.5, rng);
  MetricConfig cfg;
  cfg.kind = MetricKind::kGC;
  cfg.ar_order = 2;

  SUBCASE("three-slot delay, tau_max=5") {
    // AR(1) scan with a noisy coupling: an exact copy would saturate the
    // statistic at several alignments (the AR window itself spans the lag),
    // making the per-delay values tie instead of peaking at the true lag.
    TimingSeries target{std::vector<int>(5000, 0), 0.0015};
    for (int k = 3; k < 5000; ++k)
      target.counts[k] = rng.bernoulli(0.1) ? 1 - source.counts[k - 3] : source.counts[k - 3];
    cfg.ar_order = 1;
    cfg.max_delay = 5;
    CHECK(delay_scan(source, target, cfg).best_delay == 3);
  }

  SUBCASE("tau_max=1 returns the unshifted statistic unconditionally") {
    TimingSeries target = bernoulli_series(5000, 0.5, rng);
    cfg.max_delay = 1;
    const auto res = delay_scan(source, target, cfg);
    CHECK(res.best_delay == 1);
    CHECK(res.best_value == metric_statistic(source, target, cfg));
  }

  SUBCASE("constant source ties break toward the smallest delay") {
    TimingSeries constant{std::vector<int>(5000, 1), 0.0015};
    TimingSeries target = bernoulli_series(5000, 0.5, rng);
    cfg.max_delay = 4;
    const auto res = delay_scan(constant, target, cfg);
    CHECK(res.best_delay == 1);
    CHECK(res.best_value == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("MetricConfig::validate rejects bad parameters") {
  MetricConfig cfg;
  cfg.alpha = 0.0;
  CHECK_THROWS_AS(cfg.validate(1000), InvalidInput);
  cfg = MetricConfig{};
  cfg.ar_order = 0;
  CHECK_THROWS_AS(cfg.validate(1000), InvalidInput);
  cfg = MetricConfig{};
  CHECK_THROWS_AS(cfg.validate(3 * cfg.ar_order + 1), InvalidInput);
  CHECK_NOTHROW(cfg.validate(1000));
}
