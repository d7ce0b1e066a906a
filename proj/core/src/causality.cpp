#include "topoinfer/causality.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "topoinfer/rng.hpp"

namespace topoinfer {

void MetricConfig::validate(int n_slots) const {
  if (ar_order < 1) throw InvalidInput("metric config: ar_order must be >= 1");
  if (te_src_window < 1 || te_dst_window < 1)
    throw InvalidInput("metric config: TE windows must be >= 1");
  if (permutations < 1) throw InvalidInput("metric config: permutations must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidInput("metric config: alpha must be in (0,1)");
  if (max_delay < 1) throw InvalidInput("metric config: max_delay must be >= 1");
  if (kind == MetricKind::kGC && n_slots <= 3 * ar_order + 1)
    throw InvalidInput("metric config: GC requires K > 3R+1 (K=" + std::to_string(n_slots) +
                       ", R=" + std::to_string(ar_order) + ")");
  if (kind == MetricKind::kTE && n_slots <= std::max(te_src_window, te_dst_window))
    throw InvalidInput("metric config: TE window exceeds series length");
}

namespace {

constexpr double kRidge = 1e-10;

// Residual sum of squares of the least-squares fit over the leading
// n_cols columns of the accumulated normal equations.
double fit_ssr(const Eigen::MatrixXd& gram, const Eigen::VectorXd& xty, double yty,
               int n_cols) {
  Eigen::MatrixXd g = gram.topLeftCorner(n_cols, n_cols);
  g.diagonal().array() += kRidge;
  Eigen::VectorXd beta = g.ldlt().solve(xty.head(n_cols));
  double ssr = yty - 2.0 * beta.dot(xty.head(n_cols)) +
               beta.dot(gram.topLeftCorner(n_cols, n_cols) * beta);
  return std::max(ssr, 0.0);
}

}  // namespace

double gc_statistic(const TimingSeries& source, const TimingSeries& target, int order) {
  const int k_slots = target.length();
  const int r = order;
  if (r < 1) throw InvalidInput("gc_statistic: order must be >= 1");
  if (source.length() != k_slots)
    throw InvalidInput("gc_statistic: source and target lengths differ");
  if (k_slots <= 3 * r + 1)
    throw InvalidInput("gc_statistic: series too short, need K > 3R+1");

  const int p = 2 * r + 1;  // [intercept, target lags, source lags]
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd xty = Eigen::VectorXd::Zero(p);
  double yty = 0.0;

  std::vector<double> x(p);
  x[0] = 1.0;
  const int* tgt = target.counts.data();
  const int* src = source.counts.data();
  for (int k = r; k < k_slots; ++k) {
    for (int t = 1; t <= r; ++t) {
      x[t] = static_cast<double>(tgt[k - t]);
      x[r + t] = static_cast<double>(src[k - t]);
    }
    const double y = static_cast<double>(tgt[k]);
    yty += y * y;
    for (int a = 0; a < p; ++a) {
      xty[a] += x[a] * y;
      double* col = gram.data() + static_cast<std::ptrdiff_t>(a) * p;  // column a
      for (int c = a; c < p; ++c) col[c] += x[a] * x[c];
    }
  }
  // accumulation filled the lower triangle; mirror it
  for (int a = 0; a < p; ++a)
    for (int c = a + 1; c < p; ++c) gram(a, c) = gram(c, a);

  const double ssr_full = fit_ssr(gram, xty, yty, p);
  const double ssr_restricted = fit_ssr(gram, xty, yty, r + 1);

  const double num = std::max(ssr_restricted - ssr_full, 0.0) / r;
  const double den = ssr_full / (k_slots - 3 * r - 1);
  const double tiny = 1e-12 * std::max(yty, 1.0);
  // numerators at rounding-noise scale (e.g. a constant source, whose lags
  // are collinear with the intercept) are exactly no-evidence
  if (num <= tiny) return 0.0;
  if (den <= tiny / k_slots) return 1e15;
  return num / den;
}

double te_statistic(const TimingSeries& source, const TimingSeries& target, int s, int r) {
  const int k_slots = target.length();
  if (s < 1 || r < 1) throw InvalidInput("te_statistic: windows must be >= 1");
  if (source.length() != k_slots)
    throw InvalidInput("te_statistic: source and target lengths differ");
  const int k0 = std::max(s, r);
  if (k_slots <= k0) throw InvalidInput("te_statistic: window exceeds series length");
  if (s + r > 12) throw InvalidInput("te_statistic: windows too large for plug-in estimate");

  auto clip = [](int c) { return c > 2 ? 2 : c; };
  auto pow3 = [](int e) {
    int v = 1;
    while (e-- > 0) v *= 3;
    return v;
  };

  const int pow_s = pow3(s);
  const int pow_r = pow3(r);
  const int drop_s = pow_s / 3;
  const int drop_r = pow_r / 3;

  // joint index = (c * pow_s + b) * 3 + a, where a = target symbol "now",
  // b = source past window code, c = target past window code
  std::vector<int> n_abc(static_cast<std::size_t>(pow_s) * pow_r * 3, 0);

  // base-3 window codes, least-significant digit = most recent sample
  int bcode = 0, ccode = 0;
  for (int t = 1; t <= s; ++t) bcode += clip(source.counts[k0 - t]) * pow3(t - 1);
  for (int t = 1; t <= r; ++t) ccode += clip(target.counts[k0 - t]) * pow3(t - 1);

  for (int k = k0; k < k_slots; ++k) {
    const int a = clip(target.counts[k]);
    ++n_abc[(static_cast<std::size_t>(ccode) * pow_s + bcode) * 3 + a];
    bcode = clip(source.counts[k]) + 3 * (bcode % drop_s);
    ccode = a + 3 * (ccode % drop_r);
  }

  std::vector<int> n_ac(static_cast<std::size_t>(pow_r) * 3, 0);
  std::vector<int> n_bc(static_cast<std::size_t>(pow_r) * pow_s, 0);
  std::vector<int> n_c(pow_r, 0);
  for (int c = 0; c < pow_r; ++c)
    for (int b = 0; b < pow_s; ++b)
      for (int a = 0; a < 3; ++a) {
        const int n = n_abc[(static_cast<std::size_t>(c) * pow_s + b) * 3 + a];
        n_ac[static_cast<std::size_t>(c) * 3 + a] += n;
        n_bc[static_cast<std::size_t>(c) * pow_s + b] += n;
        n_c[c] += n;
      }

  const double total = static_cast<double>(k_slots - k0);
  double bits = 0.0;
  for (int c = 0; c < pow_r; ++c)
    for (int b = 0; b < pow_s; ++b)
      for (int a = 0; a < 3; ++a) {
        const int n = n_abc[(static_cast<std::size_t>(c) * pow_s + b) * 3 + a];
        if (n == 0) continue;
        const double num = static_cast<double>(n) * n_c[c];
        const double den = static_cast<double>(n_ac[static_cast<std::size_t>(c) * 3 + a]) *
                           n_bc[static_cast<std::size_t>(c) * pow_s + b];
        bits += (n / total) * std::log2(num / den);
      }
  return std::max(bits, 0.0);
}

double metric_statistic(const TimingSeries& source, const TimingSeries& target,
                        const MetricConfig& cfg) {
  return cfg.kind == MetricKind::kGC
             ? gc_statistic(source, target, cfg.ar_order)
             : te_statistic(source, target, cfg.te_src_window, cfg.te_dst_window);
}

bool permutation_detects(double observed, const TimingSeries& source, const TimingSeries& target,
                         const MetricConfig& cfg, std::uint64_t rng_seed) {
  cfg.validate(target.length());
  Rng rng(rng_seed);
  TimingSeries src = source;
  TimingSeries tgt = target;
  int idx = static_cast<int>(std::ceil((1.0 - cfg.alpha) * cfg.permutations));
  idx = std::clamp(idx, 1, cfg.permutations);
  // observed > (ascending) value at `idx` iff fewer than S - idx + 1 of the
  // permuted statistics reach it
  const int fail_budget = cfg.permutations - idx + 1;
  int at_or_above = 0;
  for (int p = 0; p < cfg.permutations; ++p) {
    rng.shuffle(src.counts);
    rng.shuffle(tgt.counts);
    if (metric_statistic(src, tgt, cfg) >= observed) {
      if (++at_or_above >= fail_budget) return false;
    }
    if (at_or_above + (cfg.permutations - p - 1) < fail_budget) return true;
  }
  return true;
}

double permutation_threshold(const TimingSeries& source, const TimingSeries& target,
                             const MetricConfig& cfg, std::uint64_t rng_seed) {
  cfg.validate(target.length());
  Rng rng(rng_seed);
  TimingSeries src = source;
  TimingSeries tgt = target;
  std::vector<double> values(cfg.permutations);
  for (int p = 0; p < cfg.permutations; ++p) {
    rng.shuffle(src.counts);
    rng.shuffle(tgt.counts);
    values[p] = metric_statistic(src, tgt, cfg);
  }
  std::sort(values.begin(), values.end());
  int idx = static_cast<int>(std::ceil((1.0 - cfg.alpha) * cfg.permutations));
  idx = std::clamp(idx, 1, cfg.permutations);
  return values[idx - 1];
}

std::pair<TimingSeries, TimingSeries> align_at_delay(const TimingSeries& source,
                                                     const TimingSeries& target, int tau) {
  const int k_slots = source.length();
  if (tau < 1 || tau >= k_slots) throw InvalidInput("align_at_delay: tau out of range");
  const int len = k_slots - tau + 1;
  TimingSeries src{std::vector<int>(source.counts.begin(), source.counts.begin() + len),
                   source.slot_duration};
  TimingSeries tgt{std::vector<int>(target.counts.begin() + tau - 1, target.counts.end()),
                   target.slot_duration};
  return {std::move(src), std::move(tgt)};
}

DelayScanResult delay_scan(const TimingSeries& source, const TimingSeries& target,
                           const MetricConfig& cfg) {
  const int k_slots = source.length();
  if (cfg.max_delay >= k_slots)
    throw InvalidInput("delay_scan: max_delay must be < series length");
  DelayScanResult best;
  bool first = true;
  for (int tau = 1; tau <= cfg.max_delay; ++tau) {
    auto [src, tgt] = align_at_delay(source, target, tau);
    const double value = metric_statistic(src, tgt, cfg);
    if (first || value > best.best_value) {
      best = {tau, value};
      first = false;
    }
  }
  return best;
}

}  // namespace topoinfer
