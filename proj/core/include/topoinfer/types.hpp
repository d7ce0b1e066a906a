#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace topoinfer {

/// Error thrown on invalid inputs (dimension mismatches, bad configs, ...).
class InvalidInput : public std::runtime_error {
 public:
  explicit InvalidInput(const std::string& what) : std::runtime_error(what) {}
};

/// Per-slot packet counts for one node and one packet kind (data or ACK).
struct TimingSeries {
  std::vector<int> counts;          // length K, entries >= 0
  double slot_duration = 0.0015;    // seconds

  int length() const { return static_cast<int>(counts.size()); }
};

/// All nodes' data and ACK timing series over a shared slot grid.
struct ObservationSet {
  int n_nodes = 0;
  std::vector<TimingSeries> data;   // data[i] = per-slot data packet counts of node i
  std::vector<TimingSeries> acks;   // acks[i] = per-slot ACK counts of node i

  int n_slots() const { return data.empty() ? 0 : data.front().length(); }
  double slot_duration() const {
    return data.empty() ? 0.0 : data.front().slot_duration;
  }
};

/// Dense square matrix of doubles, used for per-link rate/loss parameters.
struct Matrix {
  int n = 0;
  std::vector<double> v;

  Matrix() = default;
  explicit Matrix(int size, double fill = 0.0)
      : n(size), v(static_cast<std::size_t>(size) * size, fill) {}

  double& operator()(int i, int j) { return v[static_cast<std::size_t>(i) * n + j]; }
  double operator()(int i, int j) const { return v[static_cast<std::size_t>(i) * n + j]; }
};

/// Directed-link indicator matrix with an all-zero diagonal.
struct Adjacency {
  int n_nodes = 0;
  std::vector<std::uint8_t> entries;  // row-major N*N, values in {0,1}

  Adjacency() = default;
  explicit Adjacency(int n) : n_nodes(n), entries(static_cast<std::size_t>(n) * n, 0) {}

  std::uint8_t at(int i, int j) const {
    return entries[static_cast<std::size_t>(i) * n_nodes + j];
  }
  void set(int i, int j, bool active) {
    if (i == j) throw InvalidInput("adjacency: self-link (" + std::to_string(i) + ")");
    entries[static_cast<std::size_t>(i) * n_nodes + j] = active ? 1 : 0;
  }

  int n_links() const {
    int c = 0;
    for (auto e : entries) c += e;
    return c;
  }

  /// Active ordered pairs, row-major order.
  std::vector<std::pair<int, int>> links() const {
    std::vector<std::pair<int, int>> out;
    for (int i = 0; i < n_nodes; ++i)
      for (int j = 0; j < n_nodes; ++j)
        if (at(i, j)) out.emplace_back(i, j);
    return out;
  }

  bool operator==(const Adjacency& o) const = default;
};

/// Full parameter set: adjacency plus per-link loss, rate and ACK delay.
/// Loss/rate/delay entries are meaningful only where adjacency is 1.
struct ModelParams {
  Adjacency adjacency;
  Matrix loss;              // per-link loss probability, [0,1]
  Matrix rate;              // per-link transmission probability, [0,1]
  std::vector<int> delay;   // per-link ACK delay in slots, >= 1; row-major N*N

  int n_nodes() const { return adjacency.n_nodes; }
  int delay_at(int i, int j) const {
    return delay[static_cast<std::size_t>(i) * n_nodes() + j];
  }
  void set_delay(int i, int j, int tau) {
    delay[static_cast<std::size_t>(i) * n_nodes() + j] = tau;
  }

  static ModelParams zeros(int n) {
    ModelParams p;
    p.adjacency = Adjacency(n);
    p.loss = Matrix(n);
    p.rate = Matrix(n);
    p.delay.assign(static_cast<std::size_t>(n) * n, 1);
    return p;
  }
};

/// One joint realization of the per-link transmission (d) and error (e)
/// indicator tensors. Storage is dense per active link only; sites outside
/// the support read as zero. Invariant: e <= d elementwise.
struct LatentSample {
  int n_nodes = 0;
  int n_slots = 0;
  std::vector<std::pair<int, int>> links;        // active ordered pairs
  std::vector<std::vector<std::uint8_t>> d;      // d[l][k], parallel to links
  std::vector<std::vector<std::uint8_t>> e;      // e[l][k]
  std::vector<int> link_index;                   // N*N -> index into links, -1 if inactive

  LatentSample() = default;
  LatentSample(const Adjacency& a, int k_slots);

  int index_of(int i, int j) const {
    return link_index[static_cast<std::size_t>(i) * n_nodes + j];
  }
  std::uint8_t d_at(int i, int j, int k) const {
    int l = index_of(i, j);
    return l < 0 ? 0 : d[l][k];
  }
  std::uint8_t e_at(int i, int j, int k) const {
    int l = index_of(i, j);
    return l < 0 ? 0 : e[l][k];
  }
};

}  // namespace topoinfer
