#include "topoinfer/types.hpp"

namespace topoinfer {

LatentSample::LatentSample(const Adjacency& a, int k_slots)
    : n_nodes(a.n_nodes),
      n_slots(k_slots),
      links(a.links()),
      link_index(static_cast<std::size_t>(a.n_nodes) * a.n_nodes, -1) {
  d.resize(links.size());
  e.resize(links.size());
  for (std::size_t l = 0; l < links.size(); ++l) {
    d[l].assign(k_slots, 0);
    e[l].assign(k_slots, 0);
    auto [i, j] = links[l];
    link_index[static_cast<std::size_t>(i) * n_nodes + j] = static_cast<int>(l);
  }
}

}  // namespace topoinfer
