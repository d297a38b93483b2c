#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <unordered_map>
#include <vector>

#include "noisyrec/corpus.hpp"
#include "noisyrec/tensor.hpp"

namespace noisyrec {

/// Directed click graph of one session prefix.
///
/// `a_out(u, v)` is 1/outdeg(u) when v directly follows u somewhere in the
/// prefix; `a_in(v, u)` is 1/indeg(v) for the same transition. Repeated
/// transitions count once. Rows of nodes without edges are zero.
struct SessionGraph {
  std::vector<ItemIndex> nodes;     // distinct items, first-occurrence order
  Tensor a_in;                      // n x n
  Tensor a_out;                     // n x n
  std::vector<std::size_t> alias;   // prefix position -> node position
  std::size_t last_node = 0;

  std::size_t size() const noexcept { return nodes.size(); }
};

inline SessionGraph build_graph(std::span<const ItemIndex> prefix) {
  if (prefix.empty()) throw Error("build_graph: empty prefix");
  SessionGraph g;
  std::unordered_map<ItemIndex, std::size_t> pos;
  for (ItemIndex item : prefix) {
    auto [it, inserted] = pos.emplace(item, g.nodes.size());
    if (inserted) g.nodes.push_back(item);
    g.alias.push_back(it->second);
  }
  const std::size_t n = g.nodes.size();
  Tensor edges = Tensor::matrix(n, n);
  for (std::size_t k = 0; k + 1 < g.alias.size(); ++k) edges(g.alias[k], g.alias[k + 1]) = 1.0;

  g.a_out = Tensor::matrix(n, n);
  g.a_in = Tensor::matrix(n, n);
  for (std::size_t u = 0; u < n; ++u) {
    double out_deg = 0.0, in_deg = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
      out_deg += edges(u, v);
      in_deg += edges(v, u);
    }
    for (std::size_t v = 0; v < n; ++v) {
      if (out_deg > 0) g.a_out(u, v) = edges(u, v) / out_deg;
      if (in_deg > 0) g.a_in(u, v) = edges(v, u) / in_deg;
    }
  }
  g.last_node = g.alias.back();
  return g;
}

inline SessionGraph build_graph(const std::vector<ItemIndex>& prefix) {
  return build_graph(std::span<const ItemIndex>(prefix));
}

}  // namespace noisyrec
