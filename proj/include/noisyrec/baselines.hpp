#pragma once

// Reference recommenders: uniform random lists and most-frequent successor.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <unordered_set>
#include <vector>

#include "noisyrec/corpus.hpp"
#include "noisyrec/rng.hpp"
#include "noisyrec/srgnn.hpp"

namespace noisyrec {

/// K distinct items drawn uniformly, in random order.
inline RecommendationList random_recommend(std::size_t n_items, std::size_t k, Rng& rng) {
  if (k > n_items) throw Error("random_recommend: K exceeds catalog size");
  RecommendationList out;
  out.reserve(k);
  if (2 * k <= n_items) {
    std::unordered_set<ItemIndex> seen;
    while (out.size() < k) {
      const auto i = static_cast<ItemIndex>(rng.index(n_items));
      if (seen.insert(i).second) out.push_back(i);
    }
    return out;
  }
  std::vector<ItemIndex> all(n_items);
  std::iota(all.begin(), all.end(), ItemIndex{0});
  for (std::size_t i = 0; i < k; ++i) std::swap(all[i], all[i + rng.index(n_items - i)]);
  all.resize(k);
  return all;
}

struct BigramTable {
  std::vector<std::map<ItemIndex, std::uint64_t>> successors;  // per item
  std::vector<ItemIndex> popularity_ranking;                  // descending count, ties by index

  std::size_t n_items() const noexcept { return successors.size(); }
};

/// Counts each source transition once: the examples of one session end in
/// (prefix.back() -> target) for every click pair of that session.
inline BigramTable build_bigram(const std::vector<SplitExample>& train, std::size_t n_items) {
  if (train.empty()) throw Error("build_bigram: empty training split");
  BigramTable t;
  t.successors.resize(n_items);
  for (const auto& ex : train) {
    if (ex.prefix.empty() || ex.prefix.back() >= n_items || ex.target >= n_items)
      throw Error("build_bigram: example outside the catalog");
    ++t.successors[ex.prefix.back()][ex.target];
  }
  const auto pop = popularity_from_examples(train, n_items);
  t.popularity_ranking.resize(n_items);
  std::iota(t.popularity_ranking.begin(), t.popularity_ranking.end(), ItemIndex{0});
  std::stable_sort(t.popularity_ranking.begin(), t.popularity_ranking.end(),
                   [&](ItemIndex a, ItemIndex b) { return pop[a] > pop[b]; });
  return t;
}

/// Successors of `last_item` by descending count (ties: smaller index),
/// padded with the most popular remaining items.
inline RecommendationList bigram_recommend(const BigramTable& table, ItemIndex last_item, std::size_t k) {
  if (k > table.n_items()) throw Error("bigram_recommend: K exceeds catalog size");
  RecommendationList out;
  out.reserve(k);
  if (last_item < table.n_items()) {
    std::vector<std::pair<ItemIndex, std::uint64_t>> succ(table.successors[last_item].begin(),
                                                          table.successors[last_item].end());
    std::stable_sort(succ.begin(), succ.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    for (std::size_t i = 0; i < succ.size() && out.size() < k; ++i) out.push_back(succ[i].first);
  }
  std::unordered_set<ItemIndex> taken(out.begin(), out.end());
  for (ItemIndex i : table.popularity_ranking) {
    if (out.size() == k) break;
    if (!taken.contains(i)) out.push_back(i);
  }
  return out;
}

inline std::vector<RecommendationList> bigram_recommend_all(const BigramTable& table,
                                                            const std::vector<SplitExample>& examples, std::size_t k) {
  std::vector<RecommendationList> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(bigram_recommend(table, ex.prefix.back(), k));
  return out;
}

/// One random list per example from a stream seeded by (seed, example position).
inline std::vector<RecommendationList> random_recommend_all(std::size_t n_items, std::size_t n_examples, std::size_t k,
                                                            std::uint64_t seed) {
  std::vector<RecommendationList> out;
  out.reserve(n_examples);
  for (std::size_t i = 0; i < n_examples; ++i) {
    Rng rng = Rng::derive(seed, i, 0, 7);
    out.push_back(random_recommend(n_items, k, rng));
  }
  return out;
}

}  // namespace noisyrec
