#pragma once

// Accuracy and popularity-bias metrics over top-K recommendation lists.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "noisyrec/corpus.hpp"
#include "noisyrec/rng.hpp"
#include "noisyrec/srgnn.hpp"
#include "noisyrec/stochastic.hpp"
#include "noisyrec/tensor.hpp"

namespace noisyrec {

using RecLists = std::vector<RecommendationList>;

inline double hit_rate(const RecLists& recs, const std::vector<ItemIndex>& targets) {
  if (recs.size() != targets.size()) throw Error("hit_rate: lists and targets differ in length");
  if (recs.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < recs.size(); ++i)
    hits += std::find(recs[i].begin(), recs[i].end(), targets[i]) != recs[i].end();
  return static_cast<double>(hits) / static_cast<double>(recs.size());
}

inline std::vector<ItemIndex> targets_of(const std::vector<SplitExample>& examples) {
  std::vector<ItemIndex> t;
  t.reserve(examples.size());
  for (const auto& ex : examples) t.push_back(ex.target);
  return t;
}

/// Distinct recommended items over the whole split, as a fraction of N.
inline double coverage(const RecLists& recs, std::size_t n_items) {
  if (n_items == 0) throw Error("coverage: empty catalog");
  std::vector<bool> seen(n_items, false);
  std::size_t count = 0;
  for (const auto& list : recs)
    for (ItemIndex i : list) {
      if (i >= n_items) throw Error("coverage: item outside the catalog");
      if (!seen[i]) {
        seen[i] = true;
        ++count;
      }
    }
  return static_cast<double>(count) / static_cast<double>(n_items);
}

/// Mean over lists of the mean training popularity of the listed items.
inline double arp(const RecLists& recs, const std::vector<std::uint64_t>& popularity) {
  if (recs.empty()) return 0.0;
  double total = 0.0;
  for (const auto& list : recs) {
    if (list.empty()) throw Error("arp: empty recommendation list");
    double s = 0.0;
    for (ItemIndex i : list) s += static_cast<double>(popularity.at(i));
    total += s / static_cast<double>(list.size());
  }
  return total / static_cast<double>(recs.size());
}

inline double arp(const RecLists& recs, const ItemVocab& vocab) { return arp(recs, vocab.train_popularity); }

/// Mean Jaccard overlap between aligned lists.
inline double iou_vs_bigram(const RecLists& model, const RecLists& bigram) {
  if (model.size() != bigram.size()) throw Error("iou_vs_bigram: list counts differ");
  if (model.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < model.size(); ++i) {
    std::unordered_set<ItemIndex> a(model[i].begin(), model[i].end());
    std::unordered_set<ItemIndex> u = a;
    std::size_t inter = 0;
    for (ItemIndex x : std::unordered_set<ItemIndex>(bigram[i].begin(), bigram[i].end())) {
      inter += a.contains(x);
      u.insert(x);
    }
    total += u.empty() ? 1.0 : static_cast<double>(inter) / static_cast<double>(u.size());
  }
  return total / static_cast<double>(model.size());
}

/// Quartile (0..3) of every item: descending popularity, ties by smaller index,
/// equal item counts with the remainder in the earlier quartiles.
inline std::vector<int> popularity_quartiles(const std::vector<std::uint64_t>& popularity) {
  const std::size_t n = popularity.size();
  std::vector<ItemIndex> order(n);
  std::iota(order.begin(), order.end(), ItemIndex{0});
  std::stable_sort(order.begin(), order.end(), [&](ItemIndex a, ItemIndex b) { return popularity[a] > popularity[b]; });
  std::vector<int> q(n, 0);
  const auto sizes = quartile_sizes(n);
  std::size_t pos = 0;
  for (int k = 0; k < 4; ++k)
    for (std::size_t i = 0; i < sizes[k]; ++i) q[order[pos++]] = k;
  return q;
}

/// Fraction of all recommendation slots taken by each popularity quartile.
inline std::array<double, 4> quartile_representation(const RecLists& recs,
                                                     const std::vector<std::uint64_t>& popularity) {
  const auto q = popularity_quartiles(popularity);
  std::array<double, 4> counts{};
  double slots = 0.0;
  for (const auto& list : recs)
    for (ItemIndex i : list) {
      counts[q.at(i)] += 1.0;
      slots += 1.0;
    }
  if (slots > 0)
    for (double& c : counts) c /= slots;
  return counts;
}

/// Mean Gaussian potential (not its log) between normalized rows.
inline double rbf_statistic(const Tensor& table, double tau, std::size_t pair_budget, Rng& rng) {
  if (table.rows() < 2) throw Error("rbf_statistic: need at least 2 rows");
  const Tensor unit = normalized_rows(table);
  return mean_potential(unit, sample_pairs(unit.rows(), pair_budget, rng), tau);
}

/// Largest cosine similarity of every row to any other row, computed exactly
/// in row blocks.
inline std::vector<double> nn_cosines(const Tensor& table, std::size_t block = 512) {
  const std::size_t n = table.rows();
  if (n < 2) throw Error("nn_cosine_histogram: need at least 2 rows");
  const Tensor unit = normalized_rows(table);
  std::vector<double> best(n, -INFINITY);
  for (std::size_t lo = 0; lo < n; lo += block) {
    const std::size_t hi = std::min(n, lo + block);
    for (std::size_t j = 0; j < n; ++j) {
      auto ej = unit.row_span(j);
      for (std::size_t i = lo; i < hi; ++i) {
        if (i == j) continue;
        best[i] = std::max(best[i], std::clamp(dot(unit.row_span(i), ej), -1.0, 1.0));
      }
    }
  }
  return best;
}

struct Histogram {
  double lo = -1.0, hi = 1.0;
  std::vector<std::uint64_t> counts;

  double bin_left(std::size_t b) const { return lo + (hi - lo) * static_cast<double>(b) / counts.size(); }
  double bin_right(std::size_t b) const { return lo + (hi - lo) * static_cast<double>(b + 1) / counts.size(); }
};

/// Equal-width bins over [-1, 1]; 1 falls in the last bin.
inline Histogram histogram(const std::vector<double>& values, std::size_t bins) {
  if (bins == 0) throw Error("histogram: need at least one bin");
  Histogram h;
  h.counts.assign(bins, 0);
  for (double v : values) {
    auto b = static_cast<std::ptrdiff_t>(std::floor((v + 1.0) / 2.0 * static_cast<double>(bins)));
    b = std::clamp<std::ptrdiff_t>(b, 0, static_cast<std::ptrdiff_t>(bins) - 1);
    ++h.counts[static_cast<std::size_t>(b)];
  }
  return h;
}

inline Histogram nn_cosine_histogram(const Tensor& table, std::size_t bins) { return histogram(nn_cosines(table), bins); }

inline std::string histogram_csv(const Histogram& h) {
  std::ostringstream out;
  out.precision(17);
  out << "bin_left,bin_right,count\n";
  for (std::size_t b = 0; b < h.counts.size(); ++b) out << h.bin_left(b) << ',' << h.bin_right(b) << ',' << h.counts[b] << '\n';
  return out.str();
}

struct MetricsReport {
  std::string split;
  std::size_t k = 0;
  std::size_t n_examples = 0;
  double hit_rate = 0.0;
  double coverage = 0.0;
  double arp = 0.0;
  std::optional<double> iou_vs_bigram;
  std::array<double, 4> quartiles{};
  std::optional<double> rbf;
  double rbf_tau = 2.0;
  std::optional<Histogram> nn_histogram;
};

/// Everything that only needs the lists; embedding metrics are filled by the caller.
inline MetricsReport list_metrics(const std::string& split, const RecLists& recs, const std::vector<ItemIndex>& targets,
                                  const std::vector<std::uint64_t>& popularity, std::size_t k,
                                  const RecLists* bigram = nullptr) {
  MetricsReport r;
  r.split = split;
  r.k = k;
  r.n_examples = recs.size();
  r.hit_rate = hit_rate(recs, targets);
  r.coverage = coverage(recs, popularity.size());
  r.arp = arp(recs, popularity);
  if (bigram) r.iou_vs_bigram = iou_vs_bigram(recs, *bigram);
  r.quartiles = quartile_representation(recs, popularity);
  return r;
}

inline nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json j{{"split", r.split},       {"k", r.k},         {"n_examples", r.n_examples},
                   {"hit_rate", r.hit_rate}, {"coverage", r.coverage}, {"arp", r.arp},
                   {"quartiles", r.quartiles}};
  j["iou_vs_bigram"] = r.iou_vs_bigram ? nlohmann::json(*r.iou_vs_bigram) : nlohmann::json(nullptr);
  j["rbf"] = r.rbf ? nlohmann::json(*r.rbf) : nlohmann::json(nullptr);
  j["rbf_tau"] = r.rbf_tau;
  if (r.nn_histogram) j["nn_cosine_histogram"] = r.nn_histogram->counts;
  return j;
}

inline MetricsReport report_from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.split = j.at("split");
  r.k = j.at("k");
  r.n_examples = j.at("n_examples");
  r.hit_rate = j.at("hit_rate");
  r.coverage = j.at("coverage");
  r.arp = j.at("arp");
  r.quartiles = j.at("quartiles");
  if (!j.at("iou_vs_bigram").is_null()) r.iou_vs_bigram = j.at("iou_vs_bigram").get<double>();
  if (!j.at("rbf").is_null()) r.rbf = j.at("rbf").get<double>();
  r.rbf_tau = j.value("rbf_tau", 2.0);
  if (j.contains("nn_cosine_histogram")) {
    Histogram h;
    h.counts = j.at("nn_cosine_histogram").get<std::vector<std::uint64_t>>();
    r.nn_histogram = h;
  }
  return r;
}

/// One metric per row: split,metric,value.
inline std::string metrics_csv(const std::vector<MetricsReport>& reports, bool header = true) {
  std::ostringstream out;
  out.precision(17);
  if (header) out << "split,metric,value\n";
  for (const auto& r : reports) {
    auto row = [&](const std::string& name, double v) { out << r.split << ',' << name << ',' << v << '\n'; };
    row("k", static_cast<double>(r.k));
    row("hit_rate", r.hit_rate);
    row("coverage", r.coverage);
    row("arp", r.arp);
    if (r.iou_vs_bigram) row("iou_vs_bigram", *r.iou_vs_bigram);
    for (int q = 0; q < 4; ++q) row("quartile_" + std::to_string(q + 1), r.quartiles[q]);
    if (r.rbf) row("rbf", *r.rbf);
  }
  return out.str();
}

}  // namespace noisyrec
