#pragma once

// SR-GNN backbone: item embeddings, gated graph propagation over the session
// graph, soft-attention readout and softmax scoring over the catalog.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "noisyrec/autograd.hpp"
#include "noisyrec/corpus.hpp"
#include "noisyrec/params.hpp"
#include "noisyrec/rng.hpp"
#include "noisyrec/session_graph.hpp"
#include "noisyrec/tensor.hpp"

namespace noisyrec {

enum class RecLoss { bce, ce };

inline double default_score_scale(bool spherical) { return spherical ? 12.0 : 1.0; }

struct ModelConfig {
  std::size_t n_items = 0;
  std::size_t dim = 100;
  std::size_t steps = 1;
  bool spherical = false;
  double score_scale = 1.0;
  RecLoss rec_loss = RecLoss::bce;
};

inline void validate(const ModelConfig& cfg) {
  if (cfg.n_items < 1) throw Error("model: empty catalog");
  if (cfg.dim < 2) throw Error("model: dimension must be >= 2");
  if (cfg.steps < 1) throw Error("model: propagation steps must be >= 1");
  if (!std::isfinite(cfg.score_scale)) throw Error("model: score scale must be finite");
}

/// All weights and the embedding table drawn uniform in [-1/sqrt(d), 1/sqrt(d)].
inline ParamSet init_params(const ModelConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  const std::size_t d = cfg.dim;
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  Rng rng = Rng::derive(seed, 0x5eed);
  ParamSet p;
  p.add("embedding", uniform_tensor({cfg.n_items, d}, bound, rng));
  p.add("ggnn.H", uniform_tensor({d, 2 * d}, bound, rng));
  p.add("ggnn.b", uniform_tensor({1, d}, bound, rng));
  for (const char* n : {"ggnn.W_z", "ggnn.U_z", "ggnn.W_r", "ggnn.U_r", "ggnn.W_o", "ggnn.U_o"})
    p.add(n, uniform_tensor({d, d}, bound, rng));
  p.add("readout.W_1", uniform_tensor({d, d}, bound, rng));
  p.add("readout.W_2", uniform_tensor({d, d}, bound, rng));
  p.add("readout.c", uniform_tensor({1, d}, bound, rng));
  p.add("readout.q", uniform_tensor({1, d}, bound, rng));
  p.add("readout.W_3", uniform_tensor({d, 2 * d}, bound, rng));
  return p;
}

struct GgnnWeights {
  ad::Var H, b, W_z, U_z, W_r, U_r, W_o, U_o;
};

struct ReadoutWeights {
  ad::Var W_1, W_2, c, q, W_3;
};

/// Model parameters bound onto one tape.
struct ModelVars {
  ad::Var table;   // N x d as stored
  ad::Var items;   // table, or its row-normalized form when spherical
  GgnnWeights ggnn;
  ReadoutWeights readout;
};

inline ModelVars bind_model(ad::Tape& tape, ParamSet& p, const ModelConfig& cfg) {
  ModelVars m;
  m.table = p.bind(tape, "embedding");
  m.items = cfg.spherical ? ad::normalize_rows(m.table) : m.table;
  m.ggnn = {p.bind(tape, "ggnn.H"),   p.bind(tape, "ggnn.b"),   p.bind(tape, "ggnn.W_z"), p.bind(tape, "ggnn.U_z"),
            p.bind(tape, "ggnn.W_r"), p.bind(tape, "ggnn.U_r"), p.bind(tape, "ggnn.W_o"), p.bind(tape, "ggnn.U_o")};
  m.readout = {p.bind(tape, "readout.W_1"), p.bind(tape, "readout.W_2"), p.bind(tape, "readout.c"),
               p.bind(tape, "readout.q"), p.bind(tape, "readout.W_3")};
  return m;
}

inline void check_items(std::span<const ItemIndex> items, std::size_t n_items) {
  for (ItemIndex i : items)
    if (i >= n_items) throw Error("item index " + std::to_string(i) + " out of range");
}

/// Rows of `items` for the given indices (`items` already normalized if spherical).
inline ad::Var embed(const ad::Var& items, std::span<const ItemIndex> idx) {
  check_items(idx, items.rows());
  return ad::gather_rows(items, std::vector<std::size_t>(idx.begin(), idx.end()));
}

/// Plain-value form: gathered rows, each divided by its norm when spherical.
inline Tensor embed(const Tensor& table, std::span<const ItemIndex> idx, bool spherical) {
  check_items(idx, table.rows());
  Tensor out = Tensor::matrix(idx.size(), table.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    auto src = table.row_span(idx[r]);
    std::copy(src.begin(), src.end(), out.row_span(r).begin());
  }
  return spherical ? normalized_rows(out) : out;
}

inline ad::Var linear(const ad::Var& x, const ad::Var& w) { return ad::matmul(x, w, false, true); }

/// Gated propagation of node states over the session graph.
inline ad::Var ggnn_forward(const SessionGraph& g, ad::Var states, const GgnnWeights& w, std::size_t steps) {
  ad::Tape& t = states.tape();
  ad::Var a_in = t.constant(g.a_in, "a_in");
  ad::Var a_out = t.constant(g.a_out, "a_out");
  for (std::size_t s = 0; s < steps; ++s) {
    ad::Var msg = ad::concat_cols(ad::matmul(a_in, states), ad::matmul(a_out, states));
    ad::Var a = ad::add(linear(msg, w.H), w.b);
    ad::Var z = ad::sigmoid(ad::add(linear(a, w.W_z), linear(states, w.U_z)));
    ad::Var r = ad::sigmoid(ad::add(linear(a, w.W_r), linear(states, w.U_r)));
    ad::Var cand = ad::tanh(ad::add(linear(a, w.W_o), linear(ad::mul(r, states), w.U_o)));
    states = ad::add(ad::mul(ad::one_minus(z), states), ad::mul(z, cand));
  }
  return states;
}

/// Session embedding (1 x d) from the last clicked item and an attention-weighted
/// sum over all prefix positions.
inline ad::Var readout(const ad::Var& states, const SessionGraph& g, const ReadoutWeights& w) {
  if (g.last_node >= states.rows()) throw Error("readout: last node out of range");
  ad::Var v = ad::gather_rows(states, g.alias);
  ad::Var last = ad::gather_rows(states, {g.last_node});
  ad::Var gate = ad::sigmoid(ad::add(linear(v, w.W_2), ad::add(linear(last, w.W_1), w.c)));
  ad::Var alpha = ad::matmul(gate, w.q, false, true);     // positions x 1
  ad::Var global = ad::matmul(alpha, v, true, false);     // 1 x d
  return linear(ad::concat_cols(last, global), w.W_3);
}

/// Session embedding for one prefix; `node_inputs` overrides the embedded
/// node rows (used for densified inputs).
inline ad::Var session_embedding(const ModelVars& m, const ModelConfig& cfg, const SessionGraph& g,
                                 const ad::Var* node_inputs = nullptr) {
  ad::Var nodes = node_inputs ? *node_inputs : embed(m.items, g.nodes);
  return readout(ggnn_forward(g, nodes, m.ggnn, cfg.steps), g, m.readout);
}

/// Probabilities over all items, one row per session row of `sessions`.
inline ad::Var score_items(const ad::Var& sessions, const ad::Var& items, bool spherical, double scale) {
  ad::Var s = spherical ? ad::normalize_rows(sessions) : sessions;
  return ad::softmax_rows(ad::scale(ad::matmul(s, items, false, true), scale));
}

/// Plain-value scoring of one session vector against a stored table.
inline std::vector<double> score_items(std::span<const double> s, const Tensor& table, bool spherical, double scale) {
  std::vector<double> sv(s.begin(), s.end());
  if (spherical) {
    const double n = std::max(l2_norm(sv), 1e-12);
    for (double& v : sv) v /= n;
  }
  const Tensor items = spherical ? normalized_rows(table) : table;
  std::vector<double> logits(items.rows());
  for (std::size_t j = 0; j < items.rows(); ++j) logits[j] = scale * dot(sv, items.row_span(j));
  const double top = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double& v : logits) z += (v = std::exp(v - top));
  for (double& v : logits) v /= z;
  return logits;
}

inline constexpr double kBceFloor = 1e-12;

/// Binary cross-entropy over all items against the one-hot target.
inline double ce_loss(std::span<const double> probs, ItemIndex target) {
  if (target >= probs.size()) throw Error("ce_loss: target out of range");
  double s = 0.0;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    const double p = std::clamp(probs[j], kBceFloor, 1.0 - kBceFloor);
    s -= j == target ? std::log(p) : std::log(1.0 - p);
  }
  return s;
}

/// Batch mean of ce_loss; `probs` is B x N.
inline ad::Var ce_loss(const ad::Var& probs, std::span<const ItemIndex> targets) {
  const std::size_t b = probs.rows(), n = probs.cols();
  if (targets.size() != b) throw Error("ce_loss: one target per row required");
  Tensor y = Tensor::matrix(b, n);
  for (std::size_t r = 0; r < b; ++r) {
    if (targets[r] >= n) throw Error("ce_loss: target out of range");
    y(r, targets[r]) = 1.0;
  }
  ad::Tape& t = probs.tape();
  ad::Var p = ad::clamp(probs, kBceFloor, 1.0 - kBceFloor);
  ad::Var yv = t.constant(y, "one_hot");
  ad::Var pos = ad::sum(ad::mul(ad::log(p), yv));
  ad::Var neg = ad::sum(ad::mul(ad::log(ad::one_minus(p)), ad::one_minus(yv)));
  return ad::scale(ad::add(pos, neg), -1.0 / static_cast<double>(b));
}

using RecommendationList = std::vector<ItemIndex>;

/// Indices of the K largest probabilities; ties go to the smaller index.
inline RecommendationList recommend(std::span<const double> probs, std::size_t k) {
  if (k > probs.size()) throw Error("recommend: K exceeds catalog size");
  std::vector<ItemIndex> idx(probs.size());
  std::iota(idx.begin(), idx.end(), ItemIndex{0});
  auto better = [&](ItemIndex a, ItemIndex b) { return probs[a] > probs[b] || (probs[a] == probs[b] && a < b); };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), better);
  idx.resize(k);
  return idx;
}

/// Probability rows for a chunk of prefixes; no gradients are kept.
inline Tensor predict(ParamSet& params, const ModelConfig& cfg, std::span<const SplitExample> examples) {
  ad::Tape tape;
  ModelVars m = bind_model(tape, params, cfg);
  std::vector<ad::Var> sessions;
  sessions.reserve(examples.size());
  for (const auto& ex : examples) sessions.push_back(session_embedding(m, cfg, build_graph(ex.prefix)));
  return score_items(ad::concat_rows(sessions), m.items, cfg.spherical, cfg.score_scale).value();
}

/// Top-K lists for every example, scored in chunks.
inline std::vector<RecommendationList> recommend_all(ParamSet& params, const ModelConfig& cfg,
                                                     std::span<const SplitExample> examples, std::size_t k,
                                                     std::size_t chunk = 256) {
  std::vector<RecommendationList> out;
  out.reserve(examples.size());
  for (std::size_t lo = 0; lo < examples.size(); lo += chunk) {
    const std::size_t hi = std::min(examples.size(), lo + chunk);
    Tensor probs = predict(params, cfg, examples.subspan(lo, hi - lo));
    for (std::size_t r = 0; r < probs.rows(); ++r) out.push_back(recommend(probs.row_span(r), k));
  }
  return out;
}

}  // namespace noisyrec
