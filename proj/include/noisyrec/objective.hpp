#pragma once

// Batch training objective for the vanilla and the stochastic variants.
//
// All randomness of one batch (vMF draws per node, fake targets, uniformity
// pairs) is sampled up front into a Realization; the loss is then a
// deterministic function of the parameters.

#include <cstdint>
#include <span>
#include <vector>

#include "noisyrec/autograd.hpp"
#include "noisyrec/corpus.hpp"
#include "noisyrec/gradcheck.hpp"
#include "noisyrec/params.hpp"
#include "noisyrec/rng.hpp"
#include "noisyrec/session_graph.hpp"
#include "noisyrec/srgnn.hpp"
#include "noisyrec/stochastic.hpp"

namespace noisyrec {

struct NoisyConfig {
  bool enabled = false;
  bool densify = true;
  double densify_kappa = 250.0;
  FakeTargetConfig fake;
  UniformityConfig unif;
};

struct Realization {
  std::vector<std::vector<VmfDraw>> draws;  // per example, per node; empty when densification is off
  std::vector<SoftTargets> targets;          // empty for the vanilla objective
  std::vector<IndexPair> pairs;              // empty when the uniformity term is off
};

namespace stream {
inline constexpr std::uint64_t shuffle = 0;
inline constexpr std::uint64_t densify = 1;
inline constexpr std::uint64_t fake = 2;
inline constexpr std::uint64_t pairs = 3;
}  // namespace stream

inline bool densify_active(const NoisyConfig& nc) { return nc.enabled && nc.densify && !densify_disabled(nc.densify_kappa); }
inline bool uniformity_active(const NoisyConfig& nc) { return nc.enabled && nc.unif.lambda != 0.0; }

/// Samples the noise of one batch. `ids` are stable example ids (positions in
/// the training split) used to derive per-example streams.
inline Realization sample_realization(const ParamSet& params, const ModelConfig& cfg, const NoisyConfig& nc,
                                      std::span<const SplitExample> batch, std::span<const std::size_t> ids,
                                      std::span<const SessionGraph> graphs, std::uint64_t seed, std::uint64_t epoch,
                                      std::uint64_t batch_index) {
  Realization out;
  if (!nc.enabled) return out;
  if (!cfg.spherical) throw Error("stochastic variant requires spherical embeddings");
  const Tensor unit = normalized_rows(params.value("embedding"));
  if (densify_active(nc)) {
    for (std::size_t e = 0; e < batch.size(); ++e) {
      Rng rng = Rng::derive(seed, ids[e], epoch, stream::densify);
      std::vector<VmfDraw> node_draws;
      for (ItemIndex item : graphs[e].nodes) node_draws.push_back(vmf_draw(unit.row_span(item), nc.densify_kappa, rng));
      out.draws.push_back(std::move(node_draws));
    }
  }
  for (std::size_t e = 0; e < batch.size(); ++e) {
    Rng rng = Rng::derive(seed, ids[e], epoch, stream::fake);
    out.targets.push_back(sample_fake_targets(batch[e].target, unit, nc.fake, rng));
  }
  if (uniformity_active(nc) && cfg.n_items >= 2) {
    Rng rng = Rng::derive(seed, batch_index, epoch, stream::pairs);
    out.pairs = sample_pairs(cfg.n_items, nc.unif.pair_budget, rng);
  }
  return out;
}

/// Node inputs w * mu + offset with the draw held fixed.
inline ad::Var densified_nodes(const ad::Var& mu, const std::vector<VmfDraw>& draws) {
  ad::Tape& t = mu.tape();
  const std::size_t n = mu.rows(), d = mu.cols();
  Tensor w = Tensor::matrix(n, 1);
  Tensor off = Tensor::matrix(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    w(r, 0) = draws[r].w;
    std::copy(draws[r].offset.begin(), draws[r].offset.end(), off.row_span(r).begin());
  }
  return ad::add(ad::mul(mu, t.constant(std::move(w), "vmf_w")), t.constant(std::move(off), "vmf_offset"));
}

/// Mean loss over one batch.
inline ad::Var batch_loss(ad::Tape& tape, ParamSet& params, const ModelConfig& cfg, const NoisyConfig& nc,
                          std::span<const SplitExample> batch, std::span<const SessionGraph> graphs,
                          const Realization& real) {
  if (batch.empty()) throw Error("batch_loss: empty batch");
  ModelVars m = bind_model(tape, params, cfg);
  std::vector<ad::Var> sessions;
  sessions.reserve(batch.size());
  for (std::size_t e = 0; e < batch.size(); ++e) {
    if (real.draws.empty()) {
      sessions.push_back(session_embedding(m, cfg, graphs[e]));
    } else {
      ad::Var nodes = densified_nodes(embed(m.items, graphs[e].nodes), real.draws[e]);
      sessions.push_back(session_embedding(m, cfg, graphs[e], &nodes));
    }
  }
  ad::Var probs = score_items(ad::concat_rows(sessions), m.items, cfg.spherical, cfg.score_scale);

  if (!nc.enabled) {
    if (cfg.rec_loss == RecLoss::bce) {
      std::vector<ItemIndex> targets;
      for (const auto& ex : batch) targets.push_back(ex.target);
      return ce_loss(probs, targets);
    }
    std::vector<SoftTargets> one_hot;
    for (const auto& ex : batch) one_hot.push_back(SoftTargets::one_hot(ex.target));
    return soft_ce_loss(probs, one_hot);
  }
  ad::Var rec = soft_ce_loss(probs, real.targets);
  if (real.pairs.empty()) return rec;
  return total_loss(rec, uniformity_loss(m.items, real.pairs, nc.unif.tau), nc.unif.lambda);
}

inline std::vector<SessionGraph> build_graphs(std::span<const SplitExample> batch) {
  std::vector<SessionGraph> g;
  g.reserve(batch.size());
  for (const auto& ex : batch) g.push_back(build_graph(ex.prefix));
  return g;
}

/// Loss builder with a frozen realization, suitable for grad_check.
inline LossBuilder frozen_objective(const ModelConfig& cfg, const NoisyConfig& nc, std::vector<SplitExample> batch,
                                    Realization real) {
  auto graphs = build_graphs(batch);
  return [=](ad::Tape& t, ParamSet& p) { return batch_loss(t, p, cfg, nc, batch, graphs, real); };
}

}  // namespace noisyrec
