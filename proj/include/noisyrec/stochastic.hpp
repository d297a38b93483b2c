#pragma once

// Stochastic training component: Gaussian-potential uniformity on the unit
// sphere, von Mises-Fisher draws of dense user interest, and fake targets
// that move part of the target probability mass onto similar unseen items.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "noisyrec/autograd.hpp"
#include "noisyrec/corpus.hpp"
#include "noisyrec/rng.hpp"
#include "noisyrec/tensor.hpp"

namespace noisyrec {

// -- uniformity --------------------------------------------------------------

struct UniformityConfig {
  double tau = 2.0;
  std::size_t pair_budget = 4096;
  double lambda = 0.5;
};

inline double rbf_potential(std::span<const double> a, std::span<const double> b, double tau) {
  if (!(tau > 0.0)) throw Error("rbf_potential: tau must be > 0");
  return std::exp(-tau * squared_distance(a, b));
}

using IndexPair = std::pair<std::size_t, std::size_t>;

/// Every unordered pair (j < k) of n rows.
inline std::vector<IndexPair> all_pairs(std::size_t n) {
  std::vector<IndexPair> out;
  out.reserve(n * (n - 1) / 2);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = j + 1; k < n; ++k) out.emplace_back(j, k);
  return out;
}

/// `budget` uniformly drawn unordered pairs of distinct rows (with replacement
/// across draws); the exact pair set once the budget covers all of them.
inline std::vector<IndexPair> sample_pairs(std::size_t n, std::size_t budget, Rng& rng) {
  if (n < 2) throw Error("sample_pairs: need at least 2 rows");
  const std::size_t total = n * (n - 1) / 2;
  if (budget >= total) return all_pairs(n);
  std::vector<IndexPair> out;
  out.reserve(budget);
  for (std::size_t i = 0; i < budget; ++i) {
    const auto j = static_cast<std::size_t>(rng.index(n));
    auto k = static_cast<std::size_t>(rng.index(n - 1));
    if (k >= j) ++k;
    out.emplace_back(std::min(j, k), std::max(j, k));
  }
  return out;
}

inline double mean_potential(const Tensor& rows, const std::vector<IndexPair>& pairs, double tau) {
  if (pairs.empty()) throw Error("mean_potential: no pairs");
  double s = 0.0;
  for (auto [j, k] : pairs) s += rbf_potential(rows.row_span(j), rows.row_span(k), tau);
  return s / static_cast<double>(pairs.size());
}

/// log E[exp(-tau ||e_j - e_k||^2)] over sampled pairs of `rows`.
inline double uniformity_loss(const Tensor& rows, double tau, std::size_t pair_budget, Rng& rng) {
  if (rows.rows() < 2) throw Error("uniformity_loss: need at least 2 rows");
  return std::log(mean_potential(rows, sample_pairs(rows.rows(), pair_budget, rng), tau));
}

/// Differentiable form over a fixed pair set.
inline ad::Var uniformity_loss(const ad::Var& rows, const std::vector<IndexPair>& pairs, double tau) {
  if (rows.rows() < 2) throw Error("uniformity_loss: need at least 2 rows");
  std::vector<std::size_t> first, second;
  first.reserve(pairs.size());
  second.reserve(pairs.size());
  for (auto [j, k] : pairs) {
    first.push_back(j);
    second.push_back(k);
  }
  ad::Var diff = ad::sub(ad::gather_rows(rows, std::move(first)), ad::gather_rows(rows, std::move(second)));
  ad::Var sq = ad::sum_rows(ad::mul(diff, diff));
  return ad::log(ad::mean(ad::exp(ad::scale(sq, -tau))));
}

// -- von Mises-Fisher ----------------------------------------------------------

struct VmfParams {
  std::vector<double> mu;  // unit mean direction
  double kappa = 0.0;
};

/// Cosine to the mean direction, by Wood's rejection scheme.
inline double sample_vmf_cosine(double kappa, std::size_t dim, Rng& rng) {
  if (!(kappa >= 0.0) || !std::isfinite(kappa)) throw Error("vmf_sample: kappa must be finite and >= 0");
  if (dim < 2) throw Error("vmf_sample: dimension must be >= 2");
  const double dm1 = static_cast<double>(dim - 1);
  // (-2k + sqrt(4k^2 + (d-1)^2)) / (d-1), rearranged to avoid cancellation
  const double b = dm1 / (2.0 * kappa + std::sqrt(4.0 * kappa * kappa + dm1 * dm1));
  const double x0 = (1.0 - b) / (1.0 + b);
  const double c = kappa * x0 + dm1 * std::log(1.0 - x0 * x0);
  for (;;) {
    const double z = rng.beta(dm1 / 2.0, dm1 / 2.0);
    const double w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
    const double u = rng.uniform_open();
    if (kappa * w + dm1 * std::log(1.0 - x0 * w) - c >= std::log(u)) return w;
  }
}

/// Uniform unit vector orthogonal to the unit vector `mu`.
inline std::vector<double> sample_tangent(std::span<const double> mu, Rng& rng) {
  std::vector<double> v(mu.size());
  for (;;) {
    for (double& x : v) x = rng.normal();
    const double p = dot(v, mu);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= p * mu[i];
    const double n = l2_norm(v);
    if (n > 1e-10) {
      for (double& x : v) x /= n;
      return v;
    }
  }
}

/// One draw from vMF(mu, kappa) on the unit sphere.
inline std::vector<double> vmf_sample(const VmfParams& params, Rng& rng) {
  const std::size_t dim = params.mu.size();
  if (std::abs(l2_norm(params.mu) - 1.0) > 1e-9) throw Error("vmf_sample: mu must have unit norm");
  const double w = sample_vmf_cosine(params.kappa, dim, rng);
  const auto t = sample_tangent(params.mu, rng);
  const double s = std::sqrt(std::max(0.0, 1.0 - w * w));
  std::vector<double> x(dim);
  for (std::size_t i = 0; i < dim; ++i) x[i] = w * params.mu[i] + s * t[i];
  const double n = l2_norm(x);
  for (double& v : x) v /= n;
  return x;
}

/// Draw decomposed as x = w * mu + offset, with offset = sqrt(1 - w^2) * tangent.
/// Holding (w, offset) fixed gives a differentiable path from mu to the draw.
struct VmfDraw {
  double w = 1.0;
  std::vector<double> offset;
};

inline VmfDraw vmf_draw(std::span<const double> mu, double kappa, Rng& rng) {
  VmfDraw d;
  d.w = sample_vmf_cosine(kappa, mu.size(), rng);
  d.offset = sample_tangent(mu, rng);
  const double s = std::sqrt(std::max(0.0, 1.0 - d.w * d.w));
  for (double& v : d.offset) v *= s;
  return d;
}

inline bool densify_disabled(double kappa) { return std::isinf(kappa); }

/// Replaces each unit row by an independent vMF draw centred on it.
/// kappa = +infinity switches the component off (rows returned unchanged).
inline Tensor densify_prefix(const Tensor& unit_rows, double kappa, Rng& rng) {
  if (densify_disabled(kappa)) return unit_rows;
  Tensor out = unit_rows;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto x = vmf_sample(VmfParams{{unit_rows.row_span(r).begin(), unit_rows.row_span(r).end()}, kappa}, rng);
    std::copy(x.begin(), x.end(), out.row_span(r).begin());
  }
  return out;
}

// -- fake targets ------------------------------------------------------------

struct FakeTargetConfig {
  double alpha = 0.1;
  double beta = 0.0;
  std::size_t p_count = 10;
  double kappa = 250.0;
};

/// Sparse target distribution; the true target is always the first entry.
struct SoftTargets {
  std::vector<std::pair<ItemIndex, double>> entries;

  double sum() const {
    double s = 0.0;
    for (const auto& e : entries) s += e.second;
    return s;
  }
  double weight(ItemIndex item) const {
    for (const auto& e : entries)
      if (e.first == item) return e.second;
    return 0.0;
  }
  static SoftTargets one_hot(ItemIndex item) { return SoftTargets{{{item, 1.0}}}; }
};

/// Samples up to P fake targets among items whose cosine with the true target
/// is at least beta, without replacement and with probability proportional to
/// exp(kappa * cosine), then assigns them alpha of the mass in the same
/// proportions. `unit_table` rows must be unit norm. Infinite kappa takes the
/// most similar candidates in order and gives alpha to the closest.
inline SoftTargets sample_fake_targets(ItemIndex true_target, const Tensor& unit_table, const FakeTargetConfig& cfg,
                                       Rng& rng) {
  if (!(cfg.alpha >= 0.0 && cfg.alpha < 1.0)) throw Error("sample_fake_targets: alpha must be in [0, 1)");
  if (true_target >= unit_table.rows()) throw Error("sample_fake_targets: target out of range");
  if (cfg.p_count == 0 || cfg.alpha == 0.0) return SoftTargets::one_hot(true_target);

  const auto et = unit_table.row_span(true_target);
  std::vector<ItemIndex> cand;
  std::vector<double> cos;
  for (std::size_t j = 0; j < unit_table.rows(); ++j) {
    if (j == true_target) continue;
    const double c = dot(unit_table.row_span(j), et);
    if (c >= cfg.beta) {
      cand.push_back(static_cast<ItemIndex>(j));
      cos.push_back(c);
    }
  }
  if (cand.empty()) return SoftTargets::one_hot(true_target);

  // exp(kappa * diff) for diff <= 0, including its kappa -> inf limit
  auto tilt = [&](double diff) { return std::isinf(cfg.kappa) ? (diff == 0.0 ? 1.0 : 0.0) : std::exp(cfg.kappa * diff); };
  const double top = *std::max_element(cos.begin(), cos.end());
  std::vector<double> weight(cand.size());
  for (std::size_t i = 0; i < cand.size(); ++i) weight[i] = tilt(cos[i] - top);

  const std::size_t take = std::min(cfg.p_count, cand.size());
  std::vector<std::size_t> picked;
  picked.reserve(take);
  std::vector<bool> used(cand.size(), false);
  for (std::size_t draw = 0; draw < take; ++draw) {
    double total = 0.0;
    for (std::size_t i = 0; i < cand.size(); ++i)
      if (!used[i]) total += weight[i];
    std::size_t choice = cand.size();
    if (total == 0.0) {
      for (std::size_t i = 0; i < cand.size(); ++i)
        if (!used[i] && (choice == cand.size() || cos[i] > cos[choice])) choice = i;
      used[choice] = true;
      picked.push_back(choice);
      continue;
    }
    double u = rng.uniform() * total;
    for (std::size_t i = 0; i < cand.size(); ++i) {
      if (used[i]) continue;
      choice = i;  // falls back to the last unused item on rounding
      if (u < weight[i]) break;
      u -= weight[i];
    }
    used[choice] = true;
    picked.push_back(choice);
  }

  double fake_top = -std::numeric_limits<double>::infinity();
  for (std::size_t i : picked) fake_top = std::max(fake_top, cos[i]);
  double z = 0.0;
  for (std::size_t i : picked) z += tilt(cos[i] - fake_top);
  SoftTargets out;
  out.entries.emplace_back(true_target, 0.0);
  double fake_mass = 0.0;
  for (std::size_t i : picked) {
    const double y = cfg.alpha * tilt(cos[i] - fake_top) / z;
    out.entries.emplace_back(cand[i], y);
    fake_mass += y;
  }
  out.entries.front().second = 1.0 - fake_mass;
  return out;
}

// -- losses ------------------------------------------------------------------

inline constexpr double kProbFloor = 1e-12;

/// -sum_j y*_j log(max(p_j, 1e-12))
inline double soft_ce_loss(std::span<const double> probs, const SoftTargets& targets) {
  double s = 0.0;
  for (const auto& [j, y] : targets.entries) s -= y * std::log(std::max(probs[j], kProbFloor));
  return s;
}

/// Batched differentiable form: `probs` is B x N, one SoftTargets per row;
/// returns the batch mean.
inline ad::Var soft_ce_loss(const ad::Var& probs, const std::vector<SoftTargets>& targets) {
  const std::size_t b = probs.rows(), n = probs.cols();
  if (targets.size() != b) throw Error("soft_ce_loss: one target set per row required");
  Tensor y = Tensor::matrix(b, n);
  for (std::size_t r = 0; r < b; ++r)
    for (const auto& [j, w] : targets[r].entries) y(r, j) += w;
  ad::Tape& tape = probs.tape();
  ad::Var logp = ad::log(ad::clamp(probs, kProbFloor, 1.0));
  return ad::scale(ad::sum(ad::mul(logp, tape.constant(std::move(y), "soft_targets"))), -1.0 / static_cast<double>(b));
}

inline double total_loss(double rec_loss, double unif_loss, double lambda) { return rec_loss + lambda * unif_loss; }

inline ad::Var total_loss(const ad::Var& rec_loss, const ad::Var& unif_loss, double lambda) {
  return ad::add(rec_loss, ad::scale(unif_loss, lambda));
}

}  // namespace noisyrec
