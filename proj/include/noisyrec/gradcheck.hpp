#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "noisyrec/autograd.hpp"
#include "noisyrec/params.hpp"

namespace noisyrec {

/// Builds a scalar loss on the given tape, binding whatever it needs from `params`.
using LossBuilder = std::function<ad::Var(ad::Tape&, ParamSet&)>;

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

struct GradCheckReport {
  double loss = 0.0;
  double max_rel_error = 0.0;
  std::vector<GradCheckEntry> entries;
  std::vector<std::string> failing;  // parameters whose error exceeds tolerance
  bool passed() const { return failing.empty(); }
};

/// |a - n| / max(|a|, |n|, floor); the floor keeps exact zeros comparable.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Forward + backward once; leaves the gradients in `params`.
inline double forward_backward(const LossBuilder& build, ParamSet& params) {
  params.zero_grad();
  ad::Tape tape;
  ad::Var loss = build(tape, params);
  tape.backward(loss);
  return loss.value().item();
}

inline double forward_only(const LossBuilder& build, ParamSet& params) {
  ad::Tape tape;
  return build(tape, params).value().item();
}

/// Central differences against the taped gradient, entry by entry.
/// If `analytic_override` is set it replaces the taped gradients (negative controls).
inline GradCheckReport grad_check(const LossBuilder& build, ParamSet& params, double tolerance, double h = 1e-5,
                                  const std::function<void(ParamSet&)>& analytic_override = nullptr) {
  GradCheckReport report;
  report.loss = forward_backward(build, params);
  if (analytic_override) analytic_override(params);
  for (auto& p : params.entries()) {
    const Tensor analytic = p.grad;
    GradCheckEntry entry{p.name};
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double orig = p.value[i];
      p.value[i] = orig + h;
      const double up = forward_only(build, params);
      p.value[i] = orig - h;
      const double down = forward_only(build, params);
      p.value[i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      entry.max_rel_error = std::max(entry.max_rel_error, relative_error(analytic[i], numeric));
      entry.max_abs_error = std::max(entry.max_abs_error, std::abs(analytic[i] - numeric));
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    if (entry.max_rel_error > tolerance) report.failing.push_back(p.name);
    report.entries.push_back(entry);
  }
  params.zero_grad();
  return report;
}

}  // namespace noisyrec
