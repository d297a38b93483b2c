#pragma once

// Named parameter storage, Adam, and the binary checkpoint format.
//
// Checkpoint layout: one JSON header line terminated by '\n', followed by the
// parameter values as little-endian IEEE-754 doubles, concatenated in header
// order. The header carries the FNV-1a checksum of the value bytes.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "noisyrec/autograd.hpp"
#include "noisyrec/checksum.hpp"
#include "noisyrec/rng.hpp"
#include "noisyrec/tensor.hpp"

namespace noisyrec {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor adam_m;
  Tensor adam_v;
};

class ParamSet {
 public:
  Tensor& add(std::string name, Tensor value) {
    if (index_.contains(name)) throw Error("ParamSet: duplicate parameter '" + name + "'");
    index_.emplace(name, params_.size());
    Tensor grad(value.shape(), 0.0);
    Tensor m(value.shape(), 0.0), v(value.shape(), 0.0);
    params_.push_back(Parameter{std::move(name), std::move(value), std::move(grad), std::move(m), std::move(v)});
    return params_.back().value;
  }

  bool contains(const std::string& name) const { return index_.contains(name); }

  Parameter& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error("ParamSet: no parameter '" + name + "'");
    return params_[it->second];
  }
  const Parameter& at(const std::string& name) const { return const_cast<ParamSet*>(this)->at(name); }

  Tensor& value(const std::string& name) { return at(name).value; }
  const Tensor& value(const std::string& name) const { return at(name).value; }
  Tensor& grad(const std::string& name) { return at(name).grad; }

  /// Places the parameter on `tape`; backward() accumulates into its gradient slot.
  ad::Var bind(ad::Tape& tape, const std::string& name) {
    Parameter& p = at(name);
    return tape.bind(p.value, p.grad, p.name);
  }

  std::vector<Parameter>& entries() noexcept { return params_; }
  const std::vector<Parameter>& entries() const noexcept { return params_; }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p.grad.fill(0.0);
  }

  std::uint64_t step() const noexcept { return step_; }
  void set_step(std::uint64_t s) noexcept { step_ = s; }

 private:
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t> index_;
  std::uint64_t step_ = 0;
};

/// Uniform initialization in [-bound, bound].
inline Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(-bound, bound);
  return t;
}

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update over every parameter, then clears gradients.
inline void adam_step(ParamSet& params, const AdamConfig& cfg) {
  params.set_step(params.step() + 1);
  const auto t = static_cast<double>(params.step());
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& p : params.entries()) {
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      p.adam_m[i] = cfg.beta1 * p.adam_m[i] + (1.0 - cfg.beta1) * g;
      p.adam_v[i] = cfg.beta2 * p.adam_v[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = p.adam_m[i] / c1;
      const double vhat = p.adam_v[i] / c2;
      p.value[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
  params.zero_grad();
}

// -- checkpoint --------------------------------------------------------------

namespace detail {

inline void append_le(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

inline double read_le(const char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace detail

inline constexpr int kCheckpointVersion = 1;

/// Writes values (not optimizer state) plus a free-form `meta` object.
inline void save_checkpoint(const ParamSet& params, const nlohmann::json& meta, const std::string& path) {
  std::string payload;
  nlohmann::json names = nlohmann::json::array();
  for (const auto& p : params.entries()) {
    names.push_back({{"name", p.name}, {"shape", p.value.shape()}});
    for (double v : p.value.values()) detail::append_le(payload, v);
  }
  nlohmann::json header = {{"format", "noisyrec-checkpoint"},
                           {"version", kCheckpointVersion},
                           {"step", params.step()},
                           {"params", names},
                           {"meta", meta},
                           {"payload_bytes", payload.size()},
                           {"checksum", fnv1a_hex(payload)}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint '" + path + "'");
  out << header.dump() << '\n';
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw Error("failed writing checkpoint '" + path + "'");
}

struct Checkpoint {
  ParamSet params;
  nlohmann::json meta;
};

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read checkpoint '" + path + "'");
  std::string line;
  std::getline(in, line);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw Error("checkpoint '" + path + "': malformed header: " + e.what());
  }
  if (header.value("format", "") != "noisyrec-checkpoint" || header.value("version", 0) != kCheckpointVersion)
    throw Error("checkpoint '" + path + "': unsupported format or version");
  std::string payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (payload.size() != header.at("payload_bytes").get<std::size_t>() ||
      fnv1a_hex(payload) != header.at("checksum").get<std::string>())
    throw Error("checkpoint '" + path + "': checksum mismatch");
  Checkpoint ck;
  std::size_t off = 0;
  for (const auto& entry : header.at("params")) {
    Shape shape = entry.at("shape").get<Shape>();
    Tensor t(shape);
    if (off + 8 * t.size() > payload.size()) throw Error("checkpoint '" + path + "': payload shorter than header shapes");
    for (double& v : t.values()) {
      v = detail::read_le(payload.data() + off);
      off += 8;
    }
    ck.params.add(entry.at("name").get<std::string>(), std::move(t));
  }
  ck.params.set_step(header.at("step").get<std::uint64_t>());
  ck.meta = header.at("meta");
  return ck;
}

}  // namespace noisyrec
