#pragma once

// Taped reverse-mode differentiation over dense matrices.
//
// Every value on the tape is a rank-2 tensor; rank-1 inputs are promoted to a
// single row. Nodes are appended in evaluation order, so a reverse sweep over
// the node list is a valid topological order for the backward pass.

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "noisyrec/tensor.hpp"

namespace noisyrec::ad {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid for the tape's lifetime.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  const Tensor& value() const;
  const Tensor& grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value, std::string name = "const") {
    return push(as_matrix(std::move(value)), std::move(name), false, nullptr);
  }

  /// Differentiable leaf; gradient is readable through Var::grad after backward.
  Var leaf(Tensor value, std::string name) {
    return push(as_matrix(std::move(value)), std::move(name), true, nullptr);
  }

  /// Leaf whose gradient is added into `grad_sink` by backward().
  Var bind(const Tensor& value, Tensor& grad_sink, std::string name) {
    Var v = leaf(value, std::move(name));
    sinks_.push_back({v.id(), &grad_sink});
    return v;
  }

  /// Appends a computed node. Throws if the value is not finite.
  Var push(Tensor value, std::string name, bool requires_grad, BackwardFn backward) {
    if (!value.all_finite()) throw Error("non-finite value at node '" + name + "'");
    nodes_.push_back(Node{std::move(value), Tensor{}, requires_grad, std::move(name), std::move(backward)});
    return Var(this, nodes_.size() - 1);
  }

  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const std::string& name(std::size_t id) const { return nodes_[id].name; }
  std::size_t size() const noexcept { return nodes_.size(); }

  const Tensor& grad(std::size_t id) const {
    static const Tensor empty;
    return nodes_[id].grad.size() ? nodes_[id].grad : empty;
  }

  /// Gradient buffer of `id`, zero-initialized on first access.
  Tensor& grad_buffer(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.size() != n.value.size()) n.grad = Tensor(n.value.shape(), 0.0);
    return n.grad;
  }

  /// Reverse sweep from a scalar loss; accumulates into bound sinks.
  void backward(Var loss) {
    if (loss.value().size() != 1) throw Error("backward: loss must be a scalar");
    grad_buffer(loss.id())[0] = 1.0;
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.size() == 0) continue;
      if (!n.grad.all_finite()) throw Error("non-finite gradient at node '" + n.name + "'");
      if (n.backward) n.backward(*this);
    }
    for (const auto& [id, sink] : sinks_) {
      const Tensor& g = nodes_[id].grad;
      if (g.size() == 0) continue;
      if (sink->size() != g.size()) throw Error("backward: gradient sink shape mismatch at '" + name(id) + "'");
      for (std::size_t k = 0; k < g.size(); ++k) (*sink)[k] += g[k];
    }
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad;
    std::string name;
    BackwardFn backward;
  };

  static Tensor as_matrix(Tensor t) {
    if (t.rank() == 2) return t;
    const std::size_t r = t.rows(), c = t.cols();
    return Tensor({r, c}, std::vector<double>(t.values().begin(), t.values().end()));
  }

  std::vector<Node> nodes_;
  std::vector<std::pair<std::size_t, Tensor*>> sinks_;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }
inline const Tensor& Var::grad() const { return tape_->grad(id_); }

namespace detail {

inline void check_same(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(std::string(op) + ": shape mismatch " + shape_string(a.value().shape()) + " vs " +
                shape_string(b.value().shape()));
}

inline bool any_grad(std::initializer_list<Var> vs) {
  for (const Var& v : vs)
    if (v.tape().requires_grad(v.id())) return true;
  return false;
}

inline double at(const Tensor& m, bool trans, std::size_t i, std::size_t j) {
  return trans ? m(j, i) : m(i, j);
}

/// out += op(A) * op(B)
inline void gemm_acc(bool ta, bool tb, const Tensor& A, const Tensor& B, Tensor& out) {
  const std::size_t m = ta ? A.cols() : A.rows();
  const std::size_t k = ta ? A.rows() : A.cols();
  const std::size_t n = tb ? B.rows() : B.cols();
  const std::size_t ldb = B.cols(), lda = A.cols();
  const double* a = A.data();
  const double* b = B.data();
  double* c = out.data();
  if (!ta && !tb) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        const double av = a[i * lda + p];
        if (av == 0.0) continue;
        const double* brow = b + p * ldb;
        double* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
  } else if (!ta && tb) {
    for (std::size_t i = 0; i < m; ++i) {
      const double* arow = a + i * lda;
      for (std::size_t j = 0; j < n; ++j) {
        const double* brow = b + j * ldb;
        double s = 0.0;
        for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
        c[i * n + j] += s;
      }
    }
  } else if (ta && !tb) {
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t i = 0; i < m; ++i) {
        const double av = a[p * lda + i];
        if (av == 0.0) continue;
        const double* brow = b + p * ldb;
        double* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
  } else {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t p = 0; p < k; ++p) s += at(A, true, i, p) * at(B, true, p, j);
        c[i * n + j] += s;
      }
  }
}

}  // namespace detail

// -- structural --------------------------------------------------------------

/// op(a) * op(b)
inline Var matmul(const Var& a, const Var& b, bool trans_a = false, bool trans_b = false) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t m = trans_a ? av.cols() : av.rows();
  const std::size_t k = trans_a ? av.rows() : av.cols();
  const std::size_t kb = trans_b ? bv.cols() : bv.rows();
  const std::size_t n = trans_b ? bv.rows() : bv.cols();
  if (k != kb)
    throw Error("matmul: inner dimension mismatch " + shape_string(av.shape()) + " x " +
                shape_string(bv.shape()));
  Tensor out = Tensor::matrix(m, n);
  detail::gemm_acc(trans_a, trans_b, av, bv, out);
  Tape& t = a.tape();
  const std::size_t ai = a.id(), bi = b.id();
  const bool rg = detail::any_grad({a, b});
  std::size_t self = t.size();
  return t.push(std::move(out), "matmul", rg, [=](Tape& tp) {
    const Tensor& dc = tp.grad(self);
    if (tp.requires_grad(ai)) {
      Tensor& da = tp.grad_buffer(ai);
      if (!trans_a)
        detail::gemm_acc(false, !trans_b, dc, tp.value(bi), da);
      else
        detail::gemm_acc(trans_b, true, tp.value(bi), dc, da);
    }
    if (tp.requires_grad(bi)) {
      Tensor& db = tp.grad_buffer(bi);
      if (!trans_b)
        detail::gemm_acc(!trans_a, false, tp.value(ai), dc, db);
      else
        detail::gemm_acc(true, trans_a, dc, tp.value(ai), db);
    }
  });
}

inline Var transpose(const Var& a) {
  const Tensor& av = a.value();
  Tensor out = Tensor::matrix(av.cols(), av.rows());
  for (std::size_t i = 0; i < av.rows(); ++i)
    for (std::size_t j = 0; j < av.cols(); ++j) out(j, i) = av(i, j);
  Tape& t = a.tape();
  const std::size_t ai = a.id(), self = t.size();
  return t.push(std::move(out), "transpose", t.requires_grad(ai), [=](Tape& tp) {
    const Tensor& dc = tp.grad(self);
    Tensor& da = tp.grad_buffer(ai);
    for (std::size_t i = 0; i < da.rows(); ++i)
      for (std::size_t j = 0; j < da.cols(); ++j) da(i, j) += dc(j, i);
  });
}

/// [a | b] along columns.
inline Var concat_cols(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rows() != bv.rows()) throw Error("concat_cols: row count mismatch");
  const std::size_t r = av.rows(), ca = av.cols(), cb = bv.cols();
  Tensor out = Tensor::matrix(r, ca + cb);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < ca; ++j) out(i, j) = av(i, j);
    for (std::size_t j = 0; j < cb; ++j) out(i, ca + j) = bv(i, j);
  }
  Tape& t = a.tape();
  const std::size_t ai = a.id(), bi = b.id(), self = t.size();
  return t.push(std::move(out), "concat_cols", detail::any_grad({a, b}), [=](Tape& tp) {
    const Tensor& dc = tp.grad(self);
    if (tp.requires_grad(ai)) {
      Tensor& da = tp.grad_buffer(ai);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < ca; ++j) da(i, j) += dc(i, j);
    }
    if (tp.requires_grad(bi)) {
      Tensor& db = tp.grad_buffer(bi);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < cb; ++j) db(i, j) += dc(i, ca + j);
    }
  });
}

/// Stacks equally wide matrices vertically.
inline Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error("concat_rows: no inputs");
  Tape& t = parts.front().tape();
  const std::size_t c = parts.front().cols();
  std::size_t r = 0;
  bool rg = false;
  for (const Var& p : parts) {
    if (p.cols() != c) throw Error("concat_rows: column count mismatch");
    r += p.rows();
    rg = rg || t.requires_grad(p.id());
  }
  Tensor out = Tensor::matrix(r, c);
  std::vector<std::size_t> ids, offsets;
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& pv = p.value();
    std::copy(pv.values().begin(), pv.values().end(), out.data() + off * c);
    ids.push_back(p.id());
    offsets.push_back(off);
    off += pv.rows();
  }
  const std::size_t self = t.size();
  return t.push(std::move(out), "concat_rows", rg, [=](Tape& tp) {
    const Tensor& dc = tp.grad(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!tp.requires_grad(ids[k])) continue;
      Tensor& dp = tp.grad_buffer(ids[k]);
      const double* src = dc.data() + offsets[k] * c;
      for (std::size_t i = 0; i < dp.size(); ++i) dp[i] += src[i];
    }
  });
}

/// out[i] = a[index[i]]
inline Var gather_rows(const Var& a, std::vector<std::size_t> index) {
  const Tensor& av = a.value();
  const std::size_t c = av.cols();
  Tensor out = Tensor::matrix(index.size(), c);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= av.rows()) throw Error("gather_rows: index out of range");
    std::copy_n(av.data() + index[i] * c, c, out.data() + i * c);
  }
  Tape& t = a.tape();
  const std::size_t ai = a.id(), self = t.size();
  return t.push(std::move(out), "gather_rows", t.requires_grad(ai), [=, index = std::move(index)](Tape& tp) {
    const Tensor& dc = tp.grad(self);
    Tensor& da = tp.grad_buffer(ai);
    for (std::size_t i = 0; i < index.size(); ++i)
      for (std::size_t j = 0; j < c; ++j) da(index[i], j) += dc(i, j);
  });
}

/// out (n_rows x cols) with out[index[i]] += a[i]
inline Var scatter_add_rows(const Var& a, std::vector<std::size_t> index, std::size_t n_rows) {
  const Tensor& av = a.value();
  if (index.size() != av.rows()) throw Error("scatter_add_rows: index length mismatch");
  const std::size_t c = av.cols();
  Tensor out = Tensor::matrix(n_rows, c);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= n_rows) throw Error("scatter_add_rows: index out of range");
    for (std::size_t j = 0; j < c; ++j) out(index[i], j) += av(i, j);
  }
  Tape& t = a.tape();
  const std::size_t ai = a.id(), self = t.size();
  return t.push(std::move(out), "scatter_add_rows", t.requires_grad(ai),
                [=, index = std::move(index)](Tape& tp) {
                  const Tensor& dc = tp.grad(self);
                  Tensor& da = tp.grad_buffer(ai);
                  for (std::size_t i = 0; i < index.size(); ++i)
                    for (std::size_t j = 0; j < c; ++j) da(i, j) += dc(index[i], j);
                });
}

// -- element-wise ------------------------------------------------------------

/// a + b; b may also be a single row (broadcast over rows of a).
inline Var add(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const bool row_bcast = bv.rows() == 1 && av.rows() != 1 && bv.cols() == av.cols();
  if (!row_bcast) detail::check_same(a, b, "add");
  Tensor out = av;
  const std::size_t c = av.cols();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += row_bcast ? bv[i % c] : bv[i];
  Tape& t = a.tape();
  const std::size_t ai = a.id(), bi = b.id(), self = t.size();
  return t.push(std::move(out), "add", detail::any_grad({a, b}), [=](Tape& tp) {
    const Tensor& dc = tp.grad(self);
    if (tp.requires_grad(ai)) {
      Tensor& da = tp.grad_buffer(ai);
      for (std::size_t i = 0; i < dc.size(); ++i) da[i] += dc[i];
    }
    if (tp.requires_grad(bi)) {
      Tensor& db = tp.grad_buffer(bi);
      for (std::size_t i = 0; i < dc.size(); ++i) db[row_bcast ? i % c : i] += dc[i];
    }
  });
}

inline Var sub(const Var& a, const Var& b) {
  detail::check_same(a, b, "sub");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  Tape& t = a.tape();
  const std::size_t ai = a.id(), bi = b.id(), self = t.size();
  return t.push(std::move(out), "sub", detail::any_grad({a, b}), [=](Tape& tp) {
    const Tensor& dc = tp.grad(self);
    if (tp.requires_grad(ai)) {
      Tensor& da = tp.grad_buffer(ai);
      for (std::size_t i = 0; i < dc.size(); ++i) da[i] += dc[i];
    }
    if (tp.requires_grad(bi)) {
      Tensor& db = tp.grad_buffer(bi);
      for (std::size_t i = 0; i < dc.size(); ++i) db[i] -= dc[i];
    }
  });
}

/// Element-wise a * b; b may be a single column (broadcast across columns).
inline Var mul(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const bool col_bcast = bv.cols() == 1 && av.cols() != 1 && bv.rows() == av.rows();
  if (!col_bcast) detail::check_same(a, b, "mul");
  const std::size_t c = av.cols();
  auto bidx = [=](std::size_t i) { return col_bcast ? i / c : i; };
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[bidx(i)];
  Tape& t = a.tape();
  const std::size_t ai = a.id(), bi = b.id(), self = t.size();
  return t.push(std::move(out), "mul", detail::any_grad({a, b}), [=](Tape& tp) {
    const Tensor& dc = tp.grad(self);
    const Tensor& A = tp.value(ai);
    const Tensor& B = tp.value(bi);
    if (tp.requires_grad(ai)) {
      Tensor& da = tp.grad_buffer(ai);
      for (std::size_t i = 0; i < dc.size(); ++i) da[i] += dc[i] * B[bidx(i)];
    }
    if (tp.requires_grad(bi)) {
      Tensor& db = tp.grad_buffer(bi);
      for (std::size_t i = 0; i < dc.size(); ++i) db[bidx(i)] += dc[i] * A[i];
    }
  });
}

/// scale * a + shift
inline Var affine(const Var& a, double scale, double shift = 0.0) {
  Tensor out = a.value();
  for (double& v : out.values()) v = scale * v + shift;
  Tape& t = a.tape();
  const std::size_t ai = a.id(), self = t.size();
  return t.push(std::move(out), "affine", t.requires_grad(ai), [=](Tape& tp) {
    const Tensor& dc = tp.grad(self);
    Tensor& da = tp.grad_buffer(ai);
    for (std::size_t i = 0; i < dc.size(); ++i) da[i] += scale * dc[i];
  });
}

inline Var scale(const Var& a, double s) { return affine(a, s, 0.0); }

/// 1 - a
inline Var one_minus(const Var& a) { return affine(a, -1.0, 1.0); }

namespace detail {

/// Element-wise map whose derivative is expressed through (x, y).
template <typename F, typename D>
Var pointwise(const Var& x, const char* name, F f, D dfdx) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xv[i]);
  Tape& t = x.tape();
  const std::size_t xi = x.id(), self = t.size();
  return t.push(std::move(out), name, t.requires_grad(xi), [=](Tape& tp) {
    const Tensor& dc = tp.grad(self);
    const Tensor& X = tp.value(xi);
    const Tensor& Y = tp.value(self);
    Tensor& dx = tp.grad_buffer(xi);
    for (std::size_t i = 0; i < dc.size(); ++i) dx[i] += dc[i] * dfdx(X[i], Y[i]);
  });
}

}  // namespace detail

inline Var sigmoid(const Var& x) {
  return detail::pointwise(
      x, "sigmoid",
      [](double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); },
      [](double, double y) { return y * (1.0 - y); });
}

inline Var tanh(const Var& x) {
  return detail::pointwise(x, "tanh", [](double v) { return std::tanh(v); },
                           [](double, double y) { return 1.0 - y * y; });
}

inline Var exp(const Var& x) {
  return detail::pointwise(x, "exp", [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

inline Var log(const Var& x) {
  return detail::pointwise(x, "log", [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

/// Clamp to [lo, hi]; gradient passes only inside the interval.
inline Var clamp(const Var& x, double lo, double hi) {
  return detail::pointwise(
      x, "clamp", [=](double v) { return std::min(std::max(v, lo), hi); },
      [=](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

// -- row operations ----------------------------------------------------------

/// Softmax over each row, max-shifted.
inline Var softmax_rows(const Var& x) {
  const Tensor& xv = x.value();
  Tensor out = xv;
  const std::size_t c = out.cols();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row_span(r);
    const double m = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double& v : row) z += (v = std::exp(v - m));
    for (double& v : row) v /= z;
  }
  Tape& t = x.tape();
  const std::size_t xi = x.id(), self = t.size();
  return t.push(std::move(out), "softmax", t.requires_grad(xi), [=](Tape& tp) {
    const Tensor& dc = tp.grad(self);
    const Tensor& Y = tp.value(self);
    Tensor& dx = tp.grad_buffer(xi);
    for (std::size_t r = 0; r < Y.rows(); ++r) {
      double s = 0.0;
      for (std::size_t j = 0; j < c; ++j) s += dc(r, j) * Y(r, j);
      for (std::size_t j = 0; j < c; ++j) dx(r, j) += Y(r, j) * (dc(r, j) - s);
    }
  });
}

/// Each row divided by max(||row||, floor).
inline Var normalize_rows(const Var& x, double floor = 1e-12) {
  const Tensor& xv = x.value();
  Tensor out = xv;
  std::vector<double> norms(out.rows());
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row_span(r);
    const double raw = l2_norm(row);
    norms[r] = raw > floor ? raw : -floor;  // negative marks the floored branch
    const double n = std::max(raw, floor);
    for (double& v : row) v /= n;
  }
  Tape& t = x.tape();
  const std::size_t xi = x.id(), self = t.size();
  return t.push(std::move(out), "normalize_rows", t.requires_grad(xi), [=](Tape& tp) {
    const Tensor& dc = tp.grad(self);
    const Tensor& Y = tp.value(self);
    Tensor& dx = tp.grad_buffer(xi);
    const std::size_t c = Y.cols();
    for (std::size_t r = 0; r < Y.rows(); ++r) {
      if (norms[r] < 0) {
        for (std::size_t j = 0; j < c; ++j) dx(r, j) += dc(r, j) / -norms[r];
        continue;
      }
      double s = 0.0;
      for (std::size_t j = 0; j < c; ++j) s += Y(r, j) * dc(r, j);
      for (std::size_t j = 0; j < c; ++j) dx(r, j) += (dc(r, j) - Y(r, j) * s) / norms[r];
    }
  });
}

// -- reductions --------------------------------------------------------------

inline Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  Tape& t = x.tape();
  const std::size_t xi = x.id(), self = t.size();
  return t.push(Tensor::scalar(s), "sum", t.requires_grad(xi), [=](Tape& tp) {
    const double g = tp.grad(self)[0];
    Tensor& dx = tp.grad_buffer(xi);
    for (double& v : dx.values()) v += g;
  });
}

inline Var mean(const Var& x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().size())); }

/// Per-row sums as a column.
inline Var sum_rows(const Var& x) {
  const Tensor& xv = x.value();
  Tensor out = Tensor::matrix(xv.rows(), 1);
  for (std::size_t r = 0; r < xv.rows(); ++r)
    for (double v : xv.row_span(r)) out[r] += v;
  Tape& t = x.tape();
  const std::size_t xi = x.id(), self = t.size();
  return t.push(std::move(out), "sum_rows", t.requires_grad(xi), [=](Tape& tp) {
    const Tensor& dc = tp.grad(self);
    Tensor& dx = tp.grad_buffer(xi);
    for (std::size_t r = 0; r < dx.rows(); ++r)
      for (double& v : dx.row_span(r)) v += dc[r];
  });
}

}  // namespace noisyrec::ad
