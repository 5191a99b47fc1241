#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "cfkt/rng.hpp"
#include "cfkt/types.hpp"

namespace cfkt::nn {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

// ---------------------------------------------------------------------------
// Reverse-mode tape over dense matrices.
//
// Nodes are appended in evaluation order, so walking the list backwards is a
// valid topological order for backpropagation. Templated on the scalar: the
// production paths instantiate float, gradient-checking tests instantiate
// double. Parameters live outside the tape; a leaf made with external() reads
// the parameter in place (no copy) and flushes its accumulated gradient into
// the caller-supplied buffer during backward(). Embedding tables never
// materialize on the tape at all: gather_rows()/gather_row_sets() read rows
// directly and scatter gradients back.
//
// When constructed with recording=false the tape computes values only: no
// closures, no gradient buffers. Inference uses that mode.
// ---------------------------------------------------------------------------

template <class S>
class Tape {
 public:
  using M = Mat<S>;

  struct Var {
    int i = -1;
    bool valid() const { return i >= 0; }
  };

  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }
  int size() const { return static_cast<int>(nodes_.size()); }

  const M& value(Var v) const {
    const Node& n = nodes_[check(v)];
    return n.external ? *n.external : n.val;
  }

  /// Gradient of the last backward() target w.r.t. v. Zero-sized if the node
  /// never received a gradient.
  const M& gradient(Var v) const { return nodes_[check(v)].grad; }

  // -- leaves ---------------------------------------------------------------

  Var constant(M v) { return push(std::move(v), false); }

  Var zeros(Eigen::Index r, Eigen::Index c) { return constant(M::Zero(r, c)); }

  /// Parameter leaf: reads *value in place, accumulates into *grad (may be
  /// nullptr to freeze the parameter).
  Var external(const M* value, M* grad) {
    Node n;
    n.external = value;
    n.needs_grad = recording_ && grad != nullptr;
    n.val.resize(0, 0);
    nodes_.push_back(std::move(n));
    const int i = size() - 1;
    if (nodes_[i].needs_grad) {
      nodes_[i].back = [this, i, grad] { *grad += nodes_[i].grad; };
    }
    return Var{i};
  }

  /// Rows of an external table, one per id. Gradients scatter-add into
  /// *table_grad (nullptr freezes the table).
  Var gather_rows(const M& table, M* table_grad, std::vector<int> ids) {
    M v(static_cast<Eigen::Index>(ids.size()), table.cols());
    for (std::size_t r = 0; r < ids.size(); ++r) {
      bound_check(ids[r], table.rows(), "gather_rows");
      v.row(static_cast<Eigen::Index>(r)) = table.row(ids[r]);
    }
    const Var out = push(std::move(v), recording_ && table_grad != nullptr);
    if (node(out).needs_grad) {
      node(out).back = [this, out, table_grad, ids = std::move(ids)] {
        const M& g = nodes_[out.i].grad;
        for (std::size_t r = 0; r < ids.size(); ++r)
          table_grad->row(ids[r]) += g.row(static_cast<Eigen::Index>(r));
      };
    }
    return out;
  }

  /// Like gather_rows but each output row is the mean of a set of table rows
  /// (empty set -> zero row). Used for bag-of-concepts embeddings.
  Var gather_row_sets(const M& table, M* table_grad, std::vector<std::vector<int>> sets) {
    M v = M::Zero(static_cast<Eigen::Index>(sets.size()), table.cols());
    for (std::size_t r = 0; r < sets.size(); ++r) {
      if (sets[r].empty()) continue;
      for (int id : sets[r]) {
        bound_check(id, table.rows(), "gather_row_sets");
        v.row(static_cast<Eigen::Index>(r)) += table.row(id);
      }
      v.row(static_cast<Eigen::Index>(r)) /= static_cast<S>(sets[r].size());
    }
    const Var out = push(std::move(v), recording_ && table_grad != nullptr);
    if (node(out).needs_grad) {
      node(out).back = [this, out, table_grad, sets = std::move(sets)] {
        const M& g = nodes_[out.i].grad;
        for (std::size_t r = 0; r < sets.size(); ++r) {
          if (sets[r].empty()) continue;
          const S w = S(1) / static_cast<S>(sets[r].size());
          for (int id : sets[r])
            table_grad->row(id) += w * g.row(static_cast<Eigen::Index>(r));
        }
      };
    }
    return out;
  }

  // -- arithmetic -----------------------------------------------------------

  Var add(Var a, Var b) {
    same_shape(a, b, "add");
    const Var out = push(value(a) + value(b), needs(a) || needs(b));
    attach(out, [this, out, a, b] {
      const M& g = nodes_[out.i].grad;
      if (needs(a)) grad_ref(a) += g;
      if (needs(b)) grad_ref(b) += g;
    });
    return out;
  }

  Var sub(Var a, Var b) {
    same_shape(a, b, "sub");
    const Var out = push(value(a) - value(b), needs(a) || needs(b));
    attach(out, [this, out, a, b] {
      const M& g = nodes_[out.i].grad;
      if (needs(a)) grad_ref(a) += g;
      if (needs(b)) grad_ref(b) -= g;
    });
    return out;
  }

  /// Elementwise product.
  Var cmul(Var a, Var b) {
    same_shape(a, b, "cmul");
    const Var out = push((value(a).array() * value(b).array()).matrix(), needs(a) || needs(b));
    attach(out, [this, out, a, b] {
      const M& g = nodes_[out.i].grad;
      if (needs(a)) grad_ref(a).array() += g.array() * value(b).array();
      if (needs(b)) grad_ref(b).array() += g.array() * value(a).array();
    });
    return out;
  }

  Var scale(Var a, S s) {
    const Var out = push(value(a) * s, needs(a));
    attach(out, [this, out, a, s] {
      if (needs(a)) grad_ref(a) += nodes_[out.i].grad * s;
    });
    return out;
  }

  Var add_scalar(Var a, S c) {
    const Var out = push((value(a).array() + c).matrix(), needs(a));
    attach(out, [this, out, a] {
      if (needs(a)) grad_ref(a) += nodes_[out.i].grad;
    });
    return out;
  }

  Var neg(Var a) { return scale(a, S(-1)); }

  Var one_minus(Var a) { return add_scalar(neg(a), S(1)); }

  Var matmul(Var a, Var b) {
    if (value(a).cols() != value(b).rows()) throw ShapeError("matmul: inner dimensions differ");
    const Var out = push(value(a) * value(b), needs(a) || needs(b));
    attach(out, [this, out, a, b] {
      const M& g = nodes_[out.i].grad;
      if (needs(a)) grad_ref(a) += g * value(b).transpose();
      if (needs(b)) grad_ref(b) += value(a).transpose() * g;
    });
    return out;
  }

  /// a * b^T without materializing the transpose on the tape.
  Var matmul_nt(Var a, Var b) {
    if (value(a).cols() != value(b).cols()) throw ShapeError("matmul_nt: inner dimensions differ");
    const Var out = push(value(a) * value(b).transpose(), needs(a) || needs(b));
    attach(out, [this, out, a, b] {
      const M& g = nodes_[out.i].grad;
      if (needs(a)) grad_ref(a) += g * value(b);
      if (needs(b)) grad_ref(b) += g.transpose() * value(a);
    });
    return out;
  }

  /// Adds a [1 x c] bias row to every row of a.
  Var add_rowvec(Var a, Var r) {
    if (value(r).rows() != 1 || value(r).cols() != value(a).cols())
      throw ShapeError("add_rowvec: bias must be [1 x cols(a)]");
    const Var out = push(value(a).rowwise() + value(r).row(0), needs(a) || needs(r));
    attach(out, [this, out, a, r] {
      const M& g = nodes_[out.i].grad;
      if (needs(a)) grad_ref(a) += g;
      if (needs(r)) grad_ref(r) += g.colwise().sum();
    });
    return out;
  }

  // -- nonlinearities ---------------------------------------------------------

  Var sigmoid(Var a) {
    M v = (S(1) / (S(1) + (-value(a).array()).exp())).matrix();
    const Var out = push(std::move(v), needs(a));
    attach(out, [this, out, a] {
      const M& y = nodes_[out.i].val;
      if (needs(a))
        grad_ref(a).array() += nodes_[out.i].grad.array() * y.array() * (S(1) - y.array());
    });
    return out;
  }

  Var tanh_(Var a) {
    const Var out = push(value(a).array().tanh().matrix(), needs(a));
    attach(out, [this, out, a] {
      const M& y = nodes_[out.i].val;
      if (needs(a))
        grad_ref(a).array() += nodes_[out.i].grad.array() * (S(1) - y.array().square());
    });
    return out;
  }

  Var relu(Var a) {
    const Var out = push(value(a).cwiseMax(S(0)), needs(a));
    attach(out, [this, out, a] {
      if (needs(a))
        grad_ref(a).array() +=
            nodes_[out.i].grad.array() * (value(a).array() > S(0)).template cast<S>();
    });
    return out;
  }

  /// ln(1 + e^x), computed stably; gradient is sigmoid(x).
  Var softplus(Var a) {
    M v = value(a).array().unaryExpr([](S x) {
      return x > S(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    }).matrix();
    const Var out = push(std::move(v), needs(a));
    attach(out, [this, out, a] {
      if (needs(a))
        grad_ref(a).array() += nodes_[out.i].grad.array() *
                               (S(1) / (S(1) + (-value(a).array()).exp()));
    });
    return out;
  }

  Var log_(Var a) {
    const Var out = push(value(a).array().log().matrix(), needs(a));
    attach(out, [this, out, a] {
      if (needs(a)) grad_ref(a).array() += nodes_[out.i].grad.array() / value(a).array();
    });
    return out;
  }

  /// Clamp to [lo, hi]; gradient passes only strictly inside the interval.
  Var clamp(Var a, S lo, S hi) {
    const Var out = push(value(a).array().min(hi).max(lo).matrix(), needs(a));
    attach(out, [this, out, a, lo, hi] {
      if (!needs(a)) return;
      const auto& x = value(a).array();
      grad_ref(a).array() += nodes_[out.i].grad.array() *
                             ((x > lo && x < hi).template cast<S>());
    });
    return out;
  }

  // -- reductions / selections ------------------------------------------------

  Var sum(Var a) {
    M v(1, 1);
    v(0, 0) = value(a).sum();
    const Var out = push(std::move(v), needs(a));
    attach(out, [this, out, a] {
      if (needs(a)) grad_ref(a).array() += nodes_[out.i].grad(0, 0);
    });
    return out;
  }

  Var mean(Var a) {
    const S n = static_cast<S>(value(a).size());
    return scale(sum(a), S(1) / n);
  }

  /// Weighted sum against a fixed matrix: sum(a .* w) -> [1 x 1].
  Var dot_const(Var a, M w) {
    same_shape_const(a, w, "dot_const");
    M v(1, 1);
    v(0, 0) = (value(a).array() * w.array()).sum();
    const Var out = push(std::move(v), needs(a));
    attach(out, [this, out, a, w = std::move(w)] {
      if (needs(a)) grad_ref(a) += nodes_[out.i].grad(0, 0) * w;
    });
    return out;
  }

  Var cmul_const(Var a, M m) {
    same_shape_const(a, m, "cmul_const");
    const Var out = push((value(a).array() * m.array()).matrix(), needs(a));
    attach(out, [this, out, a, m = std::move(m)] {
      if (needs(a)) grad_ref(a).array() += nodes_[out.i].grad.array() * m.array();
    });
    return out;
  }

  Var add_const(Var a, M m) {
    same_shape_const(a, m, "add_const");
    const Var out = push(value(a) + m, needs(a));
    attach(out, [this, out, a] {
      if (needs(a)) grad_ref(a) += nodes_[out.i].grad;
    });
    return out;
  }

  /// m .* a + (1 - m) .* b with a fixed 0/1 mask; the recurrent backbones use
  /// it to freeze state across padding steps.
  Var lerp_mask(Var a, Var b, M m) {
    same_shape(a, b, "lerp_mask");
    same_shape_const(a, m, "lerp_mask");
    M v = (m.array() * value(a).array() + (S(1) - m.array()) * value(b).array()).matrix();
    const Var out = push(std::move(v), needs(a) || needs(b));
    attach(out, [this, out, a, b, m = std::move(m)] {
      const M& g = nodes_[out.i].grad;
      if (needs(a)) grad_ref(a).array() += g.array() * m.array();
      if (needs(b)) grad_ref(b).array() += g.array() * (S(1) - m.array());
    });
    return out;
  }

  /// Scalar [1 x 1] variable times a fixed matrix.
  Var scale_by(Var s, M d) {
    if (value(s).size() != 1) throw ShapeError("scale_by: scalar operand must be [1 x 1]");
    const Var out = push(value(s)(0, 0) * d, needs(s));
    attach(out, [this, out, s, d = std::move(d)] {
      if (needs(s)) grad_ref(s)(0, 0) += (nodes_[out.i].grad.array() * d.array()).sum();
    });
    return out;
  }

  // -- structure --------------------------------------------------------------

  Var slice_cols(Var a, Eigen::Index c0, Eigen::Index n) {
    if (c0 < 0 || n < 0 || c0 + n > value(a).cols()) throw ShapeError("slice_cols out of range");
    const Var out = push(value(a).middleCols(c0, n), needs(a));
    attach(out, [this, out, a, c0, n] {
      if (needs(a)) grad_ref(a).middleCols(c0, n) += nodes_[out.i].grad;
    });
    return out;
  }

  Var slice_rows(Var a, Eigen::Index r0, Eigen::Index n) {
    if (r0 < 0 || n < 0 || r0 + n > value(a).rows()) throw ShapeError("slice_rows out of range");
    const Var out = push(value(a).middleRows(r0, n), needs(a));
    attach(out, [this, out, a, r0, n] {
      if (needs(a)) grad_ref(a).middleRows(r0, n) += nodes_[out.i].grad;
    });
    return out;
  }

  Var transpose(Var a) {
    const Var out = push(value(a).transpose(), needs(a));
    attach(out, [this, out, a] {
      if (needs(a)) grad_ref(a) += nodes_[out.i].grad.transpose();
    });
    return out;
  }

  Var hcat(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("hcat of nothing");
    Eigen::Index rows = value(parts[0]).rows(), cols = 0;
    bool any = false;
    for (Var p : parts) {
      if (value(p).rows() != rows) throw ShapeError("hcat: row counts differ");
      cols += value(p).cols();
      any = any || needs(p);
    }
    M v(rows, cols);
    Eigen::Index c = 0;
    for (Var p : parts) {
      v.middleCols(c, value(p).cols()) = value(p);
      c += value(p).cols();
    }
    const Var out = push(std::move(v), any);
    attach(out, [this, out, parts] {
      const M& g = nodes_[out.i].grad;
      Eigen::Index c = 0;
      for (Var p : parts) {
        const Eigen::Index n = value(p).cols();
        if (needs(p)) grad_ref(p) += g.middleCols(c, n);
        c += n;
      }
    });
    return out;
  }

  Var vcat(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("vcat of nothing");
    Eigen::Index cols = value(parts[0]).cols(), rows = 0;
    bool any = false;
    for (Var p : parts) {
      if (value(p).cols() != cols) throw ShapeError("vcat: column counts differ");
      rows += value(p).rows();
      any = any || needs(p);
    }
    M v(rows, cols);
    Eigen::Index r = 0;
    for (Var p : parts) {
      v.middleRows(r, value(p).rows()) = value(p);
      r += value(p).rows();
    }
    const Var out = push(std::move(v), any);
    attach(out, [this, out, parts] {
      const M& g = nodes_[out.i].grad;
      Eigen::Index r = 0;
      for (Var p : parts) {
        const Eigen::Index n = value(p).rows();
        if (needs(p)) grad_ref(p) += g.middleRows(r, n);
        r += n;
      }
    });
    return out;
  }

  /// Shift columns right by k (k < 0 shifts left); vacated entries are zero.
  Var shift_cols(Var a, Eigen::Index k) {
    const Eigen::Index r = value(a).rows(), c = value(a).cols();
    M v = M::Zero(r, c);
    if (k >= 0) {
      if (k < c) v.middleCols(k, c - k) = value(a).middleCols(0, c - k);
    } else {
      if (-k < c) v.middleCols(0, c + k) = value(a).middleCols(-k, c + k);
    }
    const Var out = push(std::move(v), needs(a));
    attach(out, [this, out, a, k, c] {
      if (!needs(a)) return;
      const M& g = nodes_[out.i].grad;
      if (k >= 0) {
        if (k < c) grad_ref(a).middleCols(0, c - k) += g.middleCols(k, c - k);
      } else {
        if (-k < c) grad_ref(a).middleCols(-k, c + k) += g.middleCols(0, c + k);
      }
    });
    return out;
  }

  /// Shift rows down by k (k < 0 shifts up); vacated entries are zero.
  Var shift_rows(Var a, Eigen::Index k) {
    const Eigen::Index r = value(a).rows();
    M v = M::Zero(r, value(a).cols());
    if (k >= 0) {
      if (k < r) v.middleRows(k, r - k) = value(a).middleRows(0, r - k);
    } else {
      if (-k < r) v.middleRows(0, r + k) = value(a).middleRows(-k, r + k);
    }
    const Var out = push(std::move(v), needs(a));
    attach(out, [this, out, a, k, r] {
      if (!needs(a)) return;
      const M& g = nodes_[out.i].grad;
      if (k >= 0) {
        if (k < r) grad_ref(a).middleRows(0, r - k) += g.middleRows(k, r - k);
      } else {
        if (-k < r) grad_ref(a).middleRows(-k, r + k) += g.middleRows(0, r + k);
      }
    });
    return out;
  }

  /// Running sum along each row: out(i, j) = sum_{k <= j} a(i, k).
  Var cumsum_cols(Var a) {
    M v = value(a);
    for (Eigen::Index j = 1; j < v.cols(); ++j) v.col(j) += v.col(j - 1);
    const Var out = push(std::move(v), needs(a));
    attach(out, [this, out, a] {
      if (!needs(a)) return;
      M g = nodes_[out.i].grad;  // reverse running sum
      for (Eigen::Index j = g.cols() - 2; j >= 0; --j) g.col(j) += g.col(j + 1);
      grad_ref(a) += g;
    });
    return out;
  }

  /// Tile a [1 x c] row n times.
  Var repeat_row(Var a, Eigen::Index n) {
    if (value(a).rows() != 1) throw ShapeError("repeat_row: operand must be [1 x c]");
    const Var out = push(value(a).replicate(n, 1), needs(a));
    attach(out, [this, out, a] {
      if (needs(a)) grad_ref(a) += nodes_[out.i].grad.colwise().sum();
    });
    return out;
  }

  // -- softmax / normalization --------------------------------------------------

  /// Row-wise softmax with max-subtraction. Callers add large negative values
  /// to invalid logits beforehand; a fully-masked row degenerates to uniform,
  /// so callers must also zero such rows afterwards if they can occur.
  Var softmax_rows(Var a) {
    M v = value(a);
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
      const S mx = v.row(i).maxCoeff();
      v.row(i) = (v.row(i).array() - mx).exp();
      v.row(i) /= v.row(i).sum();
    }
    const Var out = push(std::move(v), needs(a));
    attach(out, [this, out, a] {
      if (!needs(a)) return;
      const M& y = nodes_[out.i].val;
      const M& g = nodes_[out.i].grad;
      M& ga = grad_ref(a);
      for (Eigen::Index i = 0; i < y.rows(); ++i) {
        const S dot = (g.row(i).array() * y.row(i).array()).sum();
        ga.row(i).array() += (g.row(i).array() - dot) * y.row(i).array();
      }
    });
    return out;
  }

  /// Row-wise layer normalization with learnable [1 x d] gain and bias.
  Var layer_norm(Var x, Var gain, Var bias, S eps) {
    const Eigen::Index d = value(x).cols();
    if (value(gain).rows() != 1 || value(gain).cols() != d || value(bias).rows() != 1 ||
        value(bias).cols() != d)
      throw ShapeError("layer_norm: gain/bias must be [1 x cols(x)]");
    const M& xin = value(x);
    M xhat(xin.rows(), d), inv_sd(xin.rows(), 1);
    for (Eigen::Index i = 0; i < xin.rows(); ++i) {
      const S mu = xin.row(i).mean();
      const S var = (xin.row(i).array() - mu).square().mean();
      const S inv = S(1) / std::sqrt(var + eps);
      inv_sd(i, 0) = inv;
      xhat.row(i) = ((xin.row(i).array() - mu) * inv).matrix();
    }
    M v = (xhat.array().rowwise() * value(gain).row(0).array()).matrix().rowwise() +
          value(bias).row(0);
    const Var out = push(std::move(v), needs(x) || needs(gain) || needs(bias));
    attach(out, [this, out, x, gain, bias, xhat = std::move(xhat), inv_sd = std::move(inv_sd), d] {
      const M& g = nodes_[out.i].grad;
      if (needs(bias)) grad_ref(bias) += g.colwise().sum();
      if (needs(gain)) grad_ref(gain) += (g.array() * xhat.array()).colwise().sum().matrix();
      if (!needs(x)) return;
      M& gx = grad_ref(x);
      const auto grow = value(gain).row(0).array();
      for (Eigen::Index i = 0; i < g.rows(); ++i) {
        const auto u = g.row(i).array() * grow;  // dL/dxhat
        const S mu_u = u.mean();
        const S mu_ux = (u * xhat.row(i).array()).mean();
        gx.row(i).array() += (u - mu_u - xhat.row(i).array() * mu_ux) * inv_sd(i, 0);
      }
    });
    return out;
  }

  /// Inverted dropout; identity unless recording (training) and p > 0.
  Var dropout(Var a, S p, Rng& rng) {
    if (!recording_ || p <= S(0)) return a;
    if (p >= S(1)) throw ConfigError("dropout probability must be < 1");
    M mask(value(a).rows(), value(a).cols());
    const S keep = S(1) - p;
    for (Eigen::Index i = 0; i < mask.rows(); ++i)
      for (Eigen::Index j = 0; j < mask.cols(); ++j)
        mask(i, j) = rng.bernoulli(static_cast<double>(keep)) ? S(1) / keep : S(0);
    return cmul_const(a, std::move(mask));
  }

  // -- backward ---------------------------------------------------------------

  /// Seeds d(target)/d(target) = 1 and propagates. `target` must be [1 x 1].
  void backward(Var target) {
    if (!recording_) throw ConfigError("backward() on a non-recording tape");
    if (value(target).size() != 1) throw ShapeError("backward target must be [1 x 1]");
    grad_ref(target)(0, 0) += S(1);
    for (int i = target.i; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.needs_grad && n.back && n.grad.size() != 0) n.back();
    }
  }

 private:
  struct Node {
    M val;
    const M* external = nullptr;
    M grad;  // allocated lazily
    bool needs_grad = false;
    std::function<void()> back;
  };

  std::vector<Node> nodes_;
  bool recording_;

  int check(Var v) const {
    if (!v.valid() || v.i >= size()) throw IndexError("invalid tape variable");
    return v.i;
  }

  Node& node(Var v) { return nodes_[check(v)]; }

  bool needs(Var v) const { return nodes_[check(v)].needs_grad; }

  M& grad_ref(Var v) {
    Node& n = node(v);
    if (n.grad.size() == 0) {
      const M& val = n.external ? *n.external : n.val;
      n.grad = M::Zero(val.rows(), val.cols());
    }
    return n.grad;
  }

  Var push(M v, bool needs_grad) {
    Node n;
    n.val = std::move(v);
    n.needs_grad = recording_ && needs_grad;
    nodes_.push_back(std::move(n));
    return Var{size() - 1};
  }

  void attach(Var out, std::function<void()> fn) {
    if (node(out).needs_grad) node(out).back = std::move(fn);
  }

  void same_shape(Var a, Var b, const char* who) const {
    if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols())
      throw ShapeError(std::string(who) + ": operand shapes differ");
  }

  void same_shape_const(Var a, const M& m, const char* who) const {
    if (value(a).rows() != m.rows() || value(a).cols() != m.cols())
      throw ShapeError(std::string(who) + ": constant shape differs");
  }

  static void bound_check(int id, Eigen::Index rows, const char* who) {
    if (id < 0 || id >= rows)
      throw IndexError(std::string(who) + ": row " + std::to_string(id) + " outside table of " +
                       std::to_string(rows) + " rows");
  }
};

}  // namespace cfkt::nn
