#pragma once

// Reverse-mode differentiation over batched 2-D tensors.
//
// A Tape records primitive operations in execution order; every recorded node
// keeps its value and a closure that pushes its output gradient to its inputs.
// Rows are batch entries, columns are features.

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "neuralese/common.hpp"

namespace neuralese::nn {

using Tensor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

inline std::string shape_string(const Tensor& t) {
  return "[" + std::to_string(t.rows()) + "x" + std::to_string(t.cols()) + "]";
}

/// A trainable tensor that outlives any single tape.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {
    grad = Tensor::Zero(value.rows(), value.cols());
  }

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Tape;

/// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value) { return push(std::move(value), nullptr); }

  /// Leaf that reads `p.value` in place and accumulates into `p.grad`.
  /// Repeated calls for the same parameter share one node.
  Var param(Parameter& p) {
    if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var{this, it->second};
    Node node;
    node.external = &p.value;
    node.parameter = &p;
    nodes_.push_back(std::move(node));
    std::size_t id = nodes_.size() - 1;
    param_nodes_.emplace(&p, id);
    return Var{this, id};
  }

  Var record(Tensor value, BackwardFn backward) { return push(std::move(value), std::move(backward)); }

  const Tensor& value(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.external != nullptr ? *n.external : n.value;
  }

  /// Gradient buffer of a node, allocated as zeros on first access.
  Tensor& grad(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) {
      const Tensor& v = value(id);
      n.grad = Tensor::Zero(v.rows(), v.cols());
    }
    return n.grad;
  }

  bool has_grad(std::size_t id) const { return nodes_[id].grad.size() != 0; }

  std::size_t size() const { return nodes_.size(); }

  /// Propagates d(loss)/d(node) from a 1x1 loss to every reachable node and
  /// accumulates into parameter gradients. Allowed once per tape.
  void backward(Var loss) {
    const Tensor& v = value(loss.id);
    if (v.rows() != 1 || v.cols() != 1) {
      throw NonScalarLoss("backward requires a 1x1 loss, got " + shape_string(v));
    }
    if (backward_done_) throw Error("tape already differentiated; record a new forward pass");
    backward_done_ = true;
    grad(loss.id)(0, 0) = 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.grad.size() == 0) continue;
      if (n.backward) n.backward(*this, i);
      if (n.parameter != nullptr) n.parameter->grad += n.grad;
    }
  }

 private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;
    Parameter* parameter = nullptr;
    Tensor grad;
    BackwardFn backward;
  };

  Var push(Tensor value, BackwardFn backward) {
    Node node;
    node.value = std::move(value);
    node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return Var{this, nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
  bool backward_done_ = false;
};

inline const Tensor& Var::value() const { return tape->value(id); }

namespace detail {

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeMismatch(std::string(op) + ": " + shape_string(a) + " vs " + shape_string(b));
  }
}

inline void require_same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw Error("operands recorded on different tapes");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Primitives

inline Var matmul(Var a, Var b) {
  detail::require_same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw ShapeMismatch("matmul: " + shape_string(av) + " x " + shape_string(bv));
  }
  Tensor out = av * bv;
  return a.tape->record(std::move(out), [ai = a.id, bi = b.id](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor ga = g * t.value(bi).transpose();
    Tensor gb = t.value(ai).transpose() * g;
    t.grad(ai) += ga;
    t.grad(bi) += gb;
  });
}

/// x * w + b, with b a 1 x out row broadcast over the batch.
inline Var affine(Var x, Var w, Var b) {
  detail::require_same_tape(x, w);
  detail::require_same_tape(x, b);
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const Tensor& bv = b.value();
  if (xv.cols() != wv.rows() || bv.rows() != 1 || bv.cols() != wv.cols()) {
    throw ShapeMismatch("affine: x" + shape_string(xv) + " w" + shape_string(wv) + " b" +
                        shape_string(bv));
  }
  Tensor out = xv * wv;
  out.rowwise() += bv.row(0);
  return x.tape->record(std::move(out), [xi = x.id, wi = w.id, bi = b.id](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor gx = g * t.value(wi).transpose();
    Tensor gw = t.value(xi).transpose() * g;
    t.grad(xi) += gx;
    t.grad(wi) += gw;
    t.grad(bi) += g.colwise().sum();
  });
}

inline Var add(Var a, Var b) {
  detail::require_same_tape(a, b);
  detail::require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value() + b.value();
  return a.tape->record(std::move(out), [ai = a.id, bi = b.id](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    t.grad(ai) += g;
    t.grad(bi) += g;
  });
}

inline Var sub(Var a, Var b) {
  detail::require_same_tape(a, b);
  detail::require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value() - b.value();
  return a.tape->record(std::move(out), [ai = a.id, bi = b.id](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    t.grad(ai) += g;
    t.grad(bi) -= g;
  });
}

/// Elementwise product.
inline Var mul(Var a, Var b) {
  detail::require_same_tape(a, b);
  detail::require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value().cwiseProduct(b.value());
  return a.tape->record(std::move(out), [ai = a.id, bi = b.id](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor ga = g.cwiseProduct(t.value(bi));
    Tensor gb = g.cwiseProduct(t.value(ai));
    t.grad(ai) += ga;
    t.grad(bi) += gb;
  });
}

inline Var scale(Var a, double s) {
  Tensor out = a.value() * s;
  return a.tape->record(std::move(out), [ai = a.id, s](Tape& t, std::size_t self) {
    t.grad(ai) += t.grad(self) * s;
  });
}

/// 1 - a, elementwise.
inline Var one_minus(Var a) {
  Tensor out = (1.0 - a.value().array()).matrix();
  return a.tape->record(std::move(out), [ai = a.id](Tape& t, std::size_t self) {
    t.grad(ai) -= t.grad(self);
  });
}

inline Var tanh(Var a) {
  Tensor out = a.value().array().tanh().matrix();
  return a.tape->record(std::move(out), [ai = a.id](Tape& t, std::size_t self) {
    const Tensor& y = t.value(self);
    Tensor ga = t.grad(self).array() * (1.0 - y.array().square());
    t.grad(ai) += ga;
  });
}

inline Var sigmoid(Var a) {
  Tensor out = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return a.tape->record(std::move(out), [ai = a.id](Tape& t, std::size_t self) {
    const Tensor& y = t.value(self);
    Tensor ga = t.grad(self).array() * y.array() * (1.0 - y.array());
    t.grad(ai) += ga;
  });
}

/// [a | b] along columns.
inline Var concat_cols(Var a, Var b) {
  detail::require_same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rows() != bv.rows()) {
    throw ShapeMismatch("concat_cols: " + shape_string(av) + " | " + shape_string(bv));
  }
  Tensor out(av.rows(), av.cols() + bv.cols());
  out << av, bv;
  Index split = av.cols();
  return a.tape->record(std::move(out), [ai = a.id, bi = b.id, split](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    t.grad(ai) += g.leftCols(split);
    t.grad(bi) += g.rightCols(g.cols() - split);
  });
}

/// Picks a[i, cols[i]] for every row; the result is rows x 1.
inline Var gather_cols(Var a, std::vector<Index> cols) {
  const Tensor& av = a.value();
  if (static_cast<Index>(cols.size()) != av.rows()) {
    throw ShapeMismatch("gather_cols: " + std::to_string(cols.size()) + " indices for " +
                        shape_string(av));
  }
  Tensor out(av.rows(), 1);
  for (Index i = 0; i < av.rows(); ++i) {
    if (cols[i] < 0 || cols[i] >= av.cols()) throw ShapeMismatch("gather_cols: index out of range");
    out(i, 0) = av(i, cols[i]);
  }
  return a.tape->record(std::move(out), [ai = a.id, cols = std::move(cols)](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(ai);
    for (Index i = 0; i < g.rows(); ++i) ga(i, cols[i]) += g(i, 0);
  });
}

/// Row i of the result is row perm[i] of a.
inline Var permute_rows(Var a, std::vector<Index> perm) {
  const Tensor& av = a.value();
  if (static_cast<Index>(perm.size()) != av.rows()) {
    throw ShapeMismatch("permute_rows: " + std::to_string(perm.size()) + " indices for " + shape_string(av));
  }
  Tensor out(av.rows(), av.cols());
  for (Index i = 0; i < av.rows(); ++i) {
    if (perm[i] < 0 || perm[i] >= av.rows()) throw ShapeMismatch("permute_rows: index out of range");
    out.row(i) = av.row(perm[i]);
  }
  return a.tape->record(std::move(out), [ai = a.id, perm = std::move(perm)](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(ai);
    for (Index i = 0; i < g.rows(); ++i) ga.row(perm[i]) += g.row(i);
  });
}

/// Sum of all entries, as a 1x1 tensor.
inline Var sum(Var a) {
  Tensor out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape->record(std::move(out), [ai = a.id](Tape& t, std::size_t self) {
    t.grad(ai).array() += t.grad(self)(0, 0);
  });
}

inline Var mean(Var a) {
  double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

/// Mean cross-entropy of row-wise softmax(logits) against integer labels.
inline Var softmax_xent(Var logits, const std::vector<Index>& labels) {
  const Tensor& lv = logits.value();
  if (static_cast<Index>(labels.size()) != lv.rows()) {
    throw ShapeMismatch("softmax_xent: " + std::to_string(labels.size()) + " labels for " +
                        shape_string(lv));
  }
  Tensor probs(lv.rows(), lv.cols());
  double loss = 0.0;
  for (Index i = 0; i < lv.rows(); ++i) {
    double hi = lv.row(i).maxCoeff();
    auto e = (lv.row(i).array() - hi).exp();
    double z = e.sum();
    probs.row(i) = e / z;
    Index y = labels[i];
    if (y < 0 || y >= lv.cols()) throw ShapeMismatch("softmax_xent: label out of range");
    loss -= lv(i, y) - hi - std::log(z);
  }
  double n = static_cast<double>(lv.rows());
  Tensor out(1, 1);
  out(0, 0) = loss / n;
  return logits.tape->record(
      std::move(out), [li = logits.id, probs = std::move(probs), labels, n](Tape& t, std::size_t self) {
        double g = t.grad(self)(0, 0);
        Tensor gl = probs;
        for (Index i = 0; i < gl.rows(); ++i) gl(i, labels[i]) -= 1.0;
        t.grad(li) += gl * (g / n);
      });
}

/// Weighted mean squared error: sum w * (pred - target)^2 / sum w. With no
/// weights every entry counts once.
inline Var mse(Var pred, const Tensor& target, const Tensor* weights = nullptr) {
  const Tensor& pv = pred.value();
  detail::require_same_shape(pv, target, "mse");
  Tensor w = weights != nullptr ? *weights : Tensor::Ones(pv.rows(), pv.cols());
  detail::require_same_shape(pv, w, "mse weights");
  double denom = w.sum();
  if (denom <= 0.0) denom = 1.0;
  Tensor diff = pv - target;
  Tensor out(1, 1);
  out(0, 0) = (w.array() * diff.array().square()).sum() / denom;
  return pred.tape->record(std::move(out), [pi = pred.id, diff = std::move(diff), w = std::move(w),
                                            denom](Tape& t, std::size_t self) {
    double g = t.grad(self)(0, 0);
    Tensor gp = (w.array() * diff.array() * (2.0 * g / denom)).matrix();
    t.grad(pi) += gp;
  });
}

/// a + N(0, sigma^2). The draw is stored on the tape as a constant, so the
/// gradient passes straight through.
inline Var add_gaussian_noise(Var a, double sigma, Rng& rng) {
  if (sigma < 0.0) throw InvalidConfig("add_gaussian_noise: sigma must be >= 0");
  Tensor out = a.value();
  if (sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, sigma);
    for (Index i = 0; i < out.size(); ++i) out.data()[i] += noise(rng);
  }
  return a.tape->record(std::move(out), [ai = a.id](Tape& t, std::size_t self) {
    t.grad(ai) += t.grad(self);
  });
}

}  // namespace neuralese::nn
