#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "neuralese/nn/tape.hpp"

namespace neuralese::nn {

/// Uniform(-s, s) with s = sqrt(6 / (fan_in + fan_out)).
inline Tensor glorot(Index fan_in, Index fan_out, Rng& rng) {
  double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-s, s);
  Tensor w(fan_in, fan_out);
  for (Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  return w;
}

using ParamRefs = std::vector<std::reference_wrapper<Parameter>>;

struct Linear {
  Parameter weight;
  Parameter bias;

  Linear() = default;
  Linear(const std::string& name, Index in, Index out, Rng& rng)
      : weight(name + ".w", glorot(in, out, rng)), bias(name + ".b", Tensor::Zero(1, out)) {}

  Index in_features() const { return weight.value.rows(); }
  Index out_features() const { return weight.value.cols(); }

  Var operator()(Tape& t, Var x) { return affine(x, t.param(weight), t.param(bias)); }

  Tensor eval(const Tensor& x) const {
    Tensor y = x * weight.value;
    y.rowwise() += bias.value.row(0);
    return y;
  }

  void collect(ParamRefs& out) {
    out.emplace_back(weight);
    out.emplace_back(bias);
  }
};

/// One hidden tanh layer followed by a linear readout.
struct Mlp {
  Linear hidden;
  Linear output;

  Mlp() = default;
  Mlp(const std::string& name, Index in, Index width, Index out, Rng& rng)
      : hidden(name + ".hidden", in, width, rng), output(name + ".out", width, out, rng) {}

  Var operator()(Tape& t, Var x) { return output(t, tanh(hidden(t, x))); }

  Tensor eval(const Tensor& x) const {
    Tensor h = hidden.eval(x).array().tanh().matrix();
    return output.eval(h);
  }

  void collect(ParamRefs& out) {
    hidden.collect(out);
    output.collect(out);
  }
};

/// Gated recurrent unit (Cho et al. 2014):
///   r  = sigmoid(x Wr + h Ur + br)
///   u  = sigmoid(x Wu + h Uu + bu)
///   c  = tanh(x Wc + (r * h) Uc + bc)
///   h' = u * h + (1 - u) * c
struct Gru {
  Parameter w_reset, u_reset, b_reset;
  Parameter w_update, u_update, b_update;
  Parameter w_cand, u_cand, b_cand;

  Gru() = default;
  Gru(const std::string& name, Index in, Index hidden, Rng& rng)
      : w_reset(name + ".w_reset", glorot(in, hidden, rng)),
        u_reset(name + ".u_reset", glorot(hidden, hidden, rng)),
        b_reset(name + ".b_reset", Tensor::Zero(1, hidden)),
        w_update(name + ".w_update", glorot(in, hidden, rng)),
        u_update(name + ".u_update", glorot(hidden, hidden, rng)),
        b_update(name + ".b_update", Tensor::Zero(1, hidden)),
        w_cand(name + ".w_cand", glorot(in, hidden, rng)),
        u_cand(name + ".u_cand", glorot(hidden, hidden, rng)),
        b_cand(name + ".b_cand", Tensor::Zero(1, hidden)) {}

  Index input_size() const { return w_reset.value.rows(); }
  Index hidden_size() const { return u_reset.value.rows(); }

  Var operator()(Tape& t, Var x, Var h) {
    if (x.cols() != input_size() || h.cols() != hidden_size() || x.rows() != h.rows()) {
      throw ShapeMismatch("gru_step: x" + shape_string(x.value()) + " h" + shape_string(h.value()));
    }
    Var r = sigmoid(add(affine(x, t.param(w_reset), t.param(b_reset)), matmul(h, t.param(u_reset))));
    Var u = sigmoid(add(affine(x, t.param(w_update), t.param(b_update)), matmul(h, t.param(u_update))));
    Var c = tanh(add(affine(x, t.param(w_cand), t.param(b_cand)), matmul(mul(r, h), t.param(u_cand))));
    return add(mul(u, h), mul(one_minus(u), c));
  }

  Tensor eval(const Tensor& x, const Tensor& h) const {
    auto sig = [](const Tensor& a) -> Tensor { return (1.0 / (1.0 + (-a.array()).exp())).matrix(); };
    auto lin = [&](const Parameter& w, const Parameter& b) -> Tensor {
      Tensor y = x * w.value;
      y.rowwise() += b.value.row(0);
      return y;
    };
    Tensor r = sig(lin(w_reset, b_reset) + h * u_reset.value);
    Tensor u = sig(lin(w_update, b_update) + h * u_update.value);
    Tensor c = (lin(w_cand, b_cand) + r.cwiseProduct(h) * u_cand.value).array().tanh().matrix();
    return (u.array() * h.array() + (1.0 - u.array()) * c.array()).matrix();
  }

  void collect(ParamRefs& out) {
    for (Parameter* p : {&w_reset, &u_reset, &b_reset, &w_update, &u_update, &b_update, &w_cand,
                         &u_cand, &b_cand}) {
      out.emplace_back(*p);
    }
  }
};

}  // namespace neuralese::nn
