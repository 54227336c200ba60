#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "neuralese/nn/layers.hpp"

namespace neuralese::nn {

struct AdamState {
  double step_size = 0.003;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;

  AdamState() = default;
  explicit AdamState(double lr) : step_size(lr) {}
};

/// One bias-corrected Adam update of `params` in place.
inline void adam_step(std::vector<Tensor*> params, const std::vector<const Tensor*>& grads,
                      AdamState& state) {
  if (params.size() != grads.size()) throw ShapeMismatch("adam_step: params/grads count differ");
  if (state.first_moment.empty()) {
    for (const Tensor* p : params) {
      state.first_moment.push_back(Tensor::Zero(p->rows(), p->cols()));
      state.second_moment.push_back(Tensor::Zero(p->rows(), p->cols()));
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ShapeMismatch("adam_step: state was built for a different parameter list");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->rows() != grads[i]->rows() || params[i]->cols() != grads[i]->cols() ||
        state.first_moment[i].rows() != params[i]->rows() ||
        state.first_moment[i].cols() != params[i]->cols()) {
      throw ShapeMismatch("adam_step: shape mismatch at parameter " + std::to_string(i));
    }
  }
  ++state.step;
  double t = static_cast<double>(state.step);
  double c1 = 1.0 - std::pow(state.beta1, t);
  double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& m = state.first_moment[i];
    Tensor& v = state.second_moment[i];
    const Tensor& g = *grads[i];
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = (state.beta2 * v.array() + (1.0 - state.beta2) * g.array().square()).matrix();
    params[i]->array() -=
        state.step_size * (m.array() / c1) / ((v.array() / c2).sqrt() + state.epsilon);
  }
}

/// Applies Adam to parameters using their accumulated `grad` buffers.
inline void adam_step(ParamRefs& params, AdamState& state) {
  std::vector<Tensor*> values;
  std::vector<const Tensor*> grads;
  values.reserve(params.size());
  grads.reserve(params.size());
  for (Parameter& p : params) {
    values.push_back(&p.value);
    grads.push_back(&p.grad);
  }
  adam_step(std::move(values), grads, state);
}

inline void zero_grads(ParamRefs& params) {
  for (Parameter& p : params) p.zero_grad();
}

inline bool grads_finite(const ParamRefs& params) {
  for (const Parameter& p : params) {
    if (!p.grad.allFinite()) return false;
  }
  return true;
}

}  // namespace neuralese::nn
