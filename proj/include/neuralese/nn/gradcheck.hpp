#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "neuralese/nn/adam.hpp"

namespace neuralese::nn {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  Index worst_index = -1;
  std::size_t entries_checked = 0;

  bool passed(double tolerance) const { return max_relative_error < tolerance; }
};

struct GradCheckOptions {
  double step = 1e-5;
  /// Relative error is |a - n| / max(|a|, |n|, floor); the floor keeps
  /// near-zero gradients from dominating through rounding noise.
  double floor = 1e-6;
  /// 0 checks every entry; otherwise this many randomly chosen entries per
  /// parameter.
  std::size_t max_entries_per_param = 0;
  std::uint64_t seed = 0;
};

/// Compares analytic gradients against central differences.
///
/// `loss` must build a fresh tape, run the forward pass, and return the loss
/// node; the checker calls it once with backward and then repeatedly for the
/// perturbed evaluations.
inline GradCheckReport finite_difference_check(const std::function<Var(Tape&)>& loss,
                                               ParamRefs params,
                                               const GradCheckOptions& opts = {}) {
  zero_grads(params);
  {
    Tape tape;
    tape.backward(loss(tape));
  }
  auto evaluate = [&]() {
    Tape tape;
    return loss(tape).value()(0, 0);
  };

  GradCheckReport report;
  Rng rng(opts.seed);
  for (Parameter& p : params) {
    std::vector<Index> entries;
    Index n = p.value.size();
    if (opts.max_entries_per_param == 0 || static_cast<std::size_t>(n) <= opts.max_entries_per_param) {
      for (Index i = 0; i < n; ++i) entries.push_back(i);
    } else {
      for (std::size_t k = 0; k < opts.max_entries_per_param; ++k) {
        entries.push_back(static_cast<Index>(uniform_index(rng, static_cast<std::size_t>(n))));
      }
    }
    for (Index i : entries) {
      double& x = p.value.data()[i];
      double saved = x;
      x = saved + opts.step;
      double up = evaluate();
      x = saved - opts.step;
      double down = evaluate();
      x = saved;
      double numeric = (up - down) / (2.0 * opts.step);
      double analytic = p.grad.data()[i];
      double denom = std::max({std::abs(analytic), std::abs(numeric), opts.floor});
      double err = std::abs(analytic - numeric) / denom;
      ++report.entries_checked;
      if (!(err <= report.max_relative_error)) {
        report.max_relative_error = std::isnan(err) ? kInf : err;
        report.worst_parameter = p.name;
        report.worst_index = i;
      }
    }
  }
  return report;
}

}  // namespace neuralese::nn
