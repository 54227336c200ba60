#pragma once

#include <random>
#include <utility>
#include <vector>

#include "neuralese/core/quality.hpp"

namespace neuralese {

/// ContextSampler over an EnumeratedGame: pairs come from the joint, and
/// distractors from p(x_a' | x_b) restricted to x_a' != x_a. When x_a is the
/// only state compatible with x_b, the distractor is x_a itself.
template <class A, class B>
class EnumeratedSampler {
 public:
  using SpeakerObs = A;
  using ListenerObs = B;

  explicit EnumeratedSampler(const EnumeratedGame<A, B>& game) : game_(game) {
    std::vector<double> flat;
    for (std::size_t i = 0; i < game.n_speaker(); ++i) {
      for (std::size_t j = 0; j < game.n_listener(); ++j) flat.push_back(game.joint[i][j]);
    }
    pair_dist_ = std::discrete_distribution<std::size_t>(flat.begin(), flat.end());
  }

  std::pair<A, B> sample_pair(Rng& rng) const {
    std::size_t k = pair_dist_(rng);
    std::size_t i = k / game_.n_listener();
    std::size_t j = k % game_.n_listener();
    return {game_.speaker_obs[i], game_.listener_obs[j]};
  }

  A sample_distractor(const A& xa, const B& xb, Rng& rng) const {
    std::size_t j = listener_index(xb);
    std::vector<double> w(game_.n_speaker(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < game_.n_speaker(); ++i) {
      if (game_.speaker_obs[i] == xa) continue;
      w[i] = game_.joint[i][j];
      total += w[i];
    }
    if (total <= 0.0) return xa;
    std::discrete_distribution<std::size_t> d(w.begin(), w.end());
    return game_.speaker_obs[d(rng)];
  }

 private:
  std::size_t listener_index(const B& xb) const {
    for (std::size_t j = 0; j < game_.n_listener(); ++j) {
      if (game_.listener_obs[j] == xb) return j;
    }
    throw InvalidConfig("listener observation is not part of the enumerated game");
  }

  const EnumeratedGame<A, B>& game_;
  mutable std::discrete_distribution<std::size_t> pair_dist_;
};

}  // namespace neuralese
