#pragma once

#include <concepts>
#include <utility>
#include <vector>

#include "neuralese/common.hpp"

namespace neuralese {

/// A message generation model p(z | x) over speaker observations.
///
/// `prepare` does whatever per-observation work can be shared across
/// messages (an MLP forward pass, a softmax); `log_prob` then scores one
/// message against that prepared observation. Categorical speakers set
/// `categorical = true` and expose a finite `inventory()`; their message
/// prior is estimated empirically by the quality estimator.
template <class S>
concept SpeakerModel = requires(const S& s, const typename S::Message& z,
                                const typename S::Observation& x, const typename S::Prepared& p) {
  typename S::Message;
  typename S::Observation;
  typename S::Prepared;
  { S::categorical } -> std::convertible_to<bool>;
  { s.prepare(x) } -> std::convertible_to<typename S::Prepared>;
  { s.log_prob(z, p) } -> std::convertible_to<double>;
  { s.log_message_prior(z) } -> std::convertible_to<double>;
};

template <class S>
concept FiniteSpeakerModel = SpeakerModel<S> && requires(const S& s) {
  { s.inventory() } -> std::convertible_to<std::vector<typename S::Message>>;
};

template <SpeakerModel S>
double log_message_prob(const S& speaker, const typename S::Message& z,
                        const typename S::Observation& x) {
  return speaker.log_prob(z, speaker.prepare(x));
}

/// Draws world states and distractors for the sampled quality estimate.
///
/// `sample_distractor` draws x_a' from p(x_a' | x_b) excluding the true x_a
/// when the game allows it.
template <class C>
concept ContextSampler = requires(const C& c, Rng& rng, const typename C::SpeakerObs& xa,
                                  const typename C::ListenerObs& xb) {
  typename C::SpeakerObs;
  typename C::ListenerObs;
  { c.sample_pair(rng) } -> std::convertible_to<std::pair<typename C::SpeakerObs, typename C::ListenerObs>>;
  { c.sample_distractor(xa, xb, rng) } -> std::convertible_to<typename C::SpeakerObs>;
};

/// Speaker over integer-indexed observations given by an explicit table
/// probs[x][z]. Used for enumerable games and the shapes languages.
class TabularSpeaker {
 public:
  using Message = int;
  using Observation = int;
  using Prepared = int;
  static constexpr bool categorical = true;

  TabularSpeaker() = default;
  explicit TabularSpeaker(std::vector<std::vector<double>> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) throw InvalidConfig("TabularSpeaker: empty table");
    for (const auto& row : probs_) {
      if (row.size() != probs_.front().size()) throw InvalidConfig("TabularSpeaker: ragged table");
      double total = 0.0;
      for (double p : row) {
        if (p < 0.0) throw InvalidConfig("TabularSpeaker: negative probability");
        total += p;
      }
      if (std::abs(total - 1.0) > 1e-6) throw InvalidConfig("TabularSpeaker: row does not sum to 1");
    }
  }

  /// Deterministic speaker: observation x always says messages[x].
  static TabularSpeaker deterministic(const std::vector<int>& messages, int n_messages) {
    std::vector<std::vector<double>> probs(messages.size(), std::vector<double>(n_messages, 0.0));
    for (std::size_t x = 0; x < messages.size(); ++x) probs[x].at(messages[x]) = 1.0;
    return TabularSpeaker(std::move(probs));
  }

  int n_observations() const { return static_cast<int>(probs_.size()); }
  int n_messages() const { return static_cast<int>(probs_.front().size()); }
  double prob(int z, int x) const { return probs_.at(x).at(z); }
  const std::vector<std::vector<double>>& table() const { return probs_; }

  int prepare(int x) const { return x; }
  double log_prob(int z, int x) const {
    if (z < 0 || z >= n_messages()) return kNegInf;
    return safe_log(probs_.at(x)[z]);
  }
  double log_message_prior(int z) const {
    double total = 0.0;
    for (const auto& row : probs_) total += row.at(z);
    return safe_log(total / static_cast<double>(probs_.size()));
  }
  std::vector<int> inventory() const {
    std::vector<int> out(n_messages());
    for (int z = 0; z < n_messages(); ++z) out[z] = z;
    return out;
  }

 private:
  std::vector<std::vector<double>> probs_;
};

}  // namespace neuralese
