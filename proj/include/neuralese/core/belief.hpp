#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "neuralese/core/speaker.hpp"

namespace neuralese {

/// A listener's posterior over candidate speaker observations.
template <class Obs>
struct BeliefState {
  std::vector<Obs> support;
  std::vector<double> probs;
};

/// A candidate speaker observation and its prior weight p(x_a | x_b), up to
/// normalization.
template <class Obs>
struct Candidate {
  Obs obs;
  double weight = 1.0;
};

/// Normalizes log-weights into probabilities. Throws AllZeroLikelihood when
/// every entry is -inf.
inline std::vector<double> normalize_log_weights(std::span<const double> log_w) {
  double lse = log_sum_exp(log_w);
  if (lse == kNegInf) throw AllZeroLikelihood("message has zero likelihood for every candidate");
  std::vector<double> out(log_w.size());
  for (std::size_t i = 0; i < log_w.size(); ++i) out[i] = std::exp(log_w[i] - lse);
  return out;
}

/// D_KL(p || q) in nats. Entries with p = 0 contribute nothing; p > 0 with
/// q = 0 makes the divergence +inf.
inline double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ShapeMismatch("kl_divergence: distributions differ in size");
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return kInf;
    total += p[i] * (std::log(p[i]) - std::log(q[i]));
  }
  return total;
}

/// KL between two distributions given as log-probabilities (already
/// normalized). Avoids the exp/log round trip for tiny probabilities.
inline double kl_from_logs(std::span<const double> log_p, std::span<const double> log_q) {
  double total = 0.0;
  for (std::size_t i = 0; i < log_p.size(); ++i) {
    if (log_p[i] == kNegInf) continue;
    if (log_q[i] == kNegInf) return kInf;
    total += std::exp(log_p[i]) * (log_p[i] - log_q[i]);
  }
  return total;
}

/// log posterior over candidates: log p(z|x_i) + log prior_i - normalizer.
/// Throws AllZeroLikelihood if no candidate can have produced z.
template <SpeakerModel S>
std::vector<double> log_belief(const typename S::Message& z,
                               std::span<const Candidate<typename S::Observation>> candidates,
                               const S& speaker) {
  if (candidates.empty()) throw InvalidConfig("belief: empty candidate set");
  std::vector<double> lw(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    lw[i] = log_message_prob(speaker, z, candidates[i].obs) + safe_log(candidates[i].weight);
  }
  double lse = log_sum_exp(lw);
  if (lse == kNegInf) throw AllZeroLikelihood("message has zero likelihood for every candidate");
  for (double& v : lw) v -= lse;
  return lw;
}

template <SpeakerModel S>
BeliefState<typename S::Observation> belief(
    const typename S::Message& z, std::span<const Candidate<typename S::Observation>> candidates,
    const S& speaker) {
  auto lw = log_belief(z, candidates, speaker);
  BeliefState<typename S::Observation> out;
  out.support.reserve(candidates.size());
  out.probs.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    out.support.push_back(candidates[i].obs);
    out.probs.push_back(std::exp(lw[i]));
  }
  return out;
}

/// D_KL(belief(z) || belief(z')) over the same candidate set. Returns +inf
/// (never throws) when z' rules out a state z allows.
template <SpeakerModel Src, SpeakerModel Tgt>
  requires std::same_as<typename Src::Observation, typename Tgt::Observation>
double kl_beliefs(const typename Src::Message& z, const typename Tgt::Message& z_prime,
                  std::span<const Candidate<typename Src::Observation>> candidates,
                  const Src& speaker_src, const Tgt& speaker_tgt) {
  auto lp = log_belief(z, candidates, speaker_src);
  std::vector<double> lq;
  try {
    lq = log_belief(z_prime, candidates, speaker_tgt);
  } catch (const AllZeroLikelihood&) {
    return kInf;
  }
  return kl_from_logs(lp, lq);
}

}  // namespace neuralese
