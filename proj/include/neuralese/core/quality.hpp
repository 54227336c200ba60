#pragma once

// Translation quality q(z, z'): the expected divergence between the beliefs
// two messages induce, over contexts in which both are plausibly used.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "neuralese/core/belief.hpp"

namespace neuralese {

/// Full joint prior over (x_a, x_b) for games small enough to enumerate.
/// joint[i][j] = p(x_a = speaker_obs[i], x_b = listener_obs[j]).
template <class A, class B>
struct EnumeratedGame {
  std::vector<A> speaker_obs;
  std::vector<B> listener_obs;
  std::vector<std::vector<double>> joint;

  std::size_t n_speaker() const { return speaker_obs.size(); }
  std::size_t n_listener() const { return listener_obs.size(); }

  /// Candidates for x_a given listener context j, weighted by the joint.
  std::vector<Candidate<A>> candidates(std::size_t j) const {
    std::vector<Candidate<A>> out;
    for (std::size_t i = 0; i < speaker_obs.size(); ++i) {
      if (joint[i][j] > 0.0) out.push_back({speaker_obs[i], joint[i][j]});
    }
    return out;
  }
};

/// Which contexts the outer expectation ranges over.
enum class ContextWeighting {
  /// p(x_a, x_b) p(z|x_a) p(z'|x_a): contexts where both messages are used.
  kCooccurrence,
  /// p(x_a, x_b) p(z|x_a): every context where the source message is used.
  kSource,
};

/// Exact q by enumeration over an EnumeratedGame. Speaker observations are
/// prepared once, so one scorer can evaluate many message pairs.
template <SpeakerModel Src, SpeakerModel Tgt, class B>
  requires std::same_as<typename Src::Observation, typename Tgt::Observation>
class ExactScorer {
 public:
  using A = typename Src::Observation;

  ExactScorer(const EnumeratedGame<A, B>& game, const Src& src, const Tgt& tgt)
      : game_(game), src_(src), tgt_(tgt) {
    src_prep_.reserve(game.n_speaker());
    tgt_prep_.reserve(game.n_speaker());
    for (const A& x : game.speaker_obs) {
      src_prep_.push_back(src.prepare(x));
      tgt_prep_.push_back(tgt.prepare(x));
    }
    support_.resize(game.n_listener());
    for (std::size_t j = 0; j < game.n_listener(); ++j) {
      for (std::size_t i = 0; i < game.n_speaker(); ++i) {
        if (game.joint[i][j] > 0.0) support_[j].push_back({i, std::log(game.joint[i][j])});
      }
    }
  }

  Score operator()(const typename Src::Message& z, const typename Tgt::Message& z_prime,
                   ContextWeighting weighting = ContextWeighting::kCooccurrence) const {
    const std::size_t na = game_.n_speaker();
    std::vector<double> lz(na), lzp(na);
    for (std::size_t i = 0; i < na; ++i) {
      lz[i] = src_.log_prob(z, src_prep_[i]);
      lzp[i] = tgt_.log_prob(z_prime, tgt_prep_[i]);
    }

    std::vector<double> log_weight;
    std::vector<double> kl;
    std::vector<double> bz, bzp, pair;
    for (std::size_t j = 0; j < game_.n_listener(); ++j) {
      bz.clear();
      bzp.clear();
      pair.clear();
      for (const auto& [i, lp] : support_[j]) {
        bz.push_back(lz[i] + lp);
        bzp.push_back(lzp[i] + lp);
        pair.push_back(weighting == ContextWeighting::kCooccurrence ? lz[i] + lzp[i] + lp : lz[i] + lp);
      }
      double lw = log_sum_exp(pair);
      if (lw == kNegInf) continue;
      double nz = log_sum_exp(bz);
      double nzp = log_sum_exp(bzp);
      double d;
      if (nzp == kNegInf) {
        d = kInf;
      } else {
        for (double& v : bz) v -= nz;
        for (double& v : bzp) v -= nzp;
        d = kl_from_logs(bz, bzp);
      }
      log_weight.push_back(lw);
      kl.push_back(d);
    }
    if (log_weight.empty()) return Score::infeasible();
    double total = log_sum_exp(log_weight);
    double q = 0.0;
    for (std::size_t k = 0; k < kl.size(); ++k) {
      double w = std::exp(log_weight[k] - total);
      if (w == 0.0) continue;
      if (!std::isfinite(kl[k])) return Score::infeasible();
      q += w * kl[k];
    }
    return Score(q);
  }

 private:
  const EnumeratedGame<A, B>& game_;
  const Src& src_;
  const Tgt& tgt_;
  std::vector<typename Src::Prepared> src_prep_;
  std::vector<typename Tgt::Prepared> tgt_prep_;
  // Per listener context: speaker observations with nonzero prior, and its log.
  std::vector<std::vector<std::pair<std::size_t, double>>> support_;
};

template <SpeakerModel Src, SpeakerModel Tgt, class B>
Score exact_q(const typename Src::Message& z, const typename Tgt::Message& z_prime, const Src& src,
              const Tgt& tgt, const EnumeratedGame<typename Src::Observation, B>& game,
              ContextWeighting weighting = ContextWeighting::kCooccurrence) {
  return ExactScorer<Src, Tgt, B>(game, src, tgt)(z, z_prime, weighting);
}

/// How the per-context divergence k_i is formed from a sample and its
/// distractors.
enum class DivergenceForm {
  /// KL between the beliefs renormalized over {x_a, x_a'_1..m}.
  kTwoPointNormalized,
  /// sum_x p(z|x) log[(p(z|x) / p(z'|x)) (p(z') / p(z))], unnormalized.
  kUnnormalized,
};

struct QEstimateConfig {
  std::size_t n_contexts = 100;
  std::size_t n_distractors_per_context = 1;
  std::uint64_t rng_seed = 0;
  DivergenceForm divergence = DivergenceForm::kTwoPointNormalized;

  void validate() const {
    if (n_contexts < 1) throw InvalidConfig("n_contexts must be >= 1");
    if (n_distractors_per_context < 1) throw InvalidConfig("n_distractors_per_context must be >= 1");
  }
};

/// Sampled q estimate. The constructor draws the contexts and distractors
/// once from `cfg.rng_seed`; every subsequent call reuses them, so scores
/// for different candidate translations share the same sample.
template <SpeakerModel Src, SpeakerModel Tgt>
  requires std::same_as<typename Src::Observation, typename Tgt::Observation>
class QEstimator {
 public:
  using SrcMsg = typename Src::Message;
  using TgtMsg = typename Tgt::Message;

  template <ContextSampler C>
    requires std::same_as<typename C::SpeakerObs, typename Src::Observation>
  QEstimator(const C& sampler, const Src& src, const Tgt& tgt, const QEstimateConfig& cfg)
      : src_(src), tgt_(tgt), cfg_(cfg) {
    cfg.validate();
    Rng rng(cfg.rng_seed);
    const std::size_t points = 1 + cfg.n_distractors_per_context;
    src_prep_.reserve(cfg.n_contexts * points);
    tgt_prep_.reserve(cfg.n_contexts * points);
    for (std::size_t i = 0; i < cfg.n_contexts; ++i) {
      auto [xa, xb] = sampler.sample_pair(rng);
      src_prep_.push_back(src.prepare(xa));
      tgt_prep_.push_back(tgt.prepare(xa));
      for (std::size_t d = 0; d < cfg.n_distractors_per_context; ++d) {
        auto xd = sampler.sample_distractor(xa, xb, rng);
        src_prep_.push_back(src.prepare(xd));
        tgt_prep_.push_back(tgt.prepare(xd));
      }
    }
  }

  const QEstimateConfig& config() const { return cfg_; }

  Score operator()(const SrcMsg& z, const TgtMsg& z_prime) const {
    auto lz = source_logs(z);
    double src_prior = log_prior(src_, z, src_prep_);
    return score_with(lz, src_prior, z_prime);
  }

  /// Scores every candidate against the same sample.
  std::vector<Score> score_all(const SrcMsg& z, std::span<const TgtMsg> candidates) const {
    auto lz = source_logs(z);
    double src_prior = cfg_.divergence == DivergenceForm::kUnnormalized ? log_prior(src_, z, src_prep_) : 0.0;
    std::vector<Score> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) out.push_back(score_with(lz, src_prior, c));
    return out;
  }

  /// Co-occurrence mass sum_i p(z|x_ai) p(z'|x_ai), in log space. This is the
  /// quantity the direct translation baseline maximizes.
  double log_cooccurrence(const SrcMsg& z, const TgtMsg& z_prime) const {
    auto lz = source_logs(z);
    return log_cooccurrence_with(lz, z_prime);
  }

  std::vector<double> log_cooccurrence_all(const SrcMsg& z, std::span<const TgtMsg> candidates) const {
    auto lz = source_logs(z);
    std::vector<double> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) out.push_back(log_cooccurrence_with(lz, c));
    return out;
  }

 private:
  std::size_t points() const { return 1 + cfg_.n_distractors_per_context; }

  std::vector<double> source_logs(const SrcMsg& z) const {
    std::vector<double> lz(src_prep_.size());
    for (std::size_t k = 0; k < src_prep_.size(); ++k) lz[k] = src_.log_prob(z, src_prep_[k]);
    return lz;
  }

  /// Categorical speakers: log of the empirical marginal of z over the
  /// sampled true contexts. Others: the speaker's own prior.
  template <class S, class Prep>
  double log_prior(const S& speaker, const typename S::Message& z, const std::vector<Prep>& prep) const {
    if constexpr (S::categorical) {
      std::vector<double> ls;
      ls.reserve(cfg_.n_contexts);
      for (std::size_t i = 0; i < cfg_.n_contexts; ++i) ls.push_back(speaker.log_prob(z, prep[i * points()]));
      return log_sum_exp(ls) - std::log(static_cast<double>(cfg_.n_contexts));
    } else {
      return speaker.log_message_prior(z);
    }
  }

  double log_cooccurrence_with(const std::vector<double>& lz, const TgtMsg& z_prime) const {
    std::vector<double> terms(cfg_.n_contexts);
    for (std::size_t i = 0; i < cfg_.n_contexts; ++i) {
      std::size_t k = i * points();
      terms[i] = lz[k] + tgt_.log_prob(z_prime, tgt_prep_[k]);
    }
    return log_sum_exp(terms);
  }

  Score score_with(const std::vector<double>& lz, double src_prior, const TgtMsg& z_prime) const {
    const std::size_t m = points();
    std::vector<double> lzp(lz.size());
    for (std::size_t k = 0; k < lz.size(); ++k) lzp[k] = tgt_.log_prob(z_prime, tgt_prep_[k]);

    std::vector<double> log_w(cfg_.n_contexts);
    for (std::size_t i = 0; i < cfg_.n_contexts; ++i) log_w[i] = lz[i * m] + lzp[i * m];
    double total = log_sum_exp(log_w);
    if (total == kNegInf || std::isnan(total)) return Score::infeasible();

    double prior_term = 0.0;
    if (cfg_.divergence == DivergenceForm::kUnnormalized) {
      prior_term = log_prior(tgt_, z_prime, tgt_prep_) - src_prior;
    }

    double q = 0.0;
    std::vector<double> bz(m), bzp(m);
    for (std::size_t i = 0; i < cfg_.n_contexts; ++i) {
      double w = std::exp(log_w[i] - total);
      if (w == 0.0) continue;
      const double* a = &lz[i * m];
      const double* b = &lzp[i * m];
      double k_i = 0.0;
      if (cfg_.divergence == DivergenceForm::kTwoPointNormalized) {
        bz.assign(a, a + m);
        bzp.assign(b, b + m);
        double nz = log_sum_exp(bz);
        double nzp = log_sum_exp(bzp);
        for (double& v : bz) v -= nz;
        for (double& v : bzp) v -= nzp;
        k_i = kl_from_logs(bz, bzp);
      } else {
        for (std::size_t k = 0; k < m; ++k) {
          if (a[k] == kNegInf) continue;
          if (b[k] == kNegInf) {
            k_i = kInf;
            break;
          }
          k_i += std::exp(a[k]) * (a[k] - b[k] + prior_term);
        }
      }
      if (!std::isfinite(k_i)) return Score::infeasible();
      q += w * k_i;
    }
    return Score(q);
  }

  const Src& src_;
  const Tgt& tgt_;
  QEstimateConfig cfg_;
  std::vector<typename Src::Prepared> src_prep_;
  std::vector<typename Tgt::Prepared> tgt_prep_;
};

template <SpeakerModel Src, SpeakerModel Tgt, ContextSampler C>
Score estimate_q(const typename Src::Message& z, const typename Tgt::Message& z_prime,
                 const C& sampler, const Src& src, const Tgt& tgt, const QEstimateConfig& cfg) {
  return QEstimator<Src, Tgt>(sampler, src, tgt, cfg)(z, z_prime);
}

}  // namespace neuralese
