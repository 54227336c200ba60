#pragma once

// Single-step reference games small enough to enumerate: the speaker sees
// x_a and sends one message, the listener sees x_b and the message and acts
// once. Used to check the reward bound for translated messages numerically.

#include <cmath>
#include <vector>

#include <nlohmann/json.hpp>

#include "neuralese/core/quality.hpp"
#include "neuralese/core/speaker.hpp"

namespace neuralese::theory {

struct SingleStepGame {
  int n_a = 0;
  int n_b = 0;
  int n_actions = 0;
  std::vector<std::vector<double>> prior;                // [x_a][x_b]
  std::vector<std::vector<std::vector<double>>> reward;  // [x_a][x_b][u], in [0, 1]

  double r(int a, int b, int u) const { return reward[a][b][u]; }

  void validate() const {
    if (n_a < 1 || n_b < 1 || n_actions < 1) throw InvalidConfig("single-step game needs non-empty sets");
    if (static_cast<int>(prior.size()) != n_a || static_cast<int>(reward.size()) != n_a) {
      throw InvalidConfig("single-step game: table size does not match |x_a|");
    }
    double total = 0.0;
    for (int a = 0; a < n_a; ++a) {
      if (static_cast<int>(prior[a].size()) != n_b || static_cast<int>(reward[a].size()) != n_b) {
        throw InvalidConfig("single-step game: table size does not match |x_b|");
      }
      for (int b = 0; b < n_b; ++b) {
        if (prior[a][b] < 0.0) throw InvalidConfig("single-step game: negative prior");
        total += prior[a][b];
        if (static_cast<int>(reward[a][b].size()) != n_actions) {
          throw InvalidConfig("single-step game: reward row does not match the action count");
        }
        for (double v : reward[a][b]) {
          if (!(v >= 0.0 && v <= 1.0)) throw InvalidConfig("single-step game: reward outside [0, 1]");
        }
      }
    }
    if (std::abs(total - 1.0) > 1e-9) throw InvalidConfig("single-step game: prior does not sum to 1");
  }

  EnumeratedGame<int, int> enumerate() const {
    EnumeratedGame<int, int> g;
    for (int a = 0; a < n_a; ++a) g.speaker_obs.push_back(a);
    for (int b = 0; b < n_b; ++b) g.listener_obs.push_back(b);
    g.joint = prior;
    return g;
  }
};

/// p(x_a | x_b, z) under `speaker`; throws AllZeroLikelihood when no x_a
/// with positive prior at x_b can produce z.
inline std::vector<double> single_step_belief(const SingleStepGame& game, const TabularSpeaker& speaker, int z,
                                              int x_b) {
  std::vector<double> w(game.n_a);
  double total = 0.0;
  for (int a = 0; a < game.n_a; ++a) {
    w[a] = game.prior[a][x_b] * speaker.prob(z, a);
    total += w[a];
  }
  if (!(total > 0.0)) throw AllZeroLikelihood("message " + std::to_string(z) + " impossible at x_b " +
                                              std::to_string(x_b));
  for (double& v : w) v /= total;
  return w;
}

/// Best action in expectation over the listener's belief about x_a; ties go
/// to the lowest action index.
inline int rational_listener(int z, int x_b, const SingleStepGame& game, const TabularSpeaker& speaker) {
  auto beta = single_step_belief(game, speaker, z, x_b);
  int best = 0;
  double best_value = -kInf;
  for (int u = 0; u < game.n_actions; ++u) {
    double v = 0.0;
    for (int a = 0; a < game.n_a; ++a) v += beta[a] * game.r(a, x_b, u);
    if (v > best_value) {
      best_value = v;
      best = u;
    }
  }
  return best;
}

/// Total variation distance, half the L1 distance.
inline double tv_distance(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ShapeMismatch("tv_distance: sizes differ");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

/// Pinsker's inequality: tv(p, q) <= sqrt(KL(p || q) / 2).
inline bool pinsker_check(std::span<const double> p, std::span<const double> q) {
  return tv_distance(p, q) <= std::sqrt(std::max(kl_divergence(p, q), 0.0) / 2.0) + 1e-12;
}

struct Prop1Report {
  /// max over used source messages of q(z, tr(z)), contexts weighted by
  /// p(x_b | z, tr(z)).
  double D = 0.0;
  /// The same maximum with contexts weighted by p(x_b | z).
  double D_source = 0.0;
  double native_reward = 0.0;
  double translated_reward = 0.0;
  bool bound_holds = false;
  bool source_bound_holds = false;
  /// Per message and context, with reward in [0, 1] and tv the total
  /// variation between the two beliefs:
  ///   translated(z) >= native(z) - 2 E[tv]    (optimality of each listener)
  ///   E[tv] <= E[sqrt(KL / 2)]                (Pinsker)
  ///   E[sqrt(KL / 2)] <= sqrt(E[KL] / 2)      (Jensen)
  /// with expectations over p(x_b | z). All three held for every message.
  bool chain_holds = true;

  double bound() const { return native_reward - std::sqrt(2.0 * D); }
};

inline void to_json(nlohmann::json& j, const Prop1Report& r) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json("inf"); };
  j = {{"D", num(r.D)},
       {"D_source", num(r.D_source)},
       {"native_reward", r.native_reward},
       {"translated_reward", r.translated_reward},
       {"bound", num(r.bound())},
       {"bound_holds", r.bound_holds},
       {"source_bound_holds", r.source_bound_holds},
       {"chain_holds", r.chain_holds}};
}

/// Compares a listener that hears the speaker's own messages with one that
/// hears them translated into the other language and reasons with that
/// language's speaker model. Expectations are exact sums.
///
/// translator[z] is the target message for source message z. Throws
/// Infeasible if a translation reaches a context where the target listener
/// has no belief.
inline Prop1Report verify_prop1(const SingleStepGame& game, const TabularSpeaker& speaker_r,
                                const TabularSpeaker& speaker_h, const std::vector<int>& translator) {
  game.validate();
  if (speaker_r.n_observations() != game.n_a || speaker_h.n_observations() != game.n_a) {
    throw ShapeMismatch("verify_prop1: speaker tables must cover every x_a");
  }
  if (static_cast<int>(translator.size()) != speaker_r.n_messages()) {
    throw ShapeMismatch("verify_prop1: translator must map every source message");
  }
  for (int t : translator) {
    if (t < 0 || t >= speaker_h.n_messages()) throw InvalidConfig("verify_prop1: translation out of range");
  }

  Prop1Report rep;
  auto eg = game.enumerate();
  ExactScorer<TabularSpeaker, TabularSpeaker, int> q(eg, speaker_r, speaker_h);
  for (int z = 0; z < speaker_r.n_messages(); ++z) {
    double used = 0.0;
    for (int a = 0; a < game.n_a; ++a) used += speaker_r.prob(z, a);
    if (used == 0.0) continue;
    rep.D = std::max(rep.D, q(z, translator[z], ContextWeighting::kCooccurrence).value());
    rep.D_source = std::max(rep.D_source, q(z, translator[z], ContextWeighting::kSource).value());

    double pz = 0.0, native_z = 0.0, translated_z = 0.0, e_tv = 0.0, e_pinsker = 0.0, e_kl = 0.0;
    for (int b = 0; b < game.n_b; ++b) {
      double mass = 0.0;
      for (int a = 0; a < game.n_a; ++a) mass += game.prior[a][b] * speaker_r.prob(z, a);
      if (mass == 0.0) continue;
      int u_native = rational_listener(z, b, game, speaker_r);
      std::vector<double> beta_h;
      try {
        beta_h = single_step_belief(game, speaker_h, translator[z], b);
      } catch (const AllZeroLikelihood& e) {
        throw Infeasible(std::string("verify_prop1: ") + e.what());
      }
      int u_translated = rational_listener(translator[z], b, game, speaker_h);
      for (int a = 0; a < game.n_a; ++a) {
        double w = game.prior[a][b] * speaker_r.prob(z, a);
        native_z += w * game.r(a, b, u_native);
        translated_z += w * game.r(a, b, u_translated);
      }
      auto beta_r = single_step_belief(game, speaker_r, z, b);
      double kl = std::max(kl_divergence(beta_r, beta_h), 0.0);
      pz += mass;
      e_tv += mass * tv_distance(beta_r, beta_h);
      e_pinsker += mass * std::sqrt(kl / 2.0);
      e_kl += mass * kl;
    }
    rep.native_reward += native_z;
    rep.translated_reward += translated_z;
    constexpr double tol = 1e-12;
    bool step1 = translated_z / pz >= native_z / pz - 2.0 * e_tv / pz - tol;
    bool step2 = e_tv / pz <= e_pinsker / pz + tol;
    bool step3 = e_pinsker / pz <= std::sqrt(e_kl / pz / 2.0) + tol;
    rep.chain_holds = rep.chain_holds && step1 && step2 && step3;
  }
  rep.bound_holds = rep.translated_reward >= rep.native_reward - std::sqrt(2.0 * rep.D) - 1e-12;
  rep.source_bound_holds = rep.translated_reward >= rep.native_reward - std::sqrt(2.0 * rep.D_source) - 1e-12;
  return rep;
}

/// Random instance: |x_a|, |x_b| in [2, 6], 2 to 4 actions, a Dirichlet(1)
/// joint prior and uniform rewards.
inline SingleStepGame random_single_step_game(Rng& rng) {
  SingleStepGame g;
  g.n_a = 2 + static_cast<int>(uniform_index(rng, 5));
  g.n_b = 2 + static_cast<int>(uniform_index(rng, 5));
  g.n_actions = 2 + static_cast<int>(uniform_index(rng, 3));
  auto flat = sample_dirichlet(rng, static_cast<std::size_t>(g.n_a * g.n_b));
  g.prior.assign(g.n_a, std::vector<double>(g.n_b));
  g.reward.assign(g.n_a, std::vector<std::vector<double>>(g.n_b, std::vector<double>(g.n_actions)));
  for (int a = 0; a < g.n_a; ++a) {
    for (int b = 0; b < g.n_b; ++b) {
      g.prior[a][b] = flat[a * g.n_b + b];
      for (double& v : g.reward[a][b]) v = uniform01(rng);
    }
  }
  return g;
}

/// Speaker over `n_obs` states and `n_messages` messages. Each row is
/// Dirichlet(1) on a random non-empty subset of messages, so supports are
/// sparse often enough to matter.
inline TabularSpeaker random_tabular_speaker(Rng& rng, int n_obs, int n_messages) {
  std::vector<std::vector<double>> probs(n_obs, std::vector<double>(n_messages, 0.0));
  for (auto& row : probs) {
    std::vector<int> keep;
    while (keep.empty()) {
      for (int z = 0; z < n_messages; ++z) {
        if (uniform01(rng) < 0.5) keep.push_back(z);
      }
    }
    auto w = sample_dirichlet(rng, keep.size());
    for (std::size_t k = 0; k < keep.size(); ++k) row[keep[k]] = w[k];
  }
  return TabularSpeaker(std::move(probs));
}

/// Uniform choice among target messages that keep every source message's
/// translation finite under p(x_b | z) weighting. Empty when some used
/// source message has no such target.
inline std::vector<int> random_feasible_translator(const SingleStepGame& game, const TabularSpeaker& speaker_r,
                                                   const TabularSpeaker& speaker_h, Rng& rng) {
  auto eg = game.enumerate();
  ExactScorer<TabularSpeaker, TabularSpeaker, int> q(eg, speaker_r, speaker_h);
  std::vector<int> tr(speaker_r.n_messages(), 0);
  for (int z = 0; z < speaker_r.n_messages(); ++z) {
    double used = 0.0;
    for (int a = 0; a < game.n_a; ++a) used += speaker_r.prob(z, a);
    if (used == 0.0) continue;
    std::vector<int> ok;
    for (int t = 0; t < speaker_h.n_messages(); ++t) {
      if (q(z, t, ContextWeighting::kSource).feasible()) ok.push_back(t);
    }
    if (ok.empty()) return {};
    tr[z] = ok[uniform_index(rng, ok.size())];
  }
  return tr;
}

struct Prop1Instance {
  SingleStepGame game;
  TabularSpeaker robot, human;
  std::vector<int> translator;
};

/// Instance i of a seeded sweep: game, two speakers with 2 to 5 messages and
/// a feasible random translator, redrawn until one exists.
inline Prop1Instance random_prop1_instance(std::uint64_t seed, std::uint64_t i) {
  for (std::uint64_t k = 0;; ++k) {
    Rng rng = derive_rng(seed, i * 1000 + k);
    Prop1Instance in;
    in.game = random_single_step_game(rng);
    in.robot = random_tabular_speaker(rng, in.game.n_a, 2 + static_cast<int>(uniform_index(rng, 4)));
    in.human = random_tabular_speaker(rng, in.game.n_a, 2 + static_cast<int>(uniform_index(rng, 4)));
    in.translator = random_feasible_translator(in.game, in.robot, in.human, rng);
    if (!in.translator.empty()) return in;
  }
}

}  // namespace neuralese::theory
