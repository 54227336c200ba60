#pragma once

// Recovering one strategy from a mixture of human strategies. When the
// strategies' messages are disjoint and one of them partitions the states
// exactly like the robot, every robot message should translate into that
// strategy's messages.

#include <set>
#include <vector>

#include <nlohmann/json.hpp>

#include "neuralese/core/dictionary.hpp"
#include "neuralese/core/quality.hpp"
#include "neuralese/core/speaker.hpp"

namespace neuralese::theory {

/// Human strategies over a shared message space, mixed by `weights`.
struct StrategyMixture {
  std::vector<TabularSpeaker> strategies;
  std::vector<double> weights;

  /// Messages strategy i ever uses.
  std::set<int> support(std::size_t i) const {
    std::set<int> out;
    const auto& s = strategies.at(i);
    for (int x = 0; x < s.n_observations(); ++x) {
      for (int z = 0; z < s.n_messages(); ++z) {
        if (s.prob(z, x) > 0.0) out.insert(z);
      }
    }
    return out;
  }

  /// Throws DisjointnessViolation when two strategies share a message for
  /// the same state.
  void validate() const {
    if (strategies.empty() || strategies.size() != weights.size()) {
      throw InvalidConfig("strategy mixture needs one weight per strategy");
    }
    double total = 0.0;
    for (double w : weights) {
      if (!(w > 0.0)) throw InvalidConfig("strategy mixture weights must be positive");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) throw InvalidConfig("strategy mixture weights must sum to 1");
    const auto& first = strategies.front();
    for (const auto& s : strategies) {
      if (s.n_observations() != first.n_observations() || s.n_messages() != first.n_messages()) {
        throw ShapeMismatch("strategies must share states and messages");
      }
    }
    for (int x = 0; x < first.n_observations(); ++x) {
      for (int z = 0; z < first.n_messages(); ++z) {
        int users = 0;
        for (const auto& s : strategies) users += s.prob(z, x) > 0.0 ? 1 : 0;
        if (users > 1) {
          throw DisjointnessViolation("message " + std::to_string(z) + " used by two strategies in state " +
                                      std::to_string(x));
        }
      }
    }
  }

  /// True when no message is used by two strategies in any states.
  bool globally_disjoint() const {
    std::set<int> seen;
    for (std::size_t i = 0; i < strategies.size(); ++i) {
      for (int z : support(i)) {
        if (!seen.insert(z).second) return false;
      }
    }
    return true;
  }

  TabularSpeaker combined() const {
    const auto& first = strategies.front();
    std::vector<std::vector<double>> probs(first.n_observations(), std::vector<double>(first.n_messages(), 0.0));
    for (std::size_t i = 0; i < strategies.size(); ++i) {
      for (int x = 0; x < first.n_observations(); ++x) {
        for (int z = 0; z < first.n_messages(); ++z) probs[x][z] += weights[i] * strategies[i].prob(z, x);
      }
    }
    return TabularSpeaker(std::move(probs));
  }
};

struct Prop2Report {
  /// Translation of each robot message (-1 when infeasible).
  std::vector<int> translation;
  /// Strategy owning each translation; -1 when shared or infeasible.
  std::vector<int> matched_strategy;
  /// A strategy with an exact (q = 0) translation for every robot message,
  /// or -1 if none exists.
  int mirror = -1;
  bool globally_disjoint = true;
  bool all_matched = false;
};

inline void to_json(nlohmann::json& j, const Prop2Report& r) {
  j = {{"translation", r.translation},
       {"matched_strategy", r.matched_strategy},
       {"mirror", r.mirror},
       {"globally_disjoint", r.globally_disjoint},
       {"all_matched", r.all_matched}};
}

/// Builds the belief dictionary from the robot's messages into the union of
/// the strategies' messages and reports which strategy each lands in.
template <class B>
Prop2Report verify_prop2(const TabularSpeaker& robot, const StrategyMixture& mixture,
                         const EnumeratedGame<int, B>& game, double exact_tol = 1e-12) {
  mixture.validate();
  if (robot.n_observations() != mixture.strategies.front().n_observations() ||
      static_cast<std::size_t>(robot.n_observations()) != game.n_speaker()) {
    throw ShapeMismatch("verify_prop2: robot, strategies and game must share states");
  }
  TabularSpeaker human = mixture.combined();
  std::vector<std::set<int>> supports;
  std::set<int> all;
  for (std::size_t i = 0; i < mixture.strategies.size(); ++i) {
    supports.push_back(mixture.support(i));
    all.insert(supports.back().begin(), supports.back().end());
  }
  std::vector<int> human_inv(all.begin(), all.end());
  std::vector<int> robot_inv;
  for (int z = 0; z < robot.n_messages(); ++z) {
    for (int x = 0; x < robot.n_observations(); ++x) {
      if (robot.prob(z, x) > 0.0) {
        robot_inv.push_back(z);
        break;
      }
    }
  }

  ExactScorer<TabularSpeaker, TabularSpeaker, B> q(game, robot, human);
  auto dict = build_dictionary(std::span<const int>(robot_inv), std::span<const int>(human_inv),
                               [&](int z, std::span<const int> cands) {
                                 std::vector<Score> out;
                                 out.reserve(cands.size());
                                 for (int c : cands) out.push_back(q(z, c));
                                 return out;
                               });

  Prop2Report rep;
  rep.globally_disjoint = mixture.globally_disjoint();
  for (std::size_t i = 0; i < supports.size() && rep.mirror < 0; ++i) {
    bool exact = true;
    for (int z : robot_inv) {
      bool found = false;
      for (int h : supports[i]) {
        Score s = q(z, h);
        if (s.feasible() && s.value() <= exact_tol) {
          found = true;
          break;
        }
      }
      exact = exact && found;
    }
    if (exact) rep.mirror = static_cast<int>(i);
  }

  rep.all_matched = rep.mirror >= 0;
  for (const auto& e : dict.entries) {
    int t = e.feasible() ? human_inv[*e.target] : -1;
    int owner = -1;
    if (t >= 0) {
      for (std::size_t i = 0; i < supports.size(); ++i) {
        if (!supports[i].count(t)) continue;
        owner = owner == -1 ? static_cast<int>(i) : -2;
      }
    }
    if (owner == -2) owner = -1;
    rep.translation.push_back(t);
    rep.matched_strategy.push_back(owner);
    rep.all_matched = rep.all_matched && owner == rep.mirror;
  }
  return rep;
}

/// One constructed instance: the robot partitions the states into blocks and
/// names each block; strategy 0 uses the same partition under different
/// labels, possibly with several synonyms per block; strategy 1 uses a
/// partition sharing no block with the robot's and carries most of the
/// weight, so its phrases are the most frequent ones.
struct Prop2Fixture {
  EnumeratedGame<int, int> game;
  TabularSpeaker robot;
  StrategyMixture mixture;
};

namespace detail {

inline std::vector<int> random_partition(Rng& rng, int n, int k) {
  std::vector<int> block(n);
  for (int x = 0; x < n; ++x) block[x] = x < k ? x : static_cast<int>(uniform_index(rng, k));
  for (int x = n - 1; x > 0; --x) std::swap(block[x], block[uniform_index(rng, x + 1)]);
  return block;
}

inline std::vector<std::set<int>> blocks_of(const std::vector<int>& part) {
  int k = 0;
  for (int b : part) k = std::max(k, b + 1);
  std::vector<std::set<int>> out(k);
  for (std::size_t x = 0; x < part.size(); ++x) out[part[x]].insert(static_cast<int>(x));
  return out;
}

}  // namespace detail

inline Prop2Fixture random_prop2_fixture(Rng& rng) {
  int n = 3 + static_cast<int>(uniform_index(rng, 6));
  int n_b = 1 + static_cast<int>(uniform_index(rng, 3));
  int k = 2 + static_cast<int>(uniform_index(rng, n - 1));
  auto robot_part = detail::random_partition(rng, n, k);
  auto robot_blocks = detail::blocks_of(robot_part);

  std::vector<int> other_part;
  int k2 = 0;
  for (bool clash = true; clash;) {
    k2 = 1 + static_cast<int>(uniform_index(rng, n));
    other_part = detail::random_partition(rng, n, k2);
    clash = false;
    for (const auto& b : detail::blocks_of(other_part)) {
      for (const auto& rb : robot_blocks) clash = clash || b == rb;
    }
  }

  // Message ids: strategy 0 gets up to two synonyms per block, strategy 1
  // one per block; ids are shuffled so neither strategy sits first.
  std::vector<int> synonyms(k);
  int m = 0;
  for (int& s : synonyms) {
    s = 1 + static_cast<int>(uniform_index(rng, 2));
    m += s;
  }
  int m_total = m + k2;
  std::vector<int> ids(m_total);
  for (int i = 0; i < m_total; ++i) ids[i] = i;
  for (int i = m_total - 1; i > 0; --i) std::swap(ids[i], ids[uniform_index(rng, i + 1)]);

  std::vector<std::vector<double>> s0(n, std::vector<double>(m_total, 0.0));
  std::vector<std::vector<double>> s1(n, std::vector<double>(m_total, 0.0));
  std::vector<int> first_id(k);
  for (int b = 0, next = 0; b < k; ++b) {
    first_id[b] = next;
    next += synonyms[b];
  }
  for (int x = 0; x < n; ++x) {
    int b = robot_part[x];
    for (int j = 0; j < synonyms[b]; ++j) s0[x][ids[first_id[b] + j]] = 1.0 / synonyms[b];
    s1[x][ids[m + other_part[x]]] = 1.0;
  }

  Prop2Fixture f;
  f.robot = TabularSpeaker::deterministic(robot_part, k);
  f.mixture.strategies = {TabularSpeaker(std::move(s0)), TabularSpeaker(std::move(s1))};
  double w0 = 0.1 + 0.3 * uniform01(rng);
  f.mixture.weights = {w0, 1.0 - w0};
  for (int x = 0; x < n; ++x) f.game.speaker_obs.push_back(x);
  for (int b = 0; b < n_b; ++b) f.game.listener_obs.push_back(b);
  auto flat = sample_dirichlet(rng, static_cast<std::size_t>(n * n_b));
  f.game.joint.assign(n, std::vector<double>(n_b));
  for (int x = 0; x < n; ++x) {
    for (int b = 0; b < n_b; ++b) f.game.joint[x][b] = flat[x * n_b + b];
  }
  return f;
}

}  // namespace neuralese::theory
