#include <gtest/gtest.h>

#include <cmath>

#include "neuralese/games/shapes.hpp"
#include "neuralese/theory/prop2.hpp"
#include "neuralese/theory/single_step.hpp"

using namespace neuralese;
using namespace neuralese::theory;

namespace {

// The lever game: the speaker sees the shape, the listener pulls the lever
// matching its size.
SingleStepGame lever_game() {
  SingleStepGame g;
  g.n_a = 3;
  g.n_b = 1;
  g.n_actions = 2;
  g.prior = {{1.0 / 3}, {1.0 / 3}, {1.0 / 3}};
  g.reward.assign(3, {{0.0, 0.0}});
  for (int s = 0; s < 3; ++s) g.reward[s][0][shapes::size_of(s)] = 1.0;
  return g;
}

struct Instance {
  SingleStepGame game;
  TabularSpeaker r, h;
  std::vector<int> tr;
};

// Draws until the translator is feasible, as the acceptance sweep does.
Instance random_instance(std::uint64_t seed, std::uint64_t i) {
  for (std::uint64_t k = 0;; ++k) {
    Rng rng = derive_rng(seed, i * 1000 + k);
    Instance in;
    in.game = random_single_step_game(rng);
    in.r = random_tabular_speaker(rng, in.game.n_a, 2 + static_cast<int>(uniform_index(rng, 4)));
    in.h = random_tabular_speaker(rng, in.game.n_a, 2 + static_cast<int>(uniform_index(rng, 4)));
    in.tr = random_feasible_translator(in.game, in.r, in.h, rng);
    if (!in.tr.empty()) return in;
  }
}

// Oracle with the full joint p(a, b, z) laid out explicitly: the listener
// for message m picks argmax_u sum_a p(a, b, m) r(a, b, u), which needs no
// normalization.
struct Oracle {
  double native = 0.0, translated = 0.0, d_cooc = 0.0, d_src = 0.0;
};

int oracle_action(const SingleStepGame& g, const TabularSpeaker& s, int m, int b) {
  int best = 0;
  double best_v = -1.0;
  for (int u = 0; u < g.n_actions; ++u) {
    double v = 0.0;
    for (int a = 0; a < g.n_a; ++a) v += g.prior[a][b] * s.prob(m, a) * g.reward[a][b][u];
    if (v > best_v + 1e-15) {
      best_v = v;
      best = u;
    }
  }
  return best;
}

Oracle oracle(const Instance& in) {
  const auto& g = in.game;
  Oracle o;
  for (int z = 0; z < in.r.n_messages(); ++z) {
    double num_c = 0.0, den_c = 0.0, num_s = 0.0, den_s = 0.0;
    for (int b = 0; b < g.n_b; ++b) {
      double pz = 0.0, ph = 0.0, pc = 0.0;
      for (int a = 0; a < g.n_a; ++a) {
        pz += g.prior[a][b] * in.r.prob(z, a);
        ph += g.prior[a][b] * in.h.prob(in.tr[z], a);
        pc += g.prior[a][b] * in.r.prob(z, a) * in.h.prob(in.tr[z], a);
      }
      if (pz == 0.0) continue;
      int un = oracle_action(g, in.r, z, b), ut = oracle_action(g, in.h, in.tr[z], b);
      double kl = 0.0;
      for (int a = 0; a < g.n_a; ++a) {
        double w = g.prior[a][b] * in.r.prob(z, a);
        o.native += w * g.reward[a][b][un];
        o.translated += w * g.reward[a][b][ut];
        if (w > 0.0) kl += (w / pz) * std::log((w / pz) / (g.prior[a][b] * in.h.prob(in.tr[z], a) / ph));
      }
      num_s += pz * kl;
      den_s += pz;
      num_c += pc * kl;
      den_c += pc;
    }
    if (den_s > 0.0) o.d_src = std::max(o.d_src, num_s / den_s);
    if (den_c > 0.0) o.d_cooc = std::max(o.d_cooc, num_c / den_c);
  }
  return o;
}

}  // namespace

TEST(RationalListener, RewardIndependentOfSpeakerState) {
  SingleStepGame g;
  g.n_a = 2;
  g.n_b = 2;
  g.n_actions = 3;
  g.prior = {{0.25, 0.25}, {0.25, 0.25}};
  g.reward = {{{0.1, 0.9, 0.3}, {0.7, 0.2, 0.1}}, {{0.1, 0.9, 0.3}, {0.7, 0.2, 0.1}}};
  TabularSpeaker s({{0.5, 0.5}, {0.5, 0.5}});
  EXPECT_EQ(rational_listener(0, 0, g, s), 1);
  EXPECT_EQ(rational_listener(1, 1, g, s), 0);
}

TEST(RationalListener, PointMassBeliefPicksThatStatesBestAction) {
  SingleStepGame g;
  g.n_a = 2;
  g.n_b = 1;
  g.n_actions = 2;
  g.prior = {{0.5}, {0.5}};
  g.reward = {{{0.2, 0.8}}, {{0.9, 0.1}}};
  auto s = TabularSpeaker::deterministic({0, 1}, 2);
  EXPECT_EQ(rational_listener(0, 0, g, s), 1);
  EXPECT_EQ(rational_listener(1, 0, g, s), 0);
}

TEST(RationalListener, HexagonPullsLargeLever) {
  auto g = lever_game();
  EXPECT_EQ(rational_listener(shapes::kHexagon, 0, g, shapes::blue_speaker()), shapes::kLarge);
  EXPECT_EQ(rational_listener(shapes::kSquare, 0, g, shapes::blue_speaker()), shapes::kSmall);
}

TEST(RationalListener, TiesGoToLowestAction) {
  auto g = lever_game();
  // "many" leaves square and hexagon equally likely: small and large tie.
  EXPECT_EQ(rational_listener(shapes::kMany, 0, g, shapes::red_speaker()), 0);
}

TEST(RationalListener, ImpossibleMessageThrows) {
  auto g = lever_game();
  auto s = TabularSpeaker::deterministic({0, 0, 0}, 2);
  EXPECT_THROW(rational_listener(1, 0, g, s), AllZeroLikelihood);
}

TEST(SingleStepGame, ValidationRejectsBadTables) {
  auto g = lever_game();
  EXPECT_NO_THROW(g.validate());
  auto bad = g;
  bad.prior[0][0] = 0.5;
  EXPECT_THROW(bad.validate(), InvalidConfig);
  bad = g;
  bad.reward[1][0][1] = 1.5;
  EXPECT_THROW(bad.validate(), InvalidConfig);
  bad = g;
  bad.reward[1][0].pop_back();
  EXPECT_THROW(bad.validate(), InvalidConfig);
}

TEST(Pinsker, IdenticalDistributions) {
  std::vector<double> p = {0.2, 0.3, 0.5};
  EXPECT_DOUBLE_EQ(tv_distance(p, p), 0.0);
  EXPECT_TRUE(pinsker_check(p, p));
}

TEST(Pinsker, PointMassAgainstUniform) {
  std::vector<double> p = {1.0, 0.0}, q = {0.5, 0.5};
  EXPECT_DOUBLE_EQ(tv_distance(p, q), 0.5);
  EXPECT_NEAR(kl_divergence(p, q), std::log(2.0), 1e-15);
  EXPECT_NEAR(std::sqrt(kl_divergence(p, q) / 2.0), 0.5887, 5e-5);
  EXPECT_TRUE(pinsker_check(p, q));
}

TEST(Pinsker, HoldsOnRandomPairs) {
  Rng rng(11);
  for (int i = 0; i < 10000; ++i) {
    std::size_t n = 2 + uniform_index(rng, 8);
    double alpha = i % 2 ? 1.0 : 0.1;
    auto p = sample_dirichlet(rng, n, alpha);
    auto q = sample_dirichlet(rng, n, alpha);
    ASSERT_TRUE(pinsker_check(p, q)) << "pair " << i;
  }
}

TEST(Prop1, IdentityTranslationIsTight) {
  Rng rng(5);
  auto g = random_single_step_game(rng);
  auto s = random_tabular_speaker(rng, g.n_a, 4);
  auto rep = verify_prop1(g, s, s, {0, 1, 2, 3});
  EXPECT_NEAR(rep.D, 0.0, 1e-12);
  EXPECT_NEAR(rep.D_source, 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(rep.translated_reward, rep.native_reward);
  EXPECT_TRUE(rep.bound_holds);
}

TEST(Prop1, HexagonToManyDropsWithinBound) {
  // Blue names each shape; red says few for the triangle and many
  // otherwise. Translating hexagon to many leaves the red listener split
  // between square and hexagon, and it pulls small.
  auto g = lever_game();
  auto rep = verify_prop1(g, shapes::blue_speaker(), shapes::red_speaker(),
                          {shapes::kFew, shapes::kMany, shapes::kMany});
  EXPECT_NEAR(rep.D, std::log(2.0), 1e-12);
  EXPECT_DOUBLE_EQ(rep.native_reward, 1.0);
  EXPECT_NEAR(rep.translated_reward, 2.0 / 3.0, 1e-12);
  EXPECT_LE(rep.native_reward - rep.translated_reward, std::sqrt(2.0 * rep.D));
  EXPECT_TRUE(rep.bound_holds);
  EXPECT_TRUE(rep.chain_holds);
}

TEST(Prop1, MatchesIndependentOracle) {
  for (int i = 0; i < 200; ++i) {
    auto in = random_instance(21, i);
    auto rep = verify_prop1(in.game, in.r, in.h, in.tr);
    auto o = oracle(in);
    ASSERT_NEAR(rep.native_reward, o.native, 1e-12) << i;
    ASSERT_NEAR(rep.translated_reward, o.translated, 1e-12) << i;
    ASSERT_NEAR(rep.D, o.d_cooc, 1e-9) << i;
    ASSERT_NEAR(rep.D_source, o.d_src, 1e-9) << i;
  }
}

TEST(Prop1, BoundHoldsOnRandomGames) {
  for (int i = 0; i < 500; ++i) {
    auto in = random_instance(1, i);
    auto rep = verify_prop1(in.game, in.r, in.h, in.tr);
    ASSERT_TRUE(rep.bound_holds) << nlohmann::json(rep).dump();
    ASSERT_TRUE(rep.source_bound_holds) << nlohmann::json(rep).dump();
    ASSERT_TRUE(rep.chain_holds) << nlohmann::json(rep).dump();
  }
}

// The target message is rare in the one context where it misleads, so
// weighting contexts by p(x_b | z, z') hides the divergence there while the
// reward loss is weighted by p(x_b | z). The bound with D weighted by
// p(x_b | z) still holds.
TEST(Prop1, CooccurrenceWeightedBoundCanFail) {
  const double eps = 0.01;
  SingleStepGame g;
  g.n_a = 4;
  g.n_b = 2;
  g.n_actions = 2;
  g.prior = {{0.25, 0.0}, {0.25, 0.0}, {0.0, 0.25}, {0.0, 0.25}};
  g.reward = {{{1, 0}, {1, 0}}, {{1, 0}, {1, 0}}, {{1, 0}, {1, 0}}, {{0, 1}, {0, 1}}};
  TabularSpeaker r({{1, 0}, {1, 0}, {1, 0}, {0, 1}});
  TabularSpeaker h({{1, 0, 0}, {1, 0, 0}, {eps * eps, 1 - eps * eps, 0}, {eps, 0, 1 - eps}});
  auto rep = verify_prop1(g, r, h, {0, 2});
  EXPECT_DOUBLE_EQ(rep.native_reward, 1.0);
  EXPECT_NEAR(rep.translated_reward, 0.75, 1e-12);
  EXPECT_LT(rep.D, 1e-3);
  EXPECT_FALSE(rep.bound_holds);
  EXPECT_TRUE(rep.source_bound_holds);
  EXPECT_TRUE(rep.chain_holds);
}

TEST(Prop1, ReportJson) {
  auto g = lever_game();
  auto rep = verify_prop1(g, shapes::blue_speaker(), shapes::blue_speaker(), {0, 1, 2});
  nlohmann::json j = rep;
  EXPECT_EQ(j["bound_holds"], true);
  EXPECT_DOUBLE_EQ(j["native_reward"].get<double>(), 1.0);
  EXPECT_TRUE(j.contains("D"));
  EXPECT_TRUE(j.contains("translated_reward"));
}

TEST(Prop1, RejectsMalformedTranslator) {
  auto g = lever_game();
  EXPECT_THROW(verify_prop1(g, shapes::blue_speaker(), shapes::red_speaker(), {0, 1}), ShapeMismatch);
  EXPECT_THROW(verify_prop1(g, shapes::blue_speaker(), shapes::red_speaker(), {0, 1, 2}), InvalidConfig);
}

TEST(Prop2, MirroringStrategyRecoveredOnFixtures) {
  for (int i = 0; i < 60; ++i) {
    Rng rng = derive_rng(9, i);
    auto f = random_prop2_fixture(rng);
    ASSERT_TRUE(f.mixture.globally_disjoint());
    auto rep = verify_prop2(f.robot, f.mixture, f.game);
    ASSERT_EQ(rep.mirror, 0) << i;
    ASSERT_TRUE(rep.all_matched) << nlohmann::json(rep).dump();
    for (int s : rep.matched_strategy) ASSERT_EQ(s, 0);
  }
}

TEST(Prop2, RelabeledRobotLanguageRecovered) {
  // The only strategy is the robot's own language under a permutation.
  std::vector<int> perm = {2, 0, 3, 1};
  std::vector<int> robot_msgs = {0, 1, 2, 3, 1};
  std::vector<int> human_msgs;
  for (int z : robot_msgs) human_msgs.push_back(perm[z]);
  StrategyMixture m;
  m.strategies = {TabularSpeaker::deterministic(human_msgs, 4)};
  m.weights = {1.0};
  EnumeratedGame<int, int> g;
  g.speaker_obs = {0, 1, 2, 3, 4};
  g.listener_obs = {0};
  g.joint = {{0.1}, {0.2}, {0.3}, {0.15}, {0.25}};
  auto rep = verify_prop2(TabularSpeaker::deterministic(robot_msgs, 4), m, g);
  EXPECT_TRUE(rep.all_matched);
  EXPECT_EQ(rep.translation, perm);
}

TEST(Prop2, LocallyDisjointMixtureIsFlagged) {
  // Both strategies use both messages, with the labels swapped: disjoint in
  // each state but not overall, so neither message identifies a block.
  StrategyMixture m;
  m.strategies = {TabularSpeaker::deterministic({0, 0, 1, 1}, 2), TabularSpeaker::deterministic({1, 1, 0, 0}, 2)};
  m.weights = {0.5, 0.5};
  EXPECT_NO_THROW(m.validate());
  EXPECT_FALSE(m.globally_disjoint());
  EnumeratedGame<int, int> g;
  g.speaker_obs = {0, 1, 2, 3};
  g.listener_obs = {0};
  g.joint = {{0.25}, {0.25}, {0.25}, {0.25}};
  auto rep = verify_prop2(TabularSpeaker::deterministic({0, 0, 1, 1}, 2), m, g);
  EXPECT_FALSE(rep.globally_disjoint);
  EXPECT_FALSE(rep.all_matched);
  EXPECT_EQ(rep.mirror, -1);
  for (int s : rep.matched_strategy) EXPECT_EQ(s, -1);
}

TEST(Prop2, OverlappingStrategiesRejected) {
  StrategyMixture m;
  m.strategies = {TabularSpeaker::deterministic({0, 1}, 2), TabularSpeaker::deterministic({0, 0}, 2)};
  m.weights = {0.5, 0.5};
  EXPECT_THROW(m.validate(), DisjointnessViolation);
  EnumeratedGame<int, int> g;
  g.speaker_obs = {0, 1};
  g.listener_obs = {0};
  g.joint = {{0.5}, {0.5}};
  EXPECT_THROW(verify_prop2(TabularSpeaker::deterministic({0, 1}, 2), m, g), DisjointnessViolation);
}

TEST(Prop2, ReportJson) {
  Rng rng(3);
  auto f = random_prop2_fixture(rng);
  nlohmann::json j = verify_prop2(f.robot, f.mixture, f.game);
  EXPECT_EQ(j["all_matched"], true);
  EXPECT_EQ(j["mirror"], 0);
  EXPECT_EQ(j["translation"].size(), static_cast<std::size_t>(f.robot.n_messages()));
}
