#include <gtest/gtest.h>

#include <map>

#include "neuralese/core/sampler.hpp"
#include "neuralese/eval/behavior_eval.hpp"
#include "neuralese/eval/belief_eval.hpp"
#include "neuralese/eval/pipelines.hpp"
#include "neuralese/eval/report.hpp"
#include "neuralese/eval/translators.hpp"
#include "neuralese/games/shapes.hpp"
#include "neuralese/human/synthetic.hpp"

using namespace neuralese;
using namespace neuralese::eval;

namespace {

// Listener that knows the speaker table: picks the candidate more likely
// to have said z, 0 on ties.
auto table_listener(const TabularSpeaker& s) {
  return [&s](int z, const shapes::NoContext&, int s0, int s1) { return s.prob(z, s1) > s.prob(z, s0) ? 1 : 0; };
}

// Four states in two blocks. The robot names the block; the human mixes a
// strategy naming the block the same way (weight 0.2) with one saying
// "thing" for everything (weight 0.8).
struct MixtureFixture {
  EnumeratedGame<int, int> game;
  TabularSpeaker robot = TabularSpeaker::deterministic({0, 0, 1, 1}, 2);
  TabularSpeaker human{{{0.2, 0.0, 0.8}, {0.2, 0.0, 0.8}, {0.0, 0.2, 0.8}, {0.0, 0.2, 0.8}}};

  MixtureFixture() {
    game.speaker_obs = {0, 1, 2, 3};
    game.listener_obs = {0};
    game.joint = {{0.25}, {0.25}, {0.25}, {0.25}};
  }
};

}  // namespace

TEST(RandomTranslator, SingleElementInventory) {
  auto tr = random_translator<int, std::string>({"only"}, 3);
  for (int z = 0; z < 50; ++z) EXPECT_EQ(tr(z), "only");
  EXPECT_THROW((random_translator<int, std::string>({}, 3)), EmptyInventory);
}

TEST(RandomTranslator, SameSourceSameOutputInAnyOrder) {
  auto a = random_translator<std::vector<double>, int>({0, 1, 2, 3, 4, 5, 6}, 9);
  auto b = random_translator<std::vector<double>, int>({0, 1, 2, 3, 4, 5, 6}, 9);
  std::vector<std::vector<double>> srcs;
  for (int i = 0; i < 40; ++i) srcs.push_back({i * 0.1, -i * 1.5});
  std::vector<int> fwd;
  for (const auto& s : srcs) fwd.push_back(a(s));
  for (int i = 39; i >= 0; --i) EXPECT_EQ(b(srcs[i]), fwd[i]);
  for (std::size_t i = 0; i < srcs.size(); ++i) EXPECT_EQ(a(srcs[i]), fwd[i]);
}

TEST(RandomTranslator, UniformOverFreshSources) {
  const int k = 10, n = 10000;
  std::vector<int> inv(k);
  for (int i = 0; i < k; ++i) inv[i] = i;
  auto tr = random_translator<int, int>(inv, 2024);
  std::vector<int> counts(k, 0);
  for (int z = 0; z < n; ++z) ++counts[tr(z)];
  double chi2 = 0.0, expect = static_cast<double>(n) / k;
  for (int c : counts) chi2 += (c - expect) * (c - expect) / expect;
  // Upper 1% point of chi-squared with 9 degrees of freedom.
  EXPECT_LT(chi2, 21.666);
}

TEST(SnapToInventory, UnknownPhraseUsesNearest) {
  human::PhraseInventory inv(human::InventoryRule::kDrivingMessages, {"go left", "stop"});
  std::vector<std::string> seen;
  eval::Translator<std::string, int> tr = [&](const std::string& z) {
    seen.push_back(z);
    return static_cast<int>(seen.size());
  };
  auto snapped = eval::snap_to_inventory(inv, tr);
  snapped("stop");
  snapped("left now");
  snapped("go left");
  EXPECT_EQ(seen, (std::vector<std::string>{"stop", "go left", "go left"}));
}

TEST(TranslatorKind, NamesRoundTrip) {
  for (auto k : {TranslatorKind::kRandom, TranslatorKind::kDirect, TranslatorKind::kBelief}) {
    EXPECT_EQ(parse_kind(kind_name(k)), k);
  }
  EXPECT_THROW(parse_kind("oracle"), InvalidConfig);
}

TEST(BeliefEval, IdentityTranslatorIsPerfect) {
  shapes::ShapesGame game;
  auto blue = shapes::blue_speaker();
  double acc = belief_eval(
      game, [](int x, Rng&) { return x; }, [](int z) { return z; }, table_listener(blue), 2000, 1);
  EXPECT_DOUBLE_EQ(acc, 1.0);
}

TEST(BeliefEval, IdentityUpperBoundsOtherTranslators) {
  shapes::ShapesGame game;
  auto blue = shapes::blue_speaker();
  auto speak = [](int x, Rng&) { return x; };
  double ident = belief_eval(game, speak, [](int z) { return z; }, table_listener(blue), 1000, 4);
  for (int seed = 0; seed < 20; ++seed) {
    auto tr = random_translator<int, int>({0, 1, 2}, seed);
    EXPECT_LE(belief_eval(game, speak, tr, table_listener(blue), 1000, 4), ident);
  }
}

TEST(BeliefEval, RandomTranslatorNearChance) {
  // Each trial's source message is fresh, so the random translation carries
  // no information about which candidate is the target.
  colors::ColorGame game;
  human::PhraseInventory inv(human::InventoryRule::kColorsUnigrams, game.palette().fine_names);
  auto speak = [](const colors::SpeakerObs& x, Rng& rng) {
    return std::vector<double>{x.target_color().l, uniform01(rng)};
  };
  auto tr = random_translator<std::vector<double>, std::string>(inv.phrases(), 6);
  const auto& pal = game.palette();
  auto listen = [&pal](const std::string& p, const colors::ListenerObs&, const colors::SpeakerObs& s0,
                       const colors::SpeakerObs& s1) {
    return pal.fine_names[pal.nearest(s1.target_color())] == p && pal.fine_names[pal.nearest(s0.target_color())] != p
               ? 1
               : 0;
  };
  double acc = belief_eval(game, speak, tr, listen, 2000, 7);
  EXPECT_NEAR(acc, 0.5, 0.03);
}

TEST(BeliefEval, DeterministicPerSeed) {
  colors::ColorGame game;
  auto speak = [](const colors::SpeakerObs& x, Rng& rng) { return x.target_color().a + uniform01(rng); };
  auto listen = [](double z, const colors::ListenerObs&, const colors::SpeakerObs& s0, const colors::SpeakerObs& s1) {
    return std::abs(s1.target_color().a - z) < std::abs(s0.target_color().a - z) ? 1 : 0;
  };
  auto id = [](double z) { return z; };
  EXPECT_EQ(belief_eval(game, speak, id, listen, 500, 3), belief_eval(game, speak, id, listen, 500, 3));
  EXPECT_THROW(belief_eval(game, speak, id, listen, 0, 3), InvalidConfig);
}

TEST(ModelTranslators, OneToOneLanguagesAgree) {
  shapes::ShapesGame game;
  auto blue = shapes::blue_speaker();
  auto relabeled = TabularSpeaker::deterministic({2, 0, 1}, 3);
  QEstimateConfig qc;
  qc.n_contexts = 500;
  ModelTranslators<TabularSpeaker, TabularSpeaker> mt(game, blue, relabeled, {0, 1, 2}, qc);
  for (int z = 0; z < 3; ++z) {
    EXPECT_EQ(mt.direct(z).message, mt.belief(z).message);
    EXPECT_EQ(mt.belief(z).message, (std::vector<int>{2, 0, 1})[z]);
  }
}

TEST(ModelTranslators, MixtureDirectTakesFrequentPhraseBeliefTakesMirror) {
  MixtureFixture f;
  EnumeratedSampler<int, int> sampler(f.game);
  QEstimateConfig qc;
  qc.n_contexts = 500;
  ModelTranslators<TabularSpeaker, TabularSpeaker> mt(sampler, f.robot, f.human, {0, 1, 2}, qc);
  for (int z = 0; z < 2; ++z) {
    EXPECT_EQ(mt.direct(z).message, 2);
    EXPECT_EQ(mt.belief(z).message, z);
  }
  auto direct = mt.translator(TranslatorKind::kDirect);
  auto belief = mt.translator(TranslatorKind::kBelief);
  EXPECT_EQ(direct(0), 2);
  EXPECT_EQ(belief(1), 1);
  EXPECT_EQ(belief(1), 1);
}

TEST(ModelTranslators, SameSeedSameDictionary) {
  MixtureFixture f;
  EnumeratedSampler<int, int> sampler(f.game);
  QEstimateConfig qc;
  qc.rng_seed = 77;
  auto text = [&] {
    ModelTranslators<TabularSpeaker, TabularSpeaker> mt(sampler, f.robot, f.human, {0, 1, 2}, qc);
    std::vector<int> src = {0, 1}, tgt = {0, 1, 2};
    return build_dictionary(std::span<const int>(src), std::span<const int>(tgt),
                            [&](int z, std::span<const int> c) { return mt.estimator().score_all(z, c); })
        .to_text();
  };
  EXPECT_EQ(text(), text());
}

TEST(ModelTranslators, DirectInfeasibleWhenNoCooccurrence) {
  shapes::ShapesGame game;
  // The target language never uses message 1.
  TabularSpeaker tgt({{1.0, 0.0}, {1.0, 0.0}, {1.0, 0.0}});
  TabularSpeaker src = TabularSpeaker::deterministic({0, 1, 2}, 3);
  ModelTranslators<TabularSpeaker, TabularSpeaker> mt(game, src, tgt, {1}, QEstimateConfig{});
  EXPECT_THROW(mt.direct(0), Infeasible);
}

TEST(Report, CsvRoundTripIsLossless) {
  std::vector<EvalReport> rows = {
      {"colors", "r2h", "belief", 0.1 + 0.2, 0.0, -1.0, 2000, 4},
      {"driving", "h2r", "random", -1.0, 1.0 / 3.0, 0.71, 100, 18446744073709551615ULL},
  };
  auto csv = reports_to_csv(rows);
  EXPECT_EQ(reports_from_csv(csv), rows);
  EXPECT_EQ(reports_to_csv(reports_from_csv(csv)), csv);
}

TEST(Report, CsvErrorsCarryLineNumbers) {
  try {
    reports_from_csv(std::string(kReportHeader) + "\ncolors,r2h,belief,x,,,10,1\n", "r.csv");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(reports_from_csv("task,dir\n"), ParseError);
  EvalReport bad{"colors", "r2h", "belief", 1.5};
  EXPECT_THROW(bad.validate(), InvalidConfig);
}

TEST(Report, TableUsesTranslatorRows) {
  std::vector<EvalReport> rows = {{"colors", "r2h", "random", 0.5}, {"colors", "r2h", "direct", 0.7},
                                  {"colors", "r2h", "belief", 0.73}};
  auto t = reports_to_table(rows);
  EXPECT_NE(t.find("random"), std::string::npos);
  EXPECT_NE(t.find("0.7300"), std::string::npos);
  EXPECT_LT(t.find("random"), t.find("direct"));
  EXPECT_LT(t.find("direct"), t.find("belief"));
}

namespace {

// The human drives a shortest path alone; the agent's car starts on its goal.
GameTrace solo_trace(const driving::DrivingGame& game, std::uint64_t seed) {
  Rng rng(seed);
  auto s = game.reset(0, rng);
  s.cars[1].pos = s.cars[1].goal;
  s.cars[1].finished = true;
  GameTrace tr;
  tr.game_id = "solo-" + std::to_string(seed);
  while (!s.done) {
    auto oa = game.observe(s, 0);
    int a = game.shortest_path_action(oa);
    auto res = game.step(s, a, driving::kWait);
    TraceStep st;
    st.t = s.t;
    st.obs_a = driving::to_json(oa);
    st.obs_b = driving::to_json(game.observe(s, 1));
    st.msg_a = "i'm at the middle";
    st.act_a = a;
    st.act_b = driving::kWait;
    st.reward = res.reward;
    st.done = res.done;
    tr.steps.push_back(st);
    s = res.state;
  }
  return tr;
}

agents::AgentCell small_agent(const driving::DrivingGame& game) {
  agents::CellConfig c;
  c.obs_dim = game.feature_dim();
  c.n_actions = game.n_actions();
  c.embed = 8;
  c.hidden = 8;
  c.message_dim = 4;
  Rng rng(1);
  return agents::AgentCell(c, rng);
}

}  // namespace

TEST(BehaviorEval, SoloHumanWithAgentAtGoalCompletes) {
  driving::DrivingGame game(driving::mini_maps());
  auto agent = small_agent(game);
  std::vector<GameTrace> traces;
  for (std::uint64_t s = 0; s < 5; ++s) traces.push_back(solo_trace(game, s));
  int calls = 0;
  Translator<std::string, agents::NeuraleseMessage> tr = [&calls](const std::string&) {
    ++calls;
    return agents::NeuraleseMessage(4, 0.5);
  };
  auto r = behavior_eval(traces, tr, agent, game);
  EXPECT_EQ(r.n, 5);
  EXPECT_DOUBLE_EQ(r.completion_rate, 1.0);
  double expected = 0.0;
  for (const auto& t : traces) expected += t.total_reward();
  EXPECT_NEAR(r.mean_reward, expected / 5.0, 1e-12);
  EXPECT_GT(calls, 0);
}

TEST(BehaviorEval, MapMismatchRejected) {
  driving::DrivingGame game(driving::mini_maps());
  auto agent = small_agent(game);
  auto tr = solo_trace(game, 0);
  Translator<std::string, agents::NeuraleseMessage> silent = [](const std::string&) {
    return agents::NeuraleseMessage(4, 0.0);
  };
  auto bad = tr;
  bad.steps[0].obs_a["map_id"] = 3;
  bad.steps[0].obs_b["map_id"] = 3;
  EXPECT_THROW(behavior_eval({bad}, silent, agent, game), TraceMapMismatch);
  bad = tr;
  bad.steps[0].obs_a["pos"] = {0, 0};  // a wall on the mini map
  EXPECT_THROW(behavior_eval({bad}, silent, agent, game), TraceMapMismatch);
}

TEST(BehaviorEval, DeterministicReplay) {
  driving::DrivingGame game(driving::mini_maps());
  auto agent = small_agent(game);
  auto data = human::synthetic_driving_data(game, 8, 2);
  auto tr = random_translator<std::string, agents::NeuraleseMessage>(
      {agents::NeuraleseMessage(4, 1.0), agents::NeuraleseMessage(4, -1.0)}, 5);
  auto a = behavior_eval(data.traces, tr, agent, game);
  auto b = behavior_eval(data.traces, tr, agent, game);
  EXPECT_EQ(a.n, 8);
  EXPECT_EQ(a.mean_reward, b.mean_reward);
  EXPECT_EQ(a.completion_rate, b.completion_rate);
  EXPECT_GE(a.completion_rate, 0.0);
  EXPECT_LE(a.completion_rate, 1.0);
}
