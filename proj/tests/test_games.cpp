#include <gtest/gtest.h>

#include <filesystem>
#include <map>
#include <set>

#include "neuralese/games/colors.hpp"
#include "neuralese/games/driving.hpp"
#include "neuralese/games/shapes.hpp"
#include "neuralese/games/trace.hpp"

using namespace neuralese;

namespace {

const std::string kMapsDir = std::string(NEURALESE_SOURCE_DIR) + "/data/maps";

colors::Palette small_palette(int k) {
  auto full = colors::Palette::synthetic();
  colors::Palette p;
  for (int i = 0; i < k; ++i) {
    std::size_t idx = static_cast<std::size_t>(i) * 7 % full.size();
    p.colors.push_back(full.colors[idx]);
    p.fine_names.push_back(full.fine_names[idx]);
    p.coarse_names.push_back(full.coarse_names[idx]);
  }
  return p;
}

}  // namespace

TEST(Shapes, UniformPrior) {
  shapes::ShapesGame g;
  Rng rng(1);
  std::array<int, 3> counts{};
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    auto s = g.sample_scenario(rng);
    ++counts[s.shape];
    EXPECT_EQ(s.size_label, shapes::size_of(s.shape));
  }
  for (int c : counts) EXPECT_NEAR(c / static_cast<double>(n), 1.0 / 3.0, 0.02);
}

TEST(Shapes, DistractorIsUniformOverOthers) {
  shapes::ShapesGame g;
  Rng rng(2);
  std::map<int, int> counts;
  for (int i = 0; i < 6000; ++i) ++counts[g.sample_distractor(shapes::kSquare, {}, rng)];
  EXPECT_EQ(counts.count(shapes::kSquare), 0u);
  EXPECT_NEAR(counts[shapes::kTriangle] / 6000.0, 0.5, 0.03);
  auto e = g.enumerate();
  ASSERT_EQ(e.n_speaker(), 3u);
  for (const auto& row : e.joint) EXPECT_DOUBLE_EQ(row[0], 1.0 / 3.0);
}

TEST(Colors, SyntheticPaletteIsValid) {
  auto p = colors::Palette::synthetic();
  ASSERT_EQ(p.size(), 24u);
  std::set<std::string> fine(p.fine_names.begin(), p.fine_names.end());
  EXPECT_EQ(fine.size(), 24u);
  for (const auto& c : p.colors) EXPECT_TRUE(colors::in_range(c));
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t j = i + 1; j < p.size(); ++j) EXPECT_GT(colors::distance(p.colors[i], p.colors[j]), 1.0);
  }
}

TEST(Colors, ScenariosSatisfyInvariants) {
  colors::ColorGame g;
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    auto s = g.sample_scenario(rng);
    EXPECT_FALSE(s.candidates[0] == s.candidates[1]);
    EXPECT_TRUE(s.target == 0 || s.target == 1);
    auto [xa, xb] = g.sample_pair(rng);
    auto d = g.sample_distractor(xa, xb, rng);
    EXPECT_EQ(d.candidates, xb.candidates);
    EXPECT_EQ(d.target, 1 - xa.target);
  }
}

TEST(Colors, EnumerationCountsOrderedPairsTimesTargets) {
  for (int k : {3, 4, 6}) {
    colors::ColorGame g(small_palette(k));
    auto e = g.enumerate();
    EXPECT_EQ(e.n_speaker(), static_cast<std::size_t>(k * (k - 1) * 2));
    EXPECT_EQ(e.n_listener(), static_cast<std::size_t>(k * (k - 1)));
    double total = 0.0;
    for (const auto& row : e.joint) {
      for (double v : row) total += v;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Colors, SwapSymmetryIsRelabeling) {
  colors::ColorGame g;
  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    auto s = g.sample_scenario(rng);
    colors::ColorScenario swapped{{s.candidates[1], s.candidates[0]}, 1 - s.target};
    EXPECT_EQ(g.speaker_features(s), g.speaker_features(swapped));
    EXPECT_EQ(s.speaker().target_color(), swapped.speaker().target_color());
    EXPECT_EQ(g.reward(s, s.target), g.reward(swapped, swapped.target));
  }
}

TEST(Colors, PaletteLoaderReportsLines) {
  auto path = std::filesystem::temp_directory_path() / "neuralese_palette.txt";
  {
    std::ofstream out(path);
    out << "# L a b fine coarse\n50 10 10 brick red\n60 -10 30 olive yellow\n70 200 0 bad red\n";
  }
  try {
    colors::Palette::load(path.string());
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4u);
  }
  std::filesystem::remove(path);
}

TEST(Maps, ShippedFilesMatchBuiltins) {
  auto builtins = driving::builtin_maps();
  std::vector<std::string> files;
  for (const auto& entry : std::filesystem::directory_iterator(kMapsDir)) {
    if (entry.path().filename().string() != "mini.txt") files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());
  ASSERT_EQ(files.size(), builtins.size());
  for (std::size_t i = 0; i < files.size(); ++i) {
    auto m = driving::GridMap::load(files[i]);
    EXPECT_EQ(m.rows(), builtins[i].rows());
    EXPECT_EQ(m.height(), 8);
    EXPECT_EQ(m.width(), 8);
  }
  auto mini = driving::GridMap::load(kMapsDir + "/mini.txt");
  EXPECT_EQ(mini.rows(), driving::mini_maps()[0].rows());
}

TEST(Maps, LoaderRejectsBadMaps) {
  EXPECT_THROW(driving::GridMap::parse("S.G\nS.\n"), ParseError);
  EXPECT_THROW(driving::GridMap::parse("S.X\nS.G\n"), ParseError);
  EXPECT_THROW(driving::GridMap::parse("S#G\nS#G\n#.#\n"), ParseError);  // goals unreachable from spawns
  EXPECT_THROW(driving::GridMap::parse("S..\n...\n..G\n"), ParseError);  // one spawn only
}

TEST(Driving, ResetGivesDistinctRoadSpawns) {
  driving::DrivingGame g;
  Rng rng(5);
  for (int i = 0; i < 2000; ++i) {
    auto s = g.reset(rng);
    const auto& m = g.map(s.map_id);
    EXPECT_NE(s.cars[0].pos, s.cars[1].pos);
    EXPECT_NE(s.cars[0].goal, s.cars[1].goal);
    for (const auto& c : s.cars) {
      EXPECT_TRUE(m.road(c.pos));
      EXPECT_TRUE(m.road(c.goal));
      EXPECT_TRUE(g.legal(g.observe(s, 0)));
    }
  }
}

TEST(Driving, BothWaitCostsTwoStepPenalties) {
  driving::DrivingGame g;
  Rng rng(6);
  auto s = g.reset(rng);
  auto r = g.step(s, driving::kWait, driving::kWait);
  EXPECT_DOUBLE_EQ(r.reward, 2 * g.rewards().step);
  EXPECT_EQ(r.state.cars, s.cars);
  EXPECT_EQ(r.state.t, 1);
}

TEST(Driving, BlockedMoveKeepsPosition) {
  driving::DrivingGame g(driving::mini_maps());
  driving::DrivingState s;
  s.cars[0] = {{0, 1}, driving::kNorth, {1, 3}, false};  // north of (0,1) is off the map
  s.cars[1] = {{2, 3}, driving::kEast, {2, 0}, false};   // east of (2,3) is off the map
  auto r = g.step(s, driving::kForward, driving::kForward);
  EXPECT_EQ(r.state.cars[0].pos, (driving::Cell{0, 1}));
  EXPECT_EQ(r.state.cars[1].pos, (driving::Cell{2, 3}));
  EXPECT_DOUBLE_EQ(r.reward, 2 * g.rewards().step);
  EXPECT_FALSE(r.done);
}

TEST(Driving, SameCellAndSwapAreCollisions) {
  driving::DrivingGame g(driving::mini_maps());
  driving::DrivingState s;
  s.cars[0] = {{1, 1}, driving::kEast, {1, 3}, false};
  s.cars[1] = {{1, 3}, driving::kWest, {2, 0}, false};
  auto r = g.step(s, driving::kForward, driving::kForward);  // both into (1,2)
  EXPECT_TRUE(r.done);
  EXPECT_TRUE(r.state.collided);
  EXPECT_DOUBLE_EQ(r.reward, 2 * g.rewards().step + 2 * g.rewards().collision);

  s.cars[1] = {{1, 2}, driving::kWest, {2, 0}, false};
  r = g.step(s, driving::kForward, driving::kForward);  // swap (1,1) <-> (1,2)
  EXPECT_TRUE(r.state.collided);
}

TEST(Driving, ReachingGoalPaysOnceAndRemovesCar) {
  driving::DrivingGame g(driving::mini_maps());
  driving::DrivingState s;
  s.cars[0] = {{1, 2}, driving::kEast, {1, 3}, false};
  s.cars[1] = {{2, 1}, driving::kWest, {2, 0}, false};
  auto r = g.step(s, driving::kForward, driving::kWait);
  EXPECT_TRUE(r.state.cars[0].finished);
  EXPECT_DOUBLE_EQ(r.reward, 1.0 + 2 * g.rewards().step);
  auto r2 = g.step(r.state, driving::kWait, driving::kForward);
  EXPECT_TRUE(r2.done);
  EXPECT_DOUBLE_EQ(r2.reward, 1.0 + g.rewards().step);
}

TEST(Driving, EpisodesEndWithinStepLimit) {
  driving::DrivingGame g;
  Rng rng(7);
  for (int e = 0; e < 200; ++e) {
    auto s = g.reset(rng);
    int steps = 0;
    while (!s.done) {
      s = g.step(s, static_cast<int>(uniform_index(rng, 5)), static_cast<int>(uniform_index(rng, 5))).state;
      ++steps;
    }
    EXPECT_LE(steps, 40);
  }
  auto s = g.reset(rng);
  EXPECT_THROW(g.step(s, 5, 0), IllegalAction);
  EXPECT_THROW(g.step(s, 0, -1), IllegalAction);
}

TEST(Driving, ShortestPathPolicyReachesGoal) {
  driving::DrivingGame g;
  Rng rng(8);
  for (int e = 0; e < 100; ++e) {
    auto s = g.reset(rng);
    for (int t = 0; t < 40 && !s.cars[0].finished && !s.done; ++t) {
      s = g.step(s, g.shortest_path_action(g.observe(s, 0)), driving::kWait).state;
    }
    EXPECT_TRUE(s.cars[0].finished || s.collided);
  }
}

TEST(Driving, DistractorsAreLegal) {
  driving::DrivingGame g;
  Rng rng(9);
  for (int i = 0; i < 2000; ++i) {
    auto [a, b] = g.sample_pair(rng);
    auto d = g.sample_distractor(a, b, rng);
    EXPECT_TRUE(g.legal(a));
    EXPECT_TRUE(g.legal(d));
    EXPECT_EQ(d.map_id, b.map_id);
    EXPECT_NE(d.pos, b.pos);
    EXPECT_FALSE(d == a);
  }
}

TEST(Driving, EnumerationOnlyForMiniMaps) {
  EXPECT_THROW(driving::DrivingGame().enumerate(), NotEnumerable);
  driving::DrivingGame mini(driving::mini_maps());
  auto e = mini.enumerate();
  // 12 road cells x 4 orientations x 3 goals.
  EXPECT_EQ(e.n_speaker(), 144u);
  double total = 0.0;
  for (const auto& row : e.joint) {
    for (double v : row) total += v;
  }
  EXPECT_NEAR(total, 1.0, 1e-9);
}

TEST(Driving, FeaturesAreOneHotBlocks) {
  driving::DrivingGame g;
  Rng rng(10);
  auto [a, b] = g.sample_pair(rng);
  auto f = g.features(a);
  EXPECT_EQ(static_cast<int>(f.size()), g.feature_dim());
  double s = 0.0;
  for (double v : f) s += v;
  EXPECT_DOUBLE_EQ(s, 4.0);
}

TEST(Trace, JsonLinesRoundTrip) {
  GameTrace tr;
  tr.game_id = "g1";
  for (int t = 0; t < 3; ++t) {
    TraceStep s;
    s.t = t;
    s.obs_a = driving::to_json(driving::CarObs{{1, 1}, 2, {1, 3}, 0});
    s.obs_b = driving::to_json(driving::CarObs{{2, 2}, 0, {2, 0}, 0});
    s.msg_a = t == 1 ? nlohmann::json("going left") : nlohmann::json();
    s.msg_b = nlohmann::json::array({0.5, -0.25});
    s.act_a = t % 5;
    s.act_b = 4;
    s.reward = -0.02;
    s.done = t == 2;
    tr.steps.push_back(s);
  }
  auto text = traces_to_jsonl({tr, GameTrace{"g2", {tr.steps[0]}}});
  auto back = traces_from_jsonl(text);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0], tr);
  EXPECT_EQ(traces_to_jsonl(back), text);
  EXPECT_EQ(driving::car_obs_from_json(back[0].steps[0].obs_a), (driving::CarObs{{1, 1}, 2, {1, 3}, 0}));
  EXPECT_NO_THROW(back[0].validate(5));
}

TEST(Trace, MalformedLinesReportLineNumber) {
  std::string text =
      "{\"game_id\":\"a\",\"t\":0,\"obs_a\":{},\"obs_b\":{},\"act_a\":0,\"act_b\":0,\"reward\":0,\"done\":false}\n"
      "{not json}\n";
  try {
    traces_from_jsonl(text);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_TRUE(traces_from_jsonl("").empty());
}
