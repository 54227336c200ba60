#include <gtest/gtest.h>

#include <cstdio>
#include <sstream>

#include "neuralese/human/listener.hpp"
#include "neuralese/human/speaker_model.hpp"
#include "neuralese/human/synthetic.hpp"

using namespace neuralese;
using namespace neuralese::human;

namespace {

using IntRecord = TranscriptRecord<int>;

std::vector<IntRecord> int_records(const std::vector<std::pair<int, std::string>>& items) {
  std::vector<IntRecord> out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    out.push_back({"g" + std::to_string(i), 0, 0, items[i].first, items[i].second, 0});
  }
  return out;
}

std::vector<IntRecord> repeated(const std::vector<std::pair<std::string, int>>& counts) {
  std::vector<std::pair<int, std::string>> items;
  for (const auto& [msg, n] : counts) {
    for (int i = 0; i < n; ++i) items.push_back({0, msg});
  }
  return int_records(items);
}

std::vector<double> parity_features(int x) { return {x % 2 == 0 ? 1.0 : 0.0, x % 2 == 1 ? 1.0 : 0.0}; }

ColorRecord color_record() {
  ColorRecord r;
  r.game_id = "c1";
  r.obs.candidates = {colors::Lab{50.0, 10.0, -20.0}, colors::Lab{70.0, -30.0, 40.0}};
  r.obs.target = 1;
  r.message = "Greenish, kinda";
  r.action = 1;
  return r;
}

DriveRecord drive_record() {
  DriveRecord r;
  r.game_id = "d7";
  r.t = 3;
  r.player = 1;
  r.obs.pos = {2, 3};
  r.obs.orient = 1;
  r.obs.goal = {5, 0};
  r.obs.map_id = 2;
  r.message = "i'm at the top";
  r.action = driving::kForward;
  return r;
}

}  // namespace

TEST(Tokenize, LowercasesAndSplitsOnPunctuation) {
  EXPECT_EQ(tokenize("Going LEFT, now!"), (std::vector<std::string>{"going", "left", "now"}));
  EXPECT_EQ(tokenize("I'm at the top-left"), (std::vector<std::string>{"i'm", "at", "the", "top", "left"}));
  EXPECT_TRUE(tokenize("  ...  ").empty());
  EXPECT_EQ(normalize_message("  Wait   HERE. "), "wait here");
}

TEST(Transcripts, EmptyInputGivesNoRecords) {
  std::istringstream in("");
  EXPECT_TRUE(transcripts_from_jsonl<colors::SpeakerObs>(in, "empty").empty());
  std::istringstream blank("\n  \n");
  EXPECT_TRUE(transcripts_from_jsonl<driving::CarObs>(blank, "blank").empty());
}

TEST(Transcripts, TwoRecordRoundTrip) {
  std::vector<ColorRecord> cs = {color_record(), color_record()};
  cs[1].game_id = "c2";
  cs[1].obs.target = 0;
  cs[1].action = 0;
  std::istringstream cin_(transcripts_to_jsonl(cs));
  EXPECT_EQ(transcripts_from_jsonl<colors::SpeakerObs>(cin_, "colors"), cs);

  std::vector<DriveRecord> ds = {drive_record(), drive_record()};
  ds[1].action = driving::kWait;
  ds[1].message = "going to the middle";
  std::string path = ::testing::TempDir() + "drive_roundtrip.jsonl";
  save_transcripts(path, ds);
  EXPECT_EQ(load_transcripts<driving::CarObs>(path), ds);
  std::remove(path.c_str());
}

TEST(Transcripts, DrivingSchemaFields) {
  auto j = to_json(drive_record());
  for (const char* k : {"game_id", "t", "player", "pos", "orient", "goal", "map_id", "message", "action"}) {
    EXPECT_TRUE(j.contains(k)) << k;
  }
  // Integer game ids and integer actions are accepted too.
  j["game_id"] = 17;
  j["action"] = driving::kLeft;
  auto r = record_from_json<driving::CarObs>(j);
  EXPECT_EQ(r.game_id, "17");
  EXPECT_EQ(r.action, driving::kLeft);
}

TEST(Transcripts, MalformedLineReportsLineNumber) {
  std::string good = to_json(color_record()).dump();
  std::istringstream in(good + "\n\n{not json\n");
  try {
    transcripts_from_jsonl<colors::SpeakerObs>(in, "bad.jsonl");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Transcripts, InvalidFieldsRejected) {
  auto base = to_json(color_record());
  auto j = base;
  j["message"] = "   ";
  EXPECT_THROW(record_from_json<colors::SpeakerObs>(j), FormatError);
  j = base;
  j["target"] = 2;
  EXPECT_THROW(record_from_json<colors::SpeakerObs>(j), FormatError);
  j = base;
  j["candidates"][0] = {150.0, 0.0, 0.0};
  EXPECT_THROW(record_from_json<colors::SpeakerObs>(j), FormatError);
  auto d = to_json(drive_record());
  d["action"] = "fly";
  EXPECT_ANY_THROW(record_from_json<driving::CarObs>(d));
}

TEST(Inventory, DrivingThresholdIsMoreThanThree) {
  auto recs = repeated({{"going left", 4}, {"Going LEFT!", 0}, {"wait", 3}, {"stop here", 7}});
  auto inv = build_inventory(recs, InventoryRule::kDrivingMessages);
  EXPECT_EQ(inv.phrases(), (std::vector<std::string>{"stop here", "going left"}));
  EXPECT_FALSE(inv.contains("wait"));
}

TEST(Inventory, DrivingCountsNormalizedMessages) {
  auto recs = repeated({{"going left", 2}, {"Going LEFT!", 2}});
  auto inv = build_inventory(recs, InventoryRule::kDrivingMessages);
  EXPECT_EQ(inv.phrases(), (std::vector<std::string>{"going left"}));
  EXPECT_EQ(inv.phrases_of("GOING left."), (std::vector<std::string>{"going left"}));
}

TEST(Inventory, ColorsThresholdIsAtLeastFive) {
  auto recs = repeated({{"blue", 5}, {"teal", 4}, {"dark blue", 1}});
  auto inv = build_inventory(recs, InventoryRule::kColorsUnigrams);
  EXPECT_EQ(inv.phrases(), (std::vector<std::string>{"blue"}));
  EXPECT_EQ(inv.phrases_of("Dark blue, not teal"), (std::vector<std::string>{"blue"}));
}

TEST(Inventory, TiesOrderLexicographically) {
  auto recs = repeated({{"zeta", 5}, {"alpha", 5}, {"mid", 6}, {"beta", 5}});
  auto inv = build_inventory(recs, InventoryRule::kColorsUnigrams);
  EXPECT_EQ(inv.phrases(), (std::vector<std::string>{"mid", "alpha", "beta", "zeta"}));
  std::reverse(recs.begin(), recs.end());
  EXPECT_EQ(build_inventory(recs, InventoryRule::kColorsUnigrams).to_text(), inv.to_text());
}

TEST(Inventory, TextRoundTripAndErrors) {
  PhraseInventory inv(InventoryRule::kDrivingMessages, {"going left", "i'm at the top"});
  EXPECT_EQ(PhraseInventory::from_text(inv.to_text()), inv);
  EXPECT_THROW(PhraseInventory::from_text("going left\n"), ParseError);
  EXPECT_THROW(PhraseInventory::from_text("#neuralese-inventory v1 rule=birds\nx\n"), ParseError);
  EXPECT_THROW(PhraseInventory(InventoryRule::kColorsUnigrams, {"a", "a"}), InvalidConfig);
}

TEST(Inventory, EmptyCasesThrow) {
  EXPECT_THROW(build_inventory(std::vector<IntRecord>{}, InventoryRule::kColorsUnigrams), EmptyInventory);
  EXPECT_THROW(build_inventory(repeated({{"rare", 2}}), InventoryRule::kDrivingMessages), EmptyInventory);
}

TEST(HumanSpeaker, SinglePhraseCorpus) {
  std::vector<std::pair<int, std::string>> items;
  for (int i = 0; i < 40; ++i) items.push_back({i % 7, "left"});
  auto recs = int_records(items);
  PhraseInventory inv(InventoryRule::kDrivingMessages, {"left"});
  HumanFitConfig cfg;
  cfg.hidden = 8;
  cfg.epochs = 5;
  auto m = fit_human_speaker<int>(recs, inv, [](int x) { return std::vector<double>{x / 7.0}; }, cfg);
  for (int x = 0; x < 7; ++x) EXPECT_GE(m.probs(x)[0], 0.99);
  EXPECT_EQ(m.log_prob("right", m.prepare(0)), kNegInf);
}

TEST(HumanSpeaker, DeterministicPhraseLearned) {
  std::vector<std::pair<int, std::string>> items;
  Rng rng(4);
  for (int i = 0; i < 600; ++i) {
    int x = static_cast<int>(uniform_index(rng, 10));
    items.push_back({x, x % 2 == 0 ? "even" : "odd"});
  }
  auto recs = int_records(items);
  items.push_back({1, "unheard words"});
  auto with_oov = int_records(items);
  auto inv = build_inventory(recs, InventoryRule::kDrivingMessages);
  HumanFitConfig cfg;
  cfg.hidden = 16;
  cfg.epochs = 20;
  HumanFitReport rep;
  auto m = fit_human_speaker<int>(with_oov, inv, parity_features, cfg, &rep);
  EXPECT_EQ(rep.dropped, 1u);
  EXPECT_EQ(rep.examples, 600u);
  EXPECT_GE(rep.heldout_accuracy, 0.95);
  for (int x = 0; x < 10; ++x) {
    auto p = m.probs(x);
    double total = 0.0;
    for (double v : p) total += v;
    EXPECT_NEAR(total, 1.0, 1e-6);
    EXPECT_EQ(m.most_likely(x), x % 2 == 0 ? "even" : "odd");
  }
}

TEST(HumanSpeaker, CheckpointRoundTrip) {
  auto recs = int_records({{0, "even"}, {1, "odd"}, {2, "even"}, {3, "odd"}});
  PhraseInventory inv(InventoryRule::kDrivingMessages, {"even", "odd"});
  HumanFitConfig cfg;
  cfg.hidden = 4;
  cfg.epochs = 3;
  auto m = fit_human_speaker<int>(recs, inv, parity_features, cfg);
  auto back = HumanSpeakerModel<int>::from_checkpoint(m.to_checkpoint(), parity_features);
  EXPECT_EQ(back.phrases(), m.phrases());
  for (int x = 0; x < 4; ++x) EXPECT_EQ(back.probs(x), m.probs(x));
}

TEST(HumanSpeaker, ColorsModelIsValidCategorical) {
  colors::ColorGame game;
  auto recs = synthetic_color_transcripts(game, 400, 1);
  auto inv = build_inventory(recs, InventoryRule::kColorsUnigrams);
  HumanFitConfig cfg;
  cfg.epochs = 3;
  auto feats = [&](const colors::SpeakerObs& o) { return game.human_features(o); };
  auto m = fit_human_speaker<colors::SpeakerObs>(recs, inv, feats, cfg);
  for (std::size_t i = 0; i < 20; ++i) {
    double total = 0.0;
    for (double p : m.probs(recs[i].obs)) {
      EXPECT_GE(p, 0.0);
      total += p;
    }
    EXPECT_NEAR(total, 1.0, 1e-6);
  }
}

namespace {

ListenerScorer<int> left_right_listener() {
  std::vector<IntRecord> recs;
  Rng rng(2);
  for (int i = 0; i < 400; ++i) {
    int x = static_cast<int>(uniform_index(rng, 2));
    recs.push_back({"g", 0, 0, x, x == 0 ? (i % 3 ? "left" : "go left") : (i % 3 ? "right" : "turn right"), 0});
  }
  return fit_listener<int>(
      recs, parity_features, [](const IntRecord& r, Rng&) { return 1 - r.obs; }, ListenerFitConfig{});
}

}  // namespace

TEST(Listener, LeftRightCorpus) {
  auto lis = left_right_listener();
  Rng rng(8);
  int correct = 0;
  for (int i = 0; i < 400; ++i) {
    int truth = static_cast<int>(uniform_index(rng, 2));
    std::string phrase = truth == 0 ? "left" : "right";
    if (lis.guess(phrase, 0, 1) == truth) ++correct;
  }
  EXPECT_GE(correct / 400.0, 0.95);
}

TEST(Listener, SwapFlipsGuess) {
  auto lis = left_right_listener();
  for (const char* p : {"left", "right", "go left", "turn right"}) {
    ASSERT_NE(lis.score(0, p), lis.score(1, p));
    EXPECT_EQ(lis.guess(p, 0, 1), 1 - lis.guess(p, 1, 0)) << p;
  }
}

TEST(Listener, OutOfVocabularyUsesStatePrior) {
  auto lis = left_right_listener();
  EXPECT_DOUBLE_EQ(lis.score(0, "purple monkey"), lis.score(0, ""));
  int prior = lis.score(1, "") > lis.score(0, "") ? 1 : 0;
  EXPECT_EQ(lis.guess("purple monkey", 0, 1), prior);

  // With no state term every state ties, and a tie answers 0.
  ListenerScorer<int> flat({"left"}, nn::Tensor::Ones(2, 1), nn::Tensor::Zero(2, 1), parity_features);
  EXPECT_EQ(flat.guess("purple", 0, 1), 0);
  EXPECT_EQ(flat.guess("purple", 1, 0), 0);
}

TEST(Listener, CheckpointRoundTrip) {
  auto lis = left_right_listener();
  auto back = ListenerScorer<int>::from_checkpoint(lis.to_checkpoint(), parity_features);
  EXPECT_EQ(back.vocab(), lis.vocab());
  for (const char* p : {"left", "right", "x"}) EXPECT_DOUBLE_EQ(back.score(1, p), lis.score(1, p));
}

TEST(Synthetic, ColorHumanUsesPaletteNames) {
  colors::ColorGame game;
  auto recs = synthetic_color_transcripts(game, 500, 3);
  int fine = 0;
  for (const auto& r : recs) {
    std::size_t i = game.palette().nearest(r.obs.target_color());
    bool coarse = r.message == game.palette().coarse_names[i];
    bool is_fine = r.message == game.palette().fine_names[i];
    ASSERT_TRUE(coarse || is_fine) << r.message;
    fine += is_fine && !coarse;
  }
  EXPECT_NEAR(fine / 500.0, 0.45, 0.07);
  EXPECT_EQ(synthetic_color_transcripts(game, 50, 3), synthetic_color_transcripts(game, 50, 3));
}

TEST(Synthetic, DrivingDataIsConsistent) {
  driving::DrivingGame game(driving::mini_maps());
  auto data = synthetic_driving_data(game, 30, 5);
  ASSERT_EQ(data.traces.size(), 30u);
  std::size_t messages = 0;
  for (const auto& tr : data.traces) {
    tr.validate(game.n_actions());
    for (const auto& s : tr.steps) messages += s.msg_a.is_string() + s.msg_b.is_string();
  }
  EXPECT_EQ(messages, data.records.size());
  auto inv = build_inventory(data.records, InventoryRule::kDrivingMessages);
  EXPECT_TRUE(inv.size() > 0);
  for (const auto& p : inv.phrases()) {
    EXPECT_TRUE(p.rfind("i'm at the ", 0) == 0 || p.rfind("going to the ", 0) == 0) << p;
  }
}
