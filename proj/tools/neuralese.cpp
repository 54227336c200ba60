// neuralese: command-line driver for training, model fitting, translation,
// evaluation, verification and the live driving server.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "neuralese/eval/pipelines.hpp"
#include "neuralese/games/shapes.hpp"
#include "neuralese/server/session.hpp"
#include "neuralese/server/ws_server.hpp"
#include "neuralese/theory/prop2.hpp"
#include "neuralese/theory/single_step.hpp"

#ifndef NEURALESE_VERSION
#define NEURALESE_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace neuralese;

namespace {

struct Options {
  std::string command;
  std::string game = "colors";
  std::uint64_t seed = 0;
  std::string ckpt;
  std::string maps = "builtin";
  std::string out;
  long long n = -1;
  unsigned short port = 8080;
  std::string transcripts;
  std::string traces;
  std::string static_dir = "web";
  std::string host = "127.0.0.1";
  std::string src_lang = "blue";
  std::string tgt_lang = "blue";

  agents::TrainConfig train;
  eval::PipelineConfig pipe;
  double step_size = -1.0;
};

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void log(const json& j) { std::cerr << j.dump() << std::endl; }

fs::path run_dir(const Options& o) {
  if (!o.out.empty()) return o.out;
  const char* root = std::getenv("NEURALESE_DATA_DIR");
  fs::path base = root && *root ? fs::path(root) : fs::path(".");
  return base / "runs" / (o.game + "-s" + std::to_string(o.seed));
}

fs::path agent_path(const Options& o) { return o.ckpt.empty() ? run_dir(o) / eval::kAgentFile : fs::path(o.ckpt); }

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) throw Error(what + " not found at " + p.string());
}

std::vector<driving::GridMap> load_maps(const std::string& arg) {
  if (arg == "builtin") return driving::builtin_maps();
  if (arg == "mini") return driving::mini_maps();
  std::vector<driving::GridMap> maps;
  if (fs::is_directory(arg)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(arg)) {
      if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) maps.push_back(driving::GridMap::load(f.string()));
  } else {
    std::stringstream ss(arg);
    std::string item;
    while (std::getline(ss, item, ',')) {
      require_file(item, "map file");
      maps.push_back(driving::GridMap::load(item));
    }
  }
  if (maps.empty()) throw InvalidConfig("no maps found in '" + arg + "'");
  for (const auto& m : maps) {
    if (m.n_cells() != maps.front().n_cells()) throw InvalidConfig("all maps must have the same size");
  }
  return maps;
}

agents::AgentCell load_agent(const Options& o, int obs_dim, int n_actions) {
  auto p = agent_path(o);
  require_file(p, "agent checkpoint");
  auto agent = agents::AgentCell::from_checkpoint(nn::Checkpoint::load(p.string()));
  if (agent.config().obs_dim != obs_dim || agent.config().n_actions != n_actions) {
    throw ShapeMismatch("agent checkpoint " + p.string() + " does not fit this game (check --game and --maps)");
  }
  return agent;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out) throw Error("cannot write " + p.string());
  out << text;
}

void write_reports(const fs::path& p, const std::vector<eval::EvalReport>& rows) {
  write_text(p, eval::reports_to_csv(rows));
  std::cout << eval::reports_to_table(rows);
}

// ---- subcommands ----

int cmd_train(const Options& o) {
  auto cfg = o.train;
  cfg.seed = o.seed;
  if (o.n > 0) cfg.episodes = o.n;
  auto dir = run_dir(o);
  fs::create_directories(dir);
  agents::ProgressFn progress = [](const agents::CurvePoint& p) {
    log({{"episode", p.episode}, {"loss", p.loss}, {"reward", p.reward}, {"epsilon", p.epsilon}});
  };
  agents::TrainResult r;
  json summary;
  if (o.game == "colors") {
    if (o.step_size > 0) cfg.step_size = o.step_size;
    colors::ColorGame game;
    r = agents::train_reference(game, cfg, progress);
    summary["self_play_accuracy"] = agents::self_play_accuracy(r.agent, game, 5000, o.seed + 99);
  } else if (o.game == "driving") {
    cfg.step_size = o.step_size > 0 ? o.step_size : 0.0003;
    driving::DrivingGame game(load_maps(o.maps));
    r = agents::train_driving(game, cfg, progress);
    auto ev = agents::self_play_driving(r.agent, game, 1000, o.seed + 99);
    summary = {{"mean_reward", ev.mean_reward},
               {"completion_rate", ev.completion_rate},
               {"collision_rate", ev.collision_rate}};
  } else {
    throw InvalidConfig("train supports --game colors|driving");
  }
  auto path = o.ckpt.empty() ? dir / eval::kAgentFile : fs::path(o.ckpt);
  r.agent.to_checkpoint(o.game).save(path.string());
  write_text(dir / "curve.csv", agents::curve_to_csv(r.curve));
  summary["checkpoint"] = path.string();
  std::cout << summary.dump(2) << std::endl;
  return 0;
}

int cmd_synth_human(const Options& o) {
  auto dir = run_dir(o);
  fs::create_directories(dir);
  int n = o.n > 0 ? static_cast<int>(o.n) : o.pipe.human_games;
  auto path = o.transcripts.empty() ? dir / "transcripts.jsonl" : fs::path(o.transcripts);
  if (o.game == "colors") {
    colors::ColorGame game;
    human::save_transcripts(path.string(), human::synthetic_color_transcripts(game, n, o.seed + 2));
  } else if (o.game == "driving") {
    driving::DrivingGame game(load_maps(o.maps));
    auto data = human::synthetic_driving_data(game, n, o.seed + 2);
    human::save_transcripts(path.string(), data.records);
    save_traces((dir / "human_traces.jsonl").string(), data.traces);
  } else {
    throw InvalidConfig("synth-human supports --game colors|driving");
  }
  std::cout << json{{"transcripts", path.string()}, {"games", n}}.dump(2) << std::endl;
  return 0;
}

int cmd_fit_speaker(const Options& o) {
  auto dir = run_dir(o);
  fs::create_directories(dir);
  auto cfg = o.pipe;
  cfg.seed = o.seed;
  if (o.n > 0) cfg.message_rollouts = static_cast<int>(o.n);
  auto report = [&](auto& m) {
    eval::save_robot(dir, m);
    std::cout << json{{"heldout_mse", m.report.heldout_mse},
                      {"heldout_constant_mse", m.report.heldout_constant_mse},
                      {"inventory", m.inventory.size()},
                      {"speaker", (dir / eval::kRobotSpeakerFile).string()}}
                     .dump(2)
              << std::endl;
  };
  if (o.game == "colors") {
    colors::ColorGame game;
    auto agent = load_agent(o, colors::kFeatureDim, game.n_actions());
    auto m = eval::fit_robot(game, agent, cfg);
    report(m);
  } else if (o.game == "driving") {
    driving::DrivingGame game(load_maps(o.maps));
    auto agent = load_agent(o, game.feature_dim(), game.n_actions());
    auto m = eval::fit_robot(game, agent, cfg);
    report(m);
  } else {
    throw InvalidConfig("fit-speaker supports --game colors|driving");
  }
  return 0;
}

int cmd_fit_human(const Options& o) {
  auto dir = run_dir(o);
  fs::create_directories(dir);
  auto cfg = o.pipe;
  cfg.seed = o.seed;
  auto path = o.transcripts.empty() ? dir / "transcripts.jsonl" : fs::path(o.transcripts);
  require_file(path, "transcripts (run synth-human or pass --transcripts)");
  auto report = [&](auto& m) {
    eval::save_human(dir, m);
    std::cout << json{{"phrases", m.phrases().phrases()},
                      {"examples", m.report.examples},
                      {"dropped", m.report.dropped},
                      {"heldout_accuracy", m.report.heldout_accuracy},
                      {"heldout_perplexity", m.report.heldout_perplexity},
                      {"speaker", (dir / eval::kHumanSpeakerFile).string()}}
                     .dump(2)
              << std::endl;
  };
  if (o.game == "colors") {
    colors::ColorGame game;
    auto m = eval::fit_human(game, human::load_transcripts<colors::SpeakerObs>(path.string()), cfg);
    report(m);
  } else if (o.game == "driving") {
    driving::DrivingGame game(load_maps(o.maps));
    auto m = eval::fit_human(game, human::load_transcripts<driving::CarObs>(path.string()), cfg);
    report(m);
  } else {
    throw InvalidConfig("fit-human supports --game colors|driving");
  }
  return 0;
}

TabularSpeaker shapes_language(const std::string& name) {
  if (name == "blue") return shapes::blue_speaker();
  if (name == "red") return shapes::red_speaker();
  throw InvalidConfig("shapes languages are blue and red");
}

std::vector<std::string> shapes_words(const std::string& name) {
  if (name == "blue") return {shapes::kBlueWords.begin(), shapes::kBlueWords.end()};
  return {shapes::kRedWords.begin(), shapes::kRedWords.end()};
}

int cmd_translate(const Options& o) {
  auto dir = run_dir(o);
  fs::create_directories(dir);
  auto cfg = o.pipe;
  cfg.seed = o.seed;
  json summary;
  if (o.game == "shapes") {
    shapes::ShapesGame game;
    auto src = shapes_language(o.src_lang), tgt = shapes_language(o.tgt_lang);
    QEstimator<TabularSpeaker, TabularSpeaker> est(game, src, tgt, cfg.q_config());
    auto si = src.inventory(), ti = tgt.inventory();
    auto dict = build_dictionary(std::span<const int>(si), std::span<const int>(ti),
                                 [&est](int z, std::span<const int> c) { return est.score_all(z, c); });
    auto path = dir / ("dict_" + o.src_lang + "_" + o.tgt_lang + ".tsv");
    dict.save(path.string());
    auto sw = shapes_words(o.src_lang), tw = shapes_words(o.tgt_lang);
    for (const auto& e : dict.entries) {
      summary["entries"].push_back({{"source", sw[e.source]},
                                    {"target", e.target ? json(tw[*e.target]) : json(nullptr)},
                                    {"q", e.score.feasible() ? json(e.score.value()) : json("inf")}});
    }
    summary["dictionary"] = path.string();
  } else {
    auto build = [&](const auto& game, auto features_robot, auto features_human, auto obs_tag) {
      using Obs = decltype(obs_tag);
      auto robot = eval::load_robot<Obs>(dir, features_robot);
      auto hum = eval::load_human<Obs>(dir, features_human);
      auto r2h = eval::make_r2h(game, robot, hum, cfg);
      eval::belief_dictionary(*r2h, robot.inventory, Direction::kRobotToHuman).save((dir / eval::kR2HDictFile).string());
      auto h2r = eval::make_h2r(game, robot, hum, cfg);
      eval::belief_dictionary(*h2r, hum.phrases().phrases(), Direction::kHumanToRobot)
          .save((dir / eval::kH2RDictFile).string());
      summary = {{"r2h", (dir / eval::kR2HDictFile).string()},
                 {"h2r", (dir / eval::kH2RDictFile).string()},
                 {"robot_inventory", robot.inventory.size()},
                 {"phrases", hum.phrases().size()}};
    };
    require_file(dir / eval::kRobotSpeakerFile, "robot speaker model (run fit-speaker)");
    require_file(dir / eval::kHumanSpeakerFile, "human speaker model (run fit-human)");
    if (o.game == "colors") {
      colors::ColorGame game;
      build(game, eval::colors_speaker_features(game), eval::colors_human_features(game), colors::SpeakerObs{});
    } else if (o.game == "driving") {
      driving::DrivingGame game(load_maps(o.maps));
      build(game, eval::driving_features(game), eval::driving_features(game), driving::CarObs{});
    } else {
      throw InvalidConfig("translate supports --game shapes|colors|driving");
    }
  }
  std::cout << summary.dump(2) << std::endl;
  return 0;
}

int cmd_eval_belief(const Options& o) {
  if (o.game != "colors") throw InvalidConfig("eval-belief supports --game colors");
  auto dir = run_dir(o);
  auto cfg = o.pipe;
  cfg.seed = o.seed;
  if (o.n > 0) cfg.belief_n = static_cast<int>(o.n);
  colors::ColorGame game;
  auto agent = load_agent(o, colors::kFeatureDim, game.n_actions());
  auto robot = eval::load_robot<colors::SpeakerObs>(dir, eval::colors_speaker_features(game));
  auto hum = eval::load_human<colors::SpeakerObs>(dir, eval::colors_human_features(game));
  write_reports(dir / "belief_report.csv", eval::colors_belief_reports(game, agent, robot, hum, cfg));
  return 0;
}

int cmd_eval_behavior(const Options& o) {
  if (o.game != "driving") throw InvalidConfig("eval-behavior supports --game driving");
  auto dir = run_dir(o);
  auto cfg = o.pipe;
  cfg.seed = o.seed;
  if (o.n > 0) cfg.behavior_traces = static_cast<int>(o.n);
  driving::DrivingGame game(load_maps(o.maps));
  auto agent = load_agent(o, game.feature_dim(), game.n_actions());
  auto robot = eval::load_robot<driving::CarObs>(dir, eval::driving_features(game));
  auto hum = eval::load_human<driving::CarObs>(dir, eval::driving_features(game));
  std::vector<GameTrace> traces;
  if (!o.traces.empty()) {
    require_file(o.traces, "traces");
    traces = load_traces(o.traces);
  } else {
    traces = human::synthetic_driving_data(game, cfg.behavior_traces, cfg.seed + 5).traces;
  }
  write_reports(dir / "behavior_report.csv", eval::driving_behavior_reports(game, agent, robot, hum, traces, cfg));
  return 0;
}

int cmd_verify(const Options& o) {
  auto dir = run_dir(o);
  fs::create_directories(dir);
  int n = o.n > 0 ? static_cast<int>(o.n) : 500;
  json out;
  bool ok = true;

  // Shipped fixture: translating hexagon to "many".
  theory::SingleStepGame lever;
  lever.n_a = 3;
  lever.n_b = 1;
  lever.n_actions = 2;
  lever.prior = {{1.0 / 3}, {1.0 / 3}, {1.0 / 3}};
  lever.reward.assign(3, {{0.0, 0.0}});
  for (int s = 0; s < 3; ++s) lever.reward[s][0][shapes::size_of(s)] = 1.0;
  auto shapes_rep = theory::verify_prop1(lever, shapes::blue_speaker(), shapes::red_speaker(),
                                         {shapes::kFew, shapes::kMany, shapes::kMany});
  out["prop1_shapes"] = shapes_rep;
  ok = ok && shapes_rep.bound_holds && shapes_rep.source_bound_holds && shapes_rep.chain_holds;

  int held = 0, held_src = 0, chain = 0;
  json failures = json::array();
  for (int i = 0; i < n; ++i) {
    auto in = theory::random_prop1_instance(o.seed, static_cast<std::uint64_t>(i));
    auto rep = theory::verify_prop1(in.game, in.robot, in.human, in.translator);
    held += rep.bound_holds;
    held_src += rep.source_bound_holds;
    chain += rep.chain_holds;
    if (!(rep.bound_holds && rep.source_bound_holds && rep.chain_holds)) failures.push_back({{"instance", i}, {"report", rep}});
  }
  out["prop1_random"] = {{"instances", n},
                         {"bound_holds", held},
                         {"source_bound_holds", held_src},
                         {"chain_holds", chain},
                         {"failures", failures}};
  ok = ok && failures.empty();

  int matched = 0, n2 = std::max(50, n / 10);
  for (int i = 0; i < n2; ++i) {
    Rng rng = derive_rng(o.seed + 1, static_cast<std::uint64_t>(i));
    auto f = theory::random_prop2_fixture(rng);
    matched += theory::verify_prop2(f.robot, f.mixture, f.game).all_matched;
  }
  out["prop2"] = {{"fixtures", n2}, {"all_matched", matched}};
  ok = ok && matched == n2;

  Rng rng(o.seed + 2);
  int pins = 0, n3 = 10000;
  for (int i = 0; i < n3; ++i) {
    std::size_t k = 2 + uniform_index(rng, 8);
    auto p = sample_dirichlet(rng, k), q = sample_dirichlet(rng, k);
    pins += theory::pinsker_check(p, q);
  }
  out["pinsker"] = {{"pairs", n3}, {"held", pins}};
  ok = ok && pins == n3;
  out["ok"] = ok;

  write_text(dir / "verify.json", out.dump(2) + "\n");
  std::cout << json{{"ok", ok},
                    {"prop1_bound_holds", std::to_string(held) + "/" + std::to_string(n)},
                    {"prop2_all_matched", std::to_string(matched) + "/" + std::to_string(n2)},
                    {"pinsker", std::to_string(pins) + "/" + std::to_string(n3)},
                    {"report", (dir / "verify.json").string()}}
                   .dump(2)
            << std::endl;
  return ok ? 0 : 1;
}

int cmd_serve(const Options& o) {
  if (o.game != "driving") throw InvalidConfig("serve supports --game driving");
  auto dir = run_dir(o);
  driving::DrivingGame game(load_maps(o.maps));
  auto agent = load_agent(o, game.feature_dim(), game.n_actions());
  require_file(dir / eval::kR2HDictFile, "r2h dictionary (run translate)");
  require_file(dir / eval::kH2RDictFile, "h2r dictionary (run translate)");
  auto robot_inv = agents::load_neuralese_inventory((dir / eval::kRobotInventoryFile).string());
  auto hum = eval::load_human<driving::CarObs>(dir, eval::driving_features(game));
  auto phrases = hum.phrases();
  auto r2h = Dictionary::load((dir / eval::kR2HDictFile).string());
  auto h2r = Dictionary::load((dir / eval::kH2RDictFile).string());

  server::LiveTranslators tr{
      phrases,
      eval::dictionary_translator<std::string, agents::NeuraleseMessage>(
          h2r, robot_inv,
          [phrases](const std::string& p) {
            int i = phrases.id(p);
            if (i < 0) throw Infeasible("phrase outside the inventory");
            return static_cast<std::size_t>(i);
          }),
      eval::dictionary_translator<agents::NeuraleseMessage, std::string>(
          r2h, phrases.phrases(),
          [robot_inv](const agents::NeuraleseMessage& z) { return agents::nearest_message(robot_inv, z); })};
  server::SessionConfig sc;
  sc.seed = o.seed;
  sc.trace_dir = (dir / "sessions").string();
  fs::create_directories(sc.trace_dir);
  server::SessionManager sessions(game, agent, std::move(tr), sc);
  server::WsServer srv(sessions, o.static_dir, o.host, o.port);
  log({{"listening", o.host + ":" + std::to_string(srv.port())}, {"static", o.static_dir}, {"traces", sc.trace_dir}});
  srv.run();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"neuralese: translate learned agent messages into natural language"};
  app.set_version_flag("--version", std::string(NEURALESE_VERSION));
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* c) {
    c->add_option("--game", o.game, "colors, driving or shapes")->capture_default_str();
    c->add_option("--seed", o.seed, "random seed")->capture_default_str();
    c->add_option("--ckpt", o.ckpt, "agent checkpoint (default <out>/agent.ckpt)");
    c->add_option("--maps", o.maps, "builtin, mini, a directory of .txt maps, or a comma list")->capture_default_str();
    c->add_option("--out", o.out, "run directory (default $NEURALESE_DATA_DIR/runs/<game>-s<seed>)");
    c->add_option("--n", o.n, "episodes, games, samples or instances, depending on the command");
  };
  auto qopts = [&](CLI::App* c) {
    c->add_option("--contexts", o.pipe.n_contexts, "sampled contexts for q")->capture_default_str();
    c->add_option("--distractors", o.pipe.n_distractors, "distractors per context")->capture_default_str();
  };

  auto* train = app.add_subcommand("train", "train an agent by self-play");
  common(train);
  train->add_option("--gamma", o.train.gamma)->capture_default_str();
  train->add_option("--step-size", o.step_size, "default 0.003 (colors), 0.0003 (driving)");
  train->add_option("--noise", o.train.noise_sigma, "channel noise sigma")->capture_default_str();
  train->add_option("--batch", o.train.batch)->capture_default_str();
  train->add_option("--log-every", o.train.log_every, "batches between progress lines")->capture_default_str();

  auto* synth = app.add_subcommand("synth-human", "write synthetic human transcripts");
  common(synth);
  synth->add_option("--transcripts", o.transcripts, "output path (default <out>/transcripts.jsonl)");

  auto* fit_speaker = app.add_subcommand("fit-speaker", "fit the agent's message density and inventory");
  common(fit_speaker);

  auto* fit_human = app.add_subcommand("fit-human", "fit human speaker (and listener) models");
  common(fit_human);
  fit_human->add_option("--transcripts", o.transcripts, "transcripts (default <out>/transcripts.jsonl)");

  auto* translate = app.add_subcommand("translate", "build belief-matching dictionaries");
  common(translate);
  qopts(translate);
  translate->add_option("--src", o.src_lang, "shapes source language (blue|red)")->capture_default_str();
  translate->add_option("--tgt", o.tgt_lang, "shapes target language (blue|red)")->capture_default_str();

  auto* eval_belief = app.add_subcommand("eval-belief", "reference-game evaluation of translators");
  common(eval_belief);
  qopts(eval_belief);

  auto* eval_behavior = app.add_subcommand("eval-behavior", "driving evaluation against recorded human traces");
  common(eval_behavior);
  qopts(eval_behavior);
  eval_behavior->add_option("--traces", o.traces, "trace JSONL (default: fresh synthetic traces)");

  auto* verify = app.add_subcommand("verify", "check the translation bounds numerically");
  common(verify);

  auto* serve = app.add_subcommand("serve", "serve live driving sessions over WebSocket");
  common(serve);
  serve->add_option("--port", o.port)->capture_default_str();
  serve->add_option("--host", o.host)->capture_default_str();
  serve->add_option("--static", o.static_dir, "directory of client files")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  o.command = app.get_subcommands().front()->get_name();

  log({{"neuralese", NEURALESE_VERSION},
       {"command", o.command},
       {"game", o.game},
       {"seed", o.seed},
       {"maps", o.maps},
       {"out", run_dir(o).string()},
       {"ckpt", agent_path(o).string()},
       {"n", o.n},
       {"n_contexts", o.pipe.n_contexts}});
  Timer timer;
  int rc = 0;
  try {
    if (o.command == "train") rc = cmd_train(o);
    if (o.command == "synth-human") rc = cmd_synth_human(o);
    if (o.command == "fit-speaker") rc = cmd_fit_speaker(o);
    if (o.command == "fit-human") rc = cmd_fit_human(o);
    if (o.command == "translate") rc = cmd_translate(o);
    if (o.command == "eval-belief") rc = cmd_eval_belief(o);
    if (o.command == "eval-behavior") rc = cmd_eval_behavior(o);
    if (o.command == "verify") rc = cmd_verify(o);
    if (o.command == "serve") rc = cmd_serve(o);
  } catch (const std::exception& e) {
    log({{"error", {{"command", o.command}, {"message", e.what()}}}});
    return 2;
  }
  log({{"command", o.command}, {"exit", rc}, {"seconds", timer.seconds()}});
  return rc;
}
