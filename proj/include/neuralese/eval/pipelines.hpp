#pragma once

// End-to-end stages shared by the CLI and the acceptance checks: fit the
// speaker models around a trained agent, save and reload them, build
// translators and dictionaries, evaluate.

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "neuralese/agents/driving.hpp"
#include "neuralese/agents/reference.hpp"
#include "neuralese/agents/speaker_density.hpp"
#include "neuralese/eval/behavior_eval.hpp"
#include "neuralese/eval/belief_eval.hpp"
#include "neuralese/eval/report.hpp"
#include "neuralese/eval/translators.hpp"
#include "neuralese/human/listener.hpp"
#include "neuralese/human/speaker_model.hpp"
#include "neuralese/human/synthetic.hpp"

namespace neuralese::eval {

struct PipelineConfig {
  std::uint64_t seed = 0;
  /// Self-play scenarios (colors) or episodes (driving) for p(z|x).
  int message_rollouts = 5000;
  /// Synthetic human games used to fit the human models.
  int human_games = 3000;
  std::size_t neuralese_inventory = 256;
  std::size_t n_contexts = 1000;
  std::size_t n_distractors = 1;
  int belief_n = 2000;
  int behavior_traces = 100;
  agents::DensityFitConfig density;
  human::HumanFitConfig human;
  human::ListenerFitConfig listener;

  QEstimateConfig q_config() const {
    QEstimateConfig qc;
    qc.n_contexts = n_contexts;
    qc.n_distractors_per_context = n_distractors;
    qc.rng_seed = seed;
    return qc;
  }
};

inline constexpr TranslatorKind kAllKinds[] = {TranslatorKind::kRandom, TranslatorKind::kDirect,
                                               TranslatorKind::kBelief};

template <class Obs>
struct RobotModels {
  agents::NeuraleseSpeakerModel<Obs> speaker;
  std::vector<agents::NeuraleseMessage> inventory;
  agents::DensityFitReport report;
};

template <class Obs>
struct HumanModels {
  human::HumanSpeakerModel<Obs> speaker;
  /// Colors only.
  std::optional<human::ListenerScorer<Obs>> listener;
  human::HumanFitReport report;

  const human::PhraseInventory& phrases() const { return speaker.phrases(); }
};

inline auto colors_speaker_features(const colors::ColorGame& game) {
  return [&game](const colors::SpeakerObs& o) { return game.speaker_features(o); };
}
inline auto colors_human_features(const colors::ColorGame& game) {
  return [&game](const colors::SpeakerObs& o) { return game.human_features(o); };
}
inline auto driving_features(const driving::DrivingGame& game) {
  return [&game](const driving::CarObs& o) { return game.features(o); };
}

inline RobotModels<colors::SpeakerObs> fit_robot(const colors::ColorGame& game, const agents::AgentCell& agent,
                                                 const PipelineConfig& cfg) {
  auto sample = agents::collect_speaker_messages(agent, game, cfg.message_rollouts, cfg.seed + 1);
  auto dc = cfg.density;
  dc.seed = cfg.seed;
  RobotModels<colors::SpeakerObs> out;
  out.speaker = agents::fit_speaker_density<colors::SpeakerObs>(sample, colors_speaker_features(game), dc, &out.report);
  out.inventory = agents::neuralese_inventory(sample.messages, cfg.neuralese_inventory, cfg.seed);
  return out;
}

inline RobotModels<driving::CarObs> fit_robot(const driving::DrivingGame& game, const agents::AgentCell& agent,
                                              const PipelineConfig& cfg) {
  auto sample = agents::collect_driving_messages(agent, game, cfg.message_rollouts, cfg.seed + 1);
  auto dc = cfg.density;
  dc.seed = cfg.seed;
  RobotModels<driving::CarObs> out;
  out.speaker = agents::fit_speaker_density<driving::CarObs>(sample, driving_features(game), dc, &out.report);
  out.inventory = agents::neuralese_inventory(sample.messages, cfg.neuralese_inventory, cfg.seed);
  return out;
}

inline HumanModels<colors::SpeakerObs> fit_human(const colors::ColorGame& game,
                                                 const std::vector<human::ColorRecord>& records,
                                                 const PipelineConfig& cfg) {
  using SObs = colors::SpeakerObs;
  auto phrases = human::build_inventory(records, human::InventoryRule::kColorsUnigrams);
  auto hc = cfg.human;
  hc.seed = cfg.seed;
  HumanModels<SObs> out;
  out.speaker = human::fit_human_speaker<SObs>(records, phrases, colors_human_features(game), hc, &out.report);
  auto lc = cfg.listener;
  lc.seed = cfg.seed;
  out.listener = human::fit_listener<SObs>(
      records, colors_human_features(game),
      [](const human::ColorRecord& r, Rng&) { return SObs{r.obs.candidates, 1 - r.obs.target}; }, lc);
  return out;
}

inline HumanModels<driving::CarObs> fit_human(const driving::DrivingGame& game,
                                              const std::vector<human::DriveRecord>& records,
                                              const PipelineConfig& cfg) {
  auto phrases = human::build_inventory(records, human::InventoryRule::kDrivingMessages);
  auto hc = cfg.human;
  hc.seed = cfg.seed;
  HumanModels<driving::CarObs> out;
  out.speaker = human::fit_human_speaker<driving::CarObs>(records, phrases, driving_features(game), hc, &out.report);
  return out;
}

// Run-directory layout.
inline constexpr const char* kAgentFile = "agent.ckpt";
inline constexpr const char* kRobotSpeakerFile = "robot_speaker.ckpt";
inline constexpr const char* kRobotInventoryFile = "robot_inventory.json";
inline constexpr const char* kHumanSpeakerFile = "human_speaker.ckpt";
inline constexpr const char* kHumanListenerFile = "human_listener.ckpt";
inline constexpr const char* kR2HDictFile = "dict_r2h.tsv";
inline constexpr const char* kH2RDictFile = "dict_h2r.tsv";

template <class Obs>
void save_robot(const std::filesystem::path& dir, RobotModels<Obs>& m) {
  m.speaker.to_checkpoint().save((dir / kRobotSpeakerFile).string());
  agents::save_neuralese_inventory((dir / kRobotInventoryFile).string(), m.inventory);
}

template <class Obs, class F>
RobotModels<Obs> load_robot(const std::filesystem::path& dir, F features) {
  RobotModels<Obs> m;
  m.speaker = agents::NeuraleseSpeakerModel<Obs>::from_checkpoint(
      nn::Checkpoint::load((dir / kRobotSpeakerFile).string()), features);
  m.inventory = agents::load_neuralese_inventory((dir / kRobotInventoryFile).string());
  return m;
}

template <class Obs>
void save_human(const std::filesystem::path& dir, HumanModels<Obs>& m) {
  m.speaker.to_checkpoint().save((dir / kHumanSpeakerFile).string());
  if (m.listener) m.listener->to_checkpoint().save((dir / kHumanListenerFile).string());
}

template <class Obs, class F>
HumanModels<Obs> load_human(const std::filesystem::path& dir, F features) {
  HumanModels<Obs> m;
  m.speaker =
      human::HumanSpeakerModel<Obs>::from_checkpoint(nn::Checkpoint::load((dir / kHumanSpeakerFile).string()), features);
  auto lp = dir / kHumanListenerFile;
  if (std::filesystem::exists(lp)) {
    m.listener = human::ListenerScorer<Obs>::from_checkpoint(nn::Checkpoint::load(lp.string()), features);
  }
  return m;
}

template <class Obs>
using R2H = ModelTranslators<agents::NeuraleseSpeakerModel<Obs>, human::HumanSpeakerModel<Obs>>;
template <class Obs>
using H2R = ModelTranslators<human::HumanSpeakerModel<Obs>, agents::NeuraleseSpeakerModel<Obs>>;

template <class G, class Obs>
std::unique_ptr<R2H<Obs>> make_r2h(const G& game, const RobotModels<Obs>& robot, const HumanModels<Obs>& hum,
                                   const PipelineConfig& cfg) {
  return std::make_unique<R2H<Obs>>(game, robot.speaker, hum.speaker, hum.phrases().phrases(), cfg.q_config());
}

template <class G, class Obs>
std::unique_ptr<H2R<Obs>> make_h2r(const G& game, const RobotModels<Obs>& robot, const HumanModels<Obs>& hum,
                                   const PipelineConfig& cfg) {
  return std::make_unique<H2R<Obs>>(game, hum.speaker, robot.speaker, robot.inventory, cfg.q_config());
}

/// Belief translation of every source inventory entry.
template <class MT>
Dictionary belief_dictionary(const MT& tr, const std::vector<typename MT::Src>& src_inventory, Direction dir) {
  const auto& est = tr.estimator();
  return build_dictionary(std::span<const typename MT::Src>(src_inventory),
                          std::span<const typename MT::Tgt>(tr.inventory()),
                          [&est](const auto& z, auto c) { return est.score_all(z, c); }, dir);
}

/// Phrases outside the fitted inventory are replaced by the nearest
/// inventory phrase before translation, as in live play.
template <class Tgt>
Translator<std::string, Tgt> snap_to_inventory(const human::PhraseInventory& inv, Translator<std::string, Tgt> tr) {
  return [&inv, tr = std::move(tr)](const std::string& z) {
    return inv.contains(z) ? tr(z) : tr(inv[human::nearest_phrase(inv, z)]);
  };
}

/// Agent speaks and the model human listens; then the synthetic human speaks
/// and the agent listens. One row per direction and translator kind.
inline std::vector<EvalReport> colors_belief_reports(const colors::ColorGame& game, const agents::AgentCell& agent,
                                                     const RobotModels<colors::SpeakerObs>& robot,
                                                     const HumanModels<colors::SpeakerObs>& hum,
                                                     const PipelineConfig& cfg) {
  using SObs = colors::SpeakerObs;
  if (!hum.listener) throw InvalidConfig("colors belief evaluation needs a human listener model");
  std::vector<EvalReport> out;
  auto speak = agent_speaker(agent, game);
  const auto& lis = *hum.listener;
  auto listen = [&lis](const std::string& p, const colors::ListenerObs&, const SObs& s0, const SObs& s1) {
    return lis.guess(p, s0, s1);
  };
  auto fwd = make_r2h(game, robot, hum, cfg);
  for (auto k : kAllKinds) {
    double acc = belief_eval(game, speak, fwd->translator(k, cfg.seed), listen, cfg.belief_n, cfg.seed + 3);
    out.push_back({"colors", "r2h", kind_name(k), acc, 0.0, -1.0, cfg.belief_n, cfg.seed});
  }
  human::SyntheticColorHuman sh(game.palette());
  auto hspeak = [&sh](const SObs& x, Rng& rng) { return sh.speak(x, rng); };
  auto alisten = agent_listener(agent, game);
  auto back = make_h2r(game, robot, hum, cfg);
  for (auto k : kAllKinds) {
    double acc = belief_eval(game, hspeak, snap_to_inventory(hum.phrases(), back->translator(k, cfg.seed)), alisten,
                             cfg.belief_n, cfg.seed + 4);
    out.push_back({"colors", "h2r", kind_name(k), acc, 0.0, -1.0, cfg.belief_n, cfg.seed});
  }
  return out;
}

/// The agent takes over car 1 of recorded human games and hears car 0's
/// phrases through each translator.
inline std::vector<EvalReport> driving_behavior_reports(const driving::DrivingGame& game,
                                                        const agents::AgentCell& agent,
                                                        const RobotModels<driving::CarObs>& robot,
                                                        const HumanModels<driving::CarObs>& hum,
                                                        const std::vector<GameTrace>& traces,
                                                        const PipelineConfig& cfg) {
  std::vector<EvalReport> out;
  auto tr = make_h2r(game, robot, hum, cfg);
  for (auto k : kAllKinds) {
    auto r = behavior_eval(traces, snap_to_inventory(hum.phrases(), tr->translator(k, cfg.seed)), agent, game);
    out.push_back({"driving", "h2r", kind_name(k), -1.0, r.mean_reward, r.completion_rate, r.n, cfg.seed});
  }
  return out;
}

}  // namespace neuralese::eval
