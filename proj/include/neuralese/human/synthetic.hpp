#pragma once

// Scripted stand-ins for crowdworker data.
//
// Colors: the speaker names the target by its coarse family name with
// probability 0.55 and by its fine name otherwise; the listener picks the
// candidate whose name matches.
// Driving: each car follows a shortest path, says where it is (or, less
// often, where it is going), and waits when its partner reports being in
// the region it is about to enter.

#include <string>
#include <vector>

#include "neuralese/games/colors.hpp"
#include "neuralese/games/driving.hpp"
#include "neuralese/games/trace.hpp"
#include "neuralese/human/inventory.hpp"
#include "neuralese/human/transcript.hpp"

namespace neuralese::human {

struct SyntheticColorConfig {
  double coarse_prob = 0.55;
};

class SyntheticColorHuman {
 public:
  explicit SyntheticColorHuman(colors::Palette palette, SyntheticColorConfig cfg = {})
      : palette_(std::move(palette)), cfg_(cfg) {
    if (cfg_.coarse_prob < 0.0 || cfg_.coarse_prob > 1.0) throw InvalidConfig("coarse_prob must be in [0, 1]");
  }

  std::string speak(const colors::SpeakerObs& x, Rng& rng) const {
    std::size_t i = palette_.nearest(x.target_color());
    return uniform01(rng) < cfg_.coarse_prob ? palette_.coarse_names[i] : palette_.fine_names[i];
  }

  /// Candidate matching a fine name beats one matching only a coarse name;
  /// with no way to separate them the guess is uniform.
  int guess(const std::string& message, const colors::ListenerObs& x, Rng& rng) const {
    auto tokens = tokenize(message);
    auto match = [&](int c) {
      std::size_t i = palette_.nearest(x.candidates[c]);
      int m = 0;
      for (const auto& t : tokens) {
        if (t == palette_.fine_names[i]) m = std::max(m, 2);
        if (t == palette_.coarse_names[i]) m = std::max(m, 1);
      }
      return m;
    };
    int m0 = match(0), m1 = match(1);
    if (m0 != m1) return m1 > m0 ? 1 : 0;
    return static_cast<int>(uniform_index(rng, 2));
  }

 private:
  colors::Palette palette_;
  SyntheticColorConfig cfg_;
};

/// One record per game: the speaker's view and phrase, and the listener's
/// choice as the action.
inline std::vector<ColorRecord> synthetic_color_transcripts(const colors::ColorGame& game, int n_games,
                                                            std::uint64_t seed, SyntheticColorConfig cfg = {}) {
  SyntheticColorHuman human(game.palette(), cfg);
  Rng rng(seed);
  std::vector<ColorRecord> out;
  for (int g = 0; g < n_games; ++g) {
    auto s = game.sample_scenario(rng);
    ColorRecord r;
    r.game_id = "colors-" + std::to_string(g);
    r.obs = s.speaker();
    r.message = human.speak(r.obs, rng);
    r.action = human.guess(r.message, s.listener(), rng);
    out.push_back(std::move(r));
  }
  return out;
}

/// "top left", "middle", "bottom right", ... for a cell, splitting each axis
/// into thirds.
inline std::string region_name(const driving::GridMap& m, driving::Cell c) {
  auto third = [](int v, int n) { return 3 * v < n ? 0 : (3 * v >= 2 * n ? 2 : 1); };
  static const char* rows[] = {"top", "middle", "bottom"};
  static const char* cols[] = {"left", "center", "right"};
  int r = third(c.r, m.height()), k = third(c.c, m.width());
  if (r == 1 && k == 1) return "middle";
  if (r == 1) return cols[k];
  if (k == 1) return rows[r];
  return std::string(rows[r]) + " " + cols[k];
}

struct SyntheticDrivingConfig {
  double goal_phrase_prob = 0.25;
  double yield_prob = 0.8;
};

class SyntheticDriver {
 public:
  SyntheticDriver(const driving::DrivingGame& game, SyntheticDrivingConfig cfg = {}) : game_(&game), cfg_(cfg) {}

  std::string speak(const driving::CarObs& x, Rng& rng) const {
    const auto& m = game_->map(x.map_id);
    if (uniform01(rng) < cfg_.goal_phrase_prob) return "going to the " + region_name(m, x.goal);
    return "i'm at the " + region_name(m, x.pos);
  }

  /// Shortest-path move, or wait when the partner's last message puts it in
  /// the region of the next cell.
  int act(const driving::CarObs& x, const std::string& partner_message, Rng& rng) const {
    int a = game_->shortest_path_action(x);
    if (a != driving::kForward && a != driving::kBack) return a;
    const auto& m = game_->map(x.map_id);
    int dir = a == driving::kForward ? x.orient : (x.orient + 2) % driving::kNumOrientations;
    std::string ahead = "i'm at the " + region_name(m, driving::neighbor(x.pos, dir));
    if (normalize_message(partner_message) == normalize_message(ahead) && uniform01(rng) < cfg_.yield_prob) {
      return driving::kWait;
    }
    return a;
  }

 private:
  const driving::DrivingGame* game_;
  SyntheticDrivingConfig cfg_;
};

struct SyntheticDrivingData {
  std::vector<GameTrace> traces;
  std::vector<DriveRecord> records;
};

/// Human-human episodes. Both cars speak every step; each hears the other's
/// message from the previous step.
inline SyntheticDrivingData synthetic_driving_data(const driving::DrivingGame& game, int n_games, std::uint64_t seed,
                                                   SyntheticDrivingConfig cfg = {}) {
  SyntheticDriver human(game, cfg);
  Rng rng(seed);
  SyntheticDrivingData out;
  for (int g = 0; g < n_games; ++g) {
    GameTrace trace;
    trace.game_id = "driving-" + std::to_string(g);
    auto s = game.reset(rng);
    std::array<std::string, 2> heard = {"", ""};
    while (!s.done) {
      std::array<driving::CarObs, 2> obs = {game.observe(s, 0), game.observe(s, 1)};
      std::array<std::string, 2> said;
      std::array<int, 2> act{};
      for (int c = 0; c < 2; ++c) {
        if (s.cars[c].finished) {
          act[c] = driving::kWait;
          continue;
        }
        said[c] = human.speak(obs[c], rng);
        act[c] = human.act(obs[c], heard[c], rng);
        out.records.push_back({trace.game_id, s.t, c, obs[c], said[c], act[c]});
      }
      auto res = game.step(s, act[0], act[1]);
      TraceStep step;
      step.t = s.t;
      step.obs_a = driving::to_json(obs[0]);
      step.obs_b = driving::to_json(obs[1]);
      step.msg_a = said[0].empty() ? nlohmann::json(nullptr) : nlohmann::json(said[0]);
      step.msg_b = said[1].empty() ? nlohmann::json(nullptr) : nlohmann::json(said[1]);
      step.act_a = act[0];
      step.act_b = act[1];
      step.reward = res.reward;
      step.done = res.done;
      trace.steps.push_back(std::move(step));
      heard = {said[1], said[0]};
      s = res.state;
    }
    out.traces.push_back(std::move(trace));
  }
  return out;
}

}  // namespace neuralese::human
