#pragma once

// Behavior evaluation on driving: the first car replays a recorded human's
// actions and phrases exactly, ignoring anything said to it; the second car
// is the agent, hearing the human's phrases translated into neuralese.

#include <optional>

#include "neuralese/agents/driving.hpp"
#include "neuralese/eval/translators.hpp"
#include "neuralese/games/trace.hpp"

namespace neuralese::eval {

struct BehaviorResult {
  double mean_reward = 0.0;
  double completion_rate = 0.0;
  int n = 0;
};

namespace detail {

inline driving::Car car_from(const driving::DrivingGame& game, const driving::CarObs& x, const std::string& id) {
  const auto& m = game.map(x.map_id);
  if (!m.road(x.pos) || !m.road(x.goal)) throw TraceMapMismatch("trace " + id + ": car off the road");
  return {x.pos, x.orient, x.goal, x.pos == x.goal};
}

}  // namespace detail

/// Initial state recorded in a trace's first step.
inline driving::DrivingState initial_state(const driving::DrivingGame& game, const GameTrace& trace) {
  if (trace.steps.empty()) throw FormatError("trace " + trace.game_id + " is empty");
  driving::CarObs a, b;
  try {
    a = driving::car_obs_from_json(trace.steps.front().obs_a);
    b = driving::car_obs_from_json(trace.steps.front().obs_b);
  } catch (const FormatError& e) {
    throw FormatError("trace " + trace.game_id + ": " + e.what());
  }
  if (a.map_id != b.map_id) throw TraceMapMismatch("trace " + trace.game_id + ": cars on different maps");
  if (a.map_id < 0 || a.map_id >= game.n_maps()) {
    throw TraceMapMismatch("trace " + trace.game_id + ": unknown map id " + std::to_string(a.map_id));
  }
  driving::DrivingState s;
  s.map_id = a.map_id;
  s.cars[0] = detail::car_from(game, a, trace.game_id);
  s.cars[1] = detail::car_from(game, b, trace.game_id);
  s.done = s.cars[0].finished && s.cars[1].finished;
  return s;
}

/// Replays one trace against the agent. The human's phrase at step t reaches
/// the agent at step t + 1; silence and the first step carry a zero message.
/// After its trace runs out the human car waits.
inline std::pair<double, bool> replay_trace(const driving::DrivingGame& game, const GameTrace& trace,
                                            const agents::AgentCell& agent,
                                            const Translator<std::string, agents::NeuraleseMessage>& translate) {
  trace.validate(game.n_actions());
  auto s = initial_state(game, trace);
  agents::CarSeat seat(agent);
  agents::NeuraleseMessage heard(static_cast<std::size_t>(agent.config().message_dim), 0.0);
  double total = 0.0;
  std::size_t t = 0;
  while (!s.done) {
    int act_a = driving::kWait;
    std::optional<std::string> said;
    if (t < trace.steps.size()) {
      act_a = trace.steps[t].act_a;
      if (trace.steps[t].msg_a.is_string()) said = trace.steps[t].msg_a.get<std::string>();
    }
    int act_b = s.cars[1].finished ? driving::kWait : seat.act(game.features(game.observe(s, 1)), heard);
    auto res = game.step(s, act_a, act_b);
    total += res.reward;
    s = res.state;
    heard = said ? translate(*said) : agents::NeuraleseMessage(heard.size(), 0.0);
    ++t;
  }
  return {total, s.cars[0].finished && s.cars[1].finished};
}

inline BehaviorResult behavior_eval(const std::vector<GameTrace>& traces,
                                    const Translator<std::string, agents::NeuraleseMessage>& translate,
                                    const agents::AgentCell& agent, const driving::DrivingGame& game) {
  BehaviorResult r;
  for (const auto& tr : traces) {
    auto [reward, complete] = replay_trace(game, tr, agent, translate);
    r.mean_reward += reward;
    r.completion_rate += complete ? 1.0 : 0.0;
    ++r.n;
  }
  if (r.n > 0) {
    r.mean_reward /= r.n;
    r.completion_rate /= r.n;
  }
  return r;
}

}  // namespace neuralese::eval
