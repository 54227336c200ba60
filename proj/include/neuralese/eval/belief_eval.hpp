#pragma once

// State-guessing evaluation: the speaker describes x_a, the message is
// translated, and a listener in the other language picks x_a out of
// {x_a, distractor}, shown in random order.

#include <functional>

#include "neuralese/agents/reference.hpp"
#include "neuralese/core/speaker.hpp"

namespace neuralese::eval {

/// Trial i draws everything from derive_rng(seed, i), so any subset of
/// trials can run in any order with the same outcome.
///
/// speak(x_a, rng) -> source message; translate(source) -> target message;
/// listen(target, x_b, s0, s1) -> 0 or 1, the guessed index.
template <ContextSampler C, class Speak, class Translate, class Listen>
double belief_eval(const C& game, Speak&& speak, Translate&& translate, Listen&& listen, int n, std::uint64_t seed) {
  if (n < 1) throw InvalidConfig("belief_eval needs n >= 1");
  int correct = 0;
  for (int i = 0; i < n; ++i) {
    Rng rng = derive_rng(seed, static_cast<std::uint64_t>(i));
    auto [xa, xb] = game.sample_pair(rng);
    auto xd = game.sample_distractor(xa, xb, rng);
    int truth = static_cast<int>(uniform_index(rng, 2));
    const auto& s0 = truth == 0 ? xa : xd;
    const auto& s1 = truth == 0 ? xd : xa;
    auto src = speak(xa, rng);
    auto tgt = translate(src);
    if (listen(tgt, xb, s0, s1) == truth) ++correct;
  }
  return static_cast<double>(correct) / n;
}

/// An agent as listener: it reads x_b and the message, acts greedily, and
/// the guess is whichever state that action serves (0 if neither).
template <class G>
auto agent_listener(const agents::AgentCell& agent, const G& game) {
  return [&agent, &game](const std::vector<double>& z, const typename G::ListenerObs& xb,
                         const typename G::SpeakerObs& s0, const typename G::SpeakerObs& s1) {
    auto q = agents::listener_q(agent, agents::row_tensor(game.listener_features(xb)), agents::row_tensor(z));
    int a = agents::argmax_row(q, 0);
    if (a == game.action_for(s0)) return 0;
    return a == game.action_for(s1) ? 1 : 0;
  };
}

/// An agent as speaker: its noise-free mean message.
template <class G>
auto agent_speaker(const agents::AgentCell& agent, const G& game) {
  return [&agent, &game](const typename G::SpeakerObs& x, Rng&) {
    return agents::to_message(agents::speaker_messages(agent, agents::row_tensor(game.speaker_features(x))), 0);
  };
}

}  // namespace neuralese::eval
