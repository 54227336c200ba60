#pragma once

// Training and greedy play for one-round reference games: the speaker cell
// sees its observation and emits a message; the listener cell sees its own
// observation plus the noisy message and picks an action.

#include <cmath>
#include <concepts>
#include <functional>

#include "neuralese/agents/agent.hpp"
#include "neuralese/agents/speaker_density.hpp"
#include "neuralese/nn/adam.hpp"

namespace neuralese::agents {

template <class G>
concept ReferenceGame = requires(const G& g, Rng& rng, const typename G::Scenario& s, int a) {
  typename G::Scenario;
  { g.sample_scenario(rng) } -> std::convertible_to<typename G::Scenario>;
  { g.speaker_features(s) } -> std::convertible_to<std::vector<double>>;
  { g.listener_features(s) } -> std::convertible_to<std::vector<double>>;
  { g.reward(s, a) } -> std::convertible_to<double>;
  { g.n_actions() } -> std::convertible_to<int>;
  { g.feature_dim() } -> std::convertible_to<int>;
};

/// Mean outgoing message of the agent speaking first with observation rows.
inline Tensor speaker_messages(const AgentCell& agent, const Tensor& obs) {
  return agent.eval(obs, agent.zero_state(obs.rows()), agent.zero_message(obs.rows())).message;
}

/// Listener Q-values for observation rows given incoming message rows.
inline Tensor listener_q(const AgentCell& agent, const Tensor& obs, const Tensor& z) {
  return agent.eval(obs, agent.zero_state(obs.rows()), z).q;
}

using ProgressFn = std::function<void(const CurvePoint&)>;

template <ReferenceGame G>
TrainResult train_reference(const G& game, TrainConfig cfg, const ProgressFn& progress = {}) {
  cfg.validate();
  cfg.cell.obs_dim = game.feature_dim();
  cfg.cell.n_actions = game.n_actions();
  Rng rng(cfg.seed);
  TrainResult result{AgentCell(cfg.cell, rng), {}};
  AgentCell& agent = result.agent;
  auto params = agent.params();
  nn::AdamState adam(cfg.step_size);

  std::int64_t done_episodes = 0;
  std::int64_t update = 0;
  double loss_acc = 0.0, reward_acc = 0.0;
  int acc_n = 0;
  while (done_episodes < cfg.episodes) {
    int b = static_cast<int>(std::min<std::int64_t>(cfg.batch, cfg.episodes - done_episodes));
    std::vector<typename G::Scenario> scen;
    std::vector<std::vector<double>> sf, lf;
    for (int i = 0; i < b; ++i) {
      scen.push_back(game.sample_scenario(rng));
      sf.push_back(game.speaker_features(scen.back()));
      lf.push_back(game.listener_features(scen.back()));
    }
    nn::Tape tape;
    auto sp = agent.forward(tape, tape.constant(rows_to_tensor(sf)), tape.constant(agent.zero_state(b)),
                            tape.constant(agent.zero_message(b)));
    Var z = nn::add_gaussian_noise(sp.message, cfg.noise_sigma, rng);
    auto li = agent.forward(tape, tape.constant(rows_to_tensor(lf)), tape.constant(agent.zero_state(b)), z);

    double eps = std::min(1.0, epsilon(update) * cfg.epsilon_scale);
    std::vector<Index> actions(b);
    Tensor rewards(b, 1);
    for (int i = 0; i < b; ++i) {
      actions[i] = epsilon_greedy(li.q.value(), i, eps, rng);
      rewards(i, 0) = game.reward(scen[i], static_cast<int>(actions[i]));
    }
    // One-round episodes are terminal after the listener acts: the TD target
    // is the reward itself.
    Var loss = nn::mse(nn::gather_cols(li.q, actions), rewards);
    double lv = loss.value()(0, 0);
    if (!std::isfinite(lv)) throw DivergedTraining("non-finite loss at update " + std::to_string(update));
    nn::zero_grads(params);
    tape.backward(loss);
    if (!nn::grads_finite(params)) throw DivergedTraining("non-finite gradient at update " + std::to_string(update));
    nn::adam_step(params, adam);

    done_episodes += b;
    ++update;
    loss_acc += lv;
    reward_acc += rewards.mean();
    ++acc_n;
    if (update % cfg.log_every == 0 || done_episodes >= cfg.episodes) {
      CurvePoint p{done_episodes, loss_acc / acc_n, reward_acc / acc_n, eps};
      result.curve.push_back(p);
      if (progress) progress(p);
      loss_acc = reward_acc = 0.0;
      acc_n = 0;
    }
  }
  return result;
}

/// Fraction of n fresh scenarios where greedy self-play picks the rewarded
/// action. Messages are the noise-free means.
template <ReferenceGame G>
double self_play_accuracy(const AgentCell& agent, const G& game, int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<typename G::Scenario> scen;
  std::vector<std::vector<double>> sf, lf;
  for (int i = 0; i < n; ++i) {
    scen.push_back(game.sample_scenario(rng));
    sf.push_back(game.speaker_features(scen.back()));
    lf.push_back(game.listener_features(scen.back()));
  }
  Tensor z = speaker_messages(agent, rows_to_tensor(sf));
  Tensor q = listener_q(agent, rows_to_tensor(lf), z);
  double total = 0.0;
  for (int i = 0; i < n; ++i) total += game.reward(scen[i], argmax_row(q, i));
  return total / n;
}

/// (speaker observation, mean message) pairs from n fresh scenarios.
template <ReferenceGame G>
  requires requires(const typename G::Scenario& s) { s.speaker(); }
auto collect_speaker_messages(const AgentCell& agent, const G& game, int n, std::uint64_t seed) {
  using Obs = decltype(std::declval<typename G::Scenario>().speaker());
  Rng rng(seed);
  MessageSample<Obs> out;
  std::vector<std::vector<double>> sf;
  for (int i = 0; i < n; ++i) {
    auto s = game.sample_scenario(rng);
    out.obs.push_back(s.speaker());
    sf.push_back(game.speaker_features(s));
  }
  Tensor z = speaker_messages(agent, rows_to_tensor(sf));
  for (Index i = 0; i < z.rows(); ++i) out.messages.push_back(to_message(z, i));
  return out;
}

}  // namespace neuralese::agents
