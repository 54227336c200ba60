#pragma once

// Two cars share one policy. At every step each car reads its private view
// and the message its partner sent on the previous step, then acts and
// speaks. Rows 0..b-1 of a batch are the first cars, rows b..2b-1 the second.

#include <cmath>
#include <functional>
#include <vector>

#include "neuralese/agents/agent.hpp"
#include "neuralese/agents/reference.hpp"
#include "neuralese/agents/speaker_density.hpp"
#include "neuralese/games/driving.hpp"
#include "neuralese/nn/adam.hpp"

namespace neuralese::agents {

namespace detail {

/// Row i <- row of the partner car.
inline std::vector<Index> partner_perm(Index b) {
  std::vector<Index> p(static_cast<std::size_t>(2 * b));
  for (Index i = 0; i < b; ++i) {
    p[static_cast<std::size_t>(i)] = i + b;
    p[static_cast<std::size_t>(i + b)] = i;
  }
  return p;
}

inline Tensor permute(const Tensor& t, const std::vector<Index>& perm) {
  Tensor out(t.rows(), t.cols());
  for (Index i = 0; i < t.rows(); ++i) out.row(i) = t.row(perm[static_cast<std::size_t>(i)]);
  return out;
}

inline Tensor car_features(const driving::DrivingGame& game, const std::vector<driving::DrivingState>& states) {
  Index b = static_cast<Index>(states.size());
  Tensor f(2 * b, game.feature_dim());
  for (Index e = 0; e < b; ++e) {
    for (int car = 0; car < 2; ++car) {
      auto row = game.features(game.observe(states[static_cast<std::size_t>(e)], car));
      for (std::size_t j = 0; j < row.size(); ++j) f(e + car * b, static_cast<Index>(j)) = row[j];
    }
  }
  return f;
}

inline bool car_active(const driving::DrivingState& s, int car) { return !s.done && !s.cars[car].finished; }

}  // namespace detail

inline TrainResult train_driving(const driving::DrivingGame& game, TrainConfig cfg, const ProgressFn& progress = {}) {
  cfg.validate();
  cfg.cell.obs_dim = game.feature_dim();
  cfg.cell.n_actions = game.n_actions();
  Rng rng(cfg.seed);
  TrainResult result{AgentCell(cfg.cell, rng), {}};
  AgentCell& agent = result.agent;
  AgentCell target = agent;
  auto params = agent.params();
  nn::AdamState adam(cfg.step_size);

  std::int64_t done_episodes = 0;
  std::int64_t update = 0;
  double loss_acc = 0.0, return_acc = 0.0;
  int acc_n = 0;
  while (done_episodes < cfg.episodes) {
    Index b = static_cast<Index>(std::min<std::int64_t>(cfg.batch, cfg.episodes - done_episodes));
    Index rows = 2 * b;
    auto perm = detail::partner_perm(b);
    std::vector<driving::DrivingState> states;
    for (Index e = 0; e < b; ++e) states.push_back(game.reset(rng));
    std::vector<double> returns(static_cast<std::size_t>(b), 0.0);
    double eps = std::min(1.0, epsilon(update) * cfg.epsilon_scale);

    nn::Tape tape;
    Var h = tape.constant(agent.zero_state(rows));
    Var z_in = tape.constant(agent.zero_message(rows));
    Tensor th = target.zero_state(rows), tz = target.zero_message(rows);

    std::vector<Var> q_taken;
    std::vector<Tensor> reward_t, mask_t, terminal_t, bootstrap_t;
    auto any_live = [&] {
      for (const auto& s : states) {
        if (!s.done) return true;
      }
      return false;
    };
    while (any_live()) {
      Tensor obs = detail::car_features(game, states);
      auto out = agent.forward(tape, tape.constant(obs), h, z_in);
      CellEval te = target.eval(obs, th, tz);
      if (!q_taken.empty()) {
        Tensor boot(rows, 1);
        for (Index i = 0; i < rows; ++i) boot(i, 0) = te.q.row(i).maxCoeff();
        bootstrap_t.push_back(std::move(boot));
      }

      std::vector<Index> actions(static_cast<std::size_t>(rows), driving::kWait);
      Tensor mask = Tensor::Zero(rows, 1), reward = Tensor::Zero(rows, 1), terminal = Tensor::Ones(rows, 1);
      for (Index i = 0; i < rows; ++i) {
        const auto& s = states[static_cast<std::size_t>(i % b)];
        if (detail::car_active(s, static_cast<int>(i / b))) {
          actions[static_cast<std::size_t>(i)] = epsilon_greedy(out.q.value(), i, eps, rng);
          mask(i, 0) = 1.0;
        }
      }
      for (Index e = 0; e < b; ++e) {
        auto& s = states[static_cast<std::size_t>(e)];
        if (s.done) continue;
        auto res = game.step(s, static_cast<int>(actions[static_cast<std::size_t>(e)]),
                             static_cast<int>(actions[static_cast<std::size_t>(e + b)]));
        returns[static_cast<std::size_t>(e)] += res.reward;
        for (int car = 0; car < 2; ++car) {
          Index i = e + car * b;
          reward(i, 0) = res.reward;
          terminal(i, 0) = detail::car_active(res.state, car) ? 0.0 : 1.0;
        }
        s = res.state;
      }
      q_taken.push_back(nn::gather_cols(out.q, actions));
      reward_t.push_back(std::move(reward));
      mask_t.push_back(std::move(mask));
      terminal_t.push_back(std::move(terminal));

      h = out.h;
      z_in = nn::permute_rows(nn::add_gaussian_noise(out.message, cfg.noise_sigma, rng), perm);
      th = te.h;
      tz = detail::permute(te.message, perm);
    }
    bootstrap_t.push_back(Tensor::Zero(rows, 1));

    double active = 0.0;
    for (const auto& m : mask_t) active += m.sum();
    Var loss;
    bool have_loss = false;
    for (std::size_t t = 0; t < q_taken.size(); ++t) {
      double n_t = mask_t[t].sum();
      if (n_t == 0.0) continue;
      Tensor y = reward_t[t].array() + cfg.gamma * (1.0 - terminal_t[t].array()) * bootstrap_t[t].array();
      Var l = nn::scale(nn::mse(q_taken[t], y, &mask_t[t]), n_t / active);
      loss = have_loss ? nn::add(loss, l) : l;
      have_loss = true;
    }
    double lv = have_loss ? loss.value()(0, 0) : 0.0;
    if (!std::isfinite(lv)) throw DivergedTraining("non-finite loss at update " + std::to_string(update));
    nn::zero_grads(params);
    if (have_loss) tape.backward(loss);
    if (!nn::grads_finite(params)) throw DivergedTraining("non-finite gradient at update " + std::to_string(update));
    nn::adam_step(params, adam);

    done_episodes += b;
    ++update;
    if (update % cfg.target_refresh == 0) target.copy_from(agent);
    loss_acc += lv;
    double ret = 0.0;
    for (double r : returns) ret += r;
    return_acc += ret / static_cast<double>(b);
    ++acc_n;
    if (update % cfg.log_every == 0 || done_episodes >= cfg.episodes) {
      CurvePoint p{done_episodes, loss_acc / acc_n, return_acc / acc_n, eps};
      result.curve.push_back(p);
      if (progress) progress(p);
      loss_acc = return_acc = 0.0;
      acc_n = 0;
    }
  }
  return result;
}

struct DrivingEval {
  double mean_reward = 0.0;
  /// Fraction of episodes in which both cars reached their goals.
  double completion_rate = 0.0;
  double collision_rate = 0.0;
  int episodes = 0;
};

/// Called once per live car per step with the car's view and the mean
/// message it sends.
using DrivingVisitor = std::function<void(const driving::CarObs&, const Tensor& message_row)>;

/// Greedy, noise-free self-play on n fresh episodes.
inline DrivingEval self_play_driving(const AgentCell& agent, const driving::DrivingGame& game, int n,
                                     std::uint64_t seed, const DrivingVisitor& visit = {}) {
  if (n < 1) throw InvalidConfig("self-play needs n >= 1");
  Rng rng(seed);
  Index b = n, rows = 2 * b;
  auto perm = detail::partner_perm(b);
  std::vector<driving::DrivingState> states;
  for (Index e = 0; e < b; ++e) states.push_back(game.reset(rng));
  std::vector<double> returns(static_cast<std::size_t>(b), 0.0);
  Tensor h = agent.zero_state(rows), z = agent.zero_message(rows);
  for (int t = 0; t < game.step_limit(); ++t) {
    Tensor obs = detail::car_features(game, states);
    CellEval out = agent.eval(obs, h, z);
    for (Index e = 0; e < b; ++e) {
      auto& s = states[static_cast<std::size_t>(e)];
      if (s.done) continue;
      if (visit) {
        for (int car = 0; car < 2; ++car) {
          if (detail::car_active(s, car)) visit(game.observe(s, car), out.message.row(e + car * b));
        }
      }
      auto res = game.step(s, argmax_row(out.q, e), argmax_row(out.q, e + b));
      returns[static_cast<std::size_t>(e)] += res.reward;
      s = res.state;
    }
    h = out.h;
    z = detail::permute(out.message, perm);
  }
  DrivingEval ev;
  ev.episodes = n;
  for (Index e = 0; e < b; ++e) {
    const auto& s = states[static_cast<std::size_t>(e)];
    ev.mean_reward += returns[static_cast<std::size_t>(e)];
    if (s.cars[0].finished && s.cars[1].finished) ev.completion_rate += 1.0;
    if (s.collided) ev.collision_rate += 1.0;
  }
  ev.mean_reward /= n;
  ev.completion_rate /= n;
  ev.collision_rate /= n;
  return ev;
}

/// (car view, mean message) pairs from greedy self-play.
inline MessageSample<driving::CarObs> collect_driving_messages(const AgentCell& agent, const driving::DrivingGame& game,
                                                               int n_episodes, std::uint64_t seed) {
  MessageSample<driving::CarObs> out;
  self_play_driving(agent, game, n_episodes, seed, [&](const driving::CarObs& x, const Tensor& m) {
    out.obs.push_back(x);
    out.messages.push_back(to_message(m, 0));
  });
  return out;
}

/// Recurrent state for one agent-driven car playing against an arbitrary
/// partner (a human or a scripted policy).
class CarSeat {
 public:
  explicit CarSeat(const AgentCell& agent) : agent_(&agent), h_(agent.zero_state(1)), z_out_(agent.zero_message(1)) {}

  /// Greedy action for this step given the car's view and the message
  /// received from the partner. The outgoing message is kept in message().
  int act(const std::vector<double>& features, const NeuraleseMessage& z_in) {
    if (static_cast<Index>(z_in.size()) != agent_->config().message_dim) {
      throw ShapeMismatch("incoming message has the wrong dimension");
    }
    CellEval out = agent_->eval(row_tensor(features), h_, row_tensor(z_in));
    h_ = out.h;
    z_out_ = out.message;
    return argmax_row(out.q, 0);
  }

  NeuraleseMessage message() const { return to_message(z_out_, 0); }

 private:
  const AgentCell* agent_;
  Tensor h_;
  Tensor z_out_;
};

}  // namespace neuralese::agents
