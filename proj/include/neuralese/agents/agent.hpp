#pragma once

// The communicating cell: observation and incoming message are embedded by a
// tanh layer, fed to a GRU, and read out into Q-values and an outgoing message.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "neuralese/nn/checkpoint.hpp"

namespace neuralese::agents {

using nn::Index;
using nn::Tensor;
using nn::Var;

struct CellConfig {
  int obs_dim = 0;
  int n_actions = 0;
  int embed = 256;
  int hidden = 256;
  int message_dim = 64;

  void validate() const {
    if (obs_dim < 1 || n_actions < 1 || embed < 1 || hidden < 1 || message_dim < 1) {
      throw InvalidConfig("cell sizes must be positive");
    }
  }
  friend bool operator==(const CellConfig&, const CellConfig&) = default;
};

struct CellOutput {
  Var q;
  Var h;
  Var message;  // mean outgoing message, before channel noise
};

struct CellEval {
  Tensor q;
  Tensor h;
  Tensor message;
};

class AgentCell {
 public:
  AgentCell() = default;
  AgentCell(const CellConfig& cfg, Rng& rng)
      : cfg_(cfg),
        embed_("cell.embed", cfg.obs_dim + cfg.message_dim, cfg.embed, rng),
        gru_("cell.gru", cfg.embed, cfg.hidden, rng),
        q_head_("cell.q", cfg.hidden, cfg.n_actions, rng),
        msg_head_("cell.msg", cfg.hidden, cfg.message_dim, rng) {
    cfg.validate();
  }

  const CellConfig& config() const { return cfg_; }

  CellOutput forward(nn::Tape& t, Var obs, Var h, Var z_in) {
    if (obs.cols() != cfg_.obs_dim || z_in.cols() != cfg_.message_dim || h.cols() != cfg_.hidden) {
      throw ShapeMismatch("cell_forward: obs" + nn::shape_string(obs.value()) + " h" + nn::shape_string(h.value()) +
                          " z" + nn::shape_string(z_in.value()));
    }
    Var e = nn::tanh(embed_(t, nn::concat_cols(obs, z_in)));
    Var h_new = gru_(t, e, h);
    return {q_head_(t, h_new), h_new, msg_head_(t, h_new)};
  }

  CellEval eval(const Tensor& obs, const Tensor& h, const Tensor& z_in) const {
    if (obs.cols() != cfg_.obs_dim || z_in.cols() != cfg_.message_dim || h.cols() != cfg_.hidden ||
        obs.rows() != h.rows() || obs.rows() != z_in.rows()) {
      throw ShapeMismatch("cell_forward: inconsistent input shapes");
    }
    Tensor in(obs.rows(), obs.cols() + z_in.cols());
    in << obs, z_in;
    Tensor e = embed_.eval(in).array().tanh().matrix();
    Tensor h_new = gru_.eval(e, h);
    return {q_head_.eval(h_new), h_new, msg_head_.eval(h_new)};
  }

  Tensor zero_state(Index rows) const { return Tensor::Zero(rows, cfg_.hidden); }
  Tensor zero_message(Index rows) const { return Tensor::Zero(rows, cfg_.message_dim); }

  nn::ParamRefs params() {
    nn::ParamRefs out;
    embed_.collect(out);
    gru_.collect(out);
    q_head_.collect(out);
    msg_head_.collect(out);
    return out;
  }

  /// Copies parameter values from another cell of the same shape.
  void copy_from(const AgentCell& other) {
    auto mine = params();
    auto theirs = const_cast<AgentCell&>(other).params();
    for (std::size_t i = 0; i < mine.size(); ++i) mine[i].get().value = theirs[i].get().value;
  }

  nn::Checkpoint to_checkpoint(const std::string& game) {
    nn::Checkpoint ck;
    ck.put(params());
    ck.meta = {{"kind", "agent"},         {"game", game},           {"obs_dim", cfg_.obs_dim},
               {"n_actions", cfg_.n_actions}, {"embed", cfg_.embed}, {"hidden", cfg_.hidden},
               {"message_dim", cfg_.message_dim}};
    return ck;
  }

  static AgentCell from_checkpoint(const nn::Checkpoint& ck) {
    if (ck.meta.value("kind", "") != "agent") throw FormatError("checkpoint does not hold an agent");
    CellConfig cfg;
    cfg.obs_dim = ck.meta.at("obs_dim").get<int>();
    cfg.n_actions = ck.meta.at("n_actions").get<int>();
    cfg.embed = ck.meta.at("embed").get<int>();
    cfg.hidden = ck.meta.at("hidden").get<int>();
    cfg.message_dim = ck.meta.at("message_dim").get<int>();
    Rng rng(0);
    AgentCell cell(cfg, rng);
    auto ps = cell.params();
    ck.get(ps);
    return cell;
  }

 private:
  CellConfig cfg_;
  nn::Linear embed_;
  nn::Gru gru_;
  nn::Linear q_head_;
  nn::Linear msg_head_;
};

/// Exploration rate at training step t:
///   max{(1000 - t) / 1000, (5000 - t) / 50000, 0}.
inline double epsilon(std::int64_t t) {
  if (t < 0) throw InvalidConfig("epsilon: t must be >= 0");
  double x = static_cast<double>(t);
  return std::max({(1000.0 - x) / 1000.0, (5000.0 - x) / 50000.0, 0.0});
}

/// Index of the largest entry in a row; ties go to the lowest index.
inline int argmax_row(const Tensor& q, Index row) {
  int best = 0;
  for (Index a = 1; a < q.cols(); ++a) {
    if (q(row, a) > q(row, best)) best = static_cast<int>(a);
  }
  return best;
}

inline int epsilon_greedy(const Tensor& q, Index row, double eps, Rng& rng) {
  if (uniform01(rng) < eps) return static_cast<int>(uniform_index(rng, static_cast<std::size_t>(q.cols())));
  return argmax_row(q, row);
}

struct TrainConfig {
  double gamma = 0.9;
  double step_size = 0.003;
  double noise_sigma = 0.3;
  std::int64_t episodes = 50000;
  int batch = 32;
  std::uint64_t seed = 0;
  int target_refresh = 100;
  /// Multiplies the exploration schedule; 1 follows it as printed.
  double epsilon_scale = 1.0;
  int log_every = 10;
  CellConfig cell;

  void validate() const {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidConfig("gamma must be in [0, 1)");
    if (noise_sigma < 0.0) throw InvalidConfig("noise sigma must be >= 0");
    if (step_size <= 0.0) throw InvalidConfig("step size must be > 0");
    if (batch < 1 || episodes < 1) throw InvalidConfig("batch and episodes must be >= 1");
    if (target_refresh < 1) throw InvalidConfig("target refresh must be >= 1");
  }
};

struct CurvePoint {
  std::int64_t episode = 0;
  double loss = 0.0;
  double reward = 0.0;
  double epsilon = 0.0;
};

inline std::string curve_to_csv(const std::vector<CurvePoint>& curve) {
  std::string out = "episode,loss,reward,epsilon\n";
  char buf[128];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g,%.17g\n", static_cast<long long>(p.episode), p.loss, p.reward,
                  p.epsilon);
    out += buf;
  }
  return out;
}

struct TrainResult {
  AgentCell agent;
  std::vector<CurvePoint> curve;
};

inline Tensor rows_to_tensor(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return Tensor(0, 0);
  Tensor t(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size()) throw ShapeMismatch("ragged feature rows");
    for (std::size_t j = 0; j < rows[i].size(); ++j) t(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  }
  return t;
}

inline Tensor row_tensor(const std::vector<double>& row) { return rows_to_tensor({row}); }

}  // namespace neuralese::agents
