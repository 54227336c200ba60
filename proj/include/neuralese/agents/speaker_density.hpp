#pragma once

// p(z | x) for a trained agent: an imitation MLP predicts the mean message
// from the observation alone, and the channel noise sets an isotropic
// Gaussian around it.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <span>
#include <vector>

#include "neuralese/agents/agent.hpp"
#include "neuralese/nn/adam.hpp"

namespace neuralese::agents {

using NeuraleseMessage = std::vector<double>;

inline NeuraleseMessage to_message(const Tensor& t, Index row) {
  NeuraleseMessage m(static_cast<std::size_t>(t.cols()));
  for (Index j = 0; j < t.cols(); ++j) m[static_cast<std::size_t>(j)] = t(row, j);
  return m;
}

inline Tensor messages_to_tensor(const std::vector<NeuraleseMessage>& ms) { return rows_to_tensor(ms); }

/// -(d/2) ln(2 pi sigma^2) - |z - mean|^2 / (2 sigma^2)
inline double gaussian_log_density(std::span<const double> z, std::span<const double> mean, double sigma) {
  if (z.size() != mean.size()) throw ShapeMismatch("message dimension differs from the model's");
  double sq = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) sq += (z[i] - mean[i]) * (z[i] - mean[i]);
  double d = static_cast<double>(z.size());
  return -0.5 * d * std::log(2.0 * std::numbers::pi * sigma * sigma) - sq / (2.0 * sigma * sigma);
}

struct DensityFitConfig {
  int hidden = 128;
  double step_size = 0.0003;
  int epochs = 30;
  int batch = 32;
  double sigma = 0.3;
  double holdout_fraction = 0.1;
  std::uint64_t seed = 0;
};

struct DensityFitReport {
  double train_mse = 0.0;
  double heldout_mse = 0.0;
  /// MSE of always predicting the training mean message.
  double heldout_constant_mse = 0.0;
  std::vector<double> epoch_heldout_mse;
};

template <class Obs>
class NeuraleseSpeakerModel {
 public:
  using Message = NeuraleseMessage;
  using Observation = Obs;
  using Prepared = std::vector<double>;
  using FeatureFn = std::function<std::vector<double>(const Obs&)>;
  static constexpr bool categorical = false;

  NeuraleseSpeakerModel() = default;
  NeuraleseSpeakerModel(nn::Mlp mlp, FeatureFn features, double sigma)
      : mlp_(std::move(mlp)), features_(std::move(features)), sigma_(sigma) {
    if (!(sigma_ > 0.0)) throw InvalidConfig("speaker density sigma must be > 0");
  }

  double sigma() const { return sigma_; }
  int message_dim() const { return static_cast<int>(mlp_.output.out_features()); }
  const nn::Mlp& mlp() const { return mlp_; }
  nn::Mlp& mlp() { return mlp_; }
  const FeatureFn& feature_fn() const { return features_; }

  Prepared prepare(const Obs& x) const { return mean(x); }

  double log_prob(const Message& z, const Prepared& mean) const { return gaussian_log_density(z, mean, sigma_); }

  /// The prior ratio p(z') / p(z) is treated as constant for neuralese.
  double log_message_prior(const Message&) const { return 0.0; }

  Message mean(const Obs& x) const { return to_message(mlp_.eval(row_tensor(features_(x))), 0); }

  Tensor predict(const Tensor& features) const { return mlp_.eval(features); }

  nn::Checkpoint to_checkpoint() {
    nn::Checkpoint ck;
    nn::ParamRefs ps;
    mlp_.collect(ps);
    ck.put(ps);
    ck.meta = {{"kind", "speaker_density"},
               {"in", mlp_.hidden.in_features()},
               {"hidden", mlp_.hidden.out_features()},
               {"out", mlp_.output.out_features()},
               {"sigma", sigma_}};
    return ck;
  }

  static NeuraleseSpeakerModel from_checkpoint(const nn::Checkpoint& ck, FeatureFn features) {
    if (ck.meta.value("kind", "") != "speaker_density") throw FormatError("checkpoint does not hold a speaker density");
    Rng rng(0);
    nn::Mlp mlp("density", ck.meta.at("in").get<Index>(), ck.meta.at("hidden").get<Index>(),
                ck.meta.at("out").get<Index>(), rng);
    nn::ParamRefs ps;
    mlp.collect(ps);
    ck.get(ps);
    return NeuraleseSpeakerModel(std::move(mlp), std::move(features), ck.meta.at("sigma").get<double>());
  }

 private:
  nn::Mlp mlp_;
  FeatureFn features_;
  double sigma_ = 0.3;
};

/// Regresses messages (rows of `z`) onto observation features (rows of `x`)
/// with squared error. The last holdout_fraction of rows is held out.
inline nn::Mlp fit_message_regressor(const Tensor& x, const Tensor& z, const DensityFitConfig& cfg,
                                     DensityFitReport* report = nullptr) {
  if (x.rows() != z.rows() || x.rows() < 2) throw ShapeMismatch("fit: need matching rows, at least 2");
  if (cfg.hidden < 1 || cfg.epochs < 1 || cfg.batch < 1) throw InvalidConfig("fit: bad sizes");
  Rng rng(cfg.seed);
  Index n = x.rows();
  Index n_hold = std::clamp<Index>(static_cast<Index>(std::floor(n * cfg.holdout_fraction)), 1, n - 1);
  if (cfg.holdout_fraction <= 0.0) n_hold = 0;
  Index n_train = n - n_hold;
  nn::Mlp mlp("density", x.cols(), cfg.hidden, z.cols(), rng);
  nn::ParamRefs ps;
  mlp.collect(ps);
  nn::AdamState adam(cfg.step_size);

  auto heldout = [&]() {
    if (n_hold == 0) return 0.0;
    Tensor pred = mlp.eval(x.bottomRows(n_hold));
    return (pred - z.bottomRows(n_hold)).array().square().mean();
  };

  std::vector<Index> order(static_cast<std::size_t>(n_train));
  for (Index i = 0; i < n_train; ++i) order[static_cast<std::size_t>(i)] = i;
  DensityFitReport rep;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Index start = 0; start < n_train; start += cfg.batch) {
      Index b = std::min<Index>(cfg.batch, n_train - start);
      Tensor xb(b, x.cols()), zb(b, z.cols());
      for (Index i = 0; i < b; ++i) {
        xb.row(i) = x.row(order[static_cast<std::size_t>(start + i)]);
        zb.row(i) = z.row(order[static_cast<std::size_t>(start + i)]);
      }
      nn::Tape tape;
      Var loss = nn::mse(mlp(tape, tape.constant(xb)), zb);
      nn::zero_grads(ps);
      tape.backward(loss);
      nn::adam_step(ps, adam);
    }
    rep.epoch_heldout_mse.push_back(heldout());
  }
  if (report != nullptr) {
    rep.train_mse = (mlp.eval(x.topRows(n_train)) - z.topRows(n_train)).array().square().mean();
    rep.heldout_mse = heldout();
    if (n_hold > 0) {
      Tensor mean_row = z.topRows(n_train).colwise().mean();
      rep.heldout_constant_mse = (z.bottomRows(n_hold).rowwise() - mean_row.row(0)).array().square().mean();
    }
    *report = rep;
  }
  return mlp;
}

/// Rollout pairs of (observation, mean message) used to fit p(z|x) and to
/// draw neuralese inventories.
template <class Obs>
struct MessageSample {
  std::vector<Obs> obs;
  std::vector<NeuraleseMessage> messages;
};

template <class Obs>
NeuraleseSpeakerModel<Obs> fit_speaker_density(const MessageSample<Obs>& sample,
                                               typename NeuraleseSpeakerModel<Obs>::FeatureFn features,
                                               const DensityFitConfig& cfg, DensityFitReport* report = nullptr) {
  std::vector<std::vector<double>> rows;
  rows.reserve(sample.obs.size());
  for (const auto& o : sample.obs) rows.push_back(features(o));
  nn::Mlp mlp = fit_message_regressor(rows_to_tensor(rows), messages_to_tensor(sample.messages), cfg, report);
  return NeuraleseSpeakerModel<Obs>(std::move(mlp), std::move(features), cfg.sigma);
}

/// K exemplar messages by reservoir sampling over the rollout stream, in
/// first-visit order of the kept items. Deterministic per seed.
inline std::vector<NeuraleseMessage> neuralese_inventory(const std::vector<NeuraleseMessage>& stream, std::size_t k,
                                                         std::uint64_t seed) {
  if (k < 1) throw InvalidConfig("inventory size must be >= 1");
  if (stream.empty()) throw EmptyInventory("no rollout messages to sample from");
  Rng rng(seed);
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    if (keep.size() < k) {
      keep.push_back(i);
    } else {
      std::size_t j = uniform_index(rng, i + 1);
      if (j < k) keep[j] = i;
    }
  }
  std::sort(keep.begin(), keep.end());
  std::vector<NeuraleseMessage> out;
  for (std::size_t i : keep) out.push_back(stream[i]);
  return out;
}

/// Fraction of `messages` lying within Euclidean `radius` of some exemplar.
inline double inventory_coverage(const std::vector<NeuraleseMessage>& inventory,
                                 const std::vector<NeuraleseMessage>& messages, double radius) {
  if (messages.empty()) return 1.0;
  std::size_t covered = 0;
  for (const auto& m : messages) {
    for (const auto& e : inventory) {
      if (e.size() != m.size()) throw ShapeMismatch("coverage: message dimensions differ");
      double sq = 0.0;
      for (std::size_t i = 0; i < m.size(); ++i) sq += (m[i] - e[i]) * (m[i] - e[i]);
      if (sq <= radius * radius) {
        ++covered;
        break;
      }
    }
  }
  return static_cast<double>(covered) / static_cast<double>(messages.size());
}

/// Index of the inventory message nearest to z in Euclidean distance,
/// lowest index on ties.
inline std::size_t nearest_message(const std::vector<NeuraleseMessage>& inventory, const NeuraleseMessage& z) {
  if (inventory.empty()) throw EmptyInventory("nearest_message: empty inventory");
  std::size_t best = 0;
  double best_d = kInf;
  for (std::size_t i = 0; i < inventory.size(); ++i) {
    if (inventory[i].size() != z.size()) throw ShapeMismatch("nearest_message: dimension differs");
    double d = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) d += (inventory[i][j] - z[j]) * (inventory[i][j] - z[j]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

/// JSON form: {"kind": "neuralese_inventory", "messages": [[...], ...]}.
/// Doubles are written with round-trip precision by the JSON library.
inline void save_neuralese_inventory(const std::string& path, const std::vector<NeuraleseMessage>& inventory) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out << nlohmann::json{{"kind", "neuralese_inventory"}, {"messages", inventory}}.dump() << "\n";
}

inline std::vector<NeuraleseMessage> load_neuralese_inventory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  try {
    auto j = nlohmann::json::parse(in);
    if (j.value("kind", "") != "neuralese_inventory") throw FormatError(path + ": not a neuralese inventory");
    auto inv = j.at("messages").get<std::vector<NeuraleseMessage>>();
    if (inv.empty()) throw EmptyInventory(path + ": empty inventory");
    for (const auto& m : inv) {
      if (m.size() != inv.front().size()) throw FormatError(path + ": messages differ in dimension");
    }
    return inv;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
}

}  // namespace neuralese::agents
