#pragma once

// p(z_h | x) for human phrases: a one-hidden-layer tanh MLP from observation
// features to a softmax over the phrase inventory.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "neuralese/agents/agent.hpp"
#include "neuralese/human/inventory.hpp"
#include "neuralese/nn/adam.hpp"
#include "neuralese/nn/checkpoint.hpp"

namespace neuralese::human {

using nn::Index;
using nn::Tensor;

inline std::vector<double> log_softmax_row(const Tensor& logits, Index row) {
  std::vector<double> out(static_cast<std::size_t>(logits.cols()));
  for (Index j = 0; j < logits.cols(); ++j) out[static_cast<std::size_t>(j)] = logits(row, j);
  double z = log_sum_exp(out);
  for (double& v : out) v -= z;
  return out;
}

template <class Obs>
class HumanSpeakerModel {
 public:
  using Message = std::string;
  using Observation = Obs;
  using Prepared = std::vector<double>;  // log-probabilities over the inventory
  using FeatureFn = std::function<std::vector<double>(const Obs&)>;
  static constexpr bool categorical = true;

  HumanSpeakerModel() = default;
  HumanSpeakerModel(nn::Mlp mlp, PhraseInventory inventory, FeatureFn features)
      : mlp_(std::move(mlp)), inventory_(std::move(inventory)), features_(std::move(features)) {
    if (static_cast<std::size_t>(mlp_.output.out_features()) != inventory_.size()) {
      throw ShapeMismatch("speaker model output size differs from the inventory");
    }
  }

  const PhraseInventory& phrases() const { return inventory_; }
  std::vector<std::string> inventory() const { return inventory_.phrases(); }
  const FeatureFn& feature_fn() const { return features_; }

  Prepared prepare(const Obs& x) const { return prepare_features(features_(x)); }

  Prepared prepare_features(const std::vector<double>& f) const {
    return log_softmax_row(mlp_.eval(agents::row_tensor(f)), 0);
  }

  double log_prob(const std::string& z, const Prepared& p) const {
    int id = inventory_.id(z);
    return id < 0 ? kNegInf : p[static_cast<std::size_t>(id)];
  }

  /// Uniform; the quality estimator replaces it with the empirical marginal.
  double log_message_prior(const std::string& z) const {
    return inventory_.contains(z) ? -std::log(static_cast<double>(inventory_.size())) : kNegInf;
  }

  std::vector<double> probs(const Obs& x) const {
    auto lp = prepare(x);
    for (double& v : lp) v = std::exp(v);
    return lp;
  }

  /// Most probable phrase; ties go to the earlier inventory entry.
  const std::string& most_likely(const Obs& x) const {
    auto lp = prepare(x);
    std::size_t best = 0;
    for (std::size_t i = 1; i < lp.size(); ++i) {
      if (lp[i] > lp[best]) best = i;
    }
    return inventory_[best];
  }

  nn::Checkpoint to_checkpoint() {
    nn::Checkpoint ck;
    nn::ParamRefs ps;
    mlp_.collect(ps);
    ck.put(ps);
    ck.meta = {{"kind", "human_speaker"},
               {"in", mlp_.hidden.in_features()},
               {"hidden", mlp_.hidden.out_features()},
               {"inventory", inventory_.to_text()}};
    return ck;
  }

  static HumanSpeakerModel from_checkpoint(const nn::Checkpoint& ck, FeatureFn features) {
    if (ck.meta.value("kind", "") != "human_speaker") throw FormatError("checkpoint does not hold a human speaker");
    auto inv = PhraseInventory::from_text(ck.meta.at("inventory").get<std::string>());
    Rng rng(0);
    nn::Mlp mlp("human", ck.meta.at("in").get<Index>(), ck.meta.at("hidden").get<Index>(),
                static_cast<Index>(inv.size()), rng);
    nn::ParamRefs ps;
    mlp.collect(ps);
    ck.get(ps);
    return HumanSpeakerModel(std::move(mlp), std::move(inv), std::move(features));
  }

 private:
  nn::Mlp mlp_;
  PhraseInventory inventory_;
  FeatureFn features_;
};

struct HumanFitConfig {
  int hidden = 128;
  double step_size = 0.003;
  int epochs = 30;
  int batch = 32;
  double holdout_fraction = 0.1;
  std::uint64_t seed = 0;
};

struct HumanFitReport {
  std::size_t examples = 0;
  /// Records with no inventory phrase.
  std::size_t dropped = 0;
  std::size_t heldout = 0;
  double heldout_perplexity = 0.0;
  double heldout_accuracy = 0.0;
};

/// Cross-entropy fit. Each record contributes one example per inventory
/// phrase it maps to; a shuffled holdout_fraction of examples is held out.
template <class Obs>
HumanSpeakerModel<Obs> fit_human_speaker(const std::vector<TranscriptRecord<Obs>>& records,
                                         const PhraseInventory& inventory,
                                         typename HumanSpeakerModel<Obs>::FeatureFn features,
                                         const HumanFitConfig& cfg, HumanFitReport* report = nullptr) {
  if (inventory.size() == 0) throw EmptyInventory("speaker fit needs a non-empty inventory");
  if (cfg.hidden < 1 || cfg.epochs < 1 || cfg.batch < 1) throw InvalidConfig("speaker fit: bad sizes");
  HumanFitReport rep;
  std::vector<std::vector<double>> xs;
  std::vector<Index> ys;
  for (const auto& r : records) {
    auto ps = inventory.phrases_of(r.message);
    if (ps.empty()) {
      ++rep.dropped;
      continue;
    }
    auto f = features(r.obs);
    for (const auto& p : ps) {
      xs.push_back(f);
      ys.push_back(inventory.id(p));
    }
  }
  if (xs.empty()) throw EmptyInventory("no record maps to an inventory phrase");
  rep.examples = xs.size();

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(xs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t n_hold = cfg.holdout_fraction > 0.0 && xs.size() > 1
                           ? std::max<std::size_t>(1, static_cast<std::size_t>(xs.size() * cfg.holdout_fraction))
                           : 0;
  std::vector<std::size_t> train(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_hold));
  std::vector<std::size_t> hold(order.end() - static_cast<std::ptrdiff_t>(n_hold), order.end());

  Index in = static_cast<Index>(xs.front().size());
  nn::Mlp mlp("human", in, cfg.hidden, static_cast<Index>(inventory.size()), rng);
  nn::ParamRefs params;
  mlp.collect(params);
  nn::AdamState adam(cfg.step_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(train.begin(), train.end(), rng);
    for (std::size_t start = 0; start < train.size(); start += static_cast<std::size_t>(cfg.batch)) {
      std::size_t b = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch), train.size() - start);
      Tensor xb(static_cast<Index>(b), in);
      std::vector<Index> yb(b);
      for (std::size_t i = 0; i < b; ++i) {
        const auto& x = xs[train[start + i]];
        for (Index j = 0; j < in; ++j) xb(static_cast<Index>(i), j) = x[static_cast<std::size_t>(j)];
        yb[i] = ys[train[start + i]];
      }
      nn::Tape tape;
      auto loss = nn::softmax_xent(mlp(tape, tape.constant(xb)), yb);
      nn::zero_grads(params);
      tape.backward(loss);
      nn::adam_step(params, adam);
    }
  }

  HumanSpeakerModel<Obs> model(std::move(mlp), inventory, std::move(features));
  if (report != nullptr) {
    rep.heldout = hold.size();
    if (!hold.empty()) {
      double nll = 0.0, correct = 0.0;
      for (std::size_t k : hold) {
        auto lp = model.prepare_features(xs[k]);
        nll -= lp[static_cast<std::size_t>(ys[k])];
        std::size_t best = 0;
        for (std::size_t i = 1; i < lp.size(); ++i) {
          if (lp[i] > lp[best]) best = i;
        }
        if (static_cast<Index>(best) == ys[k]) correct += 1.0;
      }
      rep.heldout_perplexity = std::exp(nll / static_cast<double>(hold.size()));
      rep.heldout_accuracy = correct / static_cast<double>(hold.size());
    }
    *report = rep;
  }
  return model;
}

}  // namespace neuralese::human
