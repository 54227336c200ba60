#pragma once

// The model human listener: score(x, s) = phi(x) W psi(s) + phi(x) u, with
// phi the state features and psi the bag of words of the sentence. Trained
// pairwise: the true state should outscore a distractor state.

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "neuralese/human/inventory.hpp"
#include "neuralese/nn/adam.hpp"
#include "neuralese/nn/checkpoint.hpp"

namespace neuralese::human {

struct ListenerFitConfig {
  double step_size = 0.01;
  int epochs = 20;
  int batch = 32;
  std::uint64_t seed = 0;
};

template <class Obs>
class ListenerScorer {
 public:
  using FeatureFn = std::function<std::vector<double>(const Obs&)>;

  ListenerScorer() = default;
  ListenerScorer(std::vector<std::string> vocab, nn::Tensor w, nn::Tensor u, FeatureFn features)
      : vocab_(std::move(vocab)), w_(std::move(w)), u_(std::move(u)), features_(std::move(features)) {
    for (std::size_t i = 0; i < vocab_.size(); ++i) ids_.emplace(vocab_[i], i);
    if (w_.cols() != static_cast<nn::Index>(vocab_.size()) || u_.rows() != w_.rows() || u_.cols() != 1) {
      throw ShapeMismatch("listener weights do not match the vocabulary");
    }
  }

  const std::vector<std::string>& vocab() const { return vocab_; }
  const FeatureFn& feature_fn() const { return features_; }

  /// Word counts over the vocabulary; unknown words are dropped.
  nn::Tensor bag_of_words(const std::string& sentence) const {
    nn::Tensor psi = nn::Tensor::Zero(1, static_cast<nn::Index>(vocab_.size()));
    for (const auto& t : tokenize(sentence)) {
      auto it = ids_.find(t);
      if (it != ids_.end()) psi(0, static_cast<nn::Index>(it->second)) += 1.0;
    }
    return psi;
  }

  double score(const Obs& x, const std::string& sentence) const {
    nn::Tensor phi = to_row(features_(x));
    return (phi * w_ * bag_of_words(sentence).transpose())(0, 0) + (phi * u_)(0, 0);
  }

  /// Which of two states the speaker was in; an exact tie answers 0.
  int guess(const std::string& sentence, const Obs& s0, const Obs& s1) const {
    return score(s1, sentence) > score(s0, sentence) ? 1 : 0;
  }

  nn::Checkpoint to_checkpoint() const {
    nn::Checkpoint ck;
    ck.tensors["listener.w"] = w_;
    ck.tensors["listener.u"] = u_;
    ck.meta = {{"kind", "human_listener"}, {"vocab", vocab_}};
    return ck;
  }

  static ListenerScorer from_checkpoint(const nn::Checkpoint& ck, FeatureFn features) {
    if (ck.meta.value("kind", "") != "human_listener") throw FormatError("checkpoint does not hold a listener");
    auto w = ck.tensors.find("listener.w");
    auto u = ck.tensors.find("listener.u");
    if (w == ck.tensors.end() || u == ck.tensors.end()) throw FormatError("listener checkpoint lacks weights");
    return ListenerScorer(ck.meta.at("vocab").get<std::vector<std::string>>(), w->second, u->second,
                          std::move(features));
  }

 private:
  static nn::Tensor to_row(const std::vector<double>& v) {
    nn::Tensor t(1, static_cast<nn::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) t(0, static_cast<nn::Index>(i)) = v[i];
    return t;
  }

  std::vector<std::string> vocab_;
  std::map<std::string, std::size_t> ids_;
  nn::Tensor w_;
  nn::Tensor u_;
  FeatureFn features_;
};

/// Logistic loss on score(true) - score(distractor). `distractor` draws a
/// competing state for a record, as the guessing task would present it.
template <class Obs>
ListenerScorer<Obs> fit_listener(const std::vector<TranscriptRecord<Obs>>& records,
                                 typename ListenerScorer<Obs>::FeatureFn features,
                                 const std::function<Obs(const TranscriptRecord<Obs>&, Rng&)>& distractor,
                                 const ListenerFitConfig& cfg) {
  if (records.empty()) throw InvalidConfig("listener fit needs records");
  if (cfg.epochs < 1 || cfg.batch < 1) throw InvalidConfig("listener fit: bad sizes");
  std::map<std::string, int> seen;
  for (const auto& r : records) {
    for (const auto& t : tokenize(r.message)) seen.emplace(t, 0);
  }
  std::vector<std::string> vocab;
  for (const auto& [w, unused] : seen) vocab.push_back(w);
  using nn::Index;
  using nn::Tensor;
  Index f_dim = static_cast<Index>(features(records.front().obs).size());
  Index v_dim = static_cast<Index>(vocab.size());
  nn::Parameter w("listener.w", Tensor::Zero(f_dim, v_dim));
  nn::Parameter u("listener.u", Tensor::Zero(f_dim, 1));
  nn::ParamRefs params = {w, u};
  nn::AdamState adam(cfg.step_size);
  ListenerScorer<Obs> vocab_index(vocab, w.value, u.value, features);

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Tensor ones_v = Tensor::Ones(v_dim, 1);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch)) {
      std::size_t b = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch), order.size() - start);
      Tensor dphi(static_cast<Index>(b), f_dim), psi(static_cast<Index>(b), v_dim);
      for (std::size_t i = 0; i < b; ++i) {
        const auto& r = records[order[start + i]];
        auto fp = features(r.obs);
        auto fn = features(distractor(r, rng));
        for (Index j = 0; j < f_dim; ++j) {
          dphi(static_cast<Index>(i), j) = fp[static_cast<std::size_t>(j)] - fn[static_cast<std::size_t>(j)];
        }
        psi.row(static_cast<Index>(i)) = vocab_index.bag_of_words(r.message).row(0);
      }
      nn::Tape tape;
      nn::Var d_in = tape.constant(dphi);
      nn::Var bilinear = nn::matmul(nn::mul(nn::matmul(d_in, tape.param(w)), tape.constant(psi)),
                                    tape.constant(ones_v));
      nn::Var margin = nn::add(bilinear, nn::matmul(d_in, tape.param(u)));
      nn::Var logits = nn::concat_cols(margin, tape.constant(Tensor::Zero(static_cast<Index>(b), 1)));
      auto loss = nn::softmax_xent(logits, std::vector<Index>(b, 0));
      nn::zero_grads(params);
      tape.backward(loss);
      nn::adam_step(params, adam);
    }
  }
  return ListenerScorer<Obs>(std::move(vocab), w.value, u.value, std::move(features));
}

}  // namespace neuralese::human
