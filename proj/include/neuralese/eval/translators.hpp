#pragma once

// The three translators compared in the evaluations: random, direct
// (maximum co-occurrence), and belief (minimum q).

#include <cstring>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "neuralese/core/dictionary.hpp"
#include "neuralese/core/quality.hpp"

namespace neuralese::eval {

template <class Src, class Tgt>
using Translator = std::function<Tgt(const Src&)>;

enum class TranslatorKind { kRandom, kDirect, kBelief };

inline const char* kind_name(TranslatorKind k) {
  switch (k) {
    case TranslatorKind::kRandom:
      return "random";
    case TranslatorKind::kDirect:
      return "direct";
    case TranslatorKind::kBelief:
      return "belief";
  }
  return "?";
}

inline TranslatorKind parse_kind(const std::string& s) {
  if (s == "random") return TranslatorKind::kRandom;
  if (s == "direct") return TranslatorKind::kDirect;
  if (s == "belief") return TranslatorKind::kBelief;
  throw InvalidConfig("unknown translator '" + s + "'");
}

namespace detail {

inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 1469598103934665603ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t message_hash(const std::string& s) { return fnv1a(s.data(), s.size()); }
inline std::uint64_t message_hash(const std::vector<double>& v) { return fnv1a(v.data(), v.size() * sizeof(double)); }
inline std::uint64_t message_hash(int x) { return fnv1a(&x, sizeof(x)); }

}  // namespace detail

/// Uniform choice from the target inventory, fixed per (seed, source
/// message): the same source always gets the same translation, independent
/// of call order.
template <class Src, class Tgt>
Translator<Src, Tgt> random_translator(std::vector<Tgt> inventory, std::uint64_t seed) {
  if (inventory.empty()) throw EmptyInventory("random translator needs a non-empty inventory");
  return [inv = std::move(inventory), seed](const Src& z) {
    Rng rng = derive_rng(seed, detail::message_hash(z));
    return inv[uniform_index(rng, inv.size())];
  };
}

/// Translation through a saved dictionary. `locate` maps a source message to
/// its row in the source inventory (exact lookup, or nearest neighbour for
/// live messages). Throws Infeasible for rows without a translation.
template <class Src, class Tgt>
Translator<Src, Tgt> dictionary_translator(const Dictionary& dict, std::vector<Tgt> tgt_inventory,
                                           std::function<std::size_t(const Src&)> locate) {
  std::map<std::size_t, std::optional<std::size_t>> rows;
  for (const auto& e : dict.entries) {
    if (e.target && *e.target >= tgt_inventory.size()) {
      throw InvalidConfig("dictionary target " + std::to_string(*e.target) + " outside the target inventory");
    }
    rows[e.source] = e.target;
  }
  return [rows = std::move(rows), inv = std::move(tgt_inventory), locate = std::move(locate)](const Src& z) {
    std::size_t row = locate(z);
    auto it = rows.find(row);
    if (it == rows.end() || !it->second) {
      throw Infeasible("no dictionary translation for source row " + std::to_string(row));
    }
    return inv[*it->second];
  };
}

/// Direct and belief translation against one shared context sample.
template <SpeakerModel SrcModel, SpeakerModel TgtModel>
class ModelTranslators {
 public:
  using Src = typename SrcModel::Message;
  using Tgt = typename TgtModel::Message;

  template <ContextSampler C>
  ModelTranslators(const C& sampler, const SrcModel& src, const TgtModel& tgt, std::vector<Tgt> inventory,
                   const QEstimateConfig& cfg)
      : estimator_(sampler, src, tgt, cfg), inventory_(std::move(inventory)) {
    if (inventory_.empty()) throw EmptyInventory("translator needs a non-empty target inventory");
  }

  const std::vector<Tgt>& inventory() const { return inventory_; }
  const QEstimator<SrcModel, TgtModel>& estimator() const { return estimator_; }

  /// argmin_z' q(z, z'), lowest index on ties.
  Translation<Tgt> belief(const Src& z) const {
    return translate(z, std::span<const Tgt>(inventory_),
                     [&](const Src& s, std::span<const Tgt> c) { return estimator_.score_all(s, c); });
  }

  /// argmax_z' sum_i p(z|x_i) p(z'|x_i), lowest index on ties.
  Translation<Tgt> direct(const Src& z) const {
    auto lc = estimator_.log_cooccurrence_all(z, std::span<const Tgt>(inventory_));
    std::size_t best = 0;
    for (std::size_t i = 1; i < lc.size(); ++i) {
      if (lc[i] > lc[best]) best = i;
    }
    if (lc[best] == kNegInf || std::isnan(lc[best])) throw Infeasible("direct translation: all weights vanish");
    return {best, inventory_[best], Score(-lc[best])};
  }

  Translator<Src, Tgt> translator(TranslatorKind kind, std::uint64_t seed = 0) const {
    switch (kind) {
      case TranslatorKind::kRandom:
        return random_translator<Src, Tgt>(inventory_, seed);
      case TranslatorKind::kDirect:
        return memoized([this](const Src& z) { return direct(z).message; });
      case TranslatorKind::kBelief:
        return memoized([this](const Src& z) { return belief(z).message; });
    }
    throw InvalidConfig("unknown translator kind");
  }

 private:
  // Categorical sources repeat; caching their translation is exact.
  static Translator<Src, Tgt> memoized(std::function<Tgt(const Src&)> f) {
    auto cache = std::make_shared<std::map<Src, Tgt>>();
    return [f = std::move(f), cache](const Src& z) {
      auto it = cache->find(z);
      if (it != cache->end()) return it->second;
      Tgt t = f(z);
      cache->emplace(z, t);
      return t;
    };
  }

  QEstimator<SrcModel, TgtModel> estimator_;
  std::vector<Tgt> inventory_;
};

}  // namespace neuralese::eval
