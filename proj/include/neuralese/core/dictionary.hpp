#pragma once

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "neuralese/common.hpp"

namespace neuralese {

template <class M>
struct Translation {
  std::size_t index = 0;
  M message{};
  Score score;
};

/// Index of the smallest score; ties go to the lowest index and infeasible
/// scores lose to every feasible one.
inline std::size_t argmin_score(std::span<const Score> scores) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!scores[i].feasible()) continue;
    if (!best || scores[i] < scores[*best]) best = i;
  }
  if (!best) throw NoFeasibleTranslation("no feasible translation among " + std::to_string(scores.size()) +
                                         " candidates");
  return *best;
}

/// argmin over `inventory` of scorer(z, z'). A scorer may instead accept the
/// whole inventory and return one Score per entry; that form lets sampled
/// estimators share their context sample across candidates.
template <class Src, class Tgt, class Scorer>
Translation<Tgt> translate(const Src& z, std::span<const Tgt> inventory, Scorer&& scorer) {
  if (inventory.empty()) throw InvalidConfig("translate: empty target inventory");
  std::vector<Score> scores;
  if constexpr (std::is_invocable_r_v<std::vector<Score>, Scorer, const Src&, std::span<const Tgt>>) {
    scores = scorer(z, inventory);
  } else {
    scores.reserve(inventory.size());
    for (const Tgt& c : inventory) scores.push_back(scorer(z, c));
  }
  std::size_t best = argmin_score(scores);
  return {best, inventory[best], scores[best]};
}

enum class Direction { kRobotToHuman, kHumanToRobot };

inline const char* direction_tag(Direction d) { return d == Direction::kRobotToHuman ? "r2h" : "h2r"; }

struct DictionaryEntry {
  std::size_t source = 0;
  std::optional<std::size_t> target;  // empty when no candidate is feasible
  Score score;

  bool feasible() const { return target.has_value(); }
  friend bool operator==(const DictionaryEntry&, const DictionaryEntry&) = default;
};

/// One translation per source message. Text form:
///   #neuralese-dict v1 direction=<r2h|h2r>
///   src_id <TAB> tgt_id <TAB> score        (tgt_id -1 and score inf if infeasible)
struct Dictionary {
  Direction direction = Direction::kRobotToHuman;
  std::vector<DictionaryEntry> entries;

  const DictionaryEntry* find(std::size_t source) const {
    for (const auto& e : entries) {
      if (e.source == source) return &e;
    }
    return nullptr;
  }

  std::string to_text() const {
    std::ostringstream out;
    out << "#neuralese-dict v1 direction=" << direction_tag(direction) << "\n";
    char buf[64];
    for (const auto& e : entries) {
      if (e.feasible()) {
        std::snprintf(buf, sizeof(buf), "%.17g", e.score.value());
        out << e.source << '\t' << *e.target << '\t' << buf << '\n';
      } else {
        out << e.source << "\t-1\tinf\n";
      }
    }
    return out.str();
  }

  static Dictionary from_text(const std::string& text, const std::string& source_name = "<dictionary>") {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    Dictionary dict;
    if (!std::getline(in, line)) throw ParseError(source_name, 1, "missing header");
    ++lineno;
    if (line == "#neuralese-dict v1 direction=r2h") {
      dict.direction = Direction::kRobotToHuman;
    } else if (line == "#neuralese-dict v1 direction=h2r") {
      dict.direction = Direction::kHumanToRobot;
    } else {
      throw ParseError(source_name, lineno, "bad header '" + line + "'");
    }
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      std::istringstream fields(line);
      std::string src, tgt, score;
      if (!std::getline(fields, src, '\t') || !std::getline(fields, tgt, '\t') ||
          !std::getline(fields, score)) {
        throw ParseError(source_name, lineno, "expected 3 tab-separated fields");
      }
      try {
        DictionaryEntry e;
        e.source = std::stoull(src);
        long long t = std::stoll(tgt);
        if (t < 0) {
          if (score != "inf") throw ParseError(source_name, lineno, "infeasible entry must have score inf");
        } else {
          e.target = static_cast<std::size_t>(t);
          double v = std::stod(score);
          if (!std::isfinite(v)) throw ParseError(source_name, lineno, "feasible entry needs a finite score");
          e.score = Score(v);
        }
        dict.entries.push_back(e);
      } catch (const std::logic_error&) {
        throw ParseError(source_name, lineno, "malformed number");
      }
    }
    return dict;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << to_text();
  }

  static Dictionary load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_text(ss.str(), path);
  }
};

/// Translates every source message. A source with no feasible candidate is
/// kept as a flagged entry instead of aborting the build.
template <class Src, class Tgt, class Scorer>
Dictionary build_dictionary(std::span<const Src> src_inventory, std::span<const Tgt> tgt_inventory,
                            Scorer&& scorer, Direction direction = Direction::kRobotToHuman) {
  if (src_inventory.empty() || tgt_inventory.empty()) {
    throw InvalidConfig("build_dictionary: inventories must be non-empty");
  }
  Dictionary dict;
  dict.direction = direction;
  dict.entries.reserve(src_inventory.size());
  for (std::size_t s = 0; s < src_inventory.size(); ++s) {
    DictionaryEntry e;
    e.source = s;
    try {
      auto t = translate(src_inventory[s], tgt_inventory, scorer);
      e.target = t.index;
      e.score = t.score;
    } catch (const NoFeasibleTranslation&) {
    }
    dict.entries.push_back(e);
  }
  return dict;
}

}  // namespace neuralese
