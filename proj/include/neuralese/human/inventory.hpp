#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "neuralese/human/transcript.hpp"

namespace neuralese::human {

/// Lowercases and splits on whitespace and punctuation. Apostrophes inside
/// a word are kept ("i'm").
inline std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    while (!cur.empty() && cur.back() == '\'') cur.pop_back();
    if (!cur.empty()) out.push_back(cur);
    cur.clear();
  };
  for (unsigned char ch : text) {
    if (std::isalnum(ch) != 0 || (ch == '\'' && !cur.empty()) || ch >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(ch)));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

/// Tokens joined by single spaces.
inline std::string normalize_message(const std::string& text) {
  std::string out;
  for (const auto& t : tokenize(text)) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

enum class InventoryRule {
  /// Every unigram seen at least 5 times.
  kColorsUnigrams,
  /// Every normalized whole message sent more than 3 times.
  kDrivingMessages,
};

inline const char* rule_name(InventoryRule r) { return r == InventoryRule::kColorsUnigrams ? "colors" : "driving"; }

class PhraseInventory {
 public:
  PhraseInventory() = default;
  PhraseInventory(InventoryRule rule, std::vector<std::string> phrases) : rule_(rule), phrases_(std::move(phrases)) {
    for (std::size_t i = 0; i < phrases_.size(); ++i) {
      if (!ids_.emplace(phrases_[i], i).second) throw InvalidConfig("duplicate phrase '" + phrases_[i] + "'");
    }
  }

  InventoryRule rule() const { return rule_; }
  const std::vector<std::string>& phrases() const { return phrases_; }
  std::size_t size() const { return phrases_.size(); }
  const std::string& operator[](std::size_t i) const { return phrases_.at(i); }

  /// -1 when absent.
  int id(const std::string& phrase) const {
    auto it = ids_.find(phrase);
    return it == ids_.end() ? -1 : static_cast<int>(it->second);
  }
  bool contains(const std::string& phrase) const { return id(phrase) >= 0; }

  /// The inventory phrases a raw message maps to: its in-inventory unigrams
  /// (first occurrence order) or its whole normalized form.
  std::vector<std::string> phrases_of(const std::string& message) const {
    std::vector<std::string> out;
    if (rule_ == InventoryRule::kColorsUnigrams) {
      for (const auto& t : tokenize(message)) {
        if (contains(t) && std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
      }
    } else {
      std::string m = normalize_message(message);
      if (contains(m)) out.push_back(m);
    }
    return out;
  }

  std::string to_text() const {
    std::string out = std::string("#neuralese-inventory v1 rule=") + rule_name(rule_) + "\n";
    for (const auto& p : phrases_) out += p + "\n";
    return out;
  }

  static PhraseInventory from_text(const std::string& text, const std::string& source = "<inventory>") {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
      std::size_t end = text.find('\n', start);
      if (end == std::string::npos) end = text.size();
      lines.push_back(text.substr(start, end - start));
      start = end + 1;
    }
    if (lines.empty() || lines[0].rfind("#neuralese-inventory v1 rule=", 0) != 0) {
      throw ParseError(source, 1, "missing inventory header");
    }
    std::string rule = lines[0].substr(std::string("#neuralese-inventory v1 rule=").size());
    InventoryRule r;
    if (rule == "colors") {
      r = InventoryRule::kColorsUnigrams;
    } else if (rule == "driving") {
      r = InventoryRule::kDrivingMessages;
    } else {
      throw ParseError(source, 1, "unknown rule '" + rule + "'");
    }
    std::vector<std::string> phrases;
    for (std::size_t i = 1; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      phrases.push_back(lines[i]);
    }
    try {
      return PhraseInventory(r, std::move(phrases));
    } catch (const InvalidConfig& e) {
      throw ParseError(source, 1, e.what());
    }
  }

  friend bool operator==(const PhraseInventory& a, const PhraseInventory& b) {
    return a.rule_ == b.rule_ && a.phrases_ == b.phrases_;
  }

 private:
  InventoryRule rule_ = InventoryRule::kColorsUnigrams;
  std::vector<std::string> phrases_;
  std::unordered_map<std::string, std::size_t> ids_;
};

/// Index of the inventory phrase closest to `text` by cosine similarity of
/// bag-of-words counts; ties and texts sharing no word with any phrase go to
/// the lowest index.
inline std::size_t nearest_phrase(const PhraseInventory& inv, const std::string& text) {
  if (inv.size() == 0) throw EmptyInventory("nearest_phrase: empty inventory");
  auto counts = [](const std::string& s) {
    std::map<std::string, double> c;
    for (const auto& t : tokenize(s)) c[t] += 1.0;
    return c;
  };
  auto norm = [](const std::map<std::string, double>& c) {
    double n = 0.0;
    for (const auto& [w, v] : c) n += v * v;
    return std::sqrt(n);
  };
  auto q = counts(text);
  double qn = norm(q);
  std::size_t best = 0;
  double best_sim = -1.0;
  for (std::size_t i = 0; i < inv.size(); ++i) {
    auto p = counts(inv[i]);
    double dot = 0.0;
    for (const auto& [w, v] : q) {
      auto it = p.find(w);
      if (it != p.end()) dot += v * it->second;
    }
    double den = qn * norm(p);
    double sim = den > 0.0 ? dot / den : 0.0;
    if (sim > best_sim) {
      best_sim = sim;
      best = i;
    }
  }
  return best;
}

/// Phrases passing the rule's count threshold, ordered by descending count
/// and then lexicographically.
template <class Obs>
PhraseInventory build_inventory(const std::vector<TranscriptRecord<Obs>>& records, InventoryRule rule) {
  if (records.empty()) throw EmptyInventory("no transcript records");
  std::map<std::string, int> counts;
  for (const auto& r : records) {
    if (rule == InventoryRule::kColorsUnigrams) {
      for (const auto& t : tokenize(r.message)) ++counts[t];
    } else {
      std::string m = normalize_message(r.message);
      if (!m.empty()) ++counts[m];
    }
  }
  std::vector<std::pair<std::string, int>> kept;
  for (const auto& [p, c] : counts) {
    bool pass = rule == InventoryRule::kColorsUnigrams ? c >= 5 : c > 3;
    if (pass) kept.emplace_back(p, c);
  }
  if (kept.empty()) throw EmptyInventory("no phrase passes the " + std::string(rule_name(rule)) + " threshold");
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> phrases;
  for (auto& [p, c] : kept) phrases.push_back(p);
  return PhraseInventory(rule, std::move(phrases));
}

}  // namespace neuralese::human
