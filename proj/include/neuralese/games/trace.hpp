#pragma once

// Episode traces, one JSON object per line:
//   {"game_id", "t", "obs_a", "obs_b", "msg_a", "msg_b", "act_a", "act_b", "reward", "done"}
// Observations are game-specific JSON; a message is null (silent), a phrase
// string, or a neuralese vector.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "neuralese/common.hpp"

namespace neuralese {

struct TraceStep {
  int t = 0;
  nlohmann::json obs_a;
  nlohmann::json obs_b;
  nlohmann::json msg_a;
  nlohmann::json msg_b;
  int act_a = 0;
  int act_b = 0;
  double reward = 0.0;
  bool done = false;
  // Set when a live-play phrase was replaced by its nearest inventory phrase.
  bool msg_a_substituted = false;

  friend bool operator==(const TraceStep&, const TraceStep&) = default;
};

struct GameTrace {
  std::string game_id;
  std::vector<TraceStep> steps;

  friend bool operator==(const GameTrace&, const GameTrace&) = default;

  double total_reward() const {
    double r = 0.0;
    for (const auto& s : steps) r += s.reward;
    return r;
  }

  /// Throws FormatError unless timestamps strictly increase and actions are
  /// in [0, n_actions).
  void validate(int n_actions) const {
    for (std::size_t i = 0; i < steps.size(); ++i) {
      if (i > 0 && steps[i].t <= steps[i - 1].t) throw FormatError("trace " + game_id + ": timestamps not increasing");
      for (int a : {steps[i].act_a, steps[i].act_b}) {
        if (a < 0 || a >= n_actions) throw FormatError("trace " + game_id + ": illegal action " + std::to_string(a));
      }
    }
  }
};

inline nlohmann::json to_json(const TraceStep& s, const std::string& game_id) {
  nlohmann::json j = {{"game_id", game_id}, {"t", s.t},         {"obs_a", s.obs_a}, {"obs_b", s.obs_b},
                      {"msg_a", s.msg_a},   {"msg_b", s.msg_b}, {"act_a", s.act_a}, {"act_b", s.act_b},
                      {"reward", s.reward}, {"done", s.done}};
  if (s.msg_a_substituted) j["msg_a_substituted"] = true;
  return j;
}

/// Writes traces as JSON lines, in order.
inline std::string traces_to_jsonl(const std::vector<GameTrace>& traces) {
  std::string out;
  for (const auto& tr : traces) {
    for (const auto& s : tr.steps) out += to_json(s, tr.game_id).dump() + "\n";
  }
  return out;
}

/// Groups lines into traces by consecutive game_id.
inline std::vector<GameTrace> traces_from_jsonl(const std::string& text, const std::string& source = "<traces>") {
  std::vector<GameTrace> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      std::string id = j.value("game_id", std::string());
      TraceStep s;
      s.t = j.at("t").get<int>();
      s.obs_a = j.at("obs_a");
      s.obs_b = j.at("obs_b");
      s.msg_a = j.value("msg_a", nlohmann::json());
      s.msg_b = j.value("msg_b", nlohmann::json());
      s.act_a = j.at("act_a").get<int>();
      s.act_b = j.at("act_b").get<int>();
      s.reward = j.at("reward").get<double>();
      s.done = j.at("done").get<bool>();
      s.msg_a_substituted = j.value("msg_a_substituted", false);
      if (out.empty() || out.back().game_id != id) out.push_back({id, {}});
      auto& steps = out.back().steps;
      if (!steps.empty() && s.t <= steps.back().t) throw ParseError(source, lineno, "timestamps must increase");
      steps.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(source, lineno, e.what());
    }
  }
  return out;
}

inline void save_traces(const std::string& path, const std::vector<GameTrace>& traces) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << traces_to_jsonl(traces);
}

inline std::vector<GameTrace> load_traces(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return traces_from_jsonl(ss.str(), path);
}

}  // namespace neuralese
