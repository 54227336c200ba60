#pragma once

// Human gameplay transcripts, one JSON object per line.
//
// colors:  {"game_id", "t", "player", "candidates": [[L,a,b],[L,a,b]],
//           "target", "message", "action"}
// driving: {"game_id", "t", "player", "pos": [r,c], "orient", "goal": [r,c],
//           "map_id", "message", "action"}

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "neuralese/games/colors.hpp"
#include "neuralese/games/driving.hpp"

namespace neuralese::human {

template <class Obs>
struct TranscriptRecord {
  std::string game_id;
  int t = 0;
  int player = 0;
  Obs obs;
  std::string message;
  int action = 0;
  friend bool operator==(const TranscriptRecord&, const TranscriptRecord&) = default;
};

using ColorRecord = TranscriptRecord<colors::SpeakerObs>;
using DriveRecord = TranscriptRecord<driving::CarObs>;

namespace detail {

inline std::string id_string(const nlohmann::json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return std::to_string(j.get<long long>());
  throw FormatError("game_id must be a string or integer");
}

template <class Obs>
void read_common(const nlohmann::json& j, TranscriptRecord<Obs>& r) {
  r.game_id = id_string(j.at("game_id"));
  r.t = j.at("t").get<int>();
  r.player = j.at("player").get<int>();
  r.message = j.at("message").get<std::string>();
  bool blank = r.message.find_first_not_of(" \t\r\n") == std::string::npos;
  if (blank) throw FormatError("empty message");
}

}  // namespace detail

inline nlohmann::json to_json(const ColorRecord& r) {
  nlohmann::json cands = nlohmann::json::array();
  for (const auto& c : r.obs.candidates) cands.push_back({c.l, c.a, c.b});
  return {{"game_id", r.game_id}, {"t", r.t},           {"player", r.player}, {"candidates", cands},
          {"target", r.obs.target}, {"message", r.message}, {"action", r.action}};
}

inline nlohmann::json to_json(const DriveRecord& r) {
  return {{"game_id", r.game_id},
          {"t", r.t},
          {"player", r.player},
          {"pos", {r.obs.pos.r, r.obs.pos.c}},
          {"orient", driving::kOrientationNames[r.obs.orient]},
          {"goal", {r.obs.goal.r, r.obs.goal.c}},
          {"map_id", r.obs.map_id},
          {"message", r.message},
          {"action", driving::kActionNames[r.action]}};
}

template <class Obs>
TranscriptRecord<Obs> record_from_json(const nlohmann::json& j);

template <>
inline ColorRecord record_from_json<colors::SpeakerObs>(const nlohmann::json& j) {
  ColorRecord r;
  detail::read_common(j, r);
  const auto& cands = j.at("candidates");
  if (!cands.is_array() || cands.size() != 2) throw FormatError("candidates must hold two colors");
  for (int i = 0; i < 2; ++i) {
    const auto& c = cands.at(i);
    if (!c.is_array() || c.size() != 3) throw FormatError("a color is [L, a, b]");
    r.obs.candidates[i] = {c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>()};
    if (!colors::in_range(r.obs.candidates[i])) throw FormatError("color outside LAB range");
  }
  r.obs.target = j.at("target").get<int>();
  if (r.obs.target != 0 && r.obs.target != 1) throw FormatError("target must be 0 or 1");
  r.action = j.at("action").get<int>();
  if (r.action != 0 && r.action != 1) throw FormatError("action must be 0 or 1");
  return r;
}

template <>
inline DriveRecord record_from_json<driving::CarObs>(const nlohmann::json& j) {
  DriveRecord r;
  detail::read_common(j, r);
  r.obs = driving::car_obs_from_json(j);
  const auto& a = j.at("action");
  r.action = a.is_string() ? driving::parse_action(a.get<std::string>()) : a.get<int>();
  if (r.action < 0 || r.action >= driving::kNumActions) throw FormatError("action out of range");
  return r;
}

template <class Obs>
std::string transcripts_to_jsonl(const std::vector<TranscriptRecord<Obs>>& records) {
  std::string out;
  for (const auto& r : records) out += to_json(r).dump() + "\n";
  return out;
}

/// Blank lines are skipped; any other malformed line raises ParseError with
/// its 1-based line number.
template <class Obs>
std::vector<TranscriptRecord<Obs>> transcripts_from_jsonl(std::istream& in, const std::string& source) {
  std::vector<TranscriptRecord<Obs>> out;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json<Obs>(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(source, n, e.what());
    } catch (const Error& e) {
      throw ParseError(source, n, e.what());
    }
  }
  return out;
}

template <class Obs>
std::vector<TranscriptRecord<Obs>> load_transcripts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  return transcripts_from_jsonl<Obs>(in, path);
}

template <class Obs>
void save_transcripts(const std::string& path, const std::vector<TranscriptRecord<Obs>>& records) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out << transcripts_to_jsonl(records);
}

}  // namespace neuralese::human
