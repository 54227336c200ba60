#pragma once

// Live driving sessions: one human car against one agent car. The server
// owns the game state; the human submits one action per turn and at most one
// short message, and the agent commits as soon as the human has.
//
// Frames are JSON objects. Client to server:
//   {"type": "join", "session"?: id, "payload"?: {"map_id"?: int}}
//   {"type": "msg",  "session": id, "payload": {"text": str}}
//   {"type": "act",  "session": id, "payload": {"action": name|int, "text"?: str}}
// Server to client:
//   {"type": "state",    "payload": {...}}   the human car's own view only
//   {"type": "peer_msg", "payload": {"text": str, "t": int}}
//   {"type": "end",      "payload": {"reason", "reward", "completed", "trace"}}
//   {"type": "error",    "payload": {"code": str, "message": str}}

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "neuralese/agents/driving.hpp"
#include "neuralese/eval/translators.hpp"
#include "neuralese/games/trace.hpp"
#include "neuralese/human/inventory.hpp"

namespace neuralese::server {

using nlohmann::json;

/// The translation layer between the human and the agent.
struct LiveTranslators {
  human::PhraseInventory inventory;
  /// Inventory phrase heard by the agent as neuralese.
  eval::Translator<std::string, agents::NeuraleseMessage> to_agent;
  /// Agent message shown to the human as a phrase.
  eval::Translator<agents::NeuraleseMessage, std::string> to_human;
};

struct SessionConfig {
  std::uint64_t seed = 0;
  int max_words = 3;
  /// When set, each finished session's trace is written to <dir>/<id>.jsonl.
  std::string trace_dir;
};

inline json error_frame(const std::string& code, const std::string& message) {
  return {{"type", "error"}, {"payload", {{"code", code}, {"message", message}}}};
}

class Session {
 public:
  Session(std::string id, const driving::DrivingGame& game, const agents::AgentCell& agent,
          const LiveTranslators& tr, const SessionConfig& cfg, driving::DrivingState start)
      : id_(std::move(id)),
        game_(&game),
        tr_(&tr),
        cfg_(&cfg),
        seat_(agent),
        state_(start),
        heard_(static_cast<std::size_t>(agent.config().message_dim), 0.0) {
    trace_.game_id = id_;
  }

  const std::string& id() const { return id_; }
  bool ended() const { return state_.done; }
  const GameTrace& trace() const { return trace_; }
  const driving::DrivingState& state() const { return state_; }

  json state_frame() const {
    const auto& m = game_->map(state_.map_id);
    auto x = game_->observe(state_, 0);
    json rows = json::array();
    for (int r = 0; r < m.height(); ++r) {
      std::string row;
      for (int c = 0; c < m.width(); ++c) row += m.road({r, c}) ? '.' : '#';
      rows.push_back(row);
    }
    return {{"type", "state"},
            {"payload",
             {{"session", id_},
              {"t", state_.t},
              {"step_limit", game_->step_limit()},
              {"map_id", state_.map_id},
              {"map", rows},
              {"pos", {x.pos.r, x.pos.c}},
              {"orient", driving::kOrientationNames[x.orient]},
              {"goal", {x.goal.r, x.goal.c}},
              {"finished", state_.cars[0].finished},
              {"pending_message", pending_ ? json(*pending_) : json(nullptr)},
              {"inventory", tr_->inventory.phrases()}}}};
  }

  /// Stores the message for the current turn; a later one replaces it.
  std::vector<json> message(const std::string& text) {
    if (state_.done) return {error_frame("session_ended", "session " + id_ + " has ended")};
    auto words = human::tokenize(text);
    if (words.empty() || static_cast<int>(words.size()) > cfg_->max_words) {
      return {error_frame("bad_message", "messages must have 1 to " + std::to_string(cfg_->max_words) + " words")};
    }
    std::string norm = human::normalize_message(text);
    if (tr_->inventory.contains(norm)) {
      pending_ = norm;
      substituted_ = false;
    } else {
      pending_ = tr_->inventory[human::nearest_phrase(tr_->inventory, norm)];
      substituted_ = true;
    }
    return {state_frame()};
  }

  /// Advances one simultaneous step.
  std::vector<json> act(int action) {
    if (state_.done) return {error_frame("session_ended", "session " + id_ + " has ended")};
    if (action < 0 || action >= game_->n_actions()) return {error_frame("bad_action", "unknown action")};
    if (state_.cars[0].finished) action = driving::kWait;

    std::vector<json> out;
    auto obs_a = game_->observe(state_, 0);
    auto obs_b = game_->observe(state_, 1);
    int act_b = driving::kWait;
    std::optional<std::string> agent_phrase;
    if (!state_.cars[1].finished) {
      act_b = seat_.act(game_->features(obs_b), heard_);
      try {
        agent_phrase = tr_->to_human(seat_.message());
      } catch (const Error&) {
        agent_phrase.reset();
      }
    }
    auto res = game_->step(state_, action, act_b);

    TraceStep st;
    st.t = state_.t;
    st.obs_a = driving::to_json(obs_a);
    st.obs_b = driving::to_json(obs_b);
    st.msg_a = pending_ ? json(*pending_) : json(nullptr);
    st.msg_b = agent_phrase ? json(*agent_phrase) : json(nullptr);
    st.act_a = action;
    st.act_b = act_b;
    st.reward = res.reward;
    st.done = res.done;
    st.msg_a_substituted = pending_.has_value() && substituted_;
    trace_.steps.push_back(st);
    reward_ += res.reward;

    heard_ = pending_ ? tr_->to_agent(*pending_) : agents::NeuraleseMessage(heard_.size(), 0.0);
    pending_.reset();
    substituted_ = false;
    state_ = res.state;

    if (agent_phrase) out.push_back({{"type", "peer_msg"}, {"payload", {{"text", *agent_phrase}, {"t", st.t}}}});
    if (state_.done) {
      out.push_back(end_frame());
      if (!cfg_->trace_dir.empty()) {
        save_traces((std::filesystem::path(cfg_->trace_dir) / (id_ + ".jsonl")).string(), {trace_});
      }
    } else {
      out.push_back(state_frame());
    }
    return out;
  }

  json end_frame() const {
    bool completed = state_.cars[0].finished && state_.cars[1].finished;
    std::string reason = state_.collided ? "collision" : (completed ? "complete" : "step_limit");
    json steps = json::array();
    for (const auto& s : trace_.steps) steps.push_back(to_json(s, trace_.game_id));
    return {{"type", "end"},
            {"payload",
             {{"session", id_}, {"reason", reason}, {"reward", reward_}, {"completed", completed}, {"trace", steps}}}};
  }

  std::mutex& mutex() { return mu_; }

 private:
  std::string id_;
  const driving::DrivingGame* game_;
  const LiveTranslators* tr_;
  const SessionConfig* cfg_;
  agents::CarSeat seat_;
  driving::DrivingState state_;
  agents::NeuraleseMessage heard_;
  std::optional<std::string> pending_;
  bool substituted_ = false;
  GameTrace trace_;
  double reward_ = 0.0;
  std::mutex mu_;
};

/// Routes frames to sessions. Safe to call from many connection threads;
/// frames for one session are handled one at a time.
class SessionManager {
 public:
  SessionManager(const driving::DrivingGame& game, const agents::AgentCell& agent, LiveTranslators tr,
                 SessionConfig cfg = {})
      : game_(game), agent_(agent), tr_(std::move(tr)), cfg_(std::move(cfg)) {
    if (tr_.inventory.size() == 0) throw EmptyInventory("live play needs a phrase inventory");
    if (agent_.config().obs_dim != game_.feature_dim() || agent_.config().n_actions != game_.n_actions()) {
      throw ShapeMismatch("agent does not fit the driving game");
    }
  }

  /// Parses and handles one text frame. Never throws.
  std::vector<json> handle_text(const std::string& text) {
    json frame;
    try {
      frame = json::parse(text);
    } catch (const json::exception&) {
      return {error_frame("bad_frame", "frame is not valid JSON")};
    }
    return handle(frame);
  }

  std::vector<json> handle(const json& frame) {
    try {
      if (!frame.is_object() || !frame.contains("type") || !frame["type"].is_string()) {
        return {error_frame("bad_frame", "frame needs a string 'type'")};
      }
      std::string type = frame["type"];
      json payload = frame.value("payload", json::object());
      if (!payload.is_object()) return {error_frame("bad_frame", "payload must be an object")};
      if (type == "join") return join(frame.value("session", json(nullptr)), payload);

      if (!frame.contains("session") || !frame["session"].is_string()) {
        return {error_frame("bad_frame", "frame needs a 'session'")};
      }
      auto s = find(frame["session"].get<std::string>());
      if (!s) return {error_frame("unknown_session", "no session " + frame["session"].get<std::string>())};
      std::lock_guard<std::mutex> lock(s->mutex());
      if (type == "msg") {
        if (!payload.contains("text") || !payload["text"].is_string()) {
          return {error_frame("bad_frame", "msg needs payload.text")};
        }
        return s->message(payload["text"].get<std::string>());
      }
      if (type == "act") {
        const json& a = payload.value("action", json(nullptr));
        int action;
        if (a.is_string()) {
          action = driving::parse_action(a.get<std::string>());
        } else if (a.is_number_integer()) {
          action = a.get<int>();
        } else {
          return {error_frame("bad_frame", "act needs payload.action")};
        }
        std::vector<json> out;
        if (payload.contains("text")) {
          if (!payload["text"].is_string()) return {error_frame("bad_frame", "payload.text must be a string")};
          auto r = s->message(payload["text"].get<std::string>());
          if (r.front()["type"] == "error") return r;
        }
        return s->act(action);
      }
      return {error_frame("unknown_type", "unknown frame type '" + type + "'")};
    } catch (const std::exception& e) {
      return {error_frame("bad_frame", e.what())};
    }
  }

  std::shared_ptr<Session> find(const std::string& id) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
  }

  std::size_t size() {
    std::lock_guard<std::mutex> lock(mu_);
    return sessions_.size();
  }

 private:
  std::vector<json> join(const json& session, const json& payload) {
    if (session.is_string()) {
      auto s = find(session.get<std::string>());
      if (!s) return {error_frame("unknown_session", "no session " + session.get<std::string>())};
      std::lock_guard<std::mutex> lock(s->mutex());
      return {s->ended() ? s->end_frame() : s->state_frame()};
    }
    std::shared_ptr<Session> s;
    {
      std::lock_guard<std::mutex> lock(mu_);
      std::uint64_t n = next_++;
      Rng rng = derive_rng(cfg_.seed, n);
      int map_id = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(game_.n_maps())));
      if (payload.contains("map_id")) {
        map_id = payload["map_id"].get<int>();
        if (map_id < 0 || map_id >= game_.n_maps()) return {error_frame("bad_map", "unknown map id")};
      }
      std::string id = "s" + std::to_string(n);
      s = std::make_shared<Session>(id, game_, agent_, tr_, cfg_, game_.reset(map_id, rng));
      sessions_[id] = s;
    }
    std::lock_guard<std::mutex> lock(s->mutex());
    return {s->state_frame()};
  }

  const driving::DrivingGame& game_;
  const agents::AgentCell& agent_;
  LiveTranslators tr_;
  SessionConfig cfg_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_ = 1;
};

}  // namespace neuralese::server
