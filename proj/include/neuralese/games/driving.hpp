#pragma once

// Two cars in fog on a road map, each heading for its own goal. Moves are
// simultaneous; neither car ever observes the other.

#include <array>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "neuralese/core/quality.hpp"
#include "neuralese/games/grid_map.hpp"

namespace neuralese::driving {

enum Action : int { kForward = 0, kBack = 1, kLeft = 2, kRight = 3, kWait = 4 };
inline constexpr int kNumActions = 5;
inline constexpr std::array<const char*, kNumActions> kActionNames = {"forward", "back", "left", "right", "wait"};

inline int parse_action(const std::string& s) {
  for (int a = 0; a < kNumActions; ++a) {
    if (s == kActionNames[a]) return a;
  }
  throw IllegalAction("unknown action '" + s + "'");
}

struct Rewards {
  double goal = 1.0;
  double collision = -1.0;
  double step = -0.01;
};

struct Car {
  Cell pos;
  int orient = kNorth;
  Cell goal;
  bool finished = false;
  friend bool operator==(const Car&, const Car&) = default;
};

/// One car's private view.
struct CarObs {
  Cell pos;
  int orient = kNorth;
  Cell goal;
  int map_id = 0;
  friend bool operator==(const CarObs&, const CarObs&) = default;
};

struct DrivingState {
  int map_id = 0;
  std::array<Car, 2> cars;
  int t = 0;
  bool done = false;
  bool collided = false;
  friend bool operator==(const DrivingState&, const DrivingState&) = default;
};

struct StepResult {
  DrivingState state;
  double reward = 0.0;
  bool done = false;
};

inline nlohmann::json to_json(const CarObs& x) {
  return {{"pos", {x.pos.r, x.pos.c}},
          {"orient", kOrientationNames[x.orient]},
          {"goal", {x.goal.r, x.goal.c}},
          {"map_id", x.map_id}};
}

inline CarObs car_obs_from_json(const nlohmann::json& j) {
  try {
    CarObs x;
    x.pos = {j.at("pos").at(0).get<int>(), j.at("pos").at(1).get<int>()};
    x.orient = parse_orientation(j.at("orient").get<std::string>());
    x.goal = {j.at("goal").at(0).get<int>(), j.at("goal").at(1).get<int>()};
    x.map_id = j.at("map_id").get<int>();
    return x;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad car observation: ") + e.what());
  }
}

class DrivingGame {
 public:
  using SpeakerObs = CarObs;
  using ListenerObs = CarObs;

  explicit DrivingGame(std::vector<GridMap> maps = builtin_maps(), int step_limit = 40, Rewards rewards = {})
      : maps_(std::move(maps)), step_limit_(step_limit), rewards_(rewards) {
    if (maps_.empty()) throw InvalidConfig("DrivingGame needs at least one map");
    if (step_limit_ < 1) throw InvalidConfig("step limit must be >= 1");
    for (const auto& m : maps_) {
      if (m.height() != maps_.front().height() || m.width() != maps_.front().width()) {
        throw InvalidConfig("all maps in a game must share one size");
      }
    }
  }

  int n_maps() const { return static_cast<int>(maps_.size()); }
  const GridMap& map(int id) const {
    if (id < 0 || id >= n_maps()) throw TraceMapMismatch("unknown map id " + std::to_string(id));
    return maps_[id];
  }
  const std::vector<GridMap>& maps() const { return maps_; }
  int step_limit() const { return step_limit_; }
  const Rewards& rewards() const { return rewards_; }
  int n_actions() const { return kNumActions; }

  /// [position one-hot, orientation one-hot, goal one-hot, map one-hot].
  int feature_dim() const { return 2 * maps_.front().n_cells() + kNumOrientations + n_maps(); }

  std::vector<double> features(const CarObs& x) const {
    const GridMap& m = map(x.map_id);
    std::vector<double> f(feature_dim(), 0.0);
    int n = m.n_cells();
    f[m.index(x.pos)] = 1.0;
    f[n + x.orient] = 1.0;
    f[n + kNumOrientations + m.index(x.goal)] = 1.0;
    f[2 * n + kNumOrientations + x.map_id] = 1.0;
    return f;
  }

  CarObs observe(const DrivingState& s, int car) const {
    const Car& c = s.cars[car];
    return {c.pos, c.orient, c.goal, s.map_id};
  }

  /// Distinct spawns and distinct goals; each car faces a direction whose
  /// forward cell is road when one exists.
  DrivingState reset(Rng& rng) const { return reset(static_cast<int>(uniform_index(rng, maps_.size())), rng); }

  DrivingState reset(int map_id, Rng& rng) const {
    const GridMap& m = map(map_id);
    DrivingState s;
    s.map_id = map_id;
    std::size_t sa = uniform_index(rng, m.spawns().size());
    std::size_t sb = uniform_index(rng, m.spawns().size() - 1);
    if (sb >= sa) ++sb;
    std::size_t ga = uniform_index(rng, m.goals().size());
    std::size_t gb = uniform_index(rng, m.goals().size() - 1);
    if (gb >= ga) ++gb;
    s.cars[0] = {m.spawns()[sa], 0, m.goals()[ga], false};
    s.cars[1] = {m.spawns()[sb], 0, m.goals()[gb], false};
    for (auto& car : s.cars) car.orient = initial_orientation(m, car.pos, rng);
    return s;
  }

  /// Simultaneous move. Collision (same cell, or swapping cells) between
  /// unfinished cars ends the episode.
  StepResult step(const DrivingState& s, int act_a, int act_b) const {
    if (act_a < 0 || act_a >= kNumActions || act_b < 0 || act_b >= kNumActions) {
      throw IllegalAction("actions must be in [0, 5)");
    }
    if (s.done) throw IllegalAction("episode already finished");
    const GridMap& m = map(s.map_id);
    StepResult out;
    out.state = s;
    auto& cars = out.state.cars;
    std::array<int, 2> acts = {act_a, act_b};
    std::array<Cell, 2> before = {s.cars[0].pos, s.cars[1].pos};
    double reward = 0.0;
    for (int i = 0; i < 2; ++i) {
      if (cars[i].finished) continue;
      reward += rewards_.step;
      cars[i] = apply(m, cars[i], acts[i]);
    }
    bool collision = false;
    if (!cars[0].finished && !cars[1].finished) {
      bool same = cars[0].pos == cars[1].pos;
      bool swap = cars[0].pos == before[1] && cars[1].pos == before[0] && before[0] != before[1];
      collision = same || swap;
    }
    if (collision) {
      reward += 2.0 * rewards_.collision;
      out.state.collided = true;
      out.state.done = true;
    } else {
      for (auto& car : cars) {
        if (!car.finished && car.pos == car.goal) {
          car.finished = true;
          reward += rewards_.goal;
        }
      }
    }
    ++out.state.t;
    if (cars[0].finished && cars[1].finished) out.state.done = true;
    if (out.state.t >= step_limit_) out.state.done = true;
    out.reward = reward;
    out.done = out.state.done;
    return out;
  }

  static Car apply(const GridMap& m, Car car, int action) {
    switch (action) {
      case kForward:
      case kBack: {
        int dir = action == kForward ? car.orient : (car.orient + 2) % kNumOrientations;
        Cell next = neighbor(car.pos, dir);
        if (m.road(next)) car.pos = next;
        break;
      }
      case kLeft: car.orient = (car.orient + 3) % kNumOrientations; break;
      case kRight: car.orient = (car.orient + 1) % kNumOrientations; break;
      default: break;
    }
    return car;
  }

  bool legal(const CarObs& x) const {
    if (x.map_id < 0 || x.map_id >= n_maps()) return false;
    const GridMap& m = maps_[x.map_id];
    if (!m.road(x.pos) || x.orient < 0 || x.orient >= kNumOrientations) return false;
    for (const Cell& g : m.goals()) {
      if (g == x.goal) return true;
    }
    return false;
  }

  /// Independent uniform car states on a shared map: any road cell, any
  /// orientation, any goal cell, with distinct positions and goals.
  std::pair<CarObs, CarObs> sample_pair(Rng& rng) const {
    int map_id = static_cast<int>(uniform_index(rng, maps_.size()));
    CarObs b = sample_car(map_id, rng);
    CarObs a;
    do {
      a = sample_car(map_id, rng);
    } while (a.pos == b.pos || a.goal == b.goal);
    return {a, b};
  }

  /// A fresh state for the hidden car consistent with the listener's map
  /// and distinct from the true one.
  CarObs sample_distractor(const CarObs& xa, const CarObs& xb, Rng& rng) const {
    CarObs d;
    do {
      d = sample_car(xb.map_id, rng);
    } while (d.pos == xb.pos || d.goal == xb.goal || d == xa);
    return d;
  }

  /// All (car a, car b) states with distinct positions and goals, uniform.
  /// Only small maps (at most 16 cells) are enumerable.
  EnumeratedGame<CarObs, CarObs> enumerate() const {
    if (maps_.front().n_cells() > 16) throw NotEnumerable("driving maps larger than 4x4 are not enumerable");
    EnumeratedGame<CarObs, CarObs> g;
    std::vector<int> first(maps_.size() + 1, 0);
    for (int id = 0; id < n_maps(); ++id) {
      first[id] = static_cast<int>(g.speaker_obs.size());
      for (const Cell& p : maps_[id].road_cells()) {
        for (int o = 0; o < kNumOrientations; ++o) {
          for (const Cell& goal : maps_[id].goals()) g.speaker_obs.push_back({p, o, goal, id});
        }
      }
    }
    g.listener_obs = g.speaker_obs;
    std::size_t n = g.speaker_obs.size();
    g.joint.assign(n, std::vector<double>(n, 0.0));
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const CarObs& a = g.speaker_obs[i];
        const CarObs& b = g.listener_obs[j];
        if (a.map_id == b.map_id && a.pos != b.pos && a.goal != b.goal) {
          g.joint[i][j] = 1.0;
          total += 1.0;
        }
      }
    }
    for (auto& row : g.joint) {
      for (double& v : row) v /= total;
    }
    return g;
  }

  /// Greedy shortest-path action toward the car's goal: move if a move
  /// shortens the distance, otherwise turn toward a shortening direction.
  int shortest_path_action(const CarObs& x) const {
    const GridMap& m = map(x.map_id);
    auto dist = m.distances_from(x.goal);
    int here = dist[m.index(x.pos)];
    if (here <= 0) return kWait;
    auto closer = [&](int dir) {
      Cell q = neighbor(x.pos, dir);
      return m.road(q) && dist[m.index(q)] >= 0 && dist[m.index(q)] < here;
    };
    if (closer(x.orient)) return kForward;
    if (closer((x.orient + 2) % kNumOrientations)) return kBack;
    if (closer((x.orient + 3) % kNumOrientations)) return kLeft;
    return kRight;
  }

 private:
  CarObs sample_car(int map_id, Rng& rng) const {
    const GridMap& m = maps_[map_id];
    CarObs x;
    x.map_id = map_id;
    x.pos = m.road_cells()[uniform_index(rng, m.road_cells().size())];
    x.orient = static_cast<int>(uniform_index(rng, kNumOrientations));
    x.goal = m.goals()[uniform_index(rng, m.goals().size())];
    return x;
  }

  static int initial_orientation(const GridMap& m, Cell p, Rng& rng) {
    std::vector<int> open;
    for (int o = 0; o < kNumOrientations; ++o) {
      if (m.road(neighbor(p, o))) open.push_back(o);
    }
    if (open.empty()) return static_cast<int>(uniform_index(rng, kNumOrientations));
    return open[uniform_index(rng, open.size())];
  }

  std::vector<GridMap> maps_;
  int step_limit_;
  Rewards rewards_;
};

}  // namespace neuralese::driving
