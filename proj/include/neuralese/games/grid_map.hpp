#pragma once

// Road maps for the driving game. Text form, one row per line:
//   '#' off-road   '.' road   'S' spawn (road)   'G' goal-eligible (road)

#include <array>
#include <deque>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "neuralese/common.hpp"

namespace neuralese::driving {

struct Cell {
  int r = 0;
  int c = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

enum Orientation : int { kNorth = 0, kEast = 1, kSouth = 2, kWest = 3 };
inline constexpr int kNumOrientations = 4;
inline constexpr std::array<const char*, 4> kOrientationNames = {"N", "E", "S", "W"};

inline Cell neighbor(Cell p, int orient) {
  switch (orient) {
    case kNorth: return {p.r - 1, p.c};
    case kEast: return {p.r, p.c + 1};
    case kSouth: return {p.r + 1, p.c};
    default: return {p.r, p.c - 1};
  }
}

inline int parse_orientation(const std::string& s) {
  for (int o = 0; o < kNumOrientations; ++o) {
    if (s == kOrientationNames[o]) return o;
  }
  throw FormatError("bad orientation '" + s + "'");
}

class GridMap {
 public:
  GridMap() = default;

  static GridMap parse(const std::string& text, const std::string& source = "<map>") {
    GridMap m;
    m.name_ = source;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (!m.rows_.empty() && line.size() != m.rows_.front().size()) {
        throw ParseError(source, lineno, "row length differs from the first row");
      }
      for (char ch : line) {
        if (ch != '#' && ch != '.' && ch != 'S' && ch != 'G') {
          throw ParseError(source, lineno, std::string("unexpected character '") + ch + "'");
        }
      }
      m.rows_.push_back(line);
    }
    if (m.rows_.empty()) throw ParseError(source, 1, "empty map");
    for (int r = 0; r < m.height(); ++r) {
      for (int c = 0; c < m.width(); ++c) {
        char ch = m.rows_[r][c];
        if (ch == 'S') m.spawns_.push_back({r, c});
        if (ch == 'G') m.goals_.push_back({r, c});
        if (ch != '#') m.road_.push_back({r, c});
      }
    }
    if (m.spawns_.size() < 2) throw ParseError(source, lineno, "need at least two spawn cells");
    if (m.goals_.size() < 2) throw ParseError(source, lineno, "need at least two goal cells");
    for (const Cell& s : m.spawns_) {
      auto dist = m.distances_from(s);
      for (const Cell& g : m.goals_) {
        if (dist[m.index(g)] < 0) {
          throw ParseError(source, lineno,
                           "goal (" + std::to_string(g.r) + "," + std::to_string(g.c) + ") unreachable from spawn (" +
                               std::to_string(s.r) + "," + std::to_string(s.c) + ")");
        }
      }
    }
    return m;
  }

  static GridMap load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read map " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
  }

  int height() const { return static_cast<int>(rows_.size()); }
  int width() const { return rows_.empty() ? 0 : static_cast<int>(rows_.front().size()); }
  int n_cells() const { return height() * width(); }
  const std::string& name() const { return name_; }
  void set_name(std::string n) { name_ = std::move(n); }

  bool inside(Cell p) const { return p.r >= 0 && p.c >= 0 && p.r < height() && p.c < width(); }
  bool road(Cell p) const { return inside(p) && rows_[p.r][p.c] != '#'; }
  int index(Cell p) const { return p.r * width() + p.c; }

  const std::vector<Cell>& road_cells() const { return road_; }
  const std::vector<Cell>& spawns() const { return spawns_; }
  const std::vector<Cell>& goals() const { return goals_; }
  const std::vector<std::string>& rows() const { return rows_; }

  std::string to_text() const {
    std::string out;
    for (const auto& r : rows_) out += r + "\n";
    return out;
  }

  /// BFS step counts over road cells, ignoring orientation; -1 if unreachable.
  std::vector<int> distances_from(Cell start) const {
    std::vector<int> dist(n_cells(), -1);
    if (!road(start)) return dist;
    std::deque<Cell> frontier{start};
    dist[index(start)] = 0;
    while (!frontier.empty()) {
      Cell p = frontier.front();
      frontier.pop_front();
      for (int o = 0; o < kNumOrientations; ++o) {
        Cell q = neighbor(p, o);
        if (road(q) && dist[index(q)] < 0) {
          dist[index(q)] = dist[index(p)] + 1;
          frontier.push_back(q);
        }
      }
    }
    return dist;
  }

 private:
  std::string name_;
  std::vector<std::string> rows_;
  std::vector<Cell> road_;
  std::vector<Cell> spawns_;
  std::vector<Cell> goals_;
};

// Built-in layouts; data/maps/ holds the same maps as files.
inline const std::vector<std::string>& builtin_map_texts() {
  static const std::vector<std::string> maps = {
      // cross
      "###S.###\n"
      "###..###\n"
      "###..###\n"
      "S......G\n"
      "G......S\n"
      "###..###\n"
      "###..###\n"
      "###.G###\n",
      // tee
      "########\n"
      "S......G\n"
      "G......S\n"
      "###..###\n"
      "###..###\n"
      "###..###\n"
      "###..###\n"
      "###SG###\n",
      // ring
      "S......G\n"
      ".######.\n"
      ".######.\n"
      ".######.\n"
      ".######.\n"
      ".######.\n"
      ".######.\n"
      "G......S\n",
      // switchback
      "S......#\n"
      "######.#\n"
      "#......#\n"
      "#.######\n"
      "#......G\n"
      "######.#\n"
      "G......S\n"
      "########\n",
      // blocks
      "S.#..#.G\n"
      "..#..#..\n"
      "........\n"
      "##.##.##\n"
      "##.##.##\n"
      "........\n"
      "..#..#..\n"
      "G.#..#.S\n",
  };
  return maps;
}

inline const char* kMiniMapText =
    "#S.#\n"
    "S..G\n"
    "G..S\n"
    "#.G#\n";

inline std::vector<GridMap> builtin_maps() {
  static const std::array<const char*, 5> names = {"cross", "tee", "ring", "switchback", "blocks"};
  std::vector<GridMap> out;
  for (std::size_t i = 0; i < builtin_map_texts().size(); ++i) {
    out.push_back(GridMap::parse(builtin_map_texts()[i], names[i]));
  }
  return out;
}

inline std::vector<GridMap> mini_maps() { return {GridMap::parse(kMiniMapText, "mini")}; }

}  // namespace neuralese::driving
