#pragma once

// The three-shape reference micro-game. One language names every shape; the
// other only says whether a shape has few or many sides. The listener pulls
// a lever labeled by the target's size.

#include <array>
#include <string>
#include <utility>

#include "neuralese/core/quality.hpp"
#include "neuralese/core/speaker.hpp"

namespace neuralese::shapes {

enum Shape : int { kTriangle = 0, kSquare = 1, kHexagon = 2 };
inline constexpr int kNumShapes = 3;

enum Size : int { kSmall = 0, kLarge = 1 };

inline constexpr std::array<const char*, kNumShapes> kShapeNames = {"triangle", "square", "hexagon"};

/// Triangle and hexagon are large, the square is small: naming "few" sides
/// singles out the large triangle while "many" is split between sizes.
inline constexpr Size size_of(int shape) { return shape == kSquare ? kSmall : kLarge; }

struct ShapesScenario {
  int shape = kTriangle;
  Size size_label = kLarge;
};

/// Listener context: the listener observes nothing in this game.
struct NoContext {
  friend bool operator==(const NoContext&, const NoContext&) = default;
};

// Blue language: one word per shape.
inline constexpr std::array<const char*, 3> kBlueWords = {"triangle", "square", "hexagon"};
// Red language: few (triangle) vs many (square, hexagon).
inline constexpr std::array<const char*, 2> kRedWords = {"few", "many"};
inline constexpr int kFew = 0;
inline constexpr int kMany = 1;

inline TabularSpeaker blue_speaker() { return TabularSpeaker::deterministic({0, 1, 2}, 3); }
inline TabularSpeaker red_speaker() { return TabularSpeaker::deterministic({kFew, kMany, kMany}, 2); }

class ShapesGame {
 public:
  using SpeakerObs = int;
  using ListenerObs = NoContext;

  ShapesScenario sample_scenario(Rng& rng) const {
    int s = static_cast<int>(uniform_index(rng, kNumShapes));
    return {s, size_of(s)};
  }

  std::pair<int, NoContext> sample_pair(Rng& rng) const { return {sample_scenario(rng).shape, NoContext{}}; }

  /// Uniform over the two shapes other than the true one.
  int sample_distractor(int shape, const NoContext&, Rng& rng) const {
    int k = static_cast<int>(uniform_index(rng, kNumShapes - 1));
    return k >= shape ? k + 1 : k;
  }

  EnumeratedGame<int, NoContext> enumerate() const {
    EnumeratedGame<int, NoContext> g;
    g.speaker_obs = {kTriangle, kSquare, kHexagon};
    g.listener_obs = {NoContext{}};
    g.joint = {{1.0 / 3.0}, {1.0 / 3.0}, {1.0 / 3.0}};
    return g;
  }
};

}  // namespace neuralese::shapes
