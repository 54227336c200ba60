#pragma once

// Color reference game. Both players see two LAB colors; the speaker also
// knows which one is the target and the listener must pick it.

#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "neuralese/core/quality.hpp"

namespace neuralese::colors {

struct Lab {
  double l = 0.0;
  double a = 0.0;
  double b = 0.0;

  friend bool operator==(const Lab&, const Lab&) = default;
};

inline bool in_range(const Lab& c) {
  return c.l >= 0.0 && c.l <= 100.0 && c.a >= -128.0 && c.a <= 127.0 && c.b >= -128.0 && c.b <= 127.0;
}

inline double distance(const Lab& x, const Lab& y) {
  return std::sqrt((x.l - y.l) * (x.l - y.l) + (x.a - y.a) * (x.a - y.a) + (x.b - y.b) * (x.b - y.b));
}

/// What the speaker sees: the candidate pair and which one is the target.
struct SpeakerObs {
  std::array<Lab, 2> candidates;
  int target = 0;

  const Lab& target_color() const { return candidates[target]; }
  const Lab& other_color() const { return candidates[1 - target]; }
  friend bool operator==(const SpeakerObs&, const SpeakerObs&) = default;
};

/// What the listener sees: the same pair, without the target flag.
struct ListenerObs {
  std::array<Lab, 2> candidates;
  friend bool operator==(const ListenerObs&, const ListenerObs&) = default;
};

struct ColorScenario {
  std::array<Lab, 2> candidates;
  int target = 0;

  SpeakerObs speaker() const { return {candidates, target}; }
  ListenerObs listener() const { return {candidates}; }
};

/// A finite set of colors, each with a fine-grained and a coarse name.
struct Palette {
  std::vector<Lab> colors;
  std::vector<std::string> fine_names;
  std::vector<std::string> coarse_names;

  std::size_t size() const { return colors.size(); }

  std::size_t index_of(const Lab& c) const {
    for (std::size_t i = 0; i < colors.size(); ++i) {
      if (colors[i] == c) return i;
    }
    throw InvalidConfig("color is not in the palette");
  }

  /// Closest palette entry; ties go to the lower index.
  std::size_t nearest(const Lab& c) const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < colors.size(); ++i) {
      if (distance(c, colors[i]) < distance(c, colors[best])) best = i;
    }
    return best;
  }

  /// 24 colors: four hue families, each with three lightness levels at two
  /// chroma levels. Every color has a unique fine name.
  static Palette synthetic() {
    struct Family {
      const char* coarse;
      double hue_deg;
      std::array<const char*, 6> fine;
    };
    const std::array<Family, 4> families = {{
        {"red", 30.0, {"maroon", "brick", "crimson", "scarlet", "rose", "salmon"}},
        {"yellow", 95.0, {"olive", "mustard", "khaki", "gold", "cream", "lemon"}},
        {"green", 150.0, {"forest", "moss", "emerald", "jade", "sage", "lime"}},
        {"blue", 265.0, {"navy", "indigo", "slate", "cobalt", "sky", "azure"}},
    }};
    const std::array<double, 3> lightness = {30.0, 52.0, 74.0};
    const std::array<double, 2> chroma = {28.0, 56.0};
    Palette p;
    for (const auto& f : families) {
      double h = f.hue_deg * std::numbers::pi / 180.0;
      int k = 0;
      for (double l : lightness) {
        for (double c : chroma) {
          p.colors.push_back({l, c * std::cos(h), c * std::sin(h)});
          p.fine_names.emplace_back(f.fine[k++]);
          p.coarse_names.emplace_back(f.coarse);
        }
      }
    }
    return p;
  }

  /// Whitespace-separated lines `L a b fine coarse`; `#` starts a comment.
  static Palette load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read palette " + path);
    Palette p;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
      std::istringstream fields(line);
      Lab c;
      std::string fine, coarse;
      if (!(fields >> c.l)) continue;
      if (!(fields >> c.a >> c.b >> fine >> coarse)) throw ParseError(path, lineno, "expected L a b fine coarse");
      if (!in_range(c)) throw ParseError(path, lineno, "LAB value out of range");
      p.colors.push_back(c);
      p.fine_names.push_back(fine);
      p.coarse_names.push_back(coarse);
    }
    if (p.colors.size() < 2) throw InvalidConfig("palette needs at least two colors");
    return p;
  }
};

/// Feature layout shared by both roles so one policy serves both:
/// [slot0 LAB (3), slot1 LAB (3), is_speaker]. The speaker fills slot0 with
/// the target and leaves slot1 empty; the listener fills both slots with the
/// candidates in its own order.
inline constexpr int kFeatureDim = 7;

inline void write_lab(const Lab& c, double* out) {
  out[0] = c.l / 100.0;
  out[1] = c.a / 100.0;
  out[2] = c.b / 100.0;
}

class ColorGame {
 public:
  using Scenario = ColorScenario;
  using SpeakerObs = colors::SpeakerObs;
  using ListenerObs = colors::ListenerObs;

  explicit ColorGame(Palette palette = Palette::synthetic()) : palette_(std::move(palette)) {
    if (palette_.size() < 2) throw InvalidConfig("ColorGame needs at least two colors");
  }

  const Palette& palette() const { return palette_; }

  int n_actions() const { return 2; }
  int feature_dim() const { return kFeatureDim; }

  ColorScenario sample_scenario(Rng& rng) const {
    std::size_t n = palette_.size();
    std::size_t i = uniform_index(rng, n);
    std::size_t j = uniform_index(rng, n - 1);
    if (j >= i) ++j;
    int target = static_cast<int>(uniform_index(rng, 2));
    return {{palette_.colors[i], palette_.colors[j]}, target};
  }

  std::pair<SpeakerObs, ListenerObs> sample_pair(Rng& rng) const {
    auto s = sample_scenario(rng);
    return {s.speaker(), s.listener()};
  }

  /// The other candidate as target.
  SpeakerObs sample_distractor(const SpeakerObs& xa, const ListenerObs& xb, Rng&) const {
    return {xb.candidates, 1 - xa.target};
  }

  /// Every ordered pair of distinct colors, each with both targets, uniform.
  EnumeratedGame<SpeakerObs, ListenerObs> enumerate() const {
    EnumeratedGame<SpeakerObs, ListenerObs> g;
    std::size_t n = palette_.size();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        g.listener_obs.push_back({{palette_.colors[i], palette_.colors[j]}});
      }
    }
    double w = 1.0 / static_cast<double>(g.listener_obs.size() * 2);
    g.joint.assign(g.listener_obs.size() * 2, std::vector<double>(g.listener_obs.size(), 0.0));
    for (std::size_t k = 0; k < g.listener_obs.size(); ++k) {
      for (int t = 0; t < 2; ++t) {
        g.joint[g.speaker_obs.size()][k] = w;
        g.speaker_obs.push_back({g.listener_obs[k].candidates, t});
      }
    }
    return g;
  }

  std::vector<double> speaker_features(const SpeakerObs& x) const {
    std::vector<double> f(kFeatureDim, 0.0);
    write_lab(x.target_color(), f.data());
    f[6] = 1.0;
    return f;
  }

  std::vector<double> listener_features(const ListenerObs& x) const {
    std::vector<double> f(kFeatureDim, 0.0);
    write_lab(x.candidates[0], f.data());
    write_lab(x.candidates[1], f.data() + 3);
    return f;
  }

  std::vector<double> speaker_features(const ColorScenario& s) const { return speaker_features(s.speaker()); }
  std::vector<double> listener_features(const ColorScenario& s) const { return listener_features(s.listener()); }

  double reward(const ColorScenario& s, int action) const { return action == s.target ? 1.0 : 0.0; }

  /// Gaussian bumps of width `bandwidth` (LAB units) around every palette
  /// color. Human speaker and listener models read the target this way.
  std::vector<double> palette_rbf(const Lab& c, double bandwidth = 10.0) const {
    std::vector<double> f(palette_.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
      double d = distance(c, palette_.colors[i]) / bandwidth;
      f[i] = std::exp(-0.5 * d * d);
    }
    return f;
  }

  std::vector<double> human_features(const SpeakerObs& x) const { return palette_rbf(x.target_color()); }

  /// Which listener action identifies speaker state `x` as the target.
  int action_for(const SpeakerObs& x) const { return x.target; }

 private:
  Palette palette_;
};

}  // namespace neuralese::colors
