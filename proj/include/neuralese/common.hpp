#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace neuralese {

using Rng = std::mt19937_64;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Base of every error raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define NEURALESE_DEFINE_ERROR(Name)        \
  class Name : public Error {               \
   public:                                  \
    using Error::Error;                     \
  }

NEURALESE_DEFINE_ERROR(ShapeMismatch);
NEURALESE_DEFINE_ERROR(NonScalarLoss);
NEURALESE_DEFINE_ERROR(AllZeroLikelihood);
NEURALESE_DEFINE_ERROR(NoFeasibleTranslation);
NEURALESE_DEFINE_ERROR(Infeasible);
NEURALESE_DEFINE_ERROR(IllegalAction);
NEURALESE_DEFINE_ERROR(NotEnumerable);
NEURALESE_DEFINE_ERROR(DivergedTraining);
NEURALESE_DEFINE_ERROR(EmptyInventory);
NEURALESE_DEFINE_ERROR(DisjointnessViolation);
NEURALESE_DEFINE_ERROR(TraceMapMismatch);
NEURALESE_DEFINE_ERROR(InvalidConfig);
NEURALESE_DEFINE_ERROR(FormatError);

#undef NEURALESE_DEFINE_ERROR

/// Raised when a line-oriented input cannot be parsed. Carries the 1-based
/// line number of the offending line.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// A translation-quality value. Infeasible scores (zero co-occurrence weight
/// or an unbounded divergence) order above every finite score.
class Score {
 public:
  constexpr Score() = default;
  constexpr explicit Score(double value) : value_(value), feasible_(std::isfinite(value)) {}

  static constexpr Score infeasible() { return Score(); }

  constexpr bool feasible() const { return feasible_; }
  constexpr double value() const { return feasible_ ? value_ : kInf; }

  friend constexpr std::partial_ordering operator<=>(const Score& a, const Score& b) {
    if (a.feasible_ != b.feasible_) return a.feasible_ ? std::partial_ordering::less
                                                        : std::partial_ordering::greater;
    if (!a.feasible_) return std::partial_ordering::equivalent;
    return a.value_ <=> b.value_;
  }
  friend constexpr bool operator==(const Score& a, const Score& b) {
    return (a <=> b) == std::partial_ordering::equivalent;
  }

 private:
  double value_ = kInf;
  bool feasible_ = false;
};

inline double log_sum_exp(std::span<const double> xs) {
  double hi = kNegInf;
  for (double x : xs) hi = std::max(hi, x);
  if (hi == kNegInf) return kNegInf;
  if (hi == kInf) return kInf;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - hi);
  return hi + std::log(acc);
}

inline double safe_log(double p) { return p > 0.0 ? std::log(p) : kNegInf; }

/// Derives an independent generator for stream `index` of a run seeded with
/// `seed`. Used wherever work may be split into independent trials.
inline Rng derive_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    0x6e65757aU};
  return Rng(seq);
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

/// Samples from a symmetric Dirichlet(alpha) over `n` outcomes.
inline std::vector<double> sample_dirichlet(Rng& rng, std::size_t n, double alpha = 1.0) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<double> out(n);
  double total = 0.0;
  for (auto& v : out) {
    v = gamma(rng);
    total += v;
  }
  if (total <= 0.0) {
    std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(n));
    return out;
  }
  for (auto& v : out) v /= total;
  return out;
}

}  // namespace neuralese
