#pragma once

// Seeded sampling helpers with a fixed algorithm. The <random> distributions
// are implementation-defined, so results would differ between standard
// libraries; everything here only relies on std::mt19937_64, whose output
// sequence is fixed by the standard.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <utility>

namespace tugscore::rng {

using Engine = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) {
  return mix(mix(parent) ^ mix(index + 0x632be59bd9b4e019ULL));
}

// Uniform in [0, 1) with 53 random bits.
inline double uniform(Engine& engine) {
  return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

// Uniform in (0, 1].
inline double uniform_open0(Engine& engine) {
  return (static_cast<double>(engine() >> 11) + 1.0) * 0x1.0p-53;
}

inline double uniform(Engine& engine, double lo, double hi) {
  return lo + (hi - lo) * uniform(engine);
}

// Standard normal via Box-Muller; one draw per call, the partner is dropped.
inline double normal(Engine& engine) {
  const double u1 = uniform_open0(engine);
  const double u2 = uniform(engine);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline double normal(Engine& engine, double mean, double sd) {
  return mean + sd * normal(engine);
}

inline double exponential(Engine& engine, double mean) {
  return -mean * std::log(uniform_open0(engine));
}

// Unbiased integer in [0, bound) by rejection.
inline std::uint64_t below(Engine& engine, std::uint64_t bound) {
  const std::uint64_t limit = engine.max() - (engine.max() - bound + 1) % bound;
  std::uint64_t draw;
  do {
    draw = engine();
  } while (draw > limit);
  return draw % bound;
}

template <typename T>
void shuffle(std::span<T> values, Engine& engine) {
  for (std::size_t i = values.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(below(engine, i));
    std::swap(values[i - 1], values[j]);
  }
}

}  // namespace tugscore::rng
