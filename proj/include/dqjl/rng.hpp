#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace dqjl {

using Rng = std::mt19937_64;

// Named sub-stream tags so independent draws never share a sequence.
namespace stream {
constexpr std::uint64_t kKinematics = 0x6b696e;  // scenario placement/feature draws
constexpr std::uint64_t kKind = 0x6b696e64;      // CV/HV label assignment
constexpr std::uint64_t kWorld = 0x776f726c64;   // in-episode dynamics noise
constexpr std::uint64_t kInit = 0x696e6974;      // network parameter init
constexpr std::uint64_t kTrain = 0x747261696e;   // trainer-side draws
}  // namespace stream

// Deterministic generator for (seed, stream). Distinct streams from one seed
// are independent for practical purposes.
inline Rng sub_rng(std::uint64_t seed, std::uint64_t stream_tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_tag),
                    static_cast<std::uint32_t>(stream_tag >> 32)};
  return Rng(seq);
}

// splitmix64; used to fold (episode, step, agent) coordinates into one tag.
inline std::uint64_t mix_u64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_u64(std::uint64_t a, std::uint64_t b) {
  return mix_u64(mix_u64(a) ^ b);
}

inline std::uint64_t mix_u64(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return mix_u64(mix_u64(a, b) ^ c);
}

// Normal draw rejected until it lands in [lo, hi].
inline double truncated_normal(double mean, double stddev, double lo, double hi,
                               Rng& rng) {
  if (stddev <= 0.0) return std::min(std::max(mean, lo), hi);
  std::normal_distribution<double> dist(mean, stddev);
  for (;;) {
    double draw = dist(rng);
    if (draw >= lo && draw <= hi) return draw;
  }
}

// Standard Gumbel(0,1) sample.
inline double gumbel_sample(Rng& rng) {
  std::uniform_real_distribution<double> unit(std::numeric_limits<double>::min(),
                                              1.0);
  return -std::log(-std::log(unit(rng)));
}

}  // namespace dqjl
