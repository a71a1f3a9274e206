#pragma once

#include <cstdint>
#include <random>

namespace koopmoo {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

// Counter-based sub-seed derivation: every (master, stream, index) triple maps to an
// independent generator seed, so ensemble members can be simulated in any order.
std::uint64_t sub_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index = 0);

inline Rng make_rng(std::uint64_t master, std::uint64_t stream, std::uint64_t index = 0) {
  return Rng(sub_seed(master, stream, index));
}

// Stream identifiers keep the pipelines' random draws disjoint.
namespace streams {
inline constexpr std::uint64_t state_points = 1;
inline constexpr std::uint64_t kramers_moyal = 2;
inline constexpr std::uint64_t ensemble = 3;
inline constexpr std::uint64_t test_points = 4;
inline constexpr std::uint64_t training_paths = 5;
inline constexpr std::uint64_t reference = 6;
inline constexpr std::uint64_t box_offsets = 7;
inline constexpr std::uint64_t reduced_paths = 8;
}  // namespace streams

}  // namespace koopmoo
