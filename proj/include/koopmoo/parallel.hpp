#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <exception>

#include <omp.h>

#include "koopmoo/rng.hpp"

namespace koopmoo {

// Every data-parallel kernel takes an execution policy. The serial path is the
// reference implementation; both paths write per-index results into preallocated
// slots and reduce serially afterwards, so their outputs are bit-identical.
enum class Exec { serial, parallel };

template <class Fn>
void for_each_index(Exec exec, std::size_t n, Fn&& fn) {
  if (exec == Exec::serial || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr error;
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(koopmoo_for_each_error)
      {
        if (!error) error = std::current_exception();
      }
    }
  }
  if (error) std::rethrow_exception(error);
}

// Monte Carlo runs share one generator per block of `rng_block` consecutive runs; run r
// draws from stream (master, stream, r / rng_block) after the earlier runs of its block.
// Blocks are the unit of work, so the draws do not depend on the execution policy.
inline constexpr std::size_t rng_block = 32;

template <class Fn>
void for_each_seeded(Exec exec, std::size_t n, std::uint64_t master, std::uint64_t stream, Fn&& fn) {
  const std::size_t blocks = (n + rng_block - 1) / rng_block;
  for_each_index(exec, blocks, [&](std::size_t b) {
    Rng rng = make_rng(master, stream, b);
    const std::size_t end = std::min(n, (b + 1) * rng_block);
    for (std::size_t r = b * rng_block; r < end; ++r) fn(r, rng);
  });
}

}  // namespace koopmoo
