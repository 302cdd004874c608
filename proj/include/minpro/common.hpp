// Copyright (c) 2026 minpro-lab authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared basics: token ids, error types, deterministic RNG helpers, and a
// tiny chunked parallel-for used for rollout generation.

#pragma once

#include <cstdint>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace minpro {

using TokenId = std::int32_t;

/// Raised when an enumeration or table would exceed its size guard.
class CapacityError : public std::runtime_error {
 public:
  explicit CapacityError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when a gradient coefficient or parameter turns non-finite.
/// Carries enough context to locate the offending rollout.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, int group, int rollout, std::uint64_t seed)
      : std::runtime_error(what), group_index(group), rollout_index(rollout), rollout_seed(seed) {}
  explicit NumericError(const std::string& what)
      : std::runtime_error(what), group_index(-1), rollout_index(-1), rollout_seed(0) {}

  int group_index;
  int rollout_index;
  std::uint64_t rollout_seed;
};

// ===== deterministic RNG =====

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Stream-seed mixing: fold components into a run seed one at a time.
/// Used everywhere a per-(step, prompt, sample) seed is derived, so rollout
/// generation is a pure function of (run seed, indices) regardless of thread
/// count or scheduling.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  h = splitmix64(h ^ c);
  return h;
}

/// Uniform double in [0, 1) from a 64-bit word (top 53 bits).
constexpr double uniform_unit(std::uint64_t word) {
  return static_cast<double>(word >> 11) * 0x1.0p-53;
}

// ===== worker pool =====

/// Worker count: hardware concurrency clamped to [1, 16], further capped by
/// MINPRO_LAB_THREADS when set.
inline int worker_count() {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw <= 0) hw = 1;
  if (hw > 16) hw = 16;
  if (const char* env = std::getenv("MINPRO_LAB_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1 && v < hw) return static_cast<int>(v);
  }
  return hw;
}

/// Chunked parallel loop over [0, n). Each index is handled exactly once and
/// results must be written to per-index slots, which keeps the output
/// independent of the thread count.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  if (threads <= 1 || n == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t nthreads = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  std::vector<std::thread> pool;
  pool.reserve(nthreads);
  const std::size_t chunk = (n + nthreads - 1) / nthreads;
  for (std::size_t t = 0; t < nthreads; ++t) {
    const std::size_t lo = t * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace minpro
