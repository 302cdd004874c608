// Copyright (c) 2026 minpro-lab authors
// SPDX-License-Identifier: Apache-2.0
//
// Rollouts, rollout groups, and group-relative advantage estimation.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "minpro/common.hpp"
#include "minpro/envs.hpp"

namespace minpro {

/// One sampled response with its behavior-policy log-probabilities.
/// behavior_version may be negative for batches stamped as pre-run snapshots
/// of the initial policy (see trainer buffer prefill).
struct Rollout {
  std::vector<TokenId> prompt;
  std::vector<TokenId> response;
  std::vector<double> behavior_logp;  // one entry per response token
  double reward = 0.0;
  std::int64_t behavior_version = 0;
  std::uint64_t seed = 0;
};

/// G rollouts sharing one prompt, plus their normalized advantages.
/// `degenerate` marks groups whose rewards were all equal (zero advantages).
struct RolloutGroup {
  std::vector<Rollout> rollouts;
  std::vector<double> advantages;
  bool degenerate = false;
};

/// (R_i - mean) / std with the population (divide-by-G) standard deviation,
/// broadcast per sequence. Groups with std < 1e-8 return all zeros.
/// Throws std::invalid_argument when fewer than two rewards are given.
std::vector<double> group_advantages(std::span<const double> rewards);

/// Binary reward: does the response answer the prompt under this environment?
double verify_reward(const Environment& env, std::span<const TokenId> prompt,
                     std::span<const TokenId> response);

}  // namespace minpro
