// Copyright (c) 2026 minpro-lab authors
// SPDX-License-Identifier: Apache-2.0

#include "minpro/advantage.hpp"

#include <cmath>
#include <stdexcept>

namespace minpro {

std::vector<double> group_advantages(std::span<const double> rewards) {
  const std::size_t g = rewards.size();
  if (g < 2) throw std::invalid_argument("group_advantages: need at least two rewards");
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(g);
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= static_cast<double>(g);
  const double sd = std::sqrt(var);
  std::vector<double> adv(g, 0.0);
  if (sd < 1e-8) return adv;
  for (std::size_t i = 0; i < g; ++i) adv[i] = (rewards[i] - mean) / sd;
  return adv;
}

double verify_reward(const Environment& env, std::span<const TokenId> prompt,
                     std::span<const TokenId> response) {
  return answer_predicate(env, response, answer_for_prompt(env, prompt));
}

}  // namespace minpro
