// Copyright (c) 2026 minpro-lab authors
// SPDX-License-Identifier: Apache-2.0
//
// Textual key=value experiment configuration. Unknown keys are a hard
// error; every key has a default; clip-related keys default to "auto",
// which resolves per objective:
//
//   objective      eps_low / eps_high   aggregation    extras
//   reinforce      -                    token_mean
//   grpo           0.2 / 0.28           token_mean
//   gspo           2e-3 / 2e-3          seq_mean
//   cispo          1 / 4                token_mean
//   m2po           -                    token_mean     m2_budget 0.04
//   minpro         1 / 4                token_mean
//   prefix_direct  1 / 4                token_mean
//   prefix_filter  1 / 4                token_mean     filter_quantile 0.01
//   prefix_exact   -                    token_mean
//
// echo_config() emits the full resolved key set in a fixed order, and
// parsing that echo reproduces the same configuration.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "minpro/envs.hpp"
#include "minpro/trainer.hpp"

namespace minpro {

struct ExperimentConfig {
  std::string objective = "minpro";
  std::vector<std::string> objectives = {"grpo", "gspo", "cispo", "m2po", "minpro"};
  std::optional<double> eps_low;   // empty = auto
  std::optional<double> eps_high;  // empty = auto
  std::optional<double> m2_budget;
  std::optional<double> filter_quantile;
  std::string aggregation = "auto";  // auto | token_mean | seq_mean

  std::string env = "summod";  // summod | echo
  int echo_vocab = 3;
  int summod_base = 4;
  int summod_digits = 3;
  int summod_reasoning_budget = 8;
  std::uint64_t dataset_seed = 1;

  int context_len = 3;
  int t_max = 16;
  int prompts_per_batch = 64;
  int group_size = 8;
  int minibatch_count = 16;
  int staleness = 2;
  double learning_rate = 10.0;
  std::string optimizer = "sgd";  // sgd | adam
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int warmup_steps = 10;
  int global_steps = 60;
  std::uint64_t seed = 1;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Parse `key = value` lines ('#' starts a comment). Unknown keys, bad
/// values, and duplicate keys all throw std::invalid_argument.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

/// Canonical full echo of the resolved configuration.
std::string echo_config(const ExperimentConfig& cfg);

/// Resolve an objective name against the config's clip settings.
ObjectiveSpec resolve_objective(const std::string& name, const ExperimentConfig& cfg);

Environment to_environment(const ExperimentConfig& cfg);

/// Build the training config for one named objective (empty = cfg.objective)
/// and an optional seed override.
TrainConfig to_train_config(const ExperimentConfig& cfg, const std::string& objective_name = "",
                            std::optional<std::uint64_t> seed_override = std::nullopt);

}  // namespace minpro
