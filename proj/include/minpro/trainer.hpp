// Copyright (c) 2026 minpro-lab authors
// SPDX-License-Identifier: Apache-2.0
//
// Off-policy training loop with a fixed-delay rollout buffer.
//
// Protocol per global step: pop the oldest buffered batch, train M
// mini-batch updates on it, then generate a fresh batch with the updated
// policy and push it. The buffer is prefilled with staleness+1 batches
// sampled from the initial policy whose version stamps are backdated by
// whole steps (-n*U, ..., -U, 0); the parameters behind every prefill stamp
// are the initial ones, so the stored log-probs are exact. This makes the
// version-lag invariant
//
//     policy_version - behavior_version in [U*n, U*(n+1) - 1]
//
// hold at every update from the first one, where U = minibatch_count and
// n = staleness.
//
// Rollout seeds are derived as mix_seed(run_seed, batch_index, prompt_index,
// sample_index), so generation is a pure function of the config regardless
// of worker count.

#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "minpro/advantage.hpp"
#include "minpro/envs.hpp"
#include "minpro/objectives.hpp"
#include "minpro/policy.hpp"

namespace minpro {

enum class OptimizerKind { Sgd, Adam };

struct TrainConfig {
  ObjectiveSpec objective;
  Environment env;
  int context_len = 3;
  int t_max = 16;
  int prompts_per_batch = 64;  // N; must be divisible by minibatch_count
  int group_size = 8;          // G
  int minibatch_count = 16;    // M = U updates per global step
  int staleness = 2;           // n
  double learning_rate = 10.0;
  OptimizerKind optimizer = OptimizerKind::Sgd;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int warmup_steps = 10;  // linear lr ramp over this many updates
  int global_steps = 60;
  std::uint64_t seed = 1;
  int threads = 1;

  void validate() const;
};

/// One row per parameter update.
struct TrainRecord {
  int global_step = 0;
  int update_index = 0;  // 1..M within the step
  std::int64_t policy_version = 0;
  std::int64_t behavior_version = 0;
  double mean_reward = 0.0;  // sampling-time mean reward of the batch being trained
  double mean_token_entropy = 0.0;
  double clip_fraction = 0.0;
  double mask_fraction = 0.0;
  double degenerate_group_fraction = 0.0;
  double mean_abs_log_ratio = 0.0;
  double max_abs_log_ratio = 0.0;
  double grad_norm = 0.0;
};

struct GeneratedBatch {
  std::int64_t behavior_version = 0;  // negative for prefill stamps
  std::uint64_t batch_index = 0;      // generation counter (prompt stream offset)
  std::vector<RolloutGroup> groups;
  double mean_reward = 0.0;
};

/// FIFO queue of delayed batches.
class StalenessBuffer {
 public:
  void push(GeneratedBatch b) { q_.push_back(std::move(b)); }
  GeneratedBatch pop();
  std::size_t size() const { return q_.size(); }

 private:
  std::deque<GeneratedBatch> q_;
};

/// Optimizer state; Adam keeps sparse first/second moments per logit.
struct OptState {
  OptimizerKind kind = OptimizerKind::Sgd;
  double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;
  std::int64_t step = 0;  // updates applied (for bias correction and warmup)
  std::unordered_map<std::uint64_t, std::vector<double>> m;
  std::unordered_map<std::uint64_t, std::vector<double>> v;
};

/// One gradient-ascent update (objectives are rewards, not losses). The
/// learning rate ramps linearly over `warmup_steps` updates. Bumps the
/// policy version exactly once, also for all-zero gradients.
void apply_update(PolicyTable& p, const LogitGrad& grad, OptState& opt, double lr,
                  int warmup_steps);

/// Sample one batch of prompts_per_batch groups from a frozen policy.
GeneratedBatch generate_batch(const PolicyTable& policy, const Environment& env,
                              const TrainConfig& cfg, std::uint64_t batch_index,
                              std::int64_t behavior_stamp);

struct TrainResult {
  std::vector<TrainRecord> records;
  PolicyTable final_policy{2, 1};
  bool aborted = false;
  int abort_step = -1;
  std::string abort_reason;
};

/// Run the full protocol. Deterministic in cfg (including cfg.seed); a
/// NumericError from the objectives aborts the run with the step recorded.
TrainResult run_training(const TrainConfig& cfg);

/// Fraction of prompts solved by at least one of k sampled attempts. The
/// per-(prompt, attempt) seed schedule is independent of k, so pass@k is
/// non-decreasing in k.
double evaluate_pass_at_k(const PolicyTable& p, const Environment& env, int k, int num_prompts,
                          int t_max, std::uint64_t seed);

}  // namespace minpro
