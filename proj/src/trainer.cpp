// Copyright (c) 2026 minpro-lab authors
// SPDX-License-Identifier: Apache-2.0

#include "minpro/trainer.hpp"

#include <cmath>
#include <stdexcept>

namespace minpro {

void TrainConfig::validate() const {
  objective.validate();
  if (context_len < 1) throw std::invalid_argument("TrainConfig: context_len must be >= 1");
  if (t_max < 1) throw std::invalid_argument("TrainConfig: t_max must be >= 1");
  if (prompts_per_batch < 1 || group_size < 2 || minibatch_count < 1)
    throw std::invalid_argument("TrainConfig: batch shape fields must be positive (group_size >= 2)");
  if (prompts_per_batch % minibatch_count != 0)
    throw std::invalid_argument("TrainConfig: prompts_per_batch must be divisible by minibatch_count");
  if (staleness < 0) throw std::invalid_argument("TrainConfig: staleness must be >= 0");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
  if (warmup_steps < 0) throw std::invalid_argument("TrainConfig: warmup_steps must be >= 0");
  if (global_steps < 1) throw std::invalid_argument("TrainConfig: global_steps must be >= 1");
}

GeneratedBatch StalenessBuffer::pop() {
  if (q_.empty()) throw std::logic_error("StalenessBuffer: pop from empty buffer");
  GeneratedBatch b = std::move(q_.front());
  q_.pop_front();
  return b;
}

void apply_update(PolicyTable& p, const LogitGrad& grad, OptState& opt, double lr,
                  int warmup_steps) {
  ++opt.step;
  const double ramp =
      warmup_steps > 0 ? std::min(1.0, static_cast<double>(opt.step) / warmup_steps) : 1.0;
  const double lr_eff = lr * ramp;

  if (opt.kind == OptimizerKind::Sgd) {
    for (const auto& [ctx, row] : grad.rows)
      for (std::size_t v = 0; v < row.size(); ++v)
        if (row[v] != 0.0) p.add_logit(ctx, static_cast<TokenId>(v), lr_eff * row[v]);
  } else {
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
    for (const auto& [ctx, row] : grad.rows) {
      auto& m = opt.m[ctx];
      auto& v = opt.v[ctx];
      if (m.empty()) m.assign(row.size(), 0.0);
      if (v.empty()) v.assign(row.size(), 0.0);
      for (std::size_t i = 0; i < row.size(); ++i) {
        m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * row[i];
        v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * row[i] * row[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        const double step = lr_eff * mhat / (std::sqrt(vhat) + opt.epsilon);
        if (step != 0.0) p.add_logit(ctx, static_cast<TokenId>(i), step);
      }
    }
  }
  p.bump_version();
}

GeneratedBatch generate_batch(const PolicyTable& policy, const Environment& env,
                              const TrainConfig& cfg, std::uint64_t batch_index,
                              std::int64_t behavior_stamp) {
  GeneratedBatch batch;
  batch.behavior_version = behavior_stamp;
  batch.batch_index = batch_index;
  batch.groups.resize(static_cast<std::size_t>(cfg.prompts_per_batch));

  parallel_for(static_cast<std::size_t>(cfg.prompts_per_batch), cfg.threads, [&](std::size_t i) {
    const std::uint64_t prompt_index =
        batch_index * static_cast<std::uint64_t>(cfg.prompts_per_batch) + i;
    const PromptCase pc = gen_prompt(env, prompt_index);
    RolloutGroup group;
    group.rollouts.resize(static_cast<std::size_t>(cfg.group_size));
    std::vector<double> rewards(static_cast<std::size_t>(cfg.group_size));
    for (int j = 0; j < cfg.group_size; ++j) {
      const std::uint64_t rseed = mix_seed(cfg.seed, batch_index, i, static_cast<std::uint64_t>(j));
      PolicyTable::Sampled s = policy.sample_rollout(pc.prompt, cfg.t_max, rseed);
      Rollout& ro = group.rollouts[static_cast<std::size_t>(j)];
      ro.prompt = pc.prompt;
      ro.response = std::move(s.tokens);
      ro.behavior_logp = std::move(s.logp);
      ro.reward = verify_reward(env, ro.prompt, ro.response);
      ro.behavior_version = behavior_stamp;
      ro.seed = rseed;
      rewards[static_cast<std::size_t>(j)] = ro.reward;
    }
    group.advantages = group_advantages(rewards);
    group.degenerate = true;
    for (double a : group.advantages)
      if (a != 0.0) group.degenerate = false;
    batch.groups[i] = std::move(group);
  });

  double total = 0.0;
  for (const RolloutGroup& g : batch.groups)
    for (const Rollout& r : g.rollouts) total += r.reward;
  batch.mean_reward =
      total / static_cast<double>(cfg.prompts_per_batch * cfg.group_size);
  return batch;
}

TrainResult run_training(const TrainConfig& cfg) {
  cfg.validate();
  const int updates_per_step = cfg.minibatch_count;  // U
  const int groups_per_minibatch = cfg.prompts_per_batch / cfg.minibatch_count;

  TrainResult result;
  result.final_policy = PolicyTable(cfg.env.vocab_size(), cfg.context_len);
  PolicyTable& policy = result.final_policy;

  OptState opt;
  opt.kind = cfg.optimizer;
  opt.beta1 = cfg.adam_beta1;
  opt.beta2 = cfg.adam_beta2;
  opt.epsilon = cfg.adam_epsilon;

  StalenessBuffer buffer;
  std::uint64_t batch_counter = 0;
  // Prefill: staleness+1 batches from the initial parameters, stamped as the
  // versions the steady-state schedule would have produced.
  for (int i = 0; i <= cfg.staleness; ++i) {
    const std::int64_t stamp =
        static_cast<std::int64_t>(i - cfg.staleness) * updates_per_step;
    buffer.push(generate_batch(policy, cfg.env, cfg, batch_counter++, stamp));
  }

  for (int step = 1; step <= cfg.global_steps; ++step) {
    const GeneratedBatch batch = buffer.pop();
    for (int u = 0; u < updates_per_step; ++u) {
      const std::int64_t lag = policy.version() - batch.behavior_version;
      if (lag < static_cast<std::int64_t>(updates_per_step) * cfg.staleness ||
          lag > static_cast<std::int64_t>(updates_per_step) * (cfg.staleness + 1) - 1)
        throw std::logic_error("run_training: staleness lag invariant violated");

      const std::span<const RolloutGroup> minibatch(
          batch.groups.data() + static_cast<std::size_t>(u) * groups_per_minibatch,
          static_cast<std::size_t>(groups_per_minibatch));

      GradAccum acc;
      try {
        acc = objective_gradient(cfg.objective, minibatch, policy);
      } catch (const NumericError& e) {
        result.aborted = true;
        result.abort_step = step;
        result.abort_reason = e.what();
        return result;
      }

      TrainRecord rec;
      rec.global_step = step;
      rec.update_index = u + 1;
      rec.policy_version = policy.version();
      rec.behavior_version = batch.behavior_version;
      rec.mean_reward = batch.mean_reward;
      rec.mean_token_entropy =
          acc.total_token_count == 0 ? 0.0 : acc.sum_token_entropy / acc.total_token_count;
      rec.clip_fraction = acc.clip_fraction();
      rec.mask_fraction = acc.mask_fraction();
      rec.degenerate_group_fraction =
          acc.group_count == 0
              ? 0.0
              : static_cast<double>(acc.degenerate_group_count) / acc.group_count;
      rec.mean_abs_log_ratio =
          acc.total_token_count == 0 ? 0.0 : acc.sum_abs_log_ratio / acc.total_token_count;
      rec.max_abs_log_ratio = acc.max_abs_log_ratio;
      rec.grad_norm = acc.grad.norm();
      result.records.push_back(rec);

      try {
        apply_update(policy, acc.grad, opt, cfg.learning_rate, cfg.warmup_steps);
      } catch (const NumericError& e) {
        result.aborted = true;
        result.abort_step = step;
        result.abort_reason = e.what();
        return result;
      }
    }
    buffer.push(generate_batch(policy, cfg.env, cfg, batch_counter++,
                               static_cast<std::int64_t>(policy.version())));
  }
  return result;
}

double evaluate_pass_at_k(const PolicyTable& p, const Environment& env, int k, int num_prompts,
                          int t_max, std::uint64_t seed) {
  if (k < 1 || num_prompts < 1) throw std::invalid_argument("evaluate_pass_at_k: k and prompts must be >= 1");
  constexpr std::uint64_t kEvalSalt = 0x6576616cULL;  // distinct stream from training
  int solved = 0;
  for (int i = 0; i < num_prompts; ++i) {
    const PromptCase pc = gen_prompt(env, static_cast<std::uint64_t>(i));
    for (int j = 0; j < k; ++j) {
      const std::uint64_t rseed =
          mix_seed(seed ^ kEvalSalt, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j));
      const PolicyTable::Sampled s = p.sample_rollout(pc.prompt, t_max, rseed);
      if (verify_reward(env, pc.prompt, s.tokens) > 0.5) {
        ++solved;
        break;
      }
    }
  }
  return static_cast<double>(solved) / static_cast<double>(num_prompts);
}

}  // namespace minpro
