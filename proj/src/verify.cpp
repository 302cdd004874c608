// Copyright (c) 2026 minpro-lab authors
// SPDX-License-Identifier: Apache-2.0

#include "minpro/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "minpro/oracle.hpp"
#include "minpro/objectives.hpp"

namespace minpro {

// ===== randomized fixtures =====

namespace {

void visit_reachable(const PolicyTable& p, std::span<const TokenId> prompt, int t_max,
                     const std::function<void(std::uint64_t)>& fn) {
  std::vector<std::uint64_t> frontier = {p.context_from_prompt(prompt)};
  std::vector<std::uint64_t> seen;
  for (int depth = 0; depth < t_max && !frontier.empty(); ++depth) {
    std::vector<std::uint64_t> next;
    for (std::uint64_t ctx : frontier) {
      if (std::find(seen.begin(), seen.end(), ctx) != seen.end()) continue;
      seen.push_back(ctx);
      fn(ctx);
      if (depth + 1 == t_max) continue;
      for (TokenId v = 0; v < p.vocab_size(); ++v)
        if (v != p.eos()) next.push_back(p.context_advance(ctx, v));
    }
    frontier = std::move(next);
  }
}

}  // namespace

PolicyTable make_random_policy(int vocab, int context_len, std::span<const TokenId> prompt,
                               int t_max, std::uint64_t seed, double scale) {
  PolicyTable p(vocab, context_len);
  perturb_reachable(p, prompt, t_max, seed, scale);
  return p;
}

void perturb_reachable(PolicyTable& p, std::span<const TokenId> prompt, int t_max,
                       std::uint64_t seed, double scale) {
  visit_reachable(p, prompt, t_max, [&](std::uint64_t ctx) {
    for (TokenId v = 0; v < p.vocab_size(); ++v) {
      const double u = uniform_unit(mix_seed(seed, ctx, static_cast<std::uint64_t>(v)));
      p.add_logit(ctx, v, scale * (2.0 * u - 1.0));
    }
  });
}

std::vector<RolloutGroup> sample_batch(const PolicyTable& behavior, const Environment& env,
                                       int groups, int group_size, int t_max, std::uint64_t seed,
                                       std::uint64_t prompt_offset) {
  std::vector<RolloutGroup> batch;
  for (int g = 0; g < groups; ++g) {
    const PromptCase pc = gen_prompt(env, prompt_offset + static_cast<std::uint64_t>(g));
    RolloutGroup group;
    std::vector<double> rewards;
    for (int j = 0; j < group_size; ++j) {
      const std::uint64_t rseed = mix_seed(seed, static_cast<std::uint64_t>(g), static_cast<std::uint64_t>(j));
      PolicyTable::Sampled s = behavior.sample_rollout(pc.prompt, t_max, rseed);
      Rollout ro;
      ro.prompt = pc.prompt;
      ro.response = std::move(s.tokens);
      ro.behavior_logp = std::move(s.logp);
      ro.reward = verify_reward(env, ro.prompt, ro.response);
      ro.behavior_version = behavior.version();
      ro.seed = rseed;
      rewards.push_back(ro.reward);
      group.rollouts.push_back(std::move(ro));
    }
    group.advantages = group_advantages(rewards);
    group.degenerate = std::all_of(group.advantages.begin(), group.advantages.end(),
                                   [](double a) { return a == 0.0; });
    batch.push_back(std::move(group));
  }
  return batch;
}

// ===== checks =====

namespace {

CheckResult below(std::string name, double measured, double threshold, std::string detail = "") {
  return {std::move(name), measured < threshold, measured, threshold, true, std::move(detail)};
}

CheckResult above(std::string name, double measured, double threshold, std::string detail = "") {
  return {std::move(name), measured > threshold, measured, threshold, false, std::move(detail)};
}

// Gradient-identity checks on 50 random tabular policies: the direct
// enumeration gradient, the advantage-form gradient, and central finite
// differences of the expected reward must coincide.
void check_policy_gradient_identities(const VerifyOptions& opts, std::vector<CheckResult>& out) {
  double worst_pair = 0.0, worst_fd = 0.0;
  for (int i = 0; i < 50; ++i) {
    const std::uint64_t s = mix_seed(opts.seed, 0x11, static_cast<std::uint64_t>(i));
    const int vocab = 2 + static_cast<int>(s % 2);
    const int t_max = 1 + static_cast<int>(splitmix64(s) % 3);
    const Environment env = Environment::echo(vocab, s);
    const PromptCase pc = gen_prompt(env, static_cast<std::uint64_t>(i));
    const PolicyTable p = make_random_policy(vocab, 1, pc.prompt, t_max, s, 1.0);
    const oracle::RewardFn reward = oracle::env_reward(env, pc.prompt);

    const LogitGrad direct = oracle::exact_grad_J(p, pc.prompt, t_max, reward);
    LogitGrad advform = oracle::advantage_form_grad(p, pc.prompt, t_max, reward);
    if (opts.corrupt_score && !advform.rows.empty()) advform.rows.begin()->second[0] += 0.01;
    worst_pair = std::max(worst_pair, grad_rel_err(direct, advform));

    const double fd_err = oracle::finite_diff_max_rel_err(
        [&](const PolicyTable& q) { return oracle::exact_grad_J(q, pc.prompt, t_max, reward); },
        [&](const PolicyTable& q) { return oracle::expected_reward(q, pc.prompt, t_max, reward); },
        p);
    worst_fd = std::max(worst_fd, fd_err);
  }
  out.push_back(below("policy_gradient.direct_vs_advantage_form", worst_pair, 1e-10, "50 random policies"));
  out.push_back(below("policy_gradient.vs_finite_difference", worst_fd, 1e-6, "50 random policies"));
}

// Exact expectation of the prefix-weighted estimator under the old policy
// must equal the exact gradient of the new policy.
void check_off_policy_unbiasedness(const VerifyOptions& opts, std::vector<CheckResult>& out) {
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const std::uint64_t s = mix_seed(opts.seed, 0x22, static_cast<std::uint64_t>(i));
    const int vocab = 2 + static_cast<int>(s % 2);
    const int t_max = 1 + static_cast<int>(splitmix64(s) % 3);
    const Environment env = Environment::echo(vocab, s);
    const PromptCase pc = gen_prompt(env, static_cast<std::uint64_t>(i));
    const PolicyTable p_new = make_random_policy(vocab, 1, pc.prompt, t_max, s ^ 1, 1.0);
    const PolicyTable p_old = make_random_policy(vocab, 1, pc.prompt, t_max, s ^ 2, 1.0);
    const oracle::RewardFn reward = oracle::env_reward(env, pc.prompt);

    const LogitGrad expect = oracle::estimator_expectation(Weighting::PrefixExact, p_new, p_old,
                                                           pc.prompt, t_max, reward);
    const LogitGrad exact = oracle::exact_grad_J(p_new, pc.prompt, t_max, reward);
    worst = std::max(worst, grad_rel_err(expect, exact));
  }
  out.push_back(below("off_policy.prefix_weighting_unbiased", worst, 1e-8, "50 random policy pairs"));
}

// Token-level relaxation on the pinned mismatched pair: measurably biased
// off-policy, exact on-policy; the measured bias is held to its frozen
// reference value.
void check_token_relaxation(std::vector<CheckResult>& out) {
  const int vocab = 3, t_max = 3;
  const Environment env = Environment::echo(vocab, 7);
  const std::vector<TokenId> prompt = {0};
  const PolicyTable p_old(vocab, 1);  // uniform
  PolicyTable p_new(vocab, 1);
  p_new.add_logit(p_new.context_from_prompt(prompt), 0, 2.0);
  const oracle::RewardFn reward = oracle::env_reward(env, prompt);

  const LogitGrad exact = oracle::exact_grad_J(p_new, prompt, t_max, reward);
  const LogitGrad relaxed = oracle::estimator_expectation(Weighting::TokenRelaxed, p_new, p_old,
                                                          prompt, t_max, reward);
  const double bias = grad_distance(relaxed, exact) / std::max(exact.norm(), 1e-300);
  out.push_back(above("token_relaxed.bias_off_policy", bias, 1e-3, "pinned mismatched pair"));
  out.push_back(below("token_relaxed.regression_match",
                      std::fabs(bias - kTokenRelaxedBiasReference) /
                          std::max(kTokenRelaxedBiasReference, 1e-300),
                      1e-6, "vs frozen reference"));

  const LogitGrad on_policy = oracle::estimator_expectation(Weighting::TokenRelaxed, p_new, p_new,
                                                            prompt, t_max, reward);
  out.push_back(below("token_relaxed.exact_on_policy", grad_rel_err(on_policy, exact), 1e-10));
}

// Score-function baseline invariance, plus a token-dependent negative
// control that must NOT vanish.
void check_baseline_invariance(const VerifyOptions& opts, std::vector<CheckResult>& out) {
  const int vocab = 3, t_max = 3;
  const Environment env = Environment::echo(vocab, 11);
  const PromptCase pc = gen_prompt(env, 0);
  const PolicyTable p = make_random_policy(vocab, 1, pc.prompt, t_max, opts.seed ^ 0x33, 1.0);

  const double const_norm = oracle::baseline_invariance_check(
      p, pc.prompt, t_max, [](std::span<const TokenId>, TokenId) { return 1.0; });
  out.push_back(below("baseline_invariance.constant", const_norm, 1e-10));

  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::uint64_t salt = mix_seed(opts.seed, 0x44, static_cast<std::uint64_t>(trial));
    const auto b = [salt](std::span<const TokenId> prefix, TokenId) {
      std::uint64_t h = salt;
      for (TokenId t : prefix) h = mix_seed(h, static_cast<std::uint64_t>(t) + 1);
      return 2.0 * uniform_unit(h);
    };
    worst = std::max(worst, oracle::baseline_invariance_check(p, pc.prompt, t_max, b));
  }
  out.push_back(below("baseline_invariance.random_prefix", worst, 1e-10, "20 random baselines"));

  const double control = oracle::baseline_invariance_check(
      p, pc.prompt, t_max,
      [](std::span<const TokenId>, TokenId v) { return v == 0 ? 1.5 : 0.25; });
  out.push_back(above("baseline_invariance.token_control", control, 1e-3, "negative control"));
}

// With current == behavior, every token-ratio objective must reproduce the
// plain advantage-weighted gradient.
void check_onpolicy_collapse(const VerifyOptions& opts, std::vector<CheckResult>& out) {
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const std::uint64_t s = mix_seed(opts.seed, 0x55, static_cast<std::uint64_t>(i));
    const Environment env = Environment::echo(3, s);
    const PromptCase pc = gen_prompt(env, 0);
    const PolicyTable p = make_random_policy(3, 1, pc.prompt, 5, s, 1.0);
    const std::vector<RolloutGroup> batch = sample_batch(p, env, 2, 4, 5, s ^ 0xbeef);

    const LogitGrad ref = objective_gradient(ObjectiveSpec::reinforce(), batch, p).grad;
    for (const ObjectiveSpec& spec :
         {ObjectiveSpec::grpo(), ObjectiveSpec::cispo(), ObjectiveSpec::minpro(),
          ObjectiveSpec::prefix_direct()}) {
      const LogitGrad g = objective_gradient(spec, batch, p).grad;
      worst = std::max(worst, grad_rel_err(g, ref, 1e-300));
    }
  }
  out.push_back(below("objectives.on_policy_collapse", worst, 1e-12, "20 random batches"));
}

// Frozen-coefficient surrogate of every objective against central finite
// differences, evaluated off-policy.
void check_objective_finite_diff(const VerifyOptions& opts, std::vector<CheckResult>& out) {
  const std::vector<std::pair<const char*, ObjectiveSpec>> kinds = {
      {"reinforce", ObjectiveSpec::reinforce()},
      {"grpo", ObjectiveSpec::grpo()},
      {"gspo", ObjectiveSpec::gspo(0.5, 0.5)},  // wide enough to keep sequences active
      {"cispo", ObjectiveSpec::cispo()},
      {"m2po", ObjectiveSpec::m2po()},
      {"minpro", ObjectiveSpec::minpro()},
      {"prefix_direct", ObjectiveSpec::prefix_direct()},
      {"prefix_filter", ObjectiveSpec::prefix_filter()},
      {"prefix_exact", ObjectiveSpec::prefix_exact()},
  };
  double worst = 0.0;
  std::string worst_kind = "-";
  for (int i = 0; i < 20; ++i) {
    const std::uint64_t s = mix_seed(opts.seed, 0x66, static_cast<std::uint64_t>(i));
    const Environment env = Environment::echo(3, s);
    const PromptCase pc = gen_prompt(env, static_cast<std::uint64_t>(i));
    const PolicyTable behavior = make_random_policy(3, 1, pc.prompt, 5, s, 1.0);
    const std::vector<RolloutGroup> batch = sample_batch(behavior, env, 2, 4, 5, s ^ 0xfeed);
    PolicyTable current = behavior;
    perturb_reachable(current, pc.prompt, 5, s ^ 0x77, 0.4);

    for (const auto& [name, spec] : kinds) {
      const auto& sp = spec;
      const double err = oracle::finite_diff_max_rel_err(
          [&](const PolicyTable& q) { return objective_gradient(sp, batch, q).grad; },
          [&](const PolicyTable& q) { return surrogate_loss(sp, batch, current, q); }, current);
      if (err > worst) {
        worst = err;
        worst_kind = name;
      }
    }
  }
  out.push_back(below("objectives.finite_difference", worst, 1e-5,
                      "20 random batches x 9 objectives, worst: " + worst_kind));
}

}  // namespace

std::vector<CheckResult> run_oracle_suite(const VerifyOptions& opts) {
  std::vector<CheckResult> out;
  check_policy_gradient_identities(opts, out);
  check_off_policy_unbiasedness(opts, out);
  check_token_relaxation(out);
  check_baseline_invariance(opts, out);
  check_onpolicy_collapse(opts, out);
  check_objective_finite_diff(opts, out);
  return out;
}

bool all_passed(std::span<const CheckResult> results) {
  return std::all_of(results.begin(), results.end(),
                     [](const CheckResult& r) { return r.passed; });
}

std::string format_results(std::span<const CheckResult> results) {
  std::ostringstream out;
  for (const CheckResult& r : results) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "[%s] %-42s %c %.3g  (measured %.12g)%s%s\n",
                  r.passed ? "PASS" : "FAIL", r.name.c_str(), r.want_below ? '<' : '>',
                  r.threshold, r.measured, r.detail.empty() ? "" : "  -- ",
                  r.detail.c_str());
    out << buf;
  }
  return out.str();
}

}  // namespace minpro
