// Copyright (c) 2026 minpro-lab authors
// SPDX-License-Identifier: Apache-2.0
//
// Exact ground-truth machinery for small policies: exhaustive enumeration of
// the response distribution, the exact objective gradient, exact Q/V/A
// values by backward induction, exact expectations of the off-policy
// estimators, baseline-invariance sums, and a central finite-difference
// checker. Everything here is the reference the estimators are tested
// against; nothing here is used by training.

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "minpro/advantage.hpp"
#include "minpro/envs.hpp"
#include "minpro/objectives.hpp"
#include "minpro/policy.hpp"

namespace minpro::oracle {

/// Terminal reward over a complete response. Rewards are terminal-only: the
/// per-step reward is zero before the last token.
using RewardFn = std::function<double(std::span<const TokenId>)>;

/// RewardFn bound to an environment and prompt.
RewardFn env_reward(const Environment& env, std::vector<TokenId> prompt);

struct SequenceOutcome {
  std::vector<TokenId> response;  // ends at EOS or at t_max tokens
  double prob = 0.0;
  double logp = 0.0;
  double reward = 0.0;
};

/// All responses the policy can generate from `prompt`: every sequence that
/// stops at its first EOS or at t_max tokens, in depth-first token order.
/// Probabilities sum to 1 within 1e-10. Throws CapacityError when
/// vocab^t_max would exceed 1e6 leaves.
std::vector<SequenceOutcome> enumerate_sequences(const PolicyTable& p,
                                                 std::span<const TokenId> prompt, int t_max,
                                                 const RewardFn& reward);
std::vector<SequenceOutcome> enumerate_sequences(const PolicyTable& p, const Environment& env,
                                                 std::span<const TokenId> prompt, int t_max);

/// sum_o p(o) R(o).
double expected_reward(const PolicyTable& p, std::span<const TokenId> prompt, int t_max,
                       const RewardFn& reward);
double expected_reward(const PolicyTable& p, const Environment& env,
                       std::span<const TokenId> prompt, int t_max);

/// The exact objective gradient sum_o p(o) R(o) grad log p(o), the reference
/// every estimator is compared against.
LogitGrad exact_grad_J(const PolicyTable& p, std::span<const TokenId> prompt, int t_max,
                       const RewardFn& reward);
LogitGrad exact_grad_J(const PolicyTable& p, const Environment& env,
                       std::span<const TokenId> prompt, int t_max);

/// Exact Q, V, and A = Q - V for every reachable prefix, by backward
/// induction over the enumeration tree. A prefix is the response-so-far;
/// Q(prefix, v) is the expected final reward after emitting v.
class ExactCritic {
 public:
  ExactCritic(const PolicyTable& p, std::span<const TokenId> prompt, int t_max,
              const RewardFn& reward);

  double value(std::span<const TokenId> prefix) const;
  double qvalue(std::span<const TokenId> prefix, TokenId v) const;
  double advantage(std::span<const TokenId> prefix, TokenId v) const;

  /// Non-terminal prefixes with their reach probabilities, in enumeration
  /// order (used by the invariant checks and the advantage-form gradient).
  const std::vector<std::pair<std::vector<TokenId>, double>>& prefixes() const {
    return prefixes_;
  }

 private:
  double build(std::vector<TokenId>& prefix, std::uint64_t ctx, double reach_prob, int t_max);
  std::uint64_t prefix_key(std::span<const TokenId> prefix) const;

  const PolicyTable& p_;
  std::vector<TokenId> prompt_;
  RewardFn reward_;
  std::uint64_t base_;
  std::unordered_map<std::uint64_t, double> value_;
  std::unordered_map<std::uint64_t, std::vector<double>> q_;
  std::vector<std::pair<std::vector<TokenId>, double>> prefixes_;
};

/// The advantage form of the exact gradient: sum over reachable non-terminal
/// prefixes of P(prefix) * sum_v pi(v|prefix) score(ctx, v) A(prefix, v).
/// Agrees with exact_grad_J up to rounding; the two are computed by
/// independent routes.
LogitGrad advantage_form_grad(const PolicyTable& p, std::span<const TokenId> prompt, int t_max,
                              const RewardFn& reward);

/// Exact expectation, under p_old's sequence distribution, of the weighted
/// score estimator with per-token advantages taken from p_new's exact
/// critic. With Weighting::PrefixExact this equals exact_grad_J(p_new) for
/// any (p_new, p_old) pair; with Weighting::TokenRelaxed it is biased unless
/// the policies coincide.
LogitGrad estimator_expectation(Weighting weighting, const PolicyTable& p_new,
                                const PolicyTable& p_old, std::span<const TokenId> prompt,
                                int t_max, const RewardFn& reward);
LogitGrad estimator_expectation(Weighting weighting, const PolicyTable& p_new,
                                const PolicyTable& p_old, const Environment& env,
                                std::span<const TokenId> prompt, int t_max);

/// Baseline callback: may inspect the prefix and (for negative controls) the
/// candidate token.
using BaselineFn = std::function<double(std::span<const TokenId> prefix, TokenId v)>;

/// || sum over reachable prefixes P(prefix) sum_v pi(v) score(ctx, v) b ||.
/// Vanishes (up to rounding) whenever b ignores the current token.
double baseline_invariance_check(const PolicyTable& p, std::span<const TokenId> prompt, int t_max,
                                 const BaselineFn& b);

/// Central finite differences of loss_fn over every stored or touched logit,
/// compared against grad_fn(p). Returns the worst absolute deviation
/// relative to the largest gradient entry (absolute floor 1e-8).
double finite_diff_max_rel_err(const std::function<LogitGrad(const PolicyTable&)>& grad_fn,
                               const std::function<double(const PolicyTable&)>& loss_fn,
                               const PolicyTable& p, double h = 1e-5);

}  // namespace minpro::oracle
