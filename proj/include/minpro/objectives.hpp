// Copyright (c) 2026 minpro-lab authors
// SPDX-License-Identifier: Apache-2.0
//
// Policy-gradient objectives over mini-batches of rollout groups.
//
// Every objective shares one pipeline: recompute per-token log-probs under
// the current policy, build importance-ratio traces against the stored
// behavior log-probs, derive a per-token gradient coefficient c_t, and
// accumulate c_t * advantage * score into a sparse logit gradient. The
// objectives differ only in how c_t is formed:
//
//   Reinforce     c_t = 1 (on-policy)
//   Grpo          c_t = rho_t, zeroed when the hard-clip gate trips
//   Gspo          c_t = s_i (length-normalized geometric-mean sequence
//                 ratio), the whole sequence zeroed when s_i leaves the
//                 trust region; aggregation is sequence-mean
//   Cispo         c_t = clamp(rho_t) with all tokens kept
//   M2po          c_t = rho_t, masking the largest (log rho)^2 tokens until
//                 their mini-batch mean fits the budget
//   MinPro        c_t = clamp(min_prefix_t * rho_t)
//   PrefixDirect  c_t = clamp(prefix_ratio_t)
//   PrefixFilter  drop the lowest quantile of tokens by prefix ratio, then
//                 proceed as Cispo on the survivors
//   PrefixExact   c_t = prefix_ratio_t, unclipped (verification estimator)
//
// Coefficients are computed once from frozen ratio values and multiply the
// analytic score; nothing differentiates through a coefficient.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "minpro/advantage.hpp"
#include "minpro/policy.hpp"
#include "minpro/ratios.hpp"

namespace minpro {

enum class ObjectiveKind {
  Reinforce,
  Grpo,
  Gspo,
  Cispo,
  M2po,
  MinPro,
  PrefixDirect,
  PrefixFilter,
  PrefixExact,
};

enum class Aggregation {
  TokenMean,  // divide by the total token count of the mini-batch
  SeqMean,    // average of per-sequence token means
};

struct ObjectiveSpec {
  ObjectiveKind kind = ObjectiveKind::Reinforce;
  ClipRange clip;                 // clipping kinds only
  double m2_budget = 0.04;        // M2po only
  double filter_quantile = 0.01;  // PrefixFilter only
  Aggregation aggregation = Aggregation::TokenMean;

  static ObjectiveSpec reinforce(Aggregation agg = Aggregation::TokenMean);
  static ObjectiveSpec grpo(double eps_low = 0.2, double eps_high = 0.28,
                            Aggregation agg = Aggregation::TokenMean);
  static ObjectiveSpec gspo(double eps_low = 2e-3, double eps_high = 2e-3);
  static ObjectiveSpec cispo(double eps_low = 1.0, double eps_high = 4.0,
                             Aggregation agg = Aggregation::TokenMean);
  static ObjectiveSpec m2po(double budget = 0.04, Aggregation agg = Aggregation::TokenMean);
  static ObjectiveSpec minpro(double eps_low = 1.0, double eps_high = 4.0,
                              Aggregation agg = Aggregation::TokenMean);
  static ObjectiveSpec prefix_direct(double eps_low = 1.0, double eps_high = 4.0,
                                     Aggregation agg = Aggregation::TokenMean);
  static ObjectiveSpec prefix_filter(double quantile = 0.01, double eps_low = 1.0,
                                     double eps_high = 4.0,
                                     Aggregation agg = Aggregation::TokenMean);
  static ObjectiveSpec prefix_exact(Aggregation agg = Aggregation::TokenMean);

  bool uses_clip() const;
  /// Throws std::invalid_argument when a kind-specific field is invalid.
  void validate() const;
};

/// Accumulated gradient plus per-update diagnostics.
struct GradAccum {
  LogitGrad grad;
  std::int64_t total_token_count = 0;
  std::int64_t clipped_token_count = 0;  // gate trips (hard) or clamp hits (soft)
  std::int64_t masked_token_count = 0;   // tokens dropped from the sum entirely
  std::int64_t group_count = 0;
  std::int64_t degenerate_group_count = 0;
  double sum_abs_log_ratio = 0.0;
  double max_abs_log_ratio = 0.0;
  double sum_token_entropy = 0.0;

  double clip_fraction() const;
  double mask_fraction() const;
};

/// One token's resolved contribution; exposed for tests and diagnostics.
/// The gradient adds weight() * score(ctx, tok) for every token.
struct TokenWeight {
  int group = 0;
  int rollout = 0;
  int pos = 0;
  std::uint64_t ctx = 0;
  TokenId tok = 0;
  int seq_len = 0;
  double advantage = 0.0;
  double coefficient = 0.0;  // c_t after gating/clamping/masking
  double agg_factor = 0.0;
  double token_ratio = 1.0;
  double prefix_ratio = 1.0;
  double min_prefix = 1.0;
  double log_token_ratio = 0.0;
  bool clipped = false;
  bool masked = false;

  double weight() const { return coefficient * advantage * agg_factor; }
};

/// Deterministic single-pass resolution of every token's coefficient.
/// Throws std::invalid_argument on an empty batch and NumericError (with the
/// offending rollout identified) on a non-finite coefficient or advantage.
std::vector<TokenWeight> compute_token_weights(const ObjectiveSpec& spec,
                                               std::span<const RolloutGroup> batch,
                                               const PolicyTable& current);

/// The objective's parameter-space gradient (ascent direction) and
/// diagnostics. Accumulation order is fixed, so results are bitwise
/// reproducible for identical inputs.
GradAccum objective_gradient(const ObjectiveSpec& spec, std::span<const RolloutGroup> batch,
                             const PolicyTable& current);

/// Scalar surrogate whose gradient in `eval` equals objective_gradient at
/// `frozen`: sum of weight(frozen) * log pi_eval(tok | ctx). Used for the
/// finite-difference checks.
double surrogate_loss(const ObjectiveSpec& spec, std::span<const RolloutGroup> batch,
                      const PolicyTable& frozen, const PolicyTable& eval);

/// Length-normalized geometric-mean sequence ratio exp(mean log rho_t).
double sequence_ratio_geomean(std::span<const double> logp_new, std::span<const double> logp_old);

/// Off-policy correction applied by the verification estimators.
enum class Weighting { PrefixExact, TokenRelaxed, None };

/// Accumulate outer_weight * c_t * token_advantage[t] * score(ctx_t, o_t)
/// for one response, with c_t the chosen correction (no clipping, no batch
/// normalization). Advantages are per token and supplied by the caller; this
/// is the estimator whose expectation the enumeration oracle evaluates.
void accumulate_weighted_score(const PolicyTable& current, std::span<const TokenId> prompt,
                               std::span<const TokenId> response,
                               std::span<const double> behavior_logp,
                               std::span<const double> token_advantage, Weighting weighting,
                               double outer_weight, LogitGrad& out);

}  // namespace minpro
