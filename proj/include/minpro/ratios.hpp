// Copyright (c) 2026 minpro-lab authors
// SPDX-License-Identifier: Apache-2.0
//
// Importance ratios and clipping primitives shared by all objectives.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace minpro {

/// Per-token importance ratios for one rollout.
///
/// token_ratio[t]  = pi_new(o_t) / pi_old(o_t)
/// prefix_ratio[t] = product of token_ratio[0..t], accumulated in log space;
///                   entries may saturate to +inf/0, flagged via `overflow`.
/// min_prefix[t]   = smallest token ratio strictly before position t
///                   (1 at t=0: the minimum over an empty prefix).
struct RatioTrace {
  std::vector<double> token_ratio;
  std::vector<double> prefix_ratio;
  std::vector<double> min_prefix;
  std::vector<double> log_token_ratio;
  bool overflow = false;

  std::size_t size() const { return token_ratio.size(); }
};

/// Build a RatioTrace from new/old per-token log-probabilities.
/// Throws std::invalid_argument on length mismatch, empty input, or
/// non-finite entries. With logp_new == logp_old all vectors are exactly 1.
RatioTrace compute_trace(std::span<const double> logp_new, std::span<const double> logp_old);

/// Clip bounds [1 - eps_low, 1 + eps_high].
struct ClipRange {
  double eps_low = 0.0;
  double eps_high = 0.0;

  double lo() const { return 1.0 - eps_low; }
  double hi() const { return 1.0 + eps_high; }
  /// eps_low in [0, 1], eps_high >= 0, and a non-empty interval.
  bool valid() const;
};

/// min(max(x, lo), hi). The caller treats the result as a gradient constant
/// (stop-gradient semantics); +inf saturates to hi, 0 underflow to lo.
double soft_clip_coeff(double x, const ClipRange& r);

/// Gate of the hard-clipped surrogate min(rho*adv, clip(rho)*adv):
/// true (= clipped, zero gradient) iff the constant branch is selected, i.e.
/// (adv > 0 and rho > hi) or (adv < 0 and rho < lo). adv == 0 gates active.
bool hard_clip_is_clipped(double rho, double adv, const ClipRange& r);

}  // namespace minpro
