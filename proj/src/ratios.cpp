// Copyright (c) 2026 minpro-lab authors
// SPDX-License-Identifier: Apache-2.0

#include "minpro/ratios.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace minpro {

RatioTrace compute_trace(std::span<const double> logp_new, std::span<const double> logp_old) {
  if (logp_new.size() != logp_old.size())
    throw std::invalid_argument("compute_trace: length mismatch");
  if (logp_new.empty()) throw std::invalid_argument("compute_trace: empty input");

  const std::size_t n = logp_new.size();
  RatioTrace tr;
  tr.token_ratio.resize(n);
  tr.prefix_ratio.resize(n);
  tr.min_prefix.resize(n);
  tr.log_token_ratio.resize(n);

  double log_cum = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    if (!std::isfinite(logp_new[t]) || !std::isfinite(logp_old[t]))
      throw std::invalid_argument("compute_trace: non-finite log-probability");
    const double d = logp_new[t] - logp_old[t];
    tr.log_token_ratio[t] = d;
    tr.token_ratio[t] = d == 0.0 ? 1.0 : std::exp(d);
    log_cum += d;
    const double pref = log_cum == 0.0 ? 1.0 : std::exp(log_cum);
    tr.prefix_ratio[t] = pref;
    if (!std::isfinite(pref) || pref == 0.0) tr.overflow = true;
    // min over strictly earlier positions; empty min is 1.
    tr.min_prefix[t] = t == 0 ? 1.0 : (t == 1 ? tr.token_ratio[0]
                                              : std::min(tr.min_prefix[t - 1], tr.token_ratio[t - 1]));
  }
  return tr;
}

bool ClipRange::valid() const {
  return eps_low >= 0.0 && eps_low <= 1.0 && eps_high >= 0.0 && lo() < hi();
}

double soft_clip_coeff(double x, const ClipRange& r) {
  return std::min(std::max(x, r.lo()), r.hi());
}

bool hard_clip_is_clipped(double rho, double adv, const ClipRange& r) {
  if (adv > 0.0) return rho > r.hi();
  if (adv < 0.0) return rho < r.lo();
  return false;
}

}  // namespace minpro
