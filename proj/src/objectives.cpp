// Copyright (c) 2026 minpro-lab authors
// SPDX-License-Identifier: Apache-2.0

#include "minpro/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace minpro {

// ===== ObjectiveSpec =====

ObjectiveSpec ObjectiveSpec::reinforce(Aggregation agg) {
  ObjectiveSpec s;
  s.kind = ObjectiveKind::Reinforce;
  s.aggregation = agg;
  return s;
}

ObjectiveSpec ObjectiveSpec::grpo(double eps_low, double eps_high, Aggregation agg) {
  ObjectiveSpec s;
  s.kind = ObjectiveKind::Grpo;
  s.clip = {eps_low, eps_high};
  s.aggregation = agg;
  s.validate();
  return s;
}

ObjectiveSpec ObjectiveSpec::gspo(double eps_low, double eps_high) {
  ObjectiveSpec s;
  s.kind = ObjectiveKind::Gspo;
  s.clip = {eps_low, eps_high};
  s.aggregation = Aggregation::SeqMean;  // sequence-level objective
  s.validate();
  return s;
}

ObjectiveSpec ObjectiveSpec::cispo(double eps_low, double eps_high, Aggregation agg) {
  ObjectiveSpec s;
  s.kind = ObjectiveKind::Cispo;
  s.clip = {eps_low, eps_high};
  s.aggregation = agg;
  s.validate();
  return s;
}

ObjectiveSpec ObjectiveSpec::m2po(double budget, Aggregation agg) {
  ObjectiveSpec s;
  s.kind = ObjectiveKind::M2po;
  s.m2_budget = budget;
  s.aggregation = agg;
  s.validate();
  return s;
}

ObjectiveSpec ObjectiveSpec::minpro(double eps_low, double eps_high, Aggregation agg) {
  ObjectiveSpec s;
  s.kind = ObjectiveKind::MinPro;
  s.clip = {eps_low, eps_high};
  s.aggregation = agg;
  s.validate();
  return s;
}

ObjectiveSpec ObjectiveSpec::prefix_direct(double eps_low, double eps_high, Aggregation agg) {
  ObjectiveSpec s;
  s.kind = ObjectiveKind::PrefixDirect;
  s.clip = {eps_low, eps_high};
  s.aggregation = agg;
  s.validate();
  return s;
}

ObjectiveSpec ObjectiveSpec::prefix_filter(double quantile, double eps_low, double eps_high,
                                           Aggregation agg) {
  ObjectiveSpec s;
  s.kind = ObjectiveKind::PrefixFilter;
  s.filter_quantile = quantile;
  s.clip = {eps_low, eps_high};
  s.aggregation = agg;
  s.validate();
  return s;
}

ObjectiveSpec ObjectiveSpec::prefix_exact(Aggregation agg) {
  ObjectiveSpec s;
  s.kind = ObjectiveKind::PrefixExact;
  s.aggregation = agg;
  return s;
}

bool ObjectiveSpec::uses_clip() const {
  switch (kind) {
    case ObjectiveKind::Grpo:
    case ObjectiveKind::Gspo:
    case ObjectiveKind::Cispo:
    case ObjectiveKind::MinPro:
    case ObjectiveKind::PrefixDirect:
    case ObjectiveKind::PrefixFilter:
      return true;
    default:
      return false;
  }
}

void ObjectiveSpec::validate() const {
  if (uses_clip() && !clip.valid())
    throw std::invalid_argument("ObjectiveSpec: invalid clip range");
  if (kind == ObjectiveKind::M2po && !(m2_budget >= 0.0))
    throw std::invalid_argument("ObjectiveSpec: m2_budget must be >= 0");
  if (kind == ObjectiveKind::PrefixFilter &&
      !(filter_quantile >= 0.0 && filter_quantile < 1.0))
    throw std::invalid_argument("ObjectiveSpec: filter_quantile must be in [0, 1)");
}

double GradAccum::clip_fraction() const {
  return total_token_count == 0
             ? 0.0
             : static_cast<double>(clipped_token_count) / static_cast<double>(total_token_count);
}

double GradAccum::mask_fraction() const {
  return total_token_count == 0
             ? 0.0
             : static_cast<double>(masked_token_count) / static_cast<double>(total_token_count);
}

// ===== shared engine =====

namespace {

// Memoized per-context log-softmax / softmax; one instance per engine call.
class DistCache {
 public:
  explicit DistCache(const PolicyTable& p) : p_(p) {}

  struct Entry {
    std::vector<double> logp;
    std::vector<double> prob;
    double entropy = 0.0;
  };

  const Entry& get(std::uint64_t ctx) {
    auto it = cache_.find(ctx);
    if (it != cache_.end()) return it->second;
    Entry e;
    e.logp = p_.log_distribution(ctx);
    e.prob.resize(e.logp.size());
    double h = 0.0;
    for (std::size_t v = 0; v < e.logp.size(); ++v) {
      e.prob[v] = std::exp(e.logp[v]);
      h -= e.prob[v] * e.logp[v];
    }
    e.entropy = std::max(h, 0.0);
    return cache_.emplace(ctx, std::move(e)).first->second;
  }

 private:
  const PolicyTable& p_;
  std::unordered_map<std::uint64_t, Entry> cache_;
};

[[noreturn]] void throw_numeric(const char* what, int g, int r, const Rollout& ro) {
  throw NumericError(std::string(what) + " (group " + std::to_string(g) + ", rollout " +
                         std::to_string(r) + ", seed " + std::to_string(ro.seed) + ")",
                     g, r, ro.seed);
}

struct FlatBatch {
  std::vector<TokenWeight> tokens;
  std::int64_t total_tokens = 0;
  int sequences = 0;
};

// Walk every rollout once: contexts, current log-probs, ratio traces, raw
// per-token records. Coefficients start at the kind's pre-mask value.
FlatBatch flatten(const ObjectiveSpec& spec, std::span<const RolloutGroup> batch,
                  const PolicyTable& current, DistCache& cache) {
  FlatBatch flat;
  for (std::size_t gi = 0; gi < batch.size(); ++gi) {
    const RolloutGroup& group = batch[gi];
    if (group.rollouts.size() != group.advantages.size())
      throw std::invalid_argument("objective_gradient: group advantages size mismatch");
    for (std::size_t ri = 0; ri < group.rollouts.size(); ++ri) {
      const Rollout& ro = group.rollouts[ri];
      if (ro.response.empty()) throw std::invalid_argument("objective_gradient: empty response");
      if (ro.behavior_logp.size() != ro.response.size())
        throw std::invalid_argument("objective_gradient: behavior_logp length mismatch");
      const double adv = group.advantages[ri];
      if (!std::isfinite(adv))
        throw_numeric("objective_gradient: non-finite advantage", static_cast<int>(gi),
                      static_cast<int>(ri), ro);

      std::vector<double> logp_new(ro.response.size());
      std::uint64_t ctx = current.context_from_prompt(ro.prompt);
      std::vector<std::uint64_t> ctxs(ro.response.size());
      for (std::size_t t = 0; t < ro.response.size(); ++t) {
        ctxs[t] = ctx;
        logp_new[t] = cache.get(ctx).logp[static_cast<std::size_t>(ro.response[t])];
        if (t + 1 < ro.response.size()) ctx = current.context_advance(ctx, ro.response[t]);
      }
      const RatioTrace trace = compute_trace(logp_new, ro.behavior_logp);

      const double seq_ratio =
          spec.kind == ObjectiveKind::Gspo
              ? std::exp(std::accumulate(trace.log_token_ratio.begin(),
                                         trace.log_token_ratio.end(), 0.0) /
                         static_cast<double>(trace.size()))
              : 0.0;
      const bool seq_clipped = spec.kind == ObjectiveKind::Gspo &&
                               hard_clip_is_clipped(seq_ratio, adv, spec.clip);

      for (std::size_t t = 0; t < ro.response.size(); ++t) {
        TokenWeight w;
        w.group = static_cast<int>(gi);
        w.rollout = static_cast<int>(ri);
        w.pos = static_cast<int>(t);
        w.ctx = ctxs[t];
        w.tok = ro.response[t];
        w.seq_len = static_cast<int>(ro.response.size());
        w.advantage = adv;
        w.token_ratio = trace.token_ratio[t];
        w.prefix_ratio = trace.prefix_ratio[t];
        w.min_prefix = trace.min_prefix[t];
        w.log_token_ratio = trace.log_token_ratio[t];

        switch (spec.kind) {
          case ObjectiveKind::Reinforce:
            w.coefficient = 1.0;
            break;
          case ObjectiveKind::Grpo:
            if (hard_clip_is_clipped(w.token_ratio, adv, spec.clip)) {
              w.coefficient = 0.0;
              w.clipped = true;
            } else {
              w.coefficient = w.token_ratio;
            }
            break;
          case ObjectiveKind::Gspo:
            if (seq_clipped) {
              w.coefficient = 0.0;
              w.clipped = true;
            } else {
              w.coefficient = seq_ratio;
            }
            break;
          case ObjectiveKind::Cispo:
            w.coefficient = soft_clip_coeff(w.token_ratio, spec.clip);
            w.clipped = w.token_ratio < spec.clip.lo() || w.token_ratio > spec.clip.hi();
            break;
          case ObjectiveKind::MinPro: {
            const double x = w.min_prefix * w.token_ratio;
            w.coefficient = soft_clip_coeff(x, spec.clip);
            w.clipped = x < spec.clip.lo() || x > spec.clip.hi();
            break;
          }
          case ObjectiveKind::PrefixDirect:
            w.coefficient = soft_clip_coeff(w.prefix_ratio, spec.clip);
            w.clipped = w.prefix_ratio < spec.clip.lo() || w.prefix_ratio > spec.clip.hi();
            break;
          case ObjectiveKind::PrefixFilter:
            // clamp now; the quantile mask is applied batch-wide below
            w.coefficient = soft_clip_coeff(w.token_ratio, spec.clip);
            w.clipped = w.token_ratio < spec.clip.lo() || w.token_ratio > spec.clip.hi();
            break;
          case ObjectiveKind::M2po:
            w.coefficient = w.token_ratio;  // masked below
            break;
          case ObjectiveKind::PrefixExact:
            w.coefficient = w.prefix_ratio;
            break;
        }
        flat.tokens.push_back(w);
      }
      flat.total_tokens += static_cast<std::int64_t>(ro.response.size());
      ++flat.sequences;
    }
  }
  return flat;
}

// Greedy second-moment mask: remove the largest (log rho)^2 tokens until the
// mean over the remainder fits the budget.
void apply_m2_mask(std::vector<TokenWeight>& tokens, double budget) {
  std::vector<std::size_t> order(tokens.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return tokens[a].log_token_ratio * tokens[a].log_token_ratio >
           tokens[b].log_token_ratio * tokens[b].log_token_ratio;
  });
  double sum_sq = 0.0;
  for (const TokenWeight& w : tokens) sum_sq += w.log_token_ratio * w.log_token_ratio;
  std::size_t kept = tokens.size();
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (kept == 0 || sum_sq <= budget * static_cast<double>(kept)) break;
    TokenWeight& w = tokens[order[i]];
    sum_sq -= w.log_token_ratio * w.log_token_ratio;
    --kept;
    w.masked = true;
    w.coefficient = 0.0;
  }
}

// Drop the lowest floor(quantile * count) tokens by prefix ratio; ties break
// toward earlier positions (flattening order is position-ascending already,
// so a stable sort does the right thing).
void apply_prefix_filter(std::vector<TokenWeight>& tokens, double quantile) {
  const std::size_t drop =
      static_cast<std::size_t>(quantile * static_cast<double>(tokens.size()));
  if (drop == 0) return;
  std::vector<std::size_t> order(tokens.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return tokens[a].prefix_ratio < tokens[b].prefix_ratio;
  });
  for (std::size_t i = 0; i < drop; ++i) {
    TokenWeight& w = tokens[order[i]];
    w.masked = true;
    w.clipped = false;  // dropped tokens no longer count as clamped
    w.coefficient = 0.0;
  }
}

void apply_aggregation(const ObjectiveSpec& spec, FlatBatch& flat) {
  for (TokenWeight& w : flat.tokens) {
    w.agg_factor = spec.aggregation == Aggregation::TokenMean
                       ? 1.0 / static_cast<double>(flat.total_tokens)
                       : 1.0 / (static_cast<double>(flat.sequences) *
                                static_cast<double>(w.seq_len));
  }
}

}  // namespace

std::vector<TokenWeight> compute_token_weights(const ObjectiveSpec& spec,
                                               std::span<const RolloutGroup> batch,
                                               const PolicyTable& current) {
  spec.validate();
  if (batch.empty()) throw std::invalid_argument("objective_gradient: empty batch");
  DistCache cache(current);
  FlatBatch flat = flatten(spec, batch, current, cache);
  if (spec.kind == ObjectiveKind::M2po) apply_m2_mask(flat.tokens, spec.m2_budget);
  if (spec.kind == ObjectiveKind::PrefixFilter) apply_prefix_filter(flat.tokens, spec.filter_quantile);
  apply_aggregation(spec, flat);
  // Masks may legitimately zero out tokens whose raw ratio overflowed, so
  // the finite check runs on the post-mask coefficients.
  for (const TokenWeight& w : flat.tokens) {
    if (!std::isfinite(w.coefficient))
      throw_numeric("objective_gradient: non-finite coefficient", w.group, w.rollout,
                    batch[static_cast<std::size_t>(w.group)]
                        .rollouts[static_cast<std::size_t>(w.rollout)]);
  }
  return std::move(flat.tokens);
}

GradAccum objective_gradient(const ObjectiveSpec& spec, std::span<const RolloutGroup> batch,
                             const PolicyTable& current) {
  const std::vector<TokenWeight> tokens = compute_token_weights(spec, batch, current);
  DistCache cache(current);

  GradAccum acc;
  acc.group_count = static_cast<std::int64_t>(batch.size());
  for (const RolloutGroup& g : batch)
    if (g.degenerate) ++acc.degenerate_group_count;

  const int vocab = current.vocab_size();
  for (const TokenWeight& w : tokens) {
    ++acc.total_token_count;
    if (w.clipped) ++acc.clipped_token_count;
    if (w.masked) ++acc.masked_token_count;
    const double abs_lr = std::fabs(w.log_token_ratio);
    acc.sum_abs_log_ratio += abs_lr;
    acc.max_abs_log_ratio = std::max(acc.max_abs_log_ratio, abs_lr);
    const DistCache::Entry& e = cache.get(w.ctx);
    acc.sum_token_entropy += e.entropy;

    const double weight = w.weight();
    if (weight == 0.0) continue;
    auto& row = acc.grad.row(w.ctx, vocab);
    for (int v = 0; v < vocab; ++v) row[static_cast<std::size_t>(v)] -= weight * e.prob[static_cast<std::size_t>(v)];
    row[static_cast<std::size_t>(w.tok)] += weight;
  }
  return acc;
}

double surrogate_loss(const ObjectiveSpec& spec, std::span<const RolloutGroup> batch,
                      const PolicyTable& frozen, const PolicyTable& eval) {
  const std::vector<TokenWeight> tokens = compute_token_weights(spec, batch, frozen);
  DistCache cache(eval);
  double loss = 0.0;
  for (const TokenWeight& w : tokens) {
    const double weight = w.weight();
    if (weight == 0.0) continue;
    loss += weight * cache.get(w.ctx).logp[static_cast<std::size_t>(w.tok)];
  }
  return loss;
}

double sequence_ratio_geomean(std::span<const double> logp_new, std::span<const double> logp_old) {
  const RatioTrace tr = compute_trace(logp_new, logp_old);
  const double mean = std::accumulate(tr.log_token_ratio.begin(), tr.log_token_ratio.end(), 0.0) /
                      static_cast<double>(tr.size());
  return std::exp(mean);
}

void accumulate_weighted_score(const PolicyTable& current, std::span<const TokenId> prompt,
                               std::span<const TokenId> response,
                               std::span<const double> behavior_logp,
                               std::span<const double> token_advantage, Weighting weighting,
                               double outer_weight, LogitGrad& out) {
  if (response.empty()) throw std::invalid_argument("accumulate_weighted_score: empty response");
  if (token_advantage.size() != response.size())
    throw std::invalid_argument("accumulate_weighted_score: advantage length mismatch");

  std::vector<double> logp_new(response.size());
  std::vector<std::uint64_t> ctxs(response.size());
  std::uint64_t ctx = current.context_from_prompt(prompt);
  for (std::size_t t = 0; t < response.size(); ++t) {
    ctxs[t] = ctx;
    logp_new[t] = current.token_logprob(ctx, response[t]);
    if (t + 1 < response.size()) ctx = current.context_advance(ctx, response[t]);
  }
  const RatioTrace trace = compute_trace(logp_new, behavior_logp);

  const int vocab = current.vocab_size();
  for (std::size_t t = 0; t < response.size(); ++t) {
    double c = 1.0;
    if (weighting == Weighting::PrefixExact) c = trace.prefix_ratio[t];
    if (weighting == Weighting::TokenRelaxed) c = trace.token_ratio[t];
    const double w = outer_weight * c * token_advantage[t];
    if (w == 0.0) continue;
    const std::vector<double> prob = current.token_distribution(ctxs[t]);
    auto& row = out.row(ctxs[t], vocab);
    for (int v = 0; v < vocab; ++v) row[static_cast<std::size_t>(v)] -= w * prob[static_cast<std::size_t>(v)];
    row[static_cast<std::size_t>(response[t])] += w;
  }
}

}  // namespace minpro
