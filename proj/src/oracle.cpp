// Copyright (c) 2026 minpro-lab authors
// SPDX-License-Identifier: Apache-2.0

#include "minpro/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace minpro::oracle {

namespace {

void check_capacity(int vocab, int t_max) {
  if (t_max < 1) throw std::invalid_argument("oracle: t_max must be >= 1");
  double leaves = 1.0;
  for (int i = 0; i < t_max; ++i) leaves *= static_cast<double>(vocab);
  if (leaves > 1e6) throw CapacityError("oracle: vocab^t_max exceeds the 1e6 enumeration guard");
}

}  // namespace

RewardFn env_reward(const Environment& env, std::vector<TokenId> prompt) {
  return [env, prompt = std::move(prompt)](std::span<const TokenId> response) {
    return verify_reward(env, prompt, response);
  };
}

std::vector<SequenceOutcome> enumerate_sequences(const PolicyTable& p,
                                                 std::span<const TokenId> prompt, int t_max,
                                                 const RewardFn& reward) {
  check_capacity(p.vocab_size(), t_max);
  std::vector<SequenceOutcome> out;
  std::vector<TokenId> path;

  const std::function<void(std::uint64_t, double, int)> dfs = [&](std::uint64_t ctx, double logp,
                                                                  int depth) {
    const std::vector<double> logdist = p.log_distribution(ctx);
    for (TokenId v = 0; v < p.vocab_size(); ++v) {
      const double step_logp = logp + logdist[static_cast<std::size_t>(v)];
      path.push_back(v);
      if (v == p.eos() || depth + 1 == t_max) {
        SequenceOutcome o;
        o.response = path;
        o.logp = step_logp;
        o.prob = std::exp(step_logp);
        o.reward = reward(path);
        out.push_back(std::move(o));
      } else {
        dfs(p.context_advance(ctx, v), step_logp, depth + 1);
      }
      path.pop_back();
    }
  };
  dfs(p.context_from_prompt(prompt), 0.0, 0);
  return out;
}

std::vector<SequenceOutcome> enumerate_sequences(const PolicyTable& p, const Environment& env,
                                                 std::span<const TokenId> prompt, int t_max) {
  return enumerate_sequences(p, prompt, t_max,
                             env_reward(env, std::vector<TokenId>(prompt.begin(), prompt.end())));
}

double expected_reward(const PolicyTable& p, std::span<const TokenId> prompt, int t_max,
                       const RewardFn& reward) {
  double total = 0.0;
  for (const SequenceOutcome& o : enumerate_sequences(p, prompt, t_max, reward))
    total += o.prob * o.reward;
  return total;
}

double expected_reward(const PolicyTable& p, const Environment& env,
                       std::span<const TokenId> prompt, int t_max) {
  return expected_reward(p, prompt, t_max,
                         env_reward(env, std::vector<TokenId>(prompt.begin(), prompt.end())));
}

LogitGrad exact_grad_J(const PolicyTable& p, std::span<const TokenId> prompt, int t_max,
                       const RewardFn& reward) {
  LogitGrad grad;
  const int vocab = p.vocab_size();
  for (const SequenceOutcome& o : enumerate_sequences(p, prompt, t_max, reward)) {
    const double w = o.prob * o.reward;
    if (w == 0.0) continue;
    std::uint64_t ctx = p.context_from_prompt(prompt);
    for (std::size_t t = 0; t < o.response.size(); ++t) {
      const std::vector<double> score = p.score_row(ctx, o.response[t]);
      auto& row = grad.row(ctx, vocab);
      for (int v = 0; v < vocab; ++v) row[static_cast<std::size_t>(v)] += w * score[static_cast<std::size_t>(v)];
      if (t + 1 < o.response.size()) ctx = p.context_advance(ctx, o.response[t]);
    }
  }
  return grad;
}

LogitGrad exact_grad_J(const PolicyTable& p, const Environment& env,
                       std::span<const TokenId> prompt, int t_max) {
  return exact_grad_J(p, prompt, t_max,
                      env_reward(env, std::vector<TokenId>(prompt.begin(), prompt.end())));
}

// ===== ExactCritic =====

ExactCritic::ExactCritic(const PolicyTable& p, std::span<const TokenId> prompt, int t_max,
                         const RewardFn& reward)
    : p_(p), prompt_(prompt.begin(), prompt.end()), reward_(reward),
      base_(static_cast<std::uint64_t>(p.vocab_size()) + 1) {
  check_capacity(p.vocab_size(), t_max);
  std::vector<TokenId> prefix;
  build(prefix, p.context_from_prompt(prompt), 1.0, t_max);
}

std::uint64_t ExactCritic::prefix_key(std::span<const TokenId> prefix) const {
  // base-(vocab+1) integer with digits tok+1; prefix-free across lengths
  std::uint64_t key = 0;
  for (TokenId t : prefix) key = key * base_ + static_cast<std::uint64_t>(t) + 1;
  return key;
}

double ExactCritic::build(std::vector<TokenId>& prefix, std::uint64_t ctx, double reach_prob,
                          int t_max) {
  prefixes_.emplace_back(prefix, reach_prob);
  const std::vector<double> dist = p_.token_distribution(ctx);
  const std::uint64_t key = prefix_key(prefix);
  std::vector<double> q(static_cast<std::size_t>(p_.vocab_size()), 0.0);
  double v_here = 0.0;
  for (TokenId v = 0; v < p_.vocab_size(); ++v) {
    prefix.push_back(v);
    double qv;
    if (v == p_.eos() || static_cast<int>(prefix.size()) == t_max) {
      qv = reward_(prefix);
    } else {
      qv = build(prefix, p_.context_advance(ctx, v), reach_prob * dist[static_cast<std::size_t>(v)], t_max);
    }
    prefix.pop_back();
    q[static_cast<std::size_t>(v)] = qv;
    v_here += dist[static_cast<std::size_t>(v)] * qv;
  }
  q_.emplace(key, std::move(q));
  value_.emplace(key, v_here);
  return v_here;
}

double ExactCritic::value(std::span<const TokenId> prefix) const {
  const auto it = value_.find(prefix_key(prefix));
  if (it == value_.end()) throw std::invalid_argument("ExactCritic::value: unknown prefix");
  return it->second;
}

double ExactCritic::qvalue(std::span<const TokenId> prefix, TokenId v) const {
  const auto it = q_.find(prefix_key(prefix));
  if (it == q_.end()) throw std::invalid_argument("ExactCritic::qvalue: unknown prefix");
  return it->second.at(static_cast<std::size_t>(v));
}

double ExactCritic::advantage(std::span<const TokenId> prefix, TokenId v) const {
  return qvalue(prefix, v) - value(prefix);
}

LogitGrad advantage_form_grad(const PolicyTable& p, std::span<const TokenId> prompt, int t_max,
                              const RewardFn& reward) {
  const ExactCritic critic(p, prompt, t_max, reward);
  LogitGrad grad;
  const int vocab = p.vocab_size();
  for (const auto& [prefix, reach] : critic.prefixes()) {
    std::vector<TokenId> full(prompt.begin(), prompt.end());
    full.insert(full.end(), prefix.begin(), prefix.end());
    const std::uint64_t ctx = p.context_from_prompt(full);
    const std::vector<double> dist = p.token_distribution(ctx);
    auto& row = grad.row(ctx, vocab);
    for (TokenId v = 0; v < vocab; ++v) {
      const double w = reach * dist[static_cast<std::size_t>(v)] * critic.advantage(prefix, v);
      if (w == 0.0) continue;
      // w * (onehot(v) - dist)
      for (int u = 0; u < vocab; ++u) row[static_cast<std::size_t>(u)] -= w * dist[static_cast<std::size_t>(u)];
      row[static_cast<std::size_t>(v)] += w;
    }
  }
  return grad;
}

LogitGrad estimator_expectation(Weighting weighting, const PolicyTable& p_new,
                                const PolicyTable& p_old, std::span<const TokenId> prompt,
                                int t_max, const RewardFn& reward) {
  if (p_new.vocab_size() != p_old.vocab_size() || p_new.context_len() != p_old.context_len())
    throw std::invalid_argument("estimator_expectation: mismatched policy shapes");
  const ExactCritic critic(p_new, prompt, t_max, reward);
  LogitGrad grad;
  for (const SequenceOutcome& o : enumerate_sequences(p_old, prompt, t_max, reward)) {
    // behavior log-probs under p_old
    std::vector<double> logp_old(o.response.size());
    std::vector<double> adv(o.response.size());
    std::uint64_t ctx = p_old.context_from_prompt(prompt);
    std::vector<TokenId> prefix;
    for (std::size_t t = 0; t < o.response.size(); ++t) {
      logp_old[t] = p_old.token_logprob(ctx, o.response[t]);
      adv[t] = critic.advantage(prefix, o.response[t]);
      prefix.push_back(o.response[t]);
      if (t + 1 < o.response.size()) ctx = p_old.context_advance(ctx, o.response[t]);
    }
    accumulate_weighted_score(p_new, prompt, o.response, logp_old, adv, weighting, o.prob, grad);
  }
  return grad;
}

LogitGrad estimator_expectation(Weighting weighting, const PolicyTable& p_new,
                                const PolicyTable& p_old, const Environment& env,
                                std::span<const TokenId> prompt, int t_max) {
  return estimator_expectation(weighting, p_new, p_old, prompt, t_max,
                               env_reward(env, std::vector<TokenId>(prompt.begin(), prompt.end())));
}

double baseline_invariance_check(const PolicyTable& p, std::span<const TokenId> prompt, int t_max,
                                 const BaselineFn& b) {
  check_capacity(p.vocab_size(), t_max);
  LogitGrad grad;
  const int vocab = p.vocab_size();
  std::vector<TokenId> prefix;

  const std::function<void(std::uint64_t, double, int)> dfs = [&](std::uint64_t ctx, double reach,
                                                                  int depth) {
    const std::vector<double> dist = p.token_distribution(ctx);
    auto& row = grad.row(ctx, vocab);
    for (TokenId v = 0; v < vocab; ++v) {
      const double w = reach * dist[static_cast<std::size_t>(v)] * b(prefix, v);
      if (w != 0.0) {
        for (int u = 0; u < vocab; ++u) row[static_cast<std::size_t>(u)] -= w * dist[static_cast<std::size_t>(u)];
        row[static_cast<std::size_t>(v)] += w;
      }
      if (v != p.eos() && depth + 1 < t_max) {
        prefix.push_back(v);
        dfs(p.context_advance(ctx, v), reach * dist[static_cast<std::size_t>(v)], depth + 1);
        prefix.pop_back();
      }
    }
  };
  dfs(p.context_from_prompt(prompt), 1.0, 0);
  return grad.norm();
}

double finite_diff_max_rel_err(const std::function<LogitGrad(const PolicyTable&)>& grad_fn,
                               const std::function<double(const PolicyTable&)>& loss_fn,
                               const PolicyTable& p, double h) {
  const LogitGrad grad = grad_fn(p);

  // Union of stored rows and gradient rows, in sorted key order.
  std::vector<std::uint64_t> ctxs;
  for (const auto& [ctx, row] : p.rows()) ctxs.push_back(ctx);
  for (const auto& [ctx, row] : grad.rows)
    if (p.rows().find(ctx) == p.rows().end()) ctxs.push_back(ctx);
  std::sort(ctxs.begin(), ctxs.end());

  double scale = 1e-8;
  for (const auto& [ctx, row] : grad.rows)
    for (double g : row) scale = std::max(scale, std::fabs(g));

  double worst = 0.0;
  for (std::uint64_t ctx : ctxs) {
    for (TokenId v = 0; v < p.vocab_size(); ++v) {
      PolicyTable plus = p;
      plus.add_logit(ctx, v, h);
      PolicyTable minus = p;
      minus.add_logit(ctx, v, -h);
      const double fd = (loss_fn(plus) - loss_fn(minus)) / (2.0 * h);
      const auto it = grad.rows.find(ctx);
      const double g = it == grad.rows.end() ? 0.0 : it->second[static_cast<std::size_t>(v)];
      worst = std::max(worst, std::fabs(g - fd) / scale);
    }
  }
  return worst;
}

}  // namespace minpro::oracle
