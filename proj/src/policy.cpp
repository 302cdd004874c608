// Copyright (c) 2026 minpro-lab authors
// SPDX-License-Identifier: Apache-2.0

#include "minpro/policy.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace minpro {

// ===== LogitGrad =====

double LogitGrad::squared_norm() const {
  double s = 0.0;
  for (const auto& [ctx, r] : rows)
    for (double v : r) s += v * v;
  return s;
}

double LogitGrad::norm() const { return std::sqrt(squared_norm()); }

void LogitGrad::scale(double a) {
  for (auto& [ctx, r] : rows)
    for (double& v : r) v *= a;
}

void LogitGrad::axpy(double a, const LogitGrad& other) {
  for (const auto& [ctx, r] : other.rows) {
    auto& dst = rows[ctx];
    if (dst.empty()) dst.assign(r.size(), 0.0);
    for (std::size_t i = 0; i < r.size(); ++i) dst[i] += a * r[i];
  }
}

double grad_distance(const LogitGrad& a, const LogitGrad& b) {
  double s = 0.0;
  for (const auto& [ctx, ra] : a.rows) {
    const auto it = b.rows.find(ctx);
    if (it == b.rows.end()) {
      for (double v : ra) s += v * v;
    } else {
      for (std::size_t i = 0; i < ra.size(); ++i) {
        const double d = ra[i] - it->second[i];
        s += d * d;
      }
    }
  }
  for (const auto& [ctx, rb] : b.rows) {
    if (a.rows.find(ctx) == a.rows.end())
      for (double v : rb) s += v * v;
  }
  return std::sqrt(s);
}

double grad_rel_err(const LogitGrad& a, const LogitGrad& b, double floor) {
  const double denom = std::max({floor, a.norm(), b.norm()});
  return grad_distance(a, b) / denom;
}

// ===== PolicyTable =====

PolicyTable::PolicyTable(int vocab_size, int context_len) : vocab_(vocab_size), ctx_len_(context_len) {
  if (vocab_ < 2) throw std::invalid_argument("PolicyTable: vocab_size must be >= 2");
  if (ctx_len_ < 1) throw std::invalid_argument("PolicyTable: context_len must be >= 1");
  base_ = static_cast<std::uint64_t>(vocab_) + 1;
  // (vocab+1)^context_len must fit a 64-bit key.
  std::uint64_t power = 1;
  for (int i = 0; i < ctx_len_; ++i) {
    if (power > (~0ULL) / base_) throw std::invalid_argument("PolicyTable: context key space overflows 64 bits");
    power *= base_;
  }
  top_power_ = power / base_;
}

std::uint64_t PolicyTable::context_from_prompt(std::span<const TokenId> prompt) const {
  std::uint64_t key = 0;
  const std::size_t n = prompt.size();
  const std::size_t take = std::min<std::size_t>(n, static_cast<std::size_t>(ctx_len_));
  const int pads = ctx_len_ - static_cast<int>(take);
  for (int i = 0; i < pads; ++i) key = key * base_ + static_cast<std::uint64_t>(pad());
  for (std::size_t i = n - take; i < n; ++i) {
    const TokenId t = prompt[i];
    if (t < 0 || t >= vocab_) throw std::invalid_argument("context_from_prompt: token id out of range");
    key = key * base_ + static_cast<std::uint64_t>(t);
  }
  return key;
}

std::uint64_t PolicyTable::context_advance(std::uint64_t ctx, TokenId next) const {
  if (next < 0 || next >= vocab_) throw std::invalid_argument("context_advance: token id out of range");
  return (ctx % top_power_) * base_ + static_cast<std::uint64_t>(next);
}

std::vector<TokenId> PolicyTable::context_tokens(std::uint64_t ctx) const {
  std::vector<TokenId> out(static_cast<std::size_t>(ctx_len_));
  for (int i = ctx_len_ - 1; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = static_cast<TokenId>(ctx % base_);
    ctx /= base_;
  }
  return out;
}

namespace {

std::vector<double> log_softmax_of(const std::vector<double>* logits, int vocab) {
  std::vector<double> out(static_cast<std::size_t>(vocab));
  if (logits == nullptr) {
    const double u = -std::log(static_cast<double>(vocab));
    std::fill(out.begin(), out.end(), u);
    return out;
  }
  const double mx = *std::max_element(logits->begin(), logits->end());
  double sum = 0.0;
  for (double l : *logits) sum += std::exp(l - mx);
  const double lse = mx + std::log(sum);
  for (int v = 0; v < vocab; ++v) out[static_cast<std::size_t>(v)] = (*logits)[static_cast<std::size_t>(v)] - lse;
  return out;
}

}  // namespace

std::vector<double> PolicyTable::log_distribution(std::uint64_t ctx) const {
  return log_softmax_of(find_row(ctx), vocab_);
}

std::vector<double> PolicyTable::token_distribution(std::uint64_t ctx) const {
  std::vector<double> out = log_distribution(ctx);
  for (double& v : out) v = std::exp(v);
  return out;
}

double PolicyTable::token_logprob(std::uint64_t ctx, TokenId v) const {
  if (v < 0 || v >= vocab_) throw std::invalid_argument("token_logprob: token id out of range");
  return log_distribution(ctx)[static_cast<std::size_t>(v)];
}

double PolicyTable::token_entropy(std::uint64_t ctx) const {
  const std::vector<double> logp = log_distribution(ctx);
  double h = 0.0;
  for (double lp : logp) h -= std::exp(lp) * lp;
  const double cap = std::log(static_cast<double>(vocab_));
  return std::clamp(h, 0.0, cap);
}

std::vector<double> PolicyTable::score_row(std::uint64_t ctx, TokenId v) const {
  if (v < 0 || v >= vocab_) throw std::invalid_argument("score_row: token id out of range");
  std::vector<double> s = token_distribution(ctx);
  for (double& p : s) p = -p;
  s[static_cast<std::size_t>(v)] += 1.0;
  return s;
}

double PolicyTable::sequence_logprob(std::span<const TokenId> prompt, std::span<const TokenId> response) const {
  if (response.empty()) throw std::invalid_argument("sequence_logprob: empty response");
  std::uint64_t ctx = context_from_prompt(prompt);
  double total = 0.0;
  for (std::size_t t = 0; t < response.size(); ++t) {
    total += token_logprob(ctx, response[t]);
    if (t + 1 < response.size()) ctx = context_advance(ctx, response[t]);
  }
  return total;
}

PolicyTable::Sampled PolicyTable::sample_rollout(std::span<const TokenId> prompt, int t_max,
                                                 std::uint64_t seed) const {
  if (t_max < 1) throw std::invalid_argument("sample_rollout: t_max must be >= 1");
  Sampled out;
  out.tokens.reserve(static_cast<std::size_t>(t_max));
  out.logp.reserve(static_cast<std::size_t>(t_max));
  std::mt19937_64 gen(seed);
  std::uint64_t ctx = context_from_prompt(prompt);
  for (int t = 0; t < t_max; ++t) {
    const std::vector<double> logp = log_distribution(ctx);
    const double u = uniform_unit(gen());
    double cum = 0.0;
    TokenId pick = static_cast<TokenId>(vocab_ - 1);
    for (int v = 0; v < vocab_; ++v) {
      cum += std::exp(logp[static_cast<std::size_t>(v)]);
      if (u < cum) {
        pick = static_cast<TokenId>(v);
        break;
      }
    }
    out.tokens.push_back(pick);
    out.logp.push_back(logp[static_cast<std::size_t>(pick)]);
    if (pick == eos()) break;
    ctx = context_advance(ctx, pick);
  }
  return out;
}

const std::vector<double>* PolicyTable::find_row(std::uint64_t ctx) const {
  const auto it = table_.find(ctx);
  return it == table_.end() ? nullptr : &it->second;
}

std::vector<double>& PolicyTable::row(std::uint64_t ctx) {
  auto& r = table_[ctx];
  if (r.empty()) r.assign(static_cast<std::size_t>(vocab_), 0.0);
  return r;
}

void PolicyTable::set_logit(std::uint64_t ctx, TokenId v, double value) {
  if (v < 0 || v >= vocab_) throw std::invalid_argument("set_logit: token id out of range");
  if (!std::isfinite(value)) throw std::invalid_argument("set_logit: logit must be finite");
  row(ctx)[static_cast<std::size_t>(v)] = value;
}

void PolicyTable::add_logit(std::uint64_t ctx, TokenId v, double delta) {
  if (v < 0 || v >= vocab_) throw std::invalid_argument("add_logit: token id out of range");
  auto& r = row(ctx);
  const double next = r[static_cast<std::size_t>(v)] + delta;
  if (!std::isfinite(next)) throw NumericError("add_logit: logit turned non-finite");
  r[static_cast<std::size_t>(v)] = next;
}

bool PolicyTable::same_logits(const PolicyTable& other) const {
  if (vocab_ != other.vocab_ || ctx_len_ != other.ctx_len_) return false;
  auto covered = [&](const PolicyTable& a, const PolicyTable& b) {
    for (const auto& [ctx, r] : a.table_) {
      const auto* o = b.find_row(ctx);
      for (std::size_t i = 0; i < r.size(); ++i) {
        const double ov = o ? (*o)[i] : 0.0;
        if (r[i] != ov) return false;
      }
    }
    return true;
  };
  return covered(*this, other) && covered(other, *this);
}

}  // namespace minpro
