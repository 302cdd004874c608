// Copyright (c) 2026 minpro-lab authors
// SPDX-License-Identifier: Apache-2.0
//
// Tabular context-window autoregressive softmax policy.
//
// The policy conditions each emitted token on a fixed-length window of the
// last `context_len` tokens of prompt-plus-response, left-padded with a
// reserved PAD id (== vocab_size). Token id vocab_size-1 is EOS and is an
// ordinary vocabulary entry the policy may emit anywhere. Contexts that were
// never written behave as all-zero logit rows (uniform distribution).

#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "minpro/common.hpp"

namespace minpro {

/// Sparse gradient over the policy's logit table: one dense row of length
/// vocab_size per touched context. Doubles as the "dense" gradient of the
/// enumeration oracle, since untouched rows are exactly zero.
struct LogitGrad {
  std::unordered_map<std::uint64_t, std::vector<double>> rows;

  std::vector<double>& row(std::uint64_t ctx, int vocab) {
    auto& r = rows[ctx];
    if (r.empty()) r.assign(static_cast<std::size_t>(vocab), 0.0);
    return r;
  }

  double squared_norm() const;
  double norm() const;
  void scale(double a);
  /// this += a * other
  void axpy(double a, const LogitGrad& other);
};

/// L2 distance between two gradients over the union of their rows.
double grad_distance(const LogitGrad& a, const LogitGrad& b);

/// ||a - b|| / max(floor, ||a||, ||b||). The workhorse comparison for the
/// verification suite.
double grad_rel_err(const LogitGrad& a, const LogitGrad& b, double floor = 1e-8);

class PolicyTable {
 public:
  /// Throws std::invalid_argument unless vocab_size >= 2, context_len >= 1,
  /// and (vocab_size+1)^context_len fits the 64-bit context key space.
  PolicyTable(int vocab_size, int context_len);

  int vocab_size() const { return vocab_; }
  int context_len() const { return ctx_len_; }
  TokenId eos() const { return vocab_ - 1; }
  TokenId pad() const { return vocab_; }

  std::int64_t version() const { return version_; }
  void bump_version() { ++version_; }

  // --- context window codec ---
  // A context is encoded as a base-(vocab+1) integer with the oldest slot in
  // the highest digit. PAD ids appear only as a contiguous left prefix.

  /// Window covering the whole prompt (last context_len tokens, PAD-padded).
  std::uint64_t context_from_prompt(std::span<const TokenId> prompt) const;
  /// Slide the window one step after emitting `next`.
  std::uint64_t context_advance(std::uint64_t ctx, TokenId next) const;
  /// Decode a context key back into its window tokens (PAD included).
  std::vector<TokenId> context_tokens(std::uint64_t ctx) const;

  // --- distributions ---

  /// Log-softmax of the context's logit row. Missing rows act as all zeros.
  std::vector<double> log_distribution(std::uint64_t ctx) const;
  /// exp of log_distribution: strictly positive, sums to 1 within 1e-12.
  std::vector<double> token_distribution(std::uint64_t ctx) const;
  double token_logprob(std::uint64_t ctx, TokenId v) const;
  /// -sum_v p log p, clamped into [0, log vocab_size].
  double token_entropy(std::uint64_t ctx) const;
  /// Score function d log pi(v|ctx) / d logits[ctx]: onehot(v) - softmax.
  /// Nonzero only on row `ctx`; entries sum to zero up to rounding.
  std::vector<double> score_row(std::uint64_t ctx, TokenId v) const;

  /// Sum of per-step log-probabilities of `response` given `prompt`, with
  /// the window sliding over prompt + response prefix. Always <= 0.
  /// Throws std::invalid_argument on out-of-range ids or empty response.
  double sequence_logprob(std::span<const TokenId> prompt, std::span<const TokenId> response) const;

  struct Sampled {
    std::vector<TokenId> tokens;
    std::vector<double> logp;  // termwise equal to sequence_logprob terms
  };
  /// Autoregressive sampling: stops at the first EOS or after t_max tokens.
  /// A pure function of (parameters, prompt, t_max, seed).
  Sampled sample_rollout(std::span<const TokenId> prompt, int t_max, std::uint64_t seed) const;

  // --- parameter access ---

  /// Row lookup without lazy insertion; nullptr when the context is unset.
  const std::vector<double>* find_row(std::uint64_t ctx) const;
  /// Mutable row, lazily initialized to zeros.
  std::vector<double>& row(std::uint64_t ctx);
  void set_logit(std::uint64_t ctx, TokenId v, double value);
  void add_logit(std::uint64_t ctx, TokenId v, double delta);

  const std::unordered_map<std::uint64_t, std::vector<double>>& rows() const { return table_; }

  /// Equal-logits comparison (used by tests; version is ignored).
  bool same_logits(const PolicyTable& other) const;

 private:
  int vocab_;
  int ctx_len_;
  std::uint64_t base_;        // vocab_ + 1
  std::uint64_t top_power_;   // base_^(ctx_len_-1)
  std::int64_t version_ = 0;
  std::unordered_map<std::uint64_t, std::vector<double>> table_;
};

}  // namespace minpro
