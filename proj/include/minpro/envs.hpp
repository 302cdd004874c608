// Copyright (c) 2026 minpro-lab authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic verifiable-answer environments: a prompt generator plus an
// answer predicate over responses. Rewards are binary; a response is correct
// when its final content token (before EOS, or the last token of a truncated
// response) equals the prompt's answer and at most `reasoning budget` free
// tokens precede it.

#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "minpro/common.hpp"

namespace minpro {

struct Environment {
  enum class Kind { Echo, SumMod };

  Kind kind = Kind::Echo;
  std::uint64_t dataset_seed = 1;

  // Echo: vocabulary of `echo_vocab` ids, answers in 0..echo_vocab-2.
  int echo_vocab = 3;

  // SumMod: prompts are `digit_count` digits in base `base`; the answer is
  // their sum mod base. Vocabulary is the base digits plus EOS.
  int base = 4;
  int digit_count = 3;
  int reasoning_budget = 8;

  static Environment echo(int vocab, std::uint64_t dataset_seed);
  static Environment sum_mod(int base, int digit_count, int reasoning_budget,
                             std::uint64_t dataset_seed);

  int vocab_size() const { return kind == Kind::Echo ? echo_vocab : base + 1; }
  TokenId eos() const { return static_cast<TokenId>(vocab_size() - 1); }
  /// Max free tokens allowed before the answer position.
  int budget() const {
    return kind == Kind::Echo ? std::numeric_limits<int>::max() : reasoning_budget;
  }
};

struct PromptCase {
  std::vector<TokenId> prompt;
  TokenId answer;
};

/// Deterministic in (dataset_seed, index).
PromptCase gen_prompt(const Environment& env, std::uint64_t index);

/// 1 iff the response ends at [answer, EOS], or (truncated, no EOS) its final
/// token equals the answer, with at most env.budget() tokens before the
/// answer. [EOS] alone scores 0.
double answer_predicate(const Environment& env, std::span<const TokenId> response, TokenId answer);

/// Recover the answer implied by a prompt the environment produced.
TokenId answer_for_prompt(const Environment& env, std::span<const TokenId> prompt);

}  // namespace minpro
