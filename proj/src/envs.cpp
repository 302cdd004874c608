// Copyright (c) 2026 minpro-lab authors
// SPDX-License-Identifier: Apache-2.0

#include "minpro/envs.hpp"

#include <stdexcept>

namespace minpro {

Environment Environment::echo(int vocab, std::uint64_t dataset_seed) {
  if (vocab < 2) throw std::invalid_argument("Environment::echo: vocab must be >= 2");
  Environment e;
  e.kind = Kind::Echo;
  e.echo_vocab = vocab;
  e.dataset_seed = dataset_seed;
  return e;
}

Environment Environment::sum_mod(int base, int digit_count, int reasoning_budget,
                                 std::uint64_t dataset_seed) {
  if (base < 2) throw std::invalid_argument("Environment::sum_mod: base must be >= 2");
  if (digit_count < 1) throw std::invalid_argument("Environment::sum_mod: digit_count must be >= 1");
  if (reasoning_budget < 0) throw std::invalid_argument("Environment::sum_mod: budget must be >= 0");
  Environment e;
  e.kind = Kind::SumMod;
  e.base = base;
  e.digit_count = digit_count;
  e.reasoning_budget = reasoning_budget;
  e.dataset_seed = dataset_seed;
  return e;
}

PromptCase gen_prompt(const Environment& env, std::uint64_t index) {
  PromptCase out;
  std::uint64_t h = mix_seed(env.dataset_seed, 0x70726f6d7074ULL, index);
  if (env.kind == Environment::Kind::Echo) {
    // answers exclude EOS
    const int choices = env.echo_vocab - 1;
    const TokenId v = static_cast<TokenId>(h % static_cast<std::uint64_t>(choices));
    out.prompt = {v};
    out.answer = v;
  } else {
    int sum = 0;
    for (int i = 0; i < env.digit_count; ++i) {
      h = splitmix64(h);
      const TokenId d = static_cast<TokenId>(h % static_cast<std::uint64_t>(env.base));
      out.prompt.push_back(d);
      sum += d;
    }
    out.answer = static_cast<TokenId>(sum % env.base);
  }
  return out;
}

double answer_predicate(const Environment& env, std::span<const TokenId> response, TokenId answer) {
  if (response.empty()) return 0.0;
  std::size_t body_len = response.size();
  if (response.back() == env.eos()) --body_len;  // generation stops at first EOS
  if (body_len == 0) return 0.0;
  if (response[body_len - 1] != answer) return 0.0;
  const std::size_t reasoning = body_len - 1;
  if (reasoning > static_cast<std::size_t>(env.budget())) return 0.0;
  return 1.0;
}

TokenId answer_for_prompt(const Environment& env, std::span<const TokenId> prompt) {
  if (prompt.empty()) throw std::invalid_argument("answer_for_prompt: empty prompt");
  if (env.kind == Environment::Kind::Echo) return prompt.back();
  int sum = 0;
  for (TokenId d : prompt) sum += d;
  return static_cast<TokenId>(sum % env.base);
}

}  // namespace minpro
