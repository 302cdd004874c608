// Copyright (c) 2026 minpro-lab authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <vector>

#include "minpro/advantage.hpp"
#include "minpro/envs.hpp"
#include "minpro/oracle.hpp"
#include "minpro/policy.hpp"

using namespace minpro;

TEST_SUITE("advantage") {

TEST_CASE("group_advantages worked examples") {
  SUBCASE("half correct") {
    const std::vector<double> r = {1, 1, 0, 0};
    const auto a = group_advantages(r);
    CHECK(a == std::vector<double>{1, 1, -1, -1});
  }
  SUBCASE("degenerate group") {
    const std::vector<double> r = {1, 1, 1, 1};
    CHECK(group_advantages(r) == std::vector<double>(4, 0.0));
  }
  SUBCASE("too small") {
    const std::vector<double> r = {1};
    CHECK_THROWS_AS((void)group_advantages(r), std::invalid_argument);
  }
}

TEST_CASE("group_advantages normalization and affine invariance") {
  for (int trial = 0; trial < 40; ++trial) {
    const int g = 3 + static_cast<int>(mix_seed(8, trial) % 6);
    std::vector<double> r(static_cast<std::size_t>(g));
    for (int i = 0; i < g; ++i) r[static_cast<std::size_t>(i)] = uniform_unit(mix_seed(9, trial, i));
    const auto a = group_advantages(r);

    double mean = 0.0, var = 0.0;
    for (double x : a) mean += x;
    mean /= g;
    for (double x : a) var += (x - mean) * (x - mean);
    var /= g;
    CHECK(std::fabs(mean) < 1e-10);
    CHECK(std::fabs(std::sqrt(var) - 1.0) < 1e-10);

    // invariance under positive affine reward maps
    const double scale = 0.5 + 2.0 * uniform_unit(mix_seed(10, trial));
    const double shift = 5.0 * (uniform_unit(mix_seed(11, trial)) - 0.5);
    std::vector<double> r2 = r;
    for (double& x : r2) x = scale * x + shift;
    const auto a2 = group_advantages(r2);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::fabs(a[i] - a2[i]) < 1e-9);
  }
}

TEST_CASE("verify_reward") {
  SUBCASE("echo") {
    const Environment env = Environment::echo(3, 1);
    const std::vector<TokenId> prompt = {2 - 1};  // answer token 1
    CHECK(verify_reward(env, std::vector<TokenId>{2 - 1},
                        std::vector<TokenId>{1, env.eos()}) == 1.0);
    CHECK(verify_reward(env, prompt, std::vector<TokenId>{0, env.eos()}) == 0.0);
  }
  SUBCASE("summod") {
    const Environment env = Environment::sum_mod(3, 2, 4, 1);
    const std::vector<TokenId> prompt = {1, 2};  // (1+2) mod 3 = 0
    CHECK(verify_reward(env, prompt, std::vector<TokenId>{0, env.eos()}) == 1.0);
    CHECK(verify_reward(env, prompt, std::vector<TokenId>{1, 0, env.eos()}) == 1.0);
    CHECK(verify_reward(env, prompt, std::vector<TokenId>{1, env.eos()}) == 0.0);
  }
}

}  // TEST_SUITE

TEST_SUITE("envs") {

TEST_CASE("gen_prompt") {
  SUBCASE("echo range and determinism") {
    const Environment env = Environment::echo(3, 77);
    for (int i = 0; i < 50; ++i) {
      const PromptCase a = gen_prompt(env, static_cast<std::uint64_t>(i));
      const PromptCase b = gen_prompt(env, static_cast<std::uint64_t>(i));
      REQUIRE(a.prompt.size() == 1);
      CHECK(a.prompt == b.prompt);
      CHECK(a.answer == a.prompt[0]);
      CHECK(a.answer >= 0);
      CHECK(a.answer <= 1);  // EOS (id 2) is never an answer
    }
  }
  SUBCASE("summod digits and answer") {
    const Environment env = Environment::sum_mod(4, 3, 8, 5);
    for (int i = 0; i < 50; ++i) {
      const PromptCase pc = gen_prompt(env, static_cast<std::uint64_t>(i));
      REQUIRE(pc.prompt.size() == 3);
      int sum = 0;
      for (TokenId d : pc.prompt) {
        CHECK(d >= 0);
        CHECK(d < 4);
        sum += d;
      }
      CHECK(pc.answer == sum % 4);
    }
  }
}

TEST_CASE("answer_predicate") {
  const Environment env = Environment::sum_mod(4, 2, 2, 1);
  const TokenId a = 3, eos = env.eos();
  CHECK(answer_predicate(env, std::vector<TokenId>{a, eos}, a) == 1.0);
  CHECK(answer_predicate(env, std::vector<TokenId>{0, a, eos}, a) == 1.0);
  CHECK(answer_predicate(env, std::vector<TokenId>{eos}, a) == 0.0);
  CHECK(answer_predicate(env, std::vector<TokenId>{}, a) == 0.0);
  CHECK(answer_predicate(env, std::vector<TokenId>{a}, a) == 1.0);        // truncated
  CHECK(answer_predicate(env, std::vector<TokenId>{0, 1, a}, a) == 1.0);  // truncated, within budget
  CHECK(answer_predicate(env, std::vector<TokenId>{0, 1, 0, a, eos}, a) == 0.0);  // budget blown
  CHECK(answer_predicate(env, std::vector<TokenId>{a, 0, eos}, a) == 0.0);        // answer not final
}

TEST_CASE("every prompt's answer is reachable within t_max") {
  for (const Environment& env :
       {Environment::echo(4, 3), Environment::sum_mod(5, 2, 3, 9)}) {
    for (int i = 0; i < 30; ++i) {
      const PromptCase pc = gen_prompt(env, static_cast<std::uint64_t>(i));
      const std::vector<TokenId> direct = {pc.answer, env.eos()};
      CHECK(verify_reward(env, pc.prompt, direct) == 1.0);
    }
  }
}

TEST_CASE("uniform expected reward: enumeration matches Monte Carlo") {
  const Environment env = Environment::echo(3, 21);
  const PromptCase pc = gen_prompt(env, 4);
  const PolicyTable p(env.vocab_size(), 1);  // uniform
  const int t_max = 4;
  const double exact =
      oracle::expected_reward(p, pc.prompt, t_max, oracle::env_reward(env, pc.prompt));

  const int n = 200000;
  double hits = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto s = p.sample_rollout(pc.prompt, t_max, mix_seed(1234, i));
    hits += verify_reward(env, pc.prompt, s.tokens);
  }
  const double phat = hits / n;
  const double se = std::sqrt(exact * (1.0 - exact) / n);
  CHECK(std::fabs(phat - exact) < 3.0 * se + 1e-9);
}

}  // TEST_SUITE
