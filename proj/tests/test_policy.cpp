// Copyright (c) 2026 minpro-lab authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "minpro/oracle.hpp"
#include "minpro/policy.hpp"
#include "minpro/verify.hpp"

using namespace minpro;

namespace {

// All responses of length <= t_max that stop at EOS or t_max, by brute force.
void all_responses(int vocab, int t_max, std::vector<TokenId>& path,
                   std::vector<std::vector<TokenId>>& out) {
  for (TokenId v = 0; v < vocab; ++v) {
    path.push_back(v);
    if (v == vocab - 1 || static_cast<int>(path.size()) == t_max)
      out.push_back(path);
    else
      all_responses(vocab, t_max, path, out);
    path.pop_back();
  }
}

}  // namespace

TEST_SUITE("policy") {

TEST_CASE("token_distribution closed forms") {
  PolicyTable p(3, 1);
  const std::uint64_t ctx = p.context_from_prompt(std::vector<TokenId>{});

  SUBCASE("zeros give uniform") {
    const auto d = p.token_distribution(ctx);
    for (double x : d) CHECK(x == doctest::Approx(1.0 / 3).epsilon(1e-12));
  }

  SUBCASE("ln 2 logit") {
    p.set_logit(ctx, 0, std::log(2.0));
    const auto d = p.token_distribution(ctx);
    CHECK(d[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(d[1] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(d[2] == doctest::Approx(0.25).epsilon(1e-12));
  }

  SUBCASE("normalization and positivity on random rows") {
    for (int trial = 0; trial < 50; ++trial) {
      for (TokenId v = 0; v < 3; ++v)
        p.set_logit(ctx, v, 6.0 * (uniform_unit(mix_seed(99, trial, v)) - 0.5));
      const auto d = p.token_distribution(ctx);
      double sum = 0.0;
      for (double x : d) {
        CHECK(x > 0.0);
        sum += x;
      }
      CHECK(std::fabs(sum - 1.0) < 1e-12);
    }
  }

  SUBCASE("shift invariance") {
    for (TokenId v = 0; v < 3; ++v) p.set_logit(ctx, v, 1.5 * v);
    const auto before = p.token_distribution(ctx);
    for (TokenId v = 0; v < 3; ++v) p.add_logit(ctx, v, 7.25);
    const auto after = p.token_distribution(ctx);
    for (int v = 0; v < 3; ++v) CHECK(std::fabs(before[v] - after[v]) < 1e-12);
  }
}

TEST_CASE("sequence_logprob") {
  SUBCASE("uniform policy, two tokens") {
    PolicyTable p(3, 1);
    const std::vector<TokenId> prompt = {0};
    const std::vector<TokenId> response = {1, 0};
    CHECK(p.sequence_logprob(prompt, response) ==
          doctest::Approx(-2.0 * std::log(3.0)).epsilon(1e-12));
  }

  SUBCASE("probabilities over all responses sum to 1") {
    const std::vector<TokenId> prompt = {0};
    PolicyTable p = make_random_policy(2, 1, prompt, 3, 4242, 1.0);
    std::vector<std::vector<TokenId>> responses;
    std::vector<TokenId> path;
    all_responses(2, 3, path, responses);
    double total = 0.0;
    for (const auto& r : responses) total += std::exp(p.sequence_logprob(prompt, r));
    CHECK(std::fabs(total - 1.0) < 1e-10);
  }

  SUBCASE("empty prompt, EOS-only response") {
    PolicyTable p(4, 2);
    const std::uint64_t all_pad = p.context_from_prompt(std::vector<TokenId>{});
    p.set_logit(all_pad, 1, 0.7);
    const std::vector<TokenId> response = {p.eos()};
    CHECK(p.sequence_logprob({}, response) ==
          doctest::Approx(p.token_logprob(all_pad, p.eos())).epsilon(1e-15));
  }

  SUBCASE("result is never positive") {
    const std::vector<TokenId> prompt = {1};
    PolicyTable p = make_random_policy(3, 2, prompt, 4, 7, 2.0);
    for (int i = 0; i < 20; ++i) {
      const auto s = p.sample_rollout(prompt, 4, static_cast<std::uint64_t>(i));
      CHECK(p.sequence_logprob(prompt, s.tokens) <= 0.0);
    }
  }

  SUBCASE("out-of-range token is an input error") {
    PolicyTable p(3, 1);
    const std::vector<TokenId> bad = {3};
    CHECK_THROWS_AS((void)p.sequence_logprob({}, bad), std::invalid_argument);
    CHECK_THROWS_AS((void)p.sequence_logprob(bad, bad), std::invalid_argument);
  }
}

TEST_CASE("sample_rollout") {
  SUBCASE("saturated logits repeat the token") {
    PolicyTable p(3, 1);
    const std::vector<TokenId> prompt = {0};
    // every reachable context strongly prefers token 1
    p.set_logit(p.context_from_prompt(prompt), 1, 1e6);
    std::vector<TokenId> after1 = {1};
    p.set_logit(p.context_from_prompt(after1), 1, 1e6);
    const auto s = p.sample_rollout(prompt, 5, 123);
    REQUIRE(s.tokens.size() == 5);
    for (TokenId t : s.tokens) CHECK(t == 1);
  }

  SUBCASE("same seed, same rollout") {
    const std::vector<TokenId> prompt = {1};
    const PolicyTable p = make_random_policy(3, 1, prompt, 6, 99, 1.0);
    const auto a = p.sample_rollout(prompt, 6, 0xabcd);
    const auto b = p.sample_rollout(prompt, 6, 0xabcd);
    CHECK(a.tokens == b.tokens);
    CHECK(a.logp == b.logp);
  }

  SUBCASE("logp entries match sequence_logprob termwise") {
    const std::vector<TokenId> prompt = {0};
    const PolicyTable p = make_random_policy(3, 2, prompt, 6, 5, 1.5);
    const auto s = p.sample_rollout(prompt, 6, 77);
    double sum = 0.0;
    for (double lp : s.logp) sum += lp;
    CHECK(sum == doctest::Approx(p.sequence_logprob(prompt, s.tokens)).epsilon(1e-15));
    CHECK(s.tokens.size() == s.logp.size());
  }

  SUBCASE("stops at first EOS") {
    PolicyTable p(2, 1);
    const std::vector<TokenId> prompt = {0};
    p.set_logit(p.context_from_prompt(prompt), p.eos(), 1e6);
    const auto s = p.sample_rollout(prompt, 8, 3);
    REQUIRE(s.tokens.size() == 1);
    CHECK(s.tokens[0] == p.eos());
  }

  SUBCASE("length-1 frequencies match the distribution within 3 SE") {
    const std::vector<TokenId> prompt = {0};
    const PolicyTable p = make_random_policy(3, 1, prompt, 1, 31337, 1.0);
    const auto dist = p.token_distribution(p.context_from_prompt(prompt));
    const int n = 100000;
    std::map<TokenId, int> counts;
    for (int i = 0; i < n; ++i) {
      const auto s = p.sample_rollout(prompt, 1, mix_seed(1, i));
      REQUIRE(s.tokens.size() == 1);
      counts[s.tokens[0]]++;
    }
    for (TokenId v = 0; v < 3; ++v) {
      const double phat = static_cast<double>(counts[v]) / n;
      const double se = std::sqrt(dist[v] * (1.0 - dist[v]) / n);
      CHECK(std::fabs(phat - dist[v]) < 3.0 * se + 1e-9);
    }
  }
}

TEST_CASE("score") {
  PolicyTable p(3, 1);
  const std::uint64_t ctx = p.context_from_prompt(std::vector<TokenId>{1});

  SUBCASE("onehot minus uniform") {
    const auto s = p.score_row(ctx, 1);
    CHECK(s[0] == doctest::Approx(-1.0 / 3).epsilon(1e-12));
    CHECK(s[1] == doctest::Approx(2.0 / 3).epsilon(1e-12));
    CHECK(s[2] == doctest::Approx(-1.0 / 3).epsilon(1e-12));
  }

  SUBCASE("rows sum to zero") {
    for (int trial = 0; trial < 30; ++trial) {
      for (TokenId v = 0; v < 3; ++v)
        p.set_logit(ctx, v, 4.0 * (uniform_unit(mix_seed(5, trial, v)) - 0.5));
      for (TokenId v = 0; v < 3; ++v) {
        const auto s = p.score_row(ctx, v);
        double sum = 0.0;
        for (double x : s) sum += x;
        CHECK(std::fabs(sum) <= 1e-15);
      }
    }
  }

  SUBCASE("matches finite differences of sequence_logprob") {
    const std::vector<TokenId> prompt = {0};
    const PolicyTable q = make_random_policy(3, 1, prompt, 3, 2025, 1.0);
    const std::vector<TokenId> response = {1, 0, 2};
    const auto grad_fn = [&](const PolicyTable& t) {
      LogitGrad g;
      std::uint64_t c = t.context_from_prompt(prompt);
      for (std::size_t i = 0; i < response.size(); ++i) {
        const auto row = t.score_row(c, response[i]);
        auto& dst = g.row(c, t.vocab_size());
        for (std::size_t v = 0; v < row.size(); ++v) dst[v] += row[v];
        if (i + 1 < response.size()) c = t.context_advance(c, response[i]);
      }
      return g;
    };
    const auto loss_fn = [&](const PolicyTable& t) { return t.sequence_logprob(prompt, response); };
    CHECK(oracle::finite_diff_max_rel_err(grad_fn, loss_fn, q) < 1e-5);
  }
}

TEST_CASE("token_entropy") {
  SUBCASE("uniform is maximal") {
    PolicyTable p(4, 1);
    const std::uint64_t ctx = p.context_from_prompt(std::vector<TokenId>{});
    CHECK(p.token_entropy(ctx) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  }

  SUBCASE("saturated is near zero") {
    PolicyTable p(3, 1);
    const std::uint64_t ctx = p.context_from_prompt(std::vector<TokenId>{0});
    p.set_logit(ctx, 2, 20.0);
    CHECK(p.token_entropy(ctx) < 1e-4);
    CHECK(p.token_entropy(ctx) >= 0.0);
  }

  SUBCASE("ln 2 logit closed form") {
    PolicyTable p(3, 1);
    const std::uint64_t ctx = p.context_from_prompt(std::vector<TokenId>{0});
    p.set_logit(ctx, 0, std::log(2.0));
    const double expected = -(0.5 * std::log(0.5) + 2 * 0.25 * std::log(0.25));
    CHECK(p.token_entropy(ctx) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("context window") {
  PolicyTable p(3, 3);

  SUBCASE("prompt shorter than the window left-pads") {
    const std::vector<TokenId> prompt = {2};
    const auto win = p.context_tokens(p.context_from_prompt(prompt));
    CHECK(win == std::vector<TokenId>{p.pad(), p.pad(), 2});
  }

  SUBCASE("advance slides the window") {
    const std::vector<TokenId> prompt = {0, 1, 2};
    std::uint64_t ctx = p.context_from_prompt(prompt);
    ctx = p.context_advance(ctx, 0);
    CHECK(p.context_tokens(ctx) == std::vector<TokenId>{1, 2, 0});
  }

  SUBCASE("PAD appears only as a left prefix along any walk") {
    std::uint64_t ctx = p.context_from_prompt(std::vector<TokenId>{1});
    for (int step = 0; step < 5; ++step) {
      const auto win = p.context_tokens(ctx);
      bool content_seen = false;
      for (TokenId t : win) {
        if (t != p.pad()) content_seen = true;
        if (content_seen) CHECK(t != p.pad());
      }
      ctx = p.context_advance(ctx, static_cast<TokenId>(step % 3));
    }
  }

  SUBCASE("equal logits mean equal sequence probabilities") {
    const std::vector<TokenId> prompt = {1, 0};
    const PolicyTable a = make_random_policy(3, 3, prompt, 4, 11, 1.0);
    const PolicyTable b = a;
    CHECK(a.same_logits(b));
    for (int i = 0; i < 10; ++i) {
      const auto s = a.sample_rollout(prompt, 4, static_cast<std::uint64_t>(i));
      CHECK(a.sequence_logprob(prompt, s.tokens) == b.sequence_logprob(prompt, s.tokens));
    }
  }
}

}  // TEST_SUITE
