// Copyright (c) 2026 minpro-lab authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <vector>

#include "minpro/common.hpp"
#include "minpro/ratios.hpp"

using namespace minpro;

TEST_SUITE("ratios") {

TEST_CASE("compute_trace on-policy identity is exact") {
  const std::vector<double> lp = {-0.3, -1.2, -0.05, -2.0};
  const RatioTrace tr = compute_trace(lp, lp);
  for (std::size_t t = 0; t < lp.size(); ++t) {
    CHECK(tr.token_ratio[t] == 1.0);
    CHECK(tr.prefix_ratio[t] == 1.0);
    CHECK(tr.min_prefix[t] == 1.0);
    CHECK(tr.log_token_ratio[t] == 0.0);
  }
  CHECK_FALSE(tr.overflow);
}

TEST_CASE("compute_trace worked example") {
  // token ratios 2.0, 1.0, 0.5
  const std::vector<double> lp_old = {0.0, 0.0, 0.0};
  const std::vector<double> lp_new = {std::log(2.0), 0.0, std::log(0.5)};
  const RatioTrace tr = compute_trace(lp_new, lp_old);
  CHECK(tr.token_ratio[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(tr.token_ratio[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(tr.token_ratio[2] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(tr.prefix_ratio[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(tr.prefix_ratio[1] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(tr.prefix_ratio[2] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(tr.min_prefix[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(tr.min_prefix[1] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(tr.min_prefix[2] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("compute_trace properties on random traces") {
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 50;
    std::vector<double> lp_new(n), lp_old(n);
    for (std::size_t t = 0; t < n; ++t) {
      lp_new[t] = -3.0 * uniform_unit(mix_seed(1, trial, t, 0));
      lp_old[t] = -3.0 * uniform_unit(mix_seed(1, trial, t, 1));
    }
    const RatioTrace tr = compute_trace(lp_new, lp_old);

    // prefix product consistency against an independent accumulation
    double log_sum = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      CHECK(tr.token_ratio[t] > 0.0);
      log_sum += lp_new[t] - lp_old[t];
      if (t > 0)
        CHECK(tr.prefix_ratio[t] ==
              doctest::Approx(tr.prefix_ratio[t - 1] * tr.token_ratio[t]).epsilon(1e-10));
    }
    CHECK(tr.prefix_ratio[n - 1] == doctest::Approx(std::exp(log_sum)).epsilon(1e-10));

    // running minimum is non-increasing once the prefix is non-empty
    for (std::size_t t = 2; t < n; ++t) CHECK(tr.min_prefix[t] <= tr.min_prefix[t - 1]);
    for (std::size_t t = 1; t < n; ++t) {
      double mn = tr.token_ratio[0];
      for (std::size_t i = 1; i < t; ++i) mn = std::min(mn, tr.token_ratio[i]);
      CHECK(tr.min_prefix[t] == doctest::Approx(mn).epsilon(1e-12));
    }
  }
}

TEST_CASE("compute_trace input errors") {
  const std::vector<double> a = {-0.1, -0.2};
  const std::vector<double> b = {-0.1};
  CHECK_THROWS_AS((void)compute_trace(a, b), std::invalid_argument);
  CHECK_THROWS_AS((void)compute_trace(std::vector<double>{}, std::vector<double>{}),
                  std::invalid_argument);
  const std::vector<double> nan = {-0.1, std::nan("")};
  CHECK_THROWS_AS((void)compute_trace(a, nan), std::invalid_argument);
  const std::vector<double> inf = {-0.1, -std::numeric_limits<double>::infinity()};
  CHECK_THROWS_AS((void)compute_trace(inf, a), std::invalid_argument);
}

TEST_CASE("compute_trace flags prefix overflow") {
  const std::size_t n = 40;
  std::vector<double> lp_new(n, 0.0), lp_old(n, -25.0);  // each token ratio e^25
  const RatioTrace tr = compute_trace(lp_new, lp_old);
  CHECK(tr.overflow);
  CHECK(std::isinf(tr.prefix_ratio.back()));
  CHECK(tr.token_ratio[0] == doctest::Approx(std::exp(25.0)));
}

TEST_CASE("soft_clip_coeff") {
  CHECK(soft_clip_coeff(5.5, {1.0, 4.0}) == 5.0);
  CHECK(soft_clip_coeff(0.7, {0.2, 0.28}) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(soft_clip_coeff(1.0, {0.2, 0.28}) == 1.0);
  CHECK(soft_clip_coeff(1.0, {1.0, 4.0}) == 1.0);
  CHECK(soft_clip_coeff(std::numeric_limits<double>::infinity(), {1.0, 4.0}) == 5.0);
  CHECK(soft_clip_coeff(0.0, {0.2, 0.28}) == doctest::Approx(0.8).epsilon(1e-15));

  SUBCASE("idempotence") {
    for (int i = 0; i < 100; ++i) {
      const double x = 8.0 * (uniform_unit(mix_seed(2, i)) - 0.25);
      const ClipRange r{0.3, 2.0};
      CHECK(soft_clip_coeff(soft_clip_coeff(x, r), r) == soft_clip_coeff(x, r));
    }
  }
}

TEST_CASE("hard_clip_gate basics") {
  const ClipRange r{0.2, 0.28};
  CHECK(hard_clip_is_clipped(1.4, +1.0, r));        // above the ceiling, positive advantage
  CHECK_FALSE(hard_clip_is_clipped(1.4, -1.0, r));  // max branch keeps the ratio
  CHECK_FALSE(hard_clip_is_clipped(1.0, +1.0, r));
  CHECK_FALSE(hard_clip_is_clipped(1.0, -1.0, r));
  CHECK_FALSE(hard_clip_is_clipped(1.0, 0.0, r));
  CHECK(hard_clip_is_clipped(0.5, -1.0, r));
  CHECK_FALSE(hard_clip_is_clipped(0.5, +1.0, r));
  CHECK_FALSE(hard_clip_is_clipped(123.0, 0.0, r));  // zero advantage is always active
}

TEST_CASE("hard_clip_gate agrees with the scalar surrogate derivative") {
  // d/dx min(x*adv, clamp(x)*adv) vanishes exactly when the gate reports
  // clipped; checked by finite differences away from the clip boundaries.
  int checked = 0;
  for (int i = 0; checked < 10000; ++i) {
    const double rho = 0.05 + 2.5 * uniform_unit(mix_seed(3, i, 0));
    const double adv = 2.0 * (uniform_unit(mix_seed(3, i, 1)) - 0.5);
    const double el = uniform_unit(mix_seed(3, i, 2));
    const ClipRange r{el, 0.05 + el};
    const double h = 1e-6;
    if (std::fabs(rho - r.lo()) < 10 * h || std::fabs(rho - r.hi()) < 10 * h) continue;
    if (std::fabs(adv) < 1e-3) continue;
    const auto f = [&](double x) { return std::min(x * adv, soft_clip_coeff(x, r) * adv); };
    const double deriv = (f(rho + h) - f(rho - h)) / (2 * h);
    const bool surrogate_clipped = std::fabs(deriv) < 1e-9;
    CHECK(surrogate_clipped == hard_clip_is_clipped(rho, adv, r));
    ++checked;
  }
}

TEST_CASE("clip range validity") {
  CHECK(ClipRange{0.2, 0.28}.valid());
  CHECK(ClipRange{1.0, 4.0}.valid());     // lower bound exactly 0 is allowed
  CHECK(ClipRange{2e-3, 2e-3}.valid());
  CHECK_FALSE(ClipRange{0.0, 0.0}.valid());   // empty interval
  CHECK_FALSE(ClipRange{1.5, 4.0}.valid());   // lower bound below 0
  CHECK_FALSE(ClipRange{-0.1, 0.3}.valid());
  CHECK_FALSE(ClipRange{0.1, -0.3}.valid());
}

}  // TEST_SUITE
