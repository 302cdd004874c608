// Copyright (c) 2026 minpro-lab authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>
#include <sstream>

#include "minpro/cli.hpp"
#include "minpro/config.hpp"
#include "minpro/verify.hpp"

using namespace minpro;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("minpro_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// small, fast training setup
const char* kSmallConfig =
    "objective = minpro\n"
    "objectives = grpo,cispo,minpro\n"
    "env = echo\n"
    "echo_vocab = 3\n"
    "context_len = 1\n"
    "t_max = 6\n"
    "prompts_per_batch = 8\n"
    "group_size = 4\n"
    "minibatch_count = 2\n"
    "staleness = 1\n"
    "global_steps = 4\n"
    "learning_rate = 0.5\n"
    "seed = 3\n";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("config parsing") {
  SUBCASE("defaults resolve and round-trip") {
    const ExperimentConfig cfg = parse_config_text("");
    const ExperimentConfig again = parse_config_text(echo_config(cfg));
    CHECK(cfg == again);
  }

  SUBCASE("explicit values round-trip") {
    const ExperimentConfig cfg = parse_config_text(kSmallConfig);
    CHECK(cfg.objective == "minpro");
    CHECK(cfg.objectives == std::vector<std::string>{"grpo", "cispo", "minpro"});
    CHECK(cfg.env == "echo");
    const ExperimentConfig again = parse_config_text(echo_config(cfg));
    CHECK(cfg == again);
  }

  SUBCASE("unknown keys are a hard error") {
    CHECK_THROWS_AS((void)parse_config_text("objectiv = minpro\n"), std::invalid_argument);
    CHECK_THROWS_AS((void)parse_config_text("learning_rate = fast\n"), std::invalid_argument);
    CHECK_THROWS_AS((void)parse_config_text("objective = ppo\n"), std::invalid_argument);
    CHECK_THROWS_AS((void)parse_config_text("seed = 1\nseed = 2\n"), std::invalid_argument);
  }

  SUBCASE("comments and blank lines are ignored") {
    const ExperimentConfig cfg =
        parse_config_text("# a comment\n\n  seed = 9  # trailing\n");
    CHECK(cfg.seed == 9);
  }

  SUBCASE("per-objective clip defaults") {
    const ExperimentConfig cfg = parse_config_text("");
    CHECK(resolve_objective("grpo", cfg).clip.eps_high == doctest::Approx(0.28));
    CHECK(resolve_objective("gspo", cfg).clip.eps_high == doctest::Approx(2e-3));
    CHECK(resolve_objective("gspo", cfg).aggregation == Aggregation::SeqMean);
    CHECK(resolve_objective("cispo", cfg).clip.eps_low == doctest::Approx(1.0));
    CHECK(resolve_objective("cispo", cfg).aggregation == Aggregation::TokenMean);
    CHECK(resolve_objective("m2po", cfg).m2_budget == doctest::Approx(0.04));
    CHECK(resolve_objective("prefix_filter", cfg).filter_quantile == doctest::Approx(0.01));

    const ExperimentConfig wide = parse_config_text("eps_low = 0.5\neps_high = 0.5\n");
    CHECK(resolve_objective("grpo", wide).clip.eps_low == doctest::Approx(0.5));
    CHECK(resolve_objective("cispo", wide).clip.eps_high == doctest::Approx(0.5));
  }
}

TEST_CASE("metrics csv schema") {
  std::vector<TrainRecord> records(1);
  records[0].global_step = 1;
  records[0].update_index = 1;
  const std::string csv = cli::metrics_csv(records);
  CHECK(csv.substr(0, csv.find('\n')) ==
        "global_step,update_index,policy_version,behavior_version,mean_reward,"
        "mean_token_entropy,clip_fraction,mask_fraction,degenerate_group_fraction,"
        "mean_abs_log_ratio,max_abs_log_ratio,grad_norm");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
}

TEST_CASE("policy json round-trip") {
  const std::vector<TokenId> prompt = {0, 1};
  PolicyTable p = make_random_policy(4, 2, prompt, 4, 31, 1.3);
  p.bump_version();
  p.bump_version();
  const std::string text = cli::policy_to_json(p);
  const PolicyTable q = cli::policy_from_json(text);
  CHECK(q.vocab_size() == p.vocab_size());
  CHECK(q.context_len() == p.context_len());
  CHECK(q.version() == p.version());
  CHECK(q.same_logits(p));
}

TEST_CASE("cmd_train writes outputs and reruns byte-identically") {
  const fs::path dir = temp_dir("train");
  const fs::path cfg_path = dir / "run.conf";
  cli::write_file(cfg_path.string(), kSmallConfig);

  std::ostringstream log;
  const int rc1 = cli::cmd_train(cfg_path.string(), (dir / "a").string(), true, log);
  CHECK(rc1 == 0);
  const std::string metrics = cli::read_file((dir / "a" / "metrics.csv").string());
  // header + steps * minibatch rows
  CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 1 + 4 * 2);
  CHECK(fs::exists(dir / "a" / "policy.json"));

  // the resolved config echo parses back to the same configuration
  const ExperimentConfig cfg = parse_config_file(cfg_path.string());
  const ExperimentConfig echoed = parse_config_file((dir / "a" / "config.txt").string());
  CHECK(cfg == echoed);

  const int rc2 = cli::cmd_train(cfg_path.string(), (dir / "b").string(), true, log);
  CHECK(rc2 == 0);
  CHECK(cli::read_file((dir / "b" / "metrics.csv").string()) == metrics);
  CHECK(cli::read_file((dir / "b" / "policy.json").string()) ==
        cli::read_file((dir / "a" / "policy.json").string()));
}

TEST_CASE("cmd_compare emits one long-format row set per run") {
  const fs::path dir = temp_dir("compare");
  const fs::path cfg_path = dir / "run.conf";
  cli::write_file(cfg_path.string(), kSmallConfig);

  std::ostringstream log;
  const int rc =
      cli::cmd_compare(cfg_path.string(), (dir / "out").string(), {1, 2, 3}, true, true, log);
  CHECK(rc == 0);
  const std::string csv = cli::read_file((dir / "out" / "compare.csv").string());
  CHECK(csv.substr(0, csv.find('\n')) ==
        "run_id,objective,seed,global_step,update_index,metric,value");

  std::set<std::string> run_ids;
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) run_ids.insert(line.substr(0, line.find(',')));
  CHECK(run_ids.size() == 9);  // 3 objectives x 3 seeds
  CHECK(fs::exists(dir / "out" / "mean_reward.svg"));
}

TEST_CASE("cmd_eval reads a trained policy") {
  const fs::path dir = temp_dir("eval");
  const fs::path cfg_path = dir / "run.conf";
  cli::write_file(cfg_path.string(), kSmallConfig);
  std::ostringstream log;
  REQUIRE(cli::cmd_train(cfg_path.string(), (dir / "run").string(), true, log) == 0);
  std::ostringstream out;
  const int rc = cli::cmd_eval((dir / "run" / "policy.json").string(), 4, cfg_path.string(), 50,
                               7, out);
  CHECK(rc == 0);
  CHECK(out.str().find("pass@4 = ") != std::string::npos);
}

TEST_CASE("cmd_verify fault injection fails and names the check") {
  VerifyOptions opts;
  opts.corrupt_score = true;
  std::ostringstream out;
  const int rc = cli::cmd_verify(opts, out);
  CHECK(rc != 0);
  CHECK(out.str().find("FAILED: policy_gradient.direct_vs_advantage_form") != std::string::npos);
}

}  // TEST_SUITE
