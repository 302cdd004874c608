// Copyright (c) 2026 minpro-lab authors
// SPDX-License-Identifier: Apache-2.0
//
// minpro_lab: verify the gradient oracles, train a policy, compare
// objectives, or evaluate a saved policy.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "minpro/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"off-policy policy-gradient laboratory"};
  app.require_subcommand(1);

  // verify
  auto* verify = app.add_subcommand("verify", "run the gradient/unbiasedness oracle suite");
  bool corrupt = false;
  verify->add_flag("--corrupt-score", corrupt,
                   "fault injection: perturb one computed gradient (harness self-test)");

  // train
  auto* train = app.add_subcommand("train", "train one objective and write metrics + policy");
  std::string train_config, train_out;
  bool train_det = false;
  train->add_option("--config", train_config, "config file")->required();
  train->add_option("--out", train_out, "output directory")->required();
  train->add_flag("--deterministic", train_det, "single-threaded deterministic mode");

  // compare
  auto* compare = app.add_subcommand("compare", "run all configured objectives across seeds");
  std::string cmp_config, cmp_out, cmp_seeds = "1";
  bool cmp_det = false, cmp_plot = false;
  compare->add_option("--config", cmp_config, "config file")->required();
  compare->add_option("--out", cmp_out, "output directory")->required();
  compare->add_option("--seeds", cmp_seeds, "comma-separated seed list")->required();
  compare->add_flag("--deterministic", cmp_det, "single-threaded deterministic mode");
  compare->add_flag("--plot", cmp_plot, "emit per-metric SVG line charts");

  // eval
  auto* eval = app.add_subcommand("eval", "pass@k of a saved policy");
  std::string eval_policy, eval_config;
  int eval_k = 1, eval_prompts = 200;
  std::uint64_t eval_seed = 1;
  eval->add_option("--policy", eval_policy, "policy.json path")->required();
  eval->add_option("--k", eval_k, "attempts per prompt")->required();
  eval->add_option("--config", eval_config, "config file for the environment (defaults apply)");
  eval->add_option("--prompts", eval_prompts, "number of eval prompts");
  eval->add_option("--seed", eval_seed, "eval sampling seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*verify) {
      minpro::VerifyOptions opts;
      opts.corrupt_score = corrupt;
      return minpro::cli::cmd_verify(opts, std::cout);
    }
    if (*train) return minpro::cli::cmd_train(train_config, train_out, train_det, std::cout);
    if (*compare) {
      std::vector<std::uint64_t> seeds;
      std::string item;
      std::stringstream ss(cmp_seeds);
      while (std::getline(ss, item, ','))
        if (!item.empty()) seeds.push_back(std::stoull(item));
      return minpro::cli::cmd_compare(cmp_config, cmp_out, seeds, cmp_det, cmp_plot, std::cout);
    }
    if (*eval)
      return minpro::cli::cmd_eval(eval_policy, eval_k, eval_config, eval_prompts, eval_seed,
                                   std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
