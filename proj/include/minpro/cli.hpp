// Copyright (c) 2026 minpro-lab authors
// SPDX-License-Identifier: Apache-2.0
//
// Command implementations behind the minpro_lab binary. Kept as a library so
// tests can drive the exact code paths the executable uses.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "minpro/config.hpp"
#include "minpro/policy.hpp"
#include "minpro/trainer.hpp"
#include "minpro/verify.hpp"

namespace minpro::cli {

/// metrics.csv header, fixed and byte-exact across runs.
extern const char* const kMetricsHeader;

std::string metrics_csv(std::span<const TrainRecord> records);
void write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

/// policy.json: {"vocab_size", "context_len", "version", "logits": [...]},
/// logit entries sorted by context window for canonical output.
std::string policy_to_json(const PolicyTable& p);
PolicyTable policy_from_json(const std::string& json_text);

/// Oracle verification suite; prints one line per check. Returns 0 iff all
/// checks pass.
int cmd_verify(const VerifyOptions& opts, std::ostream& out);

/// Train one objective; writes metrics.csv, policy.json, and config.txt (the
/// resolved configuration echo) into out_dir. Returns 0 on success, 2 when
/// the run aborted on a numeric error (partial metrics are still written).
int cmd_train(const std::string& config_path, const std::string& out_dir, bool deterministic,
              std::ostream& out);

/// Run every configured objective for each seed with shared prompts and
/// write one long-format compare.csv (run_id, objective, seed, global_step,
/// update_index, metric, value). With `plot`, also emits per-metric SVG line
/// charts of the seed-averaged per-step values.
int cmd_compare(const std::string& config_path, const std::string& out_dir,
                const std::vector<std::uint64_t>& seeds, bool deterministic, bool plot,
                std::ostream& out);

/// pass@k of a saved policy on the configured environment.
int cmd_eval(const std::string& policy_path, int k, const std::string& config_path,
             int num_prompts, std::uint64_t seed, std::ostream& out);

}  // namespace minpro::cli
