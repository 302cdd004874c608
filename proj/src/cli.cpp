// Copyright (c) 2026 minpro-lab authors
// SPDX-License-Identifier: Apache-2.0

#include "minpro/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace minpro::cli {

namespace fs = std::filesystem;
using nlohmann::json;

const char* const kMetricsHeader =
    "global_step,update_index,policy_version,behavior_version,mean_reward,mean_token_entropy,"
    "clip_fraction,mask_fraction,degenerate_group_fraction,mean_abs_log_ratio,max_abs_log_ratio,"
    "grad_norm";

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

int resolve_threads(bool deterministic) { return deterministic ? 1 : worker_count(); }

}  // namespace

std::string metrics_csv(std::span<const TrainRecord> records) {
  std::ostringstream out;
  out << kMetricsHeader << "\n";
  for (const TrainRecord& r : records) {
    out << r.global_step << ',' << r.update_index << ',' << r.policy_version << ','
        << r.behavior_version << ',' << fmt(r.mean_reward) << ',' << fmt(r.mean_token_entropy)
        << ',' << fmt(r.clip_fraction) << ',' << fmt(r.mask_fraction) << ','
        << fmt(r.degenerate_group_fraction) << ',' << fmt(r.mean_abs_log_ratio) << ','
        << fmt(r.max_abs_log_ratio) << ',' << fmt(r.grad_norm) << "\n";
  }
  return out.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string policy_to_json(const PolicyTable& p) {
  json root;
  root["vocab_size"] = p.vocab_size();
  root["context_len"] = p.context_len();
  root["version"] = p.version();

  std::vector<std::uint64_t> keys;
  keys.reserve(p.rows().size());
  for (const auto& [ctx, row] : p.rows()) keys.push_back(ctx);
  std::sort(keys.begin(), keys.end());

  json entries = json::array();
  for (std::uint64_t key : keys) {
    json e;
    e["context"] = p.context_tokens(key);
    e["logits"] = *p.find_row(key);
    entries.push_back(std::move(e));
  }
  root["logits"] = std::move(entries);
  return root.dump(2) + "\n";
}

PolicyTable policy_from_json(const std::string& json_text) {
  const json root = json::parse(json_text);
  PolicyTable p(root.at("vocab_size").get<int>(), root.at("context_len").get<int>());
  for (const auto& e : root.at("logits")) {
    const std::vector<TokenId> window = e.at("context").get<std::vector<TokenId>>();
    if (static_cast<int>(window.size()) != p.context_len())
      throw std::invalid_argument("policy_from_json: bad context length");
    // re-encode the window: PAD prefix then tokens
    std::vector<TokenId> tokens;
    for (TokenId t : window)
      if (t != p.pad()) tokens.push_back(t);
    const std::uint64_t ctx = p.context_from_prompt(tokens);
    const std::vector<double> logits = e.at("logits").get<std::vector<double>>();
    if (static_cast<int>(logits.size()) != p.vocab_size())
      throw std::invalid_argument("policy_from_json: bad logit row length");
    for (std::size_t v = 0; v < logits.size(); ++v)
      p.set_logit(ctx, static_cast<TokenId>(v), logits[v]);
  }
  const std::int64_t version = root.at("version").get<std::int64_t>();
  for (std::int64_t i = 0; i < version; ++i) p.bump_version();
  return p;
}

int cmd_verify(const VerifyOptions& opts, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<CheckResult> results = run_oracle_suite(opts);
  out << format_results(results);
  for (const CheckResult& r : results)
    if (r.name == "token_relaxed.bias_off_policy")
      out << "token-relaxation bias (mismatched pair): " << fmt(r.measured) << "\n";
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%zu checks, %.2fs\n", results.size(), secs);
  out << buf;
  if (!all_passed(results)) {
    for (const CheckResult& r : results)
      if (!r.passed) out << "FAILED: " << r.name << "\n";
    return 1;
  }
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& out_dir, bool deterministic,
              std::ostream& out) {
  const ExperimentConfig cfg = parse_config_file(config_path);
  TrainConfig tc = to_train_config(cfg);
  tc.threads = resolve_threads(deterministic);

  fs::create_directories(out_dir);
  write_file((fs::path(out_dir) / "config.txt").string(), echo_config(cfg));

  const TrainResult result = run_training(tc);
  write_file((fs::path(out_dir) / "metrics.csv").string(), metrics_csv(result.records));
  write_file((fs::path(out_dir) / "policy.json").string(), policy_to_json(result.final_policy));

  if (result.aborted) {
    out << "aborted at global step " << result.abort_step << ": " << result.abort_reason << "\n";
    return 2;
  }
  const double final_reward = result.records.empty() ? 0.0 : result.records.back().mean_reward;
  out << "trained " << cfg.objective << " for " << tc.global_steps << " steps; final batch reward "
      << fmt(final_reward) << "\n";
  return 0;
}

namespace {

struct MetricColumn {
  const char* name;
  double TrainRecord::*field;
};

constexpr MetricColumn kCompareMetrics[] = {
    {"mean_reward", &TrainRecord::mean_reward},
    {"mean_token_entropy", &TrainRecord::mean_token_entropy},
    {"clip_fraction", &TrainRecord::clip_fraction},
    {"mask_fraction", &TrainRecord::mask_fraction},
    {"degenerate_group_fraction", &TrainRecord::degenerate_group_fraction},
    {"mean_abs_log_ratio", &TrainRecord::mean_abs_log_ratio},
    {"max_abs_log_ratio", &TrainRecord::max_abs_log_ratio},
    {"grad_norm", &TrainRecord::grad_norm},
};

// Minimal self-contained SVG line chart: one polyline per objective of the
// seed-averaged per-step metric.
std::string svg_line_chart(const std::string& metric,
                           const std::map<std::string, std::vector<double>>& series) {
  constexpr int W = 720, H = 420, ML = 60, MR = 150, MT = 30, MB = 40;
  constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                     "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
  double lo = 0.0, hi = 1e-12;
  std::size_t steps = 1;
  for (const auto& [name, ys] : series) {
    steps = std::max(steps, ys.size());
    for (double y : ys) {
      lo = std::min(lo, y);
      hi = std::max(hi, y);
    }
  }
  const double span = hi - lo < 1e-12 ? 1.0 : hi - lo;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << ML << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">" << metric
      << "</text>\n";
  svg << "<line x1=\"" << ML << "\" y1=\"" << H - MB << "\" x2=\"" << W - MR << "\" y2=\""
      << H - MB << "\" stroke=\"#333\"/>\n";
  svg << "<line x1=\"" << ML << "\" y1=\"" << MT << "\" x2=\"" << ML << "\" y2=\"" << H - MB
      << "\" stroke=\"#333\"/>\n";
  char label[64];
  std::snprintf(label, sizeof(label), "%.3g", hi);
  svg << "<text x=\"4\" y=\"" << MT + 4 << "\" font-family=\"sans-serif\" font-size=\"11\">"
      << label << "</text>\n";
  std::snprintf(label, sizeof(label), "%.3g", lo);
  svg << "<text x=\"4\" y=\"" << H - MB << "\" font-family=\"sans-serif\" font-size=\"11\">"
      << label << "</text>\n";

  int idx = 0;
  for (const auto& [name, ys] : series) {
    const char* color = kColors[idx % 8];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < ys.size(); ++i) {
      const double x = ML + (W - ML - MR) * (steps > 1 ? static_cast<double>(i) / (steps - 1) : 0.5);
      const double y = H - MB - (H - MT - MB) * ((ys[i] - lo) / span);
      svg << x << ',' << y << ' ';
    }
    svg << "\"/>\n";
    svg << "<text x=\"" << W - MR + 8 << "\" y=\"" << MT + 16 * idx + 12
        << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" << color << "\">" << name
        << "</text>\n";
    ++idx;
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace

int cmd_compare(const std::string& config_path, const std::string& out_dir,
                const std::vector<std::uint64_t>& seeds, bool deterministic, bool plot,
                std::ostream& out) {
  const ExperimentConfig cfg = parse_config_file(config_path);
  if (seeds.empty()) throw std::invalid_argument("compare: need at least one seed");

  fs::create_directories(out_dir);
  write_file((fs::path(out_dir) / "config.txt").string(), echo_config(cfg));

  std::ostringstream csv;
  csv << "run_id,objective,seed,global_step,update_index,metric,value\n";

  // objective -> per-step seed-averaged metric values (for plots)
  std::map<std::string, std::map<std::string, std::vector<double>>> plot_series;

  for (const std::string& objective : cfg.objectives) {
    for (std::uint64_t seed : seeds) {
      TrainConfig tc = to_train_config(cfg, objective, seed);
      tc.threads = resolve_threads(deterministic);
      const TrainResult result = run_training(tc);
      const std::string run_id = objective + "_seed" + std::to_string(seed);
      if (result.aborted)
        out << run_id << ": aborted at step " << result.abort_step << " ("
            << result.abort_reason << ")\n";

      for (const TrainRecord& r : result.records) {
        for (const MetricColumn& m : kCompareMetrics) {
          csv << run_id << ',' << objective << ',' << seed << ',' << r.global_step << ','
              << r.update_index << ',' << m.name << ',' << fmt(r.*(m.field)) << "\n";
        }
      }

      if (plot) {
        for (const MetricColumn& m : kCompareMetrics) {
          auto& ys = plot_series[m.name][objective];
          if (ys.size() < static_cast<std::size_t>(tc.global_steps))
            ys.assign(static_cast<std::size_t>(tc.global_steps), 0.0);
          std::vector<int> counts(static_cast<std::size_t>(tc.global_steps), 0);
          // average the step's updates, then average over seeds incrementally
          std::vector<double> step_mean(static_cast<std::size_t>(tc.global_steps), 0.0);
          for (const TrainRecord& r : result.records) {
            step_mean[static_cast<std::size_t>(r.global_step - 1)] += r.*(m.field);
            counts[static_cast<std::size_t>(r.global_step - 1)]++;
          }
          for (std::size_t i = 0; i < step_mean.size(); ++i)
            if (counts[i] > 0)
              ys[i] += step_mean[i] / counts[i] / static_cast<double>(seeds.size());
        }
      }
    }
  }

  write_file((fs::path(out_dir) / "compare.csv").string(), csv.str());
  if (plot) {
    for (const auto& [metric, series] : plot_series)
      write_file((fs::path(out_dir) / (metric + ".svg")).string(),
                 svg_line_chart(metric, series));
  }
  out << "compared " << cfg.objectives.size() << " objectives x " << seeds.size() << " seeds\n";
  return 0;
}

int cmd_eval(const std::string& policy_path, int k, const std::string& config_path,
             int num_prompts, std::uint64_t seed, std::ostream& out) {
  const ExperimentConfig cfg =
      config_path.empty() ? ExperimentConfig{} : parse_config_file(config_path);
  const PolicyTable policy = policy_from_json(read_file(policy_path));
  const Environment env = to_environment(cfg);
  if (env.vocab_size() != policy.vocab_size())
    throw std::invalid_argument("eval: policy vocab does not match the configured environment");
  const double score = evaluate_pass_at_k(policy, env, k, num_prompts, cfg.t_max, seed);
  out << "pass@" << k << " = " << fmt(score) << " over " << num_prompts << " prompts\n";
  return 0;
}

}  // namespace minpro::cli
