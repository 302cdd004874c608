// Copyright (c) 2026 minpro-lab authors
// SPDX-License-Identifier: Apache-2.0

#include "minpro/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace minpro {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad numeric value for '" + key + "': " + v);
  }
}

int parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long d = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return static_cast<int>(d);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad integer value for '" + key + "': " + v);
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const unsigned long long d = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return static_cast<std::uint64_t>(d);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad unsigned value for '" + key + "': " + v);
  }
}

std::optional<double> parse_auto_double(const std::string& key, const std::string& v) {
  if (v == "auto") return std::nullopt;
  return parse_double(key, v);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_auto(const std::optional<double>& v) { return v ? fmt(*v) : "auto"; }

const std::set<std::string> kKnownObjectives = {"reinforce",     "grpo",          "gspo",
                                                "cispo",         "m2po",          "minpro",
                                                "prefix_direct", "prefix_filter", "prefix_exact"};

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(lineno) + " is not key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty() || val.empty())
      throw std::invalid_argument("config: line " + std::to_string(lineno) + " has an empty key or value");
    if (!seen.insert(key).second)
      throw std::invalid_argument("config: duplicate key '" + key + "'");

    if (key == "objective") {
      if (kKnownObjectives.find(val) == kKnownObjectives.end())
        throw std::invalid_argument("config: unknown objective '" + val + "'");
      cfg.objective = val;
    } else if (key == "objectives") {
      cfg.objectives = split_list(val);
      if (cfg.objectives.empty()) throw std::invalid_argument("config: empty objectives list");
      for (const std::string& o : cfg.objectives)
        if (kKnownObjectives.find(o) == kKnownObjectives.end())
          throw std::invalid_argument("config: unknown objective '" + o + "'");
    } else if (key == "eps_low") {
      cfg.eps_low = parse_auto_double(key, val);
    } else if (key == "eps_high") {
      cfg.eps_high = parse_auto_double(key, val);
    } else if (key == "m2_budget") {
      cfg.m2_budget = parse_auto_double(key, val);
    } else if (key == "filter_quantile") {
      cfg.filter_quantile = parse_auto_double(key, val);
    } else if (key == "aggregation") {
      if (val != "auto" && val != "token_mean" && val != "seq_mean")
        throw std::invalid_argument("config: aggregation must be auto, token_mean, or seq_mean");
      cfg.aggregation = val;
    } else if (key == "env") {
      if (val != "echo" && val != "summod")
        throw std::invalid_argument("config: env must be echo or summod");
      cfg.env = val;
    } else if (key == "echo_vocab") {
      cfg.echo_vocab = parse_int(key, val);
    } else if (key == "summod_base") {
      cfg.summod_base = parse_int(key, val);
    } else if (key == "summod_digits") {
      cfg.summod_digits = parse_int(key, val);
    } else if (key == "summod_reasoning_budget") {
      cfg.summod_reasoning_budget = parse_int(key, val);
    } else if (key == "dataset_seed") {
      cfg.dataset_seed = parse_u64(key, val);
    } else if (key == "context_len") {
      cfg.context_len = parse_int(key, val);
    } else if (key == "t_max") {
      cfg.t_max = parse_int(key, val);
    } else if (key == "prompts_per_batch") {
      cfg.prompts_per_batch = parse_int(key, val);
    } else if (key == "group_size") {
      cfg.group_size = parse_int(key, val);
    } else if (key == "minibatch_count") {
      cfg.minibatch_count = parse_int(key, val);
    } else if (key == "staleness") {
      cfg.staleness = parse_int(key, val);
    } else if (key == "learning_rate") {
      cfg.learning_rate = parse_double(key, val);
    } else if (key == "optimizer") {
      if (val != "sgd" && val != "adam")
        throw std::invalid_argument("config: optimizer must be sgd or adam");
      cfg.optimizer = val;
    } else if (key == "adam_beta1") {
      cfg.adam_beta1 = parse_double(key, val);
    } else if (key == "adam_beta2") {
      cfg.adam_beta2 = parse_double(key, val);
    } else if (key == "adam_epsilon") {
      cfg.adam_epsilon = parse_double(key, val);
    } else if (key == "warmup_steps") {
      cfg.warmup_steps = parse_int(key, val);
    } else if (key == "global_steps") {
      cfg.global_steps = parse_int(key, val);
    } else if (key == "seed") {
      cfg.seed = parse_u64(key, val);
    } else {
      throw std::invalid_argument("config: unknown key '" + key + "'");
    }
  }
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string echo_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "objective = " << cfg.objective << "\n";
  out << "objectives = ";
  for (std::size_t i = 0; i < cfg.objectives.size(); ++i)
    out << (i ? "," : "") << cfg.objectives[i];
  out << "\n";
  out << "eps_low = " << fmt_auto(cfg.eps_low) << "\n";
  out << "eps_high = " << fmt_auto(cfg.eps_high) << "\n";
  out << "m2_budget = " << fmt_auto(cfg.m2_budget) << "\n";
  out << "filter_quantile = " << fmt_auto(cfg.filter_quantile) << "\n";
  out << "aggregation = " << cfg.aggregation << "\n";
  out << "env = " << cfg.env << "\n";
  out << "echo_vocab = " << cfg.echo_vocab << "\n";
  out << "summod_base = " << cfg.summod_base << "\n";
  out << "summod_digits = " << cfg.summod_digits << "\n";
  out << "summod_reasoning_budget = " << cfg.summod_reasoning_budget << "\n";
  out << "dataset_seed = " << cfg.dataset_seed << "\n";
  out << "context_len = " << cfg.context_len << "\n";
  out << "t_max = " << cfg.t_max << "\n";
  out << "prompts_per_batch = " << cfg.prompts_per_batch << "\n";
  out << "group_size = " << cfg.group_size << "\n";
  out << "minibatch_count = " << cfg.minibatch_count << "\n";
  out << "staleness = " << cfg.staleness << "\n";
  out << "learning_rate = " << fmt(cfg.learning_rate) << "\n";
  out << "optimizer = " << cfg.optimizer << "\n";
  out << "adam_beta1 = " << fmt(cfg.adam_beta1) << "\n";
  out << "adam_beta2 = " << fmt(cfg.adam_beta2) << "\n";
  out << "adam_epsilon = " << fmt(cfg.adam_epsilon) << "\n";
  out << "warmup_steps = " << cfg.warmup_steps << "\n";
  out << "global_steps = " << cfg.global_steps << "\n";
  out << "seed = " << cfg.seed << "\n";
  return out.str();
}

ObjectiveSpec resolve_objective(const std::string& name, const ExperimentConfig& cfg) {
  Aggregation agg;
  if (cfg.aggregation == "token_mean") {
    agg = Aggregation::TokenMean;
  } else if (cfg.aggregation == "seq_mean") {
    agg = Aggregation::SeqMean;
  } else {
    agg = name == "gspo" ? Aggregation::SeqMean : Aggregation::TokenMean;
  }

  if (name == "reinforce") return ObjectiveSpec::reinforce(agg);
  if (name == "grpo")
    return ObjectiveSpec::grpo(cfg.eps_low.value_or(0.2), cfg.eps_high.value_or(0.28), agg);
  if (name == "gspo")
    return ObjectiveSpec::gspo(cfg.eps_low.value_or(2e-3), cfg.eps_high.value_or(2e-3));
  if (name == "cispo")
    return ObjectiveSpec::cispo(cfg.eps_low.value_or(1.0), cfg.eps_high.value_or(4.0), agg);
  if (name == "m2po") return ObjectiveSpec::m2po(cfg.m2_budget.value_or(0.04), agg);
  if (name == "minpro")
    return ObjectiveSpec::minpro(cfg.eps_low.value_or(1.0), cfg.eps_high.value_or(4.0), agg);
  if (name == "prefix_direct")
    return ObjectiveSpec::prefix_direct(cfg.eps_low.value_or(1.0), cfg.eps_high.value_or(4.0), agg);
  if (name == "prefix_filter")
    return ObjectiveSpec::prefix_filter(cfg.filter_quantile.value_or(0.01),
                                        cfg.eps_low.value_or(1.0), cfg.eps_high.value_or(4.0), agg);
  if (name == "prefix_exact") return ObjectiveSpec::prefix_exact(agg);
  throw std::invalid_argument("config: unknown objective '" + name + "'");
}

Environment to_environment(const ExperimentConfig& cfg) {
  if (cfg.env == "echo") return Environment::echo(cfg.echo_vocab, cfg.dataset_seed);
  return Environment::sum_mod(cfg.summod_base, cfg.summod_digits, cfg.summod_reasoning_budget,
                              cfg.dataset_seed);
}

TrainConfig to_train_config(const ExperimentConfig& cfg, const std::string& objective_name,
                            std::optional<std::uint64_t> seed_override) {
  TrainConfig tc;
  tc.objective = resolve_objective(objective_name.empty() ? cfg.objective : objective_name, cfg);
  tc.env = to_environment(cfg);
  tc.context_len = cfg.context_len;
  tc.t_max = cfg.t_max;
  tc.prompts_per_batch = cfg.prompts_per_batch;
  tc.group_size = cfg.group_size;
  tc.minibatch_count = cfg.minibatch_count;
  tc.staleness = cfg.staleness;
  tc.learning_rate = cfg.learning_rate;
  tc.optimizer = cfg.optimizer == "adam" ? OptimizerKind::Adam : OptimizerKind::Sgd;
  tc.adam_beta1 = cfg.adam_beta1;
  tc.adam_beta2 = cfg.adam_beta2;
  tc.adam_epsilon = cfg.adam_epsilon;
  tc.warmup_steps = cfg.warmup_steps;
  tc.global_steps = cfg.global_steps;
  tc.seed = seed_override.value_or(cfg.seed);
  tc.validate();
  return tc;
}

}  // namespace minpro
