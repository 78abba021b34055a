#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "snaper/adaptation.hpp"
#include "snaper/criteria.hpp"

namespace snaper {

enum class SamplingMode { kFixed, kUntilRhat };

// One experiment run, fully materialized. resolved() emits every key with
// its final value so a run can be reproduced from the artifact alone.
struct RunConfig {
  // model
  std::string model_name = "diag_gaussian";    // or logistic_regression
  std::vector<double> model_scales = {1.0};    // diag_gaussian
  std::string model_csv;                       // logistic: CSV path, optional
  bool model_standardize = true;
  double model_prior_scale = 1.0;
  int synthetic_n = 200;
  int synthetic_dim = 25;
  std::uint64_t synthetic_seed = 42;
  double synthetic_theta_scale = 1.0;
  std::vector<long> softplus_dims;             // coordinates to unconstrain

  // sampler
  CriterionKind criterion = CriterionKind::kSnaper;
  int chains = 64;
  std::uint64_t seed = 0;

  // schedule
  int warmup_steps = 1000;
  int init_steps = 100;
  int averaging_start = 0;  // 0 = auto (max(init, warmup/2))

  // sampling phase
  SamplingMode sampling_mode = SamplingMode::kFixed;
  long sampling_draws = 1000;
  long sampling_max_draws = 20000;
  double rhat_threshold = 1.01;
  int rhat_check_every = 100;
  bool store_draws = true;

  // adaptation hyperparameters
  AdaptOptions adapt;

  std::string out_dir = "out";
  bool quiet = false;

  void validate() const;
  Schedule schedule() const;
  // Sorted key = value lines with all defaults materialized.
  std::map<std::string, std::string> resolved() const;
};

struct SweepConfig {
  std::vector<double> tau_grid;  // mean trajectory lengths, strictly increasing
  long draws_per_point = 2000;
  int warmup_per_point = 600;
  bool adapt_mass = true;

  void validate() const;
  std::map<std::string, std::string> resolved() const;
};

enum class CompareMode { kLongRun, kShortRun };

struct CompareConfig {
  CompareMode mode = CompareMode::kLongRun;
  std::vector<CriterionKind> criteria;
  int replicates = 20;
  double percentile = 10.0;  // long-run: of min-ESS/grad; short-run: 90 of grads

  void validate() const;
  std::map<std::string, std::string> resolved() const;
};

// Flat `key = value` text, '#' comments, dotted section names. Unknown keys
// are rejected with the offending key in the message.
struct ParsedConfig {
  std::map<std::string, std::string> values;

  bool has(const std::string& key) const { return values.count(key) > 0; }
};

ParsedConfig parse_config_text(const std::string& text);
ParsedConfig parse_config_file(const std::string& path);

// Extract typed configs. `sections` controls which key groups are legal in
// this file (run keys are always legal).
RunConfig make_run_config(const ParsedConfig& parsed);
SweepConfig make_sweep_config(const ParsedConfig& parsed);
CompareConfig make_compare_config(const ParsedConfig& parsed);

// Rejects keys outside the union schema for the given command
// ("run" | "sweep" | "compare").
void reject_unknown_keys(const ParsedConfig& parsed, const std::string& command);

std::string serialize_key_values(const std::map<std::string, std::string>& kv);

// Scale lists accept repeat tokens: "1,0.1x300" is 1 followed by 300 copies
// of 0.1.
std::vector<double> parse_scale_list(const std::string& text);

}  // namespace snaper
