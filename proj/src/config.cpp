#include "snaper/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "snaper/errors.hpp"

namespace snaper {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

double to_double(const std::string& key, const std::string& v) {
  const char* begin = v.c_str();
  char* end = nullptr;
  const double x = std::strtod(begin, &end);
  if (end == begin || trim(end).size() != 0 || !std::isfinite(x)) {
    throw ConfigError("config key '" + key + "': expected a number, got '" +
                      v + "'");
  }
  return x;
}

long to_long(const std::string& key, const std::string& v) {
  const double x = to_double(key, v);
  const long i = static_cast<long>(x);
  if (static_cast<double>(i) != x) {
    throw ConfigError("config key '" + key + "': expected an integer, got '" +
                      v + "'");
  }
  return i;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  std::uint64_t out = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), out);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw ConfigError("config key '" + key +
                      "': expected an unsigned integer, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" +
                    v + "'");
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string fmt_list(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    out += fmt(xs[i]);
  }
  return out;
}

std::string fmt_list(const std::vector<long>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(xs[i]);
  }
  return out;
}

const std::set<std::string>& run_keys() {
  static const std::set<std::string> keys = {
      "model.name", "model.scales", "model.csv", "model.standardize",
      "model.prior_scale", "model.synthetic.n", "model.synthetic.dim",
      "model.synthetic.seed", "model.synthetic.theta_scale",
      "model.softplus_dims",
      "criterion", "chains", "seed",
      "warmup.steps", "warmup.init_steps", "warmup.averaging_start",
      "sampling.mode", "sampling.draws", "sampling.max_draws",
      "sampling.rhat_threshold", "sampling.check_every",
      "sampling.store_draws",
      "adapt.target_accept", "adapt.learning_rate.tau",
      "adapt.learning_rate.eps", "adapt.learning_rate.oja",
      "adapt.learning_rate.moments", "adapt.kappa",
      "adapt.adam.tau.beta1", "adapt.adam.tau.beta2",
      "adapt.adam.eps.beta1", "adapt.adam.eps.beta2",
      "adapt.init_step_size",
      "out", "quiet"};
  return keys;
}

const std::set<std::string>& sweep_keys() {
  static const std::set<std::string> keys = {
      "sweep.tau_grid", "sweep.draws_per_point", "sweep.warmup_per_point",
      "sweep.adapt_mass"};
  return keys;
}

const std::set<std::string>& compare_keys() {
  static const std::set<std::string> keys = {
      "compare.mode", "compare.criteria", "compare.replicates",
      "compare.percentile"};
  return keys;
}

}  // namespace

std::vector<double> parse_scale_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (tok.empty()) {
      throw ConfigError("empty entry in list: '" + text + "'");
    }
    const auto xpos = tok.find_first_of("xX");
    long repeat = 1;
    std::string value_part = tok;
    if (xpos != std::string::npos && xpos > 0) {
      // allow scientific notation: only treat as repeat if the suffix is an
      // integer count
      const std::string suffix = trim(tok.substr(xpos + 1));
      bool all_digits = !suffix.empty() &&
                        std::all_of(suffix.begin(), suffix.end(), [](char c) {
                          return std::isdigit(static_cast<unsigned char>(c));
                        });
      if (all_digits) {
        repeat = std::stol(suffix);
        value_part = trim(tok.substr(0, xpos));
      }
    }
    const double v = to_double("list entry", value_part);
    if (repeat < 1) {
      throw ConfigError("repeat count must be >= 1 in '" + tok + "'");
    }
    for (long i = 0; i < repeat; ++i) {
      out.push_back(v);
    }
  }
  if (out.empty()) {
    throw ConfigError("empty list: '" + text + "'");
  }
  return out;
}

ParsedConfig parse_config_text(const std::string& text) {
  ParsedConfig out;
  std::stringstream ss(text);
  std::string line;
  long line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected 'key = value', got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": empty key");
    }
    if (out.values.count(key)) {
      throw ConfigError("config key '" + key + "' set twice");
    }
    out.values[key] = value;
  }
  return out;
}

ParsedConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file: " + path);
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

void reject_unknown_keys(const ParsedConfig& parsed,
                         const std::string& command) {
  std::set<std::string> allowed = run_keys();
  if (command == "sweep") {
    allowed.insert(sweep_keys().begin(), sweep_keys().end());
  } else if (command == "compare") {
    allowed.insert(compare_keys().begin(), compare_keys().end());
  } else if (command == "any") {
    allowed.insert(sweep_keys().begin(), sweep_keys().end());
    allowed.insert(compare_keys().begin(), compare_keys().end());
  }
  for (const auto& [key, value] : parsed.values) {
    if (!allowed.count(key)) {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
}

RunConfig make_run_config(const ParsedConfig& p) {
  RunConfig c;
  auto get = [&](const char* key) -> const std::string* {
    auto it = p.values.find(key);
    return it == p.values.end() ? nullptr : &it->second;
  };

  if (auto* v = get("model.name")) c.model_name = trim(*v);
  if (auto* v = get("model.scales")) c.model_scales = parse_scale_list(*v);
  if (auto* v = get("model.csv")) c.model_csv = trim(*v);
  if (auto* v = get("model.standardize"))
    c.model_standardize = to_bool("model.standardize", *v);
  if (auto* v = get("model.prior_scale"))
    c.model_prior_scale = to_double("model.prior_scale", *v);
  if (auto* v = get("model.synthetic.n"))
    c.synthetic_n = static_cast<int>(to_long("model.synthetic.n", *v));
  if (auto* v = get("model.synthetic.dim"))
    c.synthetic_dim = static_cast<int>(to_long("model.synthetic.dim", *v));
  if (auto* v = get("model.synthetic.seed"))
    c.synthetic_seed = to_u64("model.synthetic.seed", *v);
  if (auto* v = get("model.synthetic.theta_scale"))
    c.synthetic_theta_scale = to_double("model.synthetic.theta_scale", *v);
  if (auto* v = get("model.softplus_dims")) {
    c.softplus_dims.clear();
    if (!trim(*v).empty()) {
      for (double d : parse_scale_list(*v)) {
        c.softplus_dims.push_back(static_cast<long>(d));
      }
    }
  }

  if (auto* v = get("criterion")) c.criterion = criterion_from_string(trim(*v));
  if (auto* v = get("chains")) c.chains = static_cast<int>(to_long("chains", *v));
  if (auto* v = get("seed")) c.seed = to_u64("seed", *v);

  if (auto* v = get("warmup.steps"))
    c.warmup_steps = static_cast<int>(to_long("warmup.steps", *v));
  if (auto* v = get("warmup.init_steps"))
    c.init_steps = static_cast<int>(to_long("warmup.init_steps", *v));
  if (auto* v = get("warmup.averaging_start"))
    c.averaging_start = static_cast<int>(to_long("warmup.averaging_start", *v));

  if (auto* v = get("sampling.mode")) {
    const std::string m = trim(*v);
    if (m == "fixed") {
      c.sampling_mode = SamplingMode::kFixed;
    } else if (m == "until_rhat") {
      c.sampling_mode = SamplingMode::kUntilRhat;
    } else {
      throw ConfigError("sampling.mode: expected fixed|until_rhat, got '" +
                        m + "'");
    }
  }
  if (auto* v = get("sampling.draws"))
    c.sampling_draws = to_long("sampling.draws", *v);
  if (auto* v = get("sampling.max_draws"))
    c.sampling_max_draws = to_long("sampling.max_draws", *v);
  if (auto* v = get("sampling.rhat_threshold"))
    c.rhat_threshold = to_double("sampling.rhat_threshold", *v);
  if (auto* v = get("sampling.check_every"))
    c.rhat_check_every = static_cast<int>(to_long("sampling.check_every", *v));
  if (auto* v = get("sampling.store_draws"))
    c.store_draws = to_bool("sampling.store_draws", *v);

  if (auto* v = get("adapt.target_accept"))
    c.adapt.target_accept = to_double("adapt.target_accept", *v);
  if (auto* v = get("adapt.learning_rate.tau"))
    c.adapt.learning_rate_tau = to_double("adapt.learning_rate.tau", *v);
  if (auto* v = get("adapt.learning_rate.eps"))
    c.adapt.learning_rate_eps = to_double("adapt.learning_rate.eps", *v);
  if (auto* v = get("adapt.learning_rate.oja"))
    c.adapt.oja_rate_scale = to_double("adapt.learning_rate.oja", *v);
  if (auto* v = get("adapt.learning_rate.moments"))
    c.adapt.moment_rate_scale = to_double("adapt.learning_rate.moments", *v);
  if (auto* v = get("adapt.kappa")) c.adapt.kappa = to_double("adapt.kappa", *v);
  if (auto* v = get("adapt.adam.tau.beta1"))
    c.adapt.beta1_tau = to_double("adapt.adam.tau.beta1", *v);
  if (auto* v = get("adapt.adam.tau.beta2"))
    c.adapt.beta2_tau = to_double("adapt.adam.tau.beta2", *v);
  if (auto* v = get("adapt.adam.eps.beta1"))
    c.adapt.beta1_eps = to_double("adapt.adam.eps.beta1", *v);
  if (auto* v = get("adapt.adam.eps.beta2"))
    c.adapt.beta2_eps = to_double("adapt.adam.eps.beta2", *v);
  if (auto* v = get("adapt.init_step_size"))
    c.adapt.init_step_size = to_double("adapt.init_step_size", *v);

  if (auto* v = get("out")) c.out_dir = trim(*v);
  if (auto* v = get("quiet")) c.quiet = to_bool("quiet", *v);

  c.validate();
  return c;
}

void RunConfig::validate() const {
  if (model_name != "diag_gaussian" && model_name != "logistic_regression") {
    throw ConfigError("model.name: expected diag_gaussian|logistic_regression"
                      ", got '" + model_name + "'");
  }
  if (chains < 2) {
    throw ConfigError("chains: need at least 2 for split R-hat");
  }
  if (warmup_steps < init_steps) {
    throw ConfigError("warmup.steps (" + std::to_string(warmup_steps) +
                      ") must be >= warmup.init_steps (" +
                      std::to_string(init_steps) + ")");
  }
  if (init_steps < 1) {
    throw ConfigError("warmup.init_steps must be >= 1");
  }
  if (sampling_draws < 0 || sampling_max_draws < 4) {
    throw ConfigError("sampling.draws/max_draws out of range");
  }
  if (rhat_threshold <= 1.0) {
    throw ConfigError("sampling.rhat_threshold must exceed 1");
  }
  if (rhat_check_every < 1) {
    throw ConfigError("sampling.check_every must be >= 1");
  }
  if (adapt.target_accept <= 0.0 || adapt.target_accept >= 1.0) {
    throw ConfigError("adapt.target_accept must lie in (0,1)");
  }
  if (adapt.kappa <= 0.0) {
    throw ConfigError("adapt.kappa must be positive");
  }
  Schedule s{init_steps, warmup_steps, averaging_start};
  s.validate_and_fill();
}

Schedule RunConfig::schedule() const {
  Schedule s{init_steps, warmup_steps, averaging_start};
  s.validate_and_fill();
  return s;
}

std::map<std::string, std::string> RunConfig::resolved() const {
  std::map<std::string, std::string> kv;
  kv["model.name"] = model_name;
  kv["model.scales"] = fmt_list(model_scales);
  kv["model.csv"] = model_csv;
  kv["model.standardize"] = model_standardize ? "true" : "false";
  kv["model.prior_scale"] = fmt(model_prior_scale);
  kv["model.synthetic.n"] = std::to_string(synthetic_n);
  kv["model.synthetic.dim"] = std::to_string(synthetic_dim);
  kv["model.synthetic.seed"] = std::to_string(synthetic_seed);
  kv["model.synthetic.theta_scale"] = fmt(synthetic_theta_scale);
  kv["model.softplus_dims"] = fmt_list(softplus_dims);
  kv["criterion"] = to_string(criterion);
  kv["chains"] = std::to_string(chains);
  kv["seed"] = std::to_string(seed);
  kv["warmup.steps"] = std::to_string(warmup_steps);
  kv["warmup.init_steps"] = std::to_string(init_steps);
  kv["warmup.averaging_start"] = std::to_string(schedule().averaging_start);
  kv["sampling.mode"] =
      sampling_mode == SamplingMode::kFixed ? "fixed" : "until_rhat";
  kv["sampling.draws"] = std::to_string(sampling_draws);
  kv["sampling.max_draws"] = std::to_string(sampling_max_draws);
  kv["sampling.rhat_threshold"] = fmt(rhat_threshold);
  kv["sampling.check_every"] = std::to_string(rhat_check_every);
  kv["sampling.store_draws"] = store_draws ? "true" : "false";
  kv["adapt.target_accept"] = fmt(adapt.target_accept);
  kv["adapt.learning_rate.tau"] = fmt(adapt.learning_rate_tau);
  kv["adapt.learning_rate.eps"] = fmt(adapt.learning_rate_eps);
  kv["adapt.learning_rate.oja"] = fmt(adapt.oja_rate_scale);
  kv["adapt.learning_rate.moments"] = fmt(adapt.moment_rate_scale);
  kv["adapt.kappa"] = fmt(adapt.kappa);
  kv["adapt.adam.tau.beta1"] = fmt(adapt.beta1_tau);
  kv["adapt.adam.tau.beta2"] = fmt(adapt.beta2_tau);
  kv["adapt.adam.eps.beta1"] = fmt(adapt.beta1_eps);
  kv["adapt.adam.eps.beta2"] = fmt(adapt.beta2_eps);
  kv["adapt.init_step_size"] = fmt(adapt.init_step_size);
  kv["out"] = out_dir;
  kv["quiet"] = quiet ? "true" : "false";
  return kv;
}

SweepConfig make_sweep_config(const ParsedConfig& p) {
  SweepConfig c;
  auto it = p.values.find("sweep.tau_grid");
  if (it == p.values.end()) {
    throw ConfigError("sweep requires sweep.tau_grid");
  }
  c.tau_grid = parse_scale_list(it->second);
  if (auto jt = p.values.find("sweep.draws_per_point"); jt != p.values.end()) {
    c.draws_per_point = to_long("sweep.draws_per_point", jt->second);
  }
  if (auto jt = p.values.find("sweep.warmup_per_point"); jt != p.values.end()) {
    c.warmup_per_point =
        static_cast<int>(to_long("sweep.warmup_per_point", jt->second));
  }
  if (auto jt = p.values.find("sweep.adapt_mass"); jt != p.values.end()) {
    c.adapt_mass = to_bool("sweep.adapt_mass", jt->second);
  }
  c.validate();
  return c;
}

void SweepConfig::validate() const {
  if (tau_grid.empty()) {
    throw ConfigError("sweep.tau_grid must be nonempty");
  }
  for (std::size_t i = 0; i < tau_grid.size(); ++i) {
    if (tau_grid[i] <= 0.0) {
      throw ConfigError("sweep.tau_grid entries must be positive");
    }
    if (i > 0 && tau_grid[i] <= tau_grid[i - 1]) {
      throw ConfigError("sweep.tau_grid must be strictly increasing");
    }
  }
  if (draws_per_point < 8 || warmup_per_point < 100) {
    throw ConfigError("sweep.draws_per_point >= 8 and warmup_per_point >= 100 required");
  }
}

std::map<std::string, std::string> SweepConfig::resolved() const {
  std::map<std::string, std::string> kv;
  kv["sweep.tau_grid"] = fmt_list(tau_grid);
  kv["sweep.draws_per_point"] = std::to_string(draws_per_point);
  kv["sweep.warmup_per_point"] = std::to_string(warmup_per_point);
  kv["sweep.adapt_mass"] = adapt_mass ? "true" : "false";
  return kv;
}

CompareConfig make_compare_config(const ParsedConfig& p) {
  CompareConfig c;
  if (auto it = p.values.find("compare.mode"); it != p.values.end()) {
    const std::string m = trim(it->second);
    if (m == "long_run") {
      c.mode = CompareMode::kLongRun;
    } else if (m == "short_run") {
      c.mode = CompareMode::kShortRun;
    } else {
      throw ConfigError("compare.mode: expected long_run|short_run, got '" +
                        m + "'");
    }
    if (m == "short_run") c.percentile = 90.0;
  }
  auto it = p.values.find("compare.criteria");
  if (it == p.values.end()) {
    throw ConfigError("compare requires compare.criteria");
  }
  std::stringstream ss(it->second);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    c.criteria.push_back(criterion_from_string(trim(tok)));
  }
  if (auto jt = p.values.find("compare.replicates"); jt != p.values.end()) {
    c.replicates = static_cast<int>(to_long("compare.replicates", jt->second));
  }
  if (auto jt = p.values.find("compare.percentile"); jt != p.values.end()) {
    c.percentile = to_double("compare.percentile", jt->second);
  }
  c.validate();
  return c;
}

void CompareConfig::validate() const {
  if (criteria.size() < 2) {
    throw ConfigError("compare.criteria needs at least two entries");
  }
  if (replicates < 1) {
    throw ConfigError("compare.replicates must be >= 1");
  }
  if (percentile <= 0.0 || percentile >= 100.0) {
    throw ConfigError("compare.percentile must lie in (0,100)");
  }
}

std::map<std::string, std::string> CompareConfig::resolved() const {
  std::map<std::string, std::string> kv;
  kv["compare.mode"] = mode == CompareMode::kLongRun ? "long_run" : "short_run";
  std::string crits;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (i) crits += ",";
    crits += to_string(criteria[i]);
  }
  kv["compare.criteria"] = crits;
  kv["compare.replicates"] = std::to_string(replicates);
  kv["compare.percentile"] = fmt(percentile);
  return kv;
}

std::string serialize_key_values(
    const std::map<std::string, std::string>& kv) {
  std::string out;
  for (const auto& [key, value] : kv) {
    out += key;
    out += " = ";
    out += value;
    out += "\n";
  }
  return out;
}

}  // namespace snaper
