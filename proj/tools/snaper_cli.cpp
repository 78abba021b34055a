#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "snaper/checks.hpp"
#include "snaper/config.hpp"
#include "snaper/errors.hpp"
#include "snaper/harness.hpp"
#include "snaper/io.hpp"
#include "snaper/sampler.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRunError = 1;
constexpr int kExitConfigError = 2;
constexpr int kExitCheckFailure = 3;

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::optional<int> replicates;
  bool quiet = false;
};

void apply_overrides(snaper::RunConfig& cfg, const CommonFlags& flags) {
  if (flags.seed) cfg.seed = *flags.seed;
  if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
  if (flags.quiet) cfg.quiet = true;
}

int cmd_run(const CommonFlags& flags) {
  const snaper::ParsedConfig parsed =
      snaper::parse_config_file(flags.config_path);
  snaper::reject_unknown_keys(parsed, "run");
  snaper::RunConfig cfg = snaper::make_run_config(parsed);
  apply_overrides(cfg, flags);

  const snaper::TargetModel model = snaper::build_model(cfg);
  const snaper::RunOutputs outs = snaper::run_adaptive_experiment(model, cfg);
  snaper::write_run_outputs(cfg.out_dir, cfg.resolved(), outs);

  if (!cfg.quiet) {
    std::cout << "run: " << outs.report.model_name << " criterion="
              << outs.report.criterion << " draws=" << outs.report.n_draws
              << " min_ess=" << outs.report.min_ess
              << " max_rhat=" << outs.report.max_rhat
              << " grads=" << outs.report.grad_count << "\n"
              << "outputs in " << cfg.out_dir << "\n";
  }
  if (!outs.report.converged) {
    std::cerr << "warning: R-hat threshold not reached before "
                 "sampling.max_draws\n";
  }
  return kExitOk;
}

int cmd_sweep(const CommonFlags& flags) {
  const snaper::ParsedConfig parsed =
      snaper::parse_config_file(flags.config_path);
  snaper::reject_unknown_keys(parsed, "sweep");
  snaper::RunConfig cfg = snaper::make_run_config(parsed);
  const snaper::SweepConfig sweep = snaper::make_sweep_config(parsed);
  apply_overrides(cfg, flags);

  const snaper::SweepResult result = snaper::run_sweep(cfg, sweep);
  snaper::ensure_directory(cfg.out_dir);
  auto resolved = cfg.resolved();
  for (const auto& [k, v] : sweep.resolved()) {
    resolved[k] = v;
  }
  snaper::write_text_file(cfg.out_dir + "/resolved_config.txt",
                          snaper::serialize_key_values(resolved));
  snaper::write_text_file(cfg.out_dir + "/sweep.csv",
                          snaper::sweep_to_csv(result));
  if (!cfg.quiet) {
    std::cout << "sweep: " << result.rows.size() << " rows, best min_z2 tau="
              << result.best_tau("min_z2") << "\n"
              << "outputs in " << cfg.out_dir << "\n";
  }
  return kExitOk;
}

int cmd_compare(const CommonFlags& flags) {
  const snaper::ParsedConfig parsed =
      snaper::parse_config_file(flags.config_path);
  snaper::reject_unknown_keys(parsed, "compare");
  snaper::RunConfig cfg = snaper::make_run_config(parsed);
  snaper::CompareConfig cmp = snaper::make_compare_config(parsed);
  apply_overrides(cfg, flags);
  if (flags.replicates) cmp.replicates = *flags.replicates;
  cmp.validate();

  const snaper::CompareResult result = snaper::run_compare(cfg, cmp);
  snaper::ensure_directory(cfg.out_dir);
  auto resolved = cfg.resolved();
  for (const auto& [k, v] : cmp.resolved()) {
    resolved[k] = v;
  }
  snaper::write_text_file(cfg.out_dir + "/resolved_config.txt",
                          snaper::serialize_key_values(resolved));
  snaper::write_text_file(cfg.out_dir + "/compare_raw.csv",
                          snaper::compare_rows_to_csv(result));
  snaper::write_text_file(cfg.out_dir + "/compare_summary.csv",
                          snaper::compare_summary_to_csv(result));
  if (!cfg.quiet) {
    std::cout << snaper::compare_summary_to_csv(result)
              << "outputs in " << cfg.out_dir << "\n";
  }
  return kExitOk;
}

int cmd_check(bool quiet) {
  const auto results = snaper::run_self_checks();
  for (const auto& r : results) {
    if (!quiet || !r.pass) {
      std::printf("[%s] %s (observed=%.6g, expected=%.6g) %s\n",
                  r.pass ? "PASS" : "FAIL", r.name.c_str(), r.observed,
                  r.expected, r.detail.c_str());
    }
  }
  return snaper::all_passed(results) ? kExitOk : kExitCheckFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive multi-chain HMC with trajectory-length learning"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::uint64_t seed_value = 0;
  int replicates_value = 0;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", flags.config_path,
                                "path to the flat key=value config");
    if (needs_config) opt->required();
    sub->add_option("--seed", seed_value, "override the run seed")
        ->each([&](const std::string&) { flags.seed = seed_value; });
    sub->add_option("--out", flags.out_dir, "override the output directory");
    sub->add_option("--replicates", replicates_value,
                    "override compare.replicates")
        ->each([&](const std::string&) { flags.replicates = replicates_value; });
    sub->add_flag("--quiet", flags.quiet, "suppress progress output");
  };

  auto* run = app.add_subcommand("run", "adaptive warmup + sampling run");
  add_common(run, true);
  auto* sweep = app.add_subcommand("sweep", "fixed-trajectory efficiency sweep");
  add_common(sweep, true);
  auto* compare =
      app.add_subcommand("compare", "criteria comparison over replicate seeds");
  add_common(compare, true);
  auto* check = app.add_subcommand("check", "fast self-test suite");
  add_common(check, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  try {
    if (run->parsed()) return cmd_run(flags);
    if (sweep->parsed()) return cmd_sweep(flags);
    if (compare->parsed()) return cmd_compare(flags);
    if (check->parsed()) return cmd_check(flags.quiet);
  } catch (const snaper::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "run error: " << e.what() << "\n";
    return kExitRunError;
  }
  return kExitConfigError;
}
