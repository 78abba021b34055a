#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "snaper/checks.hpp"
#include "snaper/config.hpp"
#include "snaper/errors.hpp"
#include "snaper/harness.hpp"
#include "snaper/io.hpp"
#include "snaper/sampler.hpp"

using namespace snaper;

namespace {

std::string temp_dir(const std::string& name) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(path);
  std::filesystem::create_directories(path);
  return path.string();
}

std::map<std::string, std::uint64_t> hash_outputs(const std::string& dir) {
  std::map<std::string, std::uint64_t> hashes;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    hashes[entry.path().filename().string()] =
        hash_file(entry.path().string());
  }
  return hashes;
}

}  // namespace

TEST_CASE("config parsing, defaults and rejection of unknown keys") {
  const ParsedConfig p = parse_config_text(
      "# comment\n"
      "model.name = diag_gaussian\n"
      "model.scales = 1, 0.1x3\n"
      "chains = 8\n"
      "warmup.steps = 250\n");
  reject_unknown_keys(p, "run");
  const RunConfig cfg = make_run_config(p);
  CHECK(cfg.model_scales.size() == 4);
  CHECK(cfg.model_scales[1] == 0.1);
  CHECK(cfg.chains == 8);
  CHECK(cfg.warmup_steps == 250);
  CHECK(cfg.sampling_draws == 1000);  // default materialized
  CHECK(cfg.adapt.kappa == 8.0);

  const ParsedConfig bad = parse_config_text("model.nam = x\n");
  CHECK_THROWS_AS(reject_unknown_keys(bad, "run"), ConfigError);

  CHECK_THROWS_AS(parse_config_text("chains 8\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("chains = 8\nchains = 9\n"), ConfigError);
  CHECK_THROWS_AS(make_run_config(parse_config_text("chains = abc\n")),
                  ConfigError);
}

TEST_CASE("config rejects warmup shorter than the init phase") {
  const ParsedConfig p = parse_config_text("warmup.steps = 99\n");
  CHECK_THROWS_AS(make_run_config(p), ConfigError);
}

TEST_CASE("resolved config materializes every default and round-trips") {
  RunConfig cfg;
  cfg.model_scales = {1.0, 0.5};
  cfg.warmup_steps = 150;
  cfg.seed = 11;
  const auto resolved = cfg.resolved();
  CHECK(resolved.count("adapt.learning_rate.tau") == 1);
  CHECK(resolved.count("sampling.rhat_threshold") == 1);

  const std::string text = serialize_key_values(resolved);
  const ParsedConfig reparsed = parse_config_text(text);
  reject_unknown_keys(reparsed, "run");
  const RunConfig cfg2 = make_run_config(reparsed);
  CHECK(cfg2.resolved() == resolved);
}

TEST_CASE("scale list parsing") {
  const auto xs = parse_scale_list("2, 1e-1x2, 3.5");
  REQUIRE(xs.size() == 4);
  CHECK(xs[0] == 2.0);
  CHECK(xs[1] == 0.1);
  CHECK(xs[2] == 0.1);
  CHECK(xs[3] == 3.5);
  CHECK_THROWS_AS(parse_scale_list(""), ConfigError);
  CHECK_THROWS_AS(parse_scale_list("1,,2"), ConfigError);
  CHECK_THROWS_AS(parse_scale_list("1x0"), ConfigError);
}

TEST_CASE("build_model covers the shipped targets") {
  RunConfig cfg;
  cfg.model_scales = {2.0, 0.4};
  const TargetModel g = build_model(cfg);
  CHECK(g.dim == 2);

  RunConfig lr;
  lr.model_name = "logistic_regression";
  lr.synthetic_n = 40;
  lr.synthetic_dim = 5;
  const TargetModel m = build_model(lr);
  CHECK(m.dim == 5);
  CHECK(m.name == "logistic_regression");

  RunConfig soft = cfg;
  soft.softplus_dims = {1};
  const TargetModel s = build_model(soft);
  CHECK(s.name.find("unconstrained") != std::string::npos);
  RunConfig badsoft = cfg;
  badsoft.softplus_dims = {7};
  CHECK_THROWS_AS(build_model(badsoft), ConfigError);
}

TEST_CASE("end-to-end: 2D standard gaussian run converges") {
  RunConfig cfg;
  cfg.model_scales = {1.0, 1.0};
  cfg.criterion = CriterionKind::kSnaper;
  cfg.chains = 64;
  cfg.warmup_steps = 1000;
  cfg.sampling_draws = 1000;
  cfg.seed = 404;
  const TargetModel model = build_model(cfg);
  const RunOutputs outs = run_adaptive_experiment(model, cfg);

  CHECK(outs.report.n_draws == 1000);
  CHECK(outs.report.rhat(0) < 1.01);
  CHECK(outs.report.rhat(1) < 1.01);
  CHECK(outs.report.min_ess > 1000.0);
  // Gradient ledger balances exactly across phases.
  const long total = outs.report.grad_count;
  const long warm = outs.report.warmup_grad_count;
  long from_trace = 0;
  for (const auto& s : outs.warmup_trace) from_trace += s.leapfrog_steps;
  CHECK(from_trace == warm);
  long sampling = 0;
  for (const auto& s : outs.sampling_trace) sampling += s.leapfrog_steps;
  CHECK(warm + sampling == total);
}

TEST_CASE("run outputs are byte-identical for identical config and seed") {
  RunConfig cfg;
  cfg.model_scales = {1.0, 0.5};
  cfg.chains = 8;
  cfg.warmup_steps = 200;
  cfg.sampling_draws = 150;
  cfg.seed = 12345;
  const TargetModel model = build_model(cfg);

  const std::string dir_a = temp_dir("snaper_det_a");
  const std::string dir_b = temp_dir("snaper_det_b");
  write_run_outputs(dir_a, cfg.resolved(), run_adaptive_experiment(model, cfg));
  write_run_outputs(dir_b, cfg.resolved(), run_adaptive_experiment(model, cfg));

  const auto ha = hash_outputs(dir_a);
  const auto hb = hash_outputs(dir_b);
  REQUIRE(ha.size() == hb.size());
  REQUIRE(ha.size() >= 5);
  for (const auto& [name, hash] : ha) {
    INFO(name);
    CHECK(hash == hb.at(name));
  }
}

TEST_CASE("rerunning from the emitted resolved config reproduces the run") {
  RunConfig cfg;
  cfg.model_scales = {1.0, 0.5};
  cfg.chains = 8;
  cfg.warmup_steps = 150;
  cfg.sampling_draws = 100;
  cfg.seed = 777;
  const std::string dir_a = temp_dir("snaper_rt_a");
  write_run_outputs(dir_a, cfg.resolved(),
                    run_adaptive_experiment(build_model(cfg), cfg));

  std::ifstream in(dir_a + "/resolved_config.txt");
  std::stringstream buf;
  buf << in.rdbuf();
  const ParsedConfig parsed = parse_config_text(buf.str());
  reject_unknown_keys(parsed, "run");
  const RunConfig cfg2 = make_run_config(parsed);

  const std::string dir_b = temp_dir("snaper_rt_b");
  write_run_outputs(dir_b, cfg2.resolved(),
                    run_adaptive_experiment(build_model(cfg2), cfg2));

  const auto ha = hash_outputs(dir_a);
  const auto hb = hash_outputs(dir_b);
  for (const auto& [name, hash] : ha) {
    INFO(name);
    CHECK(hash == hb.at(name));
  }
}

TEST_CASE("draw files carry the documented shape and byte layout") {
  RunConfig cfg;
  cfg.model_scales = {1.0};
  cfg.chains = 4;
  cfg.warmup_steps = 120;
  cfg.sampling_draws = 50;
  cfg.seed = 5;
  const RunOutputs outs = run_adaptive_experiment(build_model(cfg), cfg);
  const std::string dir = temp_dir("snaper_draws");
  write_draws(dir, outs.trace);

  std::ifstream bin(dir + "/draws.bin", std::ios::binary);
  REQUIRE(bin.good());
  bin.seekg(0, std::ios::end);
  CHECK(bin.tellg() == static_cast<std::streamoff>(50 * 4 * 1 * 8));
  bin.seekg(0);
  double first = 0.0;
  bin.read(reinterpret_cast<char*>(&first), sizeof(double));
  CHECK(first == outs.trace.at(0, 0, 0));

  std::ifstream side(dir + "/draws.json");
  std::stringstream buf;
  buf << side.rdbuf();
  CHECK(buf.str().find("\"float64\"") != std::string::npos);
  CHECK(buf.str().find("little_endian") != std::string::npos);
}

TEST_CASE("until-rhat mode stops, balances the ledger and flags convergence") {
  RunConfig cfg;
  cfg.model_scales = {1.0, 0.3, 2.0};
  cfg.chains = 32;
  cfg.warmup_steps = 500;
  cfg.sampling_mode = SamplingMode::kUntilRhat;
  cfg.sampling_max_draws = 5000;
  cfg.rhat_check_every = 100;
  cfg.seed = 21;
  const RunOutputs outs = run_adaptive_experiment(build_model(cfg), cfg);
  CHECK(outs.report.converged);
  CHECK(outs.report.max_rhat < 1.01);
  CHECK(outs.report.n_draws % 100 == 0);
  CHECK(outs.report.n_draws < 5000);
  long sampling = 0;
  for (const auto& s : outs.sampling_trace) sampling += s.leapfrog_steps;
  CHECK(outs.report.grad_count ==
        outs.report.warmup_grad_count + sampling);
}

TEST_CASE("sweep rows cover the grid and the efficiency bound") {
  RunConfig base;
  base.model_scales = {1.0, 0.5};
  base.chains = 16;
  base.seed = 9;
  SweepConfig sweep;
  sweep.tau_grid = {0.4, 0.9, 1.6};
  sweep.draws_per_point = 400;
  sweep.warmup_per_point = 250;
  const SweepResult result = run_sweep(base, sweep);
  REQUIRE(result.rows.size() == 9);  // 3 grid points x 3 test functions
  for (const auto& row : result.rows) {
    CHECK(row.sampling_grads > 0);
    CHECK(row.ess_value > 0.0);
    // The lag-1 bound can only be undershot by estimator noise.
    CHECK(row.ess_per_grad <= 1.1 * row.ess_max_per_grad);
  }
  CHECK(result.best_tau("min_z2") > 0.0);
}

TEST_CASE("sweep grid validation") {
  SweepConfig s;
  s.tau_grid = {0.5, 0.5};
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.tau_grid = {};
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.tau_grid = {-1.0, 2.0};
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("doubling sweep draws reduces curve jitter") {
  RunConfig base;
  base.model_scales = {1.0, 0.5};
  base.chains = 16;
  SweepConfig small;
  small.tau_grid = {0.5, 1.0};
  small.draws_per_point = 150;
  small.warmup_per_point = 200;
  SweepConfig big = small;
  big.draws_per_point = 1200;

  auto curve_variance = [&](const SweepConfig& sc) {
    // Replicate the sweep with different seeds and measure the spread of
    // the min_z2 efficiency curve across replicates.
    std::vector<std::vector<double>> curves;
    for (int rep = 0; rep < 6; ++rep) {
      RunConfig cfg = base;
      cfg.seed = replicate_seed(1000, rep);
      const SweepResult r = run_sweep(cfg, sc);
      std::vector<double> curve;
      for (const auto& row : r.rows) {
        if (row.test_function == "min_z2") {
          curve.push_back(row.ess_per_grad);
        }
      }
      curves.push_back(curve);
    }
    double total_var = 0.0;
    for (std::size_t g = 0; g < curves[0].size(); ++g) {
      double mean = 0.0, sq = 0.0;
      for (const auto& c : curves) {
        mean += c[g];
        sq += c[g] * c[g];
      }
      mean /= curves.size();
      const double var = sq / curves.size() - mean * mean;
      total_var += var / (mean * mean);  // relative variance per point
    }
    return total_var;
  };

  CHECK(curve_variance(big) < curve_variance(small));
}

TEST_CASE("compare with identical criteria and seeds is identical") {
  RunConfig base;
  base.model_scales = {1.0, 0.5};
  base.chains = 16;
  base.warmup_steps = 200;
  base.sampling_draws = 200;
  base.seed = 50;
  CompareConfig cmp;
  cmp.mode = CompareMode::kLongRun;
  cmp.criteria = {CriterionKind::kSnaper, CriterionKind::kSnaper};
  cmp.replicates = 4;
  const CompareResult result = run_compare(base, cmp);
  REQUIRE(result.rows.size() == 8);
  for (int r = 0; r < 4; ++r) {
    CHECK(result.rows[r].min_ess_per_grad ==
          result.rows[r + 4].min_ess_per_grad);
    CHECK(result.rows[r].total_grads == result.rows[r + 4].total_grads);
  }
  CHECK(result.summaries[0].percentile_value ==
        result.summaries[1].percentile_value);
}

TEST_CASE("compare short-run mode balances the gradient ledger") {
  RunConfig base;
  base.model_scales = {1.0, 0.5, 0.25};
  base.chains = 32;
  base.warmup_steps = 300;
  base.sampling_max_draws = 4000;
  base.seed = 60;
  CompareConfig cmp;
  cmp.mode = CompareMode::kShortRun;
  cmp.percentile = 90.0;
  cmp.criteria = {CriterionKind::kSnaper, CriterionKind::kCheesRate};
  cmp.replicates = 3;
  const CompareResult result = run_compare(base, cmp);
  for (const auto& row : result.rows) {
    CHECK(row.converged);
    CHECK(row.total_grads == row.warmup_grads + row.sampling_grads);
  }
}

TEST_CASE("percentile interpolation") {
  std::vector<double> v = {4.0, 1.0, 3.0, 2.0};
  CHECK(percentile(v, 50.0) == doctest::Approx(2.5));
  CHECK(percentile(v, 10.0) == doctest::Approx(1.3));
  CHECK(percentile(v, 100.0 * 0.0 + 0.0001) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("self checks pass on the healthy build") {
  const auto results = run_self_checks();
  for (const auto& r : results) {
    INFO(r.name);
    CHECK(r.pass);
  }
}

TEST_CASE("mutation sentinel: flipped criterion gradient is caught") {
  CheckFaults faults;
  faults.flip_criterion_gradient = true;
  const auto results = run_self_checks(faults);
  bool gradient_check_failed = false;
  for (const auto& r : results) {
    if (r.name == "criterion_pathwise_gradient") {
      gradient_check_failed = !r.pass;
    }
  }
  CHECK(gradient_check_failed);
}

TEST_CASE("mutation sentinel: missing momentum flip breaks reversibility") {
  CheckFaults faults;
  faults.skip_momentum_flip = true;
  const auto results = run_self_checks(faults);
  bool reversibility_failed = false;
  for (const auto& r : results) {
    if (r.name == "leapfrog_reversibility") {
      reversibility_failed = !r.pass;
    }
  }
  CHECK(reversibility_failed);
}

TEST_CASE("divergence storm aborts the run") {
  RunConfig cfg;
  cfg.model_scales = {0.01};
  cfg.chains = 4;
  cfg.warmup_steps = 400;
  cfg.sampling_draws = 10;
  cfg.seed = 3;
  cfg.adapt.init_step_size = 80.0;     // hopeless step size
  cfg.adapt.learning_rate_eps = 0.0;   // and no way to recover
  CHECK_THROWS_AS(run_adaptive_experiment(build_model(cfg), cfg), RunError);
}
