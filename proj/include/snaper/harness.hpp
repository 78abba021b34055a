#pragma once

#include <string>
#include <vector>

#include "snaper/config.hpp"
#include "snaper/sampler.hpp"
#include "snaper/target.hpp"

namespace snaper {

// Instantiate the target described by a run config (including CSV ingestion
// or the synthetic dataset, and any softplus reparameterization).
TargetModel build_model(const RunConfig& cfg);

struct SweepRow {
  double grid_tau = 0.0;           // requested mean trajectory length
  double observed_mean_leapfrog = 0.0;
  double observed_mean_tau = 0.0;  // eps * mean leapfrog steps
  std::string test_function;       // snaper | chees | min_z2
  double ess_value = 0.0;
  double ess_max_value = 0.0;
  double esjd_value = 0.0;
  long sampling_grads = 0;
  double ess_per_grad = 0.0;
  double ess_max_per_grad = 0.0;
  double esjd_per_grad = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;

  // argmax of ess_per_grad over grid points for one test function.
  double best_tau(const std::string& test_function) const;
  double best_value(const std::string& test_function) const;
};

// Fixed-trajectory sweeps: each grid point pins the mean trajectory length
// (phi_tau = log(2 tau)), adapts the step size (and optionally the
// preconditioner) during a short warmup, then measures efficiency on frozen
// hyperparameters.
SweepResult run_sweep(const RunConfig& base, const SweepConfig& sweep);

struct CompareRow {
  std::string criterion;
  int replicate = 0;
  std::uint64_t seed = 0;
  double min_ess_per_grad = 0.0;
  long warmup_grads = 0;
  long sampling_grads = 0;
  long total_grads = 0;
  bool converged = true;
  double tau_mean = 0.0;
  double harmonic_accept = 0.0;
};

struct CompareSummary {
  std::string criterion;
  double percentile_value = 0.0;  // of the mode's headline metric
  double median_value = 0.0;
};

struct CompareResult {
  CompareMode mode = CompareMode::kLongRun;
  std::vector<CompareRow> rows;
  std::vector<CompareSummary> summaries;
};

CompareResult run_compare(const RunConfig& base, const CompareConfig& cmp);

// Interpolated percentile of a sample (q in (0,100)).
double percentile(std::vector<double> values, double q);

}  // namespace snaper
