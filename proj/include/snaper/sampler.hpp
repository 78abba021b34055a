#pragma once

#include <vector>

#include "snaper/adaptation.hpp"
#include "snaper/config.hpp"
#include "snaper/diagnostics.hpp"
#include "snaper/target.hpp"

namespace snaper {

struct RunOutputs {
  RunReport report;
  Trace trace;
  std::vector<StepStats> warmup_trace;
  std::vector<StepStats> sampling_trace;
  FrozenHyper frozen;
  bool averaging_window_empty = false;
};

// Warmup via the adaptive controller, freeze the iterate-averaged
// hyperparameters, then sample (fixed draw count or until split R-hat drops
// below the threshold). Aborts with RunError on a divergence storm.
RunOutputs run_adaptive_experiment(const TargetModel& model,
                                   const RunConfig& cfg);

// Same run loop on a caller-prepared controller (fixed-trajectory sweeps pin
// phi_tau before warmup starts).
RunOutputs run_with_sampler(AdaptiveSampler& sampler, const TargetModel& model,
                            const RunConfig& cfg);

// Plain HMC at fixed hyperparameters: `steps` leapfrog steps per iteration,
// no jitter, no adaptation. Used by exactness checks.
Trace run_fixed_hmc(const TargetModel& model, double eps, int steps,
                    const MassDiag& mass, int n_chains, long burn_in,
                    long draws, std::uint64_t seed);

}  // namespace snaper
