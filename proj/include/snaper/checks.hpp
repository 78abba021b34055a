#pragma once

#include <string>
#include <vector>

namespace snaper {

struct CheckResult {
  std::string name;
  bool pass = false;
  double observed = 0.0;
  double expected = 0.0;
  std::string detail;
};

// Deliberate bugs injectable by tests to prove the checks can fail.
struct CheckFaults {
  bool flip_criterion_gradient = false;  // sign error in the analytic gradient
  bool skip_momentum_flip = false;       // break reversibility
};

// Fast invariant suite behind the `check` subcommand: model gradients vs
// finite differences, integrator reversibility and second-order energy
// scaling, criterion pathwise gradients, ESS oracles, step-size gradient
// edge cases and a miniature determinism run. Completes in seconds.
std::vector<CheckResult> run_self_checks(const CheckFaults& faults = {});

bool all_passed(const std::vector<CheckResult>& results);

}  // namespace snaper
