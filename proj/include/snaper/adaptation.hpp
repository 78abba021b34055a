#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "snaper/criteria.hpp"
#include "snaper/hmc.hpp"
#include "snaper/rng.hpp"
#include "snaper/target.hpp"

namespace snaper {

// Scalar ADAM state (the adapted parameters phi_tau and phi_eps are
// scalars). adam_step is a minimizer: callers pass -dC/dphi to ascend C.
struct AdamState {
  double learning_rate = 0.05;
  double beta1 = 0.0;
  double beta2 = 0.5;
  double epsilon = 1e-8;
  double first_moment = 0.0;
  double second_moment = 0.0;
  long step_count = 0;
  long skipped = 0;  // non-finite gradients dropped
};

// Bias-corrected ADAM increment; the caller adds it to the parameter.
// Non-finite gradients are skipped (increment 0) and counted.
double adam_step(AdamState& state, double gradient);

// Harmonic mean of acceptance probabilities; any zero entry gives 0 (limit).
double harmonic_mean_accept(const Eigen::VectorXd& accept_prob);

// Synthetic step-size gradient: target - harmonic_mean(alpha). Feeding this
// to the ADAM minimizer grows the step size while acceptance runs hot and
// shrinks it when acceptance drops.
double step_size_gradient(const Eigen::VectorXd& accept_prob,
                          double target_accept = 0.8);

// Exponentially discounted running moments with the step-decay rate
// eta = 1 / (ceil(t / kappa) + 1). rate_scale multiplies eta; zero freezes
// the moments entirely.
struct WelfordState {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
  double kappa = 8.0;
  double rate_scale = 1.0;
};

void welford_update(WelfordState& state, const Eigen::MatrixXd& batch, long t);

// Streaming top principal component. Updates keep the direction unit-length.
struct OjaState {
  Eigen::VectorXd principal;
  long update_count = 0;
};

// Minibatch power-style update: ptilde = sum_b z_b z_b^T p with z = x - center,
// normalized and blended into p at the given rate. A zero ptilde leaves the
// state unchanged.
void oja_update(OjaState& state, const Eigen::MatrixXd& batch,
                const Eigen::VectorXd& center, double rate);

// v_d = sigma2_d / max_d sigma2_d after flooring components at 1e-10.
// The largest component is exactly 1.
MassDiag mass_from_variance(const Eigen::VectorXd& variance);

struct TrajectorySample {
  double tau = 0.0;
  double unit = 0.0;  // the uniform draw, kept for the pathwise gradient
};

// tau ~ Unif(0, e^{phi_tau}); the HMC call floors the step count at 1.
TrajectorySample sample_trajectory(RngStream& rng, double phi_tau);

struct Schedule {
  int init_steps = 100;      // forced single-leapfrog step-size search phase
  int warmup_steps = 1000;
  int averaging_start = 0;   // 0 = auto: max(init_steps, warmup_steps / 2)

  void validate_and_fill();
};

struct AdaptOptions {
  double target_accept = 0.8;
  double learning_rate_tau = 0.05;
  double learning_rate_eps = 0.05;
  double oja_rate_scale = 8.0;       // eta_p(t) = min(1, scale / t)
  double moment_rate_scale = 1.0;    // multiplies the Welford rate; 0 freezes
  double kappa = 8.0;
  double beta1_tau = 0.0;
  double beta2_tau = 0.5;
  double beta1_eps = 0.9;
  double beta2_eps = 0.999;
  double init_step_size = 0.0;       // 0 = auto: 1e-2 * D^(-1/4)
};

// Hyperparameters frozen for the post-warmup sampling phase.
struct FrozenHyper {
  double phi_tau = 0.0;  // iterate average
  double phi_eps = 0.0;  // iterate average
  MassDiag mass;
  Eigen::VectorXd principal;
  Eigen::VectorXd center;
  bool averaging_window_empty = false;
};

// Per-iteration record (the hyperparameter trace).
struct StepStats {
  long iteration = 0;
  double phi_tau = 0.0;
  double phi_eps = 0.0;
  double step_size = 0.0;
  double tau = 0.0;
  int leapfrog_steps = 0;
  double mean_accept = 0.0;
  double harmonic_accept = 0.0;
  double criterion_value = 0.0;
  double grad_phi_tau = 0.0;
  double max_variance = 0.0;
  int divergent = 0;
  bool phi_tau_updated = false;
  double sum_inverse_accept = 0.0;  // for pooled harmonic means
  int zero_accept = 0;
};

// The continuous adaptation controller: one instance owns the chain batch,
// the RNG substreams and the full hyperparameter state; step() runs exactly
// one adaptation iteration, sample_step() one frozen sampling iteration.
class AdaptiveSampler {
 public:
  AdaptiveSampler(const TargetModel& model, CriterionKind kind, int n_chains,
                  std::uint64_t seed, const AdaptOptions& opts,
                  const Schedule& schedule);

  StepStats step();

  // Frozen-phase iteration: tau ~ Unif(0, e^{phi_tau_bar}), no adaptation.
  // Returns the proposal so callers can record draws and acceptance.
  ProposalBatch sample_step(const FrozenHyper& frozen, StepStats* stats = nullptr);

  FrozenHyper finalize() const;

  long iteration() const { return t_; }
  const BatchState& state() const { return state_; }
  BatchState& state() { return state_; }
  // Pin or reseed the adapted parameters (used by fixed-trajectory sweeps).
  void set_phi_tau(double value) { phi_tau_ = value; }
  void set_phi_eps(double value) { phi_eps_ = value; }
  const Schedule& schedule() const { return schedule_; }
  double phi_tau() const { return phi_tau_; }
  double phi_eps() const { return phi_eps_; }
  const WelfordState& moments() const { return moments_; }
  const OjaState& oja() const { return oja_; }
  const Eigen::VectorXd& center_proposed() const { return center_proposed_; }
  long warmup_fused_evals() const { return warmup_fused_; }
  long sampling_fused_evals() const { return sampling_fused_; }
  const std::vector<int>& leapfrogs_per_iteration() const {
    return leapfrogs_;
  }
  const AdamState& adam_tau() const { return adam_tau_; }
  const AdamState& adam_eps() const { return adam_eps_; }
  CriterionKind kind() const { return kind_; }

 private:
  TargetModel model_;
  CriterionKind kind_;
  int n_chains_;
  AdaptOptions opts_;
  Schedule schedule_;

  BatchState state_;
  std::vector<RngStream> chain_rngs_;
  RngStream controller_rng_;

  double phi_tau_ = 0.0;
  double phi_eps_ = 0.0;
  AdamState adam_tau_;
  AdamState adam_eps_;
  WelfordState moments_;
  Eigen::VectorXd center_proposed_;
  OjaState oja_;

  long t_ = 0;
  double phi_tau_avg_sum_ = 0.0;
  double phi_eps_avg_sum_ = 0.0;
  long avg_count_ = 0;

  long warmup_fused_ = 0;
  long sampling_fused_ = 0;
  std::vector<int> leapfrogs_;
};

}  // namespace snaper
