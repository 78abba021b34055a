#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "snaper/rng.hpp"
#include "snaper/target.hpp"

namespace snaper {

// Diagonal preconditioner, stored as the inverse-mass diagonal v:
// kinetic energy K(m) = 1/2 sum_d v_d m_d^2, momenta sampled with
// per-coordinate variance 1/v_d. The adaptation module normalizes v so its
// largest component is exactly 1; then every coordinate of a diagonal
// Gaussian target oscillates with the period set by its longest length
// scale.
struct MassDiag {
  Eigen::ArrayXd inv_mass;

  static MassDiag identity(int dim) {
    return MassDiag{Eigen::ArrayXd::Ones(dim)};
  }
};

// Single-chain phase point with the potential and its gradient cached;
// caches are recomputed whenever the position changes.
struct PhasePoint {
  Eigen::VectorXd position;
  Eigen::VectorXd momentum;
  double potential = 0.0;              // -log p(x)
  Eigen::VectorXd grad_potential;      // -d log p / dx
};

PhasePoint make_phase_point(const TargetModel& model,
                            const Eigen::VectorXd& position,
                            const Eigen::VectorXd& momentum);

// Batched chain state, columns are chains, with the fused log-density
// evaluation cached alongside. Caches always mirror positions.
struct BatchState {
  Eigen::MatrixXd positions;         // D x B
  Eigen::VectorXd log_density;       // B
  Eigen::MatrixXd grad_log_density;  // D x B

  Eigen::Index num_chains() const { return positions.cols(); }
  Eigen::Index dim() const { return positions.rows(); }
};

// Evaluates the caches for the given positions. This priming evaluation is
// not part of the per-iteration gradient ledger.
BatchState init_batch_state(const TargetModel& model,
                            const Eigen::MatrixXd& positions);

struct ProposalBatch {
  Eigen::MatrixXd proposed_positions;  // D x B, end of trajectory
  Eigen::MatrixXd final_momenta;       // D x B, end of trajectory (not negated)
  Eigen::VectorXd accept_prob;         // B, alpha in [0,1]
  std::vector<std::uint8_t> accepted;  // B
  std::vector<std::uint8_t> divergent; // B, non-finite energy encountered
  Eigen::MatrixXd next_positions;      // D x B, accepted ? proposed : current
  Eigen::VectorXd energy_error;        // B, H(start) - H(end)
  int leapfrog_steps = 0;
  int divergent_count = 0;
};

// L = max(1, ceil(tau / eps)), with a tiny slack so an exact multiple of eps
// does not round up through floating-point noise.
int leapfrog_steps_for(double tau, double eps);

// L leapfrog steps from `start`; interior kicks fused. Non-finite energies
// do not throw; callers inspect the returned caches.
PhasePoint leapfrog(const PhasePoint& start, double eps, int steps,
                    const MassDiag& mass, const TargetModel& model);

// One momentum per chain, m_{d,b} ~ N(0, 1/v_d). Chain b consumes
// ceil(D/2) Box-Muller pairs from rngs[b] per call (no cache carries across
// calls), in index order.
Eigen::MatrixXd sample_momentum(std::span<RngStream> rngs,
                                const MassDiag& mass, int n_chains);

// Full proposal for all chains with shared eps/tau: integrate, apply the
// Metropolis-Hastings correction with one uniform per chain from the chain's
// own stream, soft-reject divergent chains (alpha = 0), and advance `state`
// to the post-accept positions with valid caches. fused_evals is incremented
// once per batched gradient evaluation (i.e. by L).
ProposalBatch hmc_propose(BatchState& state, double eps, double tau,
                          const MassDiag& mass, const TargetModel& model,
                          std::span<RngStream> chain_rngs, long& fused_evals);

// Same, with the momenta supplied by the caller (used by tests and by
// hmc_propose itself).
ProposalBatch propose_with_momenta(BatchState& state, double eps, int steps,
                                   const MassDiag& mass,
                                   const TargetModel& model,
                                   const Eigen::MatrixXd& momenta,
                                   std::span<RngStream> chain_rngs,
                                   long& fused_evals);

}  // namespace snaper
