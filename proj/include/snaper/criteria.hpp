#pragma once

#include <Eigen/Dense>
#include <string>

#include "snaper/hmc.hpp"

namespace snaper {

enum class CriterionKind { kChees, kCheesRate, kSnaper };

const char* to_string(CriterionKind kind);
CriterionKind criterion_from_string(const std::string& name);

// Everything one iteration's criterion evaluation needs. `tau` is the
// per-iteration trajectory length used in the rate denominator (already
// floored at the step size by the caller). center_current / center_proposed
// are the running centers of the current and the acceptance-weighted
// proposed states.
struct CriterionInputs {
  const Eigen::MatrixXd& current;  // D x B, pre-proposal positions
  const ProposalBatch& proposal;
  double tau = 0.0;
  const Eigen::VectorXd& center_current;
  const Eigen::VectorXd& center_proposed;
  const Eigen::VectorXd& principal;  // unit vector; only read by kSnaper
  const MassDiag& mass;
};

struct CriterionOutput {
  double value = 0.0;         // C
  double grad_phi_tau = 0.0;  // dC/dphi_tau, pathwise through the proposal
  double d_value_d_tau = 0.0; // dC/dtau holding the rate denominator fixed
};

// f(z) = 1/2 ||z||^2, gradient z.
double chees_function(const Eigen::VectorXd& z, Eigen::VectorXd* grad = nullptr);

// f(z) = (z^T p)^2, gradient 2 (z^T p) p. p must be unit length.
double snaper_function(const Eigen::VectorXd& z, const Eigen::VectorXd& p,
                       Eigen::VectorXd* grad = nullptr);

// Acceptance-weighted generalized squared-jump estimate:
//   A = sum_b alpha_b (f(x'_b - mu') - f(x_b - mu))^2 / sum_b alpha_b.
// All-zero weights give 0 (degenerate iteration).
double esjd(CriterionKind kind, const CriterionInputs& in);

// Criterion value (A for kChees, A/tau for the rate criteria) and its
// trajectory-length gradient. The end-of-trajectory velocity v .* m' is the
// pathwise derivative of the proposed state with respect to tau; acceptance
// probabilities are treated as constant weights.
CriterionOutput criterion(CriterionKind kind, const CriterionInputs& in);

}  // namespace snaper
