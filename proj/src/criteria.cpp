#include "snaper/criteria.hpp"

#include <cmath>
#include <stdexcept>

namespace snaper {

const char* to_string(CriterionKind kind) {
  switch (kind) {
    case CriterionKind::kChees: return "chees";
    case CriterionKind::kCheesRate: return "cheesr";
    case CriterionKind::kSnaper: return "snaper";
  }
  return "?";
}

CriterionKind criterion_from_string(const std::string& name) {
  if (name == "chees") return CriterionKind::kChees;
  if (name == "cheesr") return CriterionKind::kCheesRate;
  if (name == "snaper") return CriterionKind::kSnaper;
  throw std::invalid_argument("unknown criterion: " + name);
}

double chees_function(const Eigen::VectorXd& z, Eigen::VectorXd* grad) {
  if (grad) *grad = z;
  return 0.5 * z.squaredNorm();
}

double snaper_function(const Eigen::VectorXd& z, const Eigen::VectorXd& p,
                       Eigen::VectorXd* grad) {
  const double s = z.dot(p);
  if (grad) *grad = (2.0 * s) * p;
  return s * s;
}

namespace {

struct WeightedSums {
  double weight = 0.0;       // sum alpha
  double jump = 0.0;         // sum alpha * df^2
  double jump_dtau = 0.0;    // sum alpha * 2 df * grad f(z') . u
};

// One pass over the batch in fixed chain order, allocation-free. Chains
// with zero weight are skipped entirely so divergent (NaN) proposals cannot
// poison the sums. The directional term contracts grad f(z') with the
// end-of-trajectory velocity u = v .* m'.
WeightedSums accumulate(CriterionKind kind, const CriterionInputs& in) {
  const Eigen::Index b = in.current.cols();
  const Eigen::ArrayXd& v = in.mass.inv_mass;
  WeightedSums s;
  for (Eigen::Index i = 0; i < b; ++i) {
    const double alpha = in.proposal.accept_prob(i);
    if (!(alpha > 0.0)) continue;
    auto z0 = in.current.col(i) - in.center_current;
    auto z1 = in.proposal.proposed_positions.col(i) - in.center_proposed;
    auto momentum = in.proposal.final_momenta.col(i);
    double df;
    double grad_dot_u;
    if (kind == CriterionKind::kSnaper) {
      const double s0 = z0.dot(in.principal);
      const double s1 = z1.dot(in.principal);
      // Product form keeps the no-movement case exactly zero under FMA
      // contraction.
      df = (s1 - s0) * (s1 + s0);
      // grad f(z1) = 2 s1 p
      grad_dot_u =
          2.0 * s1 * (in.principal.array() * v * momentum.array()).sum();
    } else {
      df = 0.5 * (z1.squaredNorm() - z0.squaredNorm());
      // grad f(z1) = z1
      grad_dot_u = (z1.array() * v * momentum.array()).sum();
    }
    s.weight += alpha;
    s.jump += alpha * df * df;
    s.jump_dtau += alpha * 2.0 * df * grad_dot_u;
  }
  return s;
}

}  // namespace

double esjd(CriterionKind kind, const CriterionInputs& in) {
  const WeightedSums s = accumulate(kind, in);
  return s.weight > 0.0 ? s.jump / s.weight : 0.0;
}

CriterionOutput criterion(CriterionKind kind, const CriterionInputs& in) {
  if (!(in.tau > 0.0)) {
    throw std::invalid_argument("criterion: tau must be positive");
  }
  const WeightedSums s = accumulate(kind, in);
  CriterionOutput out;
  if (!(s.weight > 0.0)) {
    return out;  // fully rejected iteration: value and gradients are zero
  }
  const double a = s.jump / s.weight;
  const double da_dtau = s.jump_dtau / s.weight;
  if (kind == CriterionKind::kChees) {
    out.value = a;
    out.d_value_d_tau = da_dtau;
    out.grad_phi_tau = in.tau * da_dtau;  // dtau/dphi = tau
  } else {
    out.value = a / in.tau;
    out.d_value_d_tau = da_dtau / in.tau;
    // Full product rule: d(A/tau)/dphi = dA/dtau - A/tau.
    out.grad_phi_tau = da_dtau - a / in.tau;
  }
  return out;
}

}  // namespace snaper
