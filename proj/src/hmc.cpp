#include "snaper/hmc.hpp"

#include <cmath>
#include <stdexcept>

namespace snaper {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// In-place batched leapfrog in log-density space: kicks add the gradient of
// log p, the Hamiltonian is -log p + K. One fused evaluation per step.
void integrate(Eigen::MatrixXd& x, Eigen::MatrixXd& m, Eigen::VectorXd& logp,
               Eigen::MatrixXd& grad_logp, double eps, int steps,
               const MassDiag& mass, const TargetModel& model,
               long& fused_evals) {
  const Eigen::ArrayXd& v = mass.inv_mass;
  const Eigen::Index b = x.cols();

  m.array() += (0.5 * eps) * grad_logp.array();
  for (int s = 1; s <= steps; ++s) {
    for (Eigen::Index j = 0; j < b; ++j) {
      x.col(j).array() += eps * (v * m.col(j).array());
    }
    model.eval_batch(x, logp, grad_logp);
    ++fused_evals;
    const double kick = (s < steps) ? eps : 0.5 * eps;
    m.array() += kick * grad_logp.array();
  }
}

Eigen::VectorXd kinetic_energy(const Eigen::MatrixXd& m, const MassDiag& mass) {
  const Eigen::Index b = m.cols();
  Eigen::VectorXd k(b);
  for (Eigen::Index j = 0; j < b; ++j) {
    k(j) = 0.5 * (m.col(j).array().square() * mass.inv_mass).sum();
  }
  return k;
}

}  // namespace

PhasePoint make_phase_point(const TargetModel& model,
                            const Eigen::VectorXd& position,
                            const Eigen::VectorXd& momentum) {
  PhasePoint p;
  p.position = position;
  p.momentum = momentum;
  Eigen::VectorXd g(model.dim);
  p.potential = -model.logp_grad(position, g);
  p.grad_potential = -g;
  return p;
}

BatchState init_batch_state(const TargetModel& model,
                            const Eigen::MatrixXd& positions) {
  BatchState st;
  st.positions = positions;
  model.eval_batch(positions, st.log_density, st.grad_log_density);
  return st;
}

int leapfrog_steps_for(double tau, double eps) {
  if (!(eps > 0.0)) {
    throw std::invalid_argument("leapfrog step size must be positive");
  }
  if (!(tau > 0.0)) {
    return 1;
  }
  const double raw = tau / eps;
  const int steps = static_cast<int>(std::ceil(raw - 1e-9));
  return steps < 1 ? 1 : steps;
}

PhasePoint leapfrog(const PhasePoint& start, double eps, int steps,
                    const MassDiag& mass, const TargetModel& model) {
  if (steps < 1) {
    throw std::invalid_argument("leapfrog needs at least one step");
  }
  Eigen::MatrixXd x = start.position;
  Eigen::MatrixXd m = start.momentum;
  Eigen::VectorXd logp(1);
  logp(0) = -start.potential;
  Eigen::MatrixXd grad = -start.grad_potential;
  long evals = 0;
  integrate(x, m, logp, grad, eps, steps, mass, model, evals);

  PhasePoint out;
  out.position = x.col(0);
  out.momentum = m.col(0);
  out.potential = -logp(0);
  out.grad_potential = -grad.col(0);
  return out;
}

Eigen::MatrixXd sample_momentum(std::span<RngStream> rngs,
                                const MassDiag& mass, int n_chains) {
  const Eigen::Index d = mass.inv_mass.size();
  const Eigen::ArrayXd scale = mass.inv_mass.sqrt().inverse();  // 1/sqrt(v)
  const Eigen::Index pairs = (d + 1) / 2;

  Eigen::MatrixXd m(d, n_chains);
  Eigen::ArrayXd u1(pairs), u2(pairs), r(pairs), a(pairs), c(pairs), s(pairs);
  for (int b = 0; b < n_chains; ++b) {
    RngStream& rng = rngs[b];
    for (Eigen::Index i = 0; i < pairs; ++i) {
      u1(i) = rng.uniform01();
      u2(i) = rng.uniform01();
    }
    r = (-2.0 * u1.log()).sqrt();
    a = kTwoPi * u2;
    c = a.cos();
    s = a.sin();
    auto col = m.col(b).array();
    for (Eigen::Index i = 0; i < pairs; ++i) {
      col(2 * i) = r(i) * c(i);
      if (2 * i + 1 < d) {
        col(2 * i + 1) = r(i) * s(i);
      }
    }
    col *= scale;
  }
  return m;
}

ProposalBatch hmc_propose(BatchState& state, double eps, double tau,
                          const MassDiag& mass, const TargetModel& model,
                          std::span<RngStream> chain_rngs, long& fused_evals) {
  const int steps = leapfrog_steps_for(tau, eps);
  const Eigen::MatrixXd momenta =
      sample_momentum(chain_rngs, mass, static_cast<int>(state.num_chains()));
  return propose_with_momenta(state, eps, steps, mass, model, momenta,
                              chain_rngs, fused_evals);
}

ProposalBatch propose_with_momenta(BatchState& state, double eps, int steps,
                                   const MassDiag& mass,
                                   const TargetModel& model,
                                   const Eigen::MatrixXd& momenta,
                                   std::span<RngStream> chain_rngs,
                                   long& fused_evals) {
  const Eigen::Index b = state.num_chains();

  const Eigen::VectorXd h_start =
      -state.log_density + kinetic_energy(momenta, mass);

  Eigen::MatrixXd x = state.positions;
  Eigen::MatrixXd m = momenta;
  Eigen::VectorXd logp = state.log_density;
  Eigen::MatrixXd grad = state.grad_log_density;
  integrate(x, m, logp, grad, eps, steps, mass, model, fused_evals);

  const Eigen::VectorXd h_end = -logp + kinetic_energy(m, mass);

  ProposalBatch out;
  out.leapfrog_steps = steps;
  out.accept_prob.resize(b);
  out.energy_error.resize(b);
  out.accepted.assign(b, 0);
  out.divergent.assign(b, 0);
  out.next_positions = state.positions;

  // Acceptance decisions in fixed chain order for reproducibility.
  for (Eigen::Index i = 0; i < b; ++i) {
    const double dh = h_start(i) - h_end(i);
    out.energy_error(i) = dh;
    const bool diverged = !std::isfinite(dh);
    if (diverged) {
      out.divergent[i] = 1;
      ++out.divergent_count;
      out.accept_prob(i) = 0.0;
    } else {
      out.accept_prob(i) = dh >= 0.0 ? 1.0 : std::exp(dh);
    }
    const double u = chain_rngs[i].uniform01();
    if (!diverged && u < out.accept_prob(i)) {
      out.accepted[i] = 1;
      out.next_positions.col(i) = x.col(i);
      state.positions.col(i) = x.col(i);
      state.log_density(i) = logp(i);
      state.grad_log_density.col(i) = grad.col(i);
    }
  }
  out.proposed_positions = std::move(x);
  out.final_momenta = std::move(m);
  return out;
}

}  // namespace snaper
