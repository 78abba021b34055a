#include "snaper/adaptation.hpp"

#include <cmath>
#include <stdexcept>

#include "snaper/errors.hpp"

namespace snaper {

double adam_step(AdamState& state, double gradient) {
  if (!std::isfinite(gradient)) {
    ++state.skipped;
    return 0.0;
  }
  ++state.step_count;
  state.first_moment =
      state.beta1 * state.first_moment + (1.0 - state.beta1) * gradient;
  state.second_moment = state.beta2 * state.second_moment +
                        (1.0 - state.beta2) * gradient * gradient;
  const double m_hat =
      state.first_moment /
      (1.0 - std::pow(state.beta1, static_cast<double>(state.step_count)));
  const double v_hat =
      state.second_moment /
      (1.0 - std::pow(state.beta2, static_cast<double>(state.step_count)));
  return -state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
}

double harmonic_mean_accept(const Eigen::VectorXd& accept_prob) {
  double inv_sum = 0.0;
  for (Eigen::Index i = 0; i < accept_prob.size(); ++i) {
    if (!(accept_prob(i) > 0.0)) {
      return 0.0;
    }
    inv_sum += 1.0 / accept_prob(i);
  }
  return static_cast<double>(accept_prob.size()) / inv_sum;
}

double step_size_gradient(const Eigen::VectorXd& accept_prob,
                          double target_accept) {
  return target_accept - harmonic_mean_accept(accept_prob);
}

void welford_update(WelfordState& state, const Eigen::MatrixXd& batch,
                    long t) {
  if (t < 1) {
    throw std::invalid_argument("welford_update: t must be >= 1");
  }
  if (state.rate_scale == 0.0) {
    return;
  }
  const double eta =
      state.rate_scale /
      (std::ceil(static_cast<double>(t) / state.kappa) + 1.0);
  const Eigen::Index b = batch.cols();
  Eigen::VectorXd batch_mean = Eigen::VectorXd::Zero(batch.rows());
  Eigen::VectorXd batch_sq_dev = Eigen::VectorXd::Zero(batch.rows());
  for (Eigen::Index j = 0; j < b; ++j) {
    batch_mean += batch.col(j);
    // Squared deviations use the pre-update mean.
    batch_sq_dev.array() += (batch.col(j) - state.mean).array().square();
  }
  batch_mean /= static_cast<double>(b);
  batch_sq_dev /= static_cast<double>(b);
  state.variance = (1.0 - eta) * state.variance + eta * batch_sq_dev;
  state.mean = (1.0 - eta) * state.mean + eta * batch_mean;
}

void oja_update(OjaState& state, const Eigen::MatrixXd& batch,
                const Eigen::VectorXd& center, double rate) {
  if (batch.cols() == 0) {
    throw std::invalid_argument("oja_update: empty batch");
  }
  Eigen::VectorXd ptilde = Eigen::VectorXd::Zero(batch.rows());
  for (Eigen::Index j = 0; j < batch.cols(); ++j) {
    auto z = batch.col(j) - center;
    ptilde += z.dot(state.principal) * z;
  }
  const double norm = ptilde.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    return;
  }
  const Eigen::VectorXd direction = ptilde / norm;
  Eigen::VectorXd blended = state.principal + rate * direction;
  const double blended_norm = blended.norm();
  if (blended_norm < 1e-300) {
    state.principal = direction;
  } else {
    state.principal = blended / blended_norm;
  }
  ++state.update_count;
}

MassDiag mass_from_variance(const Eigen::VectorXd& variance) {
  Eigen::ArrayXd floored = variance.array().max(1e-10);
  const double top = floored.maxCoeff();
  return MassDiag{floored / top};
}

TrajectorySample sample_trajectory(RngStream& rng, double phi_tau) {
  TrajectorySample s;
  s.unit = rng.uniform01();
  s.tau = s.unit * std::exp(phi_tau);
  return s;
}

void Schedule::validate_and_fill() {
  if (init_steps < 0 || warmup_steps < init_steps) {
    throw ConfigError("schedule: warmup_steps must be >= init_steps (" +
                      std::to_string(init_steps) + ")");
  }
  if (averaging_start == 0) {
    averaging_start = std::max(init_steps, warmup_steps / 2);
  }
  if (averaging_start < init_steps || averaging_start > warmup_steps) {
    throw ConfigError(
        "schedule: need init_steps <= averaging_start <= warmup_steps");
  }
}

AdaptiveSampler::AdaptiveSampler(const TargetModel& model, CriterionKind kind,
                                 int n_chains, std::uint64_t seed,
                                 const AdaptOptions& opts,
                                 const Schedule& schedule)
    : model_(model),
      kind_(kind),
      n_chains_(n_chains),
      opts_(opts),
      schedule_(schedule),
      controller_rng_(stream_seed(seed, StreamKind::kController)) {
  if (n_chains < 1) {
    throw std::invalid_argument("need at least one chain");
  }
  schedule_.validate_and_fill();

  chain_rngs_.reserve(n_chains);
  for (int b = 0; b < n_chains; ++b) {
    chain_rngs_.emplace_back(stream_seed(seed, StreamKind::kChain, b));
  }

  // Chains start at the prior mean (the origin for all shipped models).
  state_ = init_batch_state(
      model_, Eigen::MatrixXd::Zero(model_.dim, n_chains));

  const double eps0 =
      opts_.init_step_size > 0.0
          ? opts_.init_step_size
          : 1e-2 * std::pow(static_cast<double>(model_.dim), -0.25);
  phi_eps_ = std::log(eps0);
  phi_tau_ = std::log(eps0);

  adam_tau_ = AdamState{opts_.learning_rate_tau, opts_.beta1_tau,
                        opts_.beta2_tau};
  adam_eps_ = AdamState{opts_.learning_rate_eps, opts_.beta1_eps,
                        opts_.beta2_eps};

  moments_.mean = state_.positions.rowwise().mean();
  moments_.variance = Eigen::VectorXd::Ones(model_.dim);
  moments_.kappa = opts_.kappa;
  moments_.rate_scale = opts_.moment_rate_scale;
  center_proposed_ = moments_.mean;

  // Principal component starts at a random unit direction from its own
  // substream so criterion choice never shifts the other streams.
  RngStream init_rng(stream_seed(seed, StreamKind::kPrincipalInit));
  Eigen::VectorXd p(model_.dim);
  for (int d = 0; d < model_.dim; ++d) {
    p(d) = init_rng.normal();
  }
  const double norm = p.norm();
  oja_.principal = norm > 0.0 ? Eigen::VectorXd(p / norm)
                              : Eigen::VectorXd::Unit(model_.dim, 0);
}

StepStats AdaptiveSampler::step() {
  ++t_;
  const bool in_init = t_ <= schedule_.init_steps;

  const double eps = std::exp(phi_eps_);
  const MassDiag mass = mass_from_variance(moments_.variance);
  const TrajectorySample traj = sample_trajectory(controller_rng_, phi_tau_);
  // The single-leapfrog clamp applies before the HMC call.
  const double tau_used = in_init ? eps : traj.tau;

  const Eigen::MatrixXd current = state_.positions;
  long fused = 0;
  const ProposalBatch prop = hmc_propose(state_, eps, tau_used, mass, model_,
                                         chain_rngs_, fused);
  warmup_fused_ += fused;
  leapfrogs_.push_back(prop.leapfrog_steps);

  const double tau_eff = std::max(tau_used, eps);
  const CriterionInputs inputs{current,           prop,
                               tau_eff,           moments_.mean,
                               center_proposed_,  oja_.principal,
                               mass};
  const CriterionOutput crit = criterion(kind_, inputs);

  StepStats stats;
  stats.iteration = t_;
  stats.step_size = eps;
  stats.tau = tau_used;
  stats.leapfrog_steps = prop.leapfrog_steps;
  stats.criterion_value = crit.value;
  stats.grad_phi_tau = crit.grad_phi_tau;
  stats.divergent = prop.divergent_count;
  stats.mean_accept = prop.accept_prob.mean();
  stats.harmonic_accept = harmonic_mean_accept(prop.accept_prob);
  for (Eigen::Index i = 0; i < prop.accept_prob.size(); ++i) {
    if (prop.accept_prob(i) > 0.0) {
      stats.sum_inverse_accept += 1.0 / prop.accept_prob(i);
    } else {
      ++stats.zero_accept;
    }
  }

  // Trajectory-length update: frozen during init (at a single leapfrog step
  // the jump signal reflects the step size, not tau) and on fully divergent
  // iterations.
  const double weight_sum = prop.accept_prob.sum();
  if (!in_init && weight_sum > 0.0) {
    phi_tau_ += adam_step(adam_tau_, -crit.grad_phi_tau);
    stats.phi_tau_updated = true;
  }
  phi_eps_ += adam_step(
      adam_eps_, step_size_gradient(prop.accept_prob, opts_.target_accept));

  // Moment updates use the post-accept states; the proposed-state center is
  // updated with the same schedule and the acceptance-weighted batch mean.
  const Eigen::VectorXd center_old = moments_.mean;
  const double eta = moments_.rate_scale == 0.0
                         ? 0.0
                         : moments_.rate_scale /
                               (std::ceil(static_cast<double>(t_) /
                                          moments_.kappa) +
                                1.0);
  welford_update(moments_, state_.positions, t_);
  if (eta > 0.0 && weight_sum > 0.0) {
    Eigen::VectorXd weighted =
        prop.proposed_positions * prop.accept_prob / weight_sum;
    // Divergent chains carry zero weight but NaN coordinates; rebuild the
    // weighted mean without them when needed.
    if (!weighted.allFinite()) {
      weighted.setZero();
      for (Eigen::Index i = 0; i < prop.accept_prob.size(); ++i) {
        if (prop.accept_prob(i) > 0.0) {
          weighted += prop.accept_prob(i) * prop.proposed_positions.col(i);
        }
      }
      weighted /= weight_sum;
    }
    center_proposed_ = (1.0 - eta) * center_proposed_ + eta * weighted;
  }

  if (kind_ == CriterionKind::kSnaper) {
    const double rate =
        std::min(1.0, opts_.oja_rate_scale / static_cast<double>(t_));
    if (rate > 0.0) {
      oja_update(oja_, state_.positions, center_old, rate);
    }
  }

  if (t_ >= schedule_.averaging_start) {
    phi_tau_avg_sum_ += phi_tau_;
    phi_eps_avg_sum_ += phi_eps_;
    ++avg_count_;
  }

  stats.phi_tau = phi_tau_;
  stats.phi_eps = phi_eps_;
  stats.max_variance = moments_.variance.maxCoeff();
  return stats;
}

ProposalBatch AdaptiveSampler::sample_step(const FrozenHyper& frozen,
                                           StepStats* stats) {
  const double eps = std::exp(frozen.phi_eps);
  const TrajectorySample traj =
      sample_trajectory(controller_rng_, frozen.phi_tau);
  long fused = 0;
  ProposalBatch prop = hmc_propose(state_, eps, traj.tau, frozen.mass, model_,
                                   chain_rngs_, fused);
  sampling_fused_ += fused;
  leapfrogs_.push_back(prop.leapfrog_steps);
  if (stats) {
    stats->step_size = eps;
    stats->tau = traj.tau;
    stats->leapfrog_steps = prop.leapfrog_steps;
    stats->mean_accept = prop.accept_prob.mean();
    stats->harmonic_accept = harmonic_mean_accept(prop.accept_prob);
    stats->divergent = prop.divergent_count;
    for (Eigen::Index i = 0; i < prop.accept_prob.size(); ++i) {
      if (prop.accept_prob(i) > 0.0) {
        stats->sum_inverse_accept += 1.0 / prop.accept_prob(i);
      } else {
        ++stats->zero_accept;
      }
    }
  }
  return prop;
}

FrozenHyper AdaptiveSampler::finalize() const {
  FrozenHyper f;
  if (avg_count_ > 0) {
    f.phi_tau = phi_tau_avg_sum_ / static_cast<double>(avg_count_);
    f.phi_eps = phi_eps_avg_sum_ / static_cast<double>(avg_count_);
  } else {
    f.phi_tau = phi_tau_;
    f.phi_eps = phi_eps_;
    f.averaging_window_empty = true;
  }
  f.mass = mass_from_variance(moments_.variance);
  f.principal = oja_.principal;
  f.center = moments_.mean;
  return f;
}

}  // namespace snaper
