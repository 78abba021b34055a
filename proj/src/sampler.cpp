#include "snaper/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "snaper/errors.hpp"

namespace snaper {

namespace {

// A warmup iteration counts as divergent when at least half the chains blew
// up; a trailing window that is almost entirely divergent aborts the run so
// the caller does not burn the whole budget on a broken configuration.
class DivergenceStormGuard {
 public:
  void record(int divergent, int chains) {
    window_.push_back(2 * divergent >= chains);
    if (window_.size() > kWindow) {
      window_.pop_front();
    }
    if (window_.size() == kWindow) {
      const long bad = std::count(window_.begin(), window_.end(), true);
      if (bad > static_cast<long>(kWindow * 0.95)) {
        throw RunError(
            "divergence storm: >95% of the last 200 warmup iterations "
            "diverged");
      }
    }
  }

 private:
  static constexpr std::size_t kWindow = 200;
  std::deque<bool> window_;
};

struct AcceptPool {
  double sum_inverse = 0.0;
  long zero_count = 0;
  double sum = 0.0;
  long count = 0;

  void add(const StepStats& s, long chains) {
    sum_inverse += s.sum_inverse_accept;
    zero_count += s.zero_accept;
    sum += s.mean_accept * static_cast<double>(chains);
    count += chains;
  }
  double harmonic() const {
    if (count == 0 || zero_count > 0) return 0.0;
    return static_cast<double>(count) / sum_inverse;
  }
  double mean() const {
    return count == 0 ? 0.0 : sum / static_cast<double>(count);
  }
};

bool all_rhat_below(const Trace& trace, double threshold) {
  if (trace.n_draws < 4) return false;
  for (int d = 0; d < trace.dim; ++d) {
    if (!(split_rhat(trace.series_dim(d)) < threshold)) {
      return false;
    }
  }
  return true;
}

}  // namespace

RunOutputs run_adaptive_experiment(const TargetModel& model,
                                   const RunConfig& cfg) {
  cfg.validate();
  AdaptiveSampler sampler(model, cfg.criterion, cfg.chains, cfg.seed,
                          cfg.adapt, cfg.schedule());
  return run_with_sampler(sampler, model, cfg);
}

RunOutputs run_with_sampler(AdaptiveSampler& sampler, const TargetModel& model,
                            const RunConfig& cfg) {
  RunOutputs out;
  out.warmup_trace.reserve(cfg.warmup_steps);
  DivergenceStormGuard guard;
  long divergent_iterations = 0;

  for (int i = 0; i < cfg.warmup_steps; ++i) {
    StepStats stats = sampler.step();
    guard.record(stats.divergent, cfg.chains);
    if (stats.divergent > 0) ++divergent_iterations;
    out.warmup_trace.push_back(stats);
  }

  out.frozen = sampler.finalize();
  out.averaging_window_empty = out.frozen.averaging_window_empty;

  // Sampling phase: adaptation off, tau jittered from the averaged
  // distribution.
  Trace trace;
  trace.n_chains = cfg.chains;
  trace.dim = model.dim;
  const long target =
      cfg.sampling_mode == SamplingMode::kFixed ? cfg.sampling_draws
                                                : cfg.sampling_max_draws;
  trace.reserve(std::min<long>(target, 1 << 14));

  AcceptPool pool;
  long leapfrog_sum = 0;
  bool converged = cfg.sampling_mode == SamplingMode::kFixed;
  out.sampling_trace.reserve(std::min<long>(target, 1 << 14));

  for (long t = 0; t < target; ++t) {
    StepStats stats;
    const ProposalBatch prop = sampler.sample_step(out.frozen, &stats);
    stats.iteration = sampler.iteration() + t + 1;
    trace.append(prop.next_positions);
    pool.add(stats, cfg.chains);
    leapfrog_sum += prop.leapfrog_steps;
    if (prop.divergent_count > 0) ++divergent_iterations;
    out.sampling_trace.push_back(stats);

    if (cfg.sampling_mode == SamplingMode::kUntilRhat &&
        (t + 1) % cfg.rhat_check_every == 0) {
      if (all_rhat_below(trace, cfg.rhat_threshold)) {
        converged = true;
        break;
      }
    }
  }

  trace.warmup_grad_count = sampler.warmup_fused_evals();
  trace.grad_count =
      sampler.warmup_fused_evals() + sampler.sampling_fused_evals();

  // Report assembly.
  RunReport& rep = out.report;
  rep.model_name = model.name;
  rep.criterion = to_string(sampler.kind());
  rep.dim = model.dim;
  rep.n_chains = cfg.chains;
  rep.n_draws = trace.n_draws;
  rep.warmup_steps = cfg.warmup_steps;
  rep.seed = cfg.seed;
  rep.grad_count = trace.grad_count;
  rep.warmup_grad_count = trace.warmup_grad_count;
  rep.converged = converged;
  rep.divergent_iterations = divergent_iterations;
  rep.phi_tau_avg = out.frozen.phi_tau;
  rep.phi_eps_avg = out.frozen.phi_eps;
  rep.step_size = std::exp(out.frozen.phi_eps);
  rep.mass_diag = out.frozen.mass.inv_mass.matrix();
  rep.principal = out.frozen.principal;
  rep.harmonic_accept_post = pool.harmonic();
  rep.mean_accept_post = pool.mean();
  rep.tau_mean =
      trace.n_draws > 0
          ? rep.step_size * static_cast<double>(leapfrog_sum) /
                static_cast<double>(trace.n_draws)
          : 0.0;

  if (trace.n_draws >= 4) {
    const Eigen::VectorXd mu = trace.grand_means();
    const MinEss me = min_ess_over_squares(trace, mu);
    rep.ess_per_dim = me.per_dim;
    rep.min_ess = me.value;
    rep.argmin_dim = me.argmin_dim;
    const long sampling_grads = trace.grad_count - trace.warmup_grad_count;
    rep.min_ess_per_grad =
        sampling_grads > 0 ? me.value / static_cast<double>(sampling_grads)
                           : 0.0;
    rep.rhat = rhat_per_dim(trace);
    rep.max_rhat = rep.rhat.maxCoeff();

    // Scalar criterion test functions over the same draws. SNAPER runs use
    // the learned direction; other runs fall back to the trace principal
    // component.
    const Eigen::VectorXd p =
        sampler.kind() == CriterionKind::kSnaper && model.dim > 1
            ? out.frozen.principal
            : trace_principal_component(trace);
    Eigen::MatrixXd f_snaper(trace.n_draws, trace.n_chains);
    Eigen::MatrixXd f_chees(trace.n_draws, trace.n_chains);
    for (long t = 0; t < trace.n_draws; ++t) {
      for (long b = 0; b < trace.n_chains; ++b) {
        double proj = 0.0;
        double sq = 0.0;
        for (int d = 0; d < trace.dim; ++d) {
          const double z = trace.at(t, b, d) - mu(d);
          proj += z * p(d);
          sq += z * z;
        }
        f_snaper(t, b) = proj * proj;
        f_chees(t, b) = 0.5 * sq;
      }
    }
    rep.ess_f_snaper = ess(f_snaper);
    rep.ess_max_f_snaper = ess_max(f_snaper);
    rep.ess_f_chees = ess(f_chees);
    rep.ess_max_f_chees = ess_max(f_chees);
    if (sampler.kind() == CriterionKind::kSnaper) {
      rep.ess_f_criterion = rep.ess_f_snaper;
      rep.ess_max_f_criterion = rep.ess_max_f_snaper;
      rep.esjd_f_criterion = trace_esjd(f_snaper);
    } else {
      rep.ess_f_criterion = rep.ess_f_chees;
      rep.ess_max_f_criterion = rep.ess_max_f_chees;
      rep.esjd_f_criterion = trace_esjd(f_chees);
    }
  }

  out.trace = std::move(trace);
  return out;
}

Trace run_fixed_hmc(const TargetModel& model, double eps, int steps,
                    const MassDiag& mass, int n_chains, long burn_in,
                    long draws, std::uint64_t seed) {
  std::vector<RngStream> rngs;
  rngs.reserve(n_chains);
  for (int b = 0; b < n_chains; ++b) {
    rngs.emplace_back(stream_seed(seed, StreamKind::kChain, b));
  }
  BatchState state =
      init_batch_state(model, Eigen::MatrixXd::Zero(model.dim, n_chains));

  Trace trace;
  trace.n_chains = n_chains;
  trace.dim = model.dim;
  trace.reserve(draws);

  long fused = 0;
  for (long t = 0; t < burn_in + draws; ++t) {
    const Eigen::MatrixXd momenta = sample_momentum(rngs, mass, n_chains);
    const ProposalBatch prop = propose_with_momenta(
        state, eps, steps, mass, model, momenta, rngs, fused);
    if (t >= burn_in) {
      trace.append(prop.next_positions);
    }
  }
  trace.grad_count = fused;
  trace.warmup_grad_count = burn_in * steps;
  return trace;
}

}  // namespace snaper
