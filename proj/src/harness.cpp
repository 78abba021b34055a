#include "snaper/harness.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "snaper/errors.hpp"

namespace snaper {

TargetModel build_model(const RunConfig& cfg) {
  TargetModel model;
  if (cfg.model_name == "diag_gaussian") {
    Eigen::VectorXd scales(cfg.model_scales.size());
    for (std::size_t i = 0; i < cfg.model_scales.size(); ++i) {
      scales(static_cast<Eigen::Index>(i)) = cfg.model_scales[i];
    }
    model = make_diag_gaussian(scales);
  } else if (cfg.model_name == "logistic_regression") {
    Dataset data;
    if (!cfg.model_csv.empty()) {
      data = load_csv_dataset(cfg.model_csv, cfg.model_standardize);
    } else {
      data = make_synthetic_logistic_data(cfg.synthetic_n, cfg.synthetic_dim,
                                          cfg.synthetic_seed,
                                          cfg.synthetic_theta_scale);
      if (cfg.model_standardize) {
        standardize_features(data);
      }
    }
    model = make_logistic_regression(data, cfg.model_prior_scale);
  } else {
    throw ConfigError("unknown model.name: " + cfg.model_name);
  }

  if (!cfg.softplus_dims.empty()) {
    std::vector<std::optional<Bijector>> transforms(model.dim);
    for (long d : cfg.softplus_dims) {
      if (d < 0 || d >= model.dim) {
        throw ConfigError("model.softplus_dims index out of range");
      }
      transforms[static_cast<std::size_t>(d)] = softplus_bijector();
    }
    model = unconstrain(model, transforms);
  }
  return model;
}

double SweepResult::best_tau(const std::string& test_function) const {
  double best = 0.0;
  double best_val = -1.0;
  for (const auto& row : rows) {
    if (row.test_function == test_function && row.ess_per_grad > best_val) {
      best_val = row.ess_per_grad;
      best = row.observed_mean_tau;
    }
  }
  return best;
}

double SweepResult::best_value(const std::string& test_function) const {
  double best_val = -1.0;
  for (const auto& row : rows) {
    if (row.test_function == test_function) {
      best_val = std::max(best_val, row.ess_per_grad);
    }
  }
  return best_val;
}

namespace {

// Direction of largest marginal scale when the model ships reference
// moments; otherwise the trace principal component.
Eigen::VectorXd oracle_direction(const TargetModel& model,
                                 const Trace& trace) {
  if (model.reference_moments) {
    Eigen::Index top;
    model.reference_moments->marginal_std.maxCoeff(&top);
    return Eigen::VectorXd::Unit(model.dim, top);
  }
  return trace_principal_component(trace);
}

}  // namespace

SweepResult run_sweep(const RunConfig& base, const SweepConfig& sweep) {
  sweep.validate();
  const TargetModel model = build_model(base);

  SweepResult result;
  for (std::size_t g = 0; g < sweep.tau_grid.size(); ++g) {
    const double tau_target = sweep.tau_grid[g];

    RunConfig cfg = base;
    cfg.seed = replicate_seed(base.seed, g);
    cfg.warmup_steps = sweep.warmup_per_point;
    cfg.averaging_start = 0;
    cfg.sampling_mode = SamplingMode::kFixed;
    cfg.sampling_draws = sweep.draws_per_point;
    // Pin the trajectory distribution at Unif(0, 2 tau); with the rate at
    // zero the criterion gradient never moves phi_tau, so only the step size
    // (and optionally the preconditioner) adapts during warmup.
    cfg.adapt.learning_rate_tau = 0.0;
    cfg.adapt.moment_rate_scale = sweep.adapt_mass ? base.adapt.moment_rate_scale : 0.0;

    AdaptiveSampler sampler(model, cfg.criterion, cfg.chains, cfg.seed,
                            cfg.adapt, cfg.schedule());
    sampler.set_phi_tau(std::log(2.0 * tau_target));
    const RunOutputs outs = run_with_sampler(sampler, model, cfg);
    const Trace& trace = outs.trace;

    const long sampling_grads =
        trace.grad_count - trace.warmup_grad_count;
    const double mean_leapfrog =
        static_cast<double>(sampling_grads) /
        static_cast<double>(std::max<long>(1, trace.n_draws));

    const Eigen::VectorXd mu = trace.grand_means();
    const Eigen::VectorXd p = oracle_direction(model, trace);

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
    const MinEss me = min_ess_over_squares(trace, mu);
    const Eigen::MatrixXd f_min = trace.series_square(me.argmin_dim,
                                                      mu(me.argmin_dim));

    auto make_row = [&](const std::string& name, const Eigen::MatrixXd& f,
                        double ess_override) {
      SweepRow row;
      row.grid_tau = tau_target;
      row.observed_mean_leapfrog = mean_leapfrog;
      row.observed_mean_tau = outs.report.tau_mean;
      row.test_function = name;
      row.ess_value = ess_override > 0.0 ? ess_override : ess(f);
      row.ess_max_value = ess_max(f);
      row.esjd_value = trace_esjd(f);
      row.sampling_grads = sampling_grads;
      const double grads = static_cast<double>(std::max<long>(1, sampling_grads));
      row.ess_per_grad = row.ess_value / grads;
      row.ess_max_per_grad = row.ess_max_value / grads;
      row.esjd_per_grad = row.esjd_value / grads;
      return row;
    };

    result.rows.push_back(make_row("snaper", f_snaper, 0.0));
    result.rows.push_back(make_row("chees", f_chees, 0.0));
    result.rows.push_back(make_row("min_z2", f_min, me.value));
  }
  return result;
}

CompareResult run_compare(const RunConfig& base, const CompareConfig& cmp) {
  cmp.validate();
  const TargetModel model = build_model(base);

  CompareResult result;
  result.mode = cmp.mode;
  for (const CriterionKind kind : cmp.criteria) {
    std::vector<double> metric;
    for (int r = 0; r < cmp.replicates; ++r) {
      RunConfig cfg = base;
      cfg.criterion = kind;
      cfg.seed = replicate_seed(base.seed, r);
      cfg.sampling_mode = cmp.mode == CompareMode::kLongRun
                              ? SamplingMode::kFixed
                              : SamplingMode::kUntilRhat;
      const RunOutputs outs = run_adaptive_experiment(model, cfg);

      CompareRow row;
      row.criterion = to_string(kind);
      row.replicate = r;
      row.seed = cfg.seed;
      row.min_ess_per_grad = outs.report.min_ess_per_grad;
      row.warmup_grads = outs.report.warmup_grad_count;
      row.sampling_grads =
          outs.report.grad_count - outs.report.warmup_grad_count;
      row.total_grads = outs.report.grad_count;
      row.converged = outs.report.converged;
      row.tau_mean = outs.report.tau_mean;
      row.harmonic_accept = outs.report.harmonic_accept_post;
      result.rows.push_back(row);

      metric.push_back(cmp.mode == CompareMode::kLongRun
                           ? row.min_ess_per_grad
                           : static_cast<double>(row.total_grads));
    }
    CompareSummary s;
    s.criterion = to_string(kind);
    s.percentile_value = percentile(metric, cmp.percentile);
    s.median_value = percentile(metric, 50.0);
    result.summaries.push_back(s);
  }
  return result;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) {
    throw std::invalid_argument("percentile of an empty sample");
  }
  std::sort(values.begin(), values.end());
  const double rank = q / 100.0 * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = static_cast<std::size_t>(std::ceil(rank));
  const double w = rank - static_cast<double>(lo);
  return (1.0 - w) * values[lo] + w * values[hi];
}

}  // namespace snaper
