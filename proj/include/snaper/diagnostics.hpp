#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace snaper {

// Post-warmup draws, stored (draw, chain, dim) row-major, plus the gradient
// ledger carried along from the run.
struct Trace {
  long n_draws = 0;
  long n_chains = 0;
  int dim = 0;
  std::vector<double> data;
  long grad_count = 0;         // cumulative fused evaluations incl. warmup
  long warmup_grad_count = 0;

  void reserve(long draws) {
    data.reserve(static_cast<std::size_t>(draws) * n_chains * dim);
  }
  double at(long t, long b, int d) const {
    return data[(static_cast<std::size_t>(t) * n_chains + b) * dim + d];
  }
  // Appends one draw from a D x B position matrix.
  void append(const Eigen::MatrixXd& positions);
  // T x B matrix of coordinate d.
  Eigen::MatrixXd series_dim(int d) const;
  // T x B matrix of (x_d - mu_d)^2.
  Eigen::MatrixXd series_square(int d, double mu_d) const;
  // Per-dimension means over all draws and chains.
  Eigen::VectorXd grand_means() const;
};

// Normalized autocorrelations rho(0..max_lag) of a single series, biased
// (divide-by-T) autocovariances normalized by lag 0. Throws
// DegenerateSeriesError on zero variance.
Eigen::VectorXd autocorrelation(const Eigen::VectorXd& series, int max_lag);

// Pooled multi-chain ESS over all T*B samples: per-chain autocovariances
// about the grand mean, averaged over chains, are normalized by the pooled
// (within + between) variance so stuck chains deflate the estimate. The sum
// is truncated by the initial-positive-sequence rule on consecutive lag
// pairs, and the result is capped at 4 * T * B against antithetic blowup.
double ess(const Eigen::MatrixXd& series);

// Pooled lag-1 autocorrelation (same estimator as ess uses).
double lag1_autocorrelation(const Eigen::MatrixXd& series);

// Lag-1 upper bound N (1 - rho1) / (1 + rho1) for reversible chains;
// rho1 <= -1 is clamped to -1 + 1e-6.
double ess_max_from_lag1(double n_total, double rho1);
double ess_max(const Eigen::MatrixXd& series);

// Classic split potential scale reduction over 2B half-chains. Requires
// B >= 2 and T >= 4; throws DegenerateSeriesError when the pooled variance
// vanishes.
double split_rhat(const Eigen::MatrixXd& series);

// Mean squared per-draw jump of a scalar series, E[(f_{t+1} - f_t)^2].
double trace_esjd(const Eigen::MatrixXd& series);

struct MinEss {
  double value = 0.0;
  int argmin_dim = 0;
  Eigen::VectorXd per_dim;
};

// ESS of the per-dimension test functions f(x) = (x_d - mu_d)^2.
MinEss min_ess_over_squares(const Trace& trace, const Eigen::VectorXd& mu);

// Split R-hat of every coordinate series x_d.
Eigen::VectorXd rhat_per_dim(const Trace& trace);

// Top eigenvector of the pooled draw covariance (test-function oracle when a
// run did not learn a principal component).
Eigen::VectorXd trace_principal_component(const Trace& trace);

struct RunReport {
  std::string model_name;
  std::string criterion;
  int dim = 0;
  long n_chains = 0;
  long n_draws = 0;
  long warmup_steps = 0;
  std::uint64_t seed = 0;

  Eigen::VectorXd ess_per_dim;  // f = (x_d - mu_d)^2
  double min_ess = 0.0;
  int argmin_dim = 0;
  double min_ess_per_grad = 0.0;  // min_ess / sampling-phase gradients

  double ess_f_criterion = 0.0;
  double ess_max_f_criterion = 0.0;
  double ess_f_snaper = 0.0;
  double ess_max_f_snaper = 0.0;
  double ess_f_chees = 0.0;
  double ess_max_f_chees = 0.0;
  double esjd_f_criterion = 0.0;

  Eigen::VectorXd rhat;
  double max_rhat = 0.0;

  long grad_count = 0;
  long warmup_grad_count = 0;

  double tau_mean = 0.0;    // observed mean simulated time, eps * mean(L)
  double step_size = 0.0;   // e^{phi_eps_bar}
  double phi_tau_avg = 0.0;
  double phi_eps_avg = 0.0;
  Eigen::VectorXd mass_diag;
  Eigen::VectorXd principal;

  double harmonic_accept_post = 0.0;
  double mean_accept_post = 0.0;
  bool converged = true;  // until-rhat mode reached the threshold
  long divergent_iterations = 0;
};

}  // namespace snaper
