#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace snaper {

struct ReferenceMoments {
  Eigen::VectorXd mean;
  Eigen::VectorXd marginal_std;
};

// A differentiable unnormalized log-density on R^D. The fused evaluator
// returns the log density and fills the gradient in one call; the sampler
// counts one gradient evaluation per fused batch call.
struct TargetModel {
  int dim = 0;
  std::string name;

  // Single-point fused evaluation. grad is resized/filled by the callee.
  std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)> logp_grad;

  // Optional batched evaluation: X is dim x B; fills logp (B) and grad
  // (dim x B). When absent, eval_batch falls back to a per-column loop.
  std::function<void(const Eigen::MatrixXd&, Eigen::VectorXd&,
                     Eigen::MatrixXd&)>
      logp_grad_batch;

  std::optional<ReferenceMoments> reference_moments;

  double log_density(const Eigen::VectorXd& x) const;
  void eval_batch(const Eigen::MatrixXd& positions, Eigen::VectorXd& logp,
                  Eigen::MatrixXd& grad) const;
};

// Scalar coordinate transform y -> x = forward(y) mapping R onto a
// constrained domain, with the pieces needed to push a log-density (and its
// gradient) to the unconstrained side.
struct Bijector {
  std::function<double(double)> forward;
  std::function<double(double)> inverse;
  std::function<double(double)> log_det_jacobian;  // log |forward'(y)|
  std::function<double(double)> forward_deriv;
  std::function<double(double)> log_det_jacobian_deriv;
};

Bijector softplus_bijector();
Bijector identity_bijector();

// Binary-label design matrix. column_means / column_stds record the
// population-convention statistics used for standardization (std 0 marks a
// constant column, which is zeroed rather than scaled).
struct Dataset {
  Eigen::MatrixXd features;  // N x F
  Eigen::VectorXd labels;    // N, each exactly 0 or 1
  Eigen::VectorXd column_means;
  Eigen::VectorXd column_stds;
};

// Zero-centered Gaussian with diagonal covariance diag(scales^2).
// log p(x) = -1/2 sum_d x_d^2 / scales_d^2 (constant dropped).
TargetModel make_diag_gaussian(const Eigen::VectorXd& scales);

// Bayesian logistic regression with an isotropic normal prior:
// log p(theta) = sum_n log sigmoid((2 y_n - 1) x_n^T theta)
//                - ||theta||^2 / (2 prior_scale^2).
TargetModel make_logistic_regression(const Dataset& data, double prior_scale);

// Reparameterize constrained coordinates: the returned model evaluates
// logp(forward(y)) + sum_d log_det_jacobian_d(y_d) with the matching chain
// rule for the gradient. Entries without a transform pass through.
TargetModel unconstrain(const TargetModel& model,
                        const std::vector<std::optional<Bijector>>& transforms);

// CSV with the label in the last column. An all-non-numeric first row is
// treated as a header; any other unparseable field is a parse error naming
// the 1-based line.
Dataset load_csv_dataset(const std::string& path, bool standardize);

// Population-convention standardization in place; constant columns go to 0.
void standardize_features(Dataset& data);

// Fixed-seed benchmark data: standard-normal features, labels drawn from the
// logistic model at theta* (itself drawn with scale theta_scale from the
// same seed). Not standardized.
Dataset make_synthetic_logistic_data(int n, int dim, std::uint64_t seed,
                                     double theta_scale);

// The theta* used by make_synthetic_logistic_data for a given seed/scale.
Eigen::VectorXd synthetic_logistic_truth(int dim, std::uint64_t seed,
                                         double theta_scale);

}  // namespace snaper
