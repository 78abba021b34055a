#include "snaper/checks.hpp"

#include <cmath>
#include <functional>

#include "snaper/adaptation.hpp"
#include "snaper/criteria.hpp"
#include "snaper/diagnostics.hpp"
#include "snaper/harness.hpp"
#include "snaper/hmc.hpp"
#include "snaper/rng.hpp"
#include "snaper/sampler.hpp"
#include "snaper/target.hpp"

namespace snaper {

namespace {

constexpr std::uint64_t kCheckSeed = 20240817ull;

CheckResult make_result(const std::string& name, bool pass, double observed,
                        double expected, const std::string& detail = "") {
  return CheckResult{name, pass, observed, expected, detail};
}

// Max relative error of the analytic gradient against central differences
// with h = 1e-5 (1 + |x|), at `points` random positions.
double gradient_vs_fd(const TargetModel& model, RngStream& rng, int points) {
  double worst = 0.0;
  Eigen::VectorXd g(model.dim);
  for (int k = 0; k < points; ++k) {
    Eigen::VectorXd x(model.dim);
    for (int d = 0; d < model.dim; ++d) {
      x(d) = rng.normal();
    }
    model.logp_grad(x, g);
    for (int d = 0; d < model.dim; ++d) {
      const double h = 1e-5 * (1.0 + std::abs(x(d)));
      Eigen::VectorXd xp = x;
      Eigen::VectorXd xm = x;
      xp(d) += h;
      xm(d) -= h;
      const double fd =
          (model.log_density(xp) - model.log_density(xm)) / (2.0 * h);
      const double denom = std::max({std::abs(fd), std::abs(g(d)), 1e-8});
      worst = std::max(worst, std::abs(fd - g(d)) / denom);
    }
  }
  return worst;
}

CheckResult check_model_gradients() {
  RngStream rng(splitmix64(kCheckSeed));
  double worst = 0.0;

  Eigen::VectorXd scales(4);
  scales << 0.5, 1.0, 2.0, 0.1;
  worst = std::max(worst, gradient_vs_fd(make_diag_gaussian(scales), rng, 5));

  const Dataset data = make_synthetic_logistic_data(50, 6, 7, 1.0);
  worst = std::max(worst,
                   gradient_vs_fd(make_logistic_regression(data, 1.0), rng, 5));

  TargetModel half_normal;
  half_normal.dim = 1;
  half_normal.name = "half_normal";
  half_normal.logp_grad = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = -x;
    return -0.5 * x.squaredNorm();
  };
  std::vector<std::optional<Bijector>> tf(1);
  tf[0] = softplus_bijector();
  worst = std::max(worst, gradient_vs_fd(unconstrain(half_normal, tf), rng, 5));

  return make_result("model_gradients_vs_finite_differences", worst <= 1e-5,
                     worst, 1e-5, "max relative error");
}

CheckResult check_reversibility(bool skip_momentum_flip) {
  Eigen::VectorXd scales(3);
  scales << 1.0, 0.5, 2.0;
  const TargetModel model = make_diag_gaussian(scales);
  MassDiag mass{Eigen::ArrayXd::Ones(3)};
  mass.inv_mass << 1.0, 0.7, 0.4;

  RngStream rng(splitmix64(kCheckSeed + 1));
  Eigen::VectorXd x(3), m(3);
  for (int d = 0; d < 3; ++d) {
    x(d) = rng.normal();
    m(d) = rng.normal();
  }
  const PhasePoint start = make_phase_point(model, x, m);
  PhasePoint fwd = leapfrog(start, 0.05, 40, mass, model);
  if (!skip_momentum_flip) {
    fwd.momentum = -fwd.momentum;
  }
  PhasePoint back = leapfrog(fwd, 0.05, 40, mass, model);
  const double err = (back.position - start.position).norm() +
                     (-back.momentum - start.momentum).norm();
  return make_result("leapfrog_reversibility", err <= 1e-10, err, 1e-10,
                     "round-trip distance");
}

CheckResult check_energy_scaling() {
  Eigen::VectorXd scales(2);
  scales << 1.0, 0.6;
  const TargetModel model = make_diag_gaussian(scales);
  const MassDiag mass = MassDiag::identity(2);
  RngStream rng(splitmix64(kCheckSeed + 2));
  Eigen::VectorXd x(2), m(2);
  for (int d = 0; d < 2; ++d) {
    x(d) = rng.normal();
    m(d) = rng.normal();
  }
  const PhasePoint start = make_phase_point(model, x, m);

  auto energy_error = [&](double eps) {
    const int steps = static_cast<int>(std::lround(1.0 / eps));
    const PhasePoint end = leapfrog(start, eps, steps, mass, model);
    const double h0 = start.potential + 0.5 * start.momentum.squaredNorm();
    const double h1 = end.potential + 0.5 * end.momentum.squaredNorm();
    return std::abs(h1 - h0);
  };
  const double ratio = energy_error(0.05) / energy_error(0.025);
  const bool pass = ratio > 2.5 && ratio < 6.0;
  return make_result("leapfrog_second_order_energy", pass, ratio, 4.0,
                     "|dH(eps)| / |dH(eps/2)|");
}

CheckResult check_criterion_gradient(bool flip_sign) {
  RngStream rng(splitmix64(kCheckSeed + 3));
  const int dim = 4;
  const int chains = 6;
  double worst = 0.0;

  for (CriterionKind kind : {CriterionKind::kChees, CriterionKind::kCheesRate,
                             CriterionKind::kSnaper}) {
    for (int rep = 0; rep < 5; ++rep) {
      Eigen::MatrixXd current(dim, chains);
      ProposalBatch prop;
      prop.proposed_positions.resize(dim, chains);
      prop.final_momenta.resize(dim, chains);
      prop.accept_prob.resize(chains);
      prop.accepted.assign(chains, 1);
      prop.divergent.assign(chains, 0);
      for (int b = 0; b < chains; ++b) {
        for (int d = 0; d < dim; ++d) {
          current(d, b) = rng.normal();
          prop.proposed_positions(d, b) = rng.normal();
          prop.final_momenta(d, b) = rng.normal();
        }
        prop.accept_prob(b) = 0.2 + 0.8 * rng.uniform01();
      }
      Eigen::VectorXd mu(dim), mu_prime(dim), p(dim);
      for (int d = 0; d < dim; ++d) {
        mu(d) = 0.3 * rng.normal();
        mu_prime(d) = 0.3 * rng.normal();
        p(d) = rng.normal();
      }
      p.normalize();
      MassDiag mass{Eigen::ArrayXd::Constant(dim, 0.8)};
      const double tau = 0.5 + rng.uniform01();

      const CriterionInputs in{current, prop, tau, mu, mu_prime, p, mass};
      CriterionOutput out = criterion(kind, in);
      if (flip_sign) {
        out.d_value_d_tau = -out.d_value_d_tau;
      }

      // Extend every trajectory by an extra drift of size delta along the
      // end-of-trajectory velocity and difference the criterion value.
      const double delta = 1e-5;
      ProposalBatch shifted = prop;
      shifted.proposed_positions.array() +=
          delta * (prop.final_momenta.array().colwise() * mass.inv_mass);
      const CriterionInputs in2{current, shifted, tau, mu, mu_prime, p, mass};
      const CriterionOutput out2 = criterion(kind, in2);

      const double fd = (out2.value - out.value) / delta;
      const double denom = std::max({std::abs(fd), std::abs(out.d_value_d_tau),
                                     1e-10});
      worst = std::max(worst, std::abs(fd - out.d_value_d_tau) / denom);
    }
  }
  return make_result("criterion_pathwise_gradient", worst <= 1e-3, worst, 1e-3,
                     "max relative error vs extra-drift difference");
}

CheckResult check_ess_oracles() {
  RngStream rng(splitmix64(kCheckSeed + 4));
  const long t = 20000;
  const long b = 4;

  Eigen::MatrixXd iid(t, b);
  for (long j = 0; j < b; ++j) {
    for (long i = 0; i < t; ++i) {
      iid(i, j) = rng.normal();
    }
  }
  const double ess_iid = ess(iid);
  const double n_total = static_cast<double>(t * b);
  const bool iid_ok = std::abs(ess_iid - n_total) <= 0.15 * n_total;

  const double phi = 0.9;
  Eigen::MatrixXd ar(t, b);
  for (long j = 0; j < b; ++j) {
    double x = rng.normal();
    for (long i = 0; i < t; ++i) {
      x = phi * x + std::sqrt(1.0 - phi * phi) * rng.normal();
      ar(i, j) = x;
    }
  }
  const double ess_ar = ess(ar);
  const double expected = n_total * (1.0 - phi) / (1.0 + phi);
  const bool ar_ok = std::abs(ess_ar - expected) <= 0.25 * expected;

  return make_result("ess_oracles", iid_ok && ar_ok, ess_ar, expected,
                     "iid within 15%, AR(1) within 25%");
}

CheckResult check_step_size_gradient() {
  Eigen::VectorXd a(2);
  a << 1.0, 0.25;
  const double g = step_size_gradient(a, 0.8);
  Eigen::VectorXd with_zero(3);
  with_zero << 0.5, 0.0, 1.0;
  const double g0 = step_size_gradient(with_zero, 0.8);
  const bool pass = std::abs(g - 0.4) < 1e-12 && std::abs(g0 - 0.8) < 1e-12;
  return make_result("step_size_gradient_edges", pass, g, 0.4,
                     "harmonic-mean gradient incl. zero-acceptance limit");
}

CheckResult check_determinism() {
  RunConfig cfg;
  cfg.model_name = "diag_gaussian";
  cfg.model_scales = {1.0, 0.5};
  cfg.chains = 8;
  cfg.warmup_steps = 150;
  cfg.sampling_draws = 100;
  cfg.seed = 99;
  const TargetModel model = build_model(cfg);
  const RunOutputs a = run_adaptive_experiment(model, cfg);
  const RunOutputs b = run_adaptive_experiment(model, cfg);
  bool same = a.trace.data.size() == b.trace.data.size();
  if (same) {
    for (std::size_t i = 0; i < a.trace.data.size(); ++i) {
      if (a.trace.data[i] != b.trace.data[i]) {
        same = false;
        break;
      }
    }
  }
  return make_result("run_determinism", same, same ? 1.0 : 0.0, 1.0,
                     "bit-identical draws for identical config and seed");
}

}  // namespace

std::vector<CheckResult> run_self_checks(const CheckFaults& faults) {
  std::vector<CheckResult> results;
  results.push_back(check_model_gradients());
  results.push_back(check_reversibility(faults.skip_momentum_flip));
  results.push_back(check_energy_scaling());
  results.push_back(check_criterion_gradient(faults.flip_criterion_gradient));
  results.push_back(check_ess_oracles());
  results.push_back(check_step_size_gradient());
  results.push_back(check_determinism());
  return results;
}

bool all_passed(const std::vector<CheckResult>& results) {
  for (const auto& r : results) {
    if (!r.pass) return false;
  }
  return true;
}

}  // namespace snaper
