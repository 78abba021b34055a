#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "snaper/criteria.hpp"
#include "snaper/hmc.hpp"
#include "snaper/rng.hpp"
#include "snaper/target.hpp"
#include "test_util.hpp"

using namespace snaper;

namespace {

// Convenience builder for synthetic proposal fixtures.
struct Fixture {
  Eigen::MatrixXd current;
  ProposalBatch prop;
  Eigen::VectorXd mu, mu_prime, p;
  MassDiag mass;
  double tau = 1.0;

  Fixture(int dim, int chains)
      : current(Eigen::MatrixXd::Zero(dim, chains)),
        mu(Eigen::VectorXd::Zero(dim)),
        mu_prime(Eigen::VectorXd::Zero(dim)),
        p(Eigen::VectorXd::Unit(dim, 0)),
        mass{Eigen::ArrayXd::Ones(dim)} {
    prop.proposed_positions = Eigen::MatrixXd::Zero(dim, chains);
    prop.final_momenta = Eigen::MatrixXd::Zero(dim, chains);
    prop.accept_prob = Eigen::VectorXd::Ones(chains);
    prop.accepted.assign(chains, 1);
    prop.divergent.assign(chains, 0);
  }

  CriterionInputs inputs() const {
    return CriterionInputs{current, prop, tau, mu, mu_prime, p, mass};
  }

  void randomize(RngStream& rng) {
    const int dim = static_cast<int>(current.rows());
    const int chains = static_cast<int>(current.cols());
    for (int b = 0; b < chains; ++b) {
      for (int d = 0; d < dim; ++d) {
        current(d, b) = rng.normal();
        prop.proposed_positions(d, b) = rng.normal();
        prop.final_momenta(d, b) = rng.normal();
      }
      prop.accept_prob(b) = 0.1 + 0.9 * rng.uniform01();
    }
    for (int d = 0; d < dim; ++d) {
      mu(d) = 0.2 * rng.normal();
      mu_prime(d) = 0.2 * rng.normal();
      p(d) = rng.normal();
      mass.inv_mass(d) = 0.3 + rng.uniform01();
    }
    p.normalize();
    tau = 0.4 + rng.uniform01();
  }
};

}  // namespace

TEST_CASE("chees jump function") {
  Eigen::VectorXd z = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd grad;
  CHECK(chees_function(z, &grad) == 0.0);
  CHECK(grad.norm() == 0.0);

  z << 3.0, 4.0;
  CHECK(chees_function(z, &grad) == doctest::Approx(12.5).epsilon(1e-15));
  CHECK(grad(0) == 3.0);
  CHECK(grad(1) == 4.0);

  // Gradient against central differences.
  RngStream rng(3);
  for (int k = 0; k < 10; ++k) {
    Eigen::VectorXd x(4);
    for (int d = 0; d < 4; ++d) x(d) = rng.normal();
    chees_function(x, &grad);
    for (int d = 0; d < 4; ++d) {
      Eigen::VectorXd xp = x, xm = x;
      const double h = 1e-6 * (1.0 + std::abs(x(d)));
      xp(d) += h;
      xm(d) -= h;
      const double fd = (chees_function(xp) - chees_function(xm)) / (2 * h);
      CHECK(std::abs(fd - grad(d)) <=
            1e-6 * std::max(1.0, std::abs(grad(d))));
    }
  }
}

TEST_CASE("snaper jump function") {
  Eigen::VectorXd p(2);
  p << 1.0, 0.0;
  Eigen::VectorXd z(2);
  z << 0.0, 5.0;  // orthogonal to p
  CHECK(snaper_function(z, p) == 0.0);

  z << 1.0, 2.0;
  Eigen::VectorXd grad;
  CHECK(snaper_function(z, p, &grad) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(grad(0) == doctest::Approx(2.0));
  CHECK(grad(1) == 0.0);

  // Sign symmetry in p.
  CHECK(snaper_function(z, p) == snaper_function(z, -p));

  // Finite differences in z.
  RngStream rng(4);
  Eigen::VectorXd dir(3);
  dir << 0.3, -1.2, 0.5;
  dir.normalize();
  for (int k = 0; k < 10; ++k) {
    Eigen::VectorXd x(3);
    for (int d = 0; d < 3; ++d) x(d) = rng.normal();
    snaper_function(x, dir, &grad);
    for (int d = 0; d < 3; ++d) {
      Eigen::VectorXd xp = x, xm = x;
      const double h = 1e-6 * (1.0 + std::abs(x(d)));
      xp(d) += h;
      xm(d) -= h;
      const double fd =
          (snaper_function(xp, dir) - snaper_function(xm, dir)) / (2 * h);
      CHECK(std::abs(fd - grad(d)) <=
            1e-6 * std::max(1.0, std::abs(grad(d))));
    }
  }
}

TEST_CASE("esjd direct evaluation") {
  // B = 1, alpha = 1, f values 1 -> 3 gives (3-1)^2 = 4. With the chees
  // function f(z) = z^2/2, pick |z| = sqrt(2) and |z'| = sqrt(6).
  Fixture f(1, 1);
  f.current(0, 0) = std::sqrt(2.0);
  f.prop.proposed_positions(0, 0) = std::sqrt(6.0);
  CHECK(esjd(CriterionKind::kChees, f.inputs()) ==
        doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("esjd is zero without movement") {
  Fixture f(3, 5);
  RngStream rng(8);
  for (int b = 0; b < 5; ++b) {
    for (int d = 0; d < 3; ++d) {
      f.current(d, b) = rng.normal();
    }
  }
  f.prop.proposed_positions = f.current;
  f.mu_prime = f.mu;
  CHECK(esjd(CriterionKind::kChees, f.inputs()) == 0.0);
  CHECK(esjd(CriterionKind::kSnaper, f.inputs()) == 0.0);
}

TEST_CASE("esjd weight normalization") {
  Fixture f(2, 4);
  RngStream rng(9);
  f.randomize(rng);
  f.prop.accept_prob << 0.1, 0.2, 0.3, 0.4;
  const double a1 = esjd(CriterionKind::kChees, f.inputs());
  f.prop.accept_prob *= 2.0;
  const double a2 = esjd(CriterionKind::kChees, f.inputs());
  CHECK(a1 == doctest::Approx(a2).epsilon(1e-14));
}

TEST_CASE("esjd degenerate: all rejected gives zero value and gradient") {
  Fixture f(2, 3);
  RngStream rng(10);
  f.randomize(rng);
  f.prop.accept_prob.setZero();
  CHECK(esjd(CriterionKind::kChees, f.inputs()) == 0.0);
  const CriterionOutput out = criterion(CriterionKind::kSnaper, f.inputs());
  CHECK(out.value == 0.0);
  CHECK(out.grad_phi_tau == 0.0);
}

TEST_CASE("criterion stationary case") {
  Fixture f(2, 4);
  RngStream rng(11);
  f.randomize(rng);
  f.prop.proposed_positions = f.current;
  f.mu_prime = f.mu;
  for (CriterionKind kind : {CriterionKind::kChees, CriterionKind::kCheesRate,
                             CriterionKind::kSnaper}) {
    const CriterionOutput out = criterion(kind, f.inputs());
    CHECK(out.value == 0.0);
    CHECK(out.grad_phi_tau == 0.0);
  }
}

TEST_CASE("criterion values: rate versions divide by tau") {
  Fixture f(3, 6);
  RngStream rng(12);
  f.randomize(rng);
  const double a = esjd(CriterionKind::kChees, f.inputs());
  const CriterionOutput chees = criterion(CriterionKind::kChees, f.inputs());
  const CriterionOutput rate = criterion(CriterionKind::kCheesRate, f.inputs());
  CHECK(chees.value == doctest::Approx(a).epsilon(1e-14));
  CHECK(rate.value == doctest::Approx(a / f.tau).epsilon(1e-14));
}

TEST_CASE("snaper equals four times chees-rate on a 1D problem") {
  // In one dimension with p = (1): f_snaper jumps are z'^2 - z^2 while
  // f_chees jumps are (z'^2 - z^2)/2, so the squared-jump estimate (and the
  // rate criterion) differ by exactly a factor of four.
  Fixture f(1, 8);
  RngStream rng(13);
  f.randomize(rng);
  f.p(0) = 1.0;
  const CriterionOutput snap = criterion(CriterionKind::kSnaper, f.inputs());
  const CriterionOutput rate = criterion(CriterionKind::kCheesRate, f.inputs());
  CHECK(snap.value == doctest::Approx(4.0 * rate.value).epsilon(1e-12));
  CHECK(snap.grad_phi_tau ==
        doctest::Approx(4.0 * rate.grad_phi_tau).epsilon(1e-12));
}

TEST_CASE("criterion is invariant under chain permutation") {
  Fixture f(3, 5);
  RngStream rng(14);
  f.randomize(rng);
  const CriterionOutput a = criterion(CriterionKind::kSnaper, f.inputs());

  Fixture g = f;
  std::vector<int> perm = {4, 2, 0, 3, 1};
  for (int b = 0; b < 5; ++b) {
    g.current.col(b) = f.current.col(perm[b]);
    g.prop.proposed_positions.col(b) = f.prop.proposed_positions.col(perm[b]);
    g.prop.final_momenta.col(b) = f.prop.final_momenta.col(perm[b]);
    g.prop.accept_prob(b) = f.prop.accept_prob(perm[b]);
  }
  const CriterionOutput b = criterion(CriterionKind::kSnaper, g.inputs());
  CHECK(a.value == doctest::Approx(b.value).epsilon(1e-12));
  CHECK(a.grad_phi_tau == doctest::Approx(b.grad_phi_tau).epsilon(1e-12));
}

TEST_CASE("snaper criterion is invariant under p -> -p") {
  Fixture f(4, 6);
  RngStream rng(15);
  f.randomize(rng);
  const CriterionOutput a = criterion(CriterionKind::kSnaper, f.inputs());
  f.p = -f.p;
  const CriterionOutput b = criterion(CriterionKind::kSnaper, f.inputs());
  CHECK(a.value == doctest::Approx(b.value).epsilon(1e-14));
  CHECK(a.grad_phi_tau == doctest::Approx(b.grad_phi_tau).epsilon(1e-14));
}

TEST_CASE("pathwise gradient matches the extra-drift finite difference") {
  RngStream rng(16);
  for (CriterionKind kind : {CriterionKind::kChees, CriterionKind::kCheesRate,
                             CriterionKind::kSnaper}) {
    for (int rep = 0; rep < 20; ++rep) {
      Fixture f(4, 8);
      f.randomize(rng);
      CriterionOutput out = criterion(kind, f.inputs());
      // A relative comparison needs a non-degenerate derivative; resample
      // states whose trajectory derivative happens to vanish.
      while (std::abs(out.d_value_d_tau) < 0.05) {
        f.randomize(rng);
        out = criterion(kind, f.inputs());
      }

      const double delta = 1e-5;
      Fixture g = f;
      g.prop.proposed_positions.array() +=
          delta * (f.prop.final_momenta.array().colwise() * f.mass.inv_mass);
      const CriterionOutput out2 = criterion(kind, g.inputs());

      const double fd = (out2.value - out.value) / delta;
      const double denom =
          std::max({std::abs(fd), std::abs(out.d_value_d_tau), 1e-10});
      CHECK(std::abs(fd - out.d_value_d_tau) / denom <= 1e-3);
    }
  }
}

TEST_CASE("grad_phi_tau chain rule against the pathwise derivative") {
  // For chees: dC/dphi = tau * dC/dtau. For the rate criteria the 1/tau
  // factor is differentiated too: dC/dphi = dA/dtau - A/tau.
  Fixture f(2, 6);
  RngStream rng(17);
  f.randomize(rng);

  const CriterionOutput chees = criterion(CriterionKind::kChees, f.inputs());
  CHECK(chees.grad_phi_tau ==
        doctest::Approx(f.tau * chees.d_value_d_tau).epsilon(1e-12));

  const CriterionOutput rate = criterion(CriterionKind::kCheesRate, f.inputs());
  // d_value_d_tau for the rate criterion is (dA/dtau)/tau.
  CHECK(rate.grad_phi_tau ==
        doctest::Approx(f.tau * rate.d_value_d_tau - rate.value)
            .epsilon(1e-12));
}

TEST_CASE("gradient sign flips across the criterion peak on a 1D Gaussian") {
  // Sweep the trajectory length on a linear (Gaussian) problem with common
  // random numbers; the phi_tau gradient must be positive well before the
  // criterion peak and negative well past it.
  const TargetModel model = make_diag_gaussian(Eigen::VectorXd::Ones(1));
  const MassDiag mass = MassDiag::identity(1);
  const int b = 256;
  const double eps = 0.05;

  RngStream rng(18);
  Eigen::MatrixXd positions(1, b), momenta(1, b);
  for (int j = 0; j < b; ++j) {
    positions(0, j) = rng.normal();  // start in equilibrium
    momenta(0, j) = rng.normal();
  }
  const Eigen::VectorXd mu = Eigen::VectorXd::Zero(1);
  const Eigen::VectorXd p = Eigen::VectorXd::Ones(1);

  auto criterion_at = [&](double tau) {
    std::vector<RngStream> rngs;
    for (int j = 0; j < b; ++j) {
      rngs.emplace_back(stream_seed(77, StreamKind::kChain, j));
    }
    BatchState state = init_batch_state(model, positions);
    long fused = 0;
    const int steps = leapfrog_steps_for(tau, eps);
    const ProposalBatch prop = propose_with_momenta(
        state, eps, steps, mass, model, momenta, rngs, fused);
    const CriterionInputs in{positions, prop, tau, mu, mu, p, mass};
    return criterion(CriterionKind::kSnaper, in);
  };

  // Values rise toward the quarter period (~pi/2) and fall beyond it.
  std::vector<double> taus = {0.3, 0.8, 1.3, 1.8, 2.3, 2.8};
  std::vector<double> values;
  for (double tau : taus) {
    values.push_back(criterion_at(tau).value);
  }
  const auto peak =
      std::max_element(values.begin(), values.end()) - values.begin();
  CHECK(peak > 0);
  CHECK(peak + 1 < static_cast<long>(values.size()));
  CHECK(criterion_at(taus.front()).grad_phi_tau > 0.0);
  CHECK(criterion_at(taus.back()).grad_phi_tau < 0.0);
}
