// SPDX-License-Identifier: Apache-2.0
//
// Covered tests:
//   - (tau, nu) program against its closed-form optimum
//   - joint program: objective and cap rows agree with the model formulas,
//     start point, solution feasibility, input checks

#include "dualwsr/gp_builders.hpp"
#include "test_support.hpp"

#include "catch_amalgamated.hpp"

#include <cmath>

using namespace dualwsr;
using Catch::Matchers::WithinRel;

namespace {

// S (prod_l c_l)^{1/S}, c_l = w^-w mu^(-w (1 - w)) xi^w.
double tau_nu_optimum(const arma::vec& omega, const arma::vec& xi) {
  double log_sum = 0.0;
  for (arma::uword l = 0; l < omega.n_elem; ++l) {
    const double w = omega(l), mu = 1.0 / w - 1.0;
    log_sum += -w * std::log(w) - w * (1.0 - w) * std::log(mu) + w * std::log(xi(l));
  }
  const double s = static_cast<double>(omega.n_elem);
  return s * std::exp(log_sum / s);
}

struct FullInstance {
  SystemDims dims;
  ChannelSet channel;
  NoiseModel noise;
  Decomposition dec;
  CouplingMatrices coupling;
  arma::vec caps;
  RateWeights weights;
};

FullInstance full_instance(testing::Rng& rng, double sigma2) {
  const SystemDims d = testing::reference_dims();
  ChannelSet ch = testing::random_channel(rng, d);
  NoiseModel nz = NoiseModel::isotropic(d, sigma2);
  const arma::cx_mat B = 0.6 * rng.cmat(4, 4);
  const arma::cx_mat W = testing::ref_mmse_receiver(d, ch.stacked(), nz.blocks(), B);
  Decomposition dec = decompose(d, B, W);
  CouplingMatrices c = build_coupling(ch, dec);
  return {d, std::move(ch), std::move(nz), std::move(dec), std::move(c),
          arma::vec(4, arma::fill::value(2.5)), RateWeights(arma::vec{0.4, 0.2, 0.6, 0.25})};
}

}  // namespace

TEST_CASE("(tau, nu) program reaches the closed-form optimum", "[gp_builders]") {
  testing::Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const arma::uword s = static_cast<arma::uword>(rng.integer(1, 5));
    const arma::vec omega = rng.positive(s, 0.05, 0.95);
    const arma::vec xi = rng.positive(s, 0.01, 1.0);
    const RateWeights w(omega);
    const ReformulatedGp gp = build_gp_tau_nu(xi, w);
    CHECK(gp.power.empty());
    CHECK(gp.problem.num_variables() == 2 * s);
    const GpSolution sol = solve_gp(gp.problem, {}, gp.start);
    REQUIRE(sol.status == GpStatus::kConverged);
    const double expected = tau_nu_optimum(omega, xi);
    CHECK_THAT(sol.objective_value, WithinRel(expected, 1e-8));

    const ReformulatedPoint pt = extract_point(gp, sol.x);
    CHECK(pt.p.is_empty());
    CHECK_NOTHROW(pt.aux.validate());
    CHECK_THAT(reformulated_objective(pt.aux.tau, pt.aux.nu, xi, w), WithinRel(expected, 1e-8));
    // tau solves the inner minimization in closed form.
    for (arma::uword l = 0; l < s; ++l) {
      const double mu = w.mu()(l);
      const double tau_star =
          std::pow(w.theta()(l) * std::pow(pt.aux.nu(l), w.gamma()(l)) / (mu * xi(l)), 1.0 / (mu + 1.0));
      CHECK_THAT(pt.aux.tau(l), WithinRel(tau_star, 1e-5));
    }
  }
}

TEST_CASE("(tau, nu) program input checks", "[gp_builders]") {
  const RateWeights w(arma::vec{0.5, 0.5});
  CHECK_THROWS_AS(build_gp_tau_nu(arma::vec{0.5}, w), ModelError);
  CHECK_THROWS_AS(build_gp_tau_nu(arma::vec{0.5, 0.0}, w), ModelError);
  CHECK_THROWS_AS(build_gp_tau_nu(arma::vec{0.5, 1.5}, w), ModelError);
}

TEST_CASE("joint program encodes the reformulated objective and caps", "[gp_builders]") {
  testing::Rng rng(42);
  for (int trial = 0; trial < 10; ++trial) {
    const FullInstance in = full_instance(rng, rng.uniform(0.05, 1.0));
    const ReformulatedGp gp =
        build_gp_full(in.coupling, in.dec, in.noise, in.caps, in.weights);
    REQUIRE(gp.power.size() == 4);
    CHECK(gp.problem.inequalities().size() == 4);
    CHECK(gp.problem.equalities().size() == 1);

    // Any positive point: objective posynomial equals the formula with the
    // stream MSEs recomputed from scratch at the recomposed transceiver.
    arma::vec x(12);
    x.subvec(0, 7) = rng.positive(8, 0.3, 2.0);
    x.subvec(8, 11) = rng.positive(4, 0.2, 2.0);
    const ReformulatedPoint pt = extract_point(gp, x);
    Decomposition moved = in.dec;
    moved.p = pt.p;
    const DownlinkTransceiver tx = recompose(moved);
    const arma::vec xi =
        testing::ref_symbol_mse(in.dims, in.channel.stacked(), in.noise.blocks(), tx.B, tx.W);
    double expected = 0.0;
    for (arma::uword l = 0; l < 4; ++l) {
      expected += in.weights.theta()(l) * std::pow(pt.aux.nu(l), in.weights.gamma()(l)) / pt.aux.tau(l) +
                  std::pow(pt.aux.tau(l), in.weights.mu()(l)) * xi(l);
    }
    CHECK(testing::rel_err(evaluate(gp.problem.objective(), x), expected) <= 1e-10);

    const arma::vec rows = testing::ref_row_powers(tx.B);
    for (arma::uword n = 0; n < 4; ++n) {
      const auto& c = gp.problem.inequalities()[n];
      CHECK(testing::rel_err(evaluate(c.lhs, x), rows(n)) <= 1e-12);
      CHECK(c.bound == 2.5);
    }

    CHECK(gp.problem.max_log_violation(gp.start) < 0.0);
    CHECK(arma::all(gp.start.subvec(0, 7) == 1.0));
  }
}

TEST_CASE("joint program start keeps the incumbent", "[gp_builders]") {
  testing::Rng rng(43);
  const FullInstance in = full_instance(rng, 0.3);
  const AuxVars inc{arma::vec{1.1, 0.9, 1.3, 0.7}, arma::vec{2.0, 0.5, 1.0, 1.0}};
  const ReformulatedGp gp = build_gp_full(in.coupling, in.dec, in.noise, in.caps, in.weights, &inc);
  const ReformulatedPoint pt = extract_point(gp, gp.start);
  CHECK(arma::approx_equal(pt.aux.tau, inc.tau, "absdiff", 0.0));
  CHECK(arma::approx_equal(pt.aux.nu, inc.nu, "absdiff", 0.0));
  CHECK(gp.problem.max_log_violation(gp.start) < 0.0);
}

TEST_CASE("joint program solution is feasible and improves the start", "[gp_builders]") {
  testing::Rng rng(44);
  for (int trial = 0; trial < 5; ++trial) {
    const FullInstance in = full_instance(rng, rng.uniform(0.05, 1.0));
    const ReformulatedGp gp = build_gp_full(in.coupling, in.dec, in.noise, in.caps, in.weights);
    const GpSolution sol = solve_gp(gp.problem, {}, gp.start);
    REQUIRE(sol.status == GpStatus::kConverged);
    CHECK(sol.kkt_residual <= 1e-8);
    CHECK(sol.objective_value <= evaluate(gp.problem.objective(), gp.start));
    const ReformulatedPoint pt = extract_point(gp, sol.x);
    CHECK_NOTHROW(pt.aux.validate());
    CHECK((in.coupling.varsigma * pt.p - in.caps).max() <= 1e-8);
  }
}

TEST_CASE("joint program input checks", "[gp_builders]") {
  testing::Rng rng(45);
  const FullInstance in = full_instance(rng, 0.3);
  CouplingMatrices zero_d = in.coupling;
  zero_d.D(2) = 0.0;
  CHECK_THROWS_AS(build_gp_full(zero_d, in.dec, in.noise, in.caps, in.weights), ModelError);
  CHECK_THROWS_AS(build_gp_full(in.coupling, in.dec, in.noise, arma::vec{1.0, 1.0, 1.0}, in.weights),
                  ModelError);
  CHECK_THROWS_AS(build_gp_full(in.coupling, in.dec, in.noise, in.caps, RateWeights(arma::vec{0.5})),
                  ModelError);
}
