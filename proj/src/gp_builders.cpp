// SPDX-License-Identifier: Apache-2.0

#include "dualwsr/gp_builders.hpp"

#include <string>

namespace dualwsr {

namespace {

// Adds tau_l, nu_l and the rate part theta_l nu_l^gamma_l / tau_l of the
// objective plus prod(nu) = 1.
void add_rate_block(ReformulatedGp& gp, const RateWeights& weights, Posynomial& objective) {
  const arma::uword s = weights.omega().n_elem;
  for (arma::uword l = 0; l < s; ++l) {
    gp.tau.push_back(gp.problem.add_variable("tau_" + std::to_string(l + 1)));
  }
  for (arma::uword l = 0; l < s; ++l) {
    gp.nu.push_back(gp.problem.add_variable("nu_" + std::to_string(l + 1)));
  }
  Monomial product{1.0, {}};
  for (arma::uword l = 0; l < s; ++l) {
    objective.push_back(
        {weights.theta()(l), {{gp.tau[l], -1.0}, {gp.nu[l], weights.gamma()(l)}}});
    product.exponents.push_back({gp.nu[l], 1.0});
  }
  gp.problem.add_equality(std::move(product), 1.0);
}

}  // namespace

ReformulatedGp build_gp_tau_nu(const arma::vec& xi_min, const RateWeights& weights) {
  const arma::uword s = weights.omega().n_elem;
  if (xi_min.n_elem != s) throw ModelError("MMSE vector has wrong length");
  if (xi_min.min() <= 0.0 || xi_min.max() > 1.0 + 1e-12) {
    throw ModelError("MMSE values must lie in (0, 1]");
  }
  ReformulatedGp gp;
  Posynomial objective;
  add_rate_block(gp, weights, objective);
  for (arma::uword l = 0; l < s; ++l) {
    objective.push_back({xi_min(l), {{gp.tau[l], weights.mu()(l)}}});
  }
  gp.problem.set_objective(std::move(objective));
  gp.start = arma::ones(2 * s);
  return gp;
}

ReformulatedGp build_gp_full(const CouplingMatrices& coupling, const Decomposition& dec,
                             const NoiseModel& noise, const arma::vec& p_check,
                             const RateWeights& weights, const AuxVars* incumbent) {
  const arma::uword s = weights.omega().n_elem;
  const arma::uword n_ant = coupling.varsigma.n_rows;
  if (coupling.D.n_elem != s || dec.p.n_elem != s || coupling.varsigma.n_cols != s) {
    throw ModelError("coupling matrices have wrong shape");
  }
  if (p_check.n_elem != n_ant || p_check.min() <= 0.0) {
    throw ModelError("power caps must be positive, one per antenna");
  }
  for (arma::uword l = 0; l < s; ++l) {
    if (!(coupling.D(l) > 0.0)) {
      throw ModelError("D(" + std::to_string(l) +
                       ") is not positive; refresh the receivers before building the GP");
    }
  }

  ReformulatedGp gp;
  Posynomial objective;
  add_rate_block(gp, weights, objective);
  for (arma::uword l = 0; l < s; ++l) {
    gp.power.push_back(gp.problem.add_variable("p_" + std::to_string(l + 1)));
  }

  // tau_l^mu_l * xi_l(p), with
  // xi_l = D_l + alpha_l^2 sum_{j != l} Phi(j, l) p_j / p_l + alpha_l^2 u_l^H R u_l / p_l.
  const arma::vec gains = noise_gains(dec, noise);
  for (arma::uword l = 0; l < s; ++l) {
    const double mu = weights.mu()(l);
    const double a2 = dec.alpha(l) * dec.alpha(l);
    objective.push_back({coupling.D(l), {{gp.tau[l], mu}}});
    for (arma::uword j = 0; j < s; ++j) {
      if (j == l || coupling.Phi(j, l) == 0.0) continue;
      objective.push_back({a2 * coupling.Phi(j, l),
                           {{gp.tau[l], mu}, {gp.power[j], 1.0}, {gp.power[l], -1.0}}});
    }
    objective.push_back({a2 * gains(l), {{gp.tau[l], mu}, {gp.power[l], -1.0}}});
  }
  gp.problem.set_objective(std::move(objective));

  for (arma::uword n = 0; n < n_ant; ++n) {
    Posynomial row;
    for (arma::uword l = 0; l < s; ++l) {
      if (coupling.varsigma(n, l) > 0.0) row.push_back({coupling.varsigma(n, l), {{gp.power[l], 1.0}}});
    }
    if (!row.empty()) gp.problem.add_inequality(std::move(row), p_check(n));
  }

  arma::vec p0 = arma::clamp(dec.p, 1e-6 * dec.p.max(), arma::datum::inf);
  const arma::vec load = coupling.varsigma * p0;
  double headroom = arma::datum::inf;
  for (arma::uword n = 0; n < n_ant; ++n) {
    if (load(n) > 0.0) headroom = std::min(headroom, p_check(n) / load(n));
  }
  if (headroom <= 1.0 / 0.99) p0 *= 0.99 * headroom;

  gp.start.set_size(3 * s);
  if (incumbent != nullptr) {
    gp.start.subvec(0, s - 1) = incumbent->tau;
    gp.start.subvec(s, 2 * s - 1) = incumbent->nu;
  } else {
    gp.start.subvec(0, 2 * s - 1).ones();
  }
  gp.start.subvec(2 * s, 3 * s - 1) = p0;
  return gp;
}

ReformulatedPoint extract_point(const ReformulatedGp& gp, const arma::vec& x) {
  ReformulatedPoint out;
  const arma::uword s = gp.tau.size();
  out.aux.tau.set_size(s);
  out.aux.nu.set_size(s);
  for (arma::uword l = 0; l < s; ++l) {
    out.aux.tau(l) = x(gp.tau[l]);
    out.aux.nu(l) = x(gp.nu[l]);
  }
  if (!gp.power.empty()) {
    out.p.set_size(s);
    for (arma::uword l = 0; l < s; ++l) out.p(l) = x(gp.power[l]);
  }
  return out;
}

}  // namespace dualwsr
