// SPDX-License-Identifier: Apache-2.0
//
// The two geometric programs of the alternating loop:
//   - (tau, nu) with the MMSE values held fixed;
//   - (tau, nu, p) with the unit-norm filters and receive scalings held fixed.
// Both minimize sum_l theta_l nu_l^gamma_l / tau_l + tau_l^mu_l xi_l subject
// to prod(nu) = 1.

#pragma once

#include "dualwsr/gp.hpp"
#include "dualwsr/model.hpp"

#include <vector>

namespace dualwsr {

struct ReformulatedGp {
  GpProblem problem;
  std::vector<std::size_t> tau, nu, power;  // variable indices; power empty for (tau, nu)
  arma::vec start;                          // strictly feasible point
};

struct ReformulatedPoint {
  AuxVars aux;
  arma::vec p;  // empty for the (tau, nu) problem
};

// Variables (tau, nu); start tau = nu = 1.
ReformulatedGp build_gp_tau_nu(const arma::vec& xi_min, const RateWeights& weights);

// Variables (tau, nu, p); the stream MSEs are expanded into posynomials in p
// and each antenna contributes varsigma_n^T p <= p_check_n. The start keeps
// `incumbent` (tau = nu = 1 when null) and the current powers, scaled to
// 0.99 of the tightest cap when not strictly inside. Throws ModelError for a
// non-positive D_ll.
ReformulatedGp build_gp_full(const CouplingMatrices& coupling, const Decomposition& dec,
                             const NoiseModel& noise, const arma::vec& p_check,
                             const RateWeights& weights, const AuxVars* incumbent = nullptr);

ReformulatedPoint extract_point(const ReformulatedGp& gp, const arma::vec& x);

}  // namespace dualwsr
