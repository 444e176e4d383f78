// SPDX-License-Identifier: Apache-2.0

#include "dualwsr/optimizer.hpp"

#include "dualwsr/gp_builders.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dualwsr {

namespace {

IterationRecord make_record(int iteration, const ChannelSet& channel, const NoiseModel& noise,
                            const DownlinkTransceiver& tx, const AuxVars& aux,
                            const RateWeights& weights) {
  IterationRecord rec;
  rec.iteration = iteration;
  rec.objective = reformulated_objective(aux.tau, aux.nu,
                                         downlink_symbol_mse(channel, noise, tx.B, tx.W), weights);
  rec.weighted_sum_rate = weighted_sum_rate(weights, downlink_mmse(channel, noise, tx.B));
  rec.antenna_powers = antenna_powers(tx.B);
  rec.total_power = arma::accu(rec.antenna_powers);
  return rec;
}

}  // namespace

arma::cx_mat init_precoder(const ChannelSet& channel, const arma::vec& p_check) {
  const auto& d = channel.dims();
  if (p_check.n_elem != d.bs_antennas || p_check.min() <= 0.0) {
    throw ModelError("power caps must be positive, one per antenna");
  }
  const arma::uword s = d.total_streams();
  if (s > d.total_rx()) throw ModelError("more streams than receive antennas");
  arma::cx_mat B = channel.stacked().cols(0, s - 1);
  for (arma::uword n = 0; n < B.n_rows; ++n) {
    const double row = arma::norm(B.row(n));
    if (row == 0.0) throw ModelError("degenerate channel: zero row " + std::to_string(n));
    B.row(n) *= std::sqrt(p_check(n)) / row;
  }
  return B;
}

AlgorithmResult run_algorithm_ii(const ChannelSet& channel, const NoiseModel& noise,
                                 const arma::vec& p_check, const RateWeights& weights,
                                 const SolveOptions& opts) {
  const SystemDims& dims = channel.dims();
  if (weights.omega().n_elem != dims.total_streams()) {
    throw ModelError("one rate weight per stream is required");
  }

  AlgorithmResult result;
  IterationTrace& trace = result.trace;
  int iteration = 0;
  auto fail = [&](const std::string& stage, const std::exception& e) -> AlgorithmError {
    return AlgorithmError("iteration " + std::to_string(iteration) + ", " + stage + ": " + e.what(),
                          trace);
  };

  DownlinkTransceiver tx;
  tx.B = init_precoder(channel, p_check);
  tx.W = downlink_mmse_receiver(channel, noise, tx.B);
  {
    const ReformulatedGp gp = build_gp_tau_nu(downlink_mmse(channel, noise, tx.B), weights);
    const GpSolution sol = solve_gp(gp.problem, opts.gp, gp.start);
    if (sol.status != GpStatus::kConverged) {
      throw AlgorithmError(std::string("initial (tau, nu) GP: ") + to_string(sol.status), trace);
    }
    result.aux = extract_point(gp, sol.x).aux;
    IterationRecord rec = make_record(0, channel, noise, tx, result.aux, weights);
    rec.gp_status = sol.status;
    rec.gp_kkt_residual = sol.kkt_residual;
    trace.push_back(std::move(rec));
  }

  for (iteration = 1; iteration <= opts.max_outer_iters; ++iteration) {
    IterationRecord rec;
    AuxVars& aux = result.aux;
    const arma::vec eta = weights.eta(aux.tau);

    // Steps 1-3: downlink -> uplink, uplink MMSE, uplink -> downlink.
    try {
      const double budget = tau_tilde(dims, noise, tx.W, eta);
      const FixedPointResult fp =
          psi_fixed_point(channel, tx.W, eta, p_check, budget, opts.fixed_point);
      const UplinkTransceiver ul = dl_to_ul_transfer(tx.B, tx.W, eta);
      const arma::cx_mat T = uplink_mmse_receiver(channel, ul.V, ul.zeta, fp.psi);
      tx = ul_to_dl_transfer(T, ul.V, fp.psi, budget);
      rec.fixed_point_iterations = fp.iterations;
      rec.transfer_violation = (antenna_powers(tx.B) - p_check).max();
    } catch (const std::exception& e) {
      throw fail("duality transfer", e);
    }

    // Steps 4-5: joint (tau, nu, p) GP on MMSE-consistent filters.
    try {
      tx.W = downlink_mmse_receiver(channel, noise, tx.B);
      Decomposition dec = decompose(dims, tx.B, tx.W);
      const CouplingMatrices coupling = build_coupling(channel, dec);
      const ReformulatedGp gp = build_gp_full(coupling, dec, noise, p_check, weights, &aux);
      const GpSolution sol = solve_gp(gp.problem, opts.gp, gp.start);
      rec.gp_status = sol.status;
      rec.gp_kkt_residual = sol.kkt_residual;
      if (sol.status != GpStatus::kConverged) {
        throw std::runtime_error(std::string("power GP ") + to_string(sol.status));
      }
      // The transferred powers meet the caps only to the fixed-point tolerance.
      const arma::vec load = coupling.varsigma * dec.p;
      double headroom = 1.0;
      for (arma::uword n = 0; n < load.n_elem; ++n) {
        if (load(n) > p_check(n)) headroom = std::min(headroom, p_check(n) / load(n));
      }
      dec.p *= headroom;
      const double incumbent = reformulated_objective(
          aux.tau, aux.nu, mse_from_powers(dec.p, coupling, dec, noise), weights);
      if (sol.objective_value <= incumbent) {
        const ReformulatedPoint pt = extract_point(gp, sol.x);
        aux = pt.aux;
        dec.p = pt.p;
      } else {
        rec.gp_rejected = true;
      }
      tx = recompose(dec);
      tx.W = downlink_mmse_receiver(channel, noise, tx.B);
    } catch (const std::exception& e) {
      throw fail("power update", e);
    }

    const IterationRecord measured = make_record(iteration, channel, noise, tx, aux, weights);
    rec.iteration = iteration;
    rec.objective = measured.objective;
    rec.weighted_sum_rate = measured.weighted_sum_rate;
    rec.antenna_powers = measured.antenna_powers;
    rec.total_power = measured.total_power;
    const double previous = trace.back().objective;
    trace.push_back(std::move(rec));

    if ((previous - trace.back().objective) < opts.outer_tol * std::abs(previous)) {
      result.converged = true;
      break;
    }
  }
  result.tx = std::move(tx);
  return result;
}

SolutionReport evaluate_solution(const ChannelSet& channel, const NoiseModel& noise,
                                 const arma::cx_mat& B, const RateWeights& weights,
                                 const arma::vec& p_check) {
  SolutionReport r;
  r.xi_min = downlink_mmse(channel, noise, B);
  r.weighted_sum_rate = weighted_sum_rate(weights, r.xi_min);
  r.antenna_powers = antenna_powers(B);
  r.total_power = arma::accu(r.antenna_powers);
  r.max_violation = (r.antenna_powers - p_check).max();
  return r;
}

}  // namespace dualwsr
