// SPDX-License-Identifier: Apache-2.0
//
// Alternating optimization of the weighted sum rate under per-antenna power
// caps. Each outer iteration
//   1. builds the virtual uplink (V = W, T = B, zeta = eta) and the uplink
//      noise psi by fixed point,
//   2. replaces T by the uplink MMSE decoder,
//   3. maps back to the downlink with the scalar beta,
//   4. refreshes W (MMSE), decomposes (B, W) and solves the joint
//      (tau, nu, p) geometric program,
//   5. recomposes B with the new powers and refreshes W (MMSE).
// Every step is non-increasing in the reformulated objective.

#pragma once

#include "dualwsr/duality.hpp"
#include "dualwsr/gp.hpp"
#include "dualwsr/model.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace dualwsr {

struct SolveOptions {
  int max_outer_iters = 100;
  double outer_tol = 1e-6;  // relative decrease of the reformulated objective
  FixedPointOptions fixed_point;
  GpOptions gp;
};

struct IterationRecord {
  int iteration = 0;                 // 0 is the initial point
  double objective = 0.0;
  double weighted_sum_rate = 0.0;
  arma::vec antenna_powers;
  double total_power = 0.0;
  double transfer_violation = 0.0;   // max_n power - cap right after the uplink -> downlink map
  int fixed_point_iterations = 0;
  GpStatus gp_status = GpStatus::kConverged;
  double gp_kkt_residual = 0.0;
  bool gp_rejected = false;          // GP point was no better than the incumbent
};

using IterationTrace = std::vector<IterationRecord>;

struct AlgorithmResult {
  DownlinkTransceiver tx;
  AuxVars aux;
  IterationTrace trace;
  bool converged = false;
};

// Carries the trace recorded before the failing step.
class AlgorithmError : public std::runtime_error {
 public:
  AlgorithmError(const std::string& what, IterationTrace trace)
      : std::runtime_error(what), trace_(std::move(trace)) {}
  const IterationTrace& trace() const { return trace_; }

 private:
  IterationTrace trace_;
};

struct SolutionReport {
  arma::vec xi_min;
  double weighted_sum_rate = 0.0;
  arma::vec antenna_powers;
  double total_power = 0.0;
  double max_violation = 0.0;  // max_n (power_n - cap_n)
};

// First S_total columns of H with each row scaled to its antenna cap.
arma::cx_mat init_precoder(const ChannelSet& channel, const arma::vec& p_check);

AlgorithmResult run_algorithm_ii(const ChannelSet& channel, const NoiseModel& noise,
                                 const arma::vec& p_check, const RateWeights& weights,
                                 const SolveOptions& opts = {});

SolutionReport evaluate_solution(const ChannelSet& channel, const NoiseModel& noise,
                                 const arma::cx_mat& B, const RateWeights& weights,
                                 const arma::vec& p_check);

}  // namespace dualwsr
