// SPDX-License-Identifier: Apache-2.0
//
// Weighted sum-MSE transfer between the downlink and a virtual uplink whose
// diagonal noise covariance diag(psi) is the fixed point of a per-antenna
// power-balancing map.

#pragma once

#include "dualwsr/model.hpp"

#include <stdexcept>

namespace dualwsr {

struct UplinkTransceiver {
  arma::cx_mat V;     // M_total x S_total precoder, block diagonal
  arma::cx_mat T;     // N x S_total decoder
  arma::vec zeta;     // symbol variances
  arma::vec lambda;   // MSE weights
};

class FixedPointError : public std::runtime_error {
 public:
  FixedPointError(const std::string& what, double residual, int iterations)
      : std::runtime_error(what), residual_(residual), iterations_(iterations) {}
  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

enum class FixedPointMethod {
  kPicard,  // psi <- F(psi)
  kNewton,  // Newton on log F(psi) - log psi, Picard fallback
};

struct FixedPointOptions {
  double tol = 1e-8;
  int max_iters = 500;
  FixedPointMethod method = FixedPointMethod::kNewton;
};

struct FixedPointResult {
  arma::vec psi;
  double residual = 0.0;   // ||psi - max(F(psi), eps)|| / ||psi||
  int iterations = 0;
  int floor_active = 0;    // antennas held at the lower bound with F_n < psi_n
};

// tr{lambda (T^H Sigma T - 2 Re{zeta T^H H V} + zeta)}, Sigma = H V zeta V^H H^H + diag(psi).
double weighted_sum_mse_ul(const ChannelSet& channel, const UplinkTransceiver& ul,
                           const arma::vec& psi);

// sum_k tr{eta_k W_k^H R_k W_k}.
double tau_tilde(const SystemDims& dims, const NoiseModel& noise, const arma::cx_mat& W,
                 const arma::vec& eta);

// V = W, T = B, zeta = eta, lambda = I.
UplinkTransceiver dl_to_ul_transfer(const arma::cx_mat& B, const arma::cx_mat& W,
                                    const arma::vec& eta);

// T = (H V zeta V^H H^H + diag(psi))^{-1} H V zeta.
arma::cx_mat uplink_mmse_receiver(const ChannelSet& channel, const arma::cx_mat& V,
                                  const arma::vec& zeta, const arma::vec& psi);

// Lower end of the fixed-point domain: min(1e-6, min_n tau / p_n).
double psi_floor(double tau_tilde, const arma::vec& p_check);

// F(psi)_n = (tau / p_n) psi_n |t_n|^2 / sum_i psi_i |t_i|^2 with T the uplink
// MMSE decoder for psi.
arma::vec uplink_noise_map(const ChannelSet& channel, const arma::cx_mat& W,
                           const arma::vec& eta, const arma::vec& p_check, double tau_tilde,
                           const arma::vec& psi);

// Solves psi = max(F(psi), eps) from psi_0 = tau / sum(p_check). When no component sits on the
// lower bound this is psi = F(psi), sum_n psi_n p_n = tau and every antenna
// runs at its cap after the transfer; antennas held at eps end up below their
// cap. Throws FixedPointError when the residual does not reach opts.tol.
FixedPointResult psi_fixed_point(const ChannelSet& channel, const arma::cx_mat& W,
                                 const arma::vec& eta, const arma::vec& p_check,
                                 double tau_tilde, const FixedPointOptions& opts = {});

// B = beta T, W = V / beta with beta^2 = tau / sum_n psi_n |t_n|^2.
DownlinkTransceiver ul_to_dl_transfer(const arma::cx_mat& T, const arma::cx_mat& V,
                                      const arma::vec& psi, double tau_tilde);

}  // namespace dualwsr
