// SPDX-License-Identifier: Apache-2.0
//
// System model for downlink multiuser MIMO with per-antenna power caps:
// dimensions, channels, noise, transceivers and the downlink MSE / rate
// formulas shared by every other module.
//
// Conventions used throughout the library:
//   - H (N x M_total) stacks the per-user matrices H_k (N x M_k) column-wise;
//     user k receives through H_k^H.
//   - Streams are flattened user-major: (k, i) -> l = S_1 + ... + S_{k-1} + i.
//   - Receive-side matrices (W, U, V) are M_total x S_total and block diagonal
//     with the (M_k, S_k) pattern.

#pragma once

#include <armadillo>

#include <stdexcept>
#include <vector>

namespace dualwsr {

class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct SystemDims {
  arma::uword bs_antennas = 0;            // N
  std::vector<arma::uword> rx_antennas;   // M_k
  std::vector<arma::uword> streams;       // S_k

  arma::uword users() const { return rx_antennas.size(); }
  arma::uword total_rx() const;
  arma::uword total_streams() const;

  // First row of user k in the stacked receive dimension.
  arma::uword rx_offset(arma::uword k) const;
  // First flattened stream index of user k.
  arma::uword stream_offset(arma::uword k) const;
  arma::uword user_of_stream(arma::uword l) const;

  // Throws ModelError if K < 1, N < 1, S_k outside [1, M_k] or S_total > N.
  void validate() const;

  // K users with identical (M, S).
  static SystemDims uniform(arma::uword users, arma::uword bs_antennas,
                            arma::uword rx_per_user, arma::uword streams_per_user);
};

class ChannelSet {
 public:
  ChannelSet(SystemDims dims, arma::cx_mat stacked);

  const SystemDims& dims() const { return dims_; }
  const arma::cx_mat& stacked() const { return h_; }
  arma::cx_mat user(arma::uword k) const;

 private:
  SystemDims dims_;
  arma::cx_mat h_;
};

class NoiseModel {
 public:
  // Each block must be Hermitian (1e-12) and positive definite.
  NoiseModel(const SystemDims& dims, std::vector<arma::cx_mat> blocks);

  static NoiseModel isotropic(const SystemDims& dims, double sigma2);

  const arma::cx_mat& user(arma::uword k) const { return blocks_.at(k); }
  const std::vector<arma::cx_mat>& blocks() const { return blocks_; }
  arma::cx_mat stacked() const;

 private:
  std::vector<arma::cx_mat> blocks_;
};

struct DownlinkTransceiver {
  arma::cx_mat B;  // N x S_total
  arma::cx_mat W;  // M_total x S_total, block diagonal
};

class RateWeights {
 public:
  explicit RateWeights(arma::vec omega);

  const arma::vec& omega() const { return omega_; }
  const arma::vec& gamma() const { return gamma_; }  // 1 / (1 - w)
  const arma::vec& mu() const { return mu_; }        // 1 / w - 1
  const arma::vec& theta() const { return theta_; }  // w * mu^(1 - w)

  // MSE weights eta_l = tau_l^mu_l.
  arma::vec eta(const arma::vec& tau) const;

 private:
  arma::vec omega_, gamma_, mu_, theta_;
};

struct AuxVars {
  arma::vec tau;
  arma::vec nu;

  // Positivity and prod(nu) = 1 to 1e-8 relative.
  void validate() const;
};

// B_k = G_k P_k^{1/2}, W_k = U_k alpha_k P_k^{-1/2}.
struct Decomposition {
  arma::cx_mat G;    // N x S, unit-norm columns
  arma::vec p;       // stream powers
  arma::cx_mat U;    // M_total x S block diagonal, unit-norm columns
  arma::vec alpha;   // real positive receive scalings
};

struct CouplingMatrices {
  arma::mat Phi;       // Phi(l, j) = |g_l^H H u_j|^2, zero diagonal
  arma::vec D;         // alpha_l^2 |g_l^H H u_l|^2 - 2 alpha_l Re(u_l^H H^H g_l) + 1
  arma::mat varsigma;  // varsigma(n, l) = |G(n, l)|^2
};

// Mask with ones on the (M_k, S_k) diagonal blocks.
arma::umat block_pattern(const SystemDims& dims);
bool is_block_diagonal(const SystemDims& dims, const arma::cx_mat& W, double tol = 0.0);

// [B B^H]_{n,n}.
arma::vec antenna_powers(const arma::cx_mat& B);

arma::vec downlink_symbol_mse(const ChannelSet& channel, const NoiseModel& noise,
                              const arma::cx_mat& B, const arma::cx_mat& W);

// W_k = (H_k^H B B^H H_k + R_k)^{-1} H_k^H B_k.
arma::cx_mat downlink_mmse_receiver(const ChannelSet& channel, const NoiseModel& noise,
                                    const arma::cx_mat& B);

// 1 - b_l^H H_k (H_k^H B B^H H_k + R_k)^{-1} H_k^H b_l.
arma::vec downlink_mmse(const ChannelSet& channel, const NoiseModel& noise,
                        const arma::cx_mat& B);

// -log2(xi); rejects xi <= 0.
arma::vec symbol_rates(const arma::vec& xi_min);
double weighted_sum_rate(const RateWeights& weights, const arma::vec& xi_min);

// tr{eta [W^H Gamma W - 2 Re{W^H H^H B} + I]} with Gamma = H^H B B^H H + R_n.
double weighted_sum_mse_dl(const ChannelSet& channel, const NoiseModel& noise,
                           const arma::cx_mat& B, const arma::cx_mat& W, const arma::vec& eta);

// sum_l theta_l nu_l^gamma_l / tau_l + sum_l tau_l^mu_l xi_l.
double reformulated_objective(const arma::vec& tau, const arma::vec& nu, const arma::vec& xi,
                              const RateWeights& weights);

Decomposition decompose(const SystemDims& dims, const arma::cx_mat& B, const arma::cx_mat& W);
DownlinkTransceiver recompose(const Decomposition& dec);

CouplingMatrices build_coupling(const ChannelSet& channel, const Decomposition& dec);

// Per-stream MSE as a function of the stream powers p with (G, U, alpha) held.
arma::vec mse_from_powers(const arma::vec& p, const CouplingMatrices& coupling,
                          const Decomposition& dec, const NoiseModel& noise);

// u_l^H R_n u_l for each stream.
arma::vec noise_gains(const Decomposition& dec, const NoiseModel& noise);

}  // namespace dualwsr
