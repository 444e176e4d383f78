// SPDX-License-Identifier: Apache-2.0

#include "dualwsr/model.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace dualwsr {

namespace {

arma::cx_mat hermitian_part(const arma::cx_mat& a) { return 0.5 * (a + a.t()); }

void require(bool ok, const std::string& what) {
  if (!ok) throw ModelError(what);
}

void check_transceiver_shapes(const ChannelSet& channel, const arma::cx_mat& B,
                              const arma::cx_mat& W) {
  const auto& d = channel.dims();
  require(B.n_rows == d.bs_antennas && B.n_cols == d.total_streams(),
          "precoder must be N x S_total");
  require(W.n_rows == d.total_rx() && W.n_cols == d.total_streams(),
          "decoder must be M_total x S_total");
  require(is_block_diagonal(d, W), "decoder must be block diagonal");
}

// H_k^H B B^H H_k + R_k, symmetrized.
arma::cx_mat user_covariance(const ChannelSet& channel, const NoiseModel& noise,
                             const arma::cx_mat& B, arma::uword k) {
  const arma::cx_mat hk = channel.user(k);
  const arma::cx_mat hb = hk.t() * B;
  return hermitian_part(hb * hb.t() + noise.user(k));
}

arma::cx_mat solve_hpd(const arma::cx_mat& a, const arma::cx_mat& rhs) {
  arma::cx_mat x;
  if (!arma::solve(x, a, rhs, arma::solve_opts::likely_sympd + arma::solve_opts::no_approx)) {
    throw ModelError("receive covariance is singular");
  }
  return x;
}

}  // namespace

arma::uword SystemDims::total_rx() const {
  return std::accumulate(rx_antennas.begin(), rx_antennas.end(), arma::uword{0});
}

arma::uword SystemDims::total_streams() const {
  return std::accumulate(streams.begin(), streams.end(), arma::uword{0});
}

arma::uword SystemDims::rx_offset(arma::uword k) const {
  return std::accumulate(rx_antennas.begin(), rx_antennas.begin() + k, arma::uword{0});
}

arma::uword SystemDims::stream_offset(arma::uword k) const {
  return std::accumulate(streams.begin(), streams.begin() + k, arma::uword{0});
}

arma::uword SystemDims::user_of_stream(arma::uword l) const {
  arma::uword acc = 0;
  for (arma::uword k = 0; k < streams.size(); ++k) {
    acc += streams[k];
    if (l < acc) return k;
  }
  throw ModelError("stream index out of range");
}

void SystemDims::validate() const {
  require(!rx_antennas.empty(), "at least one user is required");
  require(bs_antennas >= 1, "at least one BS antenna is required");
  require(streams.size() == rx_antennas.size(), "streams and rx_antennas differ in length");
  for (arma::uword k = 0; k < users(); ++k) {
    require(streams[k] >= 1 && streams[k] <= rx_antennas[k],
            "user " + std::to_string(k) + ": need 1 <= S_k <= M_k");
  }
  require(total_streams() <= bs_antennas, "total stream count exceeds BS antennas");
}

SystemDims SystemDims::uniform(arma::uword users, arma::uword bs_antennas,
                               arma::uword rx_per_user, arma::uword streams_per_user) {
  SystemDims d;
  d.bs_antennas = bs_antennas;
  d.rx_antennas.assign(users, rx_per_user);
  d.streams.assign(users, streams_per_user);
  return d;
}

ChannelSet::ChannelSet(SystemDims dims, arma::cx_mat stacked)
    : dims_(std::move(dims)), h_(std::move(stacked)) {
  dims_.validate();
  require(h_.n_rows == dims_.bs_antennas && h_.n_cols == dims_.total_rx(),
          "channel must be N x M_total");
  require(h_.is_finite(), "channel has non-finite entries");
}

arma::cx_mat ChannelSet::user(arma::uword k) const {
  const arma::uword first = dims_.rx_offset(k);
  return h_.cols(first, first + dims_.rx_antennas.at(k) - 1);
}

NoiseModel::NoiseModel(const SystemDims& dims, std::vector<arma::cx_mat> blocks)
    : blocks_(std::move(blocks)) {
  require(blocks_.size() == dims.users(), "one noise covariance per user is required");
  for (arma::uword k = 0; k < blocks_.size(); ++k) {
    const arma::cx_mat& r = blocks_[k];
    const std::string tag = "noise covariance " + std::to_string(k);
    require(r.is_square() && r.n_rows == dims.rx_antennas[k], tag + " has wrong shape");
    require(r.is_finite(), tag + " has non-finite entries");
    const double scale = std::max(1.0, arma::norm(r, "inf"));
    require(arma::abs(r - r.t()).max() <= 1e-12 * scale, tag + " is not Hermitian");
    const arma::vec ev = arma::eig_sym(hermitian_part(r));
    require(ev.min() > 0.0, tag + " is not positive definite");
  }
}

NoiseModel NoiseModel::isotropic(const SystemDims& dims, double sigma2) {
  std::vector<arma::cx_mat> blocks;
  blocks.reserve(dims.users());
  for (arma::uword m : dims.rx_antennas) {
    blocks.push_back(sigma2 * arma::eye<arma::cx_mat>(m, m));
  }
  return NoiseModel(dims, std::move(blocks));
}

arma::cx_mat NoiseModel::stacked() const {
  arma::uword total = 0;
  for (const auto& b : blocks_) total += b.n_rows;
  arma::cx_mat r(total, total, arma::fill::zeros);
  arma::uword off = 0;
  for (const auto& b : blocks_) {
    r.submat(off, off, off + b.n_rows - 1, off + b.n_rows - 1) = b;
    off += b.n_rows;
  }
  return r;
}

RateWeights::RateWeights(arma::vec omega) : omega_(std::move(omega)) {
  require(!omega_.empty(), "rate weights are empty");
  for (double w : omega_) {
    require(w > 0.0 && w < 1.0, "rate weights must lie strictly inside (0, 1)");
  }
  gamma_ = 1.0 / (1.0 - omega_);
  mu_ = 1.0 / omega_ - 1.0;
  theta_.set_size(omega_.n_elem);
  for (arma::uword l = 0; l < omega_.n_elem; ++l) {
    theta_(l) = omega_(l) * std::pow(mu_(l), 1.0 - omega_(l));
  }
}

arma::vec RateWeights::eta(const arma::vec& tau) const {
  require(tau.n_elem == mu_.n_elem, "tau has wrong length");
  arma::vec out(tau.n_elem);
  for (arma::uword l = 0; l < tau.n_elem; ++l) out(l) = std::pow(tau(l), mu_(l));
  return out;
}

void AuxVars::validate() const {
  require(tau.n_elem == nu.n_elem, "tau and nu differ in length");
  require(tau.min() > 0.0 && nu.min() > 0.0, "auxiliary variables must be positive");
  const double log_prod = arma::accu(arma::log(nu));
  require(std::abs(std::expm1(log_prod)) <= 1e-8, "product of nu must equal one");
}

arma::umat block_pattern(const SystemDims& dims) {
  arma::umat mask(dims.total_rx(), dims.total_streams(), arma::fill::zeros);
  for (arma::uword k = 0; k < dims.users(); ++k) {
    const arma::uword r0 = dims.rx_offset(k), c0 = dims.stream_offset(k);
    mask.submat(r0, c0, r0 + dims.rx_antennas[k] - 1, c0 + dims.streams[k] - 1).ones();
  }
  return mask;
}

bool is_block_diagonal(const SystemDims& dims, const arma::cx_mat& W, double tol) {
  if (W.n_rows != dims.total_rx() || W.n_cols != dims.total_streams()) return false;
  const arma::umat mask = block_pattern(dims);
  for (arma::uword c = 0; c < W.n_cols; ++c) {
    for (arma::uword r = 0; r < W.n_rows; ++r) {
      if (!mask(r, c) && std::abs(W(r, c)) > tol) return false;
    }
  }
  return true;
}

arma::vec antenna_powers(const arma::cx_mat& B) {
  return arma::sum(arma::square(arma::abs(B)), 1);
}

arma::vec downlink_symbol_mse(const ChannelSet& channel, const NoiseModel& noise,
                              const arma::cx_mat& B, const arma::cx_mat& W) {
  check_transceiver_shapes(channel, B, W);
  const arma::cx_mat& H = channel.stacked();
  const arma::cx_mat hb = H.t() * B;
  const arma::cx_mat gamma = hermitian_part(hb * hb.t() + noise.stacked());
  const arma::cx_mat quad = W.t() * gamma * W;
  const arma::cx_mat cross = W.t() * hb;
  return arma::real(quad.diag()) - 2.0 * arma::real(cross.diag()) + 1.0;
}

arma::cx_mat downlink_mmse_receiver(const ChannelSet& channel, const NoiseModel& noise,
                                    const arma::cx_mat& B) {
  const auto& d = channel.dims();
  require(B.n_rows == d.bs_antennas && B.n_cols == d.total_streams(),
          "precoder must be N x S_total");
  arma::cx_mat W(d.total_rx(), d.total_streams(), arma::fill::zeros);
  for (arma::uword k = 0; k < d.users(); ++k) {
    const arma::uword r0 = d.rx_offset(k), c0 = d.stream_offset(k);
    const arma::cx_mat bk = B.cols(c0, c0 + d.streams[k] - 1);
    const arma::cx_mat wk =
        solve_hpd(user_covariance(channel, noise, B, k), channel.user(k).t() * bk);
    W.submat(r0, c0, r0 + d.rx_antennas[k] - 1, c0 + d.streams[k] - 1) = wk;
  }
  return W;
}

arma::vec downlink_mmse(const ChannelSet& channel, const NoiseModel& noise,
                        const arma::cx_mat& B) {
  const auto& d = channel.dims();
  require(B.n_rows == d.bs_antennas && B.n_cols == d.total_streams(),
          "precoder must be N x S_total");
  arma::vec xi(d.total_streams());
  for (arma::uword k = 0; k < d.users(); ++k) {
    const arma::uword c0 = d.stream_offset(k);
    const arma::cx_mat hbk = channel.user(k).t() * B.cols(c0, c0 + d.streams[k] - 1);
    const arma::cx_mat x = solve_hpd(user_covariance(channel, noise, B, k), hbk);
    for (arma::uword i = 0; i < d.streams[k]; ++i) {
      xi(c0 + i) = 1.0 - std::real(arma::cdot(hbk.col(i), x.col(i)));
    }
  }
  return xi;
}

arma::vec symbol_rates(const arma::vec& xi_min) {
  require(xi_min.n_elem > 0 && xi_min.min() > 0.0, "MMSE values must be positive");
  return -arma::log2(xi_min);
}

double weighted_sum_rate(const RateWeights& weights, const arma::vec& xi_min) {
  require(weights.omega().n_elem == xi_min.n_elem, "weight / MSE length mismatch");
  return arma::dot(weights.omega(), symbol_rates(xi_min));
}

double weighted_sum_mse_dl(const ChannelSet& channel, const NoiseModel& noise,
                           const arma::cx_mat& B, const arma::cx_mat& W, const arma::vec& eta) {
  check_transceiver_shapes(channel, B, W);
  require(eta.n_elem == B.n_cols, "eta has wrong length");
  const arma::cx_mat& H = channel.stacked();
  const arma::cx_mat gamma = hermitian_part(H.t() * B * B.t() * H + noise.stacked());
  const arma::mat inner = arma::real(W.t() * gamma * W) - 2.0 * arma::real(W.t() * H.t() * B) +
                          arma::eye(B.n_cols, B.n_cols);
  return arma::trace(arma::diagmat(eta) * inner);
}

double reformulated_objective(const arma::vec& tau, const arma::vec& nu, const arma::vec& xi,
                              const RateWeights& weights) {
  const arma::uword s = weights.omega().n_elem;
  require(tau.n_elem == s && nu.n_elem == s && xi.n_elem == s, "length mismatch");
  require(tau.min() > 0.0 && nu.min() > 0.0, "tau and nu must be positive");
  double total = 0.0;
  for (arma::uword l = 0; l < s; ++l) {
    total += weights.theta()(l) * std::pow(nu(l), weights.gamma()(l)) / tau(l);
    total += std::pow(tau(l), weights.mu()(l)) * xi(l);
  }
  return total;
}

Decomposition decompose(const SystemDims& dims, const arma::cx_mat& B, const arma::cx_mat& W) {
  const arma::uword s = dims.total_streams();
  require(B.n_rows == dims.bs_antennas && B.n_cols == s, "precoder must be N x S_total");
  require(is_block_diagonal(dims, W), "decoder must be block diagonal M_total x S_total");
  Decomposition dec{arma::cx_mat(B.n_rows, s), arma::vec(s), arma::cx_mat(W.n_rows, s),
                    arma::vec(s)};
  for (arma::uword l = 0; l < s; ++l) {
    const double bn = arma::norm(B.col(l));
    const double wn = arma::norm(W.col(l));
    if (bn == 0.0 || wn == 0.0) {
      throw ModelError("stream " + std::to_string(l) + " has a zero precoder or decoder");
    }
    dec.p(l) = bn * bn;
    dec.G.col(l) = B.col(l) / bn;
    dec.alpha(l) = wn * bn;
    dec.U.col(l) = W.col(l) / wn;
  }
  return dec;
}

DownlinkTransceiver recompose(const Decomposition& dec) {
  require(dec.p.min() > 0.0, "stream powers must be positive");
  const arma::vec root = arma::sqrt(dec.p);
  const arma::cx_mat B = dec.G * arma::diagmat(arma::conv_to<arma::cx_vec>::from(root));
  const arma::cx_mat W =
      dec.U * arma::diagmat(arma::conv_to<arma::cx_vec>::from(dec.alpha / root));
  return {B, W};
}

CouplingMatrices build_coupling(const ChannelSet& channel, const Decomposition& dec) {
  const arma::cx_mat& H = channel.stacked();
  require(dec.G.n_rows == H.n_rows && dec.U.n_rows == H.n_cols, "decomposition shape mismatch");
  const arma::cx_mat gain = dec.G.t() * H * dec.U;  // (l, j) -> g_l^H H u_j
  CouplingMatrices c;
  c.Phi = arma::square(arma::abs(gain));
  c.Phi.diag().zeros();
  c.D = arma::square(dec.alpha) % arma::square(arma::abs(gain.diag())) -
        2.0 * dec.alpha % arma::real(gain.diag()) + 1.0;
  c.varsigma = arma::square(arma::abs(dec.G));
  return c;
}

arma::vec noise_gains(const Decomposition& dec, const NoiseModel& noise) {
  return arma::real((dec.U.t() * noise.stacked() * dec.U).eval().diag());
}

arma::vec mse_from_powers(const arma::vec& p, const CouplingMatrices& coupling,
                          const Decomposition& dec, const NoiseModel& noise) {
  require(p.n_elem == coupling.D.n_elem, "power vector has wrong length");
  require(p.min() > 0.0, "stream powers must be positive");
  const arma::vec alpha2 = arma::square(dec.alpha);
  const arma::vec interference = coupling.Phi.t() * p;  // sum_j Phi(j, l) p_j
  return (coupling.D % p + alpha2 % interference + alpha2 % noise_gains(dec, noise)) / p;
}

}  // namespace dualwsr
