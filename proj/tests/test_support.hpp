// SPDX-License-Identifier: Apache-2.0
//
// Random instances and straight-from-the-formula reference computations used
// by the unit and acceptance tests. Nothing here calls into the library's
// numerics; only its data types are shared.

#pragma once

#include "dualwsr/model.hpp"

#include <armadillo>

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <vector>

namespace testing {

using cx = std::complex<double>;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double normal() { return normal_(gen_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen_); }

  cx cnormal() { return {normal() / std::sqrt(2.0), normal() / std::sqrt(2.0)}; }

  arma::cx_mat cmat(arma::uword rows, arma::uword cols) {
    arma::cx_mat m(rows, cols);
    for (auto& v : m) v = cnormal();
    return m;
  }

  arma::vec positive(arma::uword n, double lo, double hi) {
    arma::vec v(n);
    for (auto& x : v) x = uniform(lo, hi);
    return v;
  }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

// Random (K, N, M_k, S_k) with S_total <= N.
inline dualwsr::SystemDims random_dims(Rng& rng, int max_users = 3, int max_bs = 6) {
  dualwsr::SystemDims d;
  d.bs_antennas = static_cast<arma::uword>(rng.integer(1, max_bs));
  const int users = rng.integer(1, max_users);
  arma::uword left = d.bs_antennas;
  for (int k = 0; k < users && left > 0; ++k) {
    const auto m = static_cast<arma::uword>(rng.integer(1, 3));
    const auto s = static_cast<arma::uword>(rng.integer(1, static_cast<int>(std::min(m, left))));
    d.rx_antennas.push_back(m);
    d.streams.push_back(s);
    left -= s;
  }
  return d;
}

inline dualwsr::SystemDims reference_dims() { return dualwsr::SystemDims::uniform(2, 4, 2, 2); }

inline dualwsr::ChannelSet random_channel(Rng& rng, const dualwsr::SystemDims& d) {
  return dualwsr::ChannelSet(d, rng.cmat(d.bs_antennas, d.total_rx()));
}

// Hermitian positive definite blocks A A^H + c I.
inline dualwsr::NoiseModel random_noise(Rng& rng, const dualwsr::SystemDims& d, double scale = 1.0) {
  std::vector<arma::cx_mat> blocks;
  for (auto m : d.rx_antennas) {
    const arma::cx_mat a = rng.cmat(m, m);
    arma::cx_mat r = scale * (0.3 * a * a.t() + rng.uniform(0.2, 1.0) * arma::eye<arma::cx_mat>(m, m));
    r = 0.5 * (r + r.t());
    blocks.push_back(r);
  }
  return dualwsr::NoiseModel(d, blocks);
}

inline arma::cx_mat random_block_diagonal(Rng& rng, const dualwsr::SystemDims& d) {
  arma::cx_mat w(d.total_rx(), d.total_streams(), arma::fill::zeros);
  for (arma::uword k = 0; k < d.users(); ++k) {
    w.submat(d.rx_offset(k), d.stream_offset(k), d.rx_offset(k) + d.rx_antennas[k] - 1,
             d.stream_offset(k) + d.streams[k] - 1) = rng.cmat(d.rx_antennas[k], d.streams[k]);
  }
  return w;
}

inline arma::vec random_weights(Rng& rng, arma::uword s) { return rng.positive(s, 0.1, 0.9); }

// ---------------------------------------------------------------------------
// Reference formulas, written per symbol with explicit loops.

// Received signal of user k: y_k = H_k^H sum_j b_j s_j + n_k, estimate w_l^H y_k.
inline arma::vec ref_symbol_mse(const dualwsr::SystemDims& d, const arma::cx_mat& h,
                                const std::vector<arma::cx_mat>& noise, const arma::cx_mat& b,
                                const arma::cx_mat& w) {
  const arma::uword s_total = d.total_streams();
  arma::vec out(s_total);
  for (arma::uword l = 0; l < s_total; ++l) {
    const arma::uword k = d.user_of_stream(l);
    const arma::uword r0 = d.rx_offset(k), mk = d.rx_antennas[k];
    double mse = 0.0;
    for (arma::uword j = 0; j < s_total; ++j) {
      cx gain = 0.0;
      for (arma::uword m = 0; m < mk; ++m) {
        cx hb = 0.0;
        for (arma::uword n = 0; n < d.bs_antennas; ++n) hb += std::conj(h(n, r0 + m)) * b(n, j);
        gain += std::conj(w(r0 + m, l)) * hb;
      }
      if (j == l) gain -= 1.0;
      mse += std::norm(gain);
    }
    cx nq = 0.0;
    for (arma::uword a = 0; a < mk; ++a) {
      for (arma::uword c = 0; c < mk; ++c) nq += std::conj(w(r0 + a, l)) * noise[k](a, c) * w(r0 + c, l);
    }
    out(l) = mse + nq.real();
  }
  return out;
}

// W_k = (H_k^H B B^H H_k + R_k)^{-1} H_k^H B_k computed with a plain inverse.
inline arma::cx_mat ref_mmse_receiver(const dualwsr::SystemDims& d, const arma::cx_mat& h,
                                      const std::vector<arma::cx_mat>& noise, const arma::cx_mat& b) {
  arma::cx_mat w(d.total_rx(), d.total_streams(), arma::fill::zeros);
  for (arma::uword k = 0; k < d.users(); ++k) {
    const arma::cx_mat hk = h.cols(d.rx_offset(k), d.rx_offset(k) + d.rx_antennas[k] - 1);
    const arma::cx_mat cov = hk.t() * b * b.t() * hk + noise[k];
    const arma::cx_mat bk = b.cols(d.stream_offset(k), d.stream_offset(k) + d.streams[k] - 1);
    w.submat(d.rx_offset(k), d.stream_offset(k), d.rx_offset(k) + d.rx_antennas[k] - 1,
             d.stream_offset(k) + d.streams[k] - 1) = arma::inv(cov) * hk.t() * bk;
  }
  return w;
}

// Uplink: r = sum_l (H V)_l sqrt(zeta_l) x_l + z, z ~ CN(0, diag(psi)); the
// decoder t_l estimates sqrt(zeta_l) x_l with weight lambda_l.
inline double ref_uplink_weighted_mse(const arma::cx_mat& h, const arma::cx_mat& v,
                                      const arma::cx_mat& t, const arma::vec& zeta,
                                      const arma::vec& lambda, const arma::vec& psi) {
  const arma::cx_mat hv = h * v;
  double total = 0.0;
  for (arma::uword l = 0; l < t.n_cols; ++l) {
    double mse = zeta(l);
    for (arma::uword j = 0; j < t.n_cols; ++j) {
      const cx g = arma::cdot(t.col(l), hv.col(j));
      mse += zeta(j) * std::norm(g);
      if (j == l) mse -= 2.0 * zeta(l) * g.real();
    }
    for (arma::uword n = 0; n < psi.n_elem; ++n) mse += psi(n) * std::norm(t(n, l));
    total += lambda(l) * mse;
  }
  return total;
}

// T = (H V diag(zeta) V^H H^H + diag(psi))^{-1} H V diag(zeta) with a plain inverse.
inline arma::cx_mat ref_uplink_mmse(const arma::cx_mat& h, const arma::cx_mat& v,
                                    const arma::vec& zeta, const arma::vec& psi) {
  const arma::cx_mat hv = h * v;
  arma::cx_mat z(zeta.n_elem, zeta.n_elem, arma::fill::zeros);
  z.diag() = arma::conv_to<arma::cx_vec>::from(zeta);
  arma::cx_mat sigma = hv * z * hv.t();
  sigma.diag() += arma::conv_to<arma::cx_vec>::from(psi);
  return arma::inv(sigma) * hv * z;
}

inline double ref_tau_tilde(const dualwsr::SystemDims& d, const std::vector<arma::cx_mat>& noise,
                            const arma::cx_mat& w, const arma::vec& eta) {
  double total = 0.0;
  for (arma::uword l = 0; l < d.total_streams(); ++l) {
    const arma::uword k = d.user_of_stream(l), r0 = d.rx_offset(k);
    const arma::cx_vec wl = w.col(l).subvec(r0, r0 + d.rx_antennas[k] - 1);
    total += eta(l) * std::real(arma::cdot(wl, noise[k] * wl));
  }
  return total;
}

// f_n = (tau / p_n) psi_n |t_n|^2 / sum_i psi_i |t_i|^2 with T the uplink MMSE
// decoder for V = W, zeta = eta.
inline arma::vec ref_noise_map(const arma::cx_mat& h, const arma::cx_mat& w, const arma::vec& eta,
                               const arma::vec& p_check, double tau, const arma::vec& psi) {
  const arma::cx_mat t = ref_uplink_mmse(h, w, eta, psi);
  arma::vec q(psi.n_elem);
  for (arma::uword n = 0; n < psi.n_elem; ++n) q(n) = std::real(arma::cdot(t.row(n), t.row(n)));
  const double denom = arma::dot(psi, q);
  arma::vec f(psi.n_elem);
  for (arma::uword n = 0; n < psi.n_elem; ++n) f(n) = tau / p_check(n) * psi(n) * q(n) / denom;
  return f;
}

inline arma::vec ref_row_powers(const arma::cx_mat& b) {
  arma::vec p(b.n_rows);
  for (arma::uword n = 0; n < b.n_rows; ++n) {
    double s = 0.0;
    for (arma::uword j = 0; j < b.n_cols; ++j) s += std::norm(b(n, j));
    p(n) = s;
  }
  return p;
}

// min over tau > 0 of theta nu^gamma / tau + tau^mu xi, from the stationary
// point tau^(mu + 1) = theta nu^gamma / (mu xi).
inline double ref_tau_eliminated(double omega, double nu, double xi) {
  const double gamma = 1.0 / (1.0 - omega);
  const double mu = 1.0 / omega - 1.0;
  const double theta = omega * std::pow(mu, 1.0 - omega);
  const double a = theta * std::pow(nu, gamma);
  const double tau = std::pow(a / (mu * xi), 1.0 / (mu + 1.0));
  return a / tau + std::pow(tau, mu) * xi;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

inline double max_rel_err(const arma::vec& a, const arma::vec& b) {
  double worst = 0.0;
  for (arma::uword i = 0; i < a.n_elem; ++i) worst = std::max(worst, rel_err(a(i), b(i)));
  return worst;
}

}  // namespace testing
