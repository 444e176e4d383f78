// SPDX-License-Identifier: Apache-2.0

#include "dualwsr/duality.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace dualwsr {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ModelError(what);
}

arma::cx_mat uplink_covariance(const arma::cx_mat& hv, const arma::vec& zeta,
                               const arma::vec& psi) {
  arma::cx_mat sigma = hv * arma::diagmat(arma::conv_to<arma::cx_vec>::from(zeta)) * hv.t();
  sigma = 0.5 * (sigma + sigma.t());
  sigma.diag() += arma::conv_to<arma::cx_vec>::from(psi);
  return sigma;
}

// Domain [eps, tau / p_n] of the power-balancing map. F_n never exceeds
// tau / p_n, so the upper end only catches overshooting Newton steps.
struct PsiBox {
  arma::vec lo, hi;

  PsiBox(double tau, const arma::vec& p_check) {
    lo.set_size(p_check.n_elem);
    lo.fill(psi_floor(tau, p_check));
    hi = tau / p_check;
  }

  arma::vec clamp(arma::vec psi) const {
    for (arma::uword n = 0; n < psi.n_elem; ++n) psi(n) = std::clamp(psi(n), lo(n), hi(n));
    return psi;
  }
};

class NoiseMap {
 public:
  struct Eval {
    arma::vec f;
    arma::vec q;            // |t_n|^2
    double weighted = 0.0;  // sum_n psi_n |t_n|^2
    arma::cx_mat sigma_inv;
    arma::cx_mat T;
  };

  NoiseMap(const ChannelSet& channel, const arma::cx_mat& W, const arma::vec& eta,
           const arma::vec& p_check, double tau)
      : hv_(channel.stacked() * W),
        eta_(eta),
        rhs_(hv_ * arma::diagmat(arma::conv_to<arma::cx_vec>::from(eta))),
        p_check_(p_check),
        tau_(tau) {}

  Eval operator()(const arma::vec& psi) const {
    Eval e;
    if (!arma::inv_sympd(e.sigma_inv, uplink_covariance(hv_, eta_, psi))) {
      throw ModelError("uplink covariance is singular");
    }
    e.T = e.sigma_inv * rhs_;
    e.q = arma::sum(arma::square(arma::abs(e.T)), 1);
    e.weighted = arma::dot(psi, e.q);
    if (!(e.weighted > 0.0)) throw ModelError("uplink decoder vanished");
    e.f = (tau_ / e.weighted) * (psi % e.q / p_check_);
    return e;
  }

  // d log(F_n / psi_n) / d log psi_m.
  arma::mat log_jacobian(const arma::vec& psi, const Eval& e) const {
    const arma::uword n_ant = psi.n_elem;
    const arma::cx_mat gram = e.T * e.T.t();
    arma::mat dq(n_ant, n_ant);  // d q_n / d psi_m
    for (arma::uword m = 0; m < n_ant; ++m) {
      for (arma::uword n = 0; n < n_ant; ++n) {
        dq(n, m) = -2.0 * std::real(e.sigma_inv(n, m) * gram(m, n));
      }
    }
    arma::mat jac(n_ant, n_ant);
    for (arma::uword m = 0; m < n_ant; ++m) {
      const double ds = e.q(m) + arma::dot(psi, dq.col(m));
      for (arma::uword n = 0; n < n_ant; ++n) {
        jac(n, m) = psi(m) * (dq(n, m) / e.q(n) - ds / e.weighted);
      }
    }
    return jac;
  }

 private:
  arma::cx_mat hv_;
  arma::vec eta_;
  arma::cx_mat rhs_;
  arma::vec p_check_;
  double tau_;
};

double relative_residual(const arma::vec& psi, const arma::vec& f) {
  return arma::norm(psi - f) / arma::norm(psi);
}

// max_n |log f_n - log psi_n|; bounds the relative error of every antenna.
double log_residual(const arma::vec& psi, const arma::vec& f) {
  return arma::abs(arma::log(f) - arma::log(psi)).max();
}

}  // namespace

double weighted_sum_mse_ul(const ChannelSet& channel, const UplinkTransceiver& ul,
                           const arma::vec& psi) {
  const arma::cx_mat& H = channel.stacked();
  const arma::uword s = ul.V.n_cols;
  require(ul.V.n_rows == H.n_cols && ul.T.n_rows == H.n_rows && ul.T.n_cols == s,
          "uplink transceiver shape mismatch");
  require(ul.zeta.n_elem == s && ul.lambda.n_elem == s, "uplink weights have wrong length");
  require(psi.n_elem == H.n_rows, "psi has wrong length");
  const arma::cx_mat hv = H * ul.V;
  const arma::cx_mat sigma = uplink_covariance(hv, ul.zeta, psi);
  const arma::mat inner = arma::real(ul.T.t() * sigma * ul.T) -
                          2.0 * arma::diagmat(ul.zeta) * arma::real(ul.T.t() * hv) +
                          arma::diagmat(ul.zeta);
  return arma::trace(arma::diagmat(ul.lambda) * inner);
}

double tau_tilde(const SystemDims& dims, const NoiseModel& noise, const arma::cx_mat& W,
                 const arma::vec& eta) {
  require(is_block_diagonal(dims, W), "decoder must be block diagonal");
  require(eta.n_elem == W.n_cols, "eta has wrong length");
  double total = 0.0;
  for (arma::uword k = 0; k < dims.users(); ++k) {
    const arma::uword r0 = dims.rx_offset(k), c0 = dims.stream_offset(k);
    const arma::cx_mat wk =
        W.submat(r0, c0, r0 + dims.rx_antennas[k] - 1, c0 + dims.streams[k] - 1);
    const arma::vec ek = eta.subvec(c0, c0 + dims.streams[k] - 1);
    total += arma::trace(arma::diagmat(ek) * arma::real(wk.t() * noise.user(k) * wk));
  }
  return total;
}

UplinkTransceiver dl_to_ul_transfer(const arma::cx_mat& B, const arma::cx_mat& W,
                                    const arma::vec& eta) {
  require(B.n_cols == W.n_cols && eta.n_elem == B.n_cols, "transceiver shape mismatch");
  return {W, B, eta, arma::ones(eta.n_elem)};
}

arma::cx_mat uplink_mmse_receiver(const ChannelSet& channel, const arma::cx_mat& V,
                                  const arma::vec& zeta, const arma::vec& psi) {
  const arma::cx_mat& H = channel.stacked();
  require(V.n_rows == H.n_cols && zeta.n_elem == V.n_cols, "uplink precoder shape mismatch");
  require(psi.n_elem == H.n_rows, "psi has wrong length");
  require(psi.min() > 0.0, "uplink noise must be positive");
  const arma::cx_mat hv = H * V;
  arma::cx_mat t;
  const arma::cx_mat rhs = hv * arma::diagmat(arma::conv_to<arma::cx_vec>::from(zeta));
  if (!arma::solve(t, uplink_covariance(hv, zeta, psi), rhs,
                   arma::solve_opts::likely_sympd + arma::solve_opts::no_approx)) {
    throw ModelError("uplink covariance is singular");
  }
  return t;
}

double psi_floor(double tau, const arma::vec& p_check) {
  return std::min(1e-6, arma::min(tau / p_check));
}

arma::vec uplink_noise_map(const ChannelSet& channel, const arma::cx_mat& W,
                           const arma::vec& eta, const arma::vec& p_check, double tau,
                           const arma::vec& psi) {
  require(psi.n_elem == channel.dims().bs_antennas && p_check.n_elem == psi.n_elem,
          "psi / power cap length mismatch");
  require(psi.min() > 0.0, "uplink noise must be positive");
  return NoiseMap(channel, W, eta, p_check, tau)(psi).f;
}

FixedPointResult psi_fixed_point(const ChannelSet& channel, const arma::cx_mat& W,
                                 const arma::vec& eta, const arma::vec& p_check, double tau,
                                 const FixedPointOptions& opts) {
  const arma::uword n_ant = channel.dims().bs_antennas;
  require(p_check.n_elem == n_ant && p_check.min() > 0.0, "power caps must be positive");
  require(tau > 0.0, "fixed point needs a positive noise budget");
  require(eta.n_elem == W.n_cols && W.n_rows == channel.dims().total_rx(),
          "decoder shape mismatch");

  const NoiseMap map(channel, W, eta, p_check, tau);
  const PsiBox box(tau, p_check);

  arma::vec psi = box.clamp(arma::vec(n_ant, arma::fill::value(tau / arma::accu(p_check))));
  NoiseMap::Eval e = map(psi);
  double residual = log_residual(psi, box.clamp(e.f));
  int it = 0;
  for (; it < opts.max_iters && residual > opts.tol; ++it) {
    if (opts.method == FixedPointMethod::kNewton) {
      // Newton on log F - log psi over the antennas not pinned to the box.
      std::vector<arma::uword> free;
      for (arma::uword n = 0; n < n_ant; ++n) {
        if (psi(n) > box.lo(n) || e.f(n) > psi(n)) free.push_back(n);
      }
      if (!free.empty()) {
        const arma::uvec idx(free);
        const arma::vec x = arma::log(psi);
        const arma::vec g = arma::log(e.f(idx)) - x(idx);
        const arma::mat jac = map.log_jacobian(psi, e);
        arma::vec step;
        if (arma::solve(step, arma::mat(jac.submat(idx, idx)), -g, arma::solve_opts::no_approx) &&
            step.is_finite()) {
          bool accepted = false;
          double t = 1.0;
          for (int ls = 0; ls < 30; ++ls, t *= 0.5) {
            arma::vec xt = x;
            xt(idx) += t * step;
            const arma::vec trial = box.clamp(arma::exp(xt));
            NoiseMap::Eval et;
            try {
              et = map(trial);
            } catch (const ModelError&) {
              continue;
            }
            const double rt = log_residual(trial, box.clamp(et.f));
            if (rt < (1.0 - 1e-4 * t) * residual) {
              psi = trial;
              e = std::move(et);
              residual = rt;
              accepted = true;
              break;
            }
          }
          if (accepted) continue;
        }
      }
    }
    psi = box.clamp(e.f);
    e = map(psi);
    residual = log_residual(psi, box.clamp(e.f));
  }

  if (residual > opts.tol) {
    throw FixedPointError("uplink noise fixed point did not converge (residual " +
                              std::to_string(residual) + ")",
                          residual, it);
  }
  psi = box.clamp(e.f);
  e = map(psi);
  FixedPointResult out{psi, relative_residual(psi, box.clamp(e.f)), it, 0};
  for (arma::uword n = 0; n < n_ant; ++n) {
    if (psi(n) <= box.lo(n) && e.f(n) < psi(n)) ++out.floor_active;
  }
  return out;
}

DownlinkTransceiver ul_to_dl_transfer(const arma::cx_mat& T, const arma::cx_mat& V,
                                      const arma::vec& psi, double tau) {
  require(psi.n_elem == T.n_rows && V.n_cols == T.n_cols, "uplink shape mismatch");
  require(tau > 0.0, "transfer needs a positive noise budget");
  const double denom = arma::dot(psi, antenna_powers(T));
  require(denom > 0.0, "uplink decoder is zero; transfer undefined");
  const double beta = std::sqrt(tau / denom);
  return {beta * T, V / beta};
}

}  // namespace dualwsr
