// SPDX-License-Identifier: Apache-2.0

#include "dualwsr/gp.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace dualwsr {

double Monomial::value(const arma::vec& x) const {
  double v = coeff;
  for (const auto& [var, power] : exponents) v *= std::pow(x(var), power);
  return v;
}

double evaluate(const Posynomial& f, const arma::vec& x) {
  double total = 0.0;
  for (const auto& term : f) total += term.value(x);
  return total;
}

std::size_t GpProblem::add_variable(std::string name) {
  names_.push_back(std::move(name));
  return names_.size() - 1;
}

void GpProblem::add_inequality(Posynomial lhs, double bound) {
  inequalities_.push_back({std::move(lhs), bound});
}

void GpProblem::add_equality(Monomial lhs, double bound) {
  equalities_.push_back({std::move(lhs), bound});
}

double GpProblem::max_log_violation(const arma::vec& x) const {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& c : inequalities_) worst = std::max(worst, std::log(evaluate(c.lhs, x) / c.bound));
  return worst;
}

void GpProblem::validate() const {
  if (names_.empty()) throw std::invalid_argument("GP has no variables");
  if (objective_.empty()) throw std::invalid_argument("GP has no objective terms");
  auto check = [this](const Monomial& m) {
    if (!(m.coeff > 0.0) || !std::isfinite(m.coeff)) {
      throw std::invalid_argument("GP coefficients must be positive and finite");
    }
    for (const auto& [var, power] : m.exponents) {
      if (var >= names_.size()) throw std::invalid_argument("GP term references unknown variable");
      if (!std::isfinite(power)) throw std::invalid_argument("GP exponent is not finite");
    }
  };
  for (const auto& t : objective_) check(t);
  for (const auto& c : inequalities_) {
    if (c.lhs.empty()) throw std::invalid_argument("GP inequality has no terms");
    if (!(c.bound > 0.0)) throw std::invalid_argument("GP inequality bound must be positive");
    for (const auto& t : c.lhs) check(t);
  }
  for (const auto& e : equalities_) {
    if (!(e.bound > 0.0)) throw std::invalid_argument("GP equality bound must be positive");
    check(e.lhs);
  }
}

const char* to_string(GpStatus status) {
  switch (status) {
    case GpStatus::kConverged: return "converged";
    case GpStatus::kMaxIter: return "max_iter";
    case GpStatus::kInfeasible: return "infeasible";
    case GpStatus::kUnbounded: return "unbounded";
  }
  return "unknown";
}

namespace {

// log sum_j exp(a_j^T w + b_j).
struct LogSumExp {
  arma::mat A;
  arma::vec b;

  double value(const arma::vec& w) const {
    const arma::vec s = A * w + b;
    const double top = s.max();
    return top + std::log(arma::accu(arma::exp(s - top)));
  }

  double eval(const arma::vec& w, arma::vec& grad, arma::mat& hess) const {
    const arma::vec s = A * w + b;
    const double top = s.max();
    const arma::vec e = arma::exp(s - top);
    const double total = arma::accu(e);
    const arma::vec pi = e / total;
    grad = A.t() * pi;
    hess = A.t() * arma::diagmat(pi) * A - grad * grad.t();
    return top + std::log(total);
  }

  // Appends a trailing coordinate with coefficient `extra` in every term.
  LogSumExp extended(double extra) const {
    LogSumExp out{arma::join_rows(A, arma::vec(A.n_rows, arma::fill::value(extra))), b};
    return out;
  }
};

struct BarrierProblem {
  LogSumExp objective;
  std::vector<LogSumExp> constraints;  // feasible where every value < 0
};

struct BarrierOutcome {
  arma::vec w;
  double t = 0.0;
  GpStatus status = GpStatus::kMaxIter;
  int barrier_steps = 0;
  int newton_steps = 0;
  bool stopped_early = false;
};

// Every constraint row stacked into one matrix so a barrier evaluation is a
// single product.
struct StackedConstraints {
  arma::mat A;
  arma::vec b;
  std::vector<arma::uword> begin, end;

  StackedConstraints(const std::vector<LogSumExp>& cs, arma::uword cols) {
    arma::uword rows = 0;
    for (const auto& c : cs) {
      begin.push_back(rows);
      rows += c.A.n_rows;
      end.push_back(rows - 1);
    }
    A.set_size(rows, cols);
    b.set_size(rows);
    for (std::size_t i = 0; i < cs.size(); ++i) {
      A.rows(begin[i], end[i]) = cs[i].A;
      b.subvec(begin[i], end[i]) = cs[i].b;
    }
  }

  std::size_t size() const { return begin.size(); }

  // Constraint values; false as soon as one is not strictly negative.
  bool values(const arma::vec& w, arma::vec& f) const {
    f.set_size(size());
    if (size() == 0) return true;
    const arma::vec s = A * w + b;
    for (std::size_t i = 0; i < size(); ++i) {
      const auto seg = s.subvec(begin[i], end[i]);
      const double top = seg.max();
      f(i) = top + std::log(arma::accu(arma::exp(seg - top)));
      if (!(f(i) < 0.0)) return false;
    }
    return true;
  }
};

class BarrierSolver {
 public:
  using Predicate = std::function<bool(const arma::vec&)>;

  BarrierSolver(const BarrierProblem& problem, const GpOptions& opts,
                std::function<bool(const arma::vec&)> diverged)
      : p_(problem), stacked_(problem.constraints, problem.objective.A.n_cols), opts_(opts), diverged_(std::move(diverged)) {}

  BarrierOutcome run(arma::vec w, const Predicate& early_stop = {}) const {
    BarrierOutcome out;
    const double m = static_cast<double>(p_.constraints.size());
    double t = opts_.initial_weight;
    for (int step = 0; step < opts_.max_barrier_steps; ++step) {
      out.barrier_steps = step + 1;
      const CenterResult c = center(w, t, early_stop);
      out.newton_steps += c.steps;
      if (c.diverged) {
        out.status = GpStatus::kUnbounded;
        break;
      }
      if (c.stopped) {
        out.stopped_early = true;
        out.status = GpStatus::kConverged;
        break;
      }
      if (m == 0.0 || m / t <= opts_.tol) {
        out.status = GpStatus::kConverged;
        break;
      }
      t *= opts_.weight_growth;
    }
    out.w = std::move(w);
    out.t = t;
    return out;
  }

  bool strictly_feasible(const arma::vec& w) const {
    arma::vec f;
    return stacked_.values(w, f);
  }

 private:
  struct CenterResult {
    int steps = 0;
    bool stopped = false;
    bool diverged = false;
  };

  double phi(const arma::vec& w, double t) const {
    arma::vec f;
    if (!stacked_.values(w, f)) return std::numeric_limits<double>::infinity();
    return t * p_.objective.value(w) - arma::accu(arma::log(-f));
  }

  double derivatives(const arma::vec& w, double t, arma::vec& grad, arma::mat& hess) const {
    arma::vec g;
    arma::mat h;
    double value = t * p_.objective.eval(w, g, h);
    grad = t * g;
    hess = t * h;
    const arma::vec s = stacked_.A * w + stacked_.b;
    for (std::size_t i = 0; i < stacked_.size(); ++i) {
      const auto a = stacked_.A.rows(stacked_.begin[i], stacked_.end[i]);
      const arma::vec seg = s.subvec(stacked_.begin[i], stacked_.end[i]);
      const double top = seg.max();
      const arma::vec e = arma::exp(seg - top);
      const double total = arma::accu(e);
      const double f = top + std::log(total);
      const arma::vec pi = e / total;
      g = a.t() * pi;
      value -= std::log(-f);
      grad += g / (-f);
      hess += (a.t() * arma::diagmat(pi) * a - g * g.t()) / (-f) + (g * g.t()) / (f * f);
    }
    return value;
  }

  CenterResult center(arma::vec& w, double t, const Predicate& early_stop) const {
    CenterResult r;
    arma::vec grad, step;
    arma::mat hess;
    for (; r.steps < opts_.max_newton_steps; ++r.steps) {
      const double value = derivatives(w, t, grad, hess);
      step = newton_direction(hess, grad);
      double slope = arma::dot(grad, step);
      if (!(slope < 0.0) || !std::isfinite(slope)) {
        step = -grad;
        slope = -arma::dot(grad, grad);
      }
      // Half the squared Newton decrement.
      if (-0.5 * slope <= 1e-12) break;
      double s = 1.0;
      bool moved = false;
      for (int k = 0; k < 80; ++k, s *= opts_.backtrack) {
        const arma::vec trial = w + s * step;
        if (phi(trial, t) <= value + opts_.armijo_slope * s * slope) {
          w = trial;
          moved = true;
          break;
        }
      }
      if (!moved) break;
      if (diverged_ && diverged_(w)) {
        r.diverged = true;
        break;
      }
      if (early_stop && early_stop(w)) {
        r.stopped = true;
        ++r.steps;
        break;
      }
    }
    return r;
  }

  // Symmetric diagonal scaling first; the t-weighted objective Hessian is
  // otherwise too ill-conditioned for large t.
  static arma::vec newton_direction(const arma::mat& hess, const arma::vec& grad) {
    arma::vec d = arma::sqrt(arma::abs(hess.diag()));
    d.elem(arma::find(d == 0.0)).ones();
    arma::mat scaled = 0.5 * (hess + hess.t());
    scaled.each_col() /= d;
    scaled.each_row() /= d.t();
    const arma::vec rhs = -grad / d;
    arma::vec y;
    double shift = 0.0;
    for (int k = 0; k < 12; ++k) {
      arma::mat reg = scaled;
      reg.diag() += shift;
      if (arma::solve(y, reg, rhs, arma::solve_opts::likely_sympd + arma::solve_opts::no_approx) &&
          y.is_finite()) {
        return y / d;
      }
      shift = shift == 0.0 ? 1e-14 : 10.0 * shift;
    }
    return -grad;
  }

  const BarrierProblem& p_;
  StackedConstraints stacked_;
  const GpOptions& opts_;
  std::function<bool(const arma::vec&)> diverged_;
};

// KKT quantities at (w, lambda): stationarity of the Lagrangian and
// centrality lambda_i f_i = -1 / t.
struct KktState {
  arma::vec r_dual;
  arma::vec r_cent;
  arma::vec f;
  arma::mat jac;  // constraint gradients as rows
  arma::mat hess_lagrangian;

  double norm() const {
    return std::sqrt(arma::dot(r_dual, r_dual) + arma::dot(r_cent, r_cent));
  }
};

KktState kkt_state(const BarrierProblem& p, const arma::vec& w, const arma::vec& lambda, double t) {
  KktState s;
  arma::vec g;
  arma::mat h;
  p.objective.eval(w, g, h);
  s.r_dual = g;
  s.hess_lagrangian = h;
  const arma::uword m = p.constraints.size();
  s.f.set_size(m);
  s.jac.set_size(m, w.n_elem);
  for (arma::uword i = 0; i < m; ++i) {
    s.f(i) = p.constraints[i].eval(w, g, h);
    s.jac.row(i) = g.t();
    s.r_dual += lambda(i) * g;
    s.hess_lagrangian += lambda(i) * h;
  }
  s.r_cent = -lambda % s.f - 1.0 / t;
  return s;
}

// Primal-dual Newton on the perturbed KKT system at fixed t, solved unreduced
// so the multipliers never pass through 1 / f_i. Starts from the barrier
// multipliers lambda_i = -1 / (t f_i).
arma::vec refine_multipliers(const BarrierProblem& p, arma::vec& w, double t) {
  const arma::uword n = w.n_elem, m = p.constraints.size();
  arma::vec lambda(m);
  for (arma::uword i = 0; i < m; ++i) lambda(i) = -1.0 / (t * p.constraints[i].value(w));
  if (m == 0) return lambda;

  KktState s = kkt_state(p, w, lambda, t);
  for (int it = 0; it < 30; ++it) {
    const double r0 = s.norm();
    arma::mat kkt(n + m, n + m, arma::fill::zeros);
    kkt.submat(0, 0, n - 1, n - 1) = s.hess_lagrangian;
    kkt.submat(0, n, n - 1, n + m - 1) = s.jac.t();
    kkt.submat(n, 0, n + m - 1, n - 1) = -arma::diagmat(lambda) * s.jac;
    kkt.submat(n, n, n + m - 1, n + m - 1) = -arma::diagmat(s.f);
    arma::vec delta;
    if (!arma::solve(delta, kkt, -arma::join_cols(s.r_dual, s.r_cent), arma::solve_opts::no_approx) ||
        !delta.is_finite()) {
      break;
    }
    const arma::vec dw = delta.head(n), dl = delta.tail(m);
    double smax = 1.0;
    for (arma::uword i = 0; i < m; ++i) {
      if (dl(i) < 0.0) smax = std::min(smax, -0.99 * lambda(i) / dl(i));
    }
    bool moved = false;
    for (double step = smax; step > 1e-10; step *= 0.5) {
      const arma::vec wt = w + step * dw;
      const arma::vec lt = lambda + step * dl;
      KktState st = kkt_state(p, wt, lt, t);
      if (st.f.max() < 0.0 && st.norm() <= (1.0 - 0.01 * step) * r0) {
        w = wt;
        lambda = lt;
        s = std::move(st);
        moved = true;
        break;
      }
    }
    if (!moved || s.norm() <= 1e-15) break;
  }
  return lambda;
}

// Affine parametrization y = y0 + Z z of the monomial equalities in log space.
struct EqualityElimination {
  arma::vec y0;
  arma::mat Z;
  bool consistent = true;
};

EqualityElimination eliminate_equalities(const GpProblem& problem) {
  const arma::uword n = problem.num_variables();
  const auto& eqs = problem.equalities();
  arma::mat a(eqs.size(), n, arma::fill::zeros);
  arma::vec r(eqs.size());
  for (arma::uword e = 0; e < eqs.size(); ++e) {
    for (const auto& [var, power] : eqs[e].lhs.exponents) a(e, var) += power;
    r(e) = std::log(eqs[e].bound / eqs[e].lhs.coeff);
  }

  // Reduced row echelon form; among equal magnitudes the last column is the
  // pivot so e.g. prod(nu) = 1 eliminates the final nu.
  std::vector<arma::uword> pivots;
  arma::uword row = 0;
  const double tiny = 1e-12;
  for (arma::uword col_rev = 0; col_rev < n && row < a.n_rows; ++col_rev) {
    const arma::uword col = n - 1 - col_rev;
    arma::uword best = row;
    for (arma::uword i = row; i < a.n_rows; ++i) {
      if (std::abs(a(i, col)) > std::abs(a(best, col))) best = i;
    }
    if (std::abs(a(best, col)) <= tiny) continue;
    a.swap_rows(row, best);
    std::swap(r(row), r(best));
    const double piv = a(row, col);
    a.row(row) /= piv;
    r(row) /= piv;
    for (arma::uword i = 0; i < a.n_rows; ++i) {
      if (i == row || a(i, col) == 0.0) continue;
      const double factor = a(i, col);
      a.row(i) -= factor * a.row(row);
      r(i) -= factor * r(row);
    }
    pivots.push_back(col);
    ++row;
  }

  EqualityElimination out;
  for (arma::uword i = row; i < a.n_rows; ++i) {
    if (std::abs(r(i)) > 1e-9) out.consistent = false;
  }
  std::vector<bool> is_pivot(n, false);
  for (auto c : pivots) is_pivot[c] = true;
  std::vector<arma::uword> free;
  for (arma::uword c = 0; c < n; ++c) {
    if (!is_pivot[c]) free.push_back(c);
  }
  out.y0.zeros(n);
  out.Z.zeros(n, free.size());
  for (arma::uword j = 0; j < free.size(); ++j) out.Z(free[j], j) = 1.0;
  for (arma::uword i = 0; i < pivots.size(); ++i) {
    out.y0(pivots[i]) = r(i);
    for (arma::uword j = 0; j < free.size(); ++j) out.Z(pivots[i], j) = -a(i, free[j]);
  }
  return out;
}

LogSumExp to_log_domain(const Posynomial& f, double bound, const EqualityElimination& elim) {
  const arma::uword n = elim.Z.n_rows;
  arma::mat a(f.size(), n, arma::fill::zeros);
  arma::vec b(f.size());
  for (arma::uword j = 0; j < f.size(); ++j) {
    for (const auto& [var, power] : f[j].exponents) a(j, var) += power;
    b(j) = std::log(f[j].coeff / bound);
  }
  return {a * elim.Z, b + a * elim.y0};
}

}  // namespace

GpSolution solve_gp(const GpProblem& problem, const GpOptions& opts, const arma::vec& start) {
  problem.validate();
  const arma::uword n = problem.num_variables();
  GpSolution sol;

  const EqualityElimination elim = eliminate_equalities(problem);
  if (!elim.consistent) {
    sol.status = GpStatus::kInfeasible;
    sol.x = arma::exp(elim.y0);
    return sol;
  }
  const arma::uword nz = elim.Z.n_cols;

  BarrierProblem bp;
  bp.objective = to_log_domain(problem.objective(), 1.0, elim);
  // origin[i] < m_ineq is an inequality index, otherwise a floored variable.
  const arma::uword m_ineq = problem.inequalities().size();
  std::vector<arma::uword> origin;
  auto add_constraint = [&](LogSumExp c, arma::uword tag) -> bool {
    if (arma::all(arma::vectorise(c.A) == 0.0)) return c.value(arma::zeros(nz)) < 0.0;
    bp.constraints.push_back(std::move(c));
    origin.push_back(tag);
    return true;
  };
  bool consistent = true;
  for (arma::uword i = 0; i < m_ineq; ++i) {
    const auto& c = problem.inequalities()[i];
    consistent = add_constraint(to_log_domain(c.lhs, c.bound, elim), i) && consistent;
  }
  if (opts.variable_floor > 0.0) {
    for (arma::uword v = 0; v < n; ++v) {
      Monomial floor_term{opts.variable_floor, {{v, -1.0}}};
      consistent = add_constraint(to_log_domain({floor_term}, 1.0, elim), m_ineq + v) && consistent;
    }
  }
  sol.inequality_multipliers.zeros(m_ineq);
  sol.floor_multipliers.zeros(n);
  if (!consistent) {
    sol.status = GpStatus::kInfeasible;
    sol.x = arma::exp(elim.y0);
    return sol;
  }

  auto to_x = [&elim](const arma::vec& z) -> arma::vec { return arma::exp(elim.y0 + elim.Z * z); };
  auto diverged = [&elim](const arma::vec& z) {
    return arma::abs(elim.y0 + elim.Z * z).max() > 700.0;
  };

  if (nz == 0) {
    sol.x = to_x(arma::zeros(0));
    sol.objective_value = evaluate(problem.objective(), sol.x);
    sol.status = GpStatus::kConverged;
    return sol;
  }

  arma::vec z(nz, arma::fill::zeros);
  if (start.n_elem == n && start.min() > 0.0) {
    // Least-squares projection of the start onto the equality set.
    z = arma::solve(elim.Z.t() * elim.Z, elim.Z.t() * (arma::log(start) - elim.y0));
  }

  const BarrierSolver solver(bp, opts, diverged);
  if (!solver.strictly_feasible(z)) {
    // Phase 1: minimize s subject to f_i(z) <= s and s >= -1.
    BarrierProblem phase1;
    LogSumExp obj{arma::zeros(1, nz + 1), arma::zeros(1)};
    obj.A(0, nz) = 1.0;
    phase1.objective = obj;
    double s0 = 0.0;
    for (const auto& c : bp.constraints) {
      phase1.constraints.push_back(c.extended(-1.0));
      s0 = std::max(s0, c.value(z));
    }
    LogSumExp lower{arma::zeros(1, nz + 1), arma::vec{-1.0}};
    lower.A(0, nz) = -1.0;
    phase1.constraints.push_back(lower);
    // A box around the start keeps the phase-1 barrier bounded below.
    constexpr double kBox = 50.0;
    for (arma::uword j = 0; j < nz; ++j) {
      for (const double sign : {1.0, -1.0}) {
        LogSumExp side{arma::zeros(1, nz + 1), arma::vec{-sign * z(j) - kBox}};
        side.A(0, j) = sign;
        phase1.constraints.push_back(side);
      }
    }
    GpOptions p1_opts = opts;
    p1_opts.variable_floor = 0.0;
    const BarrierSolver p1(phase1, p1_opts, {});
    const BarrierOutcome r = p1.run(arma::join_cols(z, arma::vec{s0 + 1.0}),
                                    [](const arma::vec& w) { return w(w.n_elem - 1) < -1e-3; });
    sol.barrier_steps += r.barrier_steps;
    sol.newton_steps += r.newton_steps;
    z = r.w.head(nz);
    if (!solver.strictly_feasible(z)) {
      sol.status = GpStatus::kInfeasible;
      sol.x = to_x(z);
      return sol;
    }
  }

  BarrierOutcome r = solver.run(z);
  sol.barrier_steps += r.barrier_steps;
  sol.newton_steps += r.newton_steps;
  sol.status = r.status;
  z = r.w;

  if (r.status == GpStatus::kConverged) {
    const arma::vec lambda = refine_multipliers(bp, z, r.t);
    for (arma::uword i = 0; i < lambda.n_elem; ++i) {
      if (origin[i] < m_ineq) {
        sol.inequality_multipliers(origin[i]) = lambda(i);
      } else {
        sol.floor_multipliers(origin[i] - m_ineq) = lambda(i);
      }
    }
    const KktState s = kkt_state(bp, z, lambda, r.t);
    const double complementarity = bp.constraints.empty() ? 0.0 : arma::abs(lambda % s.f).max();
    sol.kkt_residual = std::max(arma::norm(s.r_dual, "inf"), complementarity);
  } else {
    sol.kkt_residual = std::numeric_limits<double>::infinity();
  }
  sol.x = to_x(z);
  sol.objective_value = evaluate(problem.objective(), sol.x);
  return sol;
}

void write_text(std::ostream& os, const GpProblem& problem) {
  auto term = [&os, &problem](const Monomial& m) {
    os << m.coeff;
    for (const auto& [var, power] : m.exponents) os << ' ' << problem.names()[var] << ':' << power;
    os << '\n';
  };
  os.precision(17);
  os << "variables " << problem.num_variables() << '\n';
  for (const auto& name : problem.names()) os << name << '\n';
  os << "objective " << problem.objective().size() << '\n';
  for (const auto& t : problem.objective()) term(t);
  for (const auto& c : problem.inequalities()) {
    os << "inequality " << c.lhs.size() << " <= " << c.bound << '\n';
    for (const auto& t : c.lhs) term(t);
  }
  for (const auto& e : problem.equalities()) {
    os << "equality 1 = " << e.bound << '\n';
    term(e.lhs);
  }
}

}  // namespace dualwsr
