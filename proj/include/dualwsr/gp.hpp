// SPDX-License-Identifier: Apache-2.0
//
// Posynomial geometric programs solved in the log domain. With y = log x the
// objective and inequality posynomials become log-sum-exp of affine forms and
// monomial equalities become affine; the equalities are eliminated and the
// remaining convex problem is solved with a path-following barrier method.

#pragma once

#include <armadillo>

#include <cstddef>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace dualwsr {

struct Monomial {
  double coeff = 1.0;
  std::vector<std::pair<std::size_t, double>> exponents;  // (variable, power)

  double value(const arma::vec& x) const;
};

using Posynomial = std::vector<Monomial>;

double evaluate(const Posynomial& f, const arma::vec& x);

struct PosynomialInequality {
  Posynomial lhs;
  double bound = 1.0;
};

struct MonomialEquality {
  Monomial lhs;
  double bound = 1.0;
};

class GpProblem {
 public:
  std::size_t add_variable(std::string name);

  void set_objective(Posynomial objective) { objective_ = std::move(objective); }
  void add_inequality(Posynomial lhs, double bound);
  void add_equality(Monomial lhs, double bound);

  std::size_t num_variables() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const Posynomial& objective() const { return objective_; }
  const std::vector<PosynomialInequality>& inequalities() const { return inequalities_; }
  const std::vector<MonomialEquality>& equalities() const { return equalities_; }

  // Largest violation of posynomial <= bound, measured as log(lhs / bound).
  double max_log_violation(const arma::vec& x) const;

  // Throws std::invalid_argument on non-positive coefficients or bounds,
  // out-of-range variable indices, or an empty problem.
  void validate() const;

 private:
  std::vector<std::string> names_;
  Posynomial objective_;
  std::vector<PosynomialInequality> inequalities_;
  std::vector<MonomialEquality> equalities_;
};

enum class GpStatus { kConverged, kMaxIter, kInfeasible, kUnbounded };

const char* to_string(GpStatus status);

struct GpOptions {
  double tol = 1e-8;             // barrier gap m / t and KKT residual target
  int max_barrier_steps = 200;
  int max_newton_steps = 100;    // per centering
  double initial_weight = 1.0;
  double weight_growth = 10.0;
  double armijo_slope = 0.25;
  double backtrack = 0.5;
  double variable_floor = 1e-12; // x_v >= floor; 0 disables
};

struct GpSolution {
  arma::vec x;
  double objective_value = 0.0;
  double kkt_residual = 0.0;
  GpStatus status = GpStatus::kMaxIter;
  int barrier_steps = 0;
  int newton_steps = 0;
  // Multipliers of log(lhs / bound) <= 0 and log(floor / x_v) <= 0 in the
  // log-domain problem whose objective is log f_0; zero where a constraint
  // was dropped as constant.
  arma::vec inequality_multipliers;
  arma::vec floor_multipliers;
};

// `start`, when non-empty, is used as the initial point if it is strictly
// feasible; otherwise a phase-1 problem locates one.
GpSolution solve_gp(const GpProblem& problem, const GpOptions& opts = {},
                    const arma::vec& start = {});

// Plain-text dump: one term per line, coefficient followed by var:exponent.
void write_text(std::ostream& os, const GpProblem& problem);

}  // namespace dualwsr
