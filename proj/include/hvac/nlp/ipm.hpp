#pragma once

#include <string>
#include <vector>

#include "hvac/nlp/problem.hpp"

namespace hvac::nlp {

/// Primal-dual interior-point method with a filter line search.
///
/// Inequality rows get slack variables, bound multipliers are eliminated and
/// the slack block is condensed, so each iteration factors one symmetric
/// quasi-definite system [W + Sigma + J_I' D J_I, J_E'; J_E, -dc I] with a
/// sparse LDL' factorization. Inertia is corrected by a diagonal shift of the
/// Hessian block.
struct IpmOptions {
  double tol = 1e-6;              ///< scaled overall KKT error
  double constr_viol_tol = 1e-9;  ///< unscaled constraint violation
  double compl_inf_tol = 1e-4;    ///< unscaled complementarity
  int max_iter = 500;
  double mu_init = 0.1;
  double bound_push = 1e-2;
  double bound_frac = 1e-2;
  double bound_relax = 1e-10;   ///< relative relaxation of every finite bound
  double kappa_eps = 10.0;
  double kappa_mu = 0.2;
  double theta_mu = 1.5;
  double tau_min = 0.99;
  double kappa_sigma = 1e10;
  double s_max = 100.0;
  double delta_c = 1e-9;        ///< fixed dual regularization of equality rows
  int refine_steps = 3;
  int max_soc = 4;
  bool stage_ordering = true;   ///< order KKT unknowns by problem stage (else AMD)

  // Warm start: the caller provides primal and dual values.
  double warm_mu_init = 1e-6;
  double warm_bound_push = 1e-8;
  double warm_mult_floor = 1e-8;

  int print_level = 0;  ///< 0 silent, 1 per-iteration lines on stderr
};

enum class Status { Optimal, MaxIter, Infeasible, NumericalError };

std::string to_string(Status s);

struct IpmStart {
  std::vector<double> x;
  std::vector<double> y;   ///< constraint multipliers, size m (sign: L = f + y'(g - target))
  std::vector<double> zL;  ///< lower-bound multipliers of x, size n
  std::vector<double> zU;  ///< upper-bound multipliers of x, size n
};

struct IpmResult {
  Status status = Status::NumericalError;
  std::vector<double> x;
  std::vector<double> g;
  std::vector<double> y;
  std::vector<double> zL, zU;
  double objective = 0.0;
  int iterations = 0;
  double dual_inf = 0.0;     ///< unscaled Lagrangian gradient infinity norm
  double primal_inf = 0.0;   ///< constraint violation infinity norm
  double compl_inf = 0.0;    ///< complementarity infinity norm at mu = 0
  double kkt_error = 0.0;    ///< scaled overall error used for termination
  double mu = 0.0;
  double wall_time = 0.0;
  std::string message;
};

/// `obj_scale` multiplies the objective inside the solver; the reported
/// objective is in the problem's own units.
IpmResult solve_ipm(Problem& problem, const IpmOptions& opt = {}, const IpmStart* warm = nullptr,
                    double obj_scale = 1.0);

/// Largest violation of the bound and row constraints at x (zero when feasible).
double constraint_violation(const Problem& problem, const std::vector<double>& x);

}  // namespace hvac::nlp
