#pragma once

#include <Eigen/Core>

#include <functional>

namespace cmd {

using Vec = Eigen::VectorXd;
using Index = Eigen::Index;

/// Matrix-free square linear operator v -> apply(v).
///
/// The SPD flag is declared by whoever builds the operator and is not
/// verified; it selects CG over GMRES downstream.
struct LinearOperator {
  Index dim = 0;
  std::function<Vec(const Vec&)> apply;
  bool symmetric_positive_definite = false;
};

/// Result of an iterative linear solve. `iterations` counts operator
/// applications, so it is also the cost of the solve in operator units.
struct SolveReport {
  Vec solution;
  int iterations = 0;
  double residual_norm = 0.0;
  bool converged = false;
};

/// Conjugate gradients for a declared-SPD operator.
///
/// Convergence target is ||rhs - op(x)|| <= tol * ||rhs||, with an absolute
/// floor of 1e-14 when rhs = 0. `warm_start`, when given, is the initial
/// guess. Stops unconverged after max_iter operator applications.
SolveReport solve_cg(const LinearOperator& op, const Vec& rhs, double tol,
                     int max_iter, const Vec* warm_start = nullptr);

/// GMRES (full basis, no restarts) for a general square operator.
/// Same residual contract and warm-start semantics as solve_cg.
/// Stagnation returns converged=false; non-finite Krylov coefficients throw
/// BreakdownError.
SolveReport solve_gmres(const LinearOperator& op, const Vec& rhs, double tol,
                        int max_iter, const Vec* warm_start = nullptr);

/// Builds the operator v -> metric_x(v) - hvp_xy(metric_y_solve(hvp_yx(v))),
/// i.e. the Schur complement of the coupled two-player local-game system
/// after eliminating the second player. `spd` declares the result SPD
/// (true when the coupling is antisymmetric and both metrics are SPD).
LinearOperator schur_operator(const LinearOperator& metric_x,
                              std::function<Vec(const Vec&)> hvp_xy,
                              std::function<Vec(const Vec&)> metric_y_solve,
                              std::function<Vec(const Vec&)> hvp_yx,
                              bool spd = false);

}  // namespace cmd
