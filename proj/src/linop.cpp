#include "cmd/linop.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <utility>

#include "cmd/errors.hpp"

namespace cmd {

namespace {

double convergence_threshold(double tol, double rhs_norm) {
  return rhs_norm > 0.0 ? tol * rhs_norm : 1e-14;
}

void check_inputs(const LinearOperator& op, const Vec& rhs, double tol,
                  int max_iter, const Vec* warm_start) {
  if (rhs.size() != op.dim) {
    throw ContractError("linear solve: rhs length " +
                        std::to_string(rhs.size()) + " != operator dim " +
                        std::to_string(op.dim));
  }
  if (warm_start && warm_start->size() != op.dim) {
    throw ContractError("linear solve: warm start length mismatch");
  }
  if (!rhs.allFinite()) {
    throw ContractError("linear solve: rhs contains non-finite values");
  }
  if (!(tol > 0.0) || max_iter < 1) {
    throw ContractError("linear solve: tol must be > 0 and max_iter >= 1");
  }
}

Vec apply_checked(const LinearOperator& op, const Vec& v) {
  Vec out = op.apply(v);
  if (out.size() != op.dim) {
    throw ContractError("linear operator returned wrong output length");
  }
  return out;
}

}  // namespace

SolveReport solve_cg(const LinearOperator& op, const Vec& rhs, double tol,
                     int max_iter, const Vec* warm_start) {
  check_inputs(op, rhs, tol, max_iter, warm_start);
  const double thresh = convergence_threshold(tol, rhs.norm());

  SolveReport rep;
  int applies = 0;
  Vec x;
  Vec r;
  if (warm_start && warm_start->squaredNorm() > 0.0) {
    x = *warm_start;
    r = rhs - apply_checked(op, x);
    ++applies;
  } else {
    x = Vec::Zero(op.dim);
    r = rhs;
  }

  double rr = r.squaredNorm();
  if (std::sqrt(rr) <= thresh) {
    rep.solution = std::move(x);
    rep.iterations = applies;
    rep.residual_norm = std::sqrt(rr);
    rep.converged = true;
    return rep;
  }

  Vec p = r;
  while (applies < max_iter) {
    Vec ap = apply_checked(op, p);
    ++applies;
    const double pap = p.dot(ap);
    if (!std::isfinite(pap)) {
      throw BreakdownError("cg: non-finite curvature p'Ap");
    }
    if (pap <= 0.0) {
      throw BreakdownError("cg: operator is not positive definite (p'Ap = " +
                           std::to_string(pap) + ")");
    }
    const double alpha = rr / pap;
    x += alpha * p;
    r -= alpha * ap;
    const double rr_new = r.squaredNorm();
    if (!std::isfinite(rr_new)) {
      throw BreakdownError("cg: non-finite residual");
    }
    if (std::sqrt(rr_new) <= thresh) {
      rr = rr_new;
      rep.converged = true;
      break;
    }
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }

  rep.solution = std::move(x);
  rep.iterations = applies;
  rep.residual_norm = std::sqrt(rr);
  return rep;
}

SolveReport solve_gmres(const LinearOperator& op, const Vec& rhs, double tol,
                        int max_iter, const Vec* warm_start) {
  check_inputs(op, rhs, tol, max_iter, warm_start);
  const double thresh = convergence_threshold(tol, rhs.norm());

  SolveReport rep;
  int applies = 0;
  Vec x0;
  Vec r0;
  if (warm_start && warm_start->squaredNorm() > 0.0) {
    x0 = *warm_start;
    r0 = rhs - apply_checked(op, x0);
    ++applies;
  } else {
    x0 = Vec::Zero(op.dim);
    r0 = rhs;
  }

  const double beta = r0.norm();
  if (beta <= thresh) {
    rep.solution = std::move(x0);
    rep.iterations = applies;
    rep.residual_norm = beta;
    rep.converged = true;
    return rep;
  }

  // Arnoldi with modified Gram-Schmidt and Givens rotations; the basis is
  // capped at min(dim, remaining iteration budget).
  const int m = static_cast<int>(std::min<Index>(op.dim, max_iter));
  Eigen::MatrixXd basis(op.dim, m + 1);
  Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(m + 1, m);
  Vec g = Vec::Zero(m + 1);
  Vec cs = Vec::Zero(m);
  Vec sn = Vec::Zero(m);

  basis.col(0) = r0 / beta;
  g(0) = beta;

  int cols = 0;
  double res_est = beta;
  bool stagnated = false;
  while (cols < m && applies < max_iter) {
    const int j = cols;
    Vec w = apply_checked(op, basis.col(j));
    ++applies;
    for (int i = 0; i <= j; ++i) {
      hess(i, j) = basis.col(i).dot(w);
      w -= hess(i, j) * basis.col(i);
    }
    const double h_arnoldi = w.norm();
    hess(j + 1, j) = h_arnoldi;
    if (!hess.col(j).allFinite()) {
      throw BreakdownError("gmres: non-finite Arnoldi coefficients");
    }

    for (int i = 0; i < j; ++i) {
      const double t = cs(i) * hess(i, j) + sn(i) * hess(i + 1, j);
      hess(i + 1, j) = -sn(i) * hess(i, j) + cs(i) * hess(i + 1, j);
      hess(i, j) = t;
    }
    const double denom = std::hypot(hess(j, j), h_arnoldi);
    if (denom == 0.0) {
      // Krylov space exhausted with no progress possible (singular operator).
      stagnated = true;
      cols = j;  // column j carries no usable information
      break;
    }
    cs(j) = hess(j, j) / denom;
    sn(j) = h_arnoldi / denom;
    hess(j, j) = denom;
    hess(j + 1, j) = 0.0;
    g(j + 1) = -sn(j) * g(j);
    g(j) = cs(j) * g(j);
    res_est = std::abs(g(j + 1));
    cols = j + 1;

    if (res_est <= thresh) {
      break;
    }
    if (h_arnoldi == 0.0) {
      // invariant subspace reached ("happy breakdown") without convergence
      stagnated = true;
      break;
    }
    if (cols < m) {
      basis.col(cols) = w / h_arnoldi;
    }
  }

  Vec x = x0;
  if (cols > 0) {
    Vec y = hess.topLeftCorner(cols, cols)
                .triangularView<Eigen::Upper>()
                .solve(g.head(cols));
    if (y.allFinite()) {
      x += basis.leftCols(cols) * y;
    } else {
      stagnated = true;
      x = x0;
      res_est = beta;
    }
  }

  rep.solution = std::move(x);
  rep.iterations = applies;
  rep.residual_norm = res_est;
  rep.converged = !stagnated && res_est <= thresh;
  return rep;
}

LinearOperator schur_operator(const LinearOperator& metric_x,
                              std::function<Vec(const Vec&)> hvp_xy,
                              std::function<Vec(const Vec&)> metric_y_solve,
                              std::function<Vec(const Vec&)> hvp_yx,
                              bool spd) {
  LinearOperator out;
  out.dim = metric_x.dim;
  out.symmetric_positive_definite = spd;
  out.apply = [metric_x, hvp_xy = std::move(hvp_xy),
               metric_y_solve = std::move(metric_y_solve),
               hvp_yx = std::move(hvp_yx)](const Vec& v) -> Vec {
    if (v.size() != metric_x.dim) {
      throw ContractError("schur operator: input length mismatch");
    }
    Vec coupled = hvp_xy(metric_y_solve(hvp_yx(v)));
    if (coupled.size() != metric_x.dim) {
      throw ContractError("schur operator: coupling returned wrong length");
    }
    return metric_x.apply(v) - coupled;
  };
  return out;
}

}  // namespace cmd
