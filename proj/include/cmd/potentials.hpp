#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <memory>

#include "cmd/linop.hpp"

namespace cmd {

enum class PotentialKind { Quadratic, Shannon, Burg };

/// A Bregman potential on a convex domain: a strictly convex C^2 function
/// together with the maps it induces (mirror map, metric, divergence, dual
/// exponential).
///
/// Supported kinds:
///   Quadratic  p'Ap/2 on R^m (A SPD, diagonal or dense), complete;
///   Shannon    sum p_i log p_i - p_i on the strictly positive orthant,
///              complete;
///   Burg       sum -log p_i on the strictly positive orthant, not complete
///              (gradient range is the strictly negative orthant).
///
/// Domain checks are strict: a nonpositive coordinate handed to Shannon or
/// Burg throws DomainError. An overall scale factor is supported so that
/// c*psi is expressible; it cancels inside dual_exp.
class BregmanPotential {
 public:
  static BregmanPotential quadratic_identity(Index dim);
  static BregmanPotential quadratic_diagonal(Vec diag);
  static BregmanPotential quadratic(Eigen::MatrixXd a);
  static BregmanPotential shannon(Index dim);
  static BregmanPotential burg(Index dim);

  PotentialKind kind() const { return kind_; }
  Index dim() const { return dim_; }
  bool complete() const { return kind_ != PotentialKind::Burg; }
  double scale() const { return scale_; }

  /// Returns a copy representing c * psi.
  BregmanPotential scaled(double c) const;

  bool in_domain(const Vec& p) const;

  double value(const Vec& p) const;
  Vec gradient(const Vec& p) const;
  Vec hessian_vec(const Vec& p, const Vec& v) const;
  Vec hessian_solve(const Vec& p, const Vec& v) const;

  /// Inverse mirror map: the unique p with gradient(p) = z. Throws RangeError
  /// when z is outside the gradient range (Burg with any z_i >= 0).
  Vec grad_inverse(const Vec& z) const;

  /// Bregman divergence D(p, q) = psi(p) - psi(q) - grad psi(q)'(p - q),
  /// evaluated via the closed form for each kind.
  double divergence(const Vec& p, const Vec& q) const;

  /// Dual exponential map: grad_inverse(gradient(p) + hessian_vec(p, v)).
  /// For Shannon the per-coordinate dual increment v_i/p_i is clamped to
  /// +-dual_increment_clamp() before exponentiation; `clamped`, when
  /// non-null, is set when clamping fired. Burg throws RangeError when the
  /// target leaves the gradient range (any v_i >= p_i).
  Vec dual_exp(const Vec& p, const Vec& v, bool* clamped = nullptr) const;

  /// Dual geodesic: dual_exp(p, t * v).
  Vec dual_line(const Vec& p, const Vec& v, double t,
                bool* clamped = nullptr) const;

  /// Mirror-descent update grad_inverse(gradient(p) - grad/inv_step) in
  /// closed form, with no domain or range validation; non-finite or
  /// out-of-domain results flow back to the caller.
  Vec mirror_step_unchecked(const Vec& p, const Vec& grad,
                            double inv_step) const;

  /// Congruence factor W with W W' = hessian(p), used to precondition
  /// local-game solves into identity perturbations. Diagonal kinds use the
  /// elementwise square root; dense quadratic uses the Cholesky factor.
  Vec hessian_sqrt_apply_t(const Vec& p, const Vec& v) const;  // W' v
  Vec hessian_sqrt_solve(const Vec& p, const Vec& v) const;    // W^-1 v
  Vec hessian_sqrt_solve_t(const Vec& p, const Vec& v) const;  // W^-T v

  static constexpr double dual_increment_clamp() { return 700.0; }

 private:
  BregmanPotential(PotentialKind kind, Index dim) : kind_(kind), dim_(dim) {}

  void check_domain(const Vec& p) const;
  void check_dim(const Vec& v, const char* what) const;

  PotentialKind kind_;
  Index dim_;
  double scale_ = 1.0;
  Vec diag_;                // Quadratic with diagonal A (empty otherwise)
  std::shared_ptr<const Eigen::MatrixXd> dense_;  // Quadratic with dense A
  std::shared_ptr<const Eigen::LLT<Eigen::MatrixXd>> llt_;
};

}  // namespace cmd
