#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "cmd/linop.hpp"

namespace cmd {

// ---------------------------------------------------------------------------
// Block-structured decision variables
// ---------------------------------------------------------------------------

enum class DomainTag { Free, StrictlyPositive };

struct Block {
  std::string name;
  Index offset = 0;
  Index size = 0;
  DomainTag tag = DomainTag::Free;
};

/// Ordered, named partition of a player's flat decision vector.
class BlockLayout {
 public:
  BlockLayout& add(std::string name, Index size, DomainTag tag);

  Index dim() const { return dim_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  const Block& block(std::string_view name) const;
  bool has_block(std::string_view name) const;

  /// All StrictlyPositive coordinates > 0 (mirror-method feasibility).
  bool interior(const Vec& v) const;
  /// All StrictlyPositive coordinates >= 0 (projection-method feasibility).
  bool feasible_closed(const Vec& v) const;
  /// Clips StrictlyPositive blocks at zero, leaves Free blocks untouched.
  Vec clip_nonnegative(Vec v) const;

 private:
  std::vector<Block> blocks_;
  Index dim_ = 0;
};

using LayoutPtr = std::shared_ptr<const BlockLayout>;

LayoutPtr make_layout(BlockLayout layout);

/// A player's decision variable: flat values plus the layout that names and
/// tags its blocks.
class BlockVector {
 public:
  BlockVector() = default;
  BlockVector(LayoutPtr layout, Vec values);

  const Vec& values() const { return values_; }
  Vec& values() { return values_; }
  const LayoutPtr& layout() const { return layout_; }
  Index dim() const { return values_.size(); }

  Eigen::VectorBlock<const Vec> block(std::string_view name) const;

  /// StrictlyPositive blocks strictly positive and total length consistent.
  bool valid() const;

 private:
  LayoutPtr layout_;
  Vec values_;
};

// ---------------------------------------------------------------------------
// Cones
// ---------------------------------------------------------------------------

enum class ConeTag { Nonneg, Nonpos, Zero, Free };

/// Product of per-coordinate cones on R^k.
struct ConeSpec {
  std::vector<ConeTag> tags;

  Index dim() const { return static_cast<Index>(tags.size()); }
  bool contains(const Vec& v, double tol = 0.0) const;

  static ConeSpec nonneg(Index k) { return uniform(ConeTag::Nonneg, k); }
  static ConeSpec nonpos(Index k) { return uniform(ConeTag::Nonpos, k); }
  static ConeSpec zero(Index k) { return uniform(ConeTag::Zero, k); }
  static ConeSpec uniform(ConeTag t, Index k);
};

/// Coordinatewise polar: Nonneg -> Nonpos, Nonpos -> Nonneg, Zero -> Free,
/// Free -> Zero. Involutive on these tags.
ConeSpec polar_cone(const ConeSpec& c);

// ---------------------------------------------------------------------------
// Two-player games
// ---------------------------------------------------------------------------

/// First-order oracle bundle for a smooth two-player game
///   min_x f(x, y),   min_y g(x, y).
///
/// hvp_xy_f applies the mixed Hessian D^2_xy f to a y-space vector and
/// returns an x-space vector; hvp_yx_g is the y-by-x analogue for g.
/// zero_sum declares g = -f, which also makes the mixed couplings adjoint
/// up to sign: u' [D^2_xy f] v = -v' [D^2_yx g] u.
struct TwoPlayerGame {
  LayoutPtr layout_x;
  LayoutPtr layout_y;

  std::function<double(const Vec&, const Vec&)> eval_f;
  std::function<double(const Vec&, const Vec&)> eval_g;
  std::function<Vec(const Vec&, const Vec&)> grad_x_f;
  std::function<Vec(const Vec&, const Vec&)> grad_y_g;
  std::function<Vec(const Vec&, const Vec&, const Vec&)> hvp_xy_f;
  std::function<Vec(const Vec&, const Vec&, const Vec&)> hvp_yx_g;
  bool zero_sum = false;

  Index dim_x() const { return layout_x ? layout_x->dim() : 0; }
  Index dim_y() const { return layout_y ? layout_y->dim() : 0; }
};

/// Conic constraint map c(z) with matrix-free Jacobian actions.
/// Membership requirement: eval(z) in cone.
struct ConstraintMap {
  Index rows = 0;
  ConeSpec cone;
  std::function<Vec(const Vec&)> eval;                 // z -> R^rows
  std::function<Vec(const Vec&, const Vec&)> jvp;      // J(z) v
  std::function<Vec(const Vec&, const Vec&)> vjp;      // J(z)' w
};

/// A two-player game with per-player conic constraints
///   f_tilde(x) in cone_x,   g_tilde(y) in cone_y.
struct ConstrainedProblem {
  TwoPlayerGame base;
  ConstraintMap constraint_x;  // on the x player's variable
  ConstraintMap constraint_y;  // on the y player's variable

  bool constrained() const {
    return constraint_x.rows > 0 || constraint_y.rows > 0;
  }
};

// ---------------------------------------------------------------------------
// Lagrangian transform
// ---------------------------------------------------------------------------

/// How one player's multiplier coordinates map onto the opposing player's
/// constraint rows. Sign-constrained multipliers are stored as positive
/// magnitudes with the sign applied during oracle assembly, so every
/// multiplier block is either Free or StrictlyPositive.
struct MultiplierMap {
  enum class RowKind { Positive, FreeRow, Dropped };
  struct Row {
    RowKind kind = RowKind::Dropped;
    Index index = 0;   // position within the positive or free block
    double sign = 1.0; // actual multiplier = sign * stored magnitude
  };
  std::vector<Row> rows;
  Index positive_count = 0;
  Index free_count = 0;
  Index offset = 0;  // multipliers start here in the augmented variable

  Index total() const { return positive_count + free_count; }
  /// Stored coordinates -> actual multiplier vector (one entry per row).
  Vec expand(const Vec& stored) const;
  /// Adjoint of expand: per-row values -> stored coordinates.
  Vec scatter(const Vec& per_row) const;
};

/// Result of eliminating the conic constraints with Lagrange multipliers:
/// the x player additionally controls the multipliers of the y player's
/// constraints and vice versa, each incentivized to police the other.
struct LagrangianGame {
  TwoPlayerGame game;
  MultiplierMap mu;  // owned by x, one row per constraint_y row
  MultiplierMap nu;  // owned by y, one row per constraint_x row
};

/// Builds the augmented game
///   F(x, mu; y, nu) = f(x, y) + nu' f_tilde(x) - mu' g_tilde(y)
///   G(x, mu; y, nu) = g(x, y) + mu' g_tilde(y) - nu' f_tilde(x)
/// with multiplier domains given by the polar cones. A problem with no
/// constraints is returned unchanged.
LagrangianGame lagrangian_transform(const ConstrainedProblem& p);

// ---------------------------------------------------------------------------
// Oracle verification
// ---------------------------------------------------------------------------

struct OracleCheck {
  std::string name;
  double max_rel_error = 0.0;
  bool pass = false;
};

struct OracleCheckReport {
  std::vector<OracleCheck> checks;
  bool all_pass = false;
};

/// Compares gradient oracles against central finite differences of the
/// objectives, and mixed-Hessian oracles against finite differences of the
/// gradients, along seeded random directions. Report-only; never throws on
/// mismatch.
OracleCheckReport check_first_order_oracles(const TwoPlayerGame& g,
                                            const Vec& x, const Vec& y,
                                            double tol = 1e-5,
                                            int num_directions = 8,
                                            std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Builtin problems
// ---------------------------------------------------------------------------

/// 1-D zero-sum game f(x, y) = alpha (x - 0.1)(y - 0.1) = -g(x, y) on the
/// positive quadrant, with interior stationary point (0.1, 0.1).
TwoPlayerGame make_bilinear_positive(double alpha);

/// min_{x >= 0} 2xy - (1 - y)^2 against min_{y >= 0} of the negative;
/// constrained Nash equilibrium (0, 1), unconstrained one (-1, 0).
TwoPlayerGame make_empty_threats();

struct RobustRegression {
  ConstrainedProblem problem;
  std::shared_ptr<const Eigen::MatrixXd> a;
  Vec b;
};

/// ||Ax - b||^2 over the simplex, posed as x >= 0 plus the equality
/// constraint 1'x = 1. A has i.i.d. standard normal entries and
/// b = (A_col0 + A_col1)/2 + noise, all drawn from gaussian(seed, .):
/// the first rows*cols draws fill A column by column, the final `rows`
/// draws are the noise.
RobustRegression make_robust_regression(Index rows, Index cols,
                                        std::uint64_t seed);

/// min ||x - c||^2 subject to 1'x = 1 (x free), embedded as a game with a
/// trivial second player. Closed-form optimum: see constrained_qp_solution.
ConstrainedProblem make_constrained_qp(const Vec& c);

/// x* = c + ((1 - 1'c)/m) * ones.
Vec constrained_qp_solution(const Vec& c);

}  // namespace cmd
