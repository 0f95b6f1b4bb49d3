#pragma once

#include <functional>
#include <vector>

#include "cmd/games.hpp"
#include "cmd/linop.hpp"
#include "cmd/potentials.hpp"
#include "cmd/trace.hpp"

namespace cmd {

enum class Method { CMD, CMW, PCGD, PX, PXM, MD };

struct KrylovOptions {
  double tol = 1e-8;
  int max_iter = 0;  // 0 -> 10 * system dimension
};

struct SolverConfig {
  Method method = Method::CMD;
  double inv_step_x = 1.0;  // alpha, scales the x metric
  double inv_step_y = 1.0;  // beta, scales the y metric
  // Potential applied to StrictlyPositive blocks; Free blocks always get the
  // Euclidean (identity quadratic) potential. CMW forces Shannon here.
  PotentialKind cone_potential_x = PotentialKind::Shannon;
  PotentialKind cone_potential_y = PotentialKind::Shannon;
  KrylovOptions krylov;
  bool warm_start = true;
  bool alternating = false;
  long max_iters = 1000;
  double stop_grad_norm = 0.0;  // 0 disables the gradient-norm stop
  double divergence_cap = 1e8;
};

/// Direct sum of Bregman potentials over a player's blocks. All operations
/// act on the player's flat vector, dispatching each block to its part.
class PlayerPotential {
 public:
  struct Part {
    Index offset = 0;
    Index size = 0;
    BregmanPotential pot;
  };

  PlayerPotential() = default;

  /// One potential covering the whole vector.
  static PlayerPotential uniform(BregmanPotential pot);
  /// cone_kind on StrictlyPositive blocks, identity quadratic on Free blocks.
  static PlayerPotential for_layout(const BlockLayout& layout,
                                    PotentialKind cone_kind);
  static PlayerPotential euclidean(Index dim);

  Index dim() const { return dim_; }
  const std::vector<Part>& parts() const { return parts_; }
  bool in_domain(const Vec& p) const;
  bool complete() const;

  double value(const Vec& p) const;
  Vec gradient(const Vec& p) const;
  Vec hessian_vec(const Vec& p, const Vec& v) const;
  Vec hessian_solve(const Vec& p, const Vec& v) const;
  Vec grad_inverse(const Vec& z) const;
  double divergence(const Vec& p, const Vec& q) const;
  Vec dual_exp(const Vec& p, const Vec& v, bool* clamped = nullptr) const;
  Vec hessian_sqrt_apply_t(const Vec& p, const Vec& v) const;
  Vec hessian_sqrt_solve(const Vec& p, const Vec& v) const;
  Vec hessian_sqrt_solve_t(const Vec& p, const Vec& v) const;

  /// Mirror-descent update grad_inverse(gradient(p) - grad/inv_step) in
  /// closed form per part, without domain or range validation; non-finite
  /// results flow to the caller's divergence detection.
  Vec mirror_step_unchecked(const Vec& p, const Vec& grad,
                            double inv_step) const;

 private:
  std::vector<Part> parts_;
  Index dim_ = 0;
};

struct OracleCounters {
  long grad_calls = 0;
  long hvp_calls = 0;
};

/// Solver iterate. Dual coordinates and the gradients at (x, y) are kept in
/// sync with the primal values; steps are pure (state in, state out).
struct IterateState {
  BlockVector x, y;
  Vec dual_x, dual_y;    // gradient of the player potentials at x, y
  Vec grad_fx, grad_gy;  // gradient oracles at (x, y)
  Vec warm_dx, warm_dy;  // previous local-game directions (warm starts)
  long iteration = 0;
  OracleCounters counters;
  long clamp_events = 0;     // cumulative retraction clamp events
  bool clamped_last = false; // clamp fired during the last step
  long krylov_last = 0;      // HVP pairs consumed by the last step

  double stacked_grad_norm() const;
  double stacked_iterate_norm() const;
};

/// Builds the initial state, validating feasibility (interior for
/// requires_interior, closed orthant otherwise) and prefetching both
/// gradient oracles (counted).
IterateState make_initial_state(const TwoPlayerGame& g, const Vec& x0,
                                const Vec& y0, const PlayerPotential& psi,
                                const PlayerPotential& phi,
                                bool requires_interior);

/// Directions solving the metric-regularized bilinear local game.
struct LocalGameSolution {
  Vec delta_x, delta_y;
  int krylov_x = 0, krylov_y = 0;  // operator applications per Schur system
  long krylov_units = 0;           // total HVP pairs consumed by the solve
  double residual_x = 0.0, residual_y = 0.0;
  long grad_calls = 0, hvp_calls = 0;  // oracle cost of this solve
};

/// Solves, matrix-free, the two Schur systems
///   (a D2psi - [D2xy f](b D2phi)^-1 [D2yx g]) dx
///        = -(grad_x f - [D2xy f](b D2phi)^-1 grad_y g)
/// and the mirror image for dy, preconditioned by the metrics so the Krylov
/// operator is an identity perturbation. CG when the game is zero-sum,
/// GMRES otherwise. Warm starts reuse state.warm_dx/warm_dy.
LocalGameSolution solve_local_game(const TwoPlayerGame& g,
                                   const IterateState& s,
                                   const PlayerPotential& psi,
                                   const PlayerPotential& phi, double alpha,
                                   double beta, const KrylovOptions& kry,
                                   bool warm_start);

/// Closed-form best response of the not-yet-solved player, given the other
/// player's direction: dy = -(b D2phi)^-1 (grad_y g + [D2yx g] dx) when
/// `solved_is_x`, and symmetrically otherwise.
Vec alternating_best_response(const TwoPlayerGame& g, const IterateState& s,
                              const Vec& delta_solved, bool solved_is_x,
                              const PlayerPotential& other_potential,
                              double other_inv_step,
                              OracleCounters* cost = nullptr);

/// Dual-geometry retraction: dual_exp of the player potential.
Vec retract(const PlayerPotential& psi, const Vec& p, const Vec& delta,
            bool* clamped = nullptr);
Vec retract(const BregmanPotential& psi, const Vec& p, const Vec& delta,
            bool* clamped = nullptr);

/// One mirror-descent update grad_inverse(gradient(point) - grad/inv_step),
/// validated (domain errors on bad points, range errors for Burg).
Vec mirror_descent_step(const BregmanPotential& psi, const Vec& point,
                        const Vec& grad, double inv_step);
Vec mirror_descent_step(const PlayerPotential& psi, const Vec& point,
                        const Vec& grad, double inv_step);

// Step functions. Each consumes the gradients cached in the state, fetches
// whatever else it needs, and returns the successor state with refreshed
// caches and counters.
IterateState cmd_step(const TwoPlayerGame& g, const IterateState& s,
                      const SolverConfig& cfg, const PlayerPotential& psi,
                      const PlayerPotential& phi);
/// cmd_step specialized to Shannon geometry on StrictlyPositive blocks with
/// the metric actions spelled out elementwise; bitwise-identical to cmd_step
/// with the corresponding Shannon player potentials.
IterateState cmw_step(const TwoPlayerGame& g, const IterateState& s,
                      const SolverConfig& cfg);
/// Euclidean local game followed by projection of StrictlyPositive blocks
/// onto the nonnegative orthant.
IterateState pcgd_step(const TwoPlayerGame& g, const IterateState& s,
                       double eta, const KrylovOptions& kry, bool warm_start);
/// Projected extragradient with per-player step sizes.
IterateState px_step(const TwoPlayerGame& g, const IterateState& s,
                     double eta_x, double eta_y);
IterateState px_step(const TwoPlayerGame& g, const IterateState& s,
                     double eta);
/// Mirror-prox: mirror-descent lookahead, then a mirror-descent update with
/// the lookahead gradients. Non-finite values are produced, not thrown.
IterateState pxm_step(const TwoPlayerGame& g, const IterateState& s,
                      const SolverConfig& cfg, const PlayerPotential& psi,
                      const PlayerPotential& phi);
/// Simultaneous mirror descent on both players.
IterateState md_step(const TwoPlayerGame& g, const IterateState& s,
                     const SolverConfig& cfg, const PlayerPotential& psi,
                     const PlayerPotential& phi);

/// Reporting hooks for run_solver. report_f defaults to eval_f; dist_ref,
/// when set, fills the trace's distance column and enables stop_dist;
/// on_state observes every iterate (including the initial one).
struct TraceOptions {
  long stride = 1;
  std::function<double(const Vec&, const Vec&)> report_f;
  std::function<double(const Vec&, const Vec&)> dist_ref;
  double stop_dist = 0.0;
  std::function<void(const IterateState&)> on_state;
};

/// Builds the per-method potentials, validates the initial point, and
/// iterates until max_iters, the gradient-norm or distance stop, or
/// divergence (non-finite values, iterate norm beyond divergence_cap, or a
/// mirror iterate collapsing onto the boundary). Divergence is recorded in
/// the trace, never thrown.
RunTrace run_solver(const TwoPlayerGame& g, const Vec& x0, const Vec& y0,
                    const SolverConfig& cfg, const TraceOptions& topt = {});

/// Potentials run_solver would use for a method on the given layouts.
PlayerPotential method_potential(const SolverConfig& cfg,
                                 const BlockLayout& layout, bool x_side);

}  // namespace cmd
