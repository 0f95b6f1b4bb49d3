#include "cmd/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <utility>

#include "cmd/errors.hpp"

namespace cmd {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

// ---------------------------------------------------------------------------
// PlayerPotential
// ---------------------------------------------------------------------------

PlayerPotential PlayerPotential::uniform(BregmanPotential pot) {
  PlayerPotential p;
  p.dim_ = pot.dim();
  p.parts_.push_back(Part{0, pot.dim(), std::move(pot)});
  return p;
}

PlayerPotential PlayerPotential::for_layout(const BlockLayout& layout,
                                            PotentialKind cone_kind) {
  PlayerPotential p;
  p.dim_ = layout.dim();
  for (const Block& b : layout.blocks()) {
    BregmanPotential pot = [&] {
      if (b.tag == DomainTag::StrictlyPositive) {
        switch (cone_kind) {
          case PotentialKind::Shannon:
            return BregmanPotential::shannon(b.size);
          case PotentialKind::Burg:
            return BregmanPotential::burg(b.size);
          case PotentialKind::Quadratic:
            break;
        }
      }
      return BregmanPotential::quadratic_identity(b.size);
    }();
    p.parts_.push_back(Part{b.offset, b.size, std::move(pot)});
  }
  return p;
}

PlayerPotential PlayerPotential::euclidean(Index dim) {
  if (dim == 0) return {};
  return uniform(BregmanPotential::quadratic_identity(dim));
}

bool PlayerPotential::in_domain(const Vec& p) const {
  if (p.size() != dim_) return false;
  for (const Part& part : parts_) {
    if (!part.pot.in_domain(p.segment(part.offset, part.size))) return false;
  }
  return true;
}

bool PlayerPotential::complete() const {
  for (const Part& part : parts_) {
    if (!part.pot.complete()) return false;
  }
  return true;
}

double PlayerPotential::value(const Vec& p) const {
  double v = 0.0;
  for (const Part& part : parts_) {
    v += part.pot.value(p.segment(part.offset, part.size));
  }
  return v;
}

#define CMD_PLAYER_POT_MAP(name)                                            \
  Vec PlayerPotential::name(const Vec& p, const Vec& v) const {            \
    Vec out(dim_);                                                         \
    for (const Part& part : parts_) {                                      \
      out.segment(part.offset, part.size) =                                \
          part.pot.name(p.segment(part.offset, part.size),                 \
                        v.segment(part.offset, part.size));                \
    }                                                                      \
    return out;                                                            \
  }

CMD_PLAYER_POT_MAP(hessian_vec)
CMD_PLAYER_POT_MAP(hessian_solve)
CMD_PLAYER_POT_MAP(hessian_sqrt_apply_t)
CMD_PLAYER_POT_MAP(hessian_sqrt_solve)
CMD_PLAYER_POT_MAP(hessian_sqrt_solve_t)

#undef CMD_PLAYER_POT_MAP

Vec PlayerPotential::gradient(const Vec& p) const {
  Vec out(dim_);
  for (const Part& part : parts_) {
    out.segment(part.offset, part.size) =
        part.pot.gradient(p.segment(part.offset, part.size));
  }
  return out;
}

Vec PlayerPotential::grad_inverse(const Vec& z) const {
  Vec out(dim_);
  for (const Part& part : parts_) {
    out.segment(part.offset, part.size) =
        part.pot.grad_inverse(z.segment(part.offset, part.size));
  }
  return out;
}

double PlayerPotential::divergence(const Vec& p, const Vec& q) const {
  double v = 0.0;
  for (const Part& part : parts_) {
    v += part.pot.divergence(p.segment(part.offset, part.size),
                             q.segment(part.offset, part.size));
  }
  return v;
}

Vec PlayerPotential::dual_exp(const Vec& p, const Vec& v, bool* clamped) const {
  if (clamped) *clamped = false;
  Vec out(dim_);
  for (const Part& part : parts_) {
    bool part_clamped = false;
    out.segment(part.offset, part.size) =
        part.pot.dual_exp(p.segment(part.offset, part.size),
                          v.segment(part.offset, part.size), &part_clamped);
    if (clamped && part_clamped) *clamped = true;
  }
  return out;
}

Vec PlayerPotential::mirror_step_unchecked(const Vec& p, const Vec& grad,
                                           double inv_step) const {
  Vec out(dim_);
  for (const Part& part : parts_) {
    out.segment(part.offset, part.size) = part.pot.mirror_step_unchecked(
        p.segment(part.offset, part.size),
        grad.segment(part.offset, part.size), inv_step);
  }
  return out;
}

// ---------------------------------------------------------------------------
// IterateState
// ---------------------------------------------------------------------------

double IterateState::stacked_grad_norm() const {
  return std::sqrt(grad_fx.squaredNorm() + grad_gy.squaredNorm());
}

double IterateState::stacked_iterate_norm() const {
  return std::sqrt(x.values().squaredNorm() + y.values().squaredNorm());
}

namespace {

Vec safe_dual(const PlayerPotential& pot, const Vec& p) {
  if (pot.in_domain(p)) return pot.gradient(p);
  return Vec::Constant(p.size(), kNaN);
}

}  // namespace

IterateState make_initial_state(const TwoPlayerGame& g, const Vec& x0,
                                const Vec& y0, const PlayerPotential& psi,
                                const PlayerPotential& phi,
                                bool requires_interior) {
  if (x0.size() != g.dim_x() || y0.size() != g.dim_y()) {
    throw ConfigError("initial point does not match game dimensions");
  }
  if (!x0.allFinite() || !y0.allFinite()) {
    throw ConfigError("initial point contains non-finite values");
  }
  if (requires_interior) {
    if (!psi.in_domain(x0) || !phi.in_domain(y0)) {
      throw ConfigError(
          "initial point must be strictly interior for mirror methods");
    }
  } else {
    if (!g.layout_x->feasible_closed(x0) || !g.layout_y->feasible_closed(y0)) {
      throw ConfigError("initial point violates the nonnegative orthant");
    }
  }

  IterateState s;
  s.x = BlockVector(g.layout_x, x0);
  s.y = BlockVector(g.layout_y, y0);
  s.dual_x = safe_dual(psi, x0);
  s.dual_y = safe_dual(phi, y0);
  if (g.dim_x() > 0) {
    s.grad_fx = g.grad_x_f(x0, y0);
    ++s.counters.grad_calls;
  }
  if (g.dim_y() > 0) {
    s.grad_gy = g.grad_y_g(x0, y0);
    ++s.counters.grad_calls;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Metric operations
//
// The local-game solve is written against this small bundle so that the
// generic potential path (CMD) and the elementwise Shannon path (CMW) share
// every line of solver plumbing. Both produce identical arithmetic when the
// potentials agree, which is what makes cmw_step bitwise-reproducible by
// cmd_step with Shannon potentials.
// ---------------------------------------------------------------------------

namespace {

struct MetricOps {
  Index dim = 0;
  std::function<Vec(const Vec&, const Vec&)> hess_vec;
  std::function<Vec(const Vec&, const Vec&)> hess_solve;
  std::function<Vec(const Vec&, const Vec&)> sqrt_solve;
  std::function<Vec(const Vec&, const Vec&)> sqrt_solve_t;
  std::function<Vec(const Vec&, const Vec&)> sqrt_apply_t;
  std::function<Vec(const Vec&, const Vec&, bool*)> dual_exp;
  std::function<Vec(const Vec&)> dual;  // gradient of the potential
};

MetricOps potential_ops(const PlayerPotential& pot) {
  MetricOps ops;
  ops.dim = pot.dim();
  ops.hess_vec = [&pot](const Vec& p, const Vec& v) {
    return pot.hessian_vec(p, v);
  };
  ops.hess_solve = [&pot](const Vec& p, const Vec& v) {
    return pot.hessian_solve(p, v);
  };
  ops.sqrt_solve = [&pot](const Vec& p, const Vec& v) {
    return pot.hessian_sqrt_solve(p, v);
  };
  ops.sqrt_solve_t = [&pot](const Vec& p, const Vec& v) {
    return pot.hessian_sqrt_solve_t(p, v);
  };
  ops.sqrt_apply_t = [&pot](const Vec& p, const Vec& v) {
    return pot.hessian_sqrt_apply_t(p, v);
  };
  ops.dual_exp = [&pot](const Vec& p, const Vec& v, bool* c) {
    return pot.dual_exp(p, v, c);
  };
  ops.dual = [&pot](const Vec& p) { return safe_dual(pot, p); };
  return ops;
}

// Shannon geometry on StrictlyPositive coordinates, Euclidean on Free ones,
// spelled out as elementwise divisions and multiplications.
MetricOps entropic_ops(const BlockLayout& layout) {
  auto mask = std::make_shared<std::vector<char>>(layout.dim(), 0);
  for (const Block& b : layout.blocks()) {
    if (b.tag == DomainTag::StrictlyPositive) {
      std::fill(mask->begin() + b.offset, mask->begin() + b.offset + b.size, 1);
    }
  }

  MetricOps ops;
  ops.dim = layout.dim();
  ops.hess_vec = [mask](const Vec& p, const Vec& v) {
    Vec out(v.size());
    for (Index i = 0; i < v.size(); ++i) {
      out[i] = (*mask)[i] ? v[i] / p[i] : v[i];
    }
    return out;
  };
  ops.hess_solve = [mask](const Vec& p, const Vec& v) {
    Vec out(v.size());
    for (Index i = 0; i < v.size(); ++i) {
      out[i] = (*mask)[i] ? v[i] * p[i] : v[i];
    }
    return out;
  };
  ops.sqrt_solve = [mask](const Vec& p, const Vec& v) {
    Vec out(v.size());
    for (Index i = 0; i < v.size(); ++i) {
      out[i] = (*mask)[i] ? v[i] * std::sqrt(p[i]) : v[i];
    }
    return out;
  };
  ops.sqrt_solve_t = ops.sqrt_solve;
  ops.sqrt_apply_t = [mask](const Vec& p, const Vec& v) {
    Vec out(v.size());
    for (Index i = 0; i < v.size(); ++i) {
      out[i] = (*mask)[i] ? v[i] / std::sqrt(p[i]) : v[i];
    }
    return out;
  };
  ops.dual_exp = [mask](const Vec& p, const Vec& v, bool* clamped) {
    if (clamped) *clamped = false;
    const double cap = BregmanPotential::dual_increment_clamp();
    Vec out(p.size());
    for (Index i = 0; i < p.size(); ++i) {
      if ((*mask)[i]) {
        double d = v[i] / p[i];
        if (std::abs(d) > cap) {
          d = d > 0.0 ? cap : -cap;
          if (clamped) *clamped = true;
        }
        out[i] = p[i] * std::exp(d);
      } else {
        out[i] = p[i] + v[i];
      }
    }
    return out;
  };
  ops.dual = [mask](const Vec& p) {
    Vec out(p.size());
    for (Index i = 0; i < p.size(); ++i) {
      if ((*mask)[i]) {
        if (!(p[i] > 0.0)) return Vec(Vec::Constant(p.size(), kNaN));
        out[i] = std::log(p[i]);
      } else {
        out[i] = p[i];
      }
    }
    return out;
  };
  return ops;
}

struct SideResult {
  Vec delta;
  int applies = 0;
  double residual = 0.0;
};

// Solves one Schur system
//   (a * H_self - B (b * H_other)^-1 C) delta = -(g_self - B (b*H_other)^-1 g_other)
// in coordinates scaled by (a * H_self)^{1/2}, where the operator becomes an
// identity perturbation. hvp_into_self plays B, hvp_into_other plays C.
SideResult solve_schur_side(const Vec& p_self, const Vec& p_other,
                            const MetricOps& ops_self,
                            const MetricOps& ops_other, double a, double b,
                            const std::function<Vec(const Vec&)>& hvp_into_self,
                            const std::function<Vec(const Vec&)>& hvp_into_other,
                            const Vec& grad_self, const Vec& grad_other,
                            const KrylovOptions& kry, const Vec* warm,
                            bool spd) {
  SideResult out;
  if (ops_self.dim == 0) return out;
  const double sa = std::sqrt(a);
  const bool coupled = ops_other.dim > 0;

  Vec rhs = -grad_self;
  if (coupled) {
    rhs += hvp_into_self(ops_other.hess_solve(p_other, grad_other) / b);
  }

  LinearOperator op;
  op.dim = ops_self.dim;
  op.symmetric_positive_definite = spd;
  if (coupled) {
    op.apply = [&](const Vec& u) -> Vec {
      Vec t = ops_self.sqrt_solve_t(p_self, u) / sa;
      Vec c = ops_other.hess_solve(p_other, hvp_into_other(t)) / b;
      return u - ops_self.sqrt_solve(p_self, hvp_into_self(c)) / sa;
    };
  } else {
    op.apply = [](const Vec& u) { return u; };
  }

  const Vec rhs_pre = ops_self.sqrt_solve(p_self, rhs) / sa;
  Vec warm_pre;
  const Vec* warm_ptr = nullptr;
  if (warm && warm->size() == ops_self.dim) {
    warm_pre = sa * ops_self.sqrt_apply_t(p_self, *warm);
    warm_ptr = &warm_pre;
  }

  const int max_iter =
      kry.max_iter > 0 ? kry.max_iter : static_cast<int>(10 * ops_self.dim);
  const SolveReport rep = spd ? solve_cg(op, rhs_pre, kry.tol, max_iter, warm_ptr)
                              : solve_gmres(op, rhs_pre, kry.tol, max_iter, warm_ptr);
  if (!rep.converged) {
    throw StepError("local-game Krylov solve did not converge: residual " +
                    std::to_string(rep.residual_norm) + " after " +
                    std::to_string(rep.iterations) + " applications");
  }

  out.delta = ops_self.sqrt_solve_t(p_self, rep.solution) / sa;
  out.applies = rep.iterations;
  out.residual = rep.residual_norm;
  return out;
}

LocalGameSolution solve_local_game_impl(const TwoPlayerGame& g,
                                        const IterateState& s,
                                        const MetricOps& ops_x,
                                        const MetricOps& ops_y, double alpha,
                                        double beta, const KrylovOptions& kry,
                                        bool warm_start) {
  const Vec& x = s.x.values();
  const Vec& y = s.y.values();
  LocalGameSolution sol;
  long hvps = 0;
  auto hvp_xy = [&](const Vec& v) {
    ++hvps;
    return g.hvp_xy_f(x, y, v);
  };
  auto hvp_yx = [&](const Vec& v) {
    ++hvps;
    return g.hvp_yx_g(x, y, v);
  };

  const Vec* warm_x = warm_start ? &s.warm_dx : nullptr;
  const Vec* warm_y = warm_start ? &s.warm_dy : nullptr;

  SideResult rx =
      solve_schur_side(x, y, ops_x, ops_y, alpha, beta, hvp_xy, hvp_yx,
                       s.grad_fx, s.grad_gy, kry, warm_x, g.zero_sum);
  sol.delta_x = std::move(rx.delta);
  sol.krylov_x = rx.applies;
  sol.residual_x = rx.residual;

  if (g.dim_y() > 0) {
    // the y system evaluates its own right-hand side gradients
    const Vec gfx = g.grad_x_f(x, y);
    const Vec ggy = g.grad_y_g(x, y);
    sol.grad_calls += 2;
    SideResult ry =
        solve_schur_side(y, x, ops_y, ops_x, beta, alpha, hvp_yx, hvp_xy, ggy,
                         gfx, kry, warm_y, g.zero_sum);
    sol.delta_y = std::move(ry.delta);
    sol.krylov_y = ry.applies;
    sol.residual_y = ry.residual;
  } else {
    sol.delta_y = Vec(0);
  }

  sol.hvp_calls = hvps;
  sol.krylov_units = hvps / 2;
  return sol;
}

}  // namespace

LocalGameSolution solve_local_game(const TwoPlayerGame& g,
                                   const IterateState& s,
                                   const PlayerPotential& psi,
                                   const PlayerPotential& phi, double alpha,
                                   double beta, const KrylovOptions& kry,
                                   bool warm_start) {
  if (!psi.in_domain(s.x.values()) || !phi.in_domain(s.y.values())) {
    throw DomainError("solve_local_game: iterate outside potential domain");
  }
  return solve_local_game_impl(g, s, potential_ops(psi), potential_ops(phi),
                               alpha, beta, kry, warm_start);
}

Vec alternating_best_response(const TwoPlayerGame& g, const IterateState& s,
                              const Vec& delta_solved, bool solved_is_x,
                              const PlayerPotential& other_potential,
                              double other_inv_step, OracleCounters* cost) {
  const Vec& x = s.x.values();
  const Vec& y = s.y.values();
  if (solved_is_x) {
    if (!other_potential.in_domain(y)) {
      throw DomainError("alternating best response: iterate not interior");
    }
    Vec t = s.grad_gy + g.hvp_yx_g(x, y, delta_solved);
    if (cost) ++cost->hvp_calls;
    return -other_potential.hessian_solve(y, t) / other_inv_step;
  }
  if (!other_potential.in_domain(x)) {
    throw DomainError("alternating best response: iterate not interior");
  }
  Vec t = s.grad_fx + g.hvp_xy_f(x, y, delta_solved);
  if (cost) ++cost->hvp_calls;
  return -other_potential.hessian_solve(x, t) / other_inv_step;
}

Vec retract(const PlayerPotential& psi, const Vec& p, const Vec& delta,
            bool* clamped) {
  return psi.dual_exp(p, delta, clamped);
}

Vec retract(const BregmanPotential& psi, const Vec& p, const Vec& delta,
            bool* clamped) {
  return psi.dual_exp(p, delta, clamped);
}

Vec mirror_descent_step(const BregmanPotential& psi, const Vec& point,
                        const Vec& grad, double inv_step) {
  if (!psi.in_domain(point)) {
    throw DomainError("mirror_descent_step: point outside domain");
  }
  if (grad.size() != psi.dim()) {
    throw ContractError("mirror_descent_step: gradient length mismatch");
  }
  if (psi.kind() == PotentialKind::Burg) {
    // target dual must remain strictly negative
    const Vec z = psi.gradient(point) - grad / inv_step;
    if (!(z.maxCoeff() < 0.0)) {
      throw RangeError("mirror_descent_step: burg update leaves the range");
    }
  }
  return psi.mirror_step_unchecked(point, grad, inv_step);
}

Vec mirror_descent_step(const PlayerPotential& psi, const Vec& point,
                        const Vec& grad, double inv_step) {
  Vec out(psi.dim());
  for (const PlayerPotential::Part& part : psi.parts()) {
    out.segment(part.offset, part.size) = mirror_descent_step(
        part.pot, point.segment(part.offset, part.size),
        grad.segment(part.offset, part.size), inv_step);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Step functions
// ---------------------------------------------------------------------------

namespace {

// Assembles the successor state: new values, resynchronized duals, fresh
// gradient caches (counted), bumped counters.
IterateState advance_state(const TwoPlayerGame& g, const IterateState& s,
                           Vec new_x, Vec new_y, const MetricOps& ops_x,
                           const MetricOps& ops_y, OracleCounters step_cost,
                           long krylov_units, bool clamped, Vec warm_dx,
                           Vec warm_dy) {
  IterateState n;
  n.x = BlockVector(s.x.layout(), std::move(new_x));
  n.y = BlockVector(s.y.layout(), std::move(new_y));
  n.dual_x = ops_x.dual ? ops_x.dual(n.x.values()) : Vec(0);
  n.dual_y = ops_y.dual ? ops_y.dual(n.y.values()) : Vec(0);
  if (g.dim_x() > 0) {
    n.grad_fx = g.grad_x_f(n.x.values(), n.y.values());
    ++step_cost.grad_calls;
  }
  if (g.dim_y() > 0) {
    n.grad_gy = g.grad_y_g(n.x.values(), n.y.values());
    ++step_cost.grad_calls;
  }
  n.warm_dx = std::move(warm_dx);
  n.warm_dy = std::move(warm_dy);
  n.iteration = s.iteration + 1;
  n.counters.grad_calls = s.counters.grad_calls + step_cost.grad_calls;
  n.counters.hvp_calls = s.counters.hvp_calls + step_cost.hvp_calls;
  n.clamp_events = s.clamp_events + (clamped ? 1 : 0);
  n.clamped_last = clamped;
  n.krylov_last = krylov_units;
  return n;
}

IterateState local_game_step(const TwoPlayerGame& g, const IterateState& s,
                             const SolverConfig& cfg, const MetricOps& ops_x,
                             const MetricOps& ops_y,
                             const PlayerPotential* psi,
                             const PlayerPotential* phi) {
  LocalGameSolution sol;
  if (cfg.alternating && g.dim_x() > 0 && g.dim_y() > 0 && psi && phi) {
    const bool solve_x = s.iteration % 2 == 0;
    long hvps = 0;
    auto hvp_xy = [&](const Vec& v) {
      ++hvps;
      return g.hvp_xy_f(s.x.values(), s.y.values(), v);
    };
    auto hvp_yx = [&](const Vec& v) {
      ++hvps;
      return g.hvp_yx_g(s.x.values(), s.y.values(), v);
    };
    OracleCounters partner;
    if (solve_x) {
      SideResult rx = solve_schur_side(
          s.x.values(), s.y.values(), ops_x, ops_y, cfg.inv_step_x,
          cfg.inv_step_y, hvp_xy, hvp_yx, s.grad_fx, s.grad_gy, cfg.krylov,
          cfg.warm_start ? &s.warm_dx : nullptr, g.zero_sum);
      sol.delta_x = std::move(rx.delta);
      sol.krylov_x = rx.applies;
      sol.residual_x = rx.residual;
      sol.delta_y = alternating_best_response(g, s, sol.delta_x, true, *phi,
                                              cfg.inv_step_y, &partner);
    } else {
      SideResult ry = solve_schur_side(
          s.y.values(), s.x.values(), ops_y, ops_x, cfg.inv_step_y,
          cfg.inv_step_x, hvp_yx, hvp_xy, s.grad_gy, s.grad_fx, cfg.krylov,
          cfg.warm_start ? &s.warm_dy : nullptr, g.zero_sum);
      sol.delta_y = std::move(ry.delta);
      sol.krylov_y = ry.applies;
      sol.residual_y = ry.residual;
      sol.delta_x = alternating_best_response(g, s, sol.delta_y, false, *psi,
                                              cfg.inv_step_x, &partner);
    }
    sol.hvp_calls = hvps + partner.hvp_calls;
    sol.krylov_units = sol.hvp_calls / 2;
  } else {
    sol = solve_local_game_impl(g, s, ops_x, ops_y, cfg.inv_step_x,
                                cfg.inv_step_y, cfg.krylov, cfg.warm_start);
  }

  bool cl_x = false, cl_y = false;
  Vec new_x = g.dim_x() > 0
                  ? ops_x.dual_exp(s.x.values(), sol.delta_x, &cl_x)
                  : Vec(0);
  Vec new_y = g.dim_y() > 0
                  ? ops_y.dual_exp(s.y.values(), sol.delta_y, &cl_y)
                  : Vec(0);
  OracleCounters cost{sol.grad_calls, sol.hvp_calls};
  return advance_state(g, s, std::move(new_x), std::move(new_y), ops_x, ops_y,
                       cost, sol.krylov_units, cl_x || cl_y,
                       std::move(sol.delta_x), std::move(sol.delta_y));
}

}  // namespace

IterateState cmd_step(const TwoPlayerGame& g, const IterateState& s,
                      const SolverConfig& cfg, const PlayerPotential& psi,
                      const PlayerPotential& phi) {
  if (!psi.in_domain(s.x.values()) || !phi.in_domain(s.y.values())) {
    throw DomainError("cmd_step: iterate outside potential domain");
  }
  return local_game_step(g, s, cfg, potential_ops(psi), potential_ops(phi),
                         &psi, &phi);
}

IterateState cmw_step(const TwoPlayerGame& g, const IterateState& s,
                      const SolverConfig& cfg) {
  if (!g.layout_x->interior(s.x.values()) ||
      !g.layout_y->interior(s.y.values())) {
    throw DomainError("cmw_step: StrictlyPositive blocks must stay positive");
  }
  if (cfg.alternating) {
    // the alternating path needs potential objects for the best response
    const PlayerPotential psi =
        PlayerPotential::for_layout(*g.layout_x, PotentialKind::Shannon);
    const PlayerPotential phi =
        PlayerPotential::for_layout(*g.layout_y, PotentialKind::Shannon);
    return local_game_step(g, s, cfg, entropic_ops(*g.layout_x),
                           entropic_ops(*g.layout_y), &psi, &phi);
  }
  return local_game_step(g, s, cfg, entropic_ops(*g.layout_x),
                         entropic_ops(*g.layout_y), nullptr, nullptr);
}

IterateState pcgd_step(const TwoPlayerGame& g, const IterateState& s,
                       double eta, const KrylovOptions& kry, bool warm_start) {
  if (!(eta > 0.0)) throw ContractError("pcgd_step: eta must be positive");
  const double inv_step = 1.0 / eta;
  const PlayerPotential pot_x = PlayerPotential::euclidean(g.dim_x());
  const PlayerPotential pot_y = PlayerPotential::euclidean(g.dim_y());
  const MetricOps ops_x = potential_ops(pot_x);
  const MetricOps ops_y = potential_ops(pot_y);
  LocalGameSolution sol = solve_local_game_impl(g, s, ops_x, ops_y, inv_step,
                                                inv_step, kry, warm_start);
  Vec new_x = g.layout_x->clip_nonnegative(s.x.values() + sol.delta_x);
  Vec new_y = g.layout_y->clip_nonnegative(s.y.values() + sol.delta_y);
  OracleCounters cost{sol.grad_calls, sol.hvp_calls};
  return advance_state(g, s, std::move(new_x), std::move(new_y), ops_x, ops_y,
                       cost, sol.krylov_units, false, std::move(sol.delta_x),
                       std::move(sol.delta_y));
}

IterateState px_step(const TwoPlayerGame& g, const IterateState& s,
                     double eta_x, double eta_y) {
  if (!(eta_x > 0.0) || !(eta_y > 0.0)) {
    throw ContractError("px_step: step sizes must be positive");
  }
  const Vec& x = s.x.values();
  const Vec& y = s.y.values();
  const Vec half_x = g.layout_x->clip_nonnegative(x - eta_x * s.grad_fx);
  const Vec half_y = g.layout_y->clip_nonnegative(y - eta_y * s.grad_gy);
  OracleCounters cost;
  Vec gfx = Vec(0), ggy = Vec(0);
  if (g.dim_x() > 0) {
    gfx = g.grad_x_f(half_x, half_y);
    ++cost.grad_calls;
  }
  if (g.dim_y() > 0) {
    ggy = g.grad_y_g(half_x, half_y);
    ++cost.grad_calls;
  }
  Vec new_x = g.layout_x->clip_nonnegative(x - eta_x * gfx);
  Vec new_y = g.layout_y->clip_nonnegative(y - eta_y * ggy);
  const PlayerPotential pot_x = PlayerPotential::euclidean(g.dim_x());
  const PlayerPotential pot_y = PlayerPotential::euclidean(g.dim_y());
  return advance_state(g, s, std::move(new_x), std::move(new_y),
                       potential_ops(pot_x), potential_ops(pot_y), cost, 0,
                       false, s.warm_dx, s.warm_dy);
}

IterateState px_step(const TwoPlayerGame& g, const IterateState& s,
                     double eta) {
  return px_step(g, s, eta, eta);
}

IterateState pxm_step(const TwoPlayerGame& g, const IterateState& s,
                      const SolverConfig& cfg, const PlayerPotential& psi,
                      const PlayerPotential& phi) {
  if (!psi.in_domain(s.x.values()) || !phi.in_domain(s.y.values())) {
    throw DomainError("pxm_step: iterate outside potential domain");
  }
  const Vec& x = s.x.values();
  const Vec& y = s.y.values();
  const Vec look_x = psi.mirror_step_unchecked(x, s.grad_fx, cfg.inv_step_x);
  const Vec look_y = phi.mirror_step_unchecked(y, s.grad_gy, cfg.inv_step_y);
  OracleCounters cost;
  Vec gfx = Vec(0), ggy = Vec(0);
  if (g.dim_x() > 0) {
    gfx = g.grad_x_f(look_x, look_y);
    ++cost.grad_calls;
  }
  if (g.dim_y() > 0) {
    ggy = g.grad_y_g(look_x, look_y);
    ++cost.grad_calls;
  }
  Vec new_x = psi.mirror_step_unchecked(x, gfx, cfg.inv_step_x);
  Vec new_y = phi.mirror_step_unchecked(y, ggy, cfg.inv_step_y);
  return advance_state(g, s, std::move(new_x), std::move(new_y),
                       potential_ops(psi), potential_ops(phi), cost, 0, false,
                       s.warm_dx, s.warm_dy);
}

IterateState md_step(const TwoPlayerGame& g, const IterateState& s,
                     const SolverConfig& cfg, const PlayerPotential& psi,
                     const PlayerPotential& phi) {
  if (!psi.in_domain(s.x.values()) || !phi.in_domain(s.y.values())) {
    throw DomainError("md_step: iterate outside potential domain");
  }
  Vec new_x = psi.mirror_step_unchecked(s.x.values(), s.grad_fx, cfg.inv_step_x);
  Vec new_y = phi.mirror_step_unchecked(s.y.values(), s.grad_gy, cfg.inv_step_y);
  return advance_state(g, s, std::move(new_x), std::move(new_y),
                       potential_ops(psi), potential_ops(phi), {}, 0, false,
                       s.warm_dx, s.warm_dy);
}

// ---------------------------------------------------------------------------
// Run loop
// ---------------------------------------------------------------------------

PlayerPotential method_potential(const SolverConfig& cfg,
                                 const BlockLayout& layout, bool x_side) {
  switch (cfg.method) {
    case Method::PCGD:
    case Method::PX:
      return PlayerPotential::euclidean(layout.dim());
    case Method::CMW:
      return PlayerPotential::for_layout(layout, PotentialKind::Shannon);
    default:
      return PlayerPotential::for_layout(
          layout, x_side ? cfg.cone_potential_x : cfg.cone_potential_y);
  }
}

RunTrace run_solver(const TwoPlayerGame& g, const Vec& x0, const Vec& y0,
                    const SolverConfig& cfg, const TraceOptions& topt) {
  if (!(cfg.inv_step_x > 0.0) || !(cfg.inv_step_y > 0.0)) {
    throw ConfigError("inverse step sizes must be positive");
  }
  if (!(cfg.divergence_cap > 0.0)) {
    throw ConfigError("divergence_cap must be positive");
  }
  if (cfg.max_iters < 0) throw ConfigError("max_iters must be >= 0");
  if (cfg.method == Method::PCGD && cfg.inv_step_x != cfg.inv_step_y) {
    throw ConfigError("PCGD uses a single step size; set alpha == beta or eta");
  }
  const long stride = topt.stride > 0 ? topt.stride : 1;

  const bool interior_req =
      cfg.method == Method::CMD || cfg.method == Method::CMW ||
      cfg.method == Method::MD || cfg.method == Method::PXM;
  const PlayerPotential psi = method_potential(cfg, *g.layout_x, true);
  const PlayerPotential phi = method_potential(cfg, *g.layout_y, false);

  IterateState state = make_initial_state(g, x0, y0, psi, phi, interior_req);

  RunTrace trace;
  const auto t0 = std::chrono::steady_clock::now();
  long last_recorded = -1;

  auto record = [&](const char* status) {
    if (state.iteration == last_recorded) {
      if (std::string(status) == "diverged" && !trace.records.empty()) {
        trace.records.back().status = status;
      }
      return;
    }
    const Vec& x = state.x.values();
    const Vec& y = state.y.values();
    TraceRecord r;
    r.iter = state.iteration;
    r.f = topt.report_f ? topt.report_f(x, y) : g.eval_f(x, y);
    r.g = g.eval_g(x, y);
    r.grad_norm = state.stacked_grad_norm();
    r.dist_ref = topt.dist_ref ? topt.dist_ref(x, y) : kNaN;
    r.krylov_iters = state.krylov_last;
    r.grad_calls = state.counters.grad_calls;
    r.hvp_calls = state.counters.hvp_calls;
    r.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                             t0)
                   .count();
    r.status = status;
    trace.records.push_back(std::move(r));
    last_recorded = state.iteration;
  };

  auto row_status = [&]() -> const char* {
    return state.clamped_last ? "clamp" : "ok";
  };

  while (true) {
    if (topt.on_state) topt.on_state(state);
    const Vec& x = state.x.values();
    const Vec& y = state.y.values();
    const bool finite = x.allFinite() && y.allFinite();
    const bool collapsed =
        interior_req && finite &&
        !(g.layout_x->interior(x) && g.layout_y->interior(y));
    const bool diverged = !finite || collapsed ||
                          state.stacked_iterate_norm() > cfg.divergence_cap;
    if (diverged) {
      trace.terminal = RunStatus::Diverged;
      record("diverged");
      break;
    }

    const double gnorm = state.stacked_grad_norm();
    const double dist = topt.dist_ref ? topt.dist_ref(x, y) : kNaN;
    const bool grad_stop =
        cfg.stop_grad_norm > 0.0 && gnorm <= cfg.stop_grad_norm;
    const bool dist_stop = topt.stop_dist > 0.0 && topt.dist_ref &&
                           dist <= topt.stop_dist;
    if (grad_stop || dist_stop) {
      trace.terminal = RunStatus::Converged;
      record(row_status());
      break;
    }
    if (state.iteration >= cfg.max_iters) {
      trace.terminal = RunStatus::MaxIters;
      record(row_status());
      break;
    }

    if (state.iteration % stride == 0) {
      record(row_status());
    }

    try {
      switch (cfg.method) {
        case Method::CMD:
          state = cmd_step(g, state, cfg, psi, phi);
          break;
        case Method::CMW:
          state = cmw_step(g, state, cfg);
          break;
        case Method::PCGD:
          state = pcgd_step(g, state, 1.0 / cfg.inv_step_x, cfg.krylov,
                            cfg.warm_start);
          break;
        case Method::PX:
          state = px_step(g, state, 1.0 / cfg.inv_step_x, 1.0 / cfg.inv_step_y);
          break;
        case Method::PXM:
          state = pxm_step(g, state, cfg, psi, phi);
          break;
        case Method::MD:
          state = md_step(g, state, cfg, psi, phi);
          break;
      }
    } catch (const BreakdownError&) {
      // non-finite Krylov coefficients: the run has numerically diverged
      trace.terminal = RunStatus::Diverged;
      record("diverged");
      break;
    }
  }
  return trace;
}

const char* run_status_name(RunStatus s) {
  switch (s) {
    case RunStatus::Converged:
      return "converged";
    case RunStatus::MaxIters:
      return "max_iters";
    case RunStatus::Diverged:
      return "diverged";
  }
  return "?";
}

}  // namespace cmd
