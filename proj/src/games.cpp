#include "cmd/games.hpp"

#include <cmath>
#include <utility>

#include "cmd/errors.hpp"
#include "cmd/rng.hpp"

namespace cmd {

// ---------------------------------------------------------------------------
// BlockLayout / BlockVector
// ---------------------------------------------------------------------------

BlockLayout& BlockLayout::add(std::string name, Index size, DomainTag tag) {
  if (size < 1) throw ContractError("block '" + name + "': size must be >= 1");
  if (has_block(name)) throw ContractError("duplicate block name '" + name + "'");
  blocks_.push_back(Block{std::move(name), dim_, size, tag});
  dim_ += size;
  return *this;
}

const Block& BlockLayout::block(std::string_view name) const {
  for (const auto& b : blocks_) {
    if (b.name == name) return b;
  }
  throw ContractError("no block named '" + std::string(name) + "'");
}

bool BlockLayout::has_block(std::string_view name) const {
  for (const auto& b : blocks_) {
    if (b.name == name) return true;
  }
  return false;
}

bool BlockLayout::interior(const Vec& v) const {
  if (v.size() != dim_) return false;
  for (const auto& b : blocks_) {
    if (b.tag == DomainTag::StrictlyPositive &&
        !(v.segment(b.offset, b.size).minCoeff() > 0.0)) {
      return false;
    }
  }
  return true;
}

bool BlockLayout::feasible_closed(const Vec& v) const {
  if (v.size() != dim_) return false;
  for (const auto& b : blocks_) {
    if (b.tag == DomainTag::StrictlyPositive &&
        !(v.segment(b.offset, b.size).minCoeff() >= 0.0)) {
      return false;
    }
  }
  return true;
}

Vec BlockLayout::clip_nonnegative(Vec v) const {
  for (const auto& b : blocks_) {
    if (b.tag == DomainTag::StrictlyPositive) {
      v.segment(b.offset, b.size) =
          v.segment(b.offset, b.size).cwiseMax(0.0);
    }
  }
  return v;
}

LayoutPtr make_layout(BlockLayout layout) {
  return std::make_shared<const BlockLayout>(std::move(layout));
}

BlockVector::BlockVector(LayoutPtr layout, Vec values)
    : layout_(std::move(layout)), values_(std::move(values)) {
  if (!layout_ || values_.size() != layout_->dim()) {
    throw ContractError("block vector: values do not match layout dimension");
  }
}

Eigen::VectorBlock<const Vec> BlockVector::block(std::string_view name) const {
  const Block& b = layout_->block(name);
  return values_.segment(b.offset, b.size);
}

bool BlockVector::valid() const {
  return layout_ && values_.size() == layout_->dim() &&
         layout_->interior(values_);
}

// ---------------------------------------------------------------------------
// Cones
// ---------------------------------------------------------------------------

ConeSpec ConeSpec::uniform(ConeTag t, Index k) {
  ConeSpec c;
  c.tags.assign(static_cast<std::size_t>(k), t);
  return c;
}

bool ConeSpec::contains(const Vec& v, double tol) const {
  if (v.size() != dim()) return false;
  for (Index i = 0; i < v.size(); ++i) {
    switch (tags[static_cast<std::size_t>(i)]) {
      case ConeTag::Nonneg:
        if (v[i] < -tol) return false;
        break;
      case ConeTag::Nonpos:
        if (v[i] > tol) return false;
        break;
      case ConeTag::Zero:
        if (std::abs(v[i]) > tol) return false;
        break;
      case ConeTag::Free:
        break;
    }
  }
  return true;
}

ConeSpec polar_cone(const ConeSpec& c) {
  ConeSpec out;
  out.tags.reserve(c.tags.size());
  for (ConeTag t : c.tags) {
    switch (t) {
      case ConeTag::Nonneg:
        out.tags.push_back(ConeTag::Nonpos);
        break;
      case ConeTag::Nonpos:
        out.tags.push_back(ConeTag::Nonneg);
        break;
      case ConeTag::Zero:
        out.tags.push_back(ConeTag::Free);
        break;
      case ConeTag::Free:
        out.tags.push_back(ConeTag::Zero);
        break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Lagrangian transform
// ---------------------------------------------------------------------------

Vec MultiplierMap::expand(const Vec& stored) const {
  if (stored.size() != total()) {
    throw ContractError("multiplier expand: stored length mismatch");
  }
  Vec out = Vec::Zero(static_cast<Index>(rows.size()));
  for (Index r = 0; r < out.size(); ++r) {
    const Row& row = rows[static_cast<std::size_t>(r)];
    switch (row.kind) {
      case RowKind::Positive:
        out[r] = row.sign * stored[row.index];
        break;
      case RowKind::FreeRow:
        out[r] = stored[positive_count + row.index];
        break;
      case RowKind::Dropped:
        break;
    }
  }
  return out;
}

Vec MultiplierMap::scatter(const Vec& per_row) const {
  if (per_row.size() != static_cast<Index>(rows.size())) {
    throw ContractError("multiplier scatter: row length mismatch");
  }
  Vec out = Vec::Zero(total());
  for (Index r = 0; r < per_row.size(); ++r) {
    const Row& row = rows[static_cast<std::size_t>(r)];
    switch (row.kind) {
      case RowKind::Positive:
        out[row.index] = row.sign * per_row[r];
        break;
      case RowKind::FreeRow:
        out[positive_count + row.index] = per_row[r];
        break;
      case RowKind::Dropped:
        break;
    }
  }
  return out;
}

namespace {

MultiplierMap build_multiplier_map(const ConeSpec& cone, Index offset) {
  MultiplierMap map;
  map.offset = offset;
  map.rows.resize(cone.tags.size());
  for (std::size_t r = 0; r < cone.tags.size(); ++r) {
    MultiplierMap::Row& row = map.rows[r];
    // the multiplier lives in the polar cone of the constraint row
    switch (cone.tags[r]) {
      case ConeTag::Nonpos:  // h <= 0, multiplier >= 0
        row.kind = MultiplierMap::RowKind::Positive;
        row.sign = 1.0;
        row.index = map.positive_count++;
        break;
      case ConeTag::Nonneg:  // h >= 0, multiplier <= 0, stored as magnitude
        row.kind = MultiplierMap::RowKind::Positive;
        row.sign = -1.0;
        row.index = map.positive_count++;
        break;
      case ConeTag::Zero:  // equality, free multiplier
        row.kind = MultiplierMap::RowKind::FreeRow;
        row.index = map.free_count++;
        break;
      case ConeTag::Free:  // no constraint, multiplier pinned to zero
        row.kind = MultiplierMap::RowKind::Dropped;
        break;
    }
  }
  return map;
}

LayoutPtr augment_layout(const BlockLayout& base, const MultiplierMap& map,
                         const std::string& stem) {
  BlockLayout out = base;
  if (map.positive_count > 0) {
    out.add(stem + "_pos", map.positive_count, DomainTag::StrictlyPositive);
  }
  if (map.free_count > 0) {
    out.add(stem + "_free", map.free_count, DomainTag::Free);
  }
  return make_layout(std::move(out));
}

Vec concat(const Vec& a, const Vec& b) {
  Vec out(a.size() + b.size());
  out.head(a.size()) = a;
  out.tail(b.size()) = b;
  return out;
}

}  // namespace

LagrangianGame lagrangian_transform(const ConstrainedProblem& p) {
  const Index m = p.base.dim_x();
  const Index n = p.base.dim_y();
  if (p.constraint_x.rows != p.constraint_x.cone.dim() ||
      p.constraint_y.rows != p.constraint_y.cone.dim()) {
    throw ContractError("lagrangian transform: cone/constraint dim mismatch");
  }
  if ((p.constraint_x.rows > 0 && m == 0) ||
      (p.constraint_y.rows > 0 && n == 0)) {
    throw ContractError(
        "lagrangian transform: constraint on a zero-dimensional player");
  }

  LagrangianGame out;
  out.mu = build_multiplier_map(p.constraint_y.cone, m);
  out.nu = build_multiplier_map(p.constraint_x.cone, n);

  if (!p.constrained()) {
    out.game = p.base;
    return out;
  }

  const TwoPlayerGame base = p.base;
  const ConstraintMap cx = p.constraint_x;
  const ConstraintMap cy = p.constraint_y;
  const MultiplierMap mu = out.mu;
  const MultiplierMap nu = out.nu;
  const Index mu_dim = mu.total();
  const Index nu_dim = nu.total();

  TwoPlayerGame g;
  g.layout_x = augment_layout(*base.layout_x, mu, "mu");
  g.layout_y = augment_layout(*base.layout_y, nu, "nu");
  g.zero_sum = base.zero_sum;

  g.eval_f = [=](const Vec& xh, const Vec& yh) {
    const Vec x = xh.head(m), y = yh.head(n);
    double v = base.eval_f(x, y);
    if (cx.rows > 0) v += nu.expand(yh.tail(nu_dim)).dot(cx.eval(x));
    if (cy.rows > 0) v -= mu.expand(xh.tail(mu_dim)).dot(cy.eval(y));
    return v;
  };
  g.eval_g = [=](const Vec& xh, const Vec& yh) {
    const Vec x = xh.head(m), y = yh.head(n);
    double v = base.eval_g(x, y);
    if (cy.rows > 0) v += mu.expand(xh.tail(mu_dim)).dot(cy.eval(y));
    if (cx.rows > 0) v -= nu.expand(yh.tail(nu_dim)).dot(cx.eval(x));
    return v;
  };
  g.grad_x_f = [=](const Vec& xh, const Vec& yh) {
    const Vec x = xh.head(m), y = yh.head(n);
    Vec gx = base.grad_x_f(x, y);
    if (cx.rows > 0) gx += cx.vjp(x, nu.expand(yh.tail(nu_dim)));
    Vec gmu = cy.rows > 0 ? Vec(mu.scatter(-cy.eval(y))) : Vec(0);
    return concat(gx, gmu);
  };
  g.grad_y_g = [=](const Vec& xh, const Vec& yh) {
    const Vec x = xh.head(m), y = yh.head(n);
    Vec gy = base.grad_y_g(x, y);
    if (cy.rows > 0) gy += cy.vjp(y, mu.expand(xh.tail(mu_dim)));
    Vec gnu = cx.rows > 0 ? Vec(nu.scatter(-cx.eval(x))) : Vec(0);
    return concat(gy, gnu);
  };
  g.hvp_xy_f = [=](const Vec& xh, const Vec& yh, const Vec& vy_hat) {
    const Vec x = xh.head(m), y = yh.head(n);
    const Vec vy = vy_hat.head(n);
    Vec ox = base.hvp_xy_f(x, y, vy);
    if (cx.rows > 0) ox += cx.vjp(x, nu.expand(vy_hat.tail(nu_dim)));
    Vec omu = cy.rows > 0 ? Vec(mu.scatter(-cy.jvp(y, vy))) : Vec(0);
    return concat(ox, omu);
  };
  g.hvp_yx_g = [=](const Vec& xh, const Vec& yh, const Vec& vx_hat) {
    const Vec x = xh.head(m), y = yh.head(n);
    const Vec vx = vx_hat.head(m);
    Vec oy = base.hvp_yx_g(x, y, vx);
    if (cy.rows > 0) oy += cy.vjp(y, mu.expand(vx_hat.tail(mu_dim)));
    Vec onu = cx.rows > 0 ? Vec(nu.scatter(-cx.jvp(x, vx))) : Vec(0);
    return concat(oy, onu);
  };

  out.game = std::move(g);
  return out;
}

// ---------------------------------------------------------------------------
// Oracle verification
// ---------------------------------------------------------------------------

namespace {

double fd_step(const Vec& p) {
  const double scale = p.size() > 0 ? p.cwiseAbs().maxCoeff() : 0.0;
  return 1e-6 * (1.0 + scale);
}

}  // namespace

OracleCheckReport check_first_order_oracles(const TwoPlayerGame& g,
                                            const Vec& x, const Vec& y,
                                            double tol, int num_directions,
                                            std::uint64_t seed) {
  const Index m = g.dim_x();
  const Index n = g.dim_y();
  if (x.size() != m || y.size() != n) {
    throw ContractError("oracle check: point does not match game dimensions");
  }
  const Index per_dir = m + n;
  Vec draws = per_dir > 0
                  ? gaussian(seed, per_dir * std::max(num_directions, 1))
                  : Vec(0);
  auto x_dir = [&](int k) {
    Vec d = draws.segment(k * per_dir, m);
    const double nrm = d.norm();
    return nrm > 0 ? Vec(d / nrm) : d;
  };
  auto y_dir = [&](int k) {
    Vec d = draws.segment(k * per_dir + m, n);
    const double nrm = d.norm();
    return nrm > 0 ? Vec(d / nrm) : d;
  };

  const double hx = fd_step(x);
  const double hy = fd_step(y);

  OracleCheckReport rep;
  rep.all_pass = true;
  auto push = [&](std::string name, double err) {
    OracleCheck c{std::move(name), err, err <= tol};
    rep.all_pass = rep.all_pass && c.pass;
    rep.checks.push_back(std::move(c));
  };

  if (m > 0) {
    const Vec gx = g.grad_x_f(x, y);
    double err = 0.0;
    for (int k = 0; k < num_directions; ++k) {
      const Vec d = x_dir(k);
      const double fd =
          (g.eval_f(x + hx * d, y) - g.eval_f(x - hx * d, y)) / (2.0 * hx);
      err = std::max(err, std::abs(gx.dot(d) - fd) / (1.0 + std::abs(fd)));
    }
    push("grad_x_f", err);
  }
  if (n > 0) {
    const Vec gy = g.grad_y_g(x, y);
    double err = 0.0;
    for (int k = 0; k < num_directions; ++k) {
      const Vec d = y_dir(k);
      const double fd =
          (g.eval_g(x, y + hy * d) - g.eval_g(x, y - hy * d)) / (2.0 * hy);
      err = std::max(err, std::abs(gy.dot(d) - fd) / (1.0 + std::abs(fd)));
    }
    push("grad_y_g", err);
  }
  if (m > 0 && n > 0) {
    double err = 0.0;
    for (int k = 0; k < num_directions; ++k) {
      const Vec v = y_dir(k);
      const Vec fd =
          (g.grad_x_f(x, y + hy * v) - g.grad_x_f(x, y - hy * v)) / (2.0 * hy);
      err = std::max(err, (g.hvp_xy_f(x, y, v) - fd).norm() / (1.0 + fd.norm()));
    }
    push("hvp_xy_f", err);

    err = 0.0;
    for (int k = 0; k < num_directions; ++k) {
      const Vec v = x_dir(k);
      const Vec fd =
          (g.grad_y_g(x + hx * v, y) - g.grad_y_g(x - hx * v, y)) / (2.0 * hx);
      err = std::max(err, (g.hvp_yx_g(x, y, v) - fd).norm() / (1.0 + fd.norm()));
    }
    push("hvp_yx_g", err);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Builtin problems
// ---------------------------------------------------------------------------

TwoPlayerGame make_bilinear_positive(double alpha) {
  if (alpha == 0.0) {
    throw ContractError("bilinear_positive: alpha must be nonzero");
  }
  TwoPlayerGame g;
  g.layout_x = make_layout(BlockLayout().add("x", 1, DomainTag::StrictlyPositive));
  g.layout_y = make_layout(BlockLayout().add("y", 1, DomainTag::StrictlyPositive));
  g.zero_sum = true;
  g.eval_f = [alpha](const Vec& x, const Vec& y) {
    return alpha * (x[0] - 0.1) * (y[0] - 0.1);
  };
  g.eval_g = [alpha](const Vec& x, const Vec& y) {
    return -alpha * (x[0] - 0.1) * (y[0] - 0.1);
  };
  g.grad_x_f = [alpha](const Vec&, const Vec& y) {
    return Vec::Constant(1, alpha * (y[0] - 0.1));
  };
  g.grad_y_g = [alpha](const Vec& x, const Vec&) {
    return Vec::Constant(1, -alpha * (x[0] - 0.1));
  };
  g.hvp_xy_f = [alpha](const Vec&, const Vec&, const Vec& v) {
    return Vec(alpha * v);
  };
  g.hvp_yx_g = [alpha](const Vec&, const Vec&, const Vec& v) {
    return Vec(-alpha * v);
  };
  return g;
}

TwoPlayerGame make_empty_threats() {
  TwoPlayerGame g;
  g.layout_x = make_layout(BlockLayout().add("x", 1, DomainTag::StrictlyPositive));
  g.layout_y = make_layout(BlockLayout().add("y", 1, DomainTag::StrictlyPositive));
  g.zero_sum = true;
  auto f = [](double x, double y) { return 2.0 * x * y - (1.0 - y) * (1.0 - y); };
  g.eval_f = [f](const Vec& x, const Vec& y) { return f(x[0], y[0]); };
  g.eval_g = [f](const Vec& x, const Vec& y) { return -f(x[0], y[0]); };
  g.grad_x_f = [](const Vec&, const Vec& y) {
    return Vec::Constant(1, 2.0 * y[0]);
  };
  g.grad_y_g = [](const Vec& x, const Vec& y) {
    return Vec::Constant(1, -2.0 * x[0] + 2.0 * y[0] - 2.0);
  };
  g.hvp_xy_f = [](const Vec&, const Vec&, const Vec& v) { return Vec(2.0 * v); };
  g.hvp_yx_g = [](const Vec&, const Vec&, const Vec& v) { return Vec(-2.0 * v); };
  return g;
}

namespace {

/// Shared scaffolding for single-player problems min f(x) s.t. 1'x = 1,
/// embedded as a zero-sum game with an empty second player.
ConstrainedProblem simplex_constrained_game(
    LayoutPtr layout_x, std::function<double(const Vec&)> f,
    std::function<Vec(const Vec&)> grad_f) {
  const Index m = layout_x->dim();
  ConstrainedProblem p;
  p.base.layout_x = std::move(layout_x);
  p.base.layout_y = make_layout(BlockLayout());
  p.base.zero_sum = true;
  p.base.eval_f = [f](const Vec& x, const Vec&) { return f(x); };
  p.base.eval_g = [f](const Vec& x, const Vec&) { return -f(x); };
  p.base.grad_x_f = [grad_f](const Vec& x, const Vec&) { return grad_f(x); };
  p.base.grad_y_g = [](const Vec&, const Vec&) { return Vec(0); };
  p.base.hvp_xy_f = [m](const Vec&, const Vec&, const Vec&) {
    return Vec(Vec::Zero(m));
  };
  p.base.hvp_yx_g = [](const Vec&, const Vec&, const Vec&) { return Vec(0); };

  p.constraint_x.rows = 1;
  p.constraint_x.cone = ConeSpec::zero(1);
  p.constraint_x.eval = [](const Vec& x) {
    return Vec::Constant(1, x.sum() - 1.0);
  };
  p.constraint_x.jvp = [](const Vec&, const Vec& v) {
    return Vec::Constant(1, v.sum());
  };
  p.constraint_x.vjp = [m](const Vec&, const Vec& w) {
    return Vec(Vec::Constant(m, w[0]));
  };
  return p;
}

}  // namespace

RobustRegression make_robust_regression(Index rows, Index cols,
                                        std::uint64_t seed) {
  if (rows < 2 || cols < 2) {
    throw ContractError("robust_regression: rows and cols must be >= 2");
  }
  const Vec draws = gaussian(seed, rows * cols + rows);
  auto a = std::make_shared<Eigen::MatrixXd>(
      Eigen::Map<const Eigen::MatrixXd>(draws.data(), rows, cols));
  const Vec eps = draws.tail(rows);
  const Vec b = 0.5 * (a->col(0) + a->col(1)) + eps;

  auto layout =
      make_layout(BlockLayout().add("x", cols, DomainTag::StrictlyPositive));
  auto f = [a, b](const Vec& x) { return (*a * x - b).squaredNorm(); };
  auto grad = [a, b](const Vec& x) {
    return Vec(2.0 * (a->transpose() * (*a * x - b)));
  };

  RobustRegression out;
  out.problem = simplex_constrained_game(std::move(layout), f, grad);
  out.a = std::move(a);
  out.b = b;
  return out;
}

ConstrainedProblem make_constrained_qp(const Vec& c) {
  if (c.size() < 1) throw ContractError("constrained_qp: empty target");
  const Vec target = c;
  auto layout =
      make_layout(BlockLayout().add("x", c.size(), DomainTag::Free));
  auto f = [target](const Vec& x) { return (x - target).squaredNorm(); };
  auto grad = [target](const Vec& x) { return Vec(2.0 * (x - target)); };
  return simplex_constrained_game(std::move(layout), f, grad);
}

Vec constrained_qp_solution(const Vec& c) {
  const double shift = (1.0 - c.sum()) / static_cast<double>(c.size());
  return c.array() + shift;
}

}  // namespace cmd
