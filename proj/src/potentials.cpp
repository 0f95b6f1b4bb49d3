#include "cmd/potentials.hpp"

#include <cmath>
#include <utility>

#include "cmd/errors.hpp"

namespace cmd {

namespace {

const char* kind_name(PotentialKind k) {
  switch (k) {
    case PotentialKind::Quadratic:
      return "quadratic";
    case PotentialKind::Shannon:
      return "shannon";
    case PotentialKind::Burg:
      return "burg";
  }
  return "?";
}

}  // namespace

BregmanPotential BregmanPotential::quadratic_identity(Index dim) {
  return quadratic_diagonal(Vec::Ones(dim));
}

BregmanPotential BregmanPotential::quadratic_diagonal(Vec diag) {
  if (diag.size() < 1 || !(diag.minCoeff() > 0.0)) {
    throw ContractError("quadratic potential: diagonal must be positive");
  }
  BregmanPotential p(PotentialKind::Quadratic, diag.size());
  p.diag_ = std::move(diag);
  return p;
}

BregmanPotential BregmanPotential::quadratic(Eigen::MatrixXd a) {
  if (a.rows() != a.cols() || a.rows() < 1) {
    throw ContractError("quadratic potential: matrix must be square");
  }
  if (!a.isApprox(a.transpose(), 1e-12)) {
    throw ContractError("quadratic potential: matrix must be symmetric");
  }
  auto dense = std::make_shared<Eigen::MatrixXd>(std::move(a));
  auto llt = std::make_shared<Eigen::LLT<Eigen::MatrixXd>>(*dense);
  if (llt->info() != Eigen::Success) {
    throw ContractError("quadratic potential: matrix is not positive definite");
  }
  BregmanPotential p(PotentialKind::Quadratic, dense->rows());
  p.dense_ = std::move(dense);
  p.llt_ = std::move(llt);
  return p;
}

BregmanPotential BregmanPotential::shannon(Index dim) {
  if (dim < 1) throw ContractError("shannon potential: dim must be >= 1");
  return BregmanPotential(PotentialKind::Shannon, dim);
}

BregmanPotential BregmanPotential::burg(Index dim) {
  if (dim < 1) throw ContractError("burg potential: dim must be >= 1");
  return BregmanPotential(PotentialKind::Burg, dim);
}

BregmanPotential BregmanPotential::scaled(double c) const {
  if (!(c > 0.0)) throw ContractError("potential scale must be positive");
  BregmanPotential out = *this;
  out.scale_ *= c;
  return out;
}

bool BregmanPotential::in_domain(const Vec& p) const {
  if (p.size() != dim_ || !p.allFinite()) return false;
  if (kind_ != PotentialKind::Quadratic && !(p.minCoeff() > 0.0)) return false;
  return true;
}

void BregmanPotential::check_domain(const Vec& p) const {
  if (!in_domain(p)) {
    throw DomainError(std::string("point outside domain of ") +
                      kind_name(kind_) + " potential");
  }
}

void BregmanPotential::check_dim(const Vec& v, const char* what) const {
  if (v.size() != dim_) {
    throw ContractError(std::string(what) + ": length mismatch");
  }
}

double BregmanPotential::value(const Vec& p) const {
  check_domain(p);
  switch (kind_) {
    case PotentialKind::Quadratic:
      if (dense_) return scale_ * 0.5 * p.dot(*dense_ * p);
      return scale_ * 0.5 * p.dot(diag_.cwiseProduct(p));
    case PotentialKind::Shannon:
      return scale_ * (p.array() * p.array().log() - p.array()).sum();
    case PotentialKind::Burg:
      return -scale_ * p.array().log().sum();
  }
  return 0.0;
}

Vec BregmanPotential::gradient(const Vec& p) const {
  check_domain(p);
  switch (kind_) {
    case PotentialKind::Quadratic:
      if (dense_) return scale_ * (*dense_ * p);
      return scale_ * diag_.cwiseProduct(p);
    case PotentialKind::Shannon: {
      Vec out(dim_);
      for (Index i = 0; i < dim_; ++i) out[i] = scale_ * std::log(p[i]);
      return out;
    }
    case PotentialKind::Burg:
      return (-scale_ / p.array()).matrix();
  }
  return {};
}

Vec BregmanPotential::hessian_vec(const Vec& p, const Vec& v) const {
  check_domain(p);
  check_dim(v, "hessian_vec");
  switch (kind_) {
    case PotentialKind::Quadratic:
      if (dense_) return scale_ * (*dense_ * v);
      return scale_ * diag_.cwiseProduct(v);
    case PotentialKind::Shannon:
      return scale_ * v.cwiseQuotient(p);
    case PotentialKind::Burg:
      return scale_ * v.cwiseQuotient(p.cwiseProduct(p));
  }
  return {};
}

Vec BregmanPotential::hessian_solve(const Vec& p, const Vec& v) const {
  check_domain(p);
  check_dim(v, "hessian_solve");
  switch (kind_) {
    case PotentialKind::Quadratic:
      if (dense_) return llt_->solve(v) / scale_;
      return v.cwiseQuotient(diag_) / scale_;
    case PotentialKind::Shannon:
      return v.cwiseProduct(p) / scale_;
    case PotentialKind::Burg:
      return v.cwiseProduct(p).cwiseProduct(p) / scale_;
  }
  return {};
}

Vec BregmanPotential::grad_inverse(const Vec& z) const {
  check_dim(z, "grad_inverse");
  if (!z.allFinite()) {
    throw ContractError("grad_inverse: non-finite dual vector");
  }
  switch (kind_) {
    case PotentialKind::Quadratic:
      if (dense_) return llt_->solve(z) / scale_;
      return z.cwiseQuotient(diag_) / scale_;
    case PotentialKind::Shannon:
      return (z / scale_).array().exp().matrix();
    case PotentialKind::Burg:
      if (!(z.maxCoeff() < 0.0)) {
        throw RangeError(
            "burg grad_inverse: dual vector outside the strictly negative "
            "orthant");
      }
      return (-scale_ / z.array()).matrix();
  }
  return {};
}

double BregmanPotential::divergence(const Vec& p, const Vec& q) const {
  check_domain(p);
  check_domain(q);
  switch (kind_) {
    case PotentialKind::Quadratic: {
      const Vec d = p - q;
      if (dense_) return scale_ * 0.5 * d.dot(*dense_ * d);
      return scale_ * 0.5 * d.dot(diag_.cwiseProduct(d));
    }
    case PotentialKind::Shannon: {
      const auto r = (p.array() / q.array()).log();
      return scale_ * (p.array() * r - p.array() + q.array()).sum();
    }
    case PotentialKind::Burg: {
      const auto r = p.array() / q.array();
      return scale_ * (r - r.log() - 1.0).sum();
    }
  }
  return 0.0;
}

Vec BregmanPotential::dual_exp(const Vec& p, const Vec& v,
                               bool* clamped) const {
  check_domain(p);
  check_dim(v, "dual_exp");
  if (clamped) *clamped = false;
  // The scale cancels: grad and hessian of c*psi both carry c, and the
  // inverse mirror map divides it back out.
  switch (kind_) {
    case PotentialKind::Quadratic:
      return p + v;
    case PotentialKind::Shannon: {
      const double cap = dual_increment_clamp();
      Vec out(dim_);
      for (Index i = 0; i < dim_; ++i) {
        double d = v[i] / p[i];
        if (std::abs(d) > cap) {
          d = d > 0.0 ? cap : -cap;
          if (clamped) *clamped = true;
        }
        out[i] = p[i] * std::exp(d);
      }
      return out;
    }
    case PotentialKind::Burg: {
      // dual target -1/p + v/p^2 must stay strictly negative
      Vec z = (v.array() / p.array().square() - p.array().inverse()).matrix();
      if (!(z.maxCoeff() < 0.0)) {
        throw RangeError(
            "burg dual_exp: direction leaves the gradient range (v_i >= p_i)");
      }
      return (-z.array().inverse()).matrix();
    }
  }
  return {};
}

Vec BregmanPotential::dual_line(const Vec& p, const Vec& v, double t,
                                bool* clamped) const {
  return dual_exp(p, t * v, clamped);
}

Vec BregmanPotential::mirror_step_unchecked(const Vec& p, const Vec& grad,
                                            double inv_step) const {
  switch (kind_) {
    case PotentialKind::Quadratic:
      if (dense_) return p - llt_->solve(grad) / (inv_step * scale_);
      return p - grad.cwiseQuotient(diag_) / (inv_step * scale_);
    case PotentialKind::Shannon: {
      Vec out(dim_);
      const double c = inv_step * scale_;
      for (Index i = 0; i < dim_; ++i) {
        out[i] = p[i] * std::exp(-grad[i] / c);
      }
      return out;
    }
    case PotentialKind::Burg: {
      // dual update -scale/p - grad/inv_step, inverted without range checks
      Vec z = (-scale_ / p.array() - grad.array() / inv_step).matrix();
      return (-scale_ / z.array()).matrix();
    }
  }
  return {};
}

Vec BregmanPotential::hessian_sqrt_apply_t(const Vec& p, const Vec& v) const {
  check_domain(p);
  check_dim(v, "hessian_sqrt_apply_t");
  const double s = std::sqrt(scale_);
  switch (kind_) {
    case PotentialKind::Quadratic:
      if (dense_) {
        Vec out = llt_->matrixL().transpose() * v;
        return Vec(s * out);
      }
      return s * diag_.array().sqrt().matrix().cwiseProduct(v);
    case PotentialKind::Shannon:
      return s * v.cwiseQuotient(p.array().sqrt().matrix());
    case PotentialKind::Burg:
      return s * v.cwiseQuotient(p);
  }
  return {};
}

Vec BregmanPotential::hessian_sqrt_solve(const Vec& p, const Vec& v) const {
  check_domain(p);
  check_dim(v, "hessian_sqrt_solve");
  const double s = std::sqrt(scale_);
  switch (kind_) {
    case PotentialKind::Quadratic:
      if (dense_) {
        Vec out = v;
        llt_->matrixL().solveInPlace(out);
        return out / s;
      }
      return v.cwiseQuotient(diag_.array().sqrt().matrix()) / s;
    case PotentialKind::Shannon:
      return v.cwiseProduct(p.array().sqrt().matrix()) / s;
    case PotentialKind::Burg:
      return v.cwiseProduct(p) / s;
  }
  return {};
}

Vec BregmanPotential::hessian_sqrt_solve_t(const Vec& p, const Vec& v) const {
  if (kind_ == PotentialKind::Quadratic && dense_) {
    check_domain(p);
    check_dim(v, "hessian_sqrt_solve_t");
    Vec out = v;
    llt_->matrixL().transpose().solveInPlace(out);
    return out / std::sqrt(scale_);
  }
  // diagonal factors are symmetric
  return hessian_sqrt_solve(p, v);
}

}  // namespace cmd
