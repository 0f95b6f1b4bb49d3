#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "cmd/errors.hpp"
#include "cmd/potentials.hpp"
#include "cmd/rng.hpp"

using cmd::BregmanPotential;
using cmd::PotentialKind;
using cmd::Vec;

namespace {

Vec positive_point(std::uint64_t seed, Eigen::Index n) {
  // log-uniform-ish positive coordinates in roughly [1e-2, 1e2]
  const Vec g = cmd::gaussian(seed, n);
  return (2.0 * g.array().tanh() * std::log(10.0)).exp().matrix();
}

std::vector<BregmanPotential> all_kinds(Eigen::Index n, std::uint64_t seed) {
  const Vec d = positive_point(seed, n);
  const Vec g = cmd::gaussian(seed + 1, n * n);
  Eigen::Map<const Eigen::MatrixXd> m(g.data(), n, n);
  Eigen::MatrixXd a = m.transpose() * m + Eigen::MatrixXd::Identity(n, n);
  return {BregmanPotential::quadratic_identity(n),
          BregmanPotential::quadratic_diagonal(d),
          BregmanPotential::quadratic(a), BregmanPotential::shannon(n),
          BregmanPotential::burg(n)};
}

Vec domain_point(const BregmanPotential& pot, std::uint64_t seed) {
  if (pot.kind() == PotentialKind::Quadratic) return cmd::gaussian(seed, pot.dim());
  return positive_point(seed, pot.dim());
}

}  // namespace

TEST_CASE("potential values at hand points") {
  Vec ones2 = Vec::Ones(2);
  CHECK(BregmanPotential::shannon(2).value(ones2) == doctest::Approx(-2.0));

  Vec p(2);
  p << 3, 4;
  CHECK(BregmanPotential::quadratic_identity(2).value(p) ==
        doctest::Approx(12.5));

  CHECK(BregmanPotential::burg(2).value(ones2) == doctest::Approx(0.0));
}

TEST_CASE("gradients at hand points") {
  Vec ones2 = Vec::Ones(2);
  CHECK(BregmanPotential::shannon(2).gradient(ones2).norm() ==
        doctest::Approx(0.0));

  Vec two(1);
  two << 2;
  CHECK(BregmanPotential::burg(1).gradient(two)(0) == doctest::Approx(-0.5));

  Vec d(2);
  d << 2, 3;
  const Vec g = BregmanPotential::quadratic_diagonal(d).gradient(ones2);
  CHECK(g(0) == doctest::Approx(2.0));
  CHECK(g(1) == doctest::Approx(3.0));
}

TEST_CASE("gradient matches finite differences of value") {
  for (const auto& pot : all_kinds(4, 17)) {
    const Vec p = domain_point(pot, 23);
    const Vec g = pot.gradient(p);
    for (Eigen::Index i = 0; i < 4; ++i) {
      const double h = 1e-6 * (1.0 + std::abs(p[i]));
      Vec pp = p, pm = p;
      pp[i] += h;
      pm[i] -= h;
      const double fd = (pot.value(pp) - pot.value(pm)) / (2.0 * h);
      CHECK(std::abs(g[i] - fd) <= 1e-5 * (1.0 + std::abs(fd)));
    }
  }
}

TEST_CASE("hessian action at hand points") {
  Vec p(1), v(1);
  p << 2;
  v << 1;
  CHECK(BregmanPotential::shannon(1).hessian_vec(p, v)(0) ==
        doctest::Approx(0.5));
  v << 4;
  CHECK(BregmanPotential::burg(1).hessian_vec(p, v)(0) == doctest::Approx(1.0));
}

TEST_CASE("hessian quadratic form matches the divergence curvature") {
  // v' D2psi(p) v equals the second derivative of r -> D(p + r v, p) at 0
  for (const auto& pot : all_kinds(4, 31)) {
    const Vec p = domain_point(pot, 37);
    Vec v = cmd::gaussian(41, 4);
    v *= 0.1 / v.norm();
    const double quad = v.dot(pot.hessian_vec(p, v));
    const double h = 1e-3;
    const double fd =
        (pot.divergence(p + h * v, p) + pot.divergence(p - h * v, p)) /
        (h * h);
    CHECK(std::abs(quad - fd) <= 1e-4 * (1.0 + std::abs(fd)));
  }
}

TEST_CASE("hessian_solve inverts hessian_vec") {
  Vec p(1), v(1);
  p << 2;
  v << 1;
  CHECK(BregmanPotential::shannon(1).hessian_solve(p, v)(0) ==
        doctest::Approx(2.0));
  CHECK(BregmanPotential::quadratic_identity(1).hessian_solve(p, v)(0) ==
        doctest::Approx(1.0));

  for (const auto& pot : all_kinds(5, 51)) {
    const Vec q = domain_point(pot, 53);
    const Vec w = cmd::gaussian(54, 5);
    const Vec roundtrip = pot.hessian_solve(q, pot.hessian_vec(q, w));
    CHECK((roundtrip - w).norm() <= 1e-12 * (1.0 + w.norm()));
  }
}

TEST_CASE("grad_inverse closed forms and range") {
  Vec z(2);
  z << 0, 0;
  const Vec p = BregmanPotential::shannon(2).grad_inverse(z);
  CHECK((p - Vec::Ones(2)).norm() < 1e-15);

  Vec zb(1);
  zb << -2;
  CHECK(BregmanPotential::burg(1).grad_inverse(zb)(0) == doctest::Approx(0.5));

  zb << 0.5;
  CHECK_THROWS_AS(BregmanPotential::burg(1).grad_inverse(zb), cmd::RangeError);
}

TEST_CASE("grad_inverse inverts gradient on the domain") {
  for (const auto& pot : all_kinds(4, 71)) {
    const Vec p = domain_point(pot, 73);
    const Vec back = pot.grad_inverse(pot.gradient(p));
    CHECK((back - p).norm() <= 1e-10 * (1.0 + p.norm()));
  }
}

TEST_CASE("divergence closed forms") {
  for (const auto& pot : all_kinds(3, 81)) {
    const Vec p = domain_point(pot, 83);
    CHECK(pot.divergence(p, p) == doctest::Approx(0.0).epsilon(1e-14));
  }

  Vec p(1), q(1);
  p << 2;
  q << 1;
  CHECK(BregmanPotential::shannon(1).divergence(p, q) ==
        doctest::Approx(2.0 * std::log(2.0) - 1.0).epsilon(1e-12));
}

TEST_CASE("dense quadratic divergence equals the quadratic form") {
  const Vec g = cmd::gaussian(90, 9);
  Eigen::Map<const Eigen::MatrixXd> m(g.data(), 3, 3);
  const Eigen::MatrixXd a =
      m.transpose() * m + Eigen::MatrixXd::Identity(3, 3);
  const auto pot = BregmanPotential::quadratic(a);
  const Vec p = cmd::gaussian(91, 3);
  const Vec q = cmd::gaussian(92, 3);
  const double expected = 0.5 * (p - q).dot(a * (p - q));
  CHECK(std::abs(pot.divergence(p, q) - expected) <= 1e-12 * (1 + expected));
}

TEST_CASE("divergence nonnegativity over random pairs") {
  for (const auto& pot : all_kinds(4, 101)) {
    for (std::uint64_t k = 0; k < 1000; ++k) {
      const Vec p = domain_point(pot, 200 + 2 * k);
      const Vec q = domain_point(pot, 201 + 2 * k);
      const double d = pot.divergence(p, q);
      CHECK(d >= 0.0);
      if ((p - q).norm() > 1e-6) CHECK(d > 0.0);
    }
  }
}

TEST_CASE("dual_exp closed forms") {
  for (const auto& pot : all_kinds(3, 111)) {
    const Vec p = domain_point(pot, 113);
    CHECK((pot.dual_exp(p, Vec::Zero(3)) - p).norm() < 1e-15);
  }

  Vec p(1), v(1);
  p << 2;
  v << -2;
  CHECK(BregmanPotential::shannon(1).dual_exp(p, v)(0) ==
        doctest::Approx(2.0 * std::exp(-1.0)).epsilon(1e-14));

  p << 1;
  v << 0.5;
  // by hand: solve -1/q = -1 + 0.5 = -0.5, so q = 2
  CHECK(BregmanPotential::burg(1).dual_exp(p, v)(0) == doctest::Approx(2.0));

  v << 1.0;  // v >= p leaves the gradient range
  CHECK_THROWS_AS(BregmanPotential::burg(1).dual_exp(p, v), cmd::RangeError);
}

TEST_CASE("shannon dual_exp stays strictly positive for large directions") {
  const auto pot = BregmanPotential::shannon(6);
  for (std::uint64_t k = 0; k < 200; ++k) {
    const Vec p = positive_point(300 + 2 * k, 6).cwiseMax(1e-3);
    Vec v = cmd::gaussian(301 + 2 * k, 6);
    v *= 1e3 / v.norm();
    const Vec q = pot.dual_exp(p, v);
    CHECK(q.allFinite());
    CHECK(q.minCoeff() > 0.0);
  }
}

TEST_CASE("dual_exp clamps extreme dual increments and reports it") {
  const auto pot = BregmanPotential::shannon(2);
  Vec p(2), v(2);
  p << 1e-6, 1.0;
  v << 1e6, 0.0;  // dual increment 1e12 on the first coordinate
  bool clamped = false;
  const Vec q = pot.dual_exp(p, v, &clamped);
  CHECK(clamped);
  CHECK(q.allFinite());
  CHECK(q.minCoeff() > 0.0);

  clamped = true;
  (void)pot.dual_exp(p, Vec::Zero(2), &clamped);
  CHECK_FALSE(clamped);
}

TEST_CASE("dual_line endpoints and dual-coordinate affinity") {
  for (const auto& pot : all_kinds(3, 121)) {
    const Vec p = domain_point(pot, 123);
    Vec v = cmd::gaussian(124, 3);
    if (pot.kind() == PotentialKind::Burg) v = 0.1 * p.cwiseProduct(v);

    CHECK((pot.dual_line(p, v, 0.0) - p).norm() < 1e-15);
    CHECK((pot.dual_line(p, v, 1.0) - pot.dual_exp(p, v)).norm() < 1e-15);

    // gradient(dual_line(t)) = gradient(p) + t * hessian_vec(p, v)
    const Vec g0 = pot.gradient(p);
    const Vec hv = pot.hessian_vec(p, v);
    for (double t : {0.25, 0.5, 0.75, 1.0}) {
      const Vec gt = pot.gradient(pot.dual_line(p, v, t));
      CHECK((gt - (g0 + t * hv)).norm() <= 1e-10 * (1.0 + g0.norm() + hv.norm()));
    }
  }
}

TEST_CASE("shannon dual line is affine in dual coordinates") {
  const auto pot = BregmanPotential::shannon(4);
  const Vec p = positive_point(131, 4);
  const Vec v = cmd::gaussian(132, 4);
  const Vec g0 = pot.gradient(pot.dual_line(p, v, 0.0));
  const Vec g05 = pot.gradient(pot.dual_line(p, v, 0.5));
  const Vec g1 = pot.gradient(pot.dual_line(p, v, 1.0));
  CHECK((g05 - 0.5 * (g0 + g1)).norm() <= 1e-10 * (1.0 + g1.norm()));
}

TEST_CASE("scaling cancels inside the dual exponential") {
  for (const auto& pot : all_kinds(3, 141)) {
    const Vec p = domain_point(pot, 143);
    Vec v = cmd::gaussian(144, 3);
    if (pot.kind() == PotentialKind::Burg) v = 0.1 * p.cwiseProduct(v);
    const auto scaled = pot.scaled(7.5);
    CHECK((scaled.dual_exp(p, v) - pot.dual_exp(p, v)).norm() <=
          1e-12 * (1.0 + p.norm()));
    // while gradients and metrics do scale
    CHECK((scaled.gradient(p) - 7.5 * pot.gradient(p)).norm() <=
          1e-12 * (1.0 + pot.gradient(p).norm()));
    CHECK((scaled.hessian_solve(p, v) - pot.hessian_solve(p, v) / 7.5).norm() <=
          1e-12 * (1.0 + v.norm()));
  }
}

TEST_CASE("sqrt factors are congruent to the hessian") {
  for (const auto& pot : all_kinds(4, 151)) {
    const Vec p = domain_point(pot, 153);
    const Vec v = cmd::gaussian(154, 4);
    // W W' = H: check W^-1 H W^-T = Id via solve(solve_t)
    const Vec hv = pot.hessian_vec(p, v);
    const Vec back =
        pot.hessian_sqrt_solve(p, Vec(pot.hessian_vec(
                                      p, pot.hessian_sqrt_solve_t(p, v))));
    CHECK((back - v).norm() <= 1e-10 * (1.0 + v.norm()));
    // W' applied then inverted
    const Vec roundtrip =
        pot.hessian_sqrt_solve_t(p, pot.hessian_sqrt_apply_t(p, v));
    CHECK((roundtrip - v).norm() <= 1e-10 * (1.0 + v.norm()));
    (void)hv;
  }
}

TEST_CASE("domain violations fail loudly") {
  const auto sh = BregmanPotential::shannon(2);
  Vec bad(2);
  bad << 1.0, -0.5;
  CHECK_THROWS_AS(sh.value(bad), cmd::DomainError);
  CHECK_THROWS_AS(sh.gradient(bad), cmd::DomainError);
  CHECK_THROWS_AS(sh.divergence(bad, Vec::Ones(2)), cmd::DomainError);

  Vec zero(2);
  zero << 1.0, 0.0;
  CHECK_THROWS_AS(BregmanPotential::burg(2).hessian_vec(zero, Vec::Ones(2)),
                  cmd::DomainError);
}

TEST_CASE("quadratic construction validates its matrix") {
  Eigen::MatrixXd bad(2, 2);
  bad << 1, 2, 3, 4;  // not symmetric
  CHECK_THROWS_AS(BregmanPotential::quadratic(bad), cmd::ContractError);
  Eigen::MatrixXd indef(2, 2);
  indef << 1, 0, 0, -1;
  CHECK_THROWS_AS(BregmanPotential::quadratic(indef), cmd::ContractError);
  Vec d(2);
  d << 1, 0;
  CHECK_THROWS_AS(BregmanPotential::quadratic_diagonal(d), cmd::ContractError);
}
