#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "cmd/errors.hpp"
#include "cmd/linop.hpp"
#include "cmd/rng.hpp"

using cmd::LinearOperator;
using cmd::SolveReport;
using cmd::Vec;

namespace {

LinearOperator dense_op(const Eigen::MatrixXd& a, bool spd = false) {
  LinearOperator op;
  op.dim = a.rows();
  op.symmetric_positive_definite = spd;
  op.apply = [a](const Vec& v) { return Vec(a * v); };
  return op;
}

Eigen::MatrixXd random_spd(Eigen::Index n, std::uint64_t seed) {
  const Vec draws = cmd::gaussian(seed, n * n);
  Eigen::Map<const Eigen::MatrixXd> m(draws.data(), n, n);
  return m.transpose() * m + Eigen::MatrixXd::Identity(n, n);
}

}  // namespace

TEST_CASE("cg solves the identity system in one application") {
  const auto op = dense_op(Eigen::MatrixXd::Identity(3, 3), true);
  Vec rhs(3);
  rhs << 1, 2, 3;
  const SolveReport rep = cmd::solve_cg(op, rhs, 1e-10, 30);
  CHECK(rep.converged);
  CHECK(rep.iterations == 1);
  CHECK((rep.solution - rhs).norm() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("cg solves a diagonal system") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2, 2);
  a(0, 0) = 2;
  a(1, 1) = 4;
  Vec rhs(2);
  rhs << 2, 4;
  const SolveReport rep = cmd::solve_cg(dense_op(a, true), rhs, 1e-12, 20);
  CHECK(rep.converged);
  CHECK(rep.solution(0) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(rep.solution(1) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("cg matches direct 2x2 inversion") {
  Eigen::MatrixXd a(2, 2);
  a << 2, 1, 1, 2;
  Vec rhs(2);
  rhs << 3, 3;
  // direct inversion oracle: A^-1 = [[2,-1],[-1,2]]/3
  Eigen::MatrixXd ainv(2, 2);
  ainv << 2, -1, -1, 2;
  ainv /= 3.0;
  const Vec expected = ainv * rhs;
  const SolveReport rep = cmd::solve_cg(dense_op(a, true), rhs, 1e-12, 20);
  CHECK(rep.converged);
  CHECK((rep.solution - expected).norm() < 1e-10);
  CHECK(expected(0) == doctest::Approx(1.0));
  CHECK(expected(1) == doctest::Approx(1.0));
}

TEST_CASE("cg residual contract holds") {
  const Eigen::MatrixXd a = random_spd(20, 7);
  const Vec rhs = cmd::gaussian(8, 20);
  const SolveReport rep = cmd::solve_cg(dense_op(a, true), rhs, 1e-10, 200);
  CHECK(rep.converged);
  CHECK((a * rep.solution - rhs).norm() <= 1e-9 * rhs.norm());
}

TEST_CASE("gmres solves an upper triangular system") {
  Eigen::MatrixXd a(2, 2);
  a << 1, 1, 0, 1;
  Vec rhs(2);
  rhs << 2, 1;
  // direct solve oracle: x2 = 1, x1 = 2 - 1 = 1
  const SolveReport rep = cmd::solve_gmres(dense_op(a), rhs, 1e-12, 20);
  CHECK(rep.converged);
  CHECK(rep.solution(0) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(rep.solution(1) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("gmres on the identity returns the rhs") {
  const Vec rhs = cmd::gaussian(3, 6);
  const SolveReport rep =
      cmd::solve_gmres(dense_op(Eigen::MatrixXd::Identity(6, 6)), rhs, 1e-12, 60);
  CHECK(rep.converged);
  CHECK((rep.solution - rhs).norm() < 1e-12);
}

TEST_CASE("gmres reports non-convergence on a singular operator") {
  Vec rhs(2);
  rhs << 1, 0;
  const SolveReport rep =
      cmd::solve_gmres(dense_op(Eigen::MatrixXd::Zero(2, 2)), rhs, 1e-10, 20);
  CHECK_FALSE(rep.converged);
}

TEST_CASE("solvers validate their inputs") {
  const auto op = dense_op(Eigen::MatrixXd::Identity(3, 3), true);
  Vec wrong(2);
  wrong << 1, 2;
  CHECK_THROWS_AS(cmd::solve_cg(op, wrong, 1e-8, 10), cmd::ContractError);
  CHECK_THROWS_AS(cmd::solve_gmres(op, wrong, 1e-8, 10), cmd::ContractError);
  Vec bad(3);
  bad << 1, std::nan(""), 0;
  CHECK_THROWS_AS(cmd::solve_cg(op, bad, 1e-8, 10), cmd::ContractError);
}

TEST_CASE("warm start with the exact solution converges immediately") {
  const Eigen::MatrixXd a = random_spd(10, 3);
  const Vec rhs = cmd::gaussian(4, 10);
  const Vec exact = a.ldlt().solve(rhs);
  const SolveReport rep = cmd::solve_cg(dense_op(a, true), rhs, 1e-8, 100, &exact);
  CHECK(rep.converged);
  CHECK(rep.iterations <= 1);

  const SolveReport repg =
      cmd::solve_gmres(dense_op(a), rhs, 1e-8, 100, &exact);
  CHECK(repg.converged);
  CHECK(repg.iterations <= 1);
}

TEST_CASE("cg and gmres agree on random SPD systems") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Eigen::Index n = 10 + 8 * static_cast<Eigen::Index>(seed);
    const Eigen::MatrixXd a = random_spd(n, 100 + seed);
    const Vec rhs = cmd::gaussian(200 + seed, n);
    const SolveReport r1 = cmd::solve_cg(dense_op(a, true), rhs, 1e-12, 10 * n);
    const SolveReport r2 = cmd::solve_gmres(dense_op(a), rhs, 1e-12, 10 * n);
    REQUIRE(r1.converged);
    REQUIRE(r2.converged);
    CHECK((r1.solution - r2.solution).norm() <= 1e-8 * (1 + r1.solution.norm()));
  }
}

TEST_CASE("gmres matches dense LU on random nonsymmetric systems") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const Eigen::Index n = 5 + 5 * static_cast<Eigen::Index>(seed % 4);
    const Vec draws = cmd::gaussian(300 + seed, n * n);
    Eigen::MatrixXd a = Eigen::Map<const Eigen::MatrixXd>(draws.data(), n, n);
    a += 2.0 * std::sqrt(static_cast<double>(n)) *
         Eigen::MatrixXd::Identity(n, n);  // keep it comfortably nonsingular
    const Vec rhs = cmd::gaussian(400 + seed, n);
    const SolveReport rep = cmd::solve_gmres(dense_op(a), rhs, 1e-12, 10 * n);
    REQUIRE(rep.converged);
    const Vec exact = a.partialPivLu().solve(rhs);
    CHECK((rep.solution - exact).norm() <= 1e-8 * (1.0 + exact.norm()));
  }
}

TEST_CASE("linearity of operators built from matrices") {
  const Eigen::MatrixXd a = random_spd(8, 11);
  const auto op = dense_op(a);
  const Vec u = cmd::gaussian(20, 8);
  const Vec v = cmd::gaussian(21, 8);
  const Vec lhs = op.apply(2.5 * u - 1.25 * v);
  const Vec rhs = 2.5 * op.apply(u) - 1.25 * op.apply(v);
  CHECK((lhs - rhs).norm() <= 1e-10 * (1 + rhs.norm()));
}

TEST_CASE("schur operator with zero coupling is the metric") {
  const auto metric = dense_op(Eigen::MatrixXd::Identity(4, 4), true);
  auto zero_map = [](const Vec&) { return Vec(Vec::Zero(4)); };
  auto pass = [](const Vec& v) { return v; };
  const LinearOperator s = cmd::schur_operator(metric, zero_map, pass, pass);
  const Vec v = cmd::gaussian(30, 4);
  CHECK((s.apply(v) - v).norm() < 1e-14);
}

TEST_CASE("scalar schur value for the 1-D bilinear game") {
  // f = xy, zero-sum: D2xy f = 1, D2yx g = -1; metrics 1/eta on both sides
  const double eta = 0.25;
  LinearOperator metric;
  metric.dim = 1;
  metric.symmetric_positive_definite = true;
  metric.apply = [eta](const Vec& v) { return Vec(v / eta); };
  const LinearOperator s = cmd::schur_operator(
      metric, [](const Vec& v) { return Vec(1.0 * v); },
      [eta](const Vec& v) { return Vec(eta * v); },
      [](const Vec& v) { return Vec(-1.0 * v); }, true);
  Vec one(1);
  one << 1.0;
  // M = 1/eta - (1)(eta)(-1) = 1/eta + eta
  CHECK(s.apply(one)(0) == doctest::Approx(1.0 / eta + eta).epsilon(1e-14));
}

TEST_CASE("schur operator matches dense assembly on a random 3+2 game") {
  const Vec pb = cmd::gaussian(40, 6);
  Eigen::Map<const Eigen::MatrixXd> b(pb.data(), 3, 2);  // D2xy f, maps y->x
  const Eigen::MatrixXd c = -b.transpose();              // zero-sum coupling
  const Eigen::MatrixXd mx = random_spd(3, 41);
  const Eigen::MatrixXd my_inv = random_spd(2, 42).inverse();

  const Eigen::MatrixXd dense = mx - b * my_inv * c;
  const LinearOperator s = cmd::schur_operator(
      dense_op(mx, true), [&](const Vec& v) { return Vec(b * v); },
      [&](const Vec& v) { return Vec(my_inv * v); },
      [&](const Vec& v) { return Vec(c * v); }, true);

  for (std::uint64_t k = 0; k < 5; ++k) {
    const Vec v = cmd::gaussian(50 + k, 3);
    CHECK((s.apply(v) - dense * v).norm() <= 1e-10 * (1 + v.norm()));
  }
}

TEST_CASE("zero-sum schur operators are positive definite") {
  const Vec pb = cmd::gaussian(60, 12);
  Eigen::Map<const Eigen::MatrixXd> b(pb.data(), 4, 3);
  const Eigen::MatrixXd c = -b.transpose();
  const Eigen::MatrixXd mx = random_spd(4, 61);
  const Eigen::MatrixXd my_inv = random_spd(3, 62).inverse();
  const LinearOperator s = cmd::schur_operator(
      dense_op(mx, true), [&](const Vec& v) { return Vec(b * v); },
      [&](const Vec& v) { return Vec(my_inv * v); },
      [&](const Vec& v) { return Vec(c * v); }, true);
  for (std::uint64_t k = 0; k < 100; ++k) {
    Vec v = cmd::gaussian(100 + k, 4);
    if (v.norm() == 0.0) continue;
    CHECK(v.dot(s.apply(v)) > 0.0);
  }
}

TEST_CASE("schur operator rejects mismatched input") {
  const auto metric = dense_op(Eigen::MatrixXd::Identity(3, 3), true);
  const LinearOperator s = cmd::schur_operator(
      metric, [](const Vec& v) { return v; }, [](const Vec& v) { return v; },
      [](const Vec& v) { return v; });
  Vec wrong(2);
  wrong << 1, 2;
  CHECK_THROWS_AS(s.apply(wrong), cmd::ContractError);
}
