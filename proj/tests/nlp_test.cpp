#include <doctest.h>

#include <cmath>
#include <random>

#include "hvac/nlp/ipm.hpp"

using namespace hvac::nlp;
using doctest::Approx;

namespace {

Problem hs071() {
  Problem p;
  const double x0[4] = {1, 5, 5, 1};
  for (double v : x0) p.add_variable(1.0, 5.0, v);
  p.add_objective<4>({0, 1, 2, 3}, [](const auto* x) { return x[0] * x[3] * (x[0] + x[1] + x[2]) + x[2]; });
  p.add_constraint<4>({0, 1, 2, 3}, 25.0, kInf, [](const auto* x) { return x[0] * x[1] * x[2] * x[3]; });
  p.add_constraint<4>({0, 1, 2, 3}, 40.0, 40.0,
                      [](const auto* x) { return x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + x[3] * x[3]; });
  return p;
}

IpmOptions tight() {
  IpmOptions o;
  o.tol = 1e-10;
  o.constr_viol_tol = 1e-12;
  o.compl_inf_tol = 1e-10;
  o.stage_ordering = false;
  return o;
}

}  // namespace

TEST_CASE("HS071") {
  Problem p = hs071();
  const IpmResult r = solve_ipm(p, tight());
  REQUIRE(r.status == Status::Optimal);
  CHECK(r.objective == Approx(17.014017145).epsilon(1e-8));
  CHECK(r.x[0] == Approx(1.0).epsilon(1e-7));
  CHECK(r.x[1] == Approx(4.742999637).epsilon(1e-7));
  CHECK(r.x[2] == Approx(3.821149984).epsilon(1e-7));
  CHECK(r.x[3] == Approx(1.379408291).epsilon(1e-7));
  CHECK(r.primal_inf < 1e-10);
}

TEST_CASE("warm start from an optimum converges in a few iterations") {
  Problem p = hs071();
  const IpmResult cold = solve_ipm(p, tight());
  REQUIRE(cold.status == Status::Optimal);
  IpmStart s{cold.x, cold.y, cold.zL, cold.zU};
  const IpmResult warm = solve_ipm(p, tight(), &s);
  REQUIRE(warm.status == Status::Optimal);
  CHECK(warm.iterations <= 10);
  CHECK(warm.iterations < cold.iterations);
  CHECK(warm.objective == Approx(cold.objective).epsilon(1e-9));
}

TEST_CASE("Rosenbrock") {
  Problem p;
  p.add_variable(-kInf, kInf, -1.2);
  p.add_variable(-kInf, kInf, 1.0);
  p.add_objective<2>({0, 1}, [](const auto* x) {
    auto a = 1.0 - x[0];
    auto b = x[1] - x[0] * x[0];
    return a * a + 100.0 * b * b;
  });
  const IpmResult r = solve_ipm(p, tight());
  REQUIRE(r.status == Status::Optimal);
  CHECK(r.x[0] == Approx(1.0).epsilon(1e-8));
  CHECK(r.x[1] == Approx(1.0).epsilon(1e-8));
}

TEST_CASE("box-constrained quadratic reduces to clipping") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> U(-1.0, 2.0);
  Problem p;
  std::vector<double> c(30);
  for (int i = 0; i < 30; ++i) {
    c[i] = U(rng);
    const int v = p.add_variable(0.0, 1.0, 0.5);
    const double ci = c[i];
    p.add_objective<1>({v}, [ci](const auto* x) { return (x[0] - ci) * (x[0] - ci); });
  }
  const IpmResult r = solve_ipm(p, tight());
  REQUIRE(r.status == Status::Optimal);
  for (int i = 0; i < 30; ++i) CHECK(std::abs(r.x[i] - std::clamp(c[i], 0.0, 1.0)) < 1e-8);
}

TEST_CASE("projection onto a hyperplane") {
  const int n = 6;
  const double a[n] = {1.0, -2.0, 0.5, 3.0, 1.5, -1.0};
  const double q[n] = {0.3, 1.0, -2.0, 0.7, 0.0, 4.0};
  const double b = 2.5;
  Problem p;
  for (int i = 0; i < n; ++i) {
    const int v = p.add_variable(-kInf, kInf, 0.0);
    const double qi = q[i];
    p.add_objective<1>({v}, [qi](const auto* x) { return 0.5 * (x[0] - qi) * (x[0] - qi); });
  }
  p.add_constraint<6>({0, 1, 2, 3, 4, 5}, b, b, [a](const auto* x) {
    auto s = a[0] * x[0];
    for (int i = 1; i < 6; ++i) s = s + a[i] * x[i];
    return s;
  });
  const IpmResult r = solve_ipm(p, tight());
  REQUIRE(r.status == Status::Optimal);
  double aq = 0.0, aa = 0.0;
  for (int i = 0; i < n; ++i) {
    aq += a[i] * q[i];
    aa += a[i] * a[i];
  }
  for (int i = 0; i < n; ++i) CHECK(std::abs(r.x[i] - (q[i] - a[i] * (aq - b) / aa)) < 1e-8);
  // Multiplier of the row equals the scaled residual, up to the sign convention.
  CHECK(std::abs(std::abs(r.y[0]) - std::abs(aq - b) / aa) < 1e-7);
}

TEST_CASE("active inequality on a disc") {
  Problem p;
  p.add_variable(-kInf, kInf, 0.2);
  p.add_variable(-kInf, kInf, 0.1);
  p.add_objective<2>({0, 1}, [](const auto* x) { return x[0] + x[1]; });
  p.add_constraint<2>({0, 1}, -kInf, 2.0, [](const auto* x) { return x[0] * x[0] + x[1] * x[1]; });
  const IpmResult r = solve_ipm(p, tight());
  REQUIRE(r.status == Status::Optimal);
  CHECK(r.x[0] == Approx(-1.0).epsilon(1e-7));
  CHECK(r.x[1] == Approx(-1.0).epsilon(1e-7));
}

TEST_CASE("an infeasible problem is not reported optimal") {
  Problem p;
  p.add_variable(0.0, 1.0, 0.5);
  p.add_objective<1>({0}, [](const auto* x) { return x[0] * x[0]; });
  p.add_constraint<1>({0}, 2.0, kInf, [](const auto* x) { return x[0]; });
  IpmOptions o = tight();
  o.max_iter = 200;
  const IpmResult r = solve_ipm(p, o);
  CHECK(r.status != Status::Optimal);
}

TEST_CASE("assembled derivatives match central differences") {
  Problem p = hs071();
  p.finalize();
  const std::vector<double> x{1.3, 4.1, 3.3, 1.7};
  std::vector<double> grad(4), jac(p.jacobian_nnz());
  p.gradient(x.data(), grad.data());
  p.jacobian(x.data(), jac.data());
  std::vector<int> rows, cols;
  p.jacobian_structure(rows, cols);
  for (int j = 0; j < 4; ++j) {
    auto xp = x, xm = x;
    xp[j] += 1e-6;
    xm[j] -= 1e-6;
    CHECK(grad[j] == Approx((p.objective(xp.data()) - p.objective(xm.data())) / 2e-6).epsilon(1e-6));
    std::vector<double> gp(2), gm(2);
    p.constraints(xp.data(), gp.data());
    p.constraints(xm.data(), gm.data());
    for (std::size_t e = 0; e < rows.size(); ++e) {
      if (cols[e] != j) continue;
      CHECK(jac[e] == Approx((gp[rows[e]] - gm[rows[e]]) / 2e-6).epsilon(1e-6));
    }
  }
}

TEST_CASE("problem assembly errors") {
  Problem p;
  CHECK_THROWS_AS(p.add_variable(1.0, 0.0, 0.5), std::invalid_argument);
  p.add_variable(0.0, 1.0, 0.5);
  CHECK_THROWS_AS(p.add_objective<2>({0, 0}, [](const auto* x) { return x[0] * x[1]; }), std::invalid_argument);
  CHECK_THROWS_AS(p.add_constraint<1>({0}, 2.0, 1.0, [](const auto* x) { return x[0]; }), std::invalid_argument);
}
