#include <catch2/catch_amalgamated.hpp>

#include "lpsim/poly.hpp"
#include "test_util.hpp"

using namespace lpsim;
using lpsim::test::random_vec;

TEST_CASE("polynomial arithmetic") {
  const PolyR3 p1 = PolyR3::variable(0);
  const PolyR3 p2 = PolyR3::variable(1);
  const PolyR3 p3 = PolyR3::variable(2);

  // (p1 + p2)^2 = p1^2 + 2 p1 p2 + p2^2
  const PolyR3 sq = (p1 + p2) * (p1 + p2);
  REQUIRE(sq.coeff({2, 0, 0}) == 1.0);
  REQUIRE(sq.coeff({1, 1, 0}) == 2.0);
  REQUIRE(sq.coeff({0, 2, 0}) == 1.0);
  REQUIRE(sq.coeff({0, 0, 2}) == 0.0);

  // exact cancellation removes terms
  const PolyR3 zero = sq - sq;
  REQUIRE(zero.is_zero());

  const PolyR3 q = 3.0 * (p1 * p2 * p3) - PolyR3(1.0);
  const Vec3 at(2.0, -1.0, 0.5);
  REQUIRE(q.eval(at) == Catch::Approx(3.0 * 2.0 * -1.0 * 0.5 - 1.0).epsilon(1e-15));
}

TEST_CASE("gradient and Hessian agree with finite differences") {
  Rng rng(41);
  // random sparse polynomial of degree <= 4
  PolyR3 q;
  for (int i = 0; i < 12; ++i) {
    PolyR3::Exponent e{int(rng.next_u64() % 3), int(rng.next_u64() % 3), int(rng.next_u64() % 2)};
    q += PolyR3::monomial(e, rng.uniform(-2, 2));
  }

  const double h = 1e-6;
  for (int trial = 0; trial < 10; ++trial) {
    const Vec3 p = random_vec(rng, -1.5, 1.5);
    const Vec3 g = q.grad_eval(p);
    for (int a = 0; a < 3; ++a) {
      Vec3 pp = p, pm = p;
      pp[a] += h;
      pm[a] -= h;
      const double fd = (q.eval(pp) - q.eval(pm)) / (2 * h);
      REQUIRE(g[a] == Catch::Approx(fd).margin(1e-7));
    }
    const Mat3 H = q.hess_eval(p);
    REQUIRE((H - H.transpose()).norm() < 1e-12);
    for (int a = 0; a < 3; ++a) {
      Vec3 pp = p, pm = p;
      pp[a] += h;
      pm[a] -= h;
      const Vec3 fd = (q.grad_eval(pp) - q.grad_eval(pm)) / (2 * h);
      REQUIRE((H.col(a) - fd).norm() < 1e-6);
    }
  }

  // gradient of a constant is zero; diff drops the term
  REQUIRE(PolyR3(5.0).diff(1).is_zero());
}

TEST_CASE("series arithmetic truncates consistently") {
  const PolyR3 one(1.0);
  const PolyR3 p1 = PolyR3::variable(0);

  // s = 1 + t p1; s^2 = 1 + 2 t p1 + t^2 p1^2, truncated at order 2
  TSeries s(2);
  s[0] = one;
  s[1] = p1;
  const TSeries sq = s * s;
  REQUIRE(sq[0].coeff({0, 0, 0}) == 1.0);
  REQUIRE(sq[1].coeff({1, 0, 0}) == 2.0);
  REQUIRE(sq[2].coeff({2, 0, 0}) == 1.0);

  // truncation: (t^2 p1) * (t p1) at order 2 contributes nothing
  TSeries a(2), b(2);
  a[2] = p1;
  b[1] = p1;
  const TSeries prod = a * b;
  for (int k = 0; k <= 2; ++k) REQUIRE(prod[k].is_zero());
}

TEST_CASE("deterministic iteration order") {
  // identical construction in different insertion orders compares equal
  PolyR3 a = PolyR3::monomial({1, 2, 0}, 0.5) + PolyR3::monomial({0, 0, 3}, -1.0);
  PolyR3 b = PolyR3::monomial({0, 0, 3}, -1.0) + PolyR3::monomial({1, 2, 0}, 0.5);
  REQUIRE(a == b);
}
