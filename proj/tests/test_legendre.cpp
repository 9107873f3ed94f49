#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "phdae/legendre.hpp"
#include "phdae/numerics.hpp"
#include "phdae/sampling.hpp"

using namespace phdae;

namespace {

// Numerically biconjugate: P**(x) = e*^T x - P*(e*) where e* solves
// grad P*(e) = x, i.e. the transform's minimizer point equals x. Test-only
// oracle, independent of the closed-form identities it cross-checks.
double biconjugate(const ExprTree& p, const Vec& x) {
  const int n = p.arity();
  Vec e = p.grad(x);  // start near the answer but let Newton do the work
  VecFn residual = [&](const Vec& ev) { return legendre(p, ev, x).point - x; };
  MatFn jacobian = [&](const Vec& ev) {
    const LegendreResult r = legendre(p, ev, x);
    // d x*/d e = (hess P(x*))^{-1}
    const Mat h = p.hessian(r.point);
    Mat inv(n, n);
    for (int c = 0; c < n; ++c) {
      Vec unit(static_cast<std::size_t>(n), 0.0);
      unit[static_cast<std::size_t>(c)] = 1.0;
      const Vec col = solve_linear(h, unit);
      for (int r2 = 0; r2 < n; ++r2) inv(r2, c) = col[static_cast<std::size_t>(r2)];
    }
    return inv;
  };
  const Vec e_star = newton_solve(residual, jacobian, e, NewtonConfig{1e-11, 60, 20});
  const LegendreResult star = legendre(p, e_star, x);
  return dot(e_star, x) - star.value;
}

}  // namespace

TEST_CASE("legendre transform of quadratics and exponentials") {
  ExprTree half_sq = parse("0.5*x^2", {"x"});
  const LegendreResult r1 = legendre(half_sq, Vec{2.0});
  CHECK(r1.point[0] == doctest::Approx(2.0));
  CHECK(r1.value == doctest::Approx(2.0));

  ExprTree sq = parse("x^2", {"x"});
  const LegendreResult r2 = legendre(sq, Vec{2.0});
  CHECK(r2.point[0] == doctest::Approx(1.0));
  CHECK(r2.value == doctest::Approx(1.0));

  ExprTree ex = parse("exp(x)", {"x"});
  const LegendreResult r3 = legendre(ex, Vec{1.0});
  CHECK(r3.point[0] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(r3.value == doctest::Approx(-1.0));
}

TEST_CASE("non-convex points raise instead of lying") {
  ExprTree cubic = parse("x^3", {"x"});
  CHECK_THROWS_AS(legendre(cubic, Vec{0.0}, Vec{0.0}), NonConvexPoint);
}

TEST_CASE("inverse identity: grad P* inverts grad P") {
  CHECK(legendre_inverse_check(parse("0.5*x^2", {"x"}), Vec{3.0}) <= 1e-10);
  CHECK(legendre_inverse_check(parse("x^4", {"x"}), Vec{1.0}) <= 1e-9);
  CHECK(legendre_inverse_check(parse("x^2 + exp(x)", {"x"}), Vec{0.5}) <= 1e-9);
}

TEST_CASE("tilde closed form") {
  CHECK(tilde(parse("x^2", {"x"}), Vec{3.0}) == doctest::Approx(9.0));
  CHECK(tilde(parse("x^4", {"x"}), Vec{1.0}) == doctest::Approx(3.0));
  CHECK(tilde(parse("2*x + 1", {"x"}), Vec{5.0}) == doctest::Approx(-1.0));
}

TEST_CASE("tilde gradient identity grad P~ = hess P x") {
  CHECK(tilde_grad_check(parse("x^4", {"x"}), Vec{1.0}) <= 1e-12);
  // two-variable quadratic: both sides equal Q x exactly
  ExprTree quad = parse("x^2 + 0.5*y^2 + 0.25*x*y", {"x", "y"});
  CHECK(tilde_grad_check(quad, Vec{0.7, -0.4}) <= 1e-12);
  CHECK(tilde_grad_check(parse("sin(x)", {"x"}), Vec{0.3}) <= 1e-10);
}

TEST_CASE("partial legendre transforms") {
  // P = x1^2/2 + x2^2/2 + x1 x2, transform in x2 at (x1, e2) = (1, 2)
  ExprTree p = parse("0.5*x1^2 + 0.5*x2^2 + x1*x2", {"x1", "x2"});
  const LegendreResult r = partial_legendre(p, {0}, {1}, Vec{1.0}, Vec{2.0});
  CHECK(r.point[0] == doctest::Approx(1.0));
  CHECK(r.value == doctest::Approx(0.0).epsilon(1e-12));

  // separable: e_J^T x_J - P(x_I, x_J) transforms the x2 part and carries
  // the untouched -P(x_I, .) term along
  ExprTree sep = parse("0.5*x1^2 + 0.5*x2^2", {"x1", "x2"});
  const LegendreResult ra = partial_legendre(sep, {0}, {1}, Vec{0.3}, Vec{0.8});
  const LegendreResult rb = partial_legendre(sep, {0}, {1}, Vec{-1.1}, Vec{0.8});
  CHECK(ra.point[0] == doctest::Approx(0.8));
  CHECK(ra.value == doctest::Approx(0.5 * 0.8 * 0.8 - 0.5 * 0.3 * 0.3));
  CHECK(rb.value == doctest::Approx(0.5 * 0.8 * 0.8 - 0.5 * 1.1 * 1.1));
  // the x2-transform itself is the same in both: value + P(x_I, 0-part)
  CHECK(ra.value + 0.5 * 0.3 * 0.3 == doctest::Approx(rb.value + 0.5 * 1.1 * 1.1));

  ExprTree quart = parse("x2^4 + x1", {"x1", "x2"});
  const LegendreResult rq = partial_legendre(quart, {0}, {1}, Vec{0.0}, Vec{4.0}, Vec{0.5});
  CHECK(rq.point[0] == doctest::Approx(1.0));
  CHECK(rq.value == doctest::Approx(3.0));
}

TEST_CASE("effective hamiltonian of a generating function") {
  ExprTree v = parse("0.5*x1^2 - 0.5*e2^2", {"x1", "e2"});
  CHECK(effective_hamiltonian(v, 1, Vec{1.0}, Vec{3.0}) == doctest::Approx(5.0));

  // V independent of e_J: H~ = V
  ExprTree vx = parse("0.5*x1^2", {"x1", "e2"});
  CHECK(effective_hamiltonian(vx, 1, Vec{2.0}, Vec{9.0}) == doctest::Approx(2.0));

  ExprTree vb = parse("e2*x1", {"x1", "e2"});
  CHECK(effective_hamiltonian(vb, 1, Vec{2.0}, Vec{5.0}) == doctest::Approx(0.0));
}

TEST_CASE("involution P** = P on strictly convex polynomials") {
  ExprTree p1 = parse("0.5*x^2", {"x"});
  ExprTree p2 = parse("x^2 + 0.25*x^4", {"x"});
  for (int s = 0; s < 21; ++s) {
    const double x = -1.0 + 2.0 * s / 20.0;
    CHECK(std::abs(biconjugate(p1, Vec{x}) - p1.eval(Vec{x})) <= 1e-7);
    CHECK(std::abs(biconjugate(p2, Vec{x}) - p2.eval(Vec{x})) <= 1e-7);
  }
}

TEST_CASE("identity grid: inverse, closed form, gradient identities") {
  const std::vector<ExprTree> ps = {
      parse("0.5*x^2", {"x"}),
      parse("x^2 + 0.25*x^4", {"x"}),
      parse("x^2 + 0.1*x^4 + 0.3*x", {"x"}),
  };
  for (const ExprTree& p : ps) {
    Vec guess{-1.0};
    for (int s = 0; s < 21; ++s) {
      const double x = -1.0 + 2.0 * s / 20.0;
      const Vec xv{x};
      CHECK(legendre_inverse_check(p, xv) <= 1e-9);
      const LegendreResult lr = legendre(p, p.grad(xv), guess);
      CHECK(std::abs(lr.value - tilde(p, xv)) <= 1e-8);
      CHECK(tilde_grad_check(p, xv) <= 1e-10);
      guess = xv;  // warm-started sweep
    }
  }
}

TEST_CASE("quadratic special case: P~ = P to machine precision") {
  ExprTree q1 = parse("x^2", {"x"});
  ExprTree q2 = parse("x^2 + x*y + 1.5*y^2", {"x", "y"});
  for (int s = 0; s < 21; ++s) {
    const double a = -1.0 + 2.0 * s / 20.0;
    CHECK(std::abs(tilde(q1, Vec{a}) - q1.eval(Vec{a})) <= 1e-12);
    CHECK(std::abs(tilde(q2, Vec{a, -0.5 * a}) - q2.eval(Vec{a, -0.5 * a})) <= 1e-12);
  }
}

TEST_CASE("I-empty special case: V - e grad V = -V~ exactly") {
  ExprTree v = parse("0.5*e1^2 + 0.25*e1^4 + 0.3*e1", {"e1"});
  for (int s = 0; s < 21; ++s) {
    const double e = -1.0 + 2.0 * s / 20.0;
    const Vec ev{e};
    const double lhs = v.eval(ev) - e * v.grad(ev)[0];
    CHECK(std::abs(lhs + tilde(v, ev)) <= 1e-12);
    // the same number through the effective-Hamiltonian path (n_i = 0)
    CHECK(std::abs(effective_hamiltonian(v, 0, Vec{}, ev) - lhs) <= 1e-12);
  }
}

TEST_CASE("invertible chart: H~ equals minus the partial transform of V") {
  // V(x1, e2) = x1^2/2 - e2^2/2 generates the graph of grad(x1^2/2 + x2^2/2)
  ExprTree v = parse("0.5*x1^2 - 0.5*e2^2", {"x1", "e2"});
  for (double x1 = -1.0; x1 <= 1.0; x1 += 0.25)
    for (double x2 = -1.0; x2 <= 1.0; x2 += 0.25) {
      // invert x2 = -dV/de2 = e2
      const double e2 = x2;
      const double h_tilde = effective_hamiltonian(v, 1, Vec{x1}, Vec{e2});
      // partial transform of V in its second slot at conjugate value -x2
      const LegendreResult r = partial_legendre(v, {0}, {1}, Vec{x1}, Vec{-x2}, Vec{e2});
      CHECK(std::abs(h_tilde + r.value) <= 1e-8);
      const double h = 0.5 * x1 * x1 + 0.5 * x2 * x2;
      CHECK(h_tilde == doctest::Approx(h).epsilon(1e-10));
    }
}
