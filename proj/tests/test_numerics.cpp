#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "phdae/numerics.hpp"
#include "phdae/sampling.hpp"

using namespace phdae;

TEST_CASE("solve_linear on simple systems") {
  Mat eye = Mat::identity(2);
  const Vec x = solve_linear(eye, Vec{3.0, 4.0});
  CHECK(x[0] == doctest::Approx(3.0));
  CHECK(x[1] == doctest::Approx(4.0));

  Mat d(2, 2);
  d(0, 0) = 2.0;
  d(1, 1) = 4.0;
  const Vec y = solve_linear(d, Vec{2.0, 4.0});
  CHECK(y[0] == doctest::Approx(1.0));
  CHECK(y[1] == doctest::Approx(1.0));

  Mat sing(2, 2);
  sing(0, 0) = sing(0, 1) = sing(1, 0) = sing(1, 1) = 1.0;
  CHECK_THROWS_AS(solve_linear(sing, Vec{1.0, 2.0}), SingularMatrix);
}

TEST_CASE("solve_linear residual on random well-conditioned matrices") {
  std::mt19937_64 rng(kDefaultSeed);
  int checked = 0;
  while (checked < 50) {
    const int n = 2 + static_cast<int>(uniform01(rng) * 4);
    Mat a(n, n);
    for (double& v : a.a) v = 2.0 * uniform01(rng) - 1.0;
    const Vec sigma = svd(a).sigma;
    if (sigma.back() <= 0.0 || sigma.front() / sigma.back() > 1e6) continue;
    Vec b(static_cast<std::size_t>(n));
    for (double& v : b) v = 2.0 * uniform01(rng) - 1.0;
    const Vec x = solve_linear(a, b);
    CHECK(norm2(matvec(a, x) - b) <= 1e-9 * (1.0 + norm2(b)));
    ++checked;
  }
}

TEST_CASE("newton_solve on scalar examples") {
  auto residual1 = [](const Vec& x) { return Vec{x[0] * x[0] - 4.0}; };
  auto jacobian1 = [](const Vec& x) {
    Mat j(1, 1);
    j(0, 0) = 2.0 * x[0];
    return j;
  };
  const Vec r1 = newton_solve(residual1, jacobian1, Vec{3.0});
  CHECK(std::abs(r1[0] - 2.0) <= 1e-10);

  auto residual2 = [](const Vec& x) { return Vec{2.0 * x[0] - 4.0}; };
  auto jacobian2 = [](const Vec&) {
    Mat j(1, 1);
    j(0, 0) = 2.0;
    return j;
  };
  const NewtonResult lin = newton_solve_status(residual2, jacobian2, Vec{0.0});
  CHECK(lin.status == SolveStatus::converged);
  CHECK(lin.iterations == 1);
  CHECK(lin.x[0] == doctest::Approx(2.0));

  // no real root: the solver must fail, not fabricate one
  auto residual3 = [](const Vec& x) { return Vec{x[0] * x[0] + 1.0}; };
  auto jacobian3 = [](const Vec& x) {
    Mat j(1, 1);
    j(0, 0) = 2.0 * x[0];
    return j;
  };
  CHECK_THROWS_AS(newton_solve(residual3, jacobian3, Vec{1.0}), Error);
}

TEST_CASE("newton converges on generated monotone cubics from bracketed starts") {
  std::mt19937_64 rng(kDefaultSeed + 3);
  for (int trial = 0; trial < 50; ++trial) {
    const double a = 0.2 + 1.8 * uniform01(rng);
    const double b = 0.2 + 1.8 * uniform01(rng);
    const double c = 4.0 * uniform01(rng) - 2.0;
    auto residual = [&](const Vec& x) { return Vec{a * x[0] * x[0] * x[0] + b * x[0] + c}; };
    auto jacobian = [&](const Vec& x) {
      Mat j(1, 1);
      j(0, 0) = 3.0 * a * x[0] * x[0] + b;
      return j;
    };
    const double x0 = 4.0 * uniform01(rng) - 2.0;
    const Vec root = newton_solve(residual, jacobian, Vec{x0});
    CHECK(std::abs(residual(root)[0]) <= 1e-10);
  }
}

TEST_CASE("finite difference gradient oracle") {
  const Vec g1 = finite_diff_grad([](const Vec& x) { return x[0] * x[0]; }, Vec{1.0});
  CHECK(std::abs(g1[0] - 2.0) <= 1e-8);

  const Vec g2 = finite_diff_grad([](const Vec&) { return 3.5; }, Vec{0.2, -0.4});
  CHECK(norm_inf(g2) <= 1e-12);

  const Vec g3 = finite_diff_grad([](const Vec& x) { return std::sin(x[0]); }, Vec{0.0});
  CHECK(std::abs(g3[0] - 1.0) <= 1e-8);
}

TEST_CASE("svd, rank and eigenvalues of small matrices") {
  Mat d(3, 3);
  d(0, 0) = 3.0;
  d(1, 1) = 2.0;
  d(2, 2) = 1.0;
  const Vec s = svd(d).sigma;
  CHECK(s[0] == doctest::Approx(3.0));
  CHECK(s[1] == doctest::Approx(2.0));
  CHECK(s[2] == doctest::Approx(1.0));

  Mat rank1(3, 2);
  for (int i = 0; i < 3; ++i) {
    rank1(i, 0) = static_cast<double>(i + 1);
    rank1(i, 1) = 2.0 * static_cast<double>(i + 1);
  }
  CHECK(numerical_rank(rank1) == 1);

  Mat sym(2, 2);
  sym(0, 0) = sym(1, 1) = 2.0;
  sym(0, 1) = sym(1, 0) = 1.0;
  const Vec ev = symmetric_eigenvalues(sym);
  CHECK(ev[0] == doctest::Approx(1.0));
  CHECK(ev[1] == doctest::Approx(3.0));

  CHECK(smallest_singular_value(sym) == doctest::Approx(1.0));
}

TEST_CASE("svd factors reconstruct the matrix") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int rows = 2 + static_cast<int>(uniform01(rng) * 4);
    const int cols = 2 + static_cast<int>(uniform01(rng) * 4);
    Mat a(rows, cols);
    for (double& v : a.a) v = 2.0 * uniform01(rng) - 1.0;
    const SvdResult f = svd(a);
    Mat us(f.u.rows, f.u.cols);
    for (int i = 0; i < us.rows; ++i)
      for (int j = 0; j < us.cols; ++j) us(i, j) = f.u(i, j) * f.sigma[static_cast<std::size_t>(j)];
    const Mat back = matmul(us, transpose(f.v));
    double err = 0.0;
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) err = std::max(err, std::abs(back(i, j) - a(i, j)));
    CHECK(err <= 1e-12);
  }
}

TEST_CASE("least squares handles inconsistent systems") {
  Mat a(3, 1);
  a(0, 0) = 1.0;
  a(1, 0) = 1.0;
  a(2, 0) = 1.0;
  const LeastSquaresResult ls = least_squares(a, Vec{1.0, 2.0, 3.0});
  CHECK(ls.x[0] == doctest::Approx(2.0));
  CHECK(ls.residual == doctest::Approx(std::sqrt(2.0)));

  Mat zero(2, 1);
  const LeastSquaresResult lz = least_squares(zero, Vec{1.0, 1.0});
  CHECK(lz.residual == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("gauss_newton finds roots of overdetermined stacks") {
  // consistent: distance-to-two-points stack vanishing at (1, 0)
  auto residual = [](const Vec& w) {
    return Vec{w[0] - 1.0, w[1], (w[0] - 1.0) + w[1]};
  };
  auto jacobian = [](const Vec&) {
    Mat j(3, 2);
    j(0, 0) = 1.0;
    j(1, 1) = 1.0;
    j(2, 0) = 1.0;
    j(2, 1) = 1.0;
    return j;
  };
  const NewtonResult res = gauss_newton(residual, jacobian, Vec{0.3, -0.7});
  CHECK(res.status == SolveStatus::converged);
  CHECK(std::abs(res.x[0] - 1.0) <= 1e-9);
  CHECK(std::abs(res.x[1]) <= 1e-9);

  // inconsistent: stops at the stationary least-squares point
  auto residual2 = [](const Vec& w) { return Vec{w[0], w[0] - 1.0}; };
  auto jacobian2 = [](const Vec&) {
    Mat j(2, 1);
    j(0, 0) = 1.0;
    j(1, 0) = 1.0;
    return j;
  };
  const NewtonResult res2 = gauss_newton(residual2, jacobian2, Vec{0.9});
  CHECK(res2.status == SolveStatus::stationary);
  CHECK(std::abs(res2.x[0] - 0.5) <= 1e-8);
}
