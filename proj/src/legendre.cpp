#include "phdae/legendre.hpp"

#include <cmath>

namespace phdae {

namespace {

constexpr double kSingularHessian = 1e-12;

Mat hessian_checked(const std::vector<std::vector<ExprTree>>& hess, const Vec& x) {
  const int n = static_cast<int>(hess.size());
  Mat h(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      h(i, j) = hess[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].eval(x);
  if (n > 0 && smallest_singular_value(h) < kSingularHessian)
    throw NonConvexPoint("Hessian singular at an iterate: grad P loses injectivity");
  return h;
}

}  // namespace

LegendreResult legendre(const ExprTree& p, const Vec& e, const Vec& x_guess,
                        const NewtonConfig& cfg) {
  const int n = p.arity();
  if (static_cast<int>(e.size()) != n)
    throw DimensionMismatch("legendre: e has wrong dimension");
  Vec x0 = x_guess.empty() ? Vec(static_cast<std::size_t>(n), 0.0) : x_guess;

  std::vector<ExprTree> grad_trees;
  std::vector<std::vector<ExprTree>> hess_trees(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    grad_trees.push_back(p.derivative(i));
    for (int j = 0; j < n; ++j)
      hess_trees[static_cast<std::size_t>(i)].push_back(grad_trees.back().derivative(j));
  }

  VecFn residual = [&](const Vec& x) {
    Vec r(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      r[static_cast<std::size_t>(i)] = grad_trees[static_cast<std::size_t>(i)].eval(x) -
                                       e[static_cast<std::size_t>(i)];
    return r;
  };
  MatFn jacobian = [&](const Vec& x) { return hessian_checked(hess_trees, x); };

  NewtonResult res = newton_solve_status(residual, jacobian, x0, cfg);
  if (res.status == SolveStatus::singular)
    throw NonConvexPoint("legendre: Hessian solve failed (injectivity of grad P lost)");
  if (res.status != SolveStatus::converged)
    throw NoConvergence("legendre: grad P(x) = e not solved after " +
                        std::to_string(res.iterations) + " iterations");
  hessian_checked(hess_trees, res.x);  // the solution itself must be regular

  LegendreResult out;
  out.point = res.x;
  out.iterations = res.iterations;
  out.value = dot(e, res.x) - p.eval(res.x);
  return out;
}

double legendre_inverse_check(const ExprTree& p, const Vec& x, const NewtonConfig& cfg) {
  const Vec e = p.grad(x);
  const LegendreResult r = legendre(p, e, x, cfg);
  return norm_inf(r.point - x);
}

double tilde(const ExprTree& p, const Vec& x) { return dot(x, p.grad(x)) - p.eval(x); }

ExprTree tilde_tree(const ExprTree& p) {
  const VarList& vars = p.variables();
  ExprTree sum = constant(vars, 0.0);
  for (int i = 0; i < p.arity(); ++i) sum = sum + variable(vars, i) * p.derivative(i);
  return sum - p;
}

double tilde_grad_check(const ExprTree& p, const Vec& x) {
  const ExprTree pt = tilde_tree(p);
  const Vec lhs = pt.grad(x);
  const Vec rhs = matvec(p.hessian(x), x);
  return norm_inf(lhs - rhs);
}

LegendreResult partial_legendre(const ExprTree& p, const std::vector<int>& idx_i,
                                const std::vector<int>& idx_j, const Vec& x_i,
                                const Vec& e_j, const Vec& x_j_guess,
                                const NewtonConfig& cfg) {
  const int n = p.arity();
  const int ni = static_cast<int>(idx_i.size());
  const int nj = static_cast<int>(idx_j.size());
  if (ni + nj != n || static_cast<int>(x_i.size()) != ni ||
      static_cast<int>(e_j.size()) != nj)
    throw DimensionMismatch("partial_legendre: inconsistent split");

  auto full_point = [&](const Vec& xj) {
    Vec p_full(static_cast<std::size_t>(n), 0.0);
    for (int a = 0; a < ni; ++a)
      p_full[static_cast<std::size_t>(idx_i[a])] = x_i[static_cast<std::size_t>(a)];
    for (int b = 0; b < nj; ++b)
      p_full[static_cast<std::size_t>(idx_j[b])] = xj[static_cast<std::size_t>(b)];
    return p_full;
  };

  std::vector<ExprTree> grad_j;
  std::vector<std::vector<ExprTree>> hess_jj(static_cast<std::size_t>(nj));
  for (int b = 0; b < nj; ++b) {
    grad_j.push_back(p.derivative(idx_j[b]));
    for (int c = 0; c < nj; ++c)
      hess_jj[static_cast<std::size_t>(b)].push_back(grad_j.back().derivative(idx_j[c]));
  }

  VecFn residual = [&](const Vec& xj) {
    const Vec pt = full_point(xj);
    Vec r(static_cast<std::size_t>(nj));
    for (int b = 0; b < nj; ++b)
      r[static_cast<std::size_t>(b)] =
          grad_j[static_cast<std::size_t>(b)].eval(pt) - e_j[static_cast<std::size_t>(b)];
    return r;
  };
  MatFn jacobian = [&](const Vec& xj) {
    const Vec pt = full_point(xj);
    Mat h(nj, nj);
    for (int b = 0; b < nj; ++b)
      for (int c = 0; c < nj; ++c)
        h(b, c) = hess_jj[static_cast<std::size_t>(b)][static_cast<std::size_t>(c)].eval(pt);
    if (nj > 0 && smallest_singular_value(h) < kSingularHessian)
      throw NonConvexPoint("partial_legendre: x_J Hessian block singular at an iterate");
    return h;
  };

  Vec guess = x_j_guess.empty() ? Vec(static_cast<std::size_t>(nj), 0.0) : x_j_guess;
  NewtonResult res = newton_solve_status(residual, jacobian, guess, cfg);
  if (res.status == SolveStatus::singular)
    throw NonConvexPoint("partial_legendre: x_J Hessian block solve failed");
  if (res.status != SolveStatus::converged)
    throw NoConvergence("partial_legendre: e_J = dP/dx_J not solved after " +
                        std::to_string(res.iterations) + " iterations");
  jacobian(res.x);  // the solution itself must be regular

  LegendreResult out;
  out.point = res.x;
  out.iterations = res.iterations;
  out.value = dot(e_j, res.x) - p.eval(full_point(res.x));
  return out;
}

ExprTree effective_hamiltonian_tree(const ExprTree& v, int n_i) {
  const VarList& vars = v.variables();
  const int n = v.arity();
  ExprTree sum = constant(vars, 0.0);
  for (int j = n_i; j < n; ++j) sum = sum + variable(vars, j) * v.derivative(j);
  return v - sum;
}

double effective_hamiltonian(const ExprTree& v, int n_i, const Vec& x_i, const Vec& e_j) {
  Vec z(x_i);
  z.insert(z.end(), e_j.begin(), e_j.end());
  return effective_hamiltonian_tree(v, n_i).eval(z);
}

}  // namespace phdae
