#pragma once

#include <vector>

#include "phdae/expr.hpp"
#include "phdae/numerics.hpp"

namespace phdae {

struct LegendreResult {
  double value = 0.0;  // P*(e) = e^T x* - P(x*)
  Vec point;           // x* solving grad P(x*) = e
  int iterations = 0;
};

/// Legendre transform P*(e), solving grad P(x) = e by damped Newton with
/// the structural Hessian. Throws NonConvexPoint when the Hessian goes
/// singular at an iterate (injectivity of grad P fails there) and
/// NoConvergence when the iteration budget runs out.
LegendreResult legendre(const ExprTree& p, const Vec& e, const Vec& x_guess = {},
                        const NewtonConfig& cfg = {});

/// || x* - x ||_inf with x* = legendre(P, grad P(x)).point; the numerical
/// content of grad P*(grad P(x)) = x.
double legendre_inverse_check(const ExprTree& p, const Vec& x,
                              const NewtonConfig& cfg = {});

/// P~(x) = x^T grad P(x) - P(x), the closed form that avoids any solve.
double tilde(const ExprTree& p, const Vec& x);

/// The same quantity as an expression tree over P's variables.
ExprTree tilde_tree(const ExprTree& p);

/// || grad P~(x) - hess P(x) x ||_inf, with grad P~ obtained by
/// structurally differentiating the tilde_tree expression.
double tilde_grad_check(const ExprTree& p, const Vec& x);

/// Partial Legendre transform with respect to the x_J block:
/// solves e_J = dP/dx_J(x_I, x_J) for x_J, returns e_J^T x_J* - P(x_I, x_J*).
LegendreResult partial_legendre(const ExprTree& p, const std::vector<int>& idx_i,
                                const std::vector<int>& idx_j, const Vec& x_i,
                                const Vec& e_j, const Vec& x_j_guess = {},
                                const NewtonConfig& cfg = {});

/// Effective Hamiltonian of a generating function V(x_I, e_J):
/// H~ = V - e_J^T dV/de_J. V's variable list must put the n_i x_I
/// variables first.
ExprTree effective_hamiltonian_tree(const ExprTree& v, int n_i);
double effective_hamiltonian(const ExprTree& v, int n_i, const Vec& x_i, const Vec& e_j);

}  // namespace phdae
