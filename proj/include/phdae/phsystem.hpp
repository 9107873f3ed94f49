#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "phdae/geometry.hpp"

namespace phdae {

/// Assembled (generalized) port-Hamiltonian system: Dirac structure,
/// storage relation, linear dissipation e_R = -Rbar f_R, external port
/// of dimension m_p. Immutable after assemble().
struct PHSystem {
  DiracStructure dirac;
  StorageRelation storage;
  Mat rbar;  // m_r x m_r, symmetric positive semidefinite
  std::vector<std::string> state_names;
  VarList state_vars;
  Box sample_box;

  int n() const { return dirac.n; }
  int k() const { return dirac.k(); }
  int m_r() const { return dirac.m_r(); }
  int m_p() const { return dirac.m_p(); }
  bool has_explicit_storage() const {
    return std::holds_alternative<ExplicitHamiltonian>(storage);
  }
};

/// Validates dimensions, Rbar >= 0, the Dirac axioms over the sample box,
/// and the Morse rank condition when applicable. Throws DimensionMismatch
/// or ValidationFailed.
PHSystem assemble(DiracStructure d, StorageRelation s, Mat rbar,
                  std::vector<std::string> names, std::optional<Box> box = std::nullopt,
                  std::uint64_t seed = kDefaultSeed);

/// Eq-7-style input-state-output form, available iff the system has no
/// algebraic constraints (k = 0) and explicit storage.
struct IsoForm {
  MatrixExpr j_minus_r;  // J(x) - G_R(x) Rbar G_R^T(x)
  MatrixExpr g;
  ExprTree h;
};
std::optional<IsoForm> is_input_state_output(const PHSystem& sys);

struct Constraint {
  enum class Class { dirac, lagrange };
  Class cls;
  std::string label;
  std::optional<ExprTree> residual_tree;  // over state variables, when closed form exists
  std::function<double(const Vec&)> residual;
};

struct ConstraintReport {
  std::vector<Constraint> constraints;
  std::vector<std::pair<Vec, ProbeResult>> lagrange_probes;
  bool inconclusive_only = false;

  int count(Constraint::Class c) const {
    int r = 0;
    for (const auto& e : constraints) r += e.cls == c;
    return r;
  }
};

/// Dirac constraints B^T(x) e_S (symbolic for explicit storage) and
/// Lagrange constraints x in pi(L) (symbolic when the projection
/// equations are affine with constant coefficients, probed otherwise).
ConstraintReport extract_constraints(const PHSystem& sys,
                                     std::uint64_t seed = kDefaultSeed);

/// State extension (x, lam): replaces the k Dirac constraints of an
/// explicit-storage system by the Lagrange constraint lam = 0, with
/// extended Dirac structure [[J, B], [-B^T, 0]] and generating-function
/// storage V(x, lam*) = H(x). Throws NothingToConvert when k = 0.
PHSystem dirac_to_lagrange(const PHSystem& sys);

/// State extension (x, lam): replaces implicit storage (generating
/// function or Morse family) by the explicit Hamiltonian F(x, lam),
/// taking the direct product with the trivial Dirac structure e_lam = 0.
/// The Lagrange constraint reappears as the Dirac constraint
/// dF/dlam = 0. Throws MorseRankFailure when the (constructed) family
/// fails the rank condition.
PHSystem lagrange_to_dirac(const PHSystem& sys);

/// Pontryagin-style optimal-control pair for dq/dt = f(q, u) with running
/// cost L(q, u): the explicit system on (q, p, u) with Hamiltonian
/// K = p^T f + L and Dirac constraint dK/du = 0, and the equivalent
/// implicit system on (q, p) with Morse-family storage K(q, p; u).
/// f and l are expressions over (q names..., u names...).
std::pair<PHSystem, PHSystem> build_optimal_control(const MatrixExpr& f, const ExprTree& l,
                                                    int n, int m);

}  // namespace phdae
