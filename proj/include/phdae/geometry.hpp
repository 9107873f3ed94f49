#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "phdae/expr.hpp"
#include "phdae/numerics.hpp"
#include "phdae/parallel.hpp"
#include "phdae/sampling.hpp"

namespace phdae {

/// Modulated Dirac structure in graph form: the set of port-variable
/// pairs (f, e) = ((f_s, f_r, f_p), (e_s, e_r, e_p)) with
///   -f_s = J(x) e_s + G_R(x) e_r + G(x) e_p + B(x) lam*
///    f_r = G_R^T(x) e_s,   f_p = G^T(x) e_s,   0 = B^T(x) e_s,
/// lam* ranging over R^k. J must be skew; B must have full column rank
/// on the working region.
struct DiracStructure {
  int n = 0;
  MatrixExpr j;    // n x n, over the state variables
  MatrixExpr b;    // n x k (k = 0 allowed: no algebraic constraints)
  MatrixExpr g_r;  // n x m_r
  MatrixExpr g;    // n x m_p

  int k() const { return b.cols; }
  int m_r() const { return g_r.cols; }
  int m_p() const { return g.cols; }
  int total_port_dim() const { return n + m_r() + m_p(); }
};

/// Storage through an explicit Hamiltonian: e_s = grad H(x).
struct ExplicitHamiltonian {
  ExprTree h;  // over the state variables
};

/// Storage through a generating function V(x_I, e_J): the submanifold
///   e_I = dV/dx_I,  x_J = -dV/de_J.
/// V's variable list is (x_I names..., e_<name> for each J index...).
struct GeneratingFunction {
  int n = 0;
  std::vector<int> idx_i, idx_j;  // 0-based partition of {0..n-1}
  ExprTree v;
};

/// Storage through a Morse family F(x, lambda): the submanifold
///   { (x, dF/dx(x, lambda)) : dF/dlambda(x, lambda) = 0 },
/// valid where the lambda-gradient's second-partial block has full rank.
/// F's variable list is (state names..., lam1..lamk).
struct MorseFamily {
  int n = 0;
  int k = 0;
  ExprTree f;
};

using StorageRelation = std::variant<ExplicitHamiltonian, GeneratingFunction, MorseFamily>;

/// Basis pairs (f; e) for D(x), stacked as 2N x N columns with
/// N = n + m_r + m_p. Throws RankDeficientConstraint when B(x) loses rank.
Mat dirac_sample_basis(const DiracStructure& d, const Vec& x);

struct DiracSampleCheck {
  Vec x;
  double isotropy = 0.0;   // max |<e|f>| over basis pairs and random combos
  double skewness = 0.0;   // max |J + J^T| entry
  int dim = 0;             // rank of the sampled basis
  bool pass = false;
};

struct ValidationReport {
  int expected_dim = 0;
  std::vector<DiracSampleCheck> samples;
  bool passed = false;
  double max_isotropy = 0.0;
  double max_skewness = 0.0;
  int worst_sample = -1;  // index of the largest isotropy residual
};

/// Check Dirac axioms (power conservation and dimension) pointwise over
/// `samples`. Residual thresholds: 1e-10; dimension must equal
/// n + m_r + m_p exactly.
ValidationReport validate_dirac(const DiracStructure& d, const std::vector<Vec>& samples,
                                std::uint64_t seed = kDefaultSeed,
                                RunMode mode = RunMode::parallel);

struct Membership {
  bool member = false;
  double residual = 0.0;
  Vec witness;  // e_J (generating) or lambda (Morse) locating the point
};

/// Is (x, e) on the storage submanifold, within tol?
Membership lagrangian_membership(const StorageRelation& s, const Vec& x, const Vec& e,
                                 double tol = 1e-8, std::uint64_t seed = kDefaultSeed);

enum class Feasibility { feasible, infeasible, inconclusive };

struct ProbeResult {
  Feasibility verdict = Feasibility::inconclusive;
  Vec witness;        // e_J or lambda when feasible
  double residual = 0.0;
};

/// Does x project onto the storage submanifold (x in pi(L))?
/// Definite negatives exist only when the constraint equations are affine
/// in the unknowns; otherwise failure of every Newton start is reported
/// as inconclusive.
ProbeResult lagrange_constraint_probe(const StorageRelation& s, const Vec& x,
                                      double tol = 1e-8, std::uint64_t seed = kDefaultSeed);

struct MorseCheck {
  Vec x;
  Vec lambda;
  double sigma_min = 0.0;  // of the k x (n+k) second-partials block
};

struct MorseReport {
  std::vector<MorseCheck> points;
  bool passed = false;
  double min_sigma = 0.0;
};

/// Locate zero-set points of dF/dlambda over the x samples and check the
/// Morse rank condition (sigma_min >= 1e-8) at each.
/// Throws NoZeroSetPointFound when no sample yields a point.
MorseReport validate_morse(const MorseFamily& s, const std::vector<Vec>& x_samples,
                           std::uint64_t seed = kDefaultSeed,
                           RunMode mode = RunMode::parallel);

// --- chart utilities shared with assembly and simulation ------------------

/// Precomputed coordinate maps of the (x_I, e_J) chart of a generating
/// function: state and effort as expression trees over the chart variables.
struct GfChart {
  VarList vars;             // (x_I names..., e_<name>...)
  std::vector<ExprTree> x;  // n entries
  std::vector<ExprTree> e;  // n entries
};

GfChart build_gf_chart(const GeneratingFunction& gf, const std::vector<std::string>& state_names);

/// dF/dlambda trees (k entries) over F's (x, lambda) variable list.
std::vector<ExprTree> morse_lambda_grad(const MorseFamily& s);
/// dF/dx trees (n entries).
std::vector<ExprTree> morse_x_grad(const MorseFamily& s);

int storage_state_dim(const StorageRelation& s);

/// Orthonormal basis of ker B^T obtained by completing an orthonormal
/// basis of range B to all of R^n.
std::vector<Vec> kernel_of_transpose(const Mat& b);

}  // namespace phdae
