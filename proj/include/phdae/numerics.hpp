#pragma once

#include <functional>
#include <vector>

#include "phdae/errors.hpp"

namespace phdae {

using Vec = std::vector<double>;

/// Dense row-major matrix. Everything in this toolkit is desk scale
/// (n below ~10), so no sparsity and no BLAS.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

  double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }

  static Mat identity(int n);
};

Mat transpose(const Mat& m);
Mat matmul(const Mat& a, const Mat& b);
Vec matvec(const Mat& m, const Vec& v);
Vec operator-(const Vec& a, const Vec& b);
Vec operator+(const Vec& a, const Vec& b);
Vec scale(double s, const Vec& v);
double dot(const Vec& a, const Vec& b);
double norm_inf(const Vec& v);
double norm2(const Vec& v);
double max_abs(const Mat& m);

/// Thin singular value decomposition by one-sided Jacobi rotations,
/// a = u * diag(sigma) * v^T with sigma sorted descending.
struct SvdResult {
  Vec sigma;  // min(rows, cols) values, descending
  Mat u;      // rows x min(rows, cols)
  Mat v;      // cols x min(rows, cols)
};

SvdResult svd(const Mat& m);

/// Number of singular values >= rel_tol * sigma_max (rank with the
/// working-region tolerance used throughout validation).
int numerical_rank(const Vec& sigma, double rel_tol = 1e-8);
int numerical_rank(const Mat& m, double rel_tol = 1e-8);

double smallest_singular_value(const Mat& m);

/// Eigenvalues of a symmetric matrix (classical Jacobi), ascending.
Vec symmetric_eigenvalues(const Mat& m);

/// Gaussian elimination with scaled partial pivoting.
/// Throws SingularMatrix when the best available pivot falls below
/// 1e-12 relative to its row scale.
Vec solve_linear(const Mat& a, const Vec& b);

/// Minimum-norm least-squares solution via SVD; residual is ||a x - b||_2.
struct LeastSquaresResult {
  Vec x;
  double residual;
};
LeastSquaresResult least_squares(const Mat& a, const Vec& b, double rel_tol = 1e-12);

struct NewtonConfig {
  double tolerance = 1e-10;  // convergence on ||residual||_inf
  int max_iterations = 50;
  int max_halvings = 20;  // step dampings per iteration
};

enum class SolveStatus { converged, stationary, no_convergence, singular };

struct NewtonResult {
  SolveStatus status = SolveStatus::no_convergence;
  Vec x;
  int iterations = 0;
  double residual_norm = 0.0;
};

using VecFn = std::function<Vec(const Vec&)>;
using MatFn = std::function<Mat(const Vec&)>;

/// Damped Newton for square systems. A step is accepted only if it
/// reduces the residual 2-norm; at most cfg.max_halvings halvings per
/// iteration, after which the iteration counts as stalled.
NewtonResult newton_solve_status(const VecFn& residual, const MatFn& jacobian,
                                 const Vec& x0, const NewtonConfig& cfg = {});

/// Throwing wrapper: NoConvergence or SingularMatrix on failure.
Vec newton_solve(const VecFn& residual, const MatFn& jacobian, const Vec& x0,
                 const NewtonConfig& cfg = {});

/// Damped Gauss-Newton for (possibly overdetermined) residual stacks.
/// Stops with `converged` when ||r||_inf <= cfg.tolerance, or with
/// `stationary` when the least-squares gradient ||J^T r||_inf drops below
/// stationary_tol without the residual vanishing.
NewtonResult gauss_newton(const VecFn& residual, const MatFn& jacobian,
                          const Vec& x0, const NewtonConfig& cfg = {},
                          double stationary_tol = 1e-10);

/// Central-difference gradient, the test oracle for structural derivatives.
Vec finite_diff_grad(const std::function<double(const Vec&)>& f, const Vec& x,
                     double h = 1e-6);

}  // namespace phdae
