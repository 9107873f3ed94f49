#include "phdae/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace phdae {

Mat Mat::identity(int n) {
  Mat m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Mat transpose(const Mat& m) {
  Mat t(m.cols, m.rows);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) t(j, i) = m(i, j);
  return t;
}

Mat matmul(const Mat& a, const Mat& b) {
  Mat c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int l = 0; l < a.cols; ++l) {
      const double ail = a(i, l);
      if (ail == 0.0) continue;
      for (int j = 0; j < b.cols; ++j) c(i, j) += ail * b(l, j);
    }
  return c;
}

Vec matvec(const Mat& m, const Vec& v) {
  Vec y(m.rows, 0.0);
  for (int i = 0; i < m.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < m.cols; ++j) s += m(i, j) * v[j];
    y[i] = s;
  }
  return y;
}

Vec operator-(const Vec& a, const Vec& b) {
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

Vec operator+(const Vec& a, const Vec& b) {
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

Vec scale(double s, const Vec& v) {
  Vec r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) r[i] = s * v[i];
  return r;
}

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm_inf(const Vec& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double norm2(const Vec& v) { return std::sqrt(dot(v, v)); }

double max_abs(const Mat& m) {
  double r = 0.0;
  for (double x : m.a) r = std::max(r, std::abs(x));
  return r;
}

namespace {

// One-sided Jacobi on a tall matrix (rows >= cols): rotates column pairs
// until all columns are mutually orthogonal, then reads off sigma = column
// norms, u = normalized columns, v = accumulated rotations.
SvdResult svd_tall(Mat b) {
  const int n = b.cols;
  const int m = b.rows;
  Mat v = Mat::identity(n);

  const int max_sweeps = 60;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        double app = 0.0, aqq = 0.0, apq = 0.0;
        for (int i = 0; i < m; ++i) {
          app += b(i, p) * b(i, p);
          aqq += b(i, q) * b(i, q);
          apq += b(i, p) * b(i, q);
        }
        if (std::abs(apq) <= 1e-15 * std::sqrt(app * aqq) || apq == 0.0) continue;
        rotated = true;
        const double zeta = (aqq - app) / (2.0 * apq);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double cs = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = cs * t;
        for (int i = 0; i < m; ++i) {
          const double bp = b(i, p), bq = b(i, q);
          b(i, p) = cs * bp - sn * bq;
          b(i, q) = sn * bp + cs * bq;
        }
        for (int i = 0; i < n; ++i) {
          const double vp = v(i, p), vq = v(i, q);
          v(i, p) = cs * vp - sn * vq;
          v(i, q) = sn * vp + cs * vq;
        }
      }
    }
    if (!rotated) break;
  }

  SvdResult r;
  r.sigma.assign(n, 0.0);
  r.u = Mat(m, n);
  r.v = Mat(n, n);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Vec norms(n, 0.0);
  for (int j = 0; j < n; ++j) {
    double s = 0.0;
    for (int i = 0; i < m; ++i) s += b(i, j) * b(i, j);
    norms[j] = std::sqrt(s);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](int x, int y) { return norms[x] > norms[y]; });
  for (int j = 0; j < n; ++j) {
    const int src = order[j];
    r.sigma[j] = norms[src];
    const double inv = norms[src] > 0.0 ? 1.0 / norms[src] : 0.0;
    for (int i = 0; i < m; ++i) r.u(i, j) = b(i, src) * inv;
    for (int i = 0; i < n; ++i) r.v(i, j) = v(i, src);
  }
  return r;
}

}  // namespace

SvdResult svd(const Mat& m) {
  if (m.rows >= m.cols) return svd_tall(m);
  SvdResult t = svd_tall(transpose(m));
  SvdResult r;
  r.sigma = t.sigma;
  r.u = t.v;
  r.v = t.u;
  return r;
}

int numerical_rank(const Vec& sigma, double rel_tol) {
  if (sigma.empty()) return 0;
  const double cut = rel_tol * sigma.front();
  int r = 0;
  for (double s : sigma)
    if (s > cut && s > 0.0) ++r;
  return r;
}

int numerical_rank(const Mat& m, double rel_tol) {
  if (m.rows == 0 || m.cols == 0) return 0;
  return numerical_rank(svd(m).sigma, rel_tol);
}

double smallest_singular_value(const Mat& m) {
  if (m.rows == 0 || m.cols == 0) return 0.0;
  return svd(m).sigma.back();
}

Vec symmetric_eigenvalues(const Mat& m) {
  Mat a = m;
  const int n = a.rows;
  const int max_sweeps = 60;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(off) < 1e-15 * (1.0 + max_abs(a))) break;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(1.0 + theta * theta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (int i = 0; i < n; ++i) {
          const double aip = a(i, p), aiq = a(i, q);
          a(i, p) = c * aip - s * aiq;
          a(i, q) = s * aip + c * aiq;
        }
        for (int i = 0; i < n; ++i) {
          const double api = a(p, i), aqi = a(q, i);
          a(p, i) = c * api - s * aqi;
          a(q, i) = s * api + c * aqi;
        }
      }
    }
  }
  Vec ev(n);
  for (int i = 0; i < n; ++i) ev[i] = a(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

Vec solve_linear(const Mat& a, const Vec& b) {
  if (a.rows != a.cols || static_cast<int>(b.size()) != a.rows)
    throw DimensionMismatch("solve_linear: matrix must be square and match rhs");
  const int n = a.rows;
  if (n == 0) return {};
  Mat lu = a;
  Vec x = b;
  Vec row_scale(n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) row_scale[i] = std::max(row_scale[i], std::abs(lu(i, j)));
    if (row_scale[i] == 0.0) throw SingularMatrix("solve_linear: zero row");
  }
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (int col = 0; col < n; ++col) {
    int best = -1;
    double best_ratio = 0.0;
    for (int i = col; i < n; ++i) {
      const double ratio = std::abs(lu(perm[i], col)) / row_scale[perm[i]];
      if (ratio > best_ratio) {
        best_ratio = ratio;
        best = i;
      }
    }
    if (best < 0 || best_ratio < 1e-12)
      throw SingularMatrix("solve_linear: pivot below 1e-12 of row scale at column " +
                           std::to_string(col));
    std::swap(perm[col], perm[best]);
    const int prow = perm[col];
    for (int i = col + 1; i < n; ++i) {
      const int irow = perm[i];
      const double factor = lu(irow, col) / lu(prow, col);
      lu(irow, col) = 0.0;
      if (factor == 0.0) continue;
      for (int j = col + 1; j < n; ++j) lu(irow, j) -= factor * lu(prow, j);
      x[irow] -= factor * x[prow];
    }
  }
  Vec sol(n, 0.0);
  for (int i = n - 1; i >= 0; --i) {
    const int irow = perm[i];
    double s = x[irow];
    for (int j = i + 1; j < n; ++j) s -= lu(irow, j) * sol[j];
    sol[i] = s / lu(irow, i);
  }
  return sol;
}

LeastSquaresResult least_squares(const Mat& a, const Vec& b, double rel_tol) {
  LeastSquaresResult out;
  if (a.cols == 0) {
    out.x = {};
    out.residual = norm2(b);
    return out;
  }
  SvdResult s = svd(a);
  const double cut = s.sigma.empty() ? 0.0 : rel_tol * s.sigma.front();
  const int r = static_cast<int>(s.sigma.size());
  Vec utb(r, 0.0);
  for (int j = 0; j < r; ++j)
    for (int i = 0; i < a.rows; ++i) utb[j] += s.u(i, j) * b[i];
  out.x.assign(a.cols, 0.0);
  for (int j = 0; j < r; ++j) {
    if (s.sigma[j] <= cut || s.sigma[j] == 0.0) continue;
    const double c = utb[j] / s.sigma[j];
    for (int i = 0; i < a.cols; ++i) out.x[i] += c * s.v(i, j);
  }
  out.residual = norm2(matvec(a, out.x) - b);
  return out;
}

NewtonResult newton_solve_status(const VecFn& residual, const MatFn& jacobian,
                                 const Vec& x0, const NewtonConfig& cfg) {
  NewtonResult res;
  res.x = x0;
  Vec r = residual(res.x);
  double rn = norm2(r);
  res.residual_norm = norm_inf(r);
  if (res.residual_norm <= cfg.tolerance) {
    res.status = SolveStatus::converged;
    return res;
  }
  for (int it = 0; it < cfg.max_iterations; ++it) {
    Vec step;
    try {
      step = solve_linear(jacobian(res.x), scale(-1.0, r));
    } catch (const SingularMatrix&) {
      res.status = SolveStatus::singular;
      res.iterations = it;
      return res;
    }
    double t = 1.0;
    bool accepted = false;
    for (int h = 0; h <= cfg.max_halvings; ++h) {
      Vec trial = res.x + scale(t, step);
      Vec rt;
      bool ok = true;
      try {
        rt = residual(trial);
      } catch (const DomainError&) {
        ok = false;  // stepped outside the domain; shrink
      }
      if (ok && norm2(rt) < rn) {
        res.x = std::move(trial);
        r = std::move(rt);
        rn = norm2(r);
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    res.iterations = it + 1;
    if (!accepted) {
      res.status = SolveStatus::no_convergence;
      res.residual_norm = norm_inf(r);
      return res;
    }
    res.residual_norm = norm_inf(r);
    if (res.residual_norm <= cfg.tolerance) {
      res.status = SolveStatus::converged;
      return res;
    }
  }
  res.status = SolveStatus::no_convergence;
  return res;
}

Vec newton_solve(const VecFn& residual, const MatFn& jacobian, const Vec& x0,
                 const NewtonConfig& cfg) {
  NewtonResult res = newton_solve_status(residual, jacobian, x0, cfg);
  switch (res.status) {
    case SolveStatus::converged:
      return res.x;
    case SolveStatus::singular:
      throw SingularMatrix("newton_solve: Jacobian solve failed after " +
                           std::to_string(res.iterations) + " iterations");
    default:
      throw NoConvergence("newton_solve: no convergence after " +
                          std::to_string(res.iterations) +
                          " iterations, residual " + std::to_string(res.residual_norm));
  }
}

NewtonResult gauss_newton(const VecFn& residual, const MatFn& jacobian,
                          const Vec& x0, const NewtonConfig& cfg,
                          double stationary_tol) {
  NewtonResult res;
  res.x = x0;
  Vec r = residual(res.x);
  double rn = norm2(r);
  res.residual_norm = norm_inf(r);
  if (res.residual_norm <= cfg.tolerance) {
    res.status = SolveStatus::converged;
    return res;
  }
  double mu = 0.0;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    Mat j = jacobian(res.x);
    const int d = j.cols;
    Mat jtj = matmul(transpose(j), j);
    Vec jtr = matvec(transpose(j), r);
    if (norm_inf(jtr) <= stationary_tol) {
      res.status = SolveStatus::stationary;
      res.iterations = it;
      return res;
    }
    Vec step;
    for (;;) {
      Mat reg = jtj;
      for (int i = 0; i < d; ++i) reg(i, i) += mu;
      try {
        step = solve_linear(reg, scale(-1.0, jtr));
        break;
      } catch (const SingularMatrix&) {
        mu = std::max(mu * 10.0, 1e-10);
        if (mu > 1e8) {
          res.status = SolveStatus::singular;
          res.iterations = it;
          return res;
        }
      }
    }
    double t = 1.0;
    bool accepted = false;
    for (int h = 0; h <= cfg.max_halvings; ++h) {
      Vec trial = res.x + scale(t, step);
      Vec rt;
      bool ok = true;
      try {
        rt = residual(trial);
      } catch (const DomainError&) {
        ok = false;
      }
      if (ok && norm2(rt) < rn) {
        res.x = std::move(trial);
        r = std::move(rt);
        rn = norm2(r);
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    res.iterations = it + 1;
    if (!accepted) {
      mu = std::max(mu * 10.0, 1e-8);
      if (mu > 1e8) {
        res.status = SolveStatus::no_convergence;
        res.residual_norm = norm_inf(r);
        return res;
      }
      continue;
    }
    mu *= 0.25;
    res.residual_norm = norm_inf(r);
    if (res.residual_norm <= cfg.tolerance) {
      res.status = SolveStatus::converged;
      return res;
    }
  }
  res.status = SolveStatus::no_convergence;
  return res;
}

Vec finite_diff_grad(const std::function<double(const Vec&)>& f, const Vec& x,
                     double h) {
  Vec g(x.size(), 0.0);
  Vec xp = x, xm = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    xm[i] = x[i] - h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
    xp[i] = x[i];
    xm[i] = x[i];
  }
  return g;
}

}  // namespace phdae
