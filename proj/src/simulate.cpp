#include "phdae/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "phdae/legendre.hpp"

namespace phdae {

namespace {

constexpr double kIndexTol = 1e-8;

Vec eval_inputs(const std::vector<ExprTree>& inputs, int m_p, double t) {
  Vec u(static_cast<std::size_t>(m_p), 0.0);
  const Vec tp{t};
  for (int i = 0; i < m_p && i < static_cast<int>(inputs.size()); ++i)
    u[static_cast<std::size_t>(i)] = inputs[static_cast<std::size_t>(i)].eval(tp);
  return u;
}

Mat fd_jacobian(const VecFn& f, const Vec& x, double h = 1e-7) {
  const Vec f0 = f(x);
  Mat j(static_cast<int>(f0.size()), static_cast<int>(x.size()));
  Vec xp = x, xm = x;
  for (std::size_t c = 0; c < x.size(); ++c) {
    xp[c] = x[c] + h;
    xm[c] = x[c] - h;
    const Vec fp = f(xp);
    const Vec fm = f(xm);
    for (std::size_t r = 0; r < f0.size(); ++r)
      j(static_cast<int>(r), static_cast<int>(c)) = (fp[r] - fm[r]) / (2.0 * h);
    xp[c] = x[c];
    xm[c] = x[c];
  }
  return j;
}

// Matrix of trees evaluated at a point.
Mat eval_tree_grid(const std::vector<std::vector<ExprTree>>& grid, const Vec& p) {
  const int rows = static_cast<int>(grid.size());
  const int cols = rows > 0 ? static_cast<int>(grid.front().size()) : 0;
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      m(i, j) = grid[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].eval(p);
  return m;
}

Vec eval_tree_row(const std::vector<ExprTree>& row, const Vec& p) {
  Vec v(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) v[i] = row[i].eval(p);
  return v;
}

// Shared skeleton of both steppers: per-step diagnostics.
struct StepDiagnostics {
  double energy_next = 0.0;
  double constraint_residual = 0.0;
  double balance = 0.0;
  double port_power = 0.0;
  double diss_power = 0.0;
};

// ---------------------------------------------------------------------------
// Explicit-storage stepper: unknowns (x_{k+1}, lam*), residual
//   [ x_{k+1} - x_k - dt ((J - G_R Rbar G_R^T) grad H + B lam* + G u)|_mid ;
//     B^T grad H |_{x_{k+1}} ]

class ExplicitStepper {
public:
  explicit ExplicitStepper(const PHSystem& sys) : sys_(sys) {
    const int n = sys.n(), k = sys.k(), mp = sys.m_p();
    std::vector<std::string> ext = sys.state_names;
    for (int c = 0; c < k; ++c) ext.push_back("__lamstar" + std::to_string(c + 1));
    for (int c = 0; c < mp; ++c) ext.push_back("__u" + std::to_string(c + 1));
    ext_vars_ = make_variables(ext);
    std::vector<int> id(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) id[static_cast<std::size_t>(i)] = i;

    const ExprTree& h = std::get<ExplicitHamiltonian>(sys.storage).h;
    h_ = h;
    std::vector<ExprTree> dh_ext;
    for (int j = 0; j < n; ++j) {
      dh_state_.push_back(h.derivative(j));
      dh_ext.push_back(remap_variables(dh_state_.back(), id, ext_vars_));
    }
    for (int i = 0; i < n; ++i) {
      std::vector<ExprTree> row;
      for (int j = 0; j < n; ++j) row.push_back(dh_state_[static_cast<std::size_t>(i)].derivative(j));
      hess_state_.push_back(std::move(row));
    }

    auto lift = [&](const ExprTree& t) { return remap_variables(t, id, ext_vars_); };

    rhs_.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      ExprTree rhs = constant(ext_vars_, 0.0);
      for (int l = 0; l < n; ++l) {
        ExprTree coeff = lift(sys.dirac.j(i, l));
        for (int p = 0; p < sys.m_r(); ++p)
          for (int q = 0; q < sys.m_r(); ++q)
            coeff = coeff - lift(sys.dirac.g_r(i, p)) * constant(ext_vars_, sys.rbar(p, q)) *
                                lift(sys.dirac.g_r(l, q));
        rhs = rhs + coeff * dh_ext[static_cast<std::size_t>(l)];
      }
      for (int c = 0; c < k; ++c)
        rhs = rhs + lift(sys.dirac.b(i, c)) * variable(ext_vars_, n + c);
      for (int c = 0; c < mp; ++c)
        rhs = rhs + lift(sys.dirac.g(i, c)) * variable(ext_vars_, n + k + c);
      rhs_.push_back(rhs);
    }
    for (int i = 0; i < n; ++i) {
      std::vector<ExprTree> row;
      for (int j = 0; j < n; ++j) row.push_back(rhs_[static_cast<std::size_t>(i)].derivative(j));
      drhs_.push_back(std::move(row));
    }
    for (int c = 0; c < k; ++c) {
      std::vector<ExprTree> row;
      for (int i = 0; i < n; ++i) row.push_back(lift(sys.dirac.b(i, c)));
      b_ext_.push_back(std::move(row));
    }

    for (int c = 0; c < k; ++c) {
      ExprTree g = constant(sys.state_vars, 0.0);
      for (int j = 0; j < n; ++j)
        g = g + sys.dirac.b(j, c) * dh_state_[static_cast<std::size_t>(j)];
      g_.push_back(g);
      std::vector<ExprTree> row;
      for (int j = 0; j < n; ++j) row.push_back(g.derivative(j));
      dg_.push_back(std::move(row));
    }
  }

  double energy(const Vec& x) const { return h_.eval(x); }

  Vec constraint(const Vec& x) const { return eval_tree_row(g_, x); }

  double index_sigma(const Vec& x) const {
    const int k = sys_.k();
    if (k == 0) return std::numeric_limits<double>::infinity();
    const Mat bx = sys_.dirac.b.eval(x);
    if (numerical_rank(bx) < k)
      throw RankDeficientConstraint("index_check: B(x) rank deficient");
    const Mat hx = eval_tree_grid(hess_state_, x);
    const Mat block = matmul(transpose(bx), matmul(hx, bx));
    return smallest_singular_value(block);
  }

  std::pair<Vec, Vec> advance(const Vec& x_k, double dt, const Vec& u_mid,
                              const Vec& lam_warm, const NewtonConfig& cfg,
                              StepDiagnostics* diag) const {
    const int n = sys_.n(), k = sys_.k();
    auto ext_point = [&](const Vec& x_mid, const Vec& lam) {
      Vec p = x_mid;
      p.insert(p.end(), lam.begin(), lam.end());
      p.insert(p.end(), u_mid.begin(), u_mid.end());
      return p;
    };
    VecFn residual = [&](const Vec& w) {
      Vec x_next(w.begin(), w.begin() + n);
      Vec lam(w.begin() + n, w.end());
      Vec x_mid = scale(0.5, x_k + x_next);
      const Vec p = ext_point(x_mid, lam);
      Vec r(static_cast<std::size_t>(n + k));
      for (int i = 0; i < n; ++i)
        r[static_cast<std::size_t>(i)] =
            x_next[static_cast<std::size_t>(i)] - x_k[static_cast<std::size_t>(i)] -
            dt * rhs_[static_cast<std::size_t>(i)].eval(p);
      const Vec g = constraint(x_next);
      for (int c = 0; c < k; ++c) r[static_cast<std::size_t>(n + c)] = g[static_cast<std::size_t>(c)];
      return r;
    };
    MatFn jacobian = [&](const Vec& w) {
      Vec x_next(w.begin(), w.begin() + n);
      Vec lam(w.begin() + n, w.end());
      Vec x_mid = scale(0.5, x_k + x_next);
      const Vec p = ext_point(x_mid, lam);
      Mat jm(n + k, n + k);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j)
          jm(i, j) = (i == j ? 1.0 : 0.0) -
                     0.5 * dt * drhs_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].eval(p);
        for (int c = 0; c < k; ++c)
          jm(i, n + c) = -dt * b_ext_[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)].eval(p);
      }
      for (int c = 0; c < k; ++c)
        for (int j = 0; j < n; ++j)
          jm(n + c, j) = dg_[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)].eval(x_next);
      return jm;
    };

    Vec w0 = x_k;
    w0.insert(w0.end(), lam_warm.begin(), lam_warm.end());
    const NewtonResult res = newton_solve_status(residual, jacobian, w0, cfg);
    if (res.status != SolveStatus::converged)
      throw NoConvergence("implicit-midpoint step failed (" +
                          std::string(res.status == SolveStatus::singular
                                          ? "singular step Jacobian"
                                          : "iteration budget exhausted") +
                          ")");
    Vec x_next(res.x.begin(), res.x.begin() + n);
    Vec lam(res.x.begin() + n, res.x.end());
    const Vec x_mid = scale(0.5, x_k + x_next);

    if (k > 0 && index_sigma(x_mid) < kIndexTol)
      throw IndexViolation("index-1 condition fails at the step midpoint");

    if (diag) {
      diag->energy_next = energy(x_next);
      diag->constraint_residual = norm_inf(constraint(x_next));
      const Vec e_mid = eval_tree_row(dh_state_, x_mid);
      fill_power(sys_, x_mid, e_mid, u_mid, energy(x_k), diag->energy_next, dt, diag);
    }
    return {std::move(x_next), std::move(lam)};
  }

  static void fill_power(const PHSystem& sys, const Vec& x_mid, const Vec& e_mid,
                         const Vec& u_mid, double e_prev, double e_next, double dt,
                         StepDiagnostics* diag) {
    const Mat gx = sys.dirac.g.eval(x_mid);
    const Vec f_p = matvec(transpose(gx), e_mid);
    diag->port_power = dot(u_mid, f_p);
    double diss = 0.0;
    if (sys.m_r() > 0) {
      const Mat grx = sys.dirac.g_r.eval(x_mid);
      const Vec f_r = matvec(transpose(grx), e_mid);
      diss = -dot(f_r, matvec(sys.rbar, f_r));
    }
    diag->diss_power = diss;
    diag->balance = (e_next - e_prev) / dt - (diag->port_power + diss);
  }

  const PHSystem& sys_;
  VarList ext_vars_;
  ExprTree h_;
  std::vector<ExprTree> dh_state_;
  std::vector<std::vector<ExprTree>> hess_state_;
  std::vector<ExprTree> rhs_;                    // over (x, lam*, u)
  std::vector<std::vector<ExprTree>> drhs_;      // d rhs / d x
  std::vector<std::vector<ExprTree>> b_ext_;     // B columns over ext vars
  std::vector<ExprTree> g_;                      // Dirac constraints over state vars
  std::vector<std::vector<ExprTree>> dg_;
};

// ---------------------------------------------------------------------------
// Chart stepper for generating-function storage: the step is posed in the
// (x_I, e_J) chart, unknowns (z_{k+1}, lam*), residual
//   [ T(z_mid) (z_{k+1} - z_k) - dt ((J - R) e_S + B lam* + G u)|_mid ;
//     B^T e_S |_{z_{k+1}} ]
// with T = dx/dz the chart flow map.

class ChartStepper {
public:
  explicit ChartStepper(const PHSystem& sys) : sys_(sys) {
    const auto& gf = std::get<GeneratingFunction>(sys.storage);
    ni_ = static_cast<int>(gf.idx_i.size());
    chart_ = build_gf_chart(gf, sys.state_names);
    const int n = sys.n(), k = sys.k(), mp = sys.m_p();

    std::vector<std::string> ext = *chart_.vars;
    for (int c = 0; c < k; ++c) ext.push_back("__lamstar" + std::to_string(c + 1));
    for (int c = 0; c < mp; ++c) ext.push_back("__u" + std::to_string(c + 1));
    ext_vars_ = make_variables(ext);
    std::vector<int> id(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) id[static_cast<std::size_t>(i)] = i;

    auto lift_chart = [&](const ExprTree& t) { return remap_variables(t, id, ext_vars_); };
    // compose a state-space tree with the chart map, then lift
    auto compose = [&](const ExprTree& t) {
      return lift_chart(substitute(t, chart_.x, chart_.vars));
    };

    for (int i = 0; i < n; ++i) {
      x_of_z_.push_back(chart_.x[static_cast<std::size_t>(i)]);
      e_of_z_.push_back(chart_.e[static_cast<std::size_t>(i)]);
      x_ext_.push_back(lift_chart(chart_.x[static_cast<std::size_t>(i)]));
      e_ext_.push_back(lift_chart(chart_.e[static_cast<std::size_t>(i)]));
    }

    for (int i = 0; i < n; ++i) {
      std::vector<ExprTree> trow, wrow;
      for (int c = 0; c < n; ++c) {
        trow.push_back(x_of_z_[static_cast<std::size_t>(i)].derivative(c));
        wrow.push_back(e_of_z_[static_cast<std::size_t>(i)].derivative(c));
      }
      t_map_.push_back(std::move(trow));
      w_map_.push_back(std::move(wrow));
    }
    for (int i = 0; i < n; ++i) {
      std::vector<std::vector<ExprTree>> rows;
      for (int c = 0; c < n; ++c) {
        std::vector<ExprTree> row;
        for (int c2 = 0; c2 < n; ++c2)
          row.push_back(t_map_[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)].derivative(c2));
        rows.push_back(std::move(row));
      }
      dt_map_.push_back(std::move(rows));
    }

    // system fields composed with the chart
    for (int i = 0; i < n; ++i) {
      std::vector<ExprTree> brow;
      for (int c = 0; c < k; ++c) brow.push_back(compose(sys.dirac.b(i, c)));
      b_chart_.push_back(std::move(brow));
    }

    rhs_.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      ExprTree rhs = constant(ext_vars_, 0.0);
      for (int l = 0; l < n; ++l) {
        ExprTree coeff = compose(sys.dirac.j(i, l));
        for (int p = 0; p < sys.m_r(); ++p)
          for (int q = 0; q < sys.m_r(); ++q)
            coeff = coeff - compose(sys.dirac.g_r(i, p)) * constant(ext_vars_, sys.rbar(p, q)) *
                                compose(sys.dirac.g_r(l, q));
        rhs = rhs + coeff * e_ext_[static_cast<std::size_t>(l)];
      }
      for (int c = 0; c < k; ++c)
        rhs = rhs + b_chart_[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] *
                        variable(ext_vars_, n + c);
      for (int c = 0; c < mp; ++c)
        rhs = rhs + compose(sys.dirac.g(i, c)) * variable(ext_vars_, n + k + c);
      rhs_.push_back(rhs);
    }
    for (int i = 0; i < n; ++i) {
      std::vector<ExprTree> row;
      for (int c = 0; c < n; ++c) row.push_back(rhs_[static_cast<std::size_t>(i)].derivative(c));
      drhs_.push_back(std::move(row));
    }

    for (int c = 0; c < k; ++c) {
      ExprTree g = constant(chart_.vars, 0.0);
      for (int j = 0; j < n; ++j)
        g = g + substitute(sys.dirac.b(j, c), chart_.x, chart_.vars) *
                    e_of_z_[static_cast<std::size_t>(j)];
      g_chart_.push_back(g);
      std::vector<ExprTree> row;
      for (int c2 = 0; c2 < n; ++c2) row.push_back(g.derivative(c2));
      dg_chart_.push_back(std::move(row));
    }

    h_tilde_ = effective_hamiltonian_tree(gf.v, ni_);
  }

  Vec state_of(const Vec& z) const { return eval_tree_row(x_of_z_, z); }
  Vec effort_of(const Vec& z) const { return eval_tree_row(e_of_z_, z); }
  double energy(const Vec& z) const { return h_tilde_.eval(z); }
  Vec constraint(const Vec& z) const { return eval_tree_row(g_chart_, z); }

  double index_sigma(const Vec& z) const {
    const int k = sys_.k();
    if (k == 0) return std::numeric_limits<double>::infinity();
    const Vec x = state_of(z);
    const Mat bx = sys_.dirac.b.eval(x);
    const Mat t = eval_tree_grid(t_map_, z);
    const Mat w = eval_tree_grid(w_map_, z);
    // B^T W T^{-1} B, the chart analogue of B^T hess(H) B
    Mat y(bx.rows, bx.cols);
    for (int c = 0; c < bx.cols; ++c) {
      Vec col(static_cast<std::size_t>(bx.rows));
      for (int i = 0; i < bx.rows; ++i) col[static_cast<std::size_t>(i)] = bx(i, c);
      Vec sol;
      try {
        sol = solve_linear(t, col);
      } catch (const SingularMatrix&) {
        return 0.0;  // flow map degenerate together with the pairing
      }
      for (int i = 0; i < bx.rows; ++i) y(i, c) = sol[static_cast<std::size_t>(i)];
    }
    const Mat block = matmul(transpose(bx), matmul(w, y));
    return smallest_singular_value(block);
  }

  std::pair<Vec, Vec> advance(const Vec& z_k, double dt, const Vec& u_mid,
                              const Vec& lam_warm, const NewtonConfig& cfg,
                              StepDiagnostics* diag) const {
    const int n = sys_.n(), k = sys_.k();
    auto ext_point = [&](const Vec& z, const Vec& lam) {
      Vec p = z;
      p.insert(p.end(), lam.begin(), lam.end());
      p.insert(p.end(), u_mid.begin(), u_mid.end());
      return p;
    };
    VecFn residual = [&](const Vec& w) {
      Vec z_next(w.begin(), w.begin() + n);
      Vec lam(w.begin() + n, w.end());
      const Vec z_mid = scale(0.5, z_k + z_next);
      const Vec p = ext_point(z_mid, lam);
      const Mat t = eval_tree_grid(t_map_, z_mid);
      const Vec d = z_next - z_k;
      Vec r(static_cast<std::size_t>(n + k));
      const Vec td = matvec(t, d);
      for (int i = 0; i < n; ++i)
        r[static_cast<std::size_t>(i)] =
            td[static_cast<std::size_t>(i)] - dt * rhs_[static_cast<std::size_t>(i)].eval(p);
      const Vec g = constraint(z_next);
      for (int c = 0; c < k; ++c) r[static_cast<std::size_t>(n + c)] = g[static_cast<std::size_t>(c)];
      return r;
    };
    MatFn jacobian = [&](const Vec& w) {
      Vec z_next(w.begin(), w.begin() + n);
      Vec lam(w.begin() + n, w.end());
      const Vec z_mid = scale(0.5, z_k + z_next);
      const Vec p = ext_point(z_mid, lam);
      const Vec d = z_next - z_k;
      Mat jm(n + k, n + k);
      const Mat t = eval_tree_grid(t_map_, z_mid);
      for (int i = 0; i < n; ++i) {
        for (int c = 0; c < n; ++c) {
          double v = t(i, c);
          for (int c2 = 0; c2 < n; ++c2)
            v += 0.5 *
                 dt_map_[static_cast<std::size_t>(i)][static_cast<std::size_t>(c2)]
                        [static_cast<std::size_t>(c)]
                            .eval(z_mid) *
                 d[static_cast<std::size_t>(c2)];
          jm(i, c) = v - 0.5 * dt * drhs_[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)].eval(p);
        }
        for (int c = 0; c < k; ++c)
          jm(i, n + c) =
              -dt * b_chart_[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)].eval(p);
      }
      for (int c = 0; c < k; ++c)
        for (int c2 = 0; c2 < n; ++c2)
          jm(n + c, c2) =
              dg_chart_[static_cast<std::size_t>(c)][static_cast<std::size_t>(c2)].eval(z_next);
      return jm;
    };

    Vec w0 = z_k;
    w0.insert(w0.end(), lam_warm.begin(), lam_warm.end());
    const NewtonResult res = newton_solve_status(residual, jacobian, w0, cfg);
    if (res.status == SolveStatus::singular)
      throw ChartBreakdown(
          "(x_I, e_J) chart step system singular: flow map degenerate together with the "
          "Dirac pairing");
    if (res.status != SolveStatus::converged)
      throw NoConvergence("implicit-midpoint chart step failed to converge");

    Vec z_next(res.x.begin(), res.x.begin() + n);
    Vec lam(res.x.begin() + n, res.x.end());
    const Vec z_mid = scale(0.5, z_k + z_next);

    if (k > 0 && index_sigma(z_mid) < kIndexTol)
      throw IndexViolation("index-1 condition fails at the step midpoint");

    if (diag) {
      diag->energy_next = energy(z_next);
      diag->constraint_residual = norm_inf(constraint(z_next));
      ExplicitStepper::fill_power(sys_, state_of(z_mid), effort_of(z_mid), u_mid,
                                  energy(z_k), diag->energy_next, dt, diag);
    }
    return {std::move(z_next), std::move(lam)};
  }

  const PHSystem& sys_;
  int ni_ = 0;
  GfChart chart_;
  VarList ext_vars_;
  std::vector<ExprTree> x_of_z_, e_of_z_;  // over chart vars
  std::vector<ExprTree> x_ext_, e_ext_;    // over ext vars
  std::vector<std::vector<ExprTree>> t_map_, w_map_;
  std::vector<std::vector<std::vector<ExprTree>>> dt_map_;
  std::vector<std::vector<ExprTree>> b_chart_;  // over ext vars
  std::vector<ExprTree> rhs_;
  std::vector<std::vector<ExprTree>> drhs_;
  std::vector<ExprTree> g_chart_;
  std::vector<std::vector<ExprTree>> dg_chart_;
  ExprTree h_tilde_;
};

// Newton on the first-order conditions of min 1/2 ||r(z)||^2 s.t. c(z) = 0,
// with the Jacobian of the KKT system taken by central differences (the
// initializer runs once per simulation, so this stays cheap).
NewtonResult solve_kkt(const VecFn& r, const MatFn& jr, const VecFn& c, const MatFn& jc,
                       int nz, int nc, const Vec& z0, const NewtonConfig& cfg) {
  VecFn kkt = [&](const Vec& w) {
    Vec z(w.begin(), w.begin() + nz);
    Vec mu(w.begin() + nz, w.end());
    const Vec rv = r(z);
    const Mat jrv = jr(z);
    Vec out = matvec(transpose(jrv), rv);
    if (nc > 0) {
      const Mat jcv = jc(z);
      const Vec jcmu = matvec(transpose(jcv), mu);
      out = out + jcmu;
      const Vec cv = c(z);
      out.insert(out.end(), cv.begin(), cv.end());
    }
    return out;
  };
  MatFn kkt_jac = [&](const Vec& w) { return fd_jacobian(kkt, w); };
  Vec w0 = z0;
  w0.resize(static_cast<std::size_t>(nz + nc), 0.0);
  return newton_solve_status(kkt, kkt_jac, w0, cfg);
}

}  // namespace

InitResult consistent_init(const PHSystem& sys, const Vec& x_guess, const NewtonConfig& cfg,
                           std::uint64_t seed) {
  if (static_cast<int>(x_guess.size()) != sys.n())
    throw DimensionMismatch("consistent_init: guess has wrong dimension");
  InitResult out;
  const int n = sys.n();
  const int k = sys.k();

  if (sys.has_explicit_storage()) {
    if (k == 0) {
      out.x0 = x_guess;
      return out;
    }
    ExplicitStepper stepper(sys);
    VecFn r = [&](const Vec& x) { return x - x_guess; };
    MatFn jr = [&](const Vec&) { return Mat::identity(n); };
    VecFn c = [&](const Vec& x) { return stepper.constraint(x); };
    MatFn jc = [&](const Vec& x) { return eval_tree_grid(stepper.dg_, x); };
    const NewtonResult res = solve_kkt(r, jr, c, jc, n, k, x_guess, cfg);
    if (res.status != SolveStatus::converged)
      throw NoConvergence("consistent_init: constraint projection did not converge");
    out.x0.assign(res.x.begin(), res.x.begin() + n);
    if (norm_inf(stepper.constraint(out.x0)) > 1e-10)
      throw NoConvergence("consistent_init: projected state violates the constraints");
    return out;
  }

  if (const auto* gf = std::get_if<GeneratingFunction>(&sys.storage)) {
    ChartStepper stepper(sys);
    const int ni = static_cast<int>(gf->idx_i.size());
    const int nj = static_cast<int>(gf->idx_j.size());

    VecFn r = [&](const Vec& z) { return stepper.state_of(z) - x_guess; };
    MatFn jr = [&](const Vec& z) { return eval_tree_grid(stepper.t_map_, z); };
    VecFn c = [&](const Vec& z) { return stepper.constraint(z); };
    MatFn jc = [&](const Vec& z) { return eval_tree_grid(stepper.dg_chart_, z); };

    NewtonResult best;
    best.status = SolveStatus::no_convergence;
    for (const Vec& start_ej : lattice_starts(nj, seed)) {
      Vec z0(static_cast<std::size_t>(n));
      for (int a = 0; a < ni; ++a)
        z0[static_cast<std::size_t>(a)] = x_guess[static_cast<std::size_t>(gf->idx_i[a])];
      for (int b = 0; b < nj; ++b) z0[static_cast<std::size_t>(ni + b)] = start_ej[static_cast<std::size_t>(b)];
      NewtonResult res;
      if (k == 0) {
        res = gauss_newton(r, jr, z0, cfg, 1e-11);
        if (res.status == SolveStatus::stationary) res.status = SolveStatus::converged;
      } else {
        res = solve_kkt(r, jr, c, jc, n, k, z0, cfg);
      }
      if (res.status == SolveStatus::converged) {
        best = std::move(res);
        break;
      }
    }
    if (best.status != SolveStatus::converged)
      throw NoConvergence("consistent_init: no chart point found for the initial guess");
    out.chart.assign(best.x.begin(), best.x.begin() + n);
    out.x0 = stepper.state_of(out.chart);
    if (k > 0 && norm_inf(stepper.constraint(out.chart)) > 1e-10)
      throw NoConvergence("consistent_init: projected state violates the constraints");
    return out;
  }

  const MorseFamily& mf = std::get<MorseFamily>(sys.storage);
  const int km = mf.k;
  std::vector<ExprTree> c_lam = morse_lambda_grad(mf);
  VecFn r = [&](const Vec& w) {
    Vec rv(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) rv[static_cast<std::size_t>(i)] = w[static_cast<std::size_t>(i)] - x_guess[static_cast<std::size_t>(i)];
    return rv;
  };
  MatFn jr = [&](const Vec&) {
    Mat m(n, n + km);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  };
  VecFn c = [&](const Vec& w) { return eval_tree_row(c_lam, w); };
  MatFn jc = [&](const Vec& w) {
    Mat m(km, n + km);
    for (int i = 0; i < km; ++i)
      for (int j = 0; j < n + km; ++j)
        m(i, j) = c_lam[static_cast<std::size_t>(i)].derivative(j).eval(w);
    return m;
  };
  for (const Vec& lam0 : lattice_starts(km, seed)) {
    Vec w0 = x_guess;
    w0.insert(w0.end(), lam0.begin(), lam0.end());
    const NewtonResult res = solve_kkt(r, jr, c, jc, n + km, km, w0, cfg);
    if (res.status == SolveStatus::converged) {
      out.x0.assign(res.x.begin(), res.x.begin() + n);
      out.witness.assign(res.x.begin() + n, res.x.begin() + n + km);
      return out;
    }
  }
  throw NoConvergence("consistent_init: no point of pi(L) found near the guess");
}

double index_check(const PHSystem& sys, const Vec& x, std::uint64_t seed) {
  if (sys.has_explicit_storage()) {
    ExplicitStepper stepper(sys);
    return stepper.index_sigma(x);
  }
  if (std::holds_alternative<GeneratingFunction>(sys.storage)) {
    if (sys.k() == 0) return std::numeric_limits<double>::infinity();
    ChartStepper stepper(sys);
    const ProbeResult pr = lagrange_constraint_probe(sys.storage, x, 1e-8, seed);
    if (pr.verdict != Feasibility::feasible)
      throw RankDeficientConstraint("index_check: x is not on the storage projection");
    const auto& gf = std::get<GeneratingFunction>(sys.storage);
    Vec z(static_cast<std::size_t>(sys.n()));
    for (std::size_t a = 0; a < gf.idx_i.size(); ++a)
      z[a] = x[static_cast<std::size_t>(gf.idx_i[a])];
    for (std::size_t b = 0; b < gf.idx_j.size(); ++b)
      z[gf.idx_i.size() + b] = pr.witness[b];
    return stepper.index_sigma(z);
  }
  throw UnsupportedStorage(
      "index_check: Morse-family storage has no local parametrization; convert with "
      "lagrange_to_dirac first");
}

StepOutcome step(const PHSystem& sys, const Vec& x_k, double t_k, double dt,
                 const Vec& u_mid, const NewtonConfig& cfg, std::uint64_t seed) {
  (void)t_k;
  if (dt <= 0.0) throw DimensionMismatch("step: dt must be positive");
  if (sys.has_explicit_storage()) {
    ExplicitStepper stepper(sys);
    auto [x_next, lam] =
        stepper.advance(x_k, dt, u_mid, Vec(static_cast<std::size_t>(sys.k()), 0.0), cfg, nullptr);
    return {std::move(x_next), std::move(lam)};
  }
  if (std::holds_alternative<GeneratingFunction>(sys.storage)) {
    const InitResult init = consistent_init(sys, x_k, cfg, seed);
    ChartStepper stepper(sys);
    auto [z_next, lam] =
        stepper.advance(init.chart, dt, u_mid, Vec(static_cast<std::size_t>(sys.k()), 0.0), cfg, nullptr);
    return {stepper.state_of(z_next), std::move(lam)};
  }
  throw UnsupportedStorage("step: convert Morse-family storage with lagrange_to_dirac first");
}

Trajectory simulate(const PHSystem& sys, const Vec& x_guess, const SimConfig& cfg,
                    std::uint64_t seed) {
  if (cfg.dt <= 0.0 || cfg.t1 <= cfg.t0)
    throw DimensionMismatch("simulate: need dt > 0 and t1 > t0");
  if (static_cast<int>(cfg.inputs.size()) > sys.m_p())
    throw DimensionMismatch("simulate: more input signals than external ports");

  Trajectory traj;
  const int k = sys.k();
  const long nsteps = std::llround((cfg.t1 - cfg.t0) / cfg.dt);

  auto push_row = [&](double t, const Vec& x, const Vec& lam, double energy, double gres,
                      const StepDiagnostics* diag) {
    traj.t.push_back(t);
    traj.state.push_back(x);
    traj.multiplier.push_back(lam);
    traj.energy.push_back(energy);
    traj.constraint_residual.push_back(gres);
    traj.power_balance.push_back(diag ? diag->balance : 0.0);
    traj.port_power.push_back(diag ? diag->port_power : 0.0);
    traj.diss_power.push_back(diag ? diag->diss_power : 0.0);
  };

  try {
    const InitResult init = consistent_init(sys, x_guess, cfg.newton, seed);

    if (sys.has_explicit_storage()) {
      ExplicitStepper stepper(sys);
      Vec x = init.x0;
      Vec lam(static_cast<std::size_t>(k), 0.0);
      push_row(cfg.t0, x, Vec(static_cast<std::size_t>(k), 0.0), stepper.energy(x),
               norm_inf(stepper.constraint(x)), nullptr);
      for (long s = 0; s < nsteps; ++s) {
        const double t_k = cfg.t0 + static_cast<double>(s) * cfg.dt;
        const Vec u_mid = eval_inputs(cfg.inputs, sys.m_p(), t_k + 0.5 * cfg.dt);
        StepDiagnostics diag;
        auto [x_next, lam_next] = stepper.advance(x, cfg.dt, u_mid, lam, cfg.newton, &diag);
        x = std::move(x_next);
        lam = std::move(lam_next);
        push_row(t_k + cfg.dt, x, lam, diag.energy_next, diag.constraint_residual, &diag);
      }
    } else if (std::holds_alternative<GeneratingFunction>(sys.storage)) {
      ChartStepper stepper(sys);
      Vec z = init.chart;
      Vec lam(static_cast<std::size_t>(k), 0.0);
      push_row(cfg.t0, stepper.state_of(z), Vec(static_cast<std::size_t>(k), 0.0),
               stepper.energy(z), norm_inf(stepper.constraint(z)), nullptr);
      for (long s = 0; s < nsteps; ++s) {
        const double t_k = cfg.t0 + static_cast<double>(s) * cfg.dt;
        const Vec u_mid = eval_inputs(cfg.inputs, sys.m_p(), t_k + 0.5 * cfg.dt);
        StepDiagnostics diag;
        auto [z_next, lam_next] = stepper.advance(z, cfg.dt, u_mid, lam, cfg.newton, &diag);
        z = std::move(z_next);
        lam = std::move(lam_next);
        push_row(t_k + cfg.dt, stepper.state_of(z), lam, diag.energy_next,
                 diag.constraint_residual, &diag);
      }
    } else {
      throw UnsupportedStorage(
          "simulate: convert Morse-family storage with lagrange_to_dirac first");
    }
  } catch (const Error& e) {
    if (traj.rows() == 0) throw;  // not even an initial condition
    traj.failure = e.what();
  }
  return traj;
}

EnergyBalanceSummary energy_balance(const Trajectory& traj, const PHSystem& sys) {
  (void)sys;
  EnergyBalanceSummary s;
  for (std::size_t i = 1; i < traj.rows(); ++i) {
    s.max_balance_residual = std::max(s.max_balance_residual, std::abs(traj.power_balance[i]));
    // dE/dt - port power = balance + dissipation, and dissipation <= 0
    s.max_passivity_violation =
        std::max(s.max_passivity_violation, traj.power_balance[i] + traj.diss_power[i]);
  }
  s.max_passivity_violation = std::max(s.max_passivity_violation, 0.0);
  return s;
}

}  // namespace phdae
