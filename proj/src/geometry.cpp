#include "phdae/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace phdae {

namespace {

// Modified Gram-Schmidt (two passes) over the columns of b.
std::vector<Vec> orthonormal_range(const Mat& b) {
  std::vector<Vec> q;
  for (int j = 0; j < b.cols; ++j) {
    Vec v(b.rows);
    for (int i = 0; i < b.rows; ++i) v[i] = b(i, j);
    const double original = norm2(v);
    for (int pass = 0; pass < 2; ++pass)
      for (const Vec& u : q) {
        const double c = dot(u, v);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= c * u[i];
      }
    const double nrm = norm2(v);
    if (nrm > 1e-10 * (1.0 + original)) q.push_back(scale(1.0 / nrm, v));
  }
  return q;
}

Vec unit_vec(int n, int i) {
  Vec v(n, 0.0);
  v[i] = 1.0;
  return v;
}

Vec residual_against(const std::vector<Vec>& basis, Vec v) {
  for (int pass = 0; pass < 2; ++pass)
    for (const Vec& u : basis) {
      const double c = dot(u, v);
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= c * u[i];
    }
  return v;
}

}  // namespace

std::vector<Vec> kernel_of_transpose(const Mat& b) {
  const int n = b.rows;
  std::vector<Vec> span = orthonormal_range(b);
  std::vector<Vec> kernel;
  while (static_cast<int>(span.size() + kernel.size()) < n) {
    // greedily extend with the unit vector farthest from the current span
    std::vector<Vec> all = span;
    all.insert(all.end(), kernel.begin(), kernel.end());
    int best = -1;
    double best_norm = 0.0;
    Vec best_res;
    for (int i = 0; i < n; ++i) {
      Vec r = residual_against(all, unit_vec(n, i));
      const double nrm = norm2(r);
      if (nrm > best_norm) {
        best_norm = nrm;
        best = i;
        best_res = std::move(r);
      }
    }
    if (best < 0 || best_norm < 1e-10) break;  // numerically complete
    kernel.push_back(scale(1.0 / best_norm, best_res));
  }
  return kernel;
}

Mat dirac_sample_basis(const DiracStructure& d, const Vec& x) {
  const int n = d.n, k = d.k(), mr = d.m_r(), mp = d.m_p();
  const int total = n + mr + mp;

  const Mat jx = d.j.eval(x);
  const Mat bx = d.b.eval(x);
  const Mat grx = d.g_r.eval(x);
  const Mat gx = d.g.eval(x);

  if (k > 0) {
    const Vec sigma = svd(bx).sigma;
    if (numerical_rank(sigma) < k)
      throw RankDeficientConstraint("B(x) has rank " +
                                    std::to_string(numerical_rank(sigma)) + " < k = " +
                                    std::to_string(k));
  }

  std::vector<Vec> kernel = kernel_of_transpose(bx);

  Mat basis(2 * total, total);
  int col = 0;
  auto put = [&](const Vec& f_s, const Vec& f_r, const Vec& f_p, const Vec& e_s,
                 const Vec& e_r, const Vec& e_p) {
    for (int i = 0; i < n; ++i) basis(i, col) = f_s[i];
    for (int i = 0; i < mr; ++i) basis(n + i, col) = f_r[i];
    for (int i = 0; i < mp; ++i) basis(n + mr + i, col) = f_p[i];
    for (int i = 0; i < n; ++i) basis(total + i, col) = e_s[i];
    for (int i = 0; i < mr; ++i) basis(total + n + i, col) = e_r[i];
    for (int i = 0; i < mp; ++i) basis(total + n + mr + i, col) = e_p[i];
    ++col;
  };

  const Vec zn(n, 0.0), zr(mr, 0.0), zp(mp, 0.0);

  // admissible storage efforts: e_s in ker B^T, f = graph map of e_s
  for (const Vec& es : kernel)
    put(scale(-1.0, matvec(jx, es)), matvec(transpose(grx), es),
        matvec(transpose(gx), es), es, zr, zp);
  // multiplier directions: -f_s = B lam*
  for (int i = 0; i < k; ++i) {
    Vec fs(n);
    for (int r = 0; r < n; ++r) fs[r] = -bx(r, i);
    put(fs, zr, zp, zn, zr, zp);
  }
  // dissipation-port efforts
  for (int i = 0; i < mr; ++i) {
    Vec fs(n);
    for (int r = 0; r < n; ++r) fs[r] = -grx(r, i);
    put(fs, zr, zp, zn, unit_vec(mr, i), zp);
  }
  // external-port efforts
  for (int i = 0; i < mp; ++i) {
    Vec fs(n);
    for (int r = 0; r < n; ++r) fs[r] = -gx(r, i);
    put(fs, zr, zp, zn, zr, unit_vec(mp, i));
  }

  return basis;
}

namespace {

double pairing(const Mat& basis, const Vec& coeff) {
  const int total = basis.cols;
  Vec f(total, 0.0), e(total, 0.0);
  for (int c = 0; c < total; ++c) {
    if (coeff[c] == 0.0) continue;
    for (int i = 0; i < total; ++i) {
      f[i] += coeff[c] * basis(i, c);
      e[i] += coeff[c] * basis(total + i, c);
    }
  }
  return dot(e, f);
}

}  // namespace

ValidationReport validate_dirac(const DiracStructure& d, const std::vector<Vec>& samples,
                                std::uint64_t seed, RunMode mode) {
  if (samples.empty()) throw DimensionMismatch("validate_dirac: no sample points");

  ValidationReport report;
  report.expected_dim = d.total_port_dim();
  report.samples.resize(samples.size());

  const int total = d.total_port_dim();
  constexpr int kRandomCombos = 20;

  for_each_index(static_cast<int>(samples.size()), mode, [&](int s) {
    DiracSampleCheck& check = report.samples[static_cast<std::size_t>(s)];
    check.x = samples[static_cast<std::size_t>(s)];

    const Mat jx = d.j.eval(check.x);
    double skew = 0.0;
    for (int i = 0; i < d.n; ++i)
      for (int j = 0; j < d.n; ++j) skew = std::max(skew, std::abs(jx(i, j) + jx(j, i)));
    check.skewness = skew;

    const Mat basis = dirac_sample_basis(d, check.x);

    double iso = 0.0;
    for (int c = 0; c < total; ++c) {
      Vec coeff(total, 0.0);
      coeff[c] = 1.0;
      iso = std::max(iso, std::abs(pairing(basis, coeff)));
    }
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(s)));
    for (int r = 0; r < kRandomCombos; ++r) {
      Vec coeff(total);
      for (int c = 0; c < total; ++c) coeff[c] = 2.0 * uniform01(rng) - 1.0;
      iso = std::max(iso, std::abs(pairing(basis, coeff)));
    }
    check.isotropy = iso;
    check.dim = numerical_rank(basis);
    check.pass = iso <= 1e-10 && skew <= 1e-10 && check.dim == total;
  });

  report.passed = true;
  for (std::size_t s = 0; s < report.samples.size(); ++s) {
    const DiracSampleCheck& c = report.samples[s];
    report.passed = report.passed && c.pass;
    report.max_skewness = std::max(report.max_skewness, c.skewness);
    if (c.isotropy >= report.max_isotropy) {
      report.max_isotropy = c.isotropy;
      report.worst_sample = static_cast<int>(s);
    }
  }
  return report;
}

namespace {

Membership membership_explicit(const ExplicitHamiltonian& s, const Vec& x, const Vec& e,
                               double tol) {
  Membership m;
  const Vec gh = s.h.grad(x);
  m.residual = norm_inf(e - gh);
  m.member = m.residual <= tol;
  return m;
}

Membership membership_generating(const GeneratingFunction& s, const Vec& x, const Vec& e,
                                 double tol) {
  const int ni = static_cast<int>(s.idx_i.size());
  const int nj = static_cast<int>(s.idx_j.size());
  Vec z(ni + nj);
  for (int a = 0; a < ni; ++a) z[a] = x[static_cast<std::size_t>(s.idx_i[a])];
  for (int b = 0; b < nj; ++b) z[ni + b] = e[static_cast<std::size_t>(s.idx_j[b])];

  double res = 0.0;
  for (int a = 0; a < ni; ++a)
    res = std::max(res, std::abs(e[static_cast<std::size_t>(s.idx_i[a])] -
                                 s.v.derivative(a).eval(z)));
  for (int b = 0; b < nj; ++b)
    res = std::max(res, std::abs(x[static_cast<std::size_t>(s.idx_j[b])] +
                                 s.v.derivative(ni + b).eval(z)));
  Membership m;
  m.residual = res;
  m.member = res <= tol;
  m.witness.assign(z.begin() + ni, z.end());
  return m;
}

Membership membership_morse(const MorseFamily& s, const Vec& x, const Vec& e, double tol,
                            std::uint64_t seed) {
  const int n = s.n, k = s.k;
  std::vector<ExprTree> c_lam = morse_lambda_grad(s);
  std::vector<ExprTree> c_x = morse_x_grad(s);
  std::vector<std::vector<ExprTree>> jac(static_cast<std::size_t>(k + n));
  for (int i = 0; i < k; ++i)
    for (int l = 0; l < k; ++l)
      jac[static_cast<std::size_t>(i)].push_back(c_lam[static_cast<std::size_t>(i)].derivative(n + l));
  for (int j = 0; j < n; ++j)
    for (int l = 0; l < k; ++l)
      jac[static_cast<std::size_t>(k + j)].push_back(c_x[static_cast<std::size_t>(j)].derivative(n + l));

  auto full_point = [&](const Vec& lam) {
    Vec p(x);
    p.insert(p.end(), lam.begin(), lam.end());
    return p;
  };
  VecFn residual = [&](const Vec& lam) {
    const Vec p = full_point(lam);
    Vec r(static_cast<std::size_t>(k + n));
    for (int i = 0; i < k; ++i) r[static_cast<std::size_t>(i)] = c_lam[static_cast<std::size_t>(i)].eval(p);
    for (int j = 0; j < n; ++j)
      r[static_cast<std::size_t>(k + j)] = c_x[static_cast<std::size_t>(j)].eval(p) - e[static_cast<std::size_t>(j)];
    return r;
  };
  MatFn jacobian = [&](const Vec& lam) {
    const Vec p = full_point(lam);
    Mat m(k + n, k);
    for (int r = 0; r < k + n; ++r)
      for (int c = 0; c < k; ++c)
        m(r, c) = jac[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].eval(p);
    return m;
  };

  Membership out;
  out.residual = std::numeric_limits<double>::infinity();
  NewtonConfig cfg;
  cfg.tolerance = tol;
  cfg.max_iterations = 60;
  for (const Vec& start : lattice_starts(k, seed)) {
    NewtonResult res = gauss_newton(residual, jacobian, start, cfg);
    if (res.residual_norm < out.residual) {
      out.residual = res.residual_norm;
      out.witness = res.x;
    }
    if (res.status == SolveStatus::converged && res.residual_norm <= tol) {
      out.member = true;
      out.residual = res.residual_norm;
      out.witness = res.x;
      break;
    }
  }
  return out;
}

// Constraint equations in `d` unknowns; decides feasibility exactly when
// the equations are affine in the unknowns, otherwise multi-start Newton.
ProbeResult probe_equations(const std::vector<ExprTree>& eqs, const Vec& fixed_prefix,
                            int d, double tol, std::uint64_t seed,
                            bool unknowns_after_prefix) {
  // eqs are trees over (prefix vars..., unknown vars...) when
  // unknowns_after_prefix; the point is assembled accordingly.
  auto full_point = [&](const Vec& u) {
    Vec p(fixed_prefix);
    p.insert(p.end(), u.begin(), u.end());
    return p;
  };
  (void)unknowns_after_prefix;
  const int prefix = static_cast<int>(fixed_prefix.size());
  const int m = static_cast<int>(eqs.size());

  bool affine = true;
  for (const ExprTree& c : eqs)
    for (int l = 0; l < d && affine; ++l)
      for (int q = 0; q < d && affine; ++q)
        affine = c.derivative(prefix + l).derivative(prefix + q).is_zero();

  ProbeResult out;
  if (affine) {
    const Vec origin = full_point(Vec(static_cast<std::size_t>(d), 0.0));
    Mat a(m, d);
    Vec c0(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
      c0[static_cast<std::size_t>(i)] = eqs[static_cast<std::size_t>(i)].eval(origin);
      for (int l = 0; l < d; ++l)
        a(i, l) = eqs[static_cast<std::size_t>(i)].derivative(prefix + l).eval(origin);
    }
    LeastSquaresResult ls = least_squares(a, scale(-1.0, c0));
    out.residual = ls.residual;
    if (ls.residual <= std::max(tol, 1e-9 * (1.0 + norm2(c0)))) {
      out.verdict = Feasibility::feasible;
      out.witness = ls.x;
    } else {
      out.verdict = Feasibility::infeasible;
    }
    return out;
  }

  VecFn residual = [&](const Vec& u) {
    const Vec p = full_point(u);
    Vec r(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) r[static_cast<std::size_t>(i)] = eqs[static_cast<std::size_t>(i)].eval(p);
    return r;
  };
  MatFn jacobian = [&](const Vec& u) {
    const Vec p = full_point(u);
    Mat jm(m, d);
    for (int i = 0; i < m; ++i)
      for (int l = 0; l < d; ++l)
        jm(i, l) = eqs[static_cast<std::size_t>(i)].derivative(prefix + l).eval(p);
    return jm;
  };

  NewtonConfig cfg;
  cfg.tolerance = tol;
  cfg.max_iterations = 60;
  out.residual = std::numeric_limits<double>::infinity();
  for (const Vec& start : lattice_starts(d, seed)) {
    NewtonResult res = (m == d)
                           ? newton_solve_status(residual, jacobian, start, cfg)
                           : gauss_newton(residual, jacobian, start, cfg);
    if (res.residual_norm < out.residual) out.residual = res.residual_norm;
    if (res.status == SolveStatus::converged) {
      out.verdict = Feasibility::feasible;
      out.witness = res.x;
      out.residual = res.residual_norm;
      return out;
    }
  }
  out.verdict = Feasibility::inconclusive;
  return out;
}

}  // namespace

Membership lagrangian_membership(const StorageRelation& s, const Vec& x, const Vec& e,
                                 double tol, std::uint64_t seed) {
  const int n = storage_state_dim(s);
  if (static_cast<int>(x.size()) != n || static_cast<int>(e.size()) != n)
    throw DimensionMismatch("lagrangian_membership: point dimensions do not match storage");
  if (const auto* h = std::get_if<ExplicitHamiltonian>(&s)) return membership_explicit(*h, x, e, tol);
  if (const auto* gf = std::get_if<GeneratingFunction>(&s)) return membership_generating(*gf, x, e, tol);
  return membership_morse(std::get<MorseFamily>(s), x, e, tol, seed);
}

ProbeResult lagrange_constraint_probe(const StorageRelation& s, const Vec& x, double tol,
                                      std::uint64_t seed) {
  if (std::holds_alternative<ExplicitHamiltonian>(s)) {
    // graph storage projects onto the whole state space
    ProbeResult r;
    r.verdict = Feasibility::feasible;
    return r;
  }
  if (const auto* gf = std::get_if<GeneratingFunction>(&s)) {
    const int ni = static_cast<int>(gf->idx_i.size());
    const int nj = static_cast<int>(gf->idx_j.size());
    // constraints x_J + dV/de_J(x_I, e_J) = 0 in the unknowns e_J
    std::vector<ExprTree> eqs;
    const VarList& vars = gf->v.variables();
    for (int b = 0; b < nj; ++b)
      eqs.push_back(constant(vars, x[static_cast<std::size_t>(gf->idx_j[b])]) +
                    gf->v.derivative(ni + b));
    Vec prefix(static_cast<std::size_t>(ni));
    for (int a = 0; a < ni; ++a) prefix[static_cast<std::size_t>(a)] = x[static_cast<std::size_t>(gf->idx_i[a])];
    return probe_equations(eqs, prefix, nj, tol, seed, true);
  }
  const MorseFamily& mf = std::get<MorseFamily>(s);
  return probe_equations(morse_lambda_grad(mf), x, mf.k, tol, seed, true);
}

MorseReport validate_morse(const MorseFamily& s, const std::vector<Vec>& x_samples,
                           std::uint64_t seed, RunMode mode) {
  const int n = s.n, k = s.k;
  const std::vector<ExprTree> c_lam = morse_lambda_grad(s);
  // the Jacobian of dF/dlambda in all (x, lambda) unknowns is exactly the
  // k x (n+k) second-partials block whose rank the condition is about
  std::vector<std::vector<ExprTree>> block(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i)
    for (int m = 0; m < n + k; ++m)
      block[static_cast<std::size_t>(i)].push_back(c_lam[static_cast<std::size_t>(i)].derivative(m));

  VecFn residual = [&](const Vec& w) {
    Vec r(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) r[static_cast<std::size_t>(i)] = c_lam[static_cast<std::size_t>(i)].eval(w);
    return r;
  };
  MatFn jacobian = [&](const Vec& w) {
    Mat m(k, n + k);
    for (int i = 0; i < k; ++i)
      for (int c = 0; c < n + k; ++c)
        m(i, c) = block[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)].eval(w);
    return m;
  };

  std::vector<std::optional<MorseCheck>> found(x_samples.size());
  for_each_index(static_cast<int>(x_samples.size()), mode, [&](int si) {
    // zero tolerances squeeze the residual to the numerical floor, so
    // degenerate zero sets (where the rank genuinely drops) are not
    // masked by an early Newton stop
    NewtonConfig cfg;
    cfg.tolerance = 0.0;
    cfg.max_iterations = 200;
    const std::uint64_t local_seed = derive_seed(seed, static_cast<std::uint64_t>(si));
    for (const Vec& lam0 : lattice_starts(k, local_seed)) {
      Vec w0 = x_samples[static_cast<std::size_t>(si)];
      w0.insert(w0.end(), lam0.begin(), lam0.end());
      const NewtonResult res = gauss_newton(residual, jacobian, w0, cfg, 0.0);
      if (res.residual_norm > 1e-10) continue;
      MorseCheck check;
      check.x.assign(res.x.begin(), res.x.begin() + n);
      check.lambda.assign(res.x.begin() + n, res.x.end());
      check.sigma_min = smallest_singular_value(jacobian(res.x));
      found[static_cast<std::size_t>(si)] = std::move(check);
      break;
    }
  });

  MorseReport report;
  for (auto& check : found)
    if (check) report.points.push_back(std::move(*check));
  if (report.points.empty())
    throw NoZeroSetPointFound("validate_morse: no zero-set point located from " +
                              std::to_string(x_samples.size()) + " samples");
  report.min_sigma = std::numeric_limits<double>::infinity();
  for (const MorseCheck& c : report.points)
    report.min_sigma = std::min(report.min_sigma, c.sigma_min);
  report.passed = report.min_sigma >= 1e-8;
  return report;
}

GfChart build_gf_chart(const GeneratingFunction& gf,
                       const std::vector<std::string>& state_names) {
  (void)state_names;
  const int ni = static_cast<int>(gf.idx_i.size());
  const int nj = static_cast<int>(gf.idx_j.size());
  GfChart chart;
  chart.vars = gf.v.variables();
  chart.x.resize(static_cast<std::size_t>(gf.n));
  chart.e.resize(static_cast<std::size_t>(gf.n));
  for (int a = 0; a < ni; ++a) {
    chart.x[static_cast<std::size_t>(gf.idx_i[a])] = variable(chart.vars, a);
    chart.e[static_cast<std::size_t>(gf.idx_i[a])] = gf.v.derivative(a);
  }
  for (int b = 0; b < nj; ++b) {
    chart.x[static_cast<std::size_t>(gf.idx_j[b])] = -gf.v.derivative(ni + b);
    chart.e[static_cast<std::size_t>(gf.idx_j[b])] = variable(chart.vars, ni + b);
  }
  return chart;
}

std::vector<ExprTree> morse_lambda_grad(const MorseFamily& s) {
  std::vector<ExprTree> out;
  out.reserve(static_cast<std::size_t>(s.k));
  for (int i = 0; i < s.k; ++i) out.push_back(s.f.derivative(s.n + i));
  return out;
}

std::vector<ExprTree> morse_x_grad(const MorseFamily& s) {
  std::vector<ExprTree> out;
  out.reserve(static_cast<std::size_t>(s.n));
  for (int j = 0; j < s.n; ++j) out.push_back(s.f.derivative(j));
  return out;
}

int storage_state_dim(const StorageRelation& s) {
  if (const auto* h = std::get_if<ExplicitHamiltonian>(&s)) return h->h.arity();
  if (const auto* gf = std::get_if<GeneratingFunction>(&s)) return gf->n;
  return std::get<MorseFamily>(s).n;
}

}  // namespace phdae
