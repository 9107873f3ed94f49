#include "phdae/phsystem.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace phdae {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw DimensionMismatch(msg);
}

std::vector<int> iota_map(int n) {
  std::vector<int> m(static_cast<std::size_t>(n));
  std::iota(m.begin(), m.end(), 0);
  return m;
}

MatrixExpr remap_matrix(const MatrixExpr& m, const std::vector<int>& index_map,
                        const VarList& vars) {
  MatrixExpr out(m.rows, m.cols);
  for (std::size_t i = 0; i < m.entries.size(); ++i)
    out.entries[i] = remap_variables(m.entries[i], index_map, vars);
  return out;
}

std::vector<std::string> lambda_names(int k) {
  std::vector<std::string> names;
  for (int i = 0; i < k; ++i) names.push_back("lam" + std::to_string(i + 1));
  return names;
}

Box extend_box(const Box& box, int extra) {
  Box out = box;
  for (int i = 0; i < extra; ++i) {
    out.lo.push_back(-1.0);
    out.hi.push_back(1.0);
  }
  return out;
}

void check_storage_shape(const StorageRelation& s, int n) {
  if (const auto* h = std::get_if<ExplicitHamiltonian>(&s)) {
    require(h->h.arity() == n, "Hamiltonian arity != state dimension");
    return;
  }
  if (const auto* gf = std::get_if<GeneratingFunction>(&s)) {
    require(gf->n == n, "generating function state dimension mismatch");
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    for (int i : gf->idx_i) {
      require(i >= 0 && i < n && !seen[static_cast<std::size_t>(i)],
              "I indices must partition the state indices");
      seen[static_cast<std::size_t>(i)] = 1;
    }
    for (int j : gf->idx_j) {
      require(j >= 0 && j < n && !seen[static_cast<std::size_t>(j)],
              "J indices must partition the state indices");
      seen[static_cast<std::size_t>(j)] = 1;
    }
    require(std::all_of(seen.begin(), seen.end(), [](char c) { return c; }),
            "I and J must cover all state indices");
    require(gf->v.arity() == n, "V arity != |I| + |J|");
    return;
  }
  const MorseFamily& mf = std::get<MorseFamily>(s);
  require(mf.n == n, "Morse family state dimension mismatch");
  require(mf.k >= 1, "Morse family needs at least one parameter");
  require(mf.f.arity() == n + mf.k, "F arity != n + k");
}

}  // namespace

PHSystem assemble(DiracStructure d, StorageRelation s, Mat rbar,
                  std::vector<std::string> names, std::optional<Box> box,
                  std::uint64_t seed) {
  const int n = d.n;
  require(static_cast<int>(names.size()) == n, "state name count != n");
  require(storage_state_dim(s) == n, "storage dimension != n");
  require(d.j.rows == n && d.j.cols == n, "J must be n x n");
  require(d.b.rows == n || d.b.cols == 0, "B must have n rows");
  require(d.g_r.rows == n || d.g_r.cols == 0, "G_R must have n rows");
  require(d.g.rows == n || d.g.cols == 0, "G must have n rows");
  require(rbar.rows == d.m_r() && rbar.cols == d.m_r(), "Rbar must be m_r x m_r");
  check_storage_shape(s, n);

  if (d.m_r() > 0) {
    const double scale = 1.0 + max_abs(rbar);
    for (int i = 0; i < rbar.rows; ++i)
      for (int j = i + 1; j < rbar.cols; ++j)
        if (std::abs(rbar(i, j) - rbar(j, i)) > 1e-12 * scale)
          throw ValidationFailed("Rbar is not symmetric");
    const Vec eigs = symmetric_eigenvalues(rbar);
    if (!eigs.empty() && eigs.front() < -1e-12)
      throw ValidationFailed("Rbar has a negative eigenvalue (" +
                             std::to_string(eigs.front()) +
                             "); dissipation must be positive semidefinite");
  }

  PHSystem sys;
  sys.dirac = std::move(d);
  sys.storage = std::move(s);
  sys.rbar = std::move(rbar);
  sys.state_names = std::move(names);
  sys.state_vars = make_variables(sys.state_names);
  sys.sample_box = box ? *box : Box::centered(n);

  const std::vector<Vec> samples = sample_box(sys.sample_box, 100, seed);
  ValidationReport report;
  try {
    report = validate_dirac(sys.dirac, samples, seed);
  } catch (const RankDeficientConstraint& e) {
    throw ValidationFailed(std::string("Dirac validation failed: ") + e.what());
  }
  if (!report.passed)
    throw ValidationFailed(
        "Dirac axioms violated over the sample box: max isotropy residual " +
        std::to_string(report.max_isotropy) + ", max skewness " +
        std::to_string(report.max_skewness));

  if (const auto* mf = std::get_if<MorseFamily>(&sys.storage)) {
    MorseReport morse = validate_morse(*mf, samples, seed);
    if (!morse.passed)
      throw ValidationFailed("Morse rank condition failed: sigma_min = " +
                             std::to_string(morse.min_sigma) + " < 1e-8");
  }

  return sys;
}

std::optional<IsoForm> is_input_state_output(const PHSystem& sys) {
  if (sys.k() != 0 || !sys.has_explicit_storage()) return std::nullopt;
  const VarList& vars = sys.state_vars;
  IsoForm iso;
  iso.h = std::get<ExplicitHamiltonian>(sys.storage).h;
  iso.g = sys.dirac.g;
  iso.j_minus_r = MatrixExpr(sys.n(), sys.n());
  for (int i = 0; i < sys.n(); ++i)
    for (int l = 0; l < sys.n(); ++l) {
      ExprTree r = constant(vars, 0.0);
      for (int p = 0; p < sys.m_r(); ++p)
        for (int q = 0; q < sys.m_r(); ++q)
          r = r + sys.dirac.g_r(i, p) * constant(vars, sys.rbar(p, q)) * sys.dirac.g_r(l, q);
      iso.j_minus_r(i, l) = sys.dirac.j(i, l) - r;
    }
  return iso;
}

namespace {

// Constraint functions of the storage projection, posed over a joint
// variable list (state..., unknowns...). Returns the equations plus the
// number of unknowns.
struct ProjectionEquations {
  std::vector<ExprTree> eqs;  // over (state..., unknown...)
  VarList joint_vars;
  int unknowns = 0;
};

ProjectionEquations projection_equations(const PHSystem& sys) {
  ProjectionEquations out;
  const int n = sys.n();
  if (const auto* gf = std::get_if<GeneratingFunction>(&sys.storage)) {
    const int ni = static_cast<int>(gf->idx_i.size());
    const int nj = static_cast<int>(gf->idx_j.size());
    std::vector<std::string> joint = sys.state_names;
    const std::vector<std::string>& chart_names = *gf->v.variables();
    for (int b = 0; b < nj; ++b) joint.push_back(chart_names[static_cast<std::size_t>(ni + b)]);
    out.joint_vars = make_variables(joint);
    std::vector<int> vmap(static_cast<std::size_t>(ni + nj));
    for (int a = 0; a < ni; ++a) vmap[static_cast<std::size_t>(a)] = gf->idx_i[a];
    for (int b = 0; b < nj; ++b) vmap[static_cast<std::size_t>(ni + b)] = n + b;
    for (int b = 0; b < nj; ++b)
      out.eqs.push_back(variable(out.joint_vars, gf->idx_j[b]) +
                        remap_variables(gf->v.derivative(ni + b), vmap, out.joint_vars));
    out.unknowns = nj;
    return out;
  }
  const MorseFamily& mf = std::get<MorseFamily>(sys.storage);
  out.joint_vars = mf.f.variables();
  out.eqs = morse_lambda_grad(mf);
  out.unknowns = mf.k;
  return out;
}

Vec storage_effort_from_witness(const PHSystem& sys, const Vec& x, const Vec& witness) {
  if (const auto* h = std::get_if<ExplicitHamiltonian>(&sys.storage)) return h->h.grad(x);
  if (const auto* gf = std::get_if<GeneratingFunction>(&sys.storage)) {
    const int ni = static_cast<int>(gf->idx_i.size());
    Vec z;
    for (int a = 0; a < ni; ++a) z.push_back(x[static_cast<std::size_t>(gf->idx_i[a])]);
    z.insert(z.end(), witness.begin(), witness.end());
    Vec e(static_cast<std::size_t>(sys.n()), 0.0);
    for (int a = 0; a < ni; ++a)
      e[static_cast<std::size_t>(gf->idx_i[a])] = gf->v.derivative(a).eval(z);
    for (std::size_t b = 0; b < gf->idx_j.size(); ++b)
      e[static_cast<std::size_t>(gf->idx_j[b])] = witness[b];
    return e;
  }
  const MorseFamily& mf = std::get<MorseFamily>(sys.storage);
  Vec p(x);
  p.insert(p.end(), witness.begin(), witness.end());
  Vec e(static_cast<std::size_t>(sys.n()));
  for (int j = 0; j < sys.n(); ++j) e[static_cast<std::size_t>(j)] = mf.f.derivative(j).eval(p);
  return e;
}

}  // namespace

ConstraintReport extract_constraints(const PHSystem& sys, std::uint64_t seed) {
  ConstraintReport report;
  const int n = sys.n();
  const int k = sys.k();

  if (k >= 1) {
    if (sys.has_explicit_storage()) {
      const ExprTree& h = std::get<ExplicitHamiltonian>(sys.storage).h;
      std::vector<ExprTree> dh;
      for (int j = 0; j < n; ++j) dh.push_back(h.derivative(j));
      for (int c = 0; c < k; ++c) {
        ExprTree g = constant(sys.state_vars, 0.0);
        for (int j = 0; j < n; ++j) g = g + sys.dirac.b(j, c) * dh[static_cast<std::size_t>(j)];
        Constraint entry;
        entry.cls = Constraint::Class::dirac;
        entry.label = g.to_string();
        entry.residual_tree = g;
        ExprTree g_copy = g;
        entry.residual = [g_copy](const Vec& x) { return g_copy.eval(x); };
        report.constraints.push_back(std::move(entry));
      }
    } else {
      // effort is only implicitly determined; expose numeric residuals
      for (int c = 0; c < k; ++c) {
        Constraint entry;
        entry.cls = Constraint::Class::dirac;
        entry.label = "B^T(x) e_S [" + std::to_string(c + 1) + "] (implicit storage)";
        const PHSystem* sys_ptr = &sys;
        const std::uint64_t probe_seed = seed;
        entry.residual = [sys_ptr, c, probe_seed](const Vec& x) {
          ProbeResult pr = lagrange_constraint_probe(sys_ptr->storage, x, 1e-8, probe_seed);
          if (pr.verdict != Feasibility::feasible)
            throw NoConvergence("no storage effort located at the probe point");
          const Vec e = storage_effort_from_witness(*sys_ptr, x, pr.witness);
          const Mat bx = sys_ptr->dirac.b.eval(x);
          double r = 0.0;
          for (int row = 0; row < bx.rows; ++row) r += bx(row, c) * e[static_cast<std::size_t>(row)];
          return r;
        };
        report.constraints.push_back(std::move(entry));
      }
    }
  }

  if (!sys.has_explicit_storage()) {
    const ProjectionEquations proj = projection_equations(sys);
    const int d = proj.unknowns;

    bool affine = true;
    bool coeffs_constant = true;
    for (const ExprTree& c : proj.eqs) {
      for (int l = 0; l < d && affine; ++l) {
        const ExprTree first = c.derivative(n + l);
        if (!first.as_constant()) coeffs_constant = false;
        for (int q = 0; q < d && affine; ++q)
          affine = first.derivative(n + q).is_zero();
      }
    }

    bool symbolic_done = false;
    if (affine && coeffs_constant) {
      Mat a(static_cast<int>(proj.eqs.size()), d);
      for (std::size_t i = 0; i < proj.eqs.size(); ++i)
        for (int l = 0; l < d; ++l)
          a(static_cast<int>(i), l) = *proj.eqs[i].derivative(n + l).as_constant();
      const std::vector<Vec> left_null = kernel_of_transpose(a);
      // substitute unknowns by zero to obtain the state-only part
      std::vector<ExprTree> repl;
      for (int i = 0; i < n; ++i) repl.push_back(variable(sys.state_vars, i));
      for (int l = 0; l < d; ++l) repl.push_back(constant(sys.state_vars, 0.0));
      std::vector<ExprTree> c0;
      for (const ExprTree& c : proj.eqs) c0.push_back(substitute(c, repl, sys.state_vars));
      for (const Vec& y : left_null) {
        ExprTree t = constant(sys.state_vars, 0.0);
        for (std::size_t b = 0; b < c0.size(); ++b)
          t = t + constant(sys.state_vars, y[b]) * c0[b];
        Constraint entry;
        entry.cls = Constraint::Class::lagrange;
        entry.label = t.to_string();
        entry.residual_tree = t;
        ExprTree t_copy = t;
        entry.residual = [t_copy](const Vec& x) { return t_copy.eval(x); };
        report.constraints.push_back(std::move(entry));
      }
      symbolic_done = true;
    }

    const std::vector<Vec> samples = sample_box(sys.sample_box, 100, seed);
    int feasible = 0, infeasible = 0, inconclusive = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      ProbeResult pr = lagrange_constraint_probe(sys.storage, samples[i], 1e-8,
                                                 derive_seed(seed, i));
      switch (pr.verdict) {
        case Feasibility::feasible:
          ++feasible;
          break;
        case Feasibility::infeasible:
          ++infeasible;
          break;
        case Feasibility::inconclusive:
          ++inconclusive;
          break;
      }
      report.lagrange_probes.emplace_back(samples[i], std::move(pr));
    }
    report.inconclusive_only = (feasible == 0 && infeasible == 0 && inconclusive > 0);

    if (!symbolic_done && (infeasible > 0 || inconclusive > 0)) {
      Constraint entry;
      entry.cls = Constraint::Class::lagrange;
      entry.label = "x in pi(L) (numeric probe; " + std::to_string(infeasible) +
                    " infeasible, " + std::to_string(inconclusive) +
                    " inconclusive of " + std::to_string(samples.size()) + " samples)";
      const StorageRelation storage_copy = sys.storage;
      const std::uint64_t probe_seed = seed;
      entry.residual = [storage_copy, probe_seed](const Vec& x) {
        return lagrange_constraint_probe(storage_copy, x, 1e-8, probe_seed).residual;
      };
      report.constraints.push_back(std::move(entry));
    }
  }

  return report;
}

PHSystem dirac_to_lagrange(const PHSystem& sys) {
  if (!sys.has_explicit_storage())
    throw UnsupportedStorage("dirac_to_lagrange requires explicit Hamiltonian storage");
  const int n = sys.n();
  const int k = sys.k();
  if (k == 0) throw NothingToConvert("system has no Dirac algebraic constraints");

  std::vector<std::string> ext_names = sys.state_names;
  for (const std::string& lam : lambda_names(k)) ext_names.push_back(lam);
  VarList ext_vars = make_variables(ext_names);
  const std::vector<int> id = iota_map(n);

  const MatrixExpr j_old = remap_matrix(sys.dirac.j, id, ext_vars);
  const MatrixExpr b_old = remap_matrix(sys.dirac.b, id, ext_vars);

  MatrixExpr je = zero_matrix_expr(ext_vars, n + k, n + k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) je(i, j) = j_old(i, j);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < k; ++c) {
      je(i, n + c) = b_old(i, c);
      je(n + c, i) = -b_old(i, c);
    }

  MatrixExpr gre = zero_matrix_expr(ext_vars, n + k, sys.m_r());
  MatrixExpr ge = zero_matrix_expr(ext_vars, n + k, sys.m_p());
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < sys.m_r(); ++c) gre(i, c) = remap_variables(sys.dirac.g_r(i, c), id, ext_vars);
    for (int c = 0; c < sys.m_p(); ++c) ge(i, c) = remap_variables(sys.dirac.g(i, c), id, ext_vars);
  }

  // storage: V(x, e_lam) = H(x), independent of the new costates
  std::vector<std::string> chart_names = sys.state_names;
  for (const std::string& lam : lambda_names(k)) chart_names.push_back("e_" + lam);
  VarList chart_vars = make_variables(chart_names);
  GeneratingFunction gf;
  gf.n = n + k;
  gf.idx_i = iota_map(n);
  for (int c = 0; c < k; ++c) gf.idx_j.push_back(n + c);
  gf.v = remap_variables(std::get<ExplicitHamiltonian>(sys.storage).h, id, chart_vars);

  DiracStructure de;
  de.n = n + k;
  de.j = std::move(je);
  de.b = MatrixExpr(n + k, 0);
  de.g_r = std::move(gre);
  de.g = std::move(ge);

  return assemble(std::move(de), StorageRelation(std::move(gf)), sys.rbar, std::move(ext_names),
                  extend_box(sys.sample_box, k));
}

PHSystem lagrange_to_dirac(const PHSystem& sys) {
  if (sys.has_explicit_storage())
    throw NothingToConvert("storage is already an explicit Hamiltonian");
  const int n = sys.n();

  int km = 0;
  std::vector<std::string> ext_names = sys.state_names;
  ExprTree f_ext;
  VarList ext_vars;

  if (const auto* gf = std::get_if<GeneratingFunction>(&sys.storage)) {
    km = static_cast<int>(gf->idx_j.size());
    for (const std::string& lam : lambda_names(km)) ext_names.push_back(lam);
    ext_vars = make_variables(ext_names);
    // canonical Morse family F(x, lam) = V(x_I, lam) + lam^T x_J
    std::vector<ExprTree> repl;
    for (std::size_t a = 0; a < gf->idx_i.size(); ++a)
      repl.push_back(variable(ext_vars, gf->idx_i[a]));
    for (int b = 0; b < km; ++b) repl.push_back(variable(ext_vars, n + b));
    f_ext = substitute(gf->v, repl, ext_vars);
    for (int b = 0; b < km; ++b)
      f_ext = f_ext + variable(ext_vars, n + b) * variable(ext_vars, gf->idx_j[b]);
  } else {
    const MorseFamily& mf = std::get<MorseFamily>(sys.storage);
    km = mf.k;
    for (const std::string& lam : lambda_names(km)) ext_names.push_back(lam);
    ext_vars = make_variables(ext_names);
    f_ext = remap_variables(mf.f, iota_map(n + km), ext_vars);
  }

  MorseFamily family;
  family.n = n;
  family.k = km;
  family.f = f_ext;
  const MorseReport rank_report =
      validate_morse(family, sample_box(sys.sample_box, 100, kDefaultSeed));
  if (!rank_report.passed)
    throw MorseRankFailure("Morse rank condition fails on the storage family: sigma_min = " +
                           std::to_string(rank_report.min_sigma));

  const std::vector<int> id = iota_map(n);
  MatrixExpr je = zero_matrix_expr(ext_vars, n + km, n + km);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) je(i, j) = remap_variables(sys.dirac.j(i, j), id, ext_vars);

  const int k_old = sys.k();
  MatrixExpr be = zero_matrix_expr(ext_vars, n + km, k_old + km);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < k_old; ++c) be(i, c) = remap_variables(sys.dirac.b(i, c), id, ext_vars);
  for (int c = 0; c < km; ++c) be(n + c, k_old + c) = constant(ext_vars, 1.0);

  MatrixExpr gre = zero_matrix_expr(ext_vars, n + km, sys.m_r());
  MatrixExpr ge = zero_matrix_expr(ext_vars, n + km, sys.m_p());
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < sys.m_r(); ++c) gre(i, c) = remap_variables(sys.dirac.g_r(i, c), id, ext_vars);
    for (int c = 0; c < sys.m_p(); ++c) ge(i, c) = remap_variables(sys.dirac.g(i, c), id, ext_vars);
  }

  DiracStructure de;
  de.n = n + km;
  de.j = std::move(je);
  de.b = std::move(be);
  de.g_r = std::move(gre);
  de.g = std::move(ge);

  return assemble(std::move(de), StorageRelation(ExplicitHamiltonian{f_ext}), sys.rbar,
                  std::move(ext_names), extend_box(sys.sample_box, km));
}

std::pair<PHSystem, PHSystem> build_optimal_control(const MatrixExpr& f, const ExprTree& l,
                                                    int n, int m) {
  require(f.rows == n && f.cols == 1, "f must be an n x 1 expression column");
  require(l.arity() == n + m, "L must be an expression over (q, u)");
  for (const ExprTree& e : f.entries)
    require(e.arity() == n + m, "f entries must be expressions over (q, u)");

  const std::vector<std::string>& qu = *l.variables();
  std::vector<std::string> q_names(qu.begin(), qu.begin() + n);
  std::vector<std::string> u_names(qu.begin() + n, qu.end());

  // explicit form on (q, p, u)
  std::vector<std::string> ex_names = q_names;
  for (int i = 0; i < n; ++i) ex_names.push_back("p" + std::to_string(i + 1));
  for (const std::string& u : u_names) ex_names.push_back(u);
  VarList ex_vars = make_variables(ex_names);

  std::vector<int> qu_map(static_cast<std::size_t>(n + m));
  for (int a = 0; a < n; ++a) qu_map[static_cast<std::size_t>(a)] = a;
  for (int b = 0; b < m; ++b) qu_map[static_cast<std::size_t>(n + b)] = 2 * n + b;

  ExprTree hamiltonian = remap_variables(l, qu_map, ex_vars);
  for (int i = 0; i < n; ++i)
    hamiltonian = hamiltonian + variable(ex_vars, n + i) * remap_variables(f(i, 0), qu_map, ex_vars);

  const int dim = 2 * n + m;
  MatrixExpr je = zero_matrix_expr(ex_vars, dim, dim);
  for (int i = 0; i < n; ++i) {
    je(i, n + i) = constant(ex_vars, 1.0);
    je(n + i, i) = constant(ex_vars, -1.0);
  }
  MatrixExpr be = zero_matrix_expr(ex_vars, dim, m);
  for (int b = 0; b < m; ++b) be(2 * n + b, b) = constant(ex_vars, 1.0);

  DiracStructure d_ex;
  d_ex.n = dim;
  d_ex.j = std::move(je);
  d_ex.b = std::move(be);
  d_ex.g_r = MatrixExpr(dim, 0);
  d_ex.g = MatrixExpr(dim, 0);

  PHSystem explicit_sys = assemble(std::move(d_ex), StorageRelation(ExplicitHamiltonian{hamiltonian}),
                                   Mat(0, 0), ex_names);

  // implicit form on (q, p) with K as a Morse family parametrized by u
  std::vector<std::string> im_names(ex_names.begin(), ex_names.begin() + 2 * n);
  std::vector<std::string> fam_names = im_names;
  for (const std::string& lam : lambda_names(m)) fam_names.push_back(lam);
  VarList fam_vars = make_variables(fam_names);

  MorseFamily family;
  family.n = 2 * n;
  family.k = m;
  family.f = remap_variables(hamiltonian, iota_map(dim), fam_vars);

  VarList im_vars = make_variables(im_names);
  MatrixExpr ji = zero_matrix_expr(im_vars, 2 * n, 2 * n);
  for (int i = 0; i < n; ++i) {
    ji(i, n + i) = constant(im_vars, 1.0);
    ji(n + i, i) = constant(im_vars, -1.0);
  }

  DiracStructure d_im;
  d_im.n = 2 * n;
  d_im.j = std::move(ji);
  d_im.b = MatrixExpr(2 * n, 0);
  d_im.g_r = MatrixExpr(2 * n, 0);
  d_im.g = MatrixExpr(2 * n, 0);

  PHSystem implicit_sys =
      assemble(std::move(d_im), StorageRelation(std::move(family)), Mat(0, 0), im_names);

  return {std::move(explicit_sys), std::move(implicit_sys)};
}

}  // namespace phdae
