// Acceptance suite: every release criterion runs at its stated tolerance
// and prints one PASS/FAIL line. Exit code 0 only when all pass.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "phdae/cli.hpp"
#include "phdae/fixtures.hpp"
#include "phdae/legendre.hpp"
#include "phdae/simulate.hpp"
#include "test_support.hpp"

using namespace phdae;

namespace {

struct Criterion {
  std::string name;
  std::function<bool(std::string&)> run;
};

double now_seconds() {
  using clock = std::chrono::steady_clock;
  static const clock::time_point start = clock::now();
  return std::chrono::duration<double>(clock::now() - start).count();
}

SimConfig sim_config(double t1, double dt, std::vector<std::string> inputs = {}) {
  SimConfig cfg;
  cfg.t1 = t1;
  cfg.dt = dt;
  const VarList tvar = make_variables({"t"});
  for (const std::string& u : inputs) cfg.inputs.push_back(parse(u, tvar));
  return cfg;
}

const std::vector<std::string> kValidFixtures = {
    "oscillator", "damped_oscillator", "two_capacitor", "lq_optimal_control",
    "implicit_oscillator"};

// --- 1. Dirac axioms ------------------------------------------------------

bool criterion_dirac_axioms(std::string& detail) {
  const double t0 = now_seconds();
  double worst_iso = 0.0;
  bool ok = true;
  for (const std::string& name : kValidFixtures) {
    const PHSystem sys = fixture_system(load_fixture(name));
    const std::vector<Vec> samples = sample_box(sys.sample_box, 100, kDefaultSeed);
    const ValidationReport rep = validate_dirac(sys.dirac, samples, kDefaultSeed);
    worst_iso = std::max(worst_iso, rep.max_isotropy);
    ok = ok && rep.max_isotropy <= 1e-10;
    for (const auto& s : rep.samples) ok = ok && s.dim == rep.expected_dim;
  }
  const double elapsed = now_seconds() - t0;
  std::ostringstream ss;
  ss << "max isotropy " << worst_iso << ", dim exact, " << elapsed << " s";
  detail = ss.str();
  return ok && elapsed < 5.0;
}

// --- 2. Legendre identities -----------------------------------------------

bool criterion_legendre_identities(std::string& detail) {
  const double t0 = now_seconds();
  const std::vector<ExprTree> convex = {
      parse("0.5*x^2", {"x"}),
      parse("x^2 + 0.25*x^4", {"x"}),
      parse("x^2 + 0.1*x^4 + 0.3*x", {"x"}),
  };
  double worst = 0.0;
  for (const ExprTree& p : convex) {
    Vec guess{-1.0};
    for (int s = 0; s < 21; ++s) {
      const Vec xv{-1.0 + 2.0 * s / 20.0};
      worst = std::max(worst, legendre_inverse_check(p, xv));
      worst = std::max(worst, std::abs(legendre(p, p.grad(xv), guess).value - tilde(p, xv)));
      worst = std::max(worst, tilde_grad_check(p, xv));
      // I-empty identity: V - e grad V + V~ = 0
      const double lhs = p.eval(xv) - xv[0] * p.grad(xv)[0] + tilde(p, xv);
      worst = std::max(worst, std::abs(lhs));
      guess = xv;
    }
  }
  double worst_quad = 0.0;
  const ExprTree quad = parse("x^2", {"x"});
  for (int s = 0; s < 21; ++s) {
    const Vec xv{-1.0 + 2.0 * s / 20.0};
    worst_quad = std::max(worst_quad, std::abs(tilde(quad, xv) - quad.eval(xv)));
  }
  const double elapsed = now_seconds() - t0;
  std::ostringstream ss;
  ss << "max identity residual " << worst << ", quadratic tilde gap " << worst_quad << ", "
     << elapsed << " s";
  detail = ss.str();
  return worst <= 1e-7 && worst_quad <= 1e-12 && elapsed < 5.0;
}

// --- 3. Energy balance and passivity --------------------------------------

bool criterion_energy_balance(std::string& detail) {
  const double t0 = now_seconds();
  double worst_passivity = 0.0;
  double worst_drift = 0.0;
  bool ok = true;
  for (const std::string& name : kValidFixtures) {
    const Fixture f = load_fixture(name);
    const PHSystem sys = fixture_system(f);
    SimConfig cfg = sim_config(f.default_config.t1, f.default_config.dt);
    Vec x0(static_cast<std::size_t>(sys.n()), 0.0);
    x0[0] = 1.0;
    if (name == "two_capacitor") cfg = sim_config(2.0, 1e-3, {"1"});
    const Trajectory traj = simulate(sys, x0, cfg);
    ok = ok && !traj.failure && traj.rows() >= 1000;
    const EnergyBalanceSummary bal = energy_balance(traj, sys);
    worst_passivity = std::max(worst_passivity, bal.max_passivity_violation);
    ok = ok && bal.max_passivity_violation <= 1e-8;
    const bool lossless_closed =
        (name == "oscillator" || name == "lq_optimal_control" || name == "implicit_oscillator");
    if (lossless_closed) {
      double drift = 0.0;
      for (double h : traj.energy) drift = std::max(drift, std::abs(h - traj.energy.front()));
      worst_drift = std::max(worst_drift, drift);
      ok = ok && drift <= 1e-9;
    }
  }
  const double elapsed = now_seconds() - t0;
  std::ostringstream ss;
  ss << "max passivity violation " << worst_passivity << ", max lossless drift " << worst_drift
     << ", " << elapsed << " s";
  detail = ss.str();
  return ok && elapsed < 30.0;
}

// --- 4. Dirac -> Lagrange conversion fidelity ------------------------------

bool criterion_dirac_to_lagrange(std::string& detail) {
  const PHSystem tc = fixture_system(load_fixture("two_capacitor"));
  const PHSystem conv = dirac_to_lagrange(tc);
  const SimConfig cfg = sim_config(5.0, 1e-3, {"1"});
  const Trajectory to = simulate(tc, Vec{0.0, 0.0}, cfg);
  const Trajectory tl = simulate(conv, Vec{0.0, 0.0, 0.0}, cfg);
  if (to.failure || tl.failure || to.rows() != tl.rows()) {
    detail = "simulation failed";
    return false;
  }
  double worst_x = 0.0, worst_lam = 0.0;
  for (std::size_t r = 0; r < to.rows(); ++r) {
    worst_x = std::max(worst_x, std::abs(tl.state[r][0] - to.state[r][0]));
    worst_x = std::max(worst_x, std::abs(tl.state[r][1] - to.state[r][1]));
    worst_lam = std::max(worst_lam, std::abs(tl.state[r][2]));
  }
  const ConstraintReport before = extract_constraints(tc);
  const ConstraintReport after = extract_constraints(conv);
  const bool swapped = before.count(Constraint::Class::dirac) == 1 &&
                       before.count(Constraint::Class::lagrange) == 0 &&
                       after.count(Constraint::Class::dirac) == 0 &&
                       after.count(Constraint::Class::lagrange) == 1;
  std::ostringstream ss;
  ss << "max |x - x_ref| " << worst_x << ", max |lam| " << worst_lam
     << (swapped ? ", class swap exact" : ", class swap WRONG");
  detail = ss.str();
  return worst_x <= 1e-6 && worst_lam <= 1e-8 && swapped;
}

// --- 5. Lagrange -> Dirac conversion fidelity ------------------------------

bool criterion_lagrange_to_dirac(std::string& detail) {
  const VarList qu = make_variables({"q1", "u1"});
  MatrixExpr f(1, 1);
  f(0, 0) = parse("u1", qu);
  auto [explicit_sys, implicit_sys] =
      build_optimal_control(f, parse("0.5*(q1^2 + u1^2)", qu), 1, 1);
  const PHSystem conv = lagrange_to_dirac(implicit_sys);

  const Trajectory traj = simulate(conv, Vec{1.0, 0.0, 0.0}, sim_config(1.0, 1e-3));
  if (traj.failure) {
    detail = "simulation failed: " + *traj.failure;
    return false;
  }
  const double q1 = traj.state.back()[0];
  const double q_err = std::abs(q1 - std::cosh(1.0));

  // membership equivalence across the conversion, both directions
  double worst_membership = 0.0;
  const auto& family = std::get<MorseFamily>(implicit_sys.storage);
  int count = 0;
  for (const Vec& s : sample_box(Box::centered(3), 200, kDefaultSeed)) {
    // submanifold point from (q, p) sample with the stationarity witness u = -p
    const Vec x{s[0], s[1]};
    const Vec lam{-s[1]};
    Vec p_full = x;
    p_full.insert(p_full.end(), lam.begin(), lam.end());
    Vec e(2);
    for (int j = 0; j < 2; ++j) e[static_cast<std::size_t>(j)] = family.f.derivative(j).eval(p_full);

    const Membership morse_side = lagrangian_membership(implicit_sys.storage, x, e, 1e-8);
    Vec x_ext = x;
    x_ext.push_back(lam[0]);
    Vec e_ext = e;
    e_ext.push_back(0.0);
    const Membership explicit_side = lagrangian_membership(conv.storage, x_ext, e_ext, 1e-8);
    worst_membership = std::max({worst_membership, morse_side.residual, explicit_side.residual});
    count += morse_side.member && explicit_side.member;
  }
  std::ostringstream ss;
  ss << "q(1) error " << q_err << ", membership residual " << worst_membership << " on "
     << count << "/200 samples";
  detail = ss.str();
  return q_err <= 1e-5 && worst_membership <= 1e-8 && count == 200;
}

// --- 6. Index-1 verdicts ---------------------------------------------------

bool criterion_index_check(std::string& detail) {
  const PHSystem tc = fixture_system(load_fixture("two_capacitor"));
  double worst_gap = 0.0;
  for (const Vec& x : sample_box(tc.sample_box, 100, kDefaultSeed))
    worst_gap = std::max(worst_gap, std::abs(index_check(tc, x) - 2.0));

  const VarList vars = make_variables({"x1"});
  DiracStructure d;
  d.n = 1;
  d.j = zero_matrix_expr(vars, 1, 1);
  d.b = zero_matrix_expr(vars, 1, 1);
  d.b(0, 0) = parse("1", vars);
  d.g = MatrixExpr(1, 0);
  d.g_r = MatrixExpr(1, 0);
  const PHSystem quart =
      assemble(d, ExplicitHamiltonian{parse("0.25*x1^4", vars)}, Mat(0, 0), {"x1"});
  const double sigma_origin = index_check(quart, Vec{0.0});

  std::ostringstream ss;
  ss << "two_capacitor sigma gap " << worst_gap << ", degenerate quartic sigma(0) = "
     << sigma_origin;
  detail = ss.str();
  return worst_gap <= 1e-12 && sigma_origin == 0.0;
}

// --- 7. Integrator order ---------------------------------------------------

bool criterion_integrator_order(std::string& detail) {
  const PHSystem lq = fixture_system(load_fixture("lq_optimal_control"));
  std::vector<double> errors;
  for (const double dt : {4e-3, 2e-3, 1e-3}) {
    const Trajectory traj = simulate(lq, Vec{1.0, 0.0, 0.0}, sim_config(1.0, dt));
    if (traj.failure) {
      detail = "simulation failed";
      return false;
    }
    errors.push_back(std::abs(traj.state.back()[0] - std::cosh(1.0)));
  }
  const double r1 = errors[0] / errors[1];
  const double r2 = errors[1] / errors[2];
  std::ostringstream ss;
  ss << "error ratios " << r1 << ", " << r2 << " (second order: ~4)";
  detail = ss.str();
  return r1 >= 3.5 && r1 <= 4.5 && r2 >= 3.5 && r2 <= 4.5;
}

// --- 8. Derivative correctness ---------------------------------------------

bool criterion_derivatives(std::string& detail) {
  std::mt19937_64 rng(kDefaultSeed);
  const VarList vars = make_variables({"x1", "x2", "x3"});
  int checked = 0;
  double worst = 0.0;
  while (checked < 50) {
    const ExprTree t = testsupport::random_tree(vars, rng, 4);
    const Vec x = testsupport::random_point(3, rng);
    Vec g;
    Mat h(3, 3);
    try {
      g = t.grad(x);
      h = t.hessian(x);
    } catch (const DomainError&) {
      continue;
    }
    const Vec fd_g = finite_diff_grad([&](const Vec& p) { return t.eval(p); }, x);
    const Mat fd_h =
        testsupport::finite_diff_hessian([&](const Vec& p) { return t.eval(p); }, x);
    const double gerr = norm_inf(g - fd_g) / (1.0 + norm_inf(g));
    double herr = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) herr = std::max(herr, std::abs(h(i, j) - fd_h(i, j)));
    herr /= 1.0 + max_abs(h);
    worst = std::max({worst, gerr, herr});
    if (gerr > 1e-5 || herr > 1e-5) {
      detail = "mismatch on expression: " + t.to_string();
      return false;
    }
    ++checked;
  }
  std::ostringstream ss;
  ss << "50 expressions, worst relative deviation " << worst;
  detail = ss.str();
  return true;
}

// --- 9. CLI contract ---------------------------------------------------------

int run_cli(const std::string& args, const std::string& out_file) {
  const std::string cmd = std::string(PHDAE_CLI_PATH) + " " + args + " > " + out_file + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (status < 0) return -1;
  return WEXITSTATUS(status);
}

bool criterion_cli_contract(std::string& detail) {
  // round-trip fixed point on every fixture description
  for (const std::string& name : fixture_names()) {
    const Fixture f = load_fixture(name);
    const std::string once = serialize_description(f.description);
    if (serialize_description(parse_description(once)) != once) {
      detail = "round-trip not a fixed point for " + name;
      return false;
    }
  }

  const std::string dir = fixture_directory();
  if (run_cli("validate " + dir + "/two_capacitor.json", "acc_cli_validate.txt") != 0) {
    detail = "validate exit code != 0 on a valid system";
    return false;
  }
  write_text_file("acc_bad.json", "{ nope");
  if (run_cli("validate acc_bad.json", "acc_cli_bad.txt") != 1) {
    detail = "schema failure did not exit 1";
    return false;
  }
  if (run_cli("convert " + dir + "/oscillator.json --to lagrange --out acc_conv.json",
              "acc_cli_conv.txt") != 2) {
    detail = "NothingToConvert did not exit 2";
    return false;
  }

  // deterministic CSV bytes under a fixed seed
  const std::string sim_args = "simulate " + dir +
                               "/two_capacitor.json --x0 0,0 --t1 0.5 --dt 1e-3 --u 1 --out ";
  if (run_cli(sim_args + "acc_run1.csv", "acc_cli_sim1.txt") != 0 ||
      run_cli(sim_args + "acc_run2.csv", "acc_cli_sim2.txt") != 0) {
    detail = "simulate exit code != 0";
    return false;
  }
  if (read_text_file("acc_run1.csv") != read_text_file("acc_run2.csv")) {
    detail = "CSV bytes differ between identical runs";
    return false;
  }
  detail = "round-trip fixed point, exit codes {0,1,2}, deterministic CSV";
  for (const char* f : {"acc_cli_validate.txt", "acc_cli_bad.txt", "acc_cli_conv.txt",
                        "acc_cli_sim1.txt", "acc_cli_sim2.txt", "acc_bad.json",
                        "acc_run1.csv", "acc_run2.csv"})
    std::remove(f);
  return true;
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"1. Dirac axioms (isotropy + dimension, 100 seeded samples/fixture)", criterion_dirac_axioms},
      {"2. Legendre identities on convex-polynomial grids", criterion_legendre_identities},
      {"3. Energy balance and passivity on all fixtures", criterion_energy_balance},
      {"4. Dirac->Lagrange conversion fidelity (two_capacitor)", criterion_dirac_to_lagrange},
      {"5. Lagrange->Dirac conversion fidelity (LQ, Morse family)", criterion_lagrange_to_dirac},
      {"6. Index-1 verdicts (sigma_min = 2; degenerate quartic = 0)", criterion_index_check},
      {"7. Integrator order (error ratio in [3.5, 4.5] per halving)", criterion_integrator_order},
      {"8. Structural derivatives vs central differences (50 expressions)", criterion_derivatives},
      {"9. CLI contract (round-trip, exit codes, deterministic CSV)", criterion_cli_contract},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    std::string detail;
    bool ok = false;
    try {
      ok = c.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << c.name;
    if (!detail.empty()) std::cout << "  -- " << detail;
    std::cout << "\n";
    failures += !ok;
  }
  std::cout << (failures == 0 ? "all acceptance criteria passed"
                              : std::to_string(failures) + " criteria failed")
            << "\n";
  return failures == 0 ? 0 : 1;
}
