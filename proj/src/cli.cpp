#include "phdae/cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "phdae/fixtures.hpp"
#include "phdae/io.hpp"
#include "phdae/legendre.hpp"
#include "phdae/simulate.hpp"

namespace phdae {

namespace {

std::string num17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

PHSystem load_system(const std::string& path, std::uint64_t seed) {
  return system_from_description(load_description(path), /*validate=*/true, seed);
}

}  // namespace

std::uint64_t seed_from_env() {
  if (const char* env = std::getenv("PHDAE_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end && *end == '\0') return static_cast<std::uint64_t>(v);
  }
  return kDefaultSeed;
}

int cmd_validate(const std::string& path, std::ostream& out, std::ostream& err,
                 std::uint64_t seed) {
  SystemDescription desc;
  try {
    desc = load_description(path);
  } catch (const SchemaError& e) {
    err << "schema error: " << e.what() << "\n";
    return kExitUsage;
  }

  // report the residuals whether or not assembly would accept them
  PHSystem sys;
  try {
    sys = system_from_description(desc, /*validate=*/false, seed);
  } catch (const SchemaError& e) {
    err << "schema error: " << e.what() << "\n";
    return kExitUsage;
  }

  out << "system: " << path << "\n";
  out << "n = " << sys.n() << ", k = " << sys.k() << ", m_R = " << sys.m_r()
      << ", m_P = " << sys.m_p() << "\n";

  bool ok = true;
  const std::vector<Vec> samples = sample_box(sys.sample_box, 100, seed);
  try {
    const ValidationReport report = validate_dirac(sys.dirac, samples, seed);
    out << "dirac checks over " << samples.size() << " samples:\n";
    out << "  max isotropy residual = " << report.max_isotropy << " (tol 1e-10)\n";
    out << "  max skewness residual = " << report.max_skewness << " (tol 1e-10)\n";
    int dim_bad = 0;
    for (const auto& s : report.samples) dim_bad += (s.dim != report.expected_dim);
    out << "  dim D(x) = " << report.expected_dim << " expected; " << dim_bad
        << " samples off\n";
    if (!report.passed && report.worst_sample >= 0) {
      const auto& worst = report.samples[static_cast<std::size_t>(report.worst_sample)];
      out << "  worst sample #" << report.worst_sample << " at x = (";
      for (std::size_t i = 0; i < worst.x.size(); ++i)
        out << (i ? ", " : "") << worst.x[i];
      out << "): isotropy " << worst.isotropy << ", skewness " << worst.skewness
          << ", dim " << worst.dim << "\n";
    }
    ok = ok && report.passed;
  } catch (const Error& e) {
    out << "dirac checks: FAILED (" << e.what() << ")\n";
    ok = false;
  }

  if (const auto* mf = std::get_if<MorseFamily>(&sys.storage)) {
    try {
      const MorseReport mr = validate_morse(*mf, samples, seed);
      out << "morse rank over " << mr.points.size()
          << " zero-set points: min sigma = " << mr.min_sigma << " (tol 1e-8)\n";
      ok = ok && mr.passed;
    } catch (const Error& e) {
      out << "morse rank: FAILED (" << e.what() << ")\n";
      ok = false;
    }
  }

  try {
    system_from_description(desc, /*validate=*/true, seed);
  } catch (const ValidationFailed& e) {
    out << "assembly: rejected (" << e.what() << ")\n";
    ok = false;
  } catch (const Error& e) {
    out << "assembly: rejected (" << e.what() << ")\n";
    ok = false;
  }

  out << (ok ? "PASS" : "FAIL") << "\n";
  return ok ? kExitOk : kExitMath;
}

int cmd_classify(const std::string& path, bool json_output, std::ostream& out,
                 std::ostream& err, std::uint64_t seed) {
  PHSystem sys;
  try {
    sys = load_system(path, seed);
  } catch (const SchemaError& e) {
    err << "schema error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "validation error: " << e.what() << "\n";
    return kExitMath;
  }

  const ConstraintReport report = extract_constraints(sys, seed);

  // index sigma_min over the sample box (explicit / generating storage only)
  double sigma_min = std::numeric_limits<double>::infinity();
  bool sigma_known = false;
  if (sys.k() > 0 && !std::holds_alternative<MorseFamily>(sys.storage)) {
    for (const Vec& x : sample_box(sys.sample_box, 100, seed)) {
      try {
        sigma_min = std::min(sigma_min, index_check(sys, x, seed));
        sigma_known = true;
      } catch (const Error&) {
        // sample off the constraint set; skip
      }
    }
  }

  const auto iso = is_input_state_output(sys);

  if (json_output) {
    nlohmann::ordered_json doc;
    doc["dirac"] = nlohmann::ordered_json::array();
    doc["lagrange"] = nlohmann::ordered_json::array();
    for (const auto& c : report.constraints) {
      nlohmann::ordered_json entry;
      entry["label"] = c.label;
      entry["symbolic"] = c.residual_tree.has_value();
      doc[c.cls == Constraint::Class::dirac ? "dirac" : "lagrange"].push_back(entry);
    }
    if (sigma_known) doc["index_sigma_min"] = sigma_min;
    doc["iso_form"] = iso.has_value();
    doc["inconclusive_only"] = report.inconclusive_only;
    out << doc.dump(2) << "\n";
  } else {
    const int nd = report.count(Constraint::Class::dirac);
    const int nl = report.count(Constraint::Class::lagrange);
    if (nd + nl == 0) {
      out << "no algebraic constraints";
      if (iso) out << "; ISO form (dx/dt = (J - R) grad H + G u)";
      out << "\n";
    } else {
      out << nd << " Dirac constraint" << (nd == 1 ? "" : "s") << ", " << nl
          << " Lagrange constraint" << (nl == 1 ? "" : "s") << "\n";
      for (const auto& c : report.constraints)
        out << "  [" << (c.cls == Constraint::Class::dirac ? "dirac" : "lagrange") << "] "
            << c.label << (c.residual_tree ? " = 0" : "") << "\n";
      if (sigma_known)
        out << "index check over sample box: sigma_min = " << sigma_min << " ("
            << (sigma_min >= 1e-8 ? "index-1" : "NOT index-1") << ")\n";
    }
  }

  if (report.inconclusive_only) {
    err << "all projection probes inconclusive\n";
    return kExitMath;
  }
  return kExitOk;
}

int cmd_convert(const std::string& path, const std::string& to, const std::string& out_path,
                std::ostream& out, std::ostream& err, std::uint64_t seed) {
  if (to != "dirac" && to != "lagrange") {
    err << "usage error: --to must be 'dirac' or 'lagrange'\n";
    return kExitUsage;
  }
  PHSystem sys;
  try {
    sys = load_system(path, seed);
  } catch (const SchemaError& e) {
    err << "schema error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "validation error: " << e.what() << "\n";
    return kExitMath;
  }

  try {
    const PHSystem converted = (to == "lagrange") ? dirac_to_lagrange(sys) : lagrange_to_dirac(sys);
    write_text_file(out_path, serialize_description(description_from_system(converted)));
    out << "wrote " << out_path << " (" << converted.n() << " states)\n";
    return kExitOk;
  } catch (const SchemaError& e) {
    err << "schema error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "conversion failed: " << e.what() << "\n";
    return kExitMath;
  }
}

namespace {

void write_csv(std::ostream& os, const PHSystem& sys, const Trajectory& traj, int cadence) {
  os << "t";
  for (const std::string& name : sys.state_names) os << "," << name;
  for (int c = 0; c < sys.k(); ++c) os << ",lam_star_" << (c + 1);
  os << ",energy,constraint_residual,power_balance_residual,port_power\n";
  const std::size_t rows = traj.rows();
  for (std::size_t r = 0; r < rows; ++r) {
    if (cadence > 1 && r % static_cast<std::size_t>(cadence) != 0 && r + 1 != rows) continue;
    os << num17(traj.t[r]);
    for (double v : traj.state[r]) os << "," << num17(v);
    for (double v : traj.multiplier[r]) os << "," << num17(v);
    os << "," << num17(traj.energy[r]) << "," << num17(traj.constraint_residual[r]) << ","
       << num17(traj.power_balance[r]) << "," << num17(traj.port_power[r]) << "\n";
  }
}

}  // namespace

int cmd_simulate(const std::string& path, const SimulateArgs& args, std::ostream& out,
                 std::ostream& err, std::uint64_t seed) {
  if (!args.x0) {
    err << "usage error: --x0 is required\n";
    return kExitUsage;
  }
  PHSystem sys;
  try {
    sys = load_system(path, seed);
  } catch (const SchemaError& e) {
    err << "schema error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "validation error: " << e.what() << "\n";
    return kExitMath;
  }
  if (static_cast<int>(args.x0->size()) != sys.n()) {
    err << "usage error: --x0 needs " << sys.n() << " components\n";
    return kExitUsage;
  }
  if (args.dt <= 0.0 || args.t1 <= args.t0) {
    err << "usage error: need dt > 0 and t1 > t0\n";
    return kExitUsage;
  }

  SimConfig cfg;
  cfg.t0 = args.t0;
  cfg.t1 = args.t1;
  cfg.dt = args.dt;
  cfg.cadence = args.cadence;
  const VarList tvar = make_variables({"t"});
  for (const std::string& expr : args.inputs) {
    try {
      cfg.inputs.push_back(parse(expr, tvar));
    } catch (const Error& e) {
      err << "usage error: bad input expression '" << expr << "': " << e.what() << "\n";
      return kExitUsage;
    }
  }
  if (static_cast<int>(cfg.inputs.size()) > sys.m_p()) {
    err << "usage error: " << cfg.inputs.size() << " input signals for " << sys.m_p()
        << " external ports\n";
    return kExitUsage;
  }

  Trajectory traj;
  try {
    traj = simulate(sys, *args.x0, cfg, seed);
  } catch (const Error& e) {
    err << "simulation failed: " << e.what() << "\n";
    return kExitMath;
  }

  if (args.out_path.empty()) {
    write_csv(out, sys, traj, cfg.cadence);
  } else {
    std::ostringstream ss;
    write_csv(ss, sys, traj, cfg.cadence);
    try {
      write_text_file(args.out_path, ss.str());
    } catch (const SchemaError& e) {
      err << "i/o error: " << e.what() << "\n";
      return kExitUsage;
    }
  }

  if (traj.failure) {
    err << "simulation stopped early at t = " << traj.t.back() << ": " << *traj.failure
        << " (partial trajectory written)\n";
    return kExitMath;
  }
  return kExitOk;
}

namespace {

bool parse_grid_spec(const std::string& spec, double& lo, double& hi, int& count) {
  // "lo:hi:count"
  const std::size_t c1 = spec.find(':');
  const std::size_t c2 = spec.rfind(':');
  if (c1 == std::string::npos || c2 == c1) return false;
  try {
    lo = std::stod(spec.substr(0, c1));
    hi = std::stod(spec.substr(c1 + 1, c2 - c1 - 1));
    count = std::stoi(spec.substr(c2 + 1));
  } catch (...) {
    return false;
  }
  return count >= 2 && hi > lo;
}

bool parse_split(const std::string& spec, std::vector<int>& idx_i, std::vector<int>& idx_j) {
  // "1,2/3" -> I = {1,2}, J = {3} (1-based)
  const std::size_t slash = spec.find('/');
  if (slash == std::string::npos) return false;
  auto parse_list = [](const std::string& s, std::vector<int>& out) {
    std::istringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (tok.empty()) continue;
      try {
        out.push_back(std::stoi(tok));
      } catch (...) {
        return false;
      }
    }
    return true;
  };
  return parse_list(spec.substr(0, slash), idx_i) && parse_list(spec.substr(slash + 1), idx_j);
}

}  // namespace

int cmd_legendre(const LegendreArgs& args, std::ostream& out, std::ostream& err) {
  ExprTree p;
  try {
    p = parse(args.p_expr, args.variables);
  } catch (const Error& e) {
    err << "usage error: bad expression: " << e.what() << "\n";
    return kExitUsage;
  }
  const int n = p.arity();

  if (args.partial) {
    std::vector<int> i1, j1;
    if (!parse_split(*args.partial, i1, j1) ||
        static_cast<int>(i1.size() + j1.size()) != n) {
      err << "usage error: --partial expects 'i,.../j,...' covering all variables\n";
      return kExitUsage;
    }
    if (!args.at || static_cast<int>(args.at->size()) != n) {
      err << "usage error: --partial needs --at with (x_I, e_J) values\n";
      return kExitUsage;
    }
    std::vector<int> idx_i, idx_j;
    for (int v : i1) idx_i.push_back(v - 1);
    for (int v : j1) idx_j.push_back(v - 1);
    Vec x_i(args.at->begin(), args.at->begin() + static_cast<long>(idx_i.size()));
    Vec e_j(args.at->begin() + static_cast<long>(idx_i.size()), args.at->end());
    try {
      const LegendreResult r = partial_legendre(p, idx_i, idx_j, x_i, e_j);
      out << "x_J* = (";
      for (std::size_t i = 0; i < r.point.size(); ++i) out << (i ? ", " : "") << r.point[i];
      out << "), P* = " << r.value << " (" << r.iterations << " newton iterations)\n";
      return kExitOk;
    } catch (const NonConvexPoint& e) {
      err << "non-convex point: " << e.what() << "\n";
      return kExitMath;
    } catch (const Error& e) {
      err << "transform failed: " << e.what() << "\n";
      return kExitMath;
    }
  }

  auto print_header = [&]() {
    out << "input";
    out << "\tx*";
    out << "\tP*";
    if (args.check) out << "\teq13_residual\teq15_residual\teq16_residual";
    out << "\n";
  };

  auto report_point = [&](const Vec& e_point, const Vec& x_guess, double* worst) -> bool {
    const LegendreResult r = legendre(p, e_point, x_guess);
    out << "(";
    for (std::size_t i = 0; i < e_point.size(); ++i) out << (i ? ", " : "") << e_point[i];
    out << ")\t(";
    for (std::size_t i = 0; i < r.point.size(); ++i) out << (i ? ", " : "") << r.point[i];
    out << ")\t" << r.value;
    if (args.check) {
      const double eq13 = legendre_inverse_check(p, r.point);
      const double eq15 = std::abs(legendre(p, p.grad(r.point), r.point).value - tilde(p, r.point));
      const double eq16 = tilde_grad_check(p, r.point);
      out << "\t" << eq13 << "\t" << eq15 << "\t" << eq16;
      *worst = std::max({*worst, eq13, eq15, eq16});
    }
    out << "\n";
    return true;
  };

  double worst = 0.0;
  try {
    if (args.grid) {
      double lo = 0, hi = 0;
      int count = 0;
      if (n != 1 || !parse_grid_spec(*args.grid, lo, hi, count)) {
        err << "usage error: --grid expects 'lo:hi:count' and a single variable\n";
        return kExitUsage;
      }
      print_header();
      Vec x_guess{lo};
      for (int s = 0; s < count; ++s) {
        const double x = lo + (hi - lo) * static_cast<double>(s) / (count - 1);
        const Vec e = p.grad(Vec{x});
        report_point(e, x_guess, &worst);
        x_guess = Vec{x};  // warm start the sweep
      }
    } else if (args.at) {
      if (static_cast<int>(args.at->size()) != n) {
        err << "usage error: --at needs " << n << " components\n";
        return kExitUsage;
      }
      print_header();
      report_point(*args.at, Vec(static_cast<std::size_t>(n), 0.0), &worst);
    } else {
      err << "usage error: provide --at or --grid\n";
      return kExitUsage;
    }
  } catch (const NonConvexPoint& e) {
    err << "non-convex point: " << e.what() << "\n";
    return kExitMath;
  } catch (const Error& e) {
    err << "transform failed: " << e.what() << "\n";
    return kExitMath;
  }

  if (args.check && worst > 1e-7) {
    err << "identity residual " << worst << " exceeds 1e-7\n";
    return kExitMath;
  }
  return kExitOk;
}

}  // namespace phdae
