#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "phdae/cli.hpp"

namespace {

bool parse_csv_doubles(const std::string& text, phdae::Vec& out) {
  std::istringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) return false;
    } catch (...) {
      return false;
    }
  }
  return !out.empty();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"phdae: port-Hamiltonian DAE toolkit"};
  app.require_subcommand(1);
  const std::uint64_t seed = phdae::seed_from_env();

  std::string path, out_path, to, x0_text, grid, partial, at_text;
  bool json_output = false, check = false;
  std::vector<std::string> inputs;
  std::vector<std::string> vars{"x"};
  double t0 = 0.0, t1 = 1.0, dt = 1e-3;
  int cadence = 1;
  std::string p_expr;

  CLI::App* validate = app.add_subcommand("validate", "check the geometric axioms of a system file");
  validate->add_option("path", path, "system description (JSON)")->required();

  CLI::App* classify = app.add_subcommand("classify", "report algebraic constraints and index");
  classify->add_option("path", path, "system description (JSON)")->required();
  classify->add_flag("--json", json_output, "machine-readable output");

  CLI::App* convert = app.add_subcommand("convert", "convert the constraint class by state extension");
  convert->add_option("path", path, "system description (JSON)")->required();
  convert->add_option("--to", to, "target constraint class: dirac | lagrange")->required();
  convert->add_option("--out", out_path, "output file")->required();

  CLI::App* simulate = app.add_subcommand("simulate", "integrate and emit a trajectory CSV");
  simulate->add_option("path", path, "system description (JSON)")->required();
  simulate->add_option("--x0", x0_text, "initial-state guess, comma separated");
  simulate->add_option("--t0", t0, "start time");
  simulate->add_option("--t1", t1, "end time");
  simulate->add_option("--dt", dt, "step size");
  simulate->add_option("--u", inputs, "input expression over t (repeat per port)");
  simulate->add_option("--out", out_path, "CSV output file (default stdout)");
  simulate->add_option("--cadence", cadence, "emit every Nth row");

  CLI::App* legendre = app.add_subcommand("legendre", "Legendre transform table and identity checks");
  legendre->add_option("--P", p_expr, "function expression")->required();
  legendre->add_option("--vars", vars, "variable names (default: x)");
  legendre->add_option("--at", at_text, "evaluation point (e-space), comma separated");
  legendre->add_option("--grid", grid, "x-grid 'lo:hi:count' (single variable)");
  legendre->add_option("--partial", partial, "partial transform split 'i,.../j,...'");
  legendre->add_flag("--check", check, "print/enforce the inverse, closed-form and gradient identities");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? phdae::kExitOk : phdae::kExitUsage;
  }

  if (validate->parsed())
    return phdae::cmd_validate(path, std::cout, std::cerr, seed);
  if (classify->parsed())
    return phdae::cmd_classify(path, json_output, std::cout, std::cerr, seed);
  if (convert->parsed())
    return phdae::cmd_convert(path, to, out_path, std::cout, std::cerr, seed);
  if (simulate->parsed()) {
    phdae::SimulateArgs args;
    if (!x0_text.empty()) {
      phdae::Vec x0;
      if (!parse_csv_doubles(x0_text, x0)) {
        std::cerr << "usage error: --x0 expects comma-separated numbers\n";
        return phdae::kExitUsage;
      }
      args.x0 = std::move(x0);
    }
    args.t0 = t0;
    args.t1 = t1;
    args.dt = dt;
    args.inputs = inputs;
    args.out_path = out_path;
    args.cadence = cadence;
    return phdae::cmd_simulate(path, args, std::cout, std::cerr, seed);
  }
  if (legendre->parsed()) {
    phdae::LegendreArgs args;
    args.p_expr = p_expr;
    args.variables = vars;
    if (!at_text.empty()) {
      phdae::Vec at;
      if (!parse_csv_doubles(at_text, at)) {
        std::cerr << "usage error: --at expects comma-separated numbers\n";
        return phdae::kExitUsage;
      }
      args.at = std::move(at);
    }
    if (!grid.empty()) args.grid = grid;
    if (!partial.empty()) args.partial = partial;
    args.check = check;
    return phdae::cmd_legendre(args, std::cout, std::cerr);
  }
  return phdae::kExitUsage;
}
