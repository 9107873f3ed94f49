#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "phdae/numerics.hpp"

namespace phdae {

// Exit-code contract shared by all subcommands:
//   0  success
//   1  usage or schema error
//   2  mathematical failure (validation, conversion, solver)
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitMath = 2;

/// Sampling seed: PHDAE_SEED when set, else the built-in default.
std::uint64_t seed_from_env();

int cmd_validate(const std::string& path, std::ostream& out, std::ostream& err,
                 std::uint64_t seed);

int cmd_classify(const std::string& path, bool json_output, std::ostream& out,
                 std::ostream& err, std::uint64_t seed);

int cmd_convert(const std::string& path, const std::string& to, const std::string& out_path,
                std::ostream& out, std::ostream& err, std::uint64_t seed);

struct SimulateArgs {
  std::optional<Vec> x0;
  double t0 = 0.0;
  double t1 = 1.0;
  double dt = 1e-3;
  std::vector<std::string> inputs;  // expressions over "t"
  std::string out_path;             // empty: CSV to stdout
  int cadence = 1;
};

int cmd_simulate(const std::string& path, const SimulateArgs& args, std::ostream& out,
                 std::ostream& err, std::uint64_t seed);

struct LegendreArgs {
  std::string p_expr;
  std::vector<std::string> variables{"x"};
  std::optional<Vec> at;            // point in e-space (or (x_I, e_J) with --partial)
  std::optional<std::string> grid;  // "lo:hi:count" sweep in x (1-d only)
  std::optional<std::string> partial;  // "i,..../j,..." 1-based split
  bool check = false;
};

int cmd_legendre(const LegendreArgs& args, std::ostream& out, std::ostream& err);

}  // namespace phdae
