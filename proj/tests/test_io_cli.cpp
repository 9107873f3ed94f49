#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <sstream>

#include "phdae/cli.hpp"
#include "phdae/fixtures.hpp"
#include "phdae/io.hpp"

using namespace phdae;

namespace {

std::string temp_json(const std::string& name, const std::string& content) {
  const std::string path = "tmp_" + name + ".json";
  write_text_file(path, content);
  return path;
}

}  // namespace

TEST_CASE("every fixture description round-trips as a fixed point") {
  for (const std::string& name : fixture_names()) {
    const Fixture f = load_fixture(name);
    const std::string once = serialize_description(f.description);
    const std::string twice = serialize_description(parse_description(once));
    CHECK(once == twice);
  }
}

TEST_CASE("schema violations are reported as schema errors") {
  CHECK_THROWS_AS(parse_description("{ not json"), SchemaError);
  CHECK_THROWS_AS(parse_description("{}"), SchemaError);
  CHECK_THROWS_AS(parse_description(R"({"n": 1, "state_names": ["x"]})"), SchemaError);
  // J wrong shape
  CHECK_THROWS_AS(parse_description(R"({
    "n": 2, "state_names": ["a", "b"],
    "J": [["0"]],
    "storage": {"hamiltonian": "a"}
  })"),
                  SchemaError);
  // two storage kinds at once
  CHECK_THROWS_AS(parse_description(R"({
    "n": 1, "state_names": ["a"],
    "J": [["0"]],
    "storage": {"hamiltonian": "a", "morse": {"k": 1, "F": "lam1"}}
  })"),
                  SchemaError);
  // unparseable expressions surface at system construction
  const SystemDescription bad = parse_description(R"({
    "n": 1, "state_names": ["a"],
    "J": [["0 +"]],
    "storage": {"hamiltonian": "a"}
  })");
  CHECK_THROWS_AS(system_from_description(bad), SchemaError);
}

TEST_CASE("morse_cubic loads but refuses assembly") {
  const Fixture f = load_fixture("morse_cubic");
  CHECK_THROWS_AS(fixture_system(f), ValidationFailed);
  CHECK_NOTHROW(system_from_description(f.description, /*validate=*/false));
  CHECK_THROWS_AS(load_fixture("nosuch"), UnknownFixture);
}

TEST_CASE("cmd_validate exit codes") {
  std::ostringstream out, err;
  CHECK(cmd_validate(load_fixture("two_capacitor").path, out, err, kDefaultSeed) == kExitOk);

  const std::string bad_skew = temp_json("nonskew", R"({
    "n": 2, "state_names": ["x1", "x2"],
    "J": [["0", "1"], ["-0.9", "0"]],
    "storage": {"hamiltonian": "0.5*x1^2 + 0.5*x2^2"}
  })");
  std::ostringstream out2, err2;
  CHECK(cmd_validate(bad_skew, out2, err2, kDefaultSeed) == kExitMath);
  CHECK(out2.str().find("FAIL") != std::string::npos);

  const std::string malformed = temp_json("malformed", "{ nope");
  std::ostringstream out3, err3;
  CHECK(cmd_validate(malformed, out3, err3, kDefaultSeed) == kExitUsage);
  CHECK(err3.str().find("byte") != std::string::npos);

  std::remove(bad_skew.c_str());
  std::remove(malformed.c_str());
}

TEST_CASE("cmd_classify reports constraint classes and the ISO form") {
  std::ostringstream out, err;
  CHECK(cmd_classify(load_fixture("two_capacitor").path, false, out, err, kDefaultSeed) ==
        kExitOk);
  CHECK(out.str().find("1 Dirac constraint") != std::string::npos);
  CHECK(out.str().find("x1 - x2") != std::string::npos);
  CHECK(out.str().find("index-1") != std::string::npos);
  CHECK(out.str().find("sigma_min = 2") != std::string::npos);

  std::ostringstream out2, err2;
  CHECK(cmd_classify(load_fixture("oscillator").path, false, out2, err2, kDefaultSeed) ==
        kExitOk);
  CHECK(out2.str().find("no algebraic constraints") != std::string::npos);
  CHECK(out2.str().find("ISO form") != std::string::npos);

  std::ostringstream out3, err3;
  CHECK(cmd_classify(load_fixture("two_capacitor").path, true, out3, err3, kDefaultSeed) ==
        kExitOk);
  CHECK(out3.str().find("\"index_sigma_min\"") != std::string::npos);
}

TEST_CASE("cmd_convert writes a system that validates and classifies swapped") {
  std::ostringstream out, err;
  const std::string conv_path = "tmp_two_capacitor_lagrange.json";
  CHECK(cmd_convert(load_fixture("two_capacitor").path, "lagrange", conv_path, out, err,
                    kDefaultSeed) == kExitOk);

  std::ostringstream vout, verr;
  CHECK(cmd_validate(conv_path, vout, verr, kDefaultSeed) == kExitOk);

  std::ostringstream cout2, cerr2;
  CHECK(cmd_classify(conv_path, false, cout2, cerr2, kDefaultSeed) == kExitOk);
  CHECK(cout2.str().find("1 Lagrange constraint") != std::string::npos);
  CHECK(cout2.str().find("lam1") != std::string::npos);

  // direction mismatch: nothing to convert
  std::ostringstream out2, err2;
  CHECK(cmd_convert(load_fixture("oscillator").path, "lagrange", "tmp_nothing.json", out2,
                    err2, kDefaultSeed) == kExitMath);

  // implicit -> dirac emits the canonical Morse-family Hamiltonian
  std::ostringstream out3, err3;
  const std::string conv2 = "tmp_implicit_dirac.json";
  CHECK(cmd_convert(load_fixture("implicit_oscillator").path, "dirac", conv2, out3, err3,
                    kDefaultSeed) == kExitOk);
  const std::string text = read_text_file(conv2);
  CHECK(text.find("0.5*x1^2 - 0.5*lam1^2 + lam1*x2") != std::string::npos);

  std::remove(conv_path.c_str());
  std::remove(conv2.c_str());
}

TEST_CASE("cmd_simulate contract: usage errors and CSV output") {
  SimulateArgs args;  // no x0
  std::ostringstream out, err;
  CHECK(cmd_simulate(load_fixture("oscillator").path, args, out, err, kDefaultSeed) ==
        kExitUsage);

  args.x0 = Vec{1.0, 0.0};
  args.t1 = 0.1;
  args.dt = 0.01;
  std::ostringstream csv1, err1;
  CHECK(cmd_simulate(load_fixture("oscillator").path, args, csv1, err1, kDefaultSeed) ==
        kExitOk);
  const std::string text = csv1.str();
  CHECK(text.rfind("t,x1,x2,energy,constraint_residual,power_balance_residual,port_power\n",
                   0) == 0);
  CHECK(text.find("\r") == std::string::npos);

  // deterministic bytes
  std::ostringstream csv2, err2;
  CHECK(cmd_simulate(load_fixture("oscillator").path, args, csv2, err2, kDefaultSeed) ==
        kExitOk);
  CHECK(csv1.str() == csv2.str());

  // multiplier column present for constrained systems
  SimulateArgs args2;
  args2.x0 = Vec{0.0, 0.0};
  args2.t1 = 0.1;
  args2.dt = 0.01;
  args2.inputs = {"1"};
  std::ostringstream csv3, err3;
  CHECK(cmd_simulate(load_fixture("two_capacitor").path, args2, csv3, err3, kDefaultSeed) ==
        kExitOk);
  CHECK(csv3.str().rfind("t,x1,x2,lam_star_1,", 0) == 0);
}

TEST_CASE("cmd_legendre table and checks") {
  LegendreArgs args;
  args.p_expr = "x^2";
  args.at = Vec{2.0};
  std::ostringstream out, err;
  CHECK(cmd_legendre(args, out, err) == kExitOk);
  CHECK(out.str().find("1") != std::string::npos);

  LegendreArgs grid;
  grid.p_expr = "0.5*x^2";
  grid.grid = "-1:1:21";
  grid.check = true;
  std::ostringstream out2, err2;
  CHECK(cmd_legendre(grid, out2, err2) == kExitOk);

  LegendreArgs cubic;
  cubic.p_expr = "x^3";
  cubic.at = Vec{0.0};
  std::ostringstream out3, err3;
  CHECK(cmd_legendre(cubic, out3, err3) == kExitMath);
  CHECK(err3.str().find("non-convex") != std::string::npos);

  LegendreArgs partial;
  partial.p_expr = "0.5*x1^2 + 0.5*x2^2 + x1*x2";
  partial.variables = {"x1", "x2"};
  partial.partial = std::string("1/2");
  partial.at = Vec{1.0, 2.0};
  std::ostringstream out4, err4;
  CHECK(cmd_legendre(partial, out4, err4) == kExitOk);
  CHECK(out4.str().find("P* = 0") != std::string::npos);
}

TEST_CASE("cadence thins the CSV but keeps first and last rows") {
  SimulateArgs args;
  args.x0 = Vec{1.0, 0.0};
  args.t1 = 0.1;
  args.dt = 0.01;  // 10 steps -> 11 rows at cadence 1
  args.cadence = 5;
  std::ostringstream csv, err;
  REQUIRE(cmd_simulate(load_fixture("oscillator").path, args, csv, err, kDefaultSeed) ==
          kExitOk);
  const std::string text = csv.str();
  int lines = 0;
  for (char c : text) lines += c == '\n';
  CHECK(lines == 4);  // header + rows 0, 5, 10
  const std::size_t last = text.rfind('\n', text.size() - 2);
  CHECK(std::stod(text.substr(last + 1)) == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("cmd_validate flags a rank-deficient constraint field") {
  const std::string path = temp_json("rankdef", R"({
    "n": 2, "state_names": ["x1", "x2"],
    "J": [["0", "0"], ["0", "0"]],
    "B": [["1", "1"], ["2", "2"]],
    "storage": {"hamiltonian": "0.5*x1^2 + 0.5*x2^2"}
  })");
  std::ostringstream out, err;
  CHECK(cmd_validate(path, out, err, kDefaultSeed) == kExitMath);
  CHECK(out.str().find("rank") != std::string::npos);
  std::remove(path.c_str());
}

TEST_CASE("classify exits 2 when every projection probe is inconclusive") {
  // x2 = -3 e2^2 < 0, but the sample box keeps x2 >= 0.2: the cubic
  // equations admit no definite negative, so every probe is inconclusive
  const std::string path = temp_json("inconclusive", R"({
    "n": 2, "state_names": ["x1", "x2"],
    "J": [["0", "1"], ["-1", "0"]],
    "storage": {"generating": {"I": [1], "J_idx": [2], "V": "0.5*x1^2 + e_x2^3"}},
    "sample_box": {"min": [-1.0, 0.2], "max": [1.0, 1.0]}
  })");
  std::ostringstream out, err;
  CHECK(cmd_classify(path, false, out, err, kDefaultSeed) == kExitMath);
  CHECK(err.str().find("inconclusive") != std::string::npos);
  std::remove(path.c_str());
}

TEST_CASE("PHDAE_SEED overrides the sampling seed") {
  CHECK(seed_from_env() == kDefaultSeed);
  setenv("PHDAE_SEED", "424242", 1);
  CHECK(seed_from_env() == 424242);
  unsetenv("PHDAE_SEED");
  CHECK(seed_from_env() == kDefaultSeed);
}

TEST_CASE("descriptions rendered from systems parse back to the same system") {
  PHSystem tc = fixture_system(load_fixture("two_capacitor"));
  const SystemDescription d = description_from_system(tc);
  const std::string text = serialize_description(d);
  const SystemDescription back = parse_description(text);
  PHSystem sys2 = system_from_description(back);
  CHECK(sys2.n() == tc.n());
  CHECK(sys2.k() == tc.k());
  CHECK(serialize_description(description_from_system(sys2)) == text);
}
