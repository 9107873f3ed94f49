#include "phdae/fixtures.hpp"

#include <cstdlib>

#ifndef PHDAE_FIXTURE_DIR
#define PHDAE_FIXTURE_DIR "fixtures"
#endif

namespace phdae {

namespace {

constexpr double kTwoPi = 6.283185307179586;

struct FixtureInfo {
  const char* name;
  const char* file;
  bool expect_valid;
  const char* note;
  double t1;
  double dt;
};

const FixtureInfo kFixtures[] = {
    {"oscillator", "oscillator.json", true,
     "harmonic oscillator; closed form (cos t, -sin t) from (1,0); H constant", kTwoPi, 1e-3},
    {"damped_oscillator", "damped_oscillator.json", true,
     "oscillator with unit resistive port on x2; H strictly decreasing", 5.0, 1e-3},
    {"two_capacitor", "two_capacitor.json", true,
     "two unit capacitors forced equal; with u = 1 from (0,0): x1 = x2 = t/2", 5.0, 1e-3},
    {"lq_optimal_control", "lq_optimal_control.json", true,
     "LQ problem dq/dt = u, L = (q^2 + u^2)/2; reduced flow gives q(t) = cosh(t) from (1,0)",
     1.0, 1e-3},
    {"implicit_oscillator", "implicit_oscillator.json", true,
     "oscillator with generating-function storage V = x1^2/2 - e_x2^2/2; same flow as oscillator",
     kTwoPi, 1e-3},
    {"morse_cubic", "morse_cubic.json", false,
     "negative fixture: F = lam1^3 violates the Morse rank condition at lam1 = 0", 1.0, 1e-3},
};

}  // namespace

std::string fixture_directory() {
  if (const char* env = std::getenv("PHDAE_FIXTURE_DIR")) return env;
  return PHDAE_FIXTURE_DIR;
}

std::vector<std::string> fixture_names() {
  std::vector<std::string> names;
  for (const FixtureInfo& f : kFixtures) names.emplace_back(f.name);
  return names;
}

Fixture load_fixture(const std::string& name) {
  for (const FixtureInfo& info : kFixtures) {
    if (name != info.name) continue;
    Fixture f;
    f.name = info.name;
    f.path = fixture_directory() + "/" + info.file;
    f.description = load_description(f.path);
    f.expect_valid = info.expect_valid;
    f.reference_note = info.note;
    f.default_config.t0 = 0.0;
    f.default_config.t1 = info.t1;
    f.default_config.dt = info.dt;
    return f;
  }
  throw UnknownFixture("unknown fixture '" + name + "'");
}

PHSystem fixture_system(const Fixture& f, std::uint64_t seed) {
  return system_from_description(f.description, /*validate=*/true, seed);
}

}  // namespace phdae
