#pragma once

#include <string>
#include <vector>

#include "phdae/io.hpp"
#include "phdae/simulate.hpp"

namespace phdae {

/// Built-in example system with hand-derivable behavior. The description
/// files double as format documentation; morse_cubic is the negative
/// fixture and fails assembly by design.
struct Fixture {
  std::string name;
  std::string path;
  SystemDescription description;
  bool expect_valid = true;
  std::string reference_note;
  SimConfig default_config;
};

std::vector<std::string> fixture_names();

/// Throws UnknownFixture for names outside fixture_names().
Fixture load_fixture(const std::string& name);

/// Assemble the fixture's system (throws ValidationFailed for morse_cubic).
PHSystem fixture_system(const Fixture& f, std::uint64_t seed = kDefaultSeed);

/// Directory the fixture files are read from: $PHDAE_FIXTURE_DIR when set,
/// else the build-time default.
std::string fixture_directory();

}  // namespace phdae
