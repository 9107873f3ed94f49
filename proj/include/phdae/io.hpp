#pragma once

#include <optional>
#include <string>
#include <vector>

#include "phdae/phsystem.hpp"

namespace phdae {

/// In-memory form of the JSON system-description schema. Expression
/// entries stay as the strings found in the file, so parse -> serialize
/// round-trips are exact once the layout is normalized.
struct SystemDescription {
  int n = 0;
  std::vector<std::string> state_names;
  std::vector<std::vector<std::string>> j;
  std::optional<std::vector<std::vector<std::string>>> b;
  std::optional<std::vector<std::vector<std::string>>> g;
  std::optional<std::vector<std::vector<std::string>>> g_r;
  std::optional<std::vector<std::vector<double>>> rbar;

  struct Generating {
    std::vector<int> idx_i, idx_j;  // 1-based, as in the file
    std::string v;
  };
  struct Morse {
    int k = 0;
    std::string f;
  };
  std::optional<std::string> hamiltonian;
  std::optional<Generating> generating;
  std::optional<Morse> morse;

  std::optional<std::pair<Vec, Vec>> sample_box;  // (min, max)
};

/// Parse JSON text against the schema. Throws SchemaError (with the byte
/// position for malformed JSON).
SystemDescription parse_description(const std::string& json_text);

/// Read and parse a description file. Throws SchemaError on I/O failure.
SystemDescription load_description(const std::string& path);

/// Normalized serialization: fixed key order, two-space indentation,
/// trailing newline. parse(serialize(d)) == d.
std::string serialize_description(const SystemDescription& d);

/// Build (and by default validate via assemble) the system a description
/// denotes. Expression errors surface as SchemaError; validation errors
/// as ValidationFailed. validate = false skips all numerical validation,
/// for negative fixtures and tests.
PHSystem system_from_description(const SystemDescription& d, bool validate = true,
                                 std::uint64_t seed = kDefaultSeed);

/// Render a system back to a description (expressions printed from trees).
SystemDescription description_from_system(const PHSystem& sys);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace phdae
