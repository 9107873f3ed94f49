#include "phdae/io.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace phdae {

namespace {

using ordered_json = nlohmann::ordered_json;

std::vector<std::vector<std::string>> parse_grid(const ordered_json& node,
                                                 const std::string& key) {
  if (!node.is_array()) throw SchemaError("'" + key + "' must be an array of rows");
  std::vector<std::vector<std::string>> grid;
  for (const auto& row : node) {
    if (!row.is_array()) throw SchemaError("'" + key + "' rows must be arrays");
    std::vector<std::string> r;
    for (const auto& cell : row) {
      if (!cell.is_string()) throw SchemaError("'" + key + "' entries must be expression strings");
      r.push_back(cell.get<std::string>());
    }
    grid.push_back(std::move(r));
  }
  return grid;
}

void check_grid_shape(const std::vector<std::vector<std::string>>& grid, int rows,
                      const std::string& key) {
  if (static_cast<int>(grid.size()) != rows)
    throw SchemaError("'" + key + "' must have " + std::to_string(rows) + " rows");
  const std::size_t cols = grid.empty() ? 0 : grid.front().size();
  for (const auto& row : grid)
    if (row.size() != cols) throw SchemaError("'" + key + "' rows have unequal lengths");
}

MatrixExpr parse_matrix(const std::vector<std::vector<std::string>>& grid, int rows,
                        const VarList& vars, const std::string& key) {
  const int cols = grid.empty() ? 0 : static_cast<int>(grid.front().size());
  MatrixExpr m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int c = 0; c < cols; ++c) {
      try {
        m(i, c) = parse(grid[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)], vars);
      } catch (const Error& e) {
        throw SchemaError("'" + key + "' entry (" + std::to_string(i + 1) + "," +
                          std::to_string(c + 1) + "): " + e.what());
      }
    }
  return m;
}

std::vector<std::vector<std::string>> render_matrix(const MatrixExpr& m) {
  std::vector<std::vector<std::string>> grid;
  for (int i = 0; i < m.rows; ++i) {
    std::vector<std::string> row;
    for (int c = 0; c < m.cols; ++c) row.push_back(m(i, c).to_string());
    grid.push_back(std::move(row));
  }
  return grid;
}

}  // namespace

SystemDescription parse_description(const std::string& json_text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError("malformed JSON at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  if (!doc.is_object()) throw SchemaError("top level must be a JSON object");

  SystemDescription d;
  if (!doc.contains("n") || !doc["n"].is_number_integer())
    throw SchemaError("'n' (integer state dimension) is required");
  d.n = doc["n"].get<int>();
  if (d.n < 1) throw SchemaError("'n' must be >= 1");

  if (!doc.contains("state_names") || !doc["state_names"].is_array())
    throw SchemaError("'state_names' (array of strings) is required");
  for (const auto& s : doc["state_names"]) {
    if (!s.is_string()) throw SchemaError("'state_names' entries must be strings");
    d.state_names.push_back(s.get<std::string>());
  }
  if (static_cast<int>(d.state_names.size()) != d.n)
    throw SchemaError("'state_names' must list exactly n names");

  if (!doc.contains("J")) throw SchemaError("'J' (n x n expression grid) is required");
  d.j = parse_grid(doc["J"], "J");
  check_grid_shape(d.j, d.n, "J");
  if (!d.j.empty() && static_cast<int>(d.j.front().size()) != d.n)
    throw SchemaError("'J' must be n x n");

  if (doc.contains("B")) {
    d.b = parse_grid(doc["B"], "B");
    check_grid_shape(*d.b, d.n, "B");
  }
  if (doc.contains("G")) {
    d.g = parse_grid(doc["G"], "G");
    check_grid_shape(*d.g, d.n, "G");
  }
  if (doc.contains("G_R")) {
    d.g_r = parse_grid(doc["G_R"], "G_R");
    check_grid_shape(*d.g_r, d.n, "G_R");
    if (!doc.contains("Rbar")) throw SchemaError("'G_R' requires a matching 'Rbar' grid");
  }
  if (doc.contains("Rbar")) {
    if (!doc.contains("G_R")) throw SchemaError("'Rbar' requires a matching 'G_R' grid");
    if (!doc["Rbar"].is_array()) throw SchemaError("'Rbar' must be a numeric grid");
    std::vector<std::vector<double>> rb;
    for (const auto& row : doc["Rbar"]) {
      if (!row.is_array()) throw SchemaError("'Rbar' rows must be arrays");
      std::vector<double> r;
      for (const auto& cell : row) {
        if (!cell.is_number()) throw SchemaError("'Rbar' entries must be numbers");
        r.push_back(cell.get<double>());
      }
      rb.push_back(std::move(r));
    }
    d.rbar = std::move(rb);
  }

  if (!doc.contains("storage") || !doc["storage"].is_object())
    throw SchemaError("'storage' object is required");
  const auto& st = doc["storage"];
  int storage_kinds = 0;
  if (st.contains("hamiltonian")) {
    if (!st["hamiltonian"].is_string()) throw SchemaError("'storage.hamiltonian' must be a string");
    d.hamiltonian = st["hamiltonian"].get<std::string>();
    ++storage_kinds;
  }
  if (st.contains("generating")) {
    const auto& gen = st["generating"];
    if (!gen.is_object() || !gen.contains("I") || !gen.contains("J_idx") || !gen.contains("V"))
      throw SchemaError("'storage.generating' needs 'I', 'J_idx' and 'V'");
    SystemDescription::Generating g;
    for (const auto& i : gen["I"]) g.idx_i.push_back(i.get<int>());
    for (const auto& j : gen["J_idx"]) g.idx_j.push_back(j.get<int>());
    if (!gen["V"].is_string()) throw SchemaError("'storage.generating.V' must be a string");
    g.v = gen["V"].get<std::string>();
    d.generating = std::move(g);
    ++storage_kinds;
  }
  if (st.contains("morse")) {
    const auto& mo = st["morse"];
    if (!mo.is_object() || !mo.contains("k") || !mo.contains("F"))
      throw SchemaError("'storage.morse' needs 'k' and 'F'");
    SystemDescription::Morse m;
    m.k = mo["k"].get<int>();
    if (m.k < 1) throw SchemaError("'storage.morse.k' must be >= 1");
    if (!mo["F"].is_string()) throw SchemaError("'storage.morse.F' must be a string");
    m.f = mo["F"].get<std::string>();
    d.morse = std::move(m);
    ++storage_kinds;
  }
  if (storage_kinds != 1)
    throw SchemaError("'storage' must contain exactly one of 'hamiltonian', 'generating', 'morse'");

  if (doc.contains("sample_box")) {
    const auto& sb = doc["sample_box"];
    if (!sb.is_object() || !sb.contains("min") || !sb.contains("max"))
      throw SchemaError("'sample_box' needs 'min' and 'max' arrays");
    Vec lo, hi;
    for (const auto& v : sb["min"]) lo.push_back(v.get<double>());
    for (const auto& v : sb["max"]) hi.push_back(v.get<double>());
    if (static_cast<int>(lo.size()) != d.n || static_cast<int>(hi.size()) != d.n)
      throw SchemaError("'sample_box' bounds must have length n");
    d.sample_box = std::make_pair(std::move(lo), std::move(hi));
  }

  return d;
}

SystemDescription load_description(const std::string& path) {
  return parse_description(read_text_file(path));
}

std::string serialize_description(const SystemDescription& d) {
  ordered_json doc;
  doc["n"] = d.n;
  doc["state_names"] = d.state_names;
  doc["J"] = d.j;
  if (d.b) doc["B"] = *d.b;
  if (d.g) doc["G"] = *d.g;
  if (d.g_r) doc["G_R"] = *d.g_r;
  if (d.rbar) doc["Rbar"] = *d.rbar;
  ordered_json storage;
  if (d.hamiltonian) storage["hamiltonian"] = *d.hamiltonian;
  if (d.generating) {
    ordered_json gen;
    gen["I"] = d.generating->idx_i;
    gen["J_idx"] = d.generating->idx_j;
    gen["V"] = d.generating->v;
    storage["generating"] = std::move(gen);
  }
  if (d.morse) {
    ordered_json mo;
    mo["k"] = d.morse->k;
    mo["F"] = d.morse->f;
    storage["morse"] = std::move(mo);
  }
  doc["storage"] = std::move(storage);
  if (d.sample_box) {
    ordered_json sb;
    sb["min"] = d.sample_box->first;
    sb["max"] = d.sample_box->second;
    doc["sample_box"] = std::move(sb);
  }
  return doc.dump(2) + "\n";
}

PHSystem system_from_description(const SystemDescription& d, bool validate,
                                 std::uint64_t seed) {
  VarList state_vars = make_variables(d.state_names);

  DiracStructure dirac;
  dirac.n = d.n;
  dirac.j = parse_matrix(d.j, d.n, state_vars, "J");
  dirac.b = d.b ? parse_matrix(*d.b, d.n, state_vars, "B") : MatrixExpr(d.n, 0);
  dirac.g = d.g ? parse_matrix(*d.g, d.n, state_vars, "G") : MatrixExpr(d.n, 0);
  dirac.g_r = d.g_r ? parse_matrix(*d.g_r, d.n, state_vars, "G_R") : MatrixExpr(d.n, 0);

  const int m_r = dirac.m_r();
  Mat rbar(m_r, m_r);
  if (d.rbar) {
    if (static_cast<int>(d.rbar->size()) != m_r)
      throw SchemaError("'Rbar' must be m_R x m_R");
    for (int i = 0; i < m_r; ++i) {
      if (static_cast<int>((*d.rbar)[static_cast<std::size_t>(i)].size()) != m_r)
        throw SchemaError("'Rbar' must be m_R x m_R");
      for (int j = 0; j < m_r; ++j)
        rbar(i, j) = (*d.rbar)[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  } else if (m_r > 0) {
    throw SchemaError("'G_R' requires a matching 'Rbar' grid");
  }

  StorageRelation storage{ExplicitHamiltonian{}};
  if (d.hamiltonian) {
    try {
      storage = ExplicitHamiltonian{parse(*d.hamiltonian, state_vars)};
    } catch (const Error& e) {
      throw SchemaError(std::string("'storage.hamiltonian': ") + e.what());
    }
  } else if (d.generating) {
    GeneratingFunction gf;
    gf.n = d.n;
    std::vector<std::string> chart_names;
    for (int i1 : d.generating->idx_i) {
      if (i1 < 1 || i1 > d.n) throw SchemaError("'storage.generating.I' index out of range");
      gf.idx_i.push_back(i1 - 1);
      chart_names.push_back(d.state_names[static_cast<std::size_t>(i1 - 1)]);
    }
    for (int j1 : d.generating->idx_j) {
      if (j1 < 1 || j1 > d.n) throw SchemaError("'storage.generating.J_idx' index out of range");
      gf.idx_j.push_back(j1 - 1);
      chart_names.push_back("e_" + d.state_names[static_cast<std::size_t>(j1 - 1)]);
    }
    try {
      gf.v = parse(d.generating->v, chart_names);
    } catch (const Error& e) {
      throw SchemaError(std::string("'storage.generating.V': ") + e.what());
    }
    storage = std::move(gf);
  } else if (d.morse) {
    MorseFamily mf;
    mf.n = d.n;
    mf.k = d.morse->k;
    std::vector<std::string> fam_names = d.state_names;
    for (int i = 0; i < mf.k; ++i) fam_names.push_back("lam" + std::to_string(i + 1));
    try {
      mf.f = parse(d.morse->f, fam_names);
    } catch (const Error& e) {
      throw SchemaError(std::string("'storage.morse.F': ") + e.what());
    }
    storage = std::move(mf);
  }

  std::optional<Box> box;
  if (d.sample_box) box = Box{d.sample_box->first, d.sample_box->second};

  if (validate)
    return assemble(std::move(dirac), std::move(storage), std::move(rbar), d.state_names,
                    box, seed);

  PHSystem sys;
  sys.dirac = std::move(dirac);
  sys.storage = std::move(storage);
  sys.rbar = std::move(rbar);
  sys.state_names = d.state_names;
  sys.state_vars = state_vars;
  sys.sample_box = box ? *box : Box::centered(d.n);
  return sys;
}

SystemDescription description_from_system(const PHSystem& sys) {
  SystemDescription d;
  d.n = sys.n();
  d.state_names = sys.state_names;
  d.j = render_matrix(sys.dirac.j);
  if (sys.k() > 0) d.b = render_matrix(sys.dirac.b);
  if (sys.m_p() > 0) d.g = render_matrix(sys.dirac.g);
  if (sys.m_r() > 0) {
    d.g_r = render_matrix(sys.dirac.g_r);
    std::vector<std::vector<double>> rb;
    for (int i = 0; i < sys.m_r(); ++i) {
      std::vector<double> row;
      for (int j = 0; j < sys.m_r(); ++j) row.push_back(sys.rbar(i, j));
      rb.push_back(std::move(row));
    }
    d.rbar = std::move(rb);
  }

  if (const auto* h = std::get_if<ExplicitHamiltonian>(&sys.storage)) {
    d.hamiltonian = h->h.to_string();
  } else if (const auto* gf = std::get_if<GeneratingFunction>(&sys.storage)) {
    SystemDescription::Generating g;
    for (int i : gf->idx_i) g.idx_i.push_back(i + 1);
    for (int j : gf->idx_j) g.idx_j.push_back(j + 1);
    g.v = gf->v.to_string();
    d.generating = std::move(g);
  } else {
    const MorseFamily& mf = std::get<MorseFamily>(sys.storage);
    d.morse = SystemDescription::Morse{mf.k, mf.f.to_string()};
  }

  const Box def = Box::centered(sys.n());
  if (sys.sample_box.lo != def.lo || sys.sample_box.hi != def.hi)
    d.sample_box = std::make_pair(sys.sample_box.lo, sys.sample_box.hi);
  return d;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SchemaError("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw SchemaError("failed writing '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace phdae
