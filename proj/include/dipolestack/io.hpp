#pragma once

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dipolestack/core.hpp"
#include "dipolestack/materials.hpp"
#include "dipolestack/stack.hpp"

namespace dipolestack::io {

using json = nlohmann::json;
namespace fs = std::filesystem;

/// Environment variable naming the default directory of material files.
inline constexpr const char* kMaterialDirEnv = "DIPOLESTACK_MATERIALS";

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json parse_json(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(origin + ": " + e.what());
  }
}

inline json read_json(const fs::path& path) { return parse_json(read_text(path), path.string()); }

// ---------------------------------------------------------------------------
// Materials
//
// A material is a preset name, a file reference, or an inline object:
//   "diamond"
//   {"file": "ag.json"}
//   {"name": "diamond"}                 preset or directory lookup
//   {"name": "x", "constant": [1.5, 0]}
//   {"name": "x", "table": [[wavelength_nm, n, k], ...]}
// Any form may add "absorption": kappa.

inline Material material_from_object(const json& j, const std::string& fallback_name) {
  const std::string name = j.value("name", fallback_name);
  if (j.contains("table")) {
    std::vector<IndexTableRow> rows;
    for (const auto& r : j.at("table")) {
      if (!r.is_array() || r.size() != 3) throw ValidationError("material '" + name + "': table rows are [λ, n, k]");
      rows.push_back({r[0].get<double>(), {r[1].get<double>(), r[2].get<double>()}});
    }
    return Material(name, std::move(rows));
  }
  if (j.contains("constant")) {
    const auto& c = j.at("constant");
    if (!c.is_array() || c.size() != 2) throw ValidationError("material '" + name + "': constant is [n, k]");
    return Material(name, ComplexIndex{c[0].get<double>(), c[1].get<double>()});
  }
  if (!j.contains("n")) throw ValidationError("material '" + name + "' needs \"constant\" or \"table\"");
  return Material(name, ComplexIndex{j.at("n").get<double>(), j.value("k", 0.0)});
}

/// Reads a material file: JSON as above, or CSV/whitespace rows of
/// wavelength_nm, n, k (lines starting with '#' or a letter are skipped).
inline Material material_from_file(const fs::path& path) {
  const std::string text = read_text(path);
  if (path.extension() == ".json") return material_from_object(parse_json(text, path.string()), path.stem().string());
  std::vector<IndexTableRow> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#' || std::isalpha(static_cast<unsigned char>(line[first]))) {
      continue;
    }
    for (char& c : line)
      if (c == ',' || c == ';') c = ' ';
    std::istringstream ls(line);
    double w, n, k = 0.0;
    if (!(ls >> w >> n)) throw ValidationError("'" + path.string() + "': bad row '" + line + "'");
    ls >> k;
    rows.push_back({w, {n, k}});
  }
  return Material(path.stem().string(), std::move(rows));
}

/// Resolves material references against presets and search directories.
class MaterialResolver {
 public:
  MaterialResolver() {
    if (const char* env = std::getenv(kMaterialDirEnv); env && *env) dirs_.emplace_back(env);
  }

  void add_directory(const fs::path& dir) { dirs_.insert(dirs_.begin(), dir); }
  const std::vector<fs::path>& directories() const { return dirs_; }

  Material resolve(const json& ref) const {
    Material m;
    if (ref.is_string()) {
      m = by_name(ref.get<std::string>());
    } else if (ref.is_object()) {
      const bool named_only = ref.contains("name") && !ref.contains("table") && !ref.contains("constant") &&
                              !ref.contains("n");
      if (ref.contains("file")) {
        m = from_file(ref.at("file").get<std::string>());
      } else if (named_only) {
        m = by_name(ref.at("name").get<std::string>());
      } else {
        m = material_from_object(ref, "inline");
      }
    } else {
      throw ValidationError("material reference must be a name or an object");
    }
    if (ref.is_object() && ref.contains("absorption")) m = m.with_absorption(ref.at("absorption").get<double>());
    return m;
  }

 private:
  Material by_name(const std::string& name) const {
    if (auto p = materials::preset(name)) return *p;
    for (const auto& dir : dirs_) {
      for (const char* ext : {".json", ".csv", ".txt"}) {
        const fs::path candidate = dir / (name + ext);
        if (fs::exists(candidate)) return material_from_file(candidate);
      }
    }
    throw ValidationError("unknown material '" + name + "'");
  }

  Material from_file(const std::string& file) const {
    fs::path p(file);
    if (p.is_relative()) {
      for (const auto& dir : dirs_)
        if (fs::exists(dir / p)) return material_from_file(dir / p);
    }
    return material_from_file(p);
  }

  std::vector<fs::path> dirs_;
};

inline json material_to_json(const Material& m) {
  json j;
  j["name"] = m.name();
  if (auto c = m.constant()) {
    j["constant"] = {c->n, c->k};
  } else {
    json rows = json::array();
    for (const auto& r : *m.table()) rows.push_back({r.wavelength_nm, r.index.n, r.index.k});
    j["table"] = rows;
  }
  if (m.extinction_floor() > 0.0) j["absorption"] = m.extinction_floor();
  return j;
}

// ---------------------------------------------------------------------------
// Stacks
//
// {
//   "upper": <material>, "lower": <material>,
//   "layers_above": [{"material": <material>, "t_nm": 42.4}, ...],   top-down
//   "host": {"material": <material>, "t_nm": 86.5},
//   "layers_below": [...],                                           top-down
//   "dipole": {"lambda_nm": 620, "theta_deg": 90, "d_nm": 42.9}
// }

inline Layer layer_from_json(const json& j, const MaterialResolver& r, const std::string& where) {
  if (!j.contains("material") || !j.contains("t_nm")) throw ValidationError(where + " needs \"material\" and \"t_nm\"");
  return Layer{r.resolve(j.at("material")), j.at("t_nm").get<double>()};
}

inline Stack stack_from_json(const json& j, const MaterialResolver& r = {}) {
  try {
    Stack s;
    s.upper = r.resolve(j.value("upper", json("vacuum")));
    s.lower = r.resolve(j.value("lower", json("vacuum")));
    for (std::size_t i = 0; j.contains("layers_above") && i < j.at("layers_above").size(); ++i) {
      s.layers_above.push_back(layer_from_json(j.at("layers_above")[i], r, "layers_above[" + std::to_string(i) + "]"));
    }
    if (!j.contains("host")) throw ValidationError("stack needs a \"host\" layer");
    s.host = layer_from_json(j.at("host"), r, "host");
    for (std::size_t i = 0; j.contains("layers_below") && i < j.at("layers_below").size(); ++i) {
      s.layers_below.push_back(layer_from_json(j.at("layers_below")[i], r, "layers_below[" + std::to_string(i) + "]"));
    }
    if (!j.contains("dipole")) throw ValidationError("stack needs a \"dipole\" object");
    const auto& d = j.at("dipole");
    s.dipole.wavelength_nm = d.value("lambda_nm", 620.0);
    s.dipole.polar_angle_deg = d.value("theta_deg", 90.0);
    if (!d.contains("d_nm")) throw ValidationError("dipole needs \"d_nm\"");
    s.dipole.depth_nm = d.at("d_nm").get<double>();
    return s;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("stack: ") + e.what());
  }
}

inline Stack read_stack(const fs::path& path, const MaterialResolver& r = {}) {
  MaterialResolver local = r;
  local.add_directory(path.has_parent_path() ? path.parent_path() : fs::path("."));
  Stack s = stack_from_json(read_json(path), local);
  require_valid(s);
  return s;
}

inline json stack_to_json(const Stack& s) {
  json j;
  j["upper"] = material_to_json(s.upper);
  j["layers_above"] = json::array();
  auto layer = [](const Layer& l) { return json{{"material", material_to_json(l.material)}, {"t_nm", l.thickness_nm}}; };
  for (const auto& l : s.layers_above) j["layers_above"].push_back(layer(l));
  j["host"] = layer(s.host);
  j["layers_below"] = json::array();
  for (const auto& l : s.layers_below) j["layers_below"].push_back(layer(l));
  j["lower"] = material_to_json(s.lower);
  j["dipole"] = {{"lambda_nm", s.dipole.wavelength_nm}, {"theta_deg", s.dipole.polar_angle_deg}, {"d_nm", s.dipole.depth_nm}};
  return j;
}

/// Index of every distinct material of the stack at one wavelength.
inline json materials_used(const Stack& s, double wavelength_nm) {
  json j = json::object();
  auto add = [&](const Material& m) {
    try {
      const auto idx = m.index_at(wavelength_nm);
      j[m.name()] = {{"wavelength_nm", wavelength_nm}, {"n", idx.n}, {"k", idx.k}};
    } catch (const OutOfRangeError&) {
      j[m.name()] = {{"wavelength_nm", wavelength_nm}, {"n", nullptr}, {"k", nullptr}};
    }
  };
  add(s.upper);
  for (const auto& l : s.layers_above) add(l.material);
  add(s.host.material);
  for (const auto& l : s.layers_below) add(l.material);
  add(s.lower);
  return j;
}

// ---------------------------------------------------------------------------
// CSV

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

/// CSV file with '#'-prefixed metadata lines, a header row and numbers printed
/// to 9 significant digits.
class CsvWriter {
 public:
  explicit CsvWriter(const fs::path& path) : out_(path), path_(path) {
    if (!out_) throw ValidationError("cannot write '" + path.string() + "'");
  }

  CsvWriter& meta(const std::string& key, const std::string& value) {
    out_ << "# " << key << ": " << value << '\n';
    return *this;
  }
  CsvWriter& meta(const std::string& key, double value) { return meta(key, format_number(value)); }

  CsvWriter& header(const std::vector<std::string>& cols) {
    for (std::size_t i = 0; i < cols.size(); ++i) out_ << (i ? "," : "") << cols[i];
    out_ << '\n';
    return *this;
  }

  CsvWriter& row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << format_number(values[i]);
    out_ << '\n';
    return *this;
  }

  /// Mixed text and numeric cells.
  CsvWriter& cells(const std::vector<std::string>& values) { return header(values); }

  const fs::path& path() const { return path_; }

 private:
  std::ofstream out_;
  fs::path path_;
};

/// Numeric columns of a CSV file; '#' lines and a non-numeric header are skipped.
inline std::vector<std::vector<double>> read_csv_columns(const fs::path& path, std::size_t min_columns) {
  const std::string text = read_text(path);
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::vector<double> cells;
    std::stringstream ls(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ls, cell, ',')) {
      try {
        std::size_t used = 0;
        cells.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (rows.empty()) continue;  // header
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": non-numeric row");
    }
    if (cells.size() < min_columns) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(min_columns) + " columns");
    }
    rows.push_back(std::move(cells));
  }
  if (rows.empty()) throw ValidationError(path.string() + ": no data rows");
  return rows;
}

inline void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

}  // namespace dipolestack::io
