#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "dipolestack/core.hpp"
#include "dipolestack/silver_table.hpp"

namespace dipolestack {

/// Complex refractive index n + i k of a passive medium.
struct ComplexIndex {
  double n = 1.0;
  double k = 0.0;

  Complex value() const { return {n, k}; }
  Complex permittivity() const { return value() * value(); }
  bool lossless() const { return k == 0.0; }

  friend bool operator==(const ComplexIndex&, const ComplexIndex&) = default;
};

struct IndexTableRow {
  double wavelength_nm;
  ComplexIndex index;
};

/// A named refractive-index model: either a constant or a wavelength table
/// interpolated linearly (n and k separately).
class Material {
 public:
  Material() = default;

  Material(std::string name, ComplexIndex constant) : name_(std::move(name)), model_(constant) {
    check_index(constant);
  }

  Material(std::string name, std::vector<IndexTableRow> table)
      : name_(std::move(name)), model_(std::move(table)) {
    const auto& rows = std::get<std::vector<IndexTableRow>>(model_);
    if (rows.size() < 2) {
      throw ValidationError("material '" + name_ + "': a table needs at least 2 rows");
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
      check_index(rows[i].index);
      if (i > 0 && !(rows[i].wavelength_nm > rows[i - 1].wavelength_nm)) {
        throw ValidationError("material '" + name_ + "': table wavelengths must be strictly increasing");
      }
    }
  }

  const std::string& name() const { return name_; }
  bool tabulated() const { return std::holds_alternative<std::vector<IndexTableRow>>(model_); }
  double extinction_floor() const { return extinction_floor_; }

  const std::vector<IndexTableRow>* table() const {
    return std::get_if<std::vector<IndexTableRow>>(&model_);
  }
  std::optional<ComplexIndex> constant() const {
    if (auto c = std::get_if<ComplexIndex>(&model_)) return *c;
    return std::nullopt;
  }

  /// Wavelength range covered by a table; nullopt for constant models.
  std::optional<std::pair<double, double>> range() const {
    if (auto t = table()) return std::pair{t->front().wavelength_nm, t->back().wavelength_nm};
    return std::nullopt;
  }

  ComplexIndex index_at(double wavelength_nm) const {
    if (!(wavelength_nm > 0.0) || !std::isfinite(wavelength_nm)) {
      throw DomainError("material '" + name_ + "': wavelength must be positive");
    }
    ComplexIndex out;
    if (auto c = std::get_if<ComplexIndex>(&model_)) {
      out = *c;
    } else {
      const auto& rows = std::get<std::vector<IndexTableRow>>(model_);
      if (wavelength_nm < rows.front().wavelength_nm || wavelength_nm > rows.back().wavelength_nm) {
        throw OutOfRangeError("material '" + name_ + "': wavelength " + std::to_string(wavelength_nm) +
                              " nm outside table range [" + std::to_string(rows.front().wavelength_nm) +
                              ", " + std::to_string(rows.back().wavelength_nm) + "] nm");
      }
      auto hi = std::lower_bound(rows.begin(), rows.end(), wavelength_nm,
                                 [](const IndexTableRow& r, double w) { return r.wavelength_nm < w; });
      if (hi->wavelength_nm == wavelength_nm) {
        out = hi->index;
      } else {
        auto lo = hi - 1;
        const double f = (wavelength_nm - lo->wavelength_nm) / (hi->wavelength_nm - lo->wavelength_nm);
        out.n = lo->index.n + f * (hi->index.n - lo->index.n);
        out.k = lo->index.k + f * (hi->index.k - lo->index.k);
      }
    }
    out.k = std::max(out.k, extinction_floor_);
    return out;
  }

  /// Copy whose extinction coefficient is max(k, kappa) at every wavelength.
  Material with_absorption(double kappa) const {
    if (!(kappa >= 0.0)) throw DomainError("absorption kappa must be non-negative");
    Material m = *this;
    m.extinction_floor_ = std::max(extinction_floor_, kappa);
    return m;
  }

  friend bool operator==(const Material&, const Material&) = default;

 private:
  void check_index(const ComplexIndex& c) const {
    if (!(c.n > 0.0) || !(c.k >= 0.0) || !std::isfinite(c.n) || !std::isfinite(c.k)) {
      throw ValidationError("material '" + name_ + "': index must have n > 0 and k >= 0");
    }
  }

  std::string name_;
  std::variant<ComplexIndex, std::vector<IndexTableRow>> model_{ComplexIndex{}};
  double extinction_floor_ = 0.0;
};

namespace materials {

inline Material vacuum() { return {"vacuum", ComplexIndex{1.0, 0.0}}; }
inline Material diamond() { return {"diamond", ComplexIndex{2.414, 0.0}}; }
inline Material silver_literature() { return {"silver-literature", ComplexIndex{0.05, 4.21}}; }
inline Material silica() { return {"silica", ComplexIndex{1.464, 0.0}}; }
inline Material silver_thin_measured() { return {"silver-thin-measured", ComplexIndex{0.15, 3.95}}; }
inline Material silver_thick_measured() { return {"silver-thick-measured", ComplexIndex{0.07, 4.10}}; }
inline Material silica_measured() { return {"silica-measured", ComplexIndex{1.45, 0.0}}; }

/// Dispersive silver, 400-900 nm.
inline Material silver_mcpeak() {
  std::vector<IndexTableRow> rows;
  rows.reserve(data::kSilverMcPeak.size());
  for (const auto& r : data::kSilverMcPeak) rows.push_back({r.wavelength_nm, {r.n, r.k}});
  return {"silver-mcpeak", std::move(rows)};
}

inline const std::map<std::string, Material (*)()>& registry() {
  static const std::map<std::string, Material (*)()> presets{
      {"vacuum", &vacuum},
      {"air", &vacuum},
      {"diamond", &diamond},
      {"silver-literature", &silver_literature},
      {"silica", &silica},
      {"silver-thin-measured", &silver_thin_measured},
      {"silver-thick-measured", &silver_thick_measured},
      {"silica-measured", &silica_measured},
      {"silver-mcpeak", &silver_mcpeak},
  };
  return presets;
}

inline std::optional<Material> preset(const std::string& name) {
  const auto& reg = registry();
  if (auto it = reg.find(name); it != reg.end()) return it->second();
  return std::nullopt;
}

}  // namespace materials

}  // namespace dipolestack
