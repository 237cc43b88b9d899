#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "dipolestack/core.hpp"
#include "dipolestack/materials.hpp"

namespace dipolestack {

struct Layer {
  Material material;
  double thickness_nm = 0.0;
};

/// Point dipole inside the host layer. The azimuth is fixed to the x-z plane.
struct DipoleSource {
  double wavelength_nm = 620.0;
  double polar_angle_deg = 90.0;  ///< angle between dipole axis and stack normal
  double depth_nm = 0.0;          ///< distance below the host's upper interface
};

/// Planar stack listed top-down: upper half space, layers_above, host,
/// layers_below, lower half space. The z axis points up; collection optics sit
/// in the upper half space.
struct Stack {
  Material upper = materials::vacuum();
  std::vector<Layer> layers_above;  ///< first entry touches the upper half space
  Layer host{materials::diamond(), 100.0};
  std::vector<Layer> layers_below;  ///< first entry touches the host
  Material lower = materials::vacuum();
  DipoleSource dipole;
};

/// One side of the stack seen from the emitter: incidence medium (the host),
/// finite layers ordered away from the emitter, and the exit half space.
struct SubStack {
  Material incidence;
  std::vector<Layer> layers;
  Material exit;
  double emitter_distance_nm = 0.0;
};

/// Lists every violated invariant; empty when the stack is usable.
inline std::vector<std::string> validate(const Stack& stack) {
  std::vector<std::string> out;
  const double lambda = stack.dipole.wavelength_nm;
  if (!(lambda > 0.0) || !std::isfinite(lambda)) out.emplace_back("dipole.wavelength_nm must be > 0");
  if (!(stack.dipole.polar_angle_deg >= 0.0 && stack.dipole.polar_angle_deg <= 90.0)) {
    out.emplace_back("dipole.theta_deg must lie in [0, 90]");
  }
  auto check_layer = [&](const Layer& l, const std::string& where) {
    if (!(l.thickness_nm > 0.0) || !std::isfinite(l.thickness_nm)) {
      out.push_back(where + ".thickness_nm must be > 0 and finite");
    }
  };
  for (std::size_t i = 0; i < stack.layers_above.size(); ++i) {
    check_layer(stack.layers_above[i], "layers_above[" + std::to_string(i) + "]");
  }
  check_layer(stack.host, "host");
  for (std::size_t i = 0; i < stack.layers_below.size(); ++i) {
    check_layer(stack.layers_below[i], "layers_below[" + std::to_string(i) + "]");
  }
  if (!(stack.dipole.depth_nm > 0.0)) out.emplace_back("dipole.depth_nm must be > 0");
  if (!(stack.dipole.depth_nm < stack.host.thickness_nm)) {
    out.emplace_back("dipole.depth_nm must be < host.thickness_nm");
  }
  if (lambda > 0.0) {
    auto check_range = [&](const Material& m) {
      if (auto r = m.range(); r && (lambda < r->first || lambda > r->second)) {
        out.push_back("material '" + m.name() + "' has no data at " + std::to_string(lambda) + " nm");
        return false;
      }
      return true;
    };
    if (check_range(stack.upper) && stack.upper.index_at(lambda).k != 0.0) {
      out.emplace_back("collection half space must be transparent");
    }
    check_range(stack.lower);
    check_range(stack.host.material);
    for (const auto& l : stack.layers_above) check_range(l.material);
    for (const auto& l : stack.layers_below) check_range(l.material);
  }
  return out;
}

inline void require_valid(const Stack& stack) {
  auto issues = validate(stack);
  if (issues.empty()) return;
  std::string msg = "invalid stack:";
  for (const auto& s : issues) msg += " " + s + ";";
  throw ValidationError(msg);
}

/// Splits the stack at the emitter plane into the part above and below it.
inline std::pair<SubStack, SubStack> split_at_dipole(const Stack& stack) {
  require_valid(stack);
  SubStack up;
  up.incidence = stack.host.material;
  up.layers.assign(stack.layers_above.rbegin(), stack.layers_above.rend());
  up.exit = stack.upper;
  up.emitter_distance_nm = stack.dipole.depth_nm;

  SubStack down;
  down.incidence = stack.host.material;
  down.layers = stack.layers_below;
  down.exit = stack.lower;
  down.emitter_distance_nm = stack.host.thickness_nm - stack.dipole.depth_nm;
  return {std::move(up), std::move(down)};
}

/// Inverse of split_at_dipole (the dipole wavelength and angle are taken from `dipole`).
inline Stack reassemble(const SubStack& up, const SubStack& down, DipoleSource dipole) {
  Stack s;
  s.upper = up.exit;
  s.layers_above.assign(up.layers.rbegin(), up.layers.rend());
  s.host = Layer{up.incidence, up.emitter_distance_nm + down.emitter_distance_nm};
  s.layers_below = down.layers;
  s.lower = down.exit;
  dipole.depth_nm = up.emitter_distance_nm;
  s.dipole = dipole;
  return s;
}

namespace stacks {

/// Antenna geometry: silica cap / thin silver / diamond / thick silver, in air.
inline Stack antenna(double t0, double d, double t1, double t2, double theta_deg, double lambda_nm,
                     const Material& thin_silver = materials::silver_literature(),
                     const Material& cap = materials::silica(),
                     const Material& thick_silver = materials::silver_literature(),
                     double thick_silver_nm = 300.0) {
  Stack s;
  s.upper = materials::vacuum();
  s.layers_above = {Layer{cap, t2}, Layer{thin_silver, t1}};
  s.host = Layer{materials::diamond(), t0};
  s.layers_below = {Layer{thick_silver, thick_silver_nm}};
  s.lower = materials::vacuum();
  s.dipole = DipoleSource{lambda_nm, theta_deg, d};
  return s;
}

/// Free-standing membrane of `host` in vacuum.
inline Stack membrane(double t0, double d, double theta_deg, double lambda_nm,
                      const Material& host = materials::diamond()) {
  Stack s;
  s.upper = materials::vacuum();
  s.host = Layer{host, t0};
  s.lower = materials::vacuum();
  s.dipole = DipoleSource{lambda_nm, theta_deg, d};
  return s;
}

}  // namespace stacks

}  // namespace dipolestack
