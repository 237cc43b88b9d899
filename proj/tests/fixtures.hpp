#pragma once

#include "dipolestack/materials.hpp"
#include "dipolestack/stack.hpp"

namespace fixtures {

using namespace dipolestack;

inline Stack case_one() { return stacks::antenna(86.5, 42.9, 42.4, 107.6, 90.0, 620.0); }
inline Stack case_two() { return stacks::antenna(86.5, 42.9, 42.4, 107.6, 54.7, 620.0); }
inline Stack case_three() { return stacks::antenna(609.2, 27.5, 24.9, 107.7, 54.7, 620.0); }

inline Stack fabricated(double t0 = 608.6) {
  return stacks::antenna(t0, 27.5, 30.0, 128.0, 54.7, 620.0, materials::silver_thin_measured(),
                         materials::silica_measured(), materials::silver_thick_measured(), 160.0);
}

// Diamond slab with thin silver above and thick silver below.
inline Stack mirrored_slab(double t0 = 350.0, double d = 175.0) {
  Stack s = stacks::membrane(t0, d, 90.0, 620.0);
  s.layers_above = {Layer{materials::silver_literature(), 50.0}};
  s.layers_below = {Layer{materials::silver_literature(), 300.0}};
  return s;
}

inline Stack homogeneous(const Material& m, double theta = 90.0) {
  Stack s;
  s.upper = m;
  s.host = Layer{m, 200.0};
  s.lower = m;
  s.dipole = DipoleSource{620.0, theta, 80.0};
  return s;
}

}  // namespace fixtures
