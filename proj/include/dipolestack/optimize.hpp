#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dipolestack/core.hpp"
#include "dipolestack/dipole.hpp"
#include "dipolestack/parallel.hpp"
#include "dipolestack/stack.hpp"
#include "dipolestack/tmm.hpp"

namespace dipolestack {

/// Geometry parameters an optimizer may vary. t1 is the layer above the host
/// that touches it, t2 the outermost layer above the host.
enum class Param { T0, D, T1, T2 };

inline const char* to_string(Param p) {
  switch (p) {
    case Param::T0: return "t0";
    case Param::D: return "d";
    case Param::T1: return "t1";
    case Param::T2: return "t2";
  }
  return "?";
}

inline Param param_from_string(const std::string& s) {
  if (s == "t0") return Param::T0;
  if (s == "d") return Param::D;
  if (s == "t1") return Param::T1;
  if (s == "t2") return Param::T2;
  throw ValidationError("unknown parameter '" + s + "' (expected t0, d, t1 or t2)");
}

/// Writes one geometry parameter into a stack.
inline void apply_param(Stack& s, Param p, double value) {
  switch (p) {
    case Param::T0: s.host.thickness_nm = value; return;
    case Param::D: s.dipole.depth_nm = value; return;
    case Param::T1:
      if (s.layers_above.empty()) throw ValidationError("t1 needs at least one layer above the host");
      s.layers_above.back().thickness_nm = value;
      return;
    case Param::T2:
      if (s.layers_above.size() < 2) throw ValidationError("t2 needs at least two layers above the host");
      s.layers_above.front().thickness_nm = value;
      return;
  }
}

inline double read_param(const Stack& s, Param p) {
  switch (p) {
    case Param::T0: return s.host.thickness_nm;
    case Param::D: return s.dipole.depth_nm;
    case Param::T1:
      if (s.layers_above.empty()) throw ValidationError("t1 needs at least one layer above the host");
      return s.layers_above.back().thickness_nm;
    case Param::T2:
      if (s.layers_above.size() < 2) throw ValidationError("t2 needs at least two layers above the host");
      return s.layers_above.front().thickness_nm;
  }
  return 0.0;
}

struct FreeParameter {
  Param param;
  double lower_nm;
  double upper_nm;
};

/// Free parameters with bounds on top of a template stack that fixes
/// everything else (materials, angle, wavelength); NA is fixed alongside.
struct ParameterSpace {
  Stack base;
  double numerical_aperture = 0.8;
  std::vector<FreeParameter> free;
  FarFieldQuadrature quadrature{};

  std::vector<double> lower() const {
    std::vector<double> v;
    for (const auto& f : free) v.push_back(f.lower_nm);
    return v;
  }
  std::vector<double> upper() const {
    std::vector<double> v;
    for (const auto& f : free) v.push_back(f.upper_nm);
    return v;
  }

  void check() const {
    if (free.empty()) throw ValidationError("parameter space has no free parameters");
    for (const auto& f : free) {
      if (!(f.lower_nm <= f.upper_nm) || !(f.lower_nm > 0.0)) {
        throw ValidationError(std::string("bounds of ") + to_string(f.param) + " must satisfy 0 < lower <= upper");
      }
      read_param(base, f.param);
    }
  }

  Stack build(std::span<const double> x) const {
    Stack s = base;
    for (std::size_t i = 0; i < free.size(); ++i) apply_param(s, free[i].param, x[i]);
    return s;
  }
};

struct ObjectiveValue {
  double xi = 0.0;
  bool feasible = true;
};

/// xi at the given free-parameter values; d >= t0 scores 0 and is flagged.
inline ObjectiveValue objective(std::span<const double> x, const ParameterSpace& space) {
  if (x.size() != space.free.size()) throw ValidationError("parameter vector size does not match the space");
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto& f = space.free[i];
    if (!(x[i] >= f.lower_nm && x[i] <= f.upper_nm)) {
      throw ValidationError(std::string("parameter ") + to_string(f.param) + " outside its bounds");
    }
  }
  const Stack s = space.build(x);
  if (!(s.dipole.depth_nm < s.host.thickness_nm)) return {0.0, false};
  return {collection_factor(s, space.numerical_aperture, space.quadrature), true};
}

struct PsoConfig {
  int swarm_size = 50;
  int iterations = 200;
  std::uint64_t seed = 1;
  double inertia = 0.729;
  double cognitive = 1.49;
  double social = 1.49;
  unsigned threads = 0;
};

struct PsoResult {
  std::vector<double> best;
  double best_value = 0.0;
  std::vector<double> trace;  ///< best-so-far after initialization and each iteration
  std::size_t evaluations = 0;
};

/// Particle swarm maximization of f over the box [lower, upper] with
/// reflecting walls. Random draws happen on the calling thread only, so the
/// result depends on the seed and not on the worker count.
template <class F>
PsoResult pso(F&& f, const std::vector<double>& lower, const std::vector<double>& upper, const PsoConfig& cfg = {}) {
  const std::size_t dim = lower.size();
  if (dim == 0 || upper.size() != dim) throw ValidationError("pso needs matching, nonempty bounds");
  if (cfg.swarm_size < 1 || cfg.iterations < 0) throw ValidationError("pso needs swarm_size >= 1, iterations >= 0");
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto n = static_cast<std::size_t>(cfg.swarm_size);

  std::vector<std::vector<double>> pos(n, std::vector<double>(dim)), vel = pos;
  for (auto& p : pos)
    for (std::size_t k = 0; k < dim; ++k) p[k] = lower[k] + unit(rng) * (upper[k] - lower[k]);
  for (auto& v : vel)
    for (std::size_t k = 0; k < dim; ++k) v[k] = (2.0 * unit(rng) - 1.0) * 0.2 * (upper[k] - lower[k]);

  std::vector<double> value(n);
  auto evaluate_all = [&] { parallel_for(n, cfg.threads, [&](std::size_t i) { value[i] = f(pos[i]); }); };

  PsoResult res;
  evaluate_all();
  res.evaluations += n;
  auto personal = pos;
  auto personal_value = value;
  std::size_t g = std::max_element(value.begin(), value.end()) - value.begin();
  res.best = pos[g];
  res.best_value = value[g];
  res.trace.push_back(res.best_value);

  for (int it = 0; it < cfg.iterations; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < dim; ++k) {
        const double r1 = unit(rng), r2 = unit(rng);
        double& v = vel[i][k];
        double& x = pos[i][k];
        v = cfg.inertia * v + cfg.cognitive * r1 * (personal[i][k] - x) + cfg.social * r2 * (res.best[k] - x);
        x += v;
        const double span = upper[k] - lower[k];
        if (span <= 0.0) {
          x = lower[k];
          v = 0.0;
          continue;
        }
        // Reflect until inside; very fast particles may bounce more than once.
        for (int b = 0; b < 8 && (x < lower[k] || x > upper[k]); ++b) {
          x = x < lower[k] ? 2.0 * lower[k] - x : 2.0 * upper[k] - x;
          v = -v;
        }
        x = std::clamp(x, lower[k], upper[k]);
      }
    }
    evaluate_all();
    res.evaluations += n;
    for (std::size_t i = 0; i < n; ++i) {
      if (value[i] > personal_value[i]) {
        personal_value[i] = value[i];
        personal[i] = pos[i];
      }
      if (value[i] > res.best_value) {
        res.best_value = value[i];
        res.best = pos[i];
      }
    }
    res.trace.push_back(res.best_value);
  }
  return res;
}

inline PsoResult pso(const ParameterSpace& space, const PsoConfig& cfg = {}) {
  space.check();
  return pso([&](const std::vector<double>& x) { return objective(x, space).xi; }, space.lower(), space.upper(),
             cfg);
}

struct RefineConfig {
  double fd_step_nm = 0.1;
  double gradient_tol = 1e-5;  ///< per nm
  int max_iterations = 200;
};

struct RefineResult {
  std::vector<double> params;
  double value = 0.0;
  double start_value = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Bounded quasi-Newton ascent: BFGS on the free coordinates, central
/// differences, projection onto the box, backtracking line search. Never
/// returns a point worse than `start`.
template <class F>
RefineResult local_refine(F&& f, std::vector<double> start, const std::vector<double>& lower,
                          const std::vector<double>& upper, const RefineConfig& cfg = {}) {
  const std::size_t dim = start.size();
  if (lower.size() != dim || upper.size() != dim) throw ValidationError("local_refine: bound sizes differ");
  for (std::size_t k = 0; k < dim; ++k) {
    if (!(start[k] >= lower[k] && start[k] <= upper[k])) throw ValidationError("local_refine: start outside bounds");
  }
  auto project = [&](std::vector<double>& x) {
    for (std::size_t k = 0; k < dim; ++k) x[k] = std::clamp(x[k], lower[k], upper[k]);
  };
  auto gradient = [&](const std::vector<double>& x, double fx) {
    std::vector<double> g(dim, 0.0);
    for (std::size_t k = 0; k < dim; ++k) {
      const double h = cfg.fd_step_nm;
      auto xp = x, xm = x;
      xp[k] = std::min(upper[k], x[k] + h);
      xm[k] = std::max(lower[k], x[k] - h);
      if (xp[k] == xm[k]) continue;
      const double fp = xp[k] == x[k] ? fx : f(xp);
      const double fm = xm[k] == x[k] ? fx : f(xm);
      g[k] = (fp - fm) / (xp[k] - xm[k]);
    }
    return g;
  };
  // Coordinates pinned at a bound with the gradient pointing outward.
  auto blocked = [&](const std::vector<double>& x, const std::vector<double>& g, std::size_t k) {
    return (x[k] <= lower[k] && g[k] < 0.0) || (x[k] >= upper[k] && g[k] > 0.0) || lower[k] == upper[k];
  };

  RefineResult res;
  std::vector<double> x = std::move(start);
  double fx = f(x);
  res.start_value = fx;
  std::vector<double> g = gradient(x, fx);
  std::vector<double> H(dim * dim, 0.0);  // inverse Hessian of -f
  bool fresh = true;

  int it = 0;
  for (; it < cfg.max_iterations; ++it) {
    double gnorm = 0.0;
    for (std::size_t k = 0; k < dim; ++k)
      if (!blocked(x, g, k)) gnorm += g[k] * g[k];
    gnorm = std::sqrt(gnorm);
    res.gradient_norm = gnorm;
    if (gnorm < cfg.gradient_tol) {
      res.converged = true;
      break;
    }
    if (fresh) {
      std::fill(H.begin(), H.end(), 0.0);
      for (std::size_t k = 0; k < dim; ++k) H[k * dim + k] = 1.0 / gnorm;  // first step of ~1 nm
      fresh = false;
    }
    std::vector<double> dir(dim, 0.0);
    for (std::size_t a = 0; a < dim; ++a) {
      if (blocked(x, g, a)) continue;
      for (std::size_t b = 0; b < dim; ++b)
        if (!blocked(x, g, b)) dir[a] += H[a * dim + b] * g[b];
    }
    double slope = 0.0;
    for (std::size_t k = 0; k < dim; ++k) slope += dir[k] * g[k];
    if (!(slope > 0.0)) {
      for (std::size_t k = 0; k < dim; ++k) dir[k] = blocked(x, g, k) ? 0.0 : g[k] / gnorm;
    }

    double alpha = 1.0;
    std::vector<double> xn;
    double fn = fx;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls, alpha *= 0.5) {
      xn = x;
      for (std::size_t k = 0; k < dim; ++k) xn[k] += alpha * dir[k];
      project(xn);
      double gain = 0.0;
      for (std::size_t k = 0; k < dim; ++k) gain += g[k] * (xn[k] - x[k]);
      if (gain <= 0.0) continue;
      fn = f(xn);
      if (fn >= fx + 1e-4 * gain) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (fresh) break;  // steepest step failed too
      fresh = true;
      continue;
    }
    std::vector<double> gn = gradient(xn, fn);
    // BFGS update for the minimization of -f.
    std::vector<double> s(dim), y(dim);
    double sy = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      s[k] = xn[k] - x[k];
      y[k] = -(gn[k] - g[k]);
      sy += s[k] * y[k];
    }
    if (sy > 1e-14) {
      std::vector<double> Hy(dim, 0.0);
      for (std::size_t a = 0; a < dim; ++a)
        for (std::size_t b = 0; b < dim; ++b) Hy[a] += H[a * dim + b] * y[b];
      double yHy = 0.0;
      for (std::size_t k = 0; k < dim; ++k) yHy += y[k] * Hy[k];
      const double rho = 1.0 / sy;
      for (std::size_t a = 0; a < dim; ++a)
        for (std::size_t b = 0; b < dim; ++b)
          H[a * dim + b] += (1.0 + yHy * rho) * rho * s[a] * s[b] - rho * (Hy[a] * s[b] + s[a] * Hy[b]);
    } else {
      fresh = true;
    }
    x = std::move(xn);
    fx = fn;
    g = std::move(gn);
  }
  res.iterations = it;
  res.params = std::move(x);
  res.value = fx;
  return res;
}

inline RefineResult local_refine(const std::vector<double>& start, const ParameterSpace& space,
                                 const RefineConfig& cfg = {}) {
  space.check();
  return local_refine([&](const std::vector<double>& x) { return objective(x, space).xi; }, start, space.lower(),
                      space.upper(), cfg);
}

struct OptimizationResult {
  PsoResult swarm;
  RefineResult refined;
};

/// Global swarm search followed by local refinement of the swarm's best point.
inline OptimizationResult optimize(const ParameterSpace& space, const PsoConfig& pcfg = {},
                                   const RefineConfig& rcfg = {}) {
  OptimizationResult r;
  r.swarm = pso(space, pcfg);
  r.refined = local_refine(r.swarm.best, space, rcfg);
  return r;
}

// ---------------------------------------------------------------------------
// Sweeps

/// Sweepable quantities; angle_of_incidence switches the sweep to reflectance.
enum class Axis { T0, D, T1, T2, Wavelength, Theta, NA, AngleOfIncidence };

inline const char* to_string(Axis a) {
  switch (a) {
    case Axis::T0: return "t0";
    case Axis::D: return "d";
    case Axis::T1: return "t1";
    case Axis::T2: return "t2";
    case Axis::Wavelength: return "lambda";
    case Axis::Theta: return "theta";
    case Axis::NA: return "na";
    case Axis::AngleOfIncidence: return "angle_of_incidence";
  }
  return "?";
}

inline Axis axis_from_string(const std::string& s) {
  for (Axis a : {Axis::T0, Axis::D, Axis::T1, Axis::T2, Axis::Wavelength, Axis::Theta, Axis::NA,
                 Axis::AngleOfIncidence}) {
    if (s == to_string(a)) return a;
  }
  throw ValidationError("unknown sweep axis '" + s + "'");
}

struct SweepAxis {
  Axis axis;
  std::vector<double> values;
};

/// Inclusive grid from `from` to `to` with spacing `step`.
inline std::vector<double> linspace_step(double from, double to, double step) {
  if (!(step > 0.0) || !(to >= from)) throw ValidationError("grid needs step > 0 and to >= from");
  std::vector<double> v;
  const auto n = static_cast<std::size_t>(std::floor((to - from) / step + 1e-9));
  for (std::size_t i = 0; i <= n; ++i) v.push_back(from + i * step);
  return v;
}

struct SweepGrid {
  std::vector<SweepAxis> axes;
  std::vector<double> values;  ///< row-major, last axis fastest
  std::vector<bool> feasible;
  std::string quantity = "xi";
  double numerical_aperture = 0.8;

  std::size_t size() const { return values.size(); }
  std::vector<std::size_t> shape() const {
    std::vector<std::size_t> s;
    for (const auto& a : axes) s.push_back(a.values.size());
    return s;
  }
  std::size_t flat(std::span<const std::size_t> idx) const {
    std::size_t f = 0;
    for (std::size_t k = 0; k < axes.size(); ++k) f = f * axes[k].values.size() + idx[k];
    return f;
  }
  std::vector<std::size_t> unflat(std::size_t f) const {
    std::vector<std::size_t> idx(axes.size());
    for (std::size_t k = axes.size(); k-- > 0;) {
      idx[k] = f % axes[k].values.size();
      f /= axes[k].values.size();
    }
    return idx;
  }
  double at(std::span<const std::size_t> idx) const { return values[flat(idx)]; }
};

struct SweepOptions {
  Polarization polarization = Polarization::S;  ///< for reflectance sweeps
  unsigned threads = 0;
  FarFieldQuadrature quadrature{};
};

/// Evaluates xi (or reflectance, when an angle_of_incidence axis is present)
/// on the outer product of the axes. Points with d >= t0 are infeasible and
/// hold 0.
inline SweepGrid sweep(const Stack& base, double numerical_aperture, const std::vector<SweepAxis>& axes,
                       const SweepOptions& opt = {}) {
  if (axes.empty()) throw ValidationError("sweep needs at least one axis");
  SweepGrid grid;
  grid.axes = axes;
  grid.numerical_aperture = numerical_aperture;
  std::size_t total = 1;
  bool reflectance = false;
  for (const auto& a : axes) {
    if (a.values.empty()) throw ValidationError(std::string("sweep axis ") + to_string(a.axis) + " is empty");
    for (const auto& b : axes)
      if (&a != &b && a.axis == b.axis) throw ValidationError("sweep axes must be distinct");
    total *= a.values.size();
    reflectance = reflectance || a.axis == Axis::AngleOfIncidence;
  }
  grid.quantity = reflectance ? "R" : "xi";
  grid.values.assign(total, 0.0);
  std::vector<char> ok(total, 1);

  parallel_for(total, opt.threads, [&](std::size_t f) {
    const auto idx = grid.unflat(f);
    Stack s = base;
    double na = numerical_aperture;
    double aoi = 0.0;
    for (std::size_t k = 0; k < axes.size(); ++k) {
      const double v = axes[k].values[idx[k]];
      switch (axes[k].axis) {
        case Axis::T0: apply_param(s, Param::T0, v); break;
        case Axis::D: apply_param(s, Param::D, v); break;
        case Axis::T1: apply_param(s, Param::T1, v); break;
        case Axis::T2: apply_param(s, Param::T2, v); break;
        case Axis::Wavelength: s.dipole.wavelength_nm = v; break;
        case Axis::Theta: s.dipole.polar_angle_deg = v; break;
        case Axis::NA: na = v; break;
        case Axis::AngleOfIncidence: aoi = v; break;
      }
    }
    if (!(s.dipole.depth_nm < s.host.thickness_nm)) {
      if (!reflectance) {
        ok[f] = 0;
        return;
      }
      s.dipole.depth_nm = 0.5 * s.host.thickness_nm;  // the dipole plays no part in reflectance
    }
    grid.values[f] = reflectance ? tmm::stack_reflectance(s, s.dipole.wavelength_nm, aoi, opt.polarization).R
                                 : collection_factor(s, na, opt.quadrature);
  });
  grid.feasible.assign(ok.begin(), ok.end());
  return grid;
}

// ---------------------------------------------------------------------------
// Resonance analysis

/// The sampled curve's maximum is not bracketed by half-maximum crossings.
class OpenResonanceError : public DomainError {
 public:
  using DomainError::DomainError;
};

struct Width {
  double center = 0.0;  ///< abscissa of the sampled maximum
  double left = 0.0;
  double right = 0.0;
  double width() const { return right - left; }
};

/// Half-maximum crossings around the global maximum, by linear interpolation.
inline Width half_maximum(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 3) throw ValidationError("fwhm needs at least 3 samples");
  const std::size_t m = std::max_element(y.begin(), y.end()) - y.begin();
  const double half = 0.5 * y[m];
  Width w;
  w.center = x[m];
  std::optional<double> left, right;
  for (std::size_t j = m; j > 0; --j) {
    if (y[j - 1] <= half) {
      left = x[j - 1] + (half - y[j - 1]) / (y[j] - y[j - 1]) * (x[j] - x[j - 1]);
      break;
    }
  }
  for (std::size_t j = m; j + 1 < x.size(); ++j) {
    if (y[j + 1] <= half) {
      right = x[j] + (y[j] - half) / (y[j] - y[j + 1]) * (x[j + 1] - x[j]);
      break;
    }
  }
  if (!left || !right) {
    throw OpenResonanceError("open resonance: half maximum not crossed on the " +
                             std::string(!left ? "left" : "right") + " flank");
  }
  w.left = *left;
  w.right = *right;
  return w;
}

inline double fwhm(std::span<const double> x, std::span<const double> y) { return half_maximum(x, y).width(); }

/// Local maxima of a sampled curve (interior points only), refined by a
/// parabola through the neighbours.
inline std::vector<double> local_maxima(std::span<const double> x, std::span<const double> y) {
  std::vector<double> out;
  for (std::size_t i = 1; i + 1 < x.size(); ++i) {
    if (y[i] > y[i - 1] && y[i] >= y[i + 1]) {
      const double d1 = y[i] - y[i - 1], d2 = y[i] - y[i + 1];
      const double h = x[i + 1] - x[i];
      out.push_back(x[i] + 0.5 * h * (d1 - d2) / (d1 + d2));
    }
  }
  return out;
}

/// xi(t0) at one wavelength for the base stack's other parameters.
inline std::vector<double> xi_versus_t0(const Stack& base, double numerical_aperture, double wavelength_nm,
                                        const std::vector<double>& t0, unsigned threads = 0) {
  Stack s = base;
  s.dipole.wavelength_nm = wavelength_nm;
  return sweep(s, numerical_aperture, {{Axis::T0, t0}}, {Polarization::S, threads, {}}).values;
}

struct DualResonance {
  double t0_nm = 0.0;          ///< resonance of the first wavelength
  double partner_t0_nm = 0.0;  ///< nearest resonance of the second wavelength
  double tolerance_nm = 0.0;   ///< half width at half maximum of the first-wavelength resonance
  std::vector<double> peaks_a;
  std::vector<double> peaks_b;
};

/// Smallest thickness at which the cavity is resonant at both wavelengths: a
/// resonance is a local maximum of xi(t0) at that wavelength; two coincide
/// when they lie closer than the HWHM of the resonance at `wavelength_a`.
inline DualResonance dual_resonance(const Stack& base, double numerical_aperture, double wavelength_a,
                                    double wavelength_b, const std::vector<double>& t0_grid,
                                    unsigned threads = 0) {
  const auto ya = xi_versus_t0(base, numerical_aperture, wavelength_a, t0_grid, threads);
  const auto yb = xi_versus_t0(base, numerical_aperture, wavelength_b, t0_grid, threads);
  DualResonance r;
  r.peaks_a = local_maxima(t0_grid, ya);
  r.peaks_b = local_maxima(t0_grid, yb);
  for (double pa : r.peaks_a) {
    // HWHM of this resonance from the samples between its neighbouring minima.
    std::size_t top = std::min<std::size_t>(
        std::lower_bound(t0_grid.begin(), t0_grid.end(), pa) - t0_grid.begin(), t0_grid.size() - 1);
    if (top > 0 && ya[top - 1] > ya[top]) --top;
    std::size_t lo = top, hi = top;
    while (lo > 0 && ya[lo - 1] < ya[lo]) --lo;
    while (hi + 1 < ya.size() && ya[hi + 1] < ya[hi]) ++hi;
    double hwhm = 0.0;
    try {
      hwhm = 0.5 * fwhm(std::span(t0_grid).subspan(lo, hi - lo + 1), std::span(ya).subspan(lo, hi - lo + 1));
    } catch (const OpenResonanceError&) {
      continue;
    }
    for (double pb : r.peaks_b) {
      if (std::abs(pa - pb) < hwhm) {
        r.t0_nm = pa;
        r.partner_t0_nm = pb;
        r.tolerance_nm = hwhm;
        return r;
      }
    }
  }
  throw ConvergenceError("no thickness in the grid is resonant at both wavelengths");
}

/// Wavelength of maximum xi within [from, to], scanned at `step` and refined
/// by a parabola through the best sample and its neighbours.
inline double resonance_wavelength(const Stack& base, double numerical_aperture, double from, double to,
                                   double step = 1.0, const FarFieldQuadrature& q = {}) {
  const auto grid = linspace_step(from, to, step);
  std::vector<double> y;
  Stack s = base;
  for (double l : grid) {
    s.dipole.wavelength_nm = l;
    y.push_back(collection_factor(s, numerical_aperture, q));
  }
  const std::size_t m = std::max_element(y.begin(), y.end()) - y.begin();
  if (m == 0 || m + 1 == y.size()) throw OpenResonanceError("resonance wavelength at the edge of the search window");
  const double d1 = y[m] - y[m - 1], d2 = y[m] - y[m + 1];
  return grid[m] + 0.5 * step * (d1 - d2) / (d1 + d2);
}

/// Largest tolerable thickness gradient in nm per um across a spot.
inline double gradient_bound(double acceptable_shift_nm, double slope, double spot_diameter_nm) {
  if (!(slope > 0.0) || !(spot_diameter_nm > 0.0) || acceptable_shift_nm < 0.0) {
    throw DomainError("gradient bound needs slope > 0, spot > 0 and shift >= 0");
  }
  return acceptable_shift_nm / (slope * spot_diameter_nm * 1e-3);
}

struct GradientReport {
  double t0_nm = 0.0;
  double slope = 0.0;  ///< d(lambda_res)/d(t0), nm per nm
  double bound_nm_per_um = 0.0;
  std::vector<double> t0_samples;
  std::vector<double> resonance_nm;
};

struct GradientOptions {
  double half_window_nm = 5.0;  ///< t0 range around the working point
  double t0_step_nm = 1.0;
  double search_half_width_nm = 40.0;
  double wavelength_step_nm = 1.0;
};

/// Resonance-shift slope from a linear fit of lambda_res(t0) around the base
/// stack's t0, converted to a gradient bound.
inline GradientReport gradient_tolerance_report(const Stack& base, double numerical_aperture,
                                                double spot_diameter_nm, double acceptable_shift_nm,
                                                const GradientOptions& opt = {}) {
  GradientReport rep;
  rep.t0_nm = base.host.thickness_nm;
  const double center_wl = base.dipole.wavelength_nm;
  double track = center_wl;
  auto t0s = linspace_step(rep.t0_nm - opt.half_window_nm, rep.t0_nm + opt.half_window_nm, opt.t0_step_nm);
  for (double t : t0s) {
    Stack s = base;
    s.host.thickness_nm = t;
    const double l = resonance_wavelength(s, numerical_aperture, track - opt.search_half_width_nm,
                                          track + opt.search_half_width_nm, opt.wavelength_step_nm);
    rep.t0_samples.push_back(t);
    rep.resonance_nm.push_back(l);
  }
  const double n = static_cast<double>(t0s.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < t0s.size(); ++i) {
    sx += rep.t0_samples[i];
    sy += rep.resonance_nm[i];
    sxx += rep.t0_samples[i] * rep.t0_samples[i];
    sxy += rep.t0_samples[i] * rep.resonance_nm[i];
  }
  rep.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  rep.bound_nm_per_um = gradient_bound(acceptable_shift_nm, std::abs(rep.slope), spot_diameter_nm);
  return rep;
}

}  // namespace dipolestack
