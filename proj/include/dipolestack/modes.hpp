#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "dipolestack/core.hpp"
#include "dipolestack/dipole.hpp"
#include "dipolestack/stack.hpp"
#include "dipolestack/tmm.hpp"

namespace dipolestack {

enum class ModeKind { Leaky, Guided, SPP };

inline const char* to_string(ModeKind k) {
  switch (k) {
    case ModeKind::Leaky: return "Leaky";
    case ModeKind::Guided: return "Guided";
    case ModeKind::SPP: return "SPP";
  }
  return "?";
}

struct ModeRecord {
  double n_eff = 0.0;
  Polarization polarization = Polarization::S;
  ModeKind kind = ModeKind::Leaky;
  double peak_height = 0.0;
  double prominence = 0.0;
  double fwhm_n_eff = 0.0;
};

inline ModeKind classify_mode(double n_eff, double host_index, double upper_index) {
  if (n_eff < upper_index) return ModeKind::Leaky;
  if (n_eff < host_index) return ModeKind::Guided;
  return ModeKind::SPP;
}

struct PeakOptions {
  double prominence_factor = 3.0;   ///< prominence must exceed this times the local background
  double background_window = 0.5;   ///< half width in n_eff of the background window
  int background_points = 201;      ///< uniform resampling points inside the window
  double branch_guard = 2e-3;       ///< ignore maxima this close to the host index
};

namespace detail {

inline double interpolate(std::span<const double> x, std::span<const double> y, double at) {
  if (at <= x.front()) return y.front();
  if (at >= x.back()) return y.back();
  const auto hi = static_cast<std::size_t>(std::upper_bound(x.begin(), x.end(), at) - x.begin());
  const std::size_t lo = hi - 1;
  const double f = (at - x[lo]) / (x[hi] - x[lo]);
  return y[lo] + f * (y[hi] - y[lo]);
}

// Median |y| over a uniform resampling of [center - window, center + window],
// leaving out the peak's own half-width interval [skip_lo, skip_hi].
inline double local_background(std::span<const double> x, std::span<const double> y, double center, double skip_lo,
                               double skip_hi, const PeakOptions& opt) {
  std::vector<double> v;
  v.reserve(opt.background_points);
  const double lo = std::max(x.front(), center - opt.background_window);
  const double hi = std::min(x.back(), center + opt.background_window);
  for (int i = 0; i < opt.background_points; ++i) {
    const double at = lo + (hi - lo) * i / (opt.background_points - 1);
    if (at > skip_lo && at < skip_hi) continue;
    v.push_back(std::abs(interpolate(x, y, at)));
  }
  if (v.empty()) return 0.0;
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  return v[v.size() / 2];
}

// Vertex of the parabola through three samples; falls back to the middle one.
inline double parabolic_vertex(double x0, double y0, double x1, double y1, double x2, double y2) {
  const double d = (x0 - x1) * (x0 - x2) * (x1 - x2);
  if (d == 0.0) return x1;
  const double a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / d;
  const double b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / d;
  if (a >= 0.0) return x1;
  const double v = -b / (2.0 * a);
  return std::clamp(v, x0, x2);
}

}  // namespace detail

struct Peak {
  double x = 0.0;
  double height = 0.0;
  double prominence = 0.0;
  double fwhm = 0.0;
};

/// Peaks of one sampled curve: local maxima with topographic prominence at
/// least `prominence_factor` times the local median |y| outside the peak.
/// FWHM is taken at half prominence.
inline std::vector<Peak> find_peaks(std::span<const double> x, std::span<const double> y,
                                    const PeakOptions& opt = {}) {
  std::vector<Peak> out;
  const std::size_t n = x.size();
  if (n < 3) return out;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!(y[i] > y[i - 1] && y[i] >= y[i + 1])) continue;
    // Walk outwards until a higher sample; record the lowest point on each side.
    double left_min = y[i];
    std::size_t l = i;
    while (l > 0 && y[l - 1] <= y[i]) left_min = std::min(left_min, y[--l]);
    double right_min = y[i];
    std::size_t r = i;
    while (r + 1 < n && y[r + 1] <= y[i]) right_min = std::min(right_min, y[++r]);
    const double base = std::max(left_min, right_min);
    const double prominence = y[i] - base;
    if (!(prominence > 0.0)) continue;
    const double half = y[i] - 0.5 * prominence;
    double xl = x[i], xr = x[i];
    for (std::size_t j = i; j > 0; --j) {
      if (y[j - 1] <= half) {
        xl = x[j - 1] + (half - y[j - 1]) / (y[j] - y[j - 1]) * (x[j] - x[j - 1]);
        break;
      }
      xl = x[j - 1];
    }
    for (std::size_t j = i; j + 1 < n; ++j) {
      if (y[j + 1] <= half) {
        xr = x[j] + (y[j] - half) / (y[j] - y[j + 1]) * (x[j + 1] - x[j]);
        break;
      }
      xr = x[j + 1];
    }
    const double background = detail::local_background(x, y, x[i], xl, xr, opt);
    if (prominence < opt.prominence_factor * background) continue;
    const double xv = detail::parabolic_vertex(x[i - 1], y[i - 1], x[i], y[i], x[i + 1], y[i + 1]);
    out.push_back({xv, y[i], prominence, xr - xl});
  }
  return out;
}

/// Leaky, guided and SPP modes as peaks of p_s and p_p, sorted by n_eff.
inline std::vector<ModeRecord> find_modes(const AngularSpectrum& spectrum, double host_index, double upper_index,
                                          const PeakOptions& opt = {}) {
  std::vector<ModeRecord> modes;
  for (Polarization pol : {Polarization::S, Polarization::P}) {
    const auto& y = pol == Polarization::S ? spectrum.p_s : spectrum.p_p;
    for (const auto& pk : find_peaks(spectrum.n_eff, y, opt)) {
      if (std::abs(pk.x - host_index) < opt.branch_guard) continue;
      modes.push_back({pk.x, pol, classify_mode(pk.x, host_index, upper_index), pk.height, pk.prominence, pk.fwhm});
    }
  }
  std::sort(modes.begin(), modes.end(), [](const ModeRecord& a, const ModeRecord& b) { return a.n_eff < b.n_eff; });
  return modes;
}

inline std::vector<ModeRecord> find_modes(const AngularSpectrum& spectrum, const PeakOptions& opt = {}) {
  return find_modes(spectrum, spectrum.host_index, spectrum.upper_index, opt);
}

struct SlabMode {
  double n_eff = 0.0;
  Polarization polarization = Polarization::S;
  int order = 0;
};

/// Guided modes of a symmetric dielectric slab from the transverse resonance
/// condition k_x t = m pi + 2 atan(rho gamma / k_x), rho = 1 (TE) or
/// n_core^2 / n_clad^2 (TM), solved by bisection on (n_clad, n_core).
inline std::vector<SlabMode> slab_modes_oracle(double n_core, double n_clad, double t0_nm, double wavelength_nm) {
  if (!(n_core > n_clad) || !(n_clad > 0.0)) throw DomainError("slab oracle needs n_core > n_clad > 0");
  if (!(t0_nm > 0.0) || !(wavelength_nm > 0.0)) throw DomainError("slab oracle needs positive t0 and wavelength");
  const double k0 = vacuum_wavenumber(wavelength_nm);
  std::vector<SlabMode> out;
  for (Polarization pol : {Polarization::S, Polarization::P}) {
    const double rho = pol == Polarization::S ? 1.0 : (n_core * n_core) / (n_clad * n_clad);
    auto residual = [&](double n, int m) {
      const double kx = k0 * std::sqrt(std::max(0.0, n_core * n_core - n * n));
      const double gamma = k0 * std::sqrt(std::max(0.0, n * n - n_clad * n_clad));
      return kx * t0_nm - m * kPi - 2.0 * std::atan2(rho * gamma, kx);
    };
    const double v = k0 * t0_nm * std::sqrt(n_core * n_core - n_clad * n_clad);
    for (int m = 0; m * kPi < v; ++m) {
      double lo = n_clad, hi = n_core;
      if (!(residual(lo, m) > 0.0)) continue;
      for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        (residual(mid, m) > 0.0 ? lo : hi) = mid;
      }
      out.push_back({0.5 * (lo + hi), pol, m});
    }
  }
  std::sort(out.begin(), out.end(), [](const SlabMode& a, const SlabMode& b) { return a.n_eff > b.n_eff; });
  return out;
}

/// Penetration depth of a mirror from its reflection phase, as an optical
/// length: d_pen = phi / (2 k0) with phi in [0, 2 pi) measured relative to an
/// ideal electric mirror (r_s = -1, r_p = +1 for magnetic-field amplitudes).
inline double penetration_depth_from_phase(double phase_rad, double wavelength_nm) {
  double phi = std::fmod(phase_rad, 2.0 * kPi);
  if (phi < 0.0) phi += 2.0 * kPi;
  return phi / (2.0 * vacuum_wavenumber(wavelength_nm));
}

inline double penetration_depth(const SubStack& mirror, double n_eff, double wavelength_nm, Polarization pol) {
  const tmm::PlaneWaveChannel ch{wavelength_nm, n_eff, pol};
  const Complex r = tmm::substack_coefficients(mirror, ch).r;
  if (!(std::abs(r) > 0.1)) {
    throw DomainError("no mirror: |r| = " + std::to_string(std::abs(r)) + " <= 0.1 at n_eff = " +
                      std::to_string(n_eff));
  }
  const double phase = std::arg(pol == Polarization::S ? -r : r);
  return penetration_depth_from_phase(phase, wavelength_nm);
}

struct ResonanceCheck {
  int order_q = 1;
  double lhs_nm = 0.0;
  double rhs_nm = 0.0;
  double residual_nm = 0.0;
};

/// Fabry-Perot condition q lambda / 2 = t0 sqrt(n0^2 - n_eff^2) + d_pen.
inline ResonanceCheck resonance_check(double t0_nm, double n0, double n_eff, double d_pen_up_nm,
                                      double d_pen_low_nm, double wavelength_nm) {
  if (!(t0_nm > 0.0) || !(n0 > 0.0) || !(wavelength_nm > 0.0) || n_eff < 0.0 || n_eff >= n0) {
    throw DomainError("resonance_check: need t0, n0, wavelength > 0 and 0 <= n_eff < n0");
  }
  ResonanceCheck c;
  c.rhs_nm = t0_nm * std::sqrt(n0 * n0 - n_eff * n_eff) + d_pen_up_nm + d_pen_low_nm;
  c.order_q = std::max(1, static_cast<int>(std::lround(c.rhs_nm / (0.5 * wavelength_nm))));
  c.lhs_nm = c.order_q * 0.5 * wavelength_nm;
  c.residual_nm = c.lhs_nm - c.rhs_nm;
  return c;
}

/// Far-field polar angle of a leaky mode, by Snell's law.
inline double leaky_to_angle(double n_eff, double n_upper) {
  if (!(n_eff >= 0.0)) throw DomainError("n_eff must be non-negative");
  if (!(n_eff < n_upper)) {
    throw DomainError("not a leaky mode: n_eff = " + std::to_string(n_eff) + " >= n_upper = " +
                      std::to_string(n_upper));
  }
  return std::asin(n_eff / n_upper) / kDegree;
}

}  // namespace dipolestack
