#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dipolestack/core.hpp"
#include "dipolestack/lsq.hpp"
#include "dipolestack/stack.hpp"
#include "dipolestack/tmm.hpp"

namespace dipolestack {

// ---------------------------------------------------------------------------
// Saturation curve I(P) = I_sat P / (P + P_sat) + c P + D

struct SaturationPoint {
  double power_mW = 0.0;
  double rate_cps = 0.0;
  std::optional<double> sigma_cps;
};

struct SaturationParams {
  double I_sat_cps = 0.0;
  double P_sat_mW = 0.0;
  double c_cps_per_mW = 0.0;
  double D_cps = 0.0;
};

inline double saturation_model(double power_mW, const SaturationParams& p) {
  return p.I_sat_cps * power_mW / (power_mW + p.P_sat_mW) + p.c_cps_per_mW * power_mW + p.D_cps;
}

struct SaturationOptions {
  bool fix_c_to_zero = false;
  std::optional<double> fixed_D_cps = 500.0;  ///< nullopt fits D as well
};

struct SaturationFit {
  SaturationParams params;
  SaturationParams errors;  ///< standard errors; 0 for fixed parameters
  bool c_fixed = false;
  bool c_clamped = false;  ///< c was refitted at 0 after converging negative
  bool D_fixed = true;
  double residual_norm = 0.0;
  int iterations = 0;
};

inline void check_saturation_data(std::span<const SaturationPoint> data) {
  if (data.size() < 4) throw DomainError("saturation fit needs at least 4 points");
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!(data[i].power_mW > 0.0)) throw ValidationError("saturation powers must be > 0");
    if (i > 0 && !(data[i].power_mW > data[i - 1].power_mW)) {
      throw ValidationError("saturation powers must be strictly increasing");
    }
    if (!(data[i].rate_cps >= 0.0)) throw ValidationError("saturation rates must be >= 0");
    if (data[i].sigma_cps && !(*data[i].sigma_cps > 0.0)) throw ValidationError("rate uncertainties must be > 0");
  }
}

namespace detail {

inline SaturationFit fit_saturation_once(std::span<const SaturationPoint> data, bool free_c,
                                         std::optional<double> fixed_D, const SaturationParams& guess) {
  const bool free_D = !fixed_D.has_value();
  const bool weighted = std::all_of(data.begin(), data.end(), [](const auto& p) { return p.sigma_cps.has_value(); });
  // Parameter vector: I_sat, P_sat, [c], [D].
  const int n = 2 + (free_c ? 1 : 0) + (free_D ? 1 : 0);
  auto unpack = [&](const lsq::Vector& x) {
    SaturationParams p;
    p.I_sat_cps = x[0];
    p.P_sat_mW = x[1];
    int k = 2;
    p.c_cps_per_mW = free_c ? x[k++] : 0.0;
    p.D_cps = free_D ? x[k] : *fixed_D;
    return p;
  };
  auto weight = [&](std::size_t i) { return weighted ? 1.0 / *data[i].sigma_cps : 1.0; };
  lsq::ResidualFn residuals = [&](const lsq::Vector& x) {
    const auto p = unpack(x);
    lsq::Vector r(data.size());
    // Beyond 1000x the largest power the curve is a straight line; stop there.
    if (!(p.P_sat_mW > 0.0) || p.P_sat_mW > 1e3 * data.back().power_mW) r.setConstant(std::numeric_limits<double>::quiet_NaN());
    else
      for (std::size_t i = 0; i < data.size(); ++i)
        r[i] = (saturation_model(data[i].power_mW, p) - data[i].rate_cps) * weight(i);
    return r;
  };
  lsq::JacobianFn jacobian = [&](const lsq::Vector& x) {
    const auto p = unpack(x);
    lsq::Matrix J(data.size(), n);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double P = data[i].power_mW, w = weight(i), s = P + p.P_sat_mW;
      J(i, 0) = P / s * w;
      J(i, 1) = -p.I_sat_cps * P / (s * s) * w;
      int k = 2;
      if (free_c) J(i, k++) = P * w;
      if (free_D) J(i, k) = w;
    }
    return J;
  };
  lsq::Vector x0(n);
  x0[0] = guess.I_sat_cps;
  x0[1] = guess.P_sat_mW;
  int k = 2;
  if (free_c) x0[k++] = guess.c_cps_per_mW;
  if (free_D) x0[k] = guess.D_cps;
  lsq::Options opt;
  opt.scale_covariance = !weighted;
  const auto res = lsq::levenberg_marquardt(residuals, jacobian, x0, opt);

  SaturationFit fit;
  fit.params = unpack(res.params);
  fit.errors.I_sat_cps = res.standard_errors[0];
  fit.errors.P_sat_mW = res.standard_errors[1];
  k = 2;
  if (free_c) fit.errors.c_cps_per_mW = res.standard_errors[k++];
  if (free_D) fit.errors.D_cps = res.standard_errors[k];
  fit.c_fixed = !free_c;
  fit.D_fixed = !free_D;
  fit.residual_norm = res.residual_norm;
  fit.iterations = res.iterations;
  return fit;
}

inline SaturationParams saturation_guess(std::span<const SaturationPoint> data, std::optional<double> fixed_D) {
  SaturationParams g;
  double min_rate = data.front().rate_cps, max_rate = data.front().rate_cps;
  for (const auto& p : data) {
    min_rate = std::min(min_rate, p.rate_cps);
    max_rate = std::max(max_rate, p.rate_cps);
  }
  g.D_cps = fixed_D ? *fixed_D : 0.5 * min_rate;
  g.I_sat_cps = std::max(max_rate - g.D_cps, 1.0);
  g.P_sat_mW = data.back().power_mW;
  for (const auto& p : data) {
    if (p.rate_cps - g.D_cps >= 0.5 * g.I_sat_cps) {
      g.P_sat_mW = p.power_mW;
      break;
    }
  }
  return g;
}

}  // namespace detail

/// Weighted least squares of the saturation model. D is held at
/// `fixed_D_cps` unless that is nullopt; a free c that converges negative is
/// refitted at 0.
inline SaturationFit fit_saturation(std::span<const SaturationPoint> data, const SaturationOptions& opt = {}) {
  check_saturation_data(data);
  const auto guess = detail::saturation_guess(data, opt.fixed_D_cps);
  auto outside = [&](const SaturationFit& f) {
    return !(f.params.P_sat_mW > data.front().power_mW && f.params.P_sat_mW < data.back().power_mW);
  };
  SaturationFit fit;
  try {
    fit = detail::fit_saturation_once(data, !opt.fix_c_to_zero, opt.fixed_D_cps, guess);
  } catch (const FitError&) {
    // A linear term trades off against an unresolved saturation knee; blame the span if that is why.
    std::optional<SaturationFit> simple;
    try {
      if (!opt.fix_c_to_zero) simple = detail::fit_saturation_once(data, false, opt.fixed_D_cps, guess);
    } catch (const FitError&) {
    }
    if (simple && outside(*simple)) {
      throw DomainError("data do not span the fitted half-saturation power " +
                        std::to_string(simple->params.P_sat_mW) + " mW");
    }
    throw;
  }
  if (!fit.c_fixed && fit.params.c_cps_per_mW < 0.0) {
    fit = detail::fit_saturation_once(data, false, opt.fixed_D_cps, guess);
    fit.c_clamped = true;
  }
  if (!(fit.params.I_sat_cps > 0.0)) throw FitError("fitted I_sat is not positive", fit.residual_norm);
  if (outside(fit)) {
    throw DomainError("data do not span the fitted half-saturation power " + std::to_string(fit.params.P_sat_mW) +
                      " mW");
  }
  return fit;
}

// ---------------------------------------------------------------------------
// Photon autocorrelation

/// Scaled complementary error function exp(x^2) erfc(x).
inline double erfcx(double x) {
  if (x < 25.0) return std::exp(x * x) * std::erfc(x);
  const double inv2 = 1.0 / (x * x);
  return (1.0 - 0.5 * inv2 + 0.75 * inv2 * inv2 - 1.875 * inv2 * inv2 * inv2) / (x * std::sqrt(kPi));
}

/// exp(-|t| / T) convolved with a unit-area Gaussian of width sigma.
inline double convolved_exponential(double t, double T, double sigma) {
  if (sigma <= 0.0) return std::exp(-std::abs(t) / T);
  const double s2 = std::sqrt(2.0);
  auto half = [&](double tt) {
    // exp(sigma^2 / 2T^2 - tt / T) erfc((sigma/T - tt/sigma) / sqrt 2), overflow-free.
    const double x = (sigma / T - tt / sigma) / s2;
    if (x < 0.0) return std::exp(0.5 * sigma * sigma / (T * T) - tt / T) * std::erfc(x);
    return std::exp(-0.5 * tt * tt / (sigma * sigma)) * erfcx(x);
  };
  return 0.5 * (half(t) + half(-t));
}

struct G2Params {
  double rho = 1.0;     ///< emitter share of the detected light
  double tau1_ns = 1.0; ///< antibunching time
  double a = 0.0;       ///< bunching amplitude
  double tau2_ns = 10.0;///< bunching time
};

/// Background-free three-level model.
inline double g2_model(double tau_ns, const G2Params& p) {
  const double t = std::abs(tau_ns);
  return 1.0 - (1.0 + p.a) * std::exp(-t / p.tau1_ns) + p.a * std::exp(-t / p.tau2_ns);
}

/// Model including uncorrelated background, 1 - rho^2 + rho^2 g2_model.
inline double g2_background(double tau_ns, const G2Params& p) {
  return 1.0 - p.rho * p.rho + p.rho * p.rho * g2_model(tau_ns, p);
}

/// g2_background convolved with the detector response.
inline double g2_convolved(double tau_ns, const G2Params& p, double jitter_sigma_ns) {
  const double e1 = convolved_exponential(tau_ns, p.tau1_ns, jitter_sigma_ns);
  const double e2 = p.a != 0.0 ? convolved_exponential(tau_ns, p.tau2_ns, jitter_sigma_ns) : 0.0;
  return 1.0 - p.rho * p.rho * ((1.0 + p.a) * e1 - p.a * e2);
}

struct G2Point {
  double delay_ns = 0.0;
  double g2 = 0.0;
};

struct G2Fit {
  G2Params params;
  G2Params errors;
  double g2_zero = 0.0;      ///< deconvolved, g2_background(0)
  double g2_zero_raw = 0.0;  ///< convolved model at zero delay
  bool a_fixed = false;
  double residual_norm = 0.0;
  int iterations = 0;
};

namespace detail {

inline G2Fit fit_g2_once(std::span<const G2Point> data, double sigma, bool free_a, const G2Params& guess) {
  const int n = free_a ? 4 : 2;
  auto unpack = [&](const lsq::Vector& x) {
    G2Params p;
    p.rho = x[0];
    p.tau1_ns = x[1];
    p.a = free_a ? x[2] : 0.0;
    p.tau2_ns = free_a ? x[3] : guess.tau2_ns;
    return p;
  };
  lsq::ResidualFn residuals = [&](const lsq::Vector& x) {
    const auto p = unpack(x);
    lsq::Vector r(data.size());
    if (!(p.tau1_ns > 0.0) || !(p.tau2_ns > 0.0)) {
      r.setConstant(std::numeric_limits<double>::quiet_NaN());
      return r;
    }
    for (std::size_t i = 0; i < data.size(); ++i) r[i] = g2_convolved(data[i].delay_ns, p, sigma) - data[i].g2;
    return r;
  };
  lsq::ProjectFn project = [&](lsq::Vector& x) {
    x[0] = std::clamp(x[0], 0.0, 1.0);
    if (free_a) x[2] = std::max(x[2], 0.0);
  };
  lsq::Vector x0(n);
  x0[0] = guess.rho;
  x0[1] = guess.tau1_ns;
  if (free_a) {
    x0[2] = guess.a;
    x0[3] = guess.tau2_ns;
  }
  const auto res = lsq::levenberg_marquardt(residuals, lsq::numeric_jacobian(residuals), x0, {}, project);
  G2Fit fit;
  fit.params = unpack(res.params);
  fit.errors.rho = res.standard_errors[0];
  fit.errors.tau1_ns = res.standard_errors[1];
  fit.errors.a = free_a ? res.standard_errors[2] : 0.0;
  fit.errors.tau2_ns = free_a ? res.standard_errors[3] : 0.0;
  fit.a_fixed = !free_a;
  fit.residual_norm = res.residual_norm;
  fit.iterations = res.iterations;
  fit.g2_zero = g2_background(0.0, fit.params);
  fit.g2_zero_raw = g2_convolved(0.0, fit.params, sigma);
  return fit;
}

}  // namespace detail

/// Least-squares fit of the jitter-convolved three-level model. The bunching
/// term is dropped when its amplitude is consistent with zero within 1 sigma.
inline G2Fit fit_g2(std::span<const G2Point> data, double jitter_sigma_ns) {
  if (!(jitter_sigma_ns >= 0.0)) throw DomainError("jitter sigma must be >= 0");
  if (data.size() < 6) throw DomainError("g2 fit needs at least 6 points");
  double tmin = data.front().delay_ns, tmax = tmin, gmin = data.front().g2;
  for (const auto& p : data) {
    if (!(p.g2 >= 0.0)) throw ValidationError("g2 values must be >= 0");
    tmin = std::min(tmin, p.delay_ns);
    tmax = std::max(tmax, p.delay_ns);
    gmin = std::min(gmin, p.g2);
  }
  if (!(tmin <= 0.0 && tmax >= 0.0)) throw DomainError("g2 delays must cover zero");

  G2Params guess;
  guess.rho = std::sqrt(std::clamp(1.0 - gmin, 0.05, 1.0));
  // Antibunching time from the delay at which the dip has recovered halfway.
  const double half_level = 0.5 * (1.0 + gmin);
  double t_half = 0.0;
  for (const auto& p : data) {
    if (p.delay_ns > 0.0 && p.g2 >= half_level) {
      t_half = p.delay_ns;
      break;
    }
  }
  guess.tau1_ns = std::max(t_half / std::log(2.0), std::max(jitter_sigma_ns, 0.1));
  const double reach = std::max(std::abs(tmin), std::abs(tmax));
  if (reach < 5.0 * guess.tau1_ns) {
    throw DomainError("g2 delays must reach at least 5 antibunching times");
  }
  guess.a = 0.1;
  guess.tau2_ns = 10.0 * guess.tau1_ns;

  G2Fit fit;
  try {
    fit = detail::fit_g2_once(data, jitter_sigma_ns, true, guess);
    if (fit.params.a <= fit.errors.a || fit.params.a == 0.0) fit = detail::fit_g2_once(data, jitter_sigma_ns, false, guess);
  } catch (const FitError&) {
    fit = detail::fit_g2_once(data, jitter_sigma_ns, false, guess);
  }
  return fit;
}

// ---------------------------------------------------------------------------
// Background ratio from spectra

struct SpectrumPoint {
  double wavelength_nm = 0.0;
  double value = 0.0;
};

struct BackgroundRatio {
  double rho = 0.0;
  double emitter_integral = 0.0;
  double background_integral = 0.0;
  bool clamped = false;
  std::string warning;
};

/// Trapezoidal integral of a sampled spectrum over [lo, hi], interpolating
/// linearly at the window edges.
inline double integrate_window(std::span<const SpectrumPoint> s, double lo, double hi) {
  if (s.size() < 2 || s.front().wavelength_nm > lo || s.back().wavelength_nm < hi) {
    throw DomainError("spectrum does not cover the integration window");
  }
  auto value_at = [&](double w) {
    for (std::size_t i = 1; i < s.size(); ++i) {
      if (s[i].wavelength_nm >= w) {
        const double f = (w - s[i - 1].wavelength_nm) / (s[i].wavelength_nm - s[i - 1].wavelength_nm);
        return s[i - 1].value + f * (s[i].value - s[i - 1].value);
      }
    }
    return s.back().value;
  };
  std::vector<SpectrumPoint> pts{{lo, value_at(lo)}};
  for (const auto& p : s)
    if (p.wavelength_nm > lo && p.wavelength_nm < hi) pts.push_back(p);
  pts.push_back({hi, value_at(hi)});
  double sum = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    sum += 0.5 * (pts[i].value + pts[i - 1].value) * (pts[i].wavelength_nm - pts[i - 1].wavelength_nm);
  }
  return sum;
}

inline BackgroundRatio background_ratio_from_spectra(std::span<const SpectrumPoint> emitter,
                                                     std::span<const SpectrumPoint> background, double window_lo_nm,
                                                     double window_hi_nm) {
  if (!(window_hi_nm > window_lo_nm)) throw DomainError("integration window must have hi > lo");
  BackgroundRatio r;
  r.emitter_integral = integrate_window(emitter, window_lo_nm, window_hi_nm);
  r.background_integral = integrate_window(background, window_lo_nm, window_hi_nm);
  if (!(r.emitter_integral > 0.0)) throw DomainError("emitter spectrum integrates to <= 0");
  r.rho = (r.emitter_integral - r.background_integral) / r.emitter_integral;
  if (r.rho < 0.0) {
    r.rho = 0.0;
    r.clamped = true;
    r.warning = "background exceeds emitter signal; rho clamped to 0";
  }
  return r;
}

// ---------------------------------------------------------------------------
// Thickness from white-light reflectance

struct ThicknessOptions {
  double step_nm = 1.0;
  double separation_nm = 10.0;   ///< minima closer than this are the same candidate
  double comparable_ratio = 2.0; ///< another minimum within this chi^2 factor is ambiguous
  double flat_tolerance = 1e-6;  ///< relative chi^2 spread below which the scan carries no information
};

struct ThicknessFit {
  double t0_nm = 0.0;
  double t0_error_nm = 0.0;
  double scale = 1.0;
  double offset = 0.0;
  double chi2 = 0.0;
  std::vector<double> scan_t0;
  std::vector<double> scan_chi2;
};

namespace detail {

struct LinearFit {
  double scale = 0.0;
  double offset = 0.0;
  double chi2 = 0.0;
};

// Best a >= 0, b for y ~ a m + b.
inline LinearFit fit_scale_offset(std::span<const double> m, std::span<const double> y) {
  const double n = static_cast<double>(m.size());
  double sm = 0, sy = 0, smm = 0, smy = 0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    sm += m[i];
    sy += y[i];
    smm += m[i] * m[i];
    smy += m[i] * y[i];
  }
  const double det = n * smm - sm * sm;
  LinearFit f;
  f.scale = det > 1e-300 * n * smm ? (n * smy - sm * sy) / det : 0.0;
  if (f.scale < 0.0) f.scale = 0.0;
  f.offset = (sy - f.scale * sm) / n;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double r = y[i] - f.scale * m[i] - f.offset;
    f.chi2 += r * r;
  }
  return f;
}

}  // namespace detail

/// Normal-incidence reflectance spectrum of the template with host thickness t0.
inline std::vector<double> reflectance_spectrum(const Stack& base, double t0_nm, std::span<const double> wavelengths) {
  Stack s = base;
  s.host.thickness_nm = t0_nm;
  s.dipole.depth_nm = 0.5 * t0_nm;
  std::vector<double> out;
  out.reserve(wavelengths.size());
  for (double w : wavelengths) out.push_back(tmm::stack_reflectance(s, w, 0.0, Polarization::S).R);
  return out;
}

/// Host thickness whose reflectance spectrum, up to a scale a >= 0 and an
/// offset, best matches the measurement. Global scan, then parabolic
/// refinement of the best scan point.
inline ThicknessFit thickness_from_reflectance(std::span<const SpectrumPoint> measured, const Stack& base,
                                               double t0_lo_nm, double t0_hi_nm, const ThicknessOptions& opt = {}) {
  if (measured.size() < 5) throw DomainError("reflectance spectrum needs at least 5 points");
  if (!(t0_lo_nm > 0.0 && t0_hi_nm > t0_lo_nm + 2.0 * opt.step_nm)) throw DomainError("invalid t0 bounds");
  std::vector<double> wl, y;
  for (const auto& p : measured) {
    wl.push_back(p.wavelength_nm);
    y.push_back(p.value);
  }
  auto chi2_at = [&](double t0) { return detail::fit_scale_offset(reflectance_spectrum(base, t0, wl), y); };

  ThicknessFit fit;
  const auto n = static_cast<std::size_t>(std::floor((t0_hi_nm - t0_lo_nm) / opt.step_nm)) + 1;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = t0_lo_nm + i * opt.step_nm;
    fit.scan_t0.push_back(t);
    fit.scan_chi2.push_back(chi2_at(t).chi2);
  }
  const auto& c = fit.scan_chi2;
  const std::size_t best = std::min_element(c.begin(), c.end()) - c.begin();
  const double cmin = c[best], cmax = *std::max_element(c.begin(), c.end());
  if (cmax - cmin <= opt.flat_tolerance * std::max(cmax, 1e-300)) {
    throw AmbiguityError("reflectance carries no thickness information: chi^2 is flat over the scan");
  }
  // Competing local minima.
  std::vector<double> rivals;
  for (std::size_t i = 0; i < n; ++i) {
    const bool is_min = (i == 0 || c[i] <= c[i - 1]) && (i + 1 == n || c[i] <= c[i + 1]);
    if (!is_min || i == best) continue;
    if (std::abs(fit.scan_t0[i] - fit.scan_t0[best]) < opt.separation_nm) continue;
    if (c[i] <= opt.comparable_ratio * cmin + 1e-12 * cmax) rivals.push_back(fit.scan_t0[i]);
  }
  if (!rivals.empty()) {
    std::string list = std::to_string(fit.scan_t0[best]);
    for (double r : rivals) list += ", " + std::to_string(r);
    throw AmbiguityError("several thicknesses fit comparably well: " + list + " nm");
  }

  // Parabolic refinement at the scan step, then at a tenth of it.
  double t = fit.scan_t0[best];
  double h = opt.step_nm;
  double curvature = 0.0;
  for (int pass = 0; pass < 2; ++pass) {
    const double lo = std::max(t0_lo_nm, t - h), hi = std::min(t0_hi_nm, t + h);
    if (hi - lo < 2.0 * h - 1e-12) break;
    const double fl = chi2_at(lo).chi2, fm = chi2_at(t).chi2, fh = chi2_at(hi).chi2;
    const double denom = fl - 2.0 * fm + fh;
    if (denom <= 0.0) break;
    t = std::clamp(t + 0.5 * h * (fl - fh) / denom, lo, hi);
    curvature = denom / (h * h);
    h *= 0.1;
  }
  const auto final_fit = chi2_at(t);
  fit.t0_nm = t;
  fit.scale = final_fit.scale;
  fit.offset = final_fit.offset;
  fit.chi2 = final_fit.chi2;
  const double dof = std::max(1.0, static_cast<double>(wl.size()) - 3.0);
  fit.t0_error_nm = curvature > 0.0 ? std::sqrt(2.0 * final_fit.chi2 / dof / curvature) : 0.0;
  return fit;
}

}  // namespace dipolestack
