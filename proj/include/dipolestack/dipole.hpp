#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "dipolestack/core.hpp"
#include "dipolestack/quadrature.hpp"
#include "dipolestack/stack.hpp"
#include "dipolestack/tmm.hpp"

namespace dipolestack {

/// Sampling controls for the LDOS integral over n_eff.
struct SpectrumGrid {
  double step = 1e-3;      ///< base panel width in n_eff
  double rel_tol = 1e-7;   ///< Simpson error budget per unit n_eff, relative to P_hom
  int max_depth = 24;      ///< bisection limit per base panel
  double tail_tol = 1e-6;  ///< truncate the evanescent tail below this relative contribution
  double n_eff_limit = 50.0;
};

/// Inhomogeneous power spectrum p(n_eff), normalized so that
/// P_tot / P_hom = 1 + integral of (p_s + p_p) over n_eff.
struct AngularSpectrum {
  std::vector<double> n_eff;
  std::vector<double> p_s;
  std::vector<double> p_p;
  double wavelength_nm = 0.0;
  double host_index = 0.0;
  double upper_index = 0.0;
  double integral = 0.0;                ///< integral of p_s + p_p over the sampled range
  std::vector<double> unresolved;       ///< n_eff where refinement hit its depth limit
  std::size_t negative_samples = 0; ///< samples with p < 0 at n_eff < n0 (interference dips)

  std::size_t size() const { return n_eff.size(); }
  double total(std::size_t i) const { return p_s[i] + p_p[i]; }
};

/// Sampled far-field radiant intensity in the upper half space, per unit solid
/// angle and normalized to P_hom.
struct FarField {
  std::vector<double> theta_deg;
  std::vector<double> phi_deg;
  std::vector<double> intensity;  ///< row-major [theta][phi]

  double at(std::size_t i_theta, std::size_t i_phi) const { return intensity[i_theta * phi_deg.size() + i_phi]; }
};

struct EmissionResult {
  double P_tot_over_P_hom = 0.0;
  double xi = 0.0;
  double P_upper_over_P_hom = 0.0;
  std::optional<double> P_lower_over_P_hom;  ///< only for a transparent lower half space
  FarField far_field;
};

/// Options for the far-field angular integrals.
struct FarFieldQuadrature {
  int panels = 128;
  int order = 8;
};

/// Emission of the stack's dipole at its wavelength. Resolves all indices once
/// and evaluates spectral densities per transverse index n_eff.
class EmissionModel {
 public:
  explicit EmissionModel(const Stack& stack) : stack_(stack) {
    auto [up, down] = split_at_dipole(stack);
    lambda_ = stack.dipole.wavelength_nm;
    k0_ = vacuum_wavenumber(lambda_);
    up_ = tmm::resolve(up, lambda_);
    down_ = tmm::resolve(down, lambda_);
    host_ = up_.incidence;
    n0_ = host_.n;
    const double theta = stack.dipole.polar_angle_deg * kDegree;
    sin2_ = std::sin(theta) * std::sin(theta);
    cos2_ = std::cos(theta) * std::cos(theta);
    cos_ = std::cos(theta);
    sin_ = std::sin(theta);
  }

  const Stack& stack() const { return stack_; }
  double wavelength_nm() const { return lambda_; }
  double host_index() const { return n0_; }
  double upper_index() const { return up_.exit.n; }
  double lower_index() const { return down_.exit.n; }
  bool host_lossless() const { return host_.k == 0.0; }
  bool lower_transparent() const { return down_.exit.k == 0.0; }

  /// Real parts of every medium index; kz has a branch point at each.
  std::vector<double> branch_points() const {
    std::vector<double> pts{up_.incidence.n, up_.exit.n, down_.exit.n};
    for (const auto& l : up_.layers) pts.push_back(l.index.n);
    for (const auto& l : down_.layers) pts.push_back(l.index.n);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return pts;
  }

  struct Ldos {
    double s = 0.0;
    double p = 0.0;
  };

  /// Inhomogeneous LDOS contribution per unit n_eff, split by polarization.
  /// `host_kz` overrides the host's normal wavenumber when the caller knows it
  /// more accurately than sqrt(n0^2 - n_eff^2) near n_eff = n0.
  Ldos ldos(double n_eff, std::optional<Complex> host_kz = std::nullopt) const {
    const Channel c = channel(n_eff, false, host_kz);
    const Complex s = n_eff / n0_;
    Ldos out;
    {
      const Complex au = c.ru_s * c.eu2, ad = c.rd_s * c.ed2;
      const Complex even = (au + ad + 2.0 * au * ad) / (1.0 - au * ad);
      out.s = 0.75 * sin2_ * (s / c.sz * even).real();
    }
    {
      const Complex au = c.ru_p * c.eu2, ad = c.rd_p * c.ed2;
      const Complex denom = 1.0 - au * ad;
      const Complex even = (au + ad + 2.0 * au * ad) / denom;
      const Complex odd = (-au - ad + 2.0 * au * ad) / denom;
      out.p = 0.75 * sin2_ * (s * c.sz * odd).real() + 1.5 * cos2_ * (s * s * s / c.sz * even).real();
    }
    out.s /= n0_;
    out.p /= n0_;
    return out;
  }

  /// Power per unit n_eff transmitted into the upper (or lower) half space,
  /// integrated over azimuth.
  double transmitted_density(double n_eff, bool upper) const {
    const Channel c = channel(n_eff, true);
    const Complex s = n_eff / n0_;
    const Complex& r_far_s = upper ? c.rd_s : c.ru_s;
    const Complex& r_far_p = upper ? c.rd_p : c.ru_p;
    const Complex& e_far2 = upper ? c.ed2 : c.eu2;
    const Complex& t_s = upper ? c.tu_s : c.td_s;
    const Complex& t_p = upper ? c.tu_p : c.td_p;
    const Complex e_near2 = upper ? c.eu2 : c.ed2;
    const ComplexIndex& exit = upper ? up_.exit : down_.exit;

    const Complex as = c.ru_s * c.eu2, ads = c.rd_s * c.ed2;
    const Complex ap = c.ru_p * c.eu2, adp = c.rd_p * c.ed2;
    const Complex far_s = r_far_s * e_far2;
    const Complex far_p = r_far_p * e_far2;
    const Complex Ds = 1.0 - as * ads;
    const Complex Dp = 1.0 - ap * adp;

    const Complex A_s = (1.0 + far_s) / (c.sz * Ds);
    const Complex B_x = (1.0 - far_p) / Dp;
    const Complex B_z = (s / c.sz) * (1.0 + far_p) / Dp;
    const double Fs = flux_s(exit, n_eff);
    const double Fp = flux_p(exit, n_eff);
    const double decay = std::abs(e_near2);  // |exp(i kz0 d)|^2
    const double bracket = sin2_ * std::norm(A_s) * std::norm(t_s) * Fs +
                           (sin2_ * std::norm(B_x) + 2.0 * cos2_ * std::norm(B_z)) * std::norm(t_p) * Fp;
    return 0.375 * s.real() * decay * bracket / n0_;
  }

  /// Radiant intensity per unit solid angle at polar angle theta (in the upper
  /// half space) and azimuth phi, normalized to P_hom.
  double intensity(double theta_rad, double phi_rad) const {
    const double n_plus = up_.exit.n;
    const double n_eff = n_plus * std::sin(theta_rad);
    const Channel c = channel(n_eff, true);
    const Complex s = n_eff / n0_;
    const Complex as = c.ru_s * c.eu2, ads = c.rd_s * c.ed2;
    const Complex ap = c.ru_p * c.eu2, adp = c.rd_p * c.ed2;
    const Complex a_s = sin_ * std::sin(phi_rad) * (1.0 + ads) / (c.sz * (1.0 - as * ads));
    const Complex a_p =
        (sin_ * std::cos(phi_rad) * (1.0 - adp) - cos_ * (s / c.sz) * (1.0 + adp)) / (1.0 - ap * adp);
    const double bracket = std::norm(a_s) * std::norm(c.tu_s) * flux_s(up_.exit, n_eff) +
                           std::norm(a_p) * std::norm(c.tu_p) * flux_p(up_.exit, n_eff);
    return 3.0 / (8.0 * kPi) * (n_plus * n_plus) / (n0_ * n0_) * std::cos(theta_rad) * std::abs(c.eu2) * bracket;
  }

  /// Power radiated into the cone theta <= theta_max around +z (or -z for the
  /// lower half space), normalized to P_hom.
  double cone_power(double theta_max_rad, bool upper, const FarFieldQuadrature& q = {}) const {
    const double n_out = upper ? up_.exit.n : down_.exit.n;
    std::vector<double> cuts{0.0, theta_max_rad};
    for (double bp : branch_points()) {
      if (bp < n_out) {
        const double th = std::asin(bp / n_out);
        if (th > 0.0 && th < theta_max_rad) cuts.push_back(th);
      }
    }
    std::sort(cuts.begin(), cuts.end());
    const auto rule = quad::gauss_legendre(q.order);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      const double a = cuts[i], b = cuts[i + 1];
      if (b - a <= 0.0) continue;
      const int panels = std::max(4, static_cast<int>(std::ceil(q.panels * (b - a) / theta_max_rad)));
      total += quad::composite_gauss(
          [&](double th) {
            const double n_eff = n_out * std::sin(th);
            return transmitted_density(n_eff, upper) * n_out * std::cos(th);
          },
          a, b, panels, rule);
    }
    return total;
  }

 private:
  struct Channel {
    Complex sz;
    Complex eu2, ed2;  // exp(2 i kz0 d_up), exp(2 i kz0 d_down)
    Complex ru_s, rd_s, ru_p, rd_p;
    Complex tu_s, td_s, tu_p, td_p;
  };

  Channel channel(double n_eff, bool need_t = false, std::optional<Complex> host_kz = std::nullopt) const {
    Channel c;
    tmm::PlaneWaveChannel ch{lambda_, n_eff, Polarization::S};
    const Complex kz0 = host_kz ? *host_kz : tmm::kz(host_, ch);
    c.sz = kz0 / (k0_ * n0_);
    const Complex i(0.0, 1.0);
    c.eu2 = std::exp(2.0 * i * kz0 * up_.emitter_distance_nm);
    c.ed2 = std::exp(2.0 * i * kz0 * down_.emitter_distance_nm);
    auto us = up_.coefficients(ch);
    auto ds = down_.coefficients(ch);
    ch.polarization = Polarization::P;
    auto up = up_.coefficients(ch);
    auto dp = down_.coefficients(ch);
    c.ru_s = us.r;
    c.rd_s = ds.r;
    c.ru_p = up.r;
    c.rd_p = dp.r;
    if (need_t) {
      c.tu_s = us.t;
      c.td_s = ds.t;
      c.tu_p = up.t;
      c.td_p = dp.t;
    }
    return c;
  }

  // Flux of a unit transmitted amplitude relative to the host-side normalization.
  double flux_s(const ComplexIndex& exit, double n_eff) const {
    const tmm::PlaneWaveChannel ch{lambda_, n_eff, Polarization::S};
    return tmm::kz(exit, ch).real() / (k0_ * n0_);
  }
  double flux_p(const ComplexIndex& exit, double n_eff) const {
    const tmm::PlaneWaveChannel ch{lambda_, n_eff, Polarization::P};
    return tmm::admittance(exit, ch).real() * n0_ / k0_;
  }

  Stack stack_;
  double lambda_ = 0.0;
  double k0_ = 0.0;
  tmm::ResolvedSubStack up_, down_;
  ComplexIndex host_;
  double n0_ = 1.0;
  double sin2_ = 1.0, cos2_ = 0.0, sin_ = 1.0, cos_ = 0.0;
};

namespace detail {

struct SpectrumAccumulator {
  const EmissionModel& model;
  std::vector<std::array<double, 3>> rows;  // n_eff, p_s, p_p

  double operator()(double n_eff, std::optional<Complex> host_kz = std::nullopt) {
    const auto l = model.ldos(n_eff, host_kz);
    rows.push_back({n_eff, l.s, l.p});
    return l.s + l.p;
  }
};

// Keeps samples off the kz = 0 point, where p * jacobian is 0 * inf.
inline constexpr double kEdge = 1e-12;

// Integrates p over [a, b] with a variable change that removes the inverse
// square-root singularity of the host's kz at n_eff = n0.
inline double integrate_segment(SpectrumAccumulator& acc, double a, double b, double n0, const SpectrumGrid& grid,
                                std::vector<double>& unresolved) {
  double total = 0.0;
  const bool lossless = acc.model.host_lossless();
  const double k0 = vacuum_wavenumber(acc.model.wavelength_nm());
  auto run = [&](auto&& transformed, double ua, double ub, auto&& to_n) {
    quad::AdaptiveSimpson sub(transformed, grid.rel_tol * std::max(b - a, grid.step), grid.max_depth);
    const double v = sub.integrate(ua, ub);
    for (double x : sub.unresolved()) unresolved.push_back(to_n(x));
    return v;
  };
  if (b <= n0) {
    // n = n0 sin u
    const double ua = std::asin(std::clamp(a / n0, 0.0, 1.0));
    const double ub = std::asin(std::clamp(b / n0, 0.0, 1.0));
    total += run(
        [&](double u) {
          u = std::min(u, 0.5 * kPi - kEdge);
          const auto kz0 = lossless ? std::optional<Complex>(k0 * n0 * std::cos(u)) : std::nullopt;
          return acc(n0 * std::sin(u), kz0) * n0 * std::cos(u);
        },
        ua, ub, [&](double u) { return n0 * std::sin(u); });
  } else {
    // n = n0 cosh v
    const double va = std::acosh(std::max(a / n0, 1.0));
    const double vb = std::acosh(std::max(b / n0, 1.0));
    total += run(
        [&](double v) {
          v = std::max(v, kEdge);
          const auto kz0 = lossless ? std::optional<Complex>(Complex(0.0, k0 * n0 * std::sinh(v))) : std::nullopt;
          return acc(n0 * std::cosh(v), kz0) * n0 * std::sinh(v);
        },
        va, vb, [&](double v) { return n0 * std::cosh(v); });
  }
  return total;
}

inline AngularSpectrum finish_spectrum(SpectrumAccumulator& acc, const EmissionModel& model, double integral,
                                       std::vector<double> unresolved) {
  auto& rows = acc.rows;
  std::sort(rows.begin(), rows.end(), [](const auto& x, const auto& y) { return x[0] < y[0]; });
  rows.erase(std::unique(rows.begin(), rows.end(), [](const auto& x, const auto& y) { return x[0] == y[0]; }),
             rows.end());
  AngularSpectrum out;
  out.wavelength_nm = model.wavelength_nm();
  out.host_index = model.host_index();
  out.upper_index = model.upper_index();
  out.integral = integral;
  out.n_eff.reserve(rows.size());
  for (const auto& r : rows) {
    out.n_eff.push_back(r[0]);
    out.p_s.push_back(r[1]);
    out.p_p.push_back(r[2]);
    if (r[0] < out.host_index && r[1] + r[2] < 0.0) ++out.negative_samples;
  }
  std::sort(unresolved.begin(), unresolved.end());
  out.unresolved = std::move(unresolved);
  return out;
}

// Panel boundaries: uniform `step` grid plus every branch point.
inline std::vector<double> panel_edges(double a, double b, double step, const std::vector<double>& branch) {
  std::vector<double> edges;
  const auto n = static_cast<std::size_t>(std::ceil((b - a) / step));
  for (std::size_t i = 0; i <= n; ++i) edges.push_back(std::min(b, a + i * step));
  for (double bp : branch) {
    if (bp > a && bp < b) edges.push_back(bp);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end(),
                          [](double x, double y) { return std::abs(x - y) < 1e-12; }),
              edges.end());
  return edges;
}

}  // namespace detail

/// Adaptively sampled p(n_eff) on [0, n_eff_max].
inline AngularSpectrum angular_spectrum(const Stack& stack, double n_eff_max, const SpectrumGrid& grid = {}) {
  const EmissionModel model(stack);
  if (!(n_eff_max >= model.host_index())) {
    throw DomainError("angular_spectrum: n_eff_max must be >= host index");
  }
  detail::SpectrumAccumulator acc{model, {}};
  std::vector<double> unresolved;
  const auto edges = detail::panel_edges(0.0, n_eff_max, grid.step, model.branch_points());
  double integral = 0.0;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    integral += detail::integrate_segment(acc, edges[i], edges[i + 1], model.host_index(), grid, unresolved);
  }
  return detail::finish_spectrum(acc, model, integral, std::move(unresolved));
}

struct TotalPower {
  double P_tot_over_P_hom = 1.0;
  double n_eff_cutoff = 0.0;
  AngularSpectrum spectrum;
};

/// P_tot / P_hom = 1 + integral of p over [0, inf), tail truncated adaptively.
inline TotalPower total_power_detailed(const Stack& stack, const SpectrumGrid& grid = {}) {
  const EmissionModel model(stack);
  detail::SpectrumAccumulator acc{model, {}};
  std::vector<double> unresolved;
  const auto branch = model.branch_points();
  const double dense_end = branch.back() * 1.25 + 0.5;
  double integral = 0.0;
  const auto edges = detail::panel_edges(0.0, dense_end, grid.step, branch);
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    integral += detail::integrate_segment(acc, edges[i], edges[i + 1], model.host_index(), grid, unresolved);
  }
  // Geometric panels through the evanescent tail.
  double a = dense_end;
  double width = grid.step * 10.0;
  int quiet = 0;
  bool converged = false;
  while (a < grid.n_eff_limit) {
    const double b = std::min(a + width, grid.n_eff_limit);
    const double piece =
        detail::integrate_segment(acc, a, b, model.host_index(), grid, unresolved);
    integral += piece;
    a = b;
    width *= 1.15;
    if (std::abs(piece) < grid.tail_tol * std::abs(1.0 + integral)) {
      if (++quiet >= 3) {
        converged = true;
        break;
      }
    } else {
      quiet = 0;
    }
  }
  if (!converged) {
    throw ConvergenceError("total_power: evanescent tail not converged by n_eff = " +
                           std::to_string(grid.n_eff_limit));
  }
  TotalPower out;
  out.P_tot_over_P_hom = 1.0 + integral;
  out.n_eff_cutoff = a;
  out.spectrum = detail::finish_spectrum(acc, model, integral, std::move(unresolved));
  return out;
}

inline double total_power(const Stack& stack, const SpectrumGrid& grid = {}) {
  return total_power_detailed(stack, grid).P_tot_over_P_hom;
}

/// Collectible power fraction xi = Gamma_NA / Gamma_hom for an objective of
/// numerical aperture `numerical_aperture` in the upper half space.
inline double collection_factor(const Stack& stack, double numerical_aperture, const FarFieldQuadrature& q = {}) {
  const EmissionModel model(stack);
  const double n_plus = model.upper_index();
  if (!(numerical_aperture > 0.0) || numerical_aperture > n_plus) {
    throw DomainError("numerical aperture must lie in (0, n_upper]");
  }
  return model.cone_power(std::asin(std::min(1.0, numerical_aperture / n_plus)), true, q);
}

inline double upper_power(const Stack& stack, const FarFieldQuadrature& q = {}) {
  const EmissionModel model(stack);
  return model.cone_power(0.5 * kPi, true, q);
}

inline std::optional<double> lower_power(const Stack& stack, const FarFieldQuadrature& q = {}) {
  const EmissionModel model(stack);
  if (!model.lower_transparent()) return std::nullopt;
  return model.cone_power(0.5 * kPi, false, q);
}

/// Grids default to 0.25 deg in theta and 360 azimuth points.
inline std::vector<double> default_theta_grid(double step_deg = 0.25) {
  std::vector<double> g;
  for (double t = 0.0; t < 90.0 - 1e-12; t += step_deg) g.push_back(t);
  return g;
}

inline std::vector<double> default_phi_grid(int count = 360) {
  std::vector<double> g(count);
  for (int i = 0; i < count; ++i) g[i] = 360.0 * i / count;
  return g;
}

inline FarField far_field(const Stack& stack, const std::vector<double>& theta_deg,
                          const std::vector<double>& phi_deg) {
  const EmissionModel model(stack);
  FarField ff{theta_deg, phi_deg, {}};
  ff.intensity.reserve(theta_deg.size() * phi_deg.size());
  for (double t : theta_deg) {
    if (!(t >= 0.0 && t < 90.0)) throw DomainError("far_field: theta must lie in [0, 90)");
    for (double p : phi_deg) ff.intensity.push_back(model.intensity(t * kDegree, p * kDegree));
  }
  return ff;
}

/// Everything at once: total power, xi, hemisphere powers and a far-field map.
inline EmissionResult emission(const Stack& stack, double numerical_aperture, const SpectrumGrid& grid = {},
                               const std::vector<double>& theta_deg = default_theta_grid(),
                               const std::vector<double>& phi_deg = default_phi_grid()) {
  EmissionResult r;
  r.P_tot_over_P_hom = total_power(stack, grid);
  r.xi = collection_factor(stack, numerical_aperture);
  r.P_upper_over_P_hom = upper_power(stack);
  r.P_lower_over_P_hom = lower_power(stack);
  r.far_field = far_field(stack, theta_deg, phi_deg);
  return r;
}

}  // namespace dipolestack
