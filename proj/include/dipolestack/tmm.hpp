#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "dipolestack/core.hpp"
#include "dipolestack/materials.hpp"
#include "dipolestack/stack.hpp"

namespace dipolestack::tmm {

/// One plane-wave component: wavelength, transverse index n_eff = k_par / k0
/// and polarization.
struct PlaneWaveChannel {
  double wavelength_nm = 620.0;
  double n_parallel = 0.0;
  Polarization polarization = Polarization::S;
};

/// A finite layer with its index already resolved at the channel wavelength.
struct ResolvedLayer {
  ComplexIndex index;
  double thickness_nm = 0.0;
};

struct StackCoefficients {
  Complex r;
  Complex t;
  Complex kz_in;   ///< rad/nm
  Complex kz_out;  ///< rad/nm
};

struct InterfaceCoefficients {
  Complex r;
  Complex t;
};

struct Power {
  double R = 0.0;
  double T = 0.0;
  double A = 0.0;
};

/// Matrix entries above this magnitude switch substack_coefficients to the
/// layer-recursive composition.
inline constexpr double kOverflowBound = 1e100;

/// Normal wavenumber on the decaying branch, Im(kz) >= 0.
inline Complex kz(const ComplexIndex& index, const PlaneWaveChannel& ch) {
  const Complex n = index.value();
  const double k0 = vacuum_wavenumber(ch.wavelength_nm);
  Complex root = std::sqrt(n * n - ch.n_parallel * ch.n_parallel);
  if (root.imag() < 0.0 || (root.imag() == 0.0 && root.real() < 0.0)) root = -root;
  // Step off the branch point; the layer formulas have a removable 0/0 there.
  if (std::abs(root) < 1e-12) root = Complex(0.0, 1e-12);
  return k0 * root;
}

/// Tangential-field admittance: kz for s (E amplitudes), kz/eps for p
/// (H amplitudes).
inline Complex admittance(const ComplexIndex& index, const PlaneWaveChannel& ch) {
  const Complex k = kz(index, ch);
  return ch.polarization == Polarization::S ? k : k / index.permittivity();
}

/// Single-interface amplitude coefficients; p uses the magnetic-field
/// convention r_p = (eps2 kz1 - eps1 kz2) / (eps2 kz1 + eps1 kz2).
inline InterfaceCoefficients fresnel_interface(const ComplexIndex& n1, const ComplexIndex& n2,
                                               const PlaneWaveChannel& ch) {
  const Complex q1 = admittance(n1, ch);
  const Complex q2 = admittance(n2, ch);
  const Complex sum = q1 + q2;
  return {(q1 - q2) / sum, 2.0 * q1 / sum};
}

/// Transmitted power fraction for amplitude t between the given media.
inline double flux_ratio(const ComplexIndex& in, const ComplexIndex& out, const PlaneWaveChannel& ch) {
  return admittance(out, ch).real() / admittance(in, ch).real();
}

namespace detail {

using Mat2 = std::array<Complex, 4>;  // row-major

inline Mat2 mul(const Mat2& a, const Mat2& b) {
  return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3], a[2] * b[0] + a[3] * b[2],
          a[2] * b[1] + a[3] * b[3]};
}

inline bool overflowed(const Mat2& m) {
  for (const auto& z : m) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag()) || std::abs(z) > kOverflowBound) return true;
  }
  return false;
}

}  // namespace detail

/// Generalized coefficients by layer recursion from the exit side. Stable for
/// arbitrarily evanescent channels because only decaying exponentials appear.
inline StackCoefficients recursive_coefficients(const ComplexIndex& incidence,
                                                std::span<const ResolvedLayer> layers,
                                                const ComplexIndex& exit, const PlaneWaveChannel& ch) {
  const ComplexIndex* last = layers.empty() ? &incidence : &layers.back().index;
  auto [r, t] = fresnel_interface(*last, exit, ch);
  for (std::size_t j = layers.size(); j-- > 0;) {
    const ComplexIndex& before = j == 0 ? incidence : layers[j - 1].index;
    const auto [rij, tij] = fresnel_interface(before, layers[j].index, ch);
    const Complex phase = std::exp(Complex(0.0, 1.0) * kz(layers[j].index, ch) * layers[j].thickness_nm);
    const Complex denom = 1.0 + rij * r * phase * phase;
    t = tij * t * phase / denom;
    r = (rij + r * phase * phase) / denom;
  }
  return {r, t, kz(incidence, ch), kz(exit, ch)};
}

namespace detail {

/// sin(z) / z.
inline Complex sinc(const Complex& z) {
  if (std::abs(z) < 1e-4) return 1.0 - z * z / 6.0;
  return std::sin(z) / z;
}

/// Characteristic (tangential field) matrices. Every layer enters through
/// cos(kz t), t sinc(kz t) and kz sin(kz t), so a layer sitting on its branch
/// point is evaluated without the 0/0 of the amplitude basis.
inline std::optional<StackCoefficients> field_coefficients(const ComplexIndex& incidence,
                                                           std::span<const ResolvedLayer> layers,
                                                           const ComplexIndex& exit, const PlaneWaveChannel& ch) {
  const Complex i(0.0, 1.0);
  const Complex q_in = admittance(incidence, ch), q_out = admittance(exit, ch);
  Complex B = 1.0, C = q_out;
  for (std::size_t j = layers.size(); j-- > 0;) {
    const auto& l = layers[j];
    const Complex k = kz(l.index, ch);
    const Complex scale = ch.polarization == Polarization::S ? Complex(1.0) : l.index.permittivity();
    const Complex q = k / scale;
    const Complex phi = k * l.thickness_nm;
    const Complex c = std::cos(phi);
    const Complex sin_over_q = scale * l.thickness_nm * sinc(phi);
    const Complex nb = c * B - i * sin_over_q * C;
    const Complex nc = -i * q * std::sin(phi) * B + c * C;
    B = nb;
    C = nc;
    if (!std::isfinite(std::abs(B)) || !std::isfinite(std::abs(C)) || std::abs(B) > kOverflowBound ||
        std::abs(C) > kOverflowBound) {
      return std::nullopt;
    }
  }
  const Complex denom = q_in * B + C;
  if (std::abs(denom) == 0.0) return std::nullopt;
  return StackCoefficients{(q_in * B - C) / denom, 2.0 * q_in / denom, kz(incidence, ch), kz(exit, ch)};
}

inline bool near_branch_point(std::span<const ResolvedLayer> layers, const PlaneWaveChannel& ch) {
  const double k0 = vacuum_wavenumber(ch.wavelength_nm);
  for (const auto& l : layers) {
    if (std::abs(kz(l.index, ch)) < 1e-3 * k0) return true;
  }
  return false;
}

}  // namespace detail

/// Generalized r and t of incidence | layers | exit via 2x2 transfer matrices,
/// falling back to recursive_coefficients when entries exceed kOverflowBound.
/// Finite layers close to their branch point go through field matrices.
inline StackCoefficients substack_coefficients(const ComplexIndex& incidence,
                                               std::span<const ResolvedLayer> layers,
                                               const ComplexIndex& exit, const PlaneWaveChannel& ch) {
  using detail::Mat2;
  if (detail::near_branch_point(layers, ch)) {
    if (auto c = detail::field_coefficients(incidence, layers, exit, ch)) return *c;
    return recursive_coefficients(incidence, layers, exit, ch);
  }
  auto interface_matrix = [&](const ComplexIndex& a, const ComplexIndex& b) {
    const auto [r, t] = fresnel_interface(a, b, ch);
    return Mat2{1.0 / t, r / t, r / t, 1.0 / t};
  };
  Mat2 m{1.0, 0.0, 0.0, 1.0};
  const ComplexIndex* prev = &incidence;
  for (const auto& layer : layers) {
    m = detail::mul(m, interface_matrix(*prev, layer.index));
    const Complex phi = kz(layer.index, ch) * layer.thickness_nm;
    const Complex i(0.0, 1.0);
    m = detail::mul(m, Mat2{std::exp(-i * phi), 0.0, 0.0, std::exp(i * phi)});
    if (detail::overflowed(m)) return recursive_coefficients(incidence, layers, exit, ch);
    prev = &layer.index;
  }
  m = detail::mul(m, interface_matrix(*prev, exit));
  if (detail::overflowed(m) || std::abs(m[0]) == 0.0) {
    return recursive_coefficients(incidence, layers, exit, ch);
  }
  return {m[2] / m[0], 1.0 / m[0], kz(incidence, ch), kz(exit, ch)};
}

inline std::vector<ResolvedLayer> resolve(std::span<const Layer> layers, double wavelength_nm) {
  std::vector<ResolvedLayer> out;
  out.reserve(layers.size());
  for (const auto& l : layers) out.push_back({l.material.index_at(wavelength_nm), l.thickness_nm});
  return out;
}

/// A SubStack with every index evaluated at one wavelength.
struct ResolvedSubStack {
  ComplexIndex incidence;
  std::vector<ResolvedLayer> layers;
  ComplexIndex exit;
  double emitter_distance_nm = 0.0;

  StackCoefficients coefficients(const PlaneWaveChannel& ch) const {
    return substack_coefficients(incidence, layers, exit, ch);
  }
};

inline ResolvedSubStack resolve(const SubStack& s, double wavelength_nm) {
  return {s.incidence.index_at(wavelength_nm), resolve(s.layers, wavelength_nm),
          s.exit.index_at(wavelength_nm), s.emitter_distance_nm};
}

inline StackCoefficients substack_coefficients(const SubStack& s, const PlaneWaveChannel& ch) {
  return resolve(s, ch.wavelength_nm).coefficients(ch);
}

/// Two-port scattering matrix of a structure between media 1 (left) and 2
/// (right): fwd = incident from 1, bwd = incident from 2.
struct SMatrix {
  Complex r_fwd{0.0};
  Complex t_fwd{1.0};
  Complex r_bwd{0.0};
  Complex t_bwd{1.0};
};

/// Redheffer star product: `a` followed by `b`, sharing the middle medium.
inline SMatrix star(const SMatrix& a, const SMatrix& b) {
  const Complex denom = 1.0 - a.r_bwd * b.r_fwd;
  SMatrix s;
  s.t_fwd = a.t_fwd * b.t_fwd / denom;
  s.r_fwd = a.r_fwd + a.t_fwd * b.r_fwd * a.t_bwd / denom;
  s.t_bwd = b.t_bwd * a.t_bwd / denom;
  s.r_bwd = b.r_bwd + b.t_bwd * a.r_bwd * b.t_fwd / denom;
  return s;
}

/// Propagation through a homogeneous slab of the shared medium.
inline SMatrix propagation(const ComplexIndex& index, double thickness_nm, const PlaneWaveChannel& ch) {
  const Complex p = std::exp(Complex(0.0, 1.0) * kz(index, ch) * thickness_nm);
  return {0.0, p, 0.0, p};
}

inline SMatrix smatrix(const ComplexIndex& incidence, std::span<const ResolvedLayer> layers,
                       const ComplexIndex& exit, const PlaneWaveChannel& ch) {
  const auto fwd = substack_coefficients(incidence, layers, exit, ch);
  std::vector<ResolvedLayer> reversed(layers.rbegin(), layers.rend());
  const auto bwd = substack_coefficients(exit, reversed, incidence, ch);
  return {fwd.r, fwd.t, bwd.r, bwd.t};
}

/// All layers of a stack top-down, resolved at `wavelength_nm`.
inline std::vector<ResolvedLayer> stack_layers(const Stack& stack, double wavelength_nm) {
  std::vector<ResolvedLayer> all = resolve(stack.layers_above, wavelength_nm);
  all.push_back({stack.host.material.index_at(wavelength_nm), stack.host.thickness_nm});
  for (const auto& l : stack.layers_below) all.push_back({l.material.index_at(wavelength_nm), l.thickness_nm});
  return all;
}

/// R, T, A for a plane wave incident from the upper half space.
inline Power stack_reflectance(const Stack& stack, double wavelength_nm, double angle_of_incidence_deg,
                               Polarization pol) {
  if (!(angle_of_incidence_deg >= 0.0 && angle_of_incidence_deg < 90.0)) {
    throw DomainError("angle of incidence must lie in [0, 90) degrees");
  }
  const ComplexIndex upper = stack.upper.index_at(wavelength_nm);
  const ComplexIndex lower = stack.lower.index_at(wavelength_nm);
  if (upper.k != 0.0) throw DomainError("incidence half space must be transparent");
  const PlaneWaveChannel ch{wavelength_nm, upper.n * std::sin(angle_of_incidence_deg * kDegree), pol};
  const auto layers = stack_layers(stack, wavelength_nm);
  const auto c = substack_coefficients(upper, layers, lower, ch);
  Power p;
  p.R = std::norm(c.r);
  const double q_in = admittance(upper, ch).real();
  p.T = q_in > 0.0 ? std::norm(c.t) * admittance(lower, ch).real() / q_in : 0.0;
  p.A = 1.0 - p.R - p.T;
  return p;
}

}  // namespace dipolestack::tmm
