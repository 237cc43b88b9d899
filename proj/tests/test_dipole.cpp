#include <gtest/gtest.h>

#include "dipolestack/dipole.hpp"
#include "fixtures.hpp"

using namespace dipolestack;

namespace {

// Perfect mirror below a vacuum host; the dipole sits h wavelengths above it.
Stack above_mirror(double h, double theta) {
  Stack s;
  s.upper = materials::vacuum();
  s.host = Layer{materials::vacuum(), 1000.0 + h * 620.0};
  s.lower = Material("mirror", ComplexIndex{1e-3, 1e7});
  s.dipole = DipoleSource{620.0, theta, 1000.0};
  return s;
}

double image_parallel(double h) {
  const double u = 4.0 * kPi * h;
  return 1.0 - 1.5 * (std::sin(u) / u + std::cos(u) / (u * u) - std::sin(u) / (u * u * u));
}

double image_perpendicular(double h) {
  const double u = 4.0 * kPi * h;
  return 1.0 - 3.0 * (std::cos(u) / (u * u) - std::sin(u) / (u * u * u));
}

// Lossless: vacuum host between silica above and diamond below, no bound modes.
Stack open_lossless(double theta) {
  Stack s;
  s.upper = materials::silica();
  s.layers_above = {Layer{Material("film", ComplexIndex{1.8, 0.0}), 40.0}};
  s.host = Layer{materials::vacuum(), 150.0};
  s.lower = materials::diamond();
  s.dipole = DipoleSource{620.0, theta, 60.0};
  return s;
}

}  // namespace

TEST(Dipole, HomogeneousMediumHasNoInhomogeneousPart) {
  for (const auto& m : {materials::vacuum(), materials::diamond(), materials::silica()}) {
    for (double theta : {0.0, 54.7, 90.0}) {
      const auto s = fixtures::homogeneous(m, theta);
      EXPECT_NEAR(total_power(s), 1.0, 1e-6) << m.name() << " " << theta;
      const auto spec = angular_spectrum(s, m.index_at(620.0).n + 0.5);
      for (std::size_t i = 0; i < spec.size(); ++i) {
        EXPECT_LT(std::abs(spec.p_s[i]), 1e-12);
        EXPECT_LT(std::abs(spec.p_p[i]), 1e-12);
      }
    }
  }
}

TEST(Dipole, ImageDipoleAboveMirror) {
  for (double h : {0.05, 0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0}) {
    EXPECT_NEAR(total_power(above_mirror(h, 90.0)), image_parallel(h), 1e-4) << "h=" << h;
    EXPECT_NEAR(total_power(above_mirror(h, 0.0)), image_perpendicular(h), 1e-4) << "h=" << h;
  }
}

TEST(Dipole, OrientationDecomposition) {
  for (const auto& base : {fixtures::case_one(), fixtures::case_three(), open_lossless(90.0)}) {
    Stack v = base, h = base;
    v.dipole.polar_angle_deg = 0.0;
    h.dipole.polar_angle_deg = 90.0;
    const double pv = total_power(v), ph = total_power(h);
    for (double theta : {30.0, 54.7, 70.0}) {
      Stack t = base;
      t.dipole.polar_angle_deg = theta;
      const double c = std::cos(theta * kDegree), s = std::sin(theta * kDegree);
      const double expect = c * c * pv + s * s * ph;
      EXPECT_NEAR(total_power(t), expect, 1e-6 * expect);
      EXPECT_NEAR(collection_factor(t, 0.8),
                  c * c * collection_factor(v, 0.8) + s * s * collection_factor(h, 0.8), 1e-9);
    }
  }
}

TEST(Dipole, LosslessEnergyBookkeeping) {
  for (double theta : {0.0, 54.7, 90.0}) {
    const auto s = open_lossless(theta);
    const double up = upper_power(s);
    const auto down = lower_power(s);
    ASSERT_TRUE(down.has_value());
    EXPECT_NEAR(total_power(s), up + *down, 1e-4) << theta;
  }
}

TEST(Dipole, SymmetricStackRadiatesEquallyUpAndDown) {
  Stack s = stacks::membrane(300.0, 150.0, 54.7, 620.0, Material("glass", ComplexIndex{1.5, 0.0}));
  s.layers_above = {Layer{materials::silica(), 80.0}};
  s.layers_below = {Layer{materials::silica(), 80.0}};
  EXPECT_NEAR(upper_power(s), *lower_power(s), 1e-6);
}

TEST(Dipole, CollectionFactorMonotoneInAperture) {
  const auto s = fixtures::case_two();
  double prev = 0.0;
  for (double na = 0.05; na <= 1.0 + 1e-12; na += 0.05) {
    const double xi = collection_factor(s, std::min(na, 1.0));
    EXPECT_GE(xi, prev - 1e-12);
    prev = xi;
  }
  EXPECT_NEAR(collection_factor(s, 1.0), upper_power(s), 1e-12);
  EXPECT_THROW(collection_factor(s, 1.01), DomainError);
  EXPECT_THROW(collection_factor(s, 0.0), DomainError);
}

TEST(Dipole, PowerOrdering) {
  for (const auto& s : {fixtures::case_one(), fixtures::case_two(), fixtures::case_three(), fixtures::fabricated()}) {
    const double xi = collection_factor(s, 0.8);
    const double up = upper_power(s);
    EXPECT_GE(xi, 0.0);
    EXPECT_LE(xi, up + 1e-12);
    EXPECT_LE(up, total_power(s));
  }
}

TEST(Dipole, VerticalDipoleOnAxisNull) {
  for (auto s : {fixtures::case_one(), fixtures::homogeneous(materials::vacuum()), fixtures::mirrored_slab()}) {
    s.dipole.polar_angle_deg = 0.0;
    const EmissionModel m(s);
    for (double phi : {0.0, 1.0, 2.5}) EXPECT_LT(std::abs(m.intensity(0.0, phi)), 1e-9);
  }
}

TEST(Dipole, FreeHorizontalDipolePattern) {
  const EmissionModel m(fixtures::homogeneous(materials::vacuum()));
  EXPECT_NEAR(m.cone_power(0.5 * kPi, true), 0.5, 1e-9);
  for (double th : {0.0, 0.3, 0.9, 1.4}) {
    for (double ph : {0.0, 0.7, 1.5708}) {
      const double sx = std::sin(th) * std::cos(ph);
      EXPECT_NEAR(m.intensity(th, ph), 3.0 / (8.0 * kPi) * (1.0 - sx * sx), 1e-12);
    }
  }
}

TEST(Dipole, FarFieldIntegratesToUpperPower) {
  const auto s = fixtures::case_one();
  const auto ff = far_field(s, default_theta_grid(0.25), default_phi_grid(72));
  double sum = 0.0;
  const double dth = 0.25 * kDegree, dph = 2.0 * kPi / 72.0;
  for (std::size_t i = 0; i < ff.theta_deg.size(); ++i) {
    double ring = 0.0;
    for (std::size_t j = 0; j < ff.phi_deg.size(); ++j) ring += ff.at(i, j);
    sum += ring * dph * std::sin(ff.theta_deg[i] * kDegree) * dth;
  }
  EXPECT_NEAR(sum, upper_power(s), 2e-2 * upper_power(s));
  EXPECT_THROW(far_field(s, {90.0}, {0.0}), DomainError);
}

TEST(Dipole, AbsorptionIndependenceForLosslessSlab) {
  auto with = [](double kappa) {
    return stacks::membrane(350.0, 175.0, 90.0, 620.0, materials::diamond().with_absorption(kappa));
  };
  const double a = total_power(with(5e-4)), b = total_power(with(2.5e-4));
  EXPECT_LT(std::abs(a - b) / a, 1e-3);
  const double xa = collection_factor(with(5e-4), 0.8), xb = collection_factor(with(2.5e-4), 0.8);
  EXPECT_LT(std::abs(xa - xb) / xa, 1e-3);
}

TEST(Dipole, NegativeSamplesAreFlagged) {
  for (const auto& st : {fixtures::mirrored_slab(), fixtures::case_one(), stacks::membrane(350.0, 175.0, 90.0, 620.0)}) {
    const auto spec = angular_spectrum(st, 2.6);
    std::size_t negative = 0;
    for (std::size_t i = 0; i < spec.size(); ++i) {
      if (spec.n_eff[i] < spec.host_index && spec.total(i) < 0.0) ++negative;
    }
    EXPECT_EQ(spec.negative_samples, negative);
  }
  EXPECT_THROW(angular_spectrum(fixtures::mirrored_slab(), 2.0), DomainError);
}

TEST(Dipole, TableAnchors) {
  EXPECT_NEAR(collection_factor(fixtures::case_one(), 0.8), 2.01, 0.02 * 2.01);
  EXPECT_NEAR(collection_factor(fixtures::case_two(), 0.8), 1.34, 0.02 * 1.34);
  EXPECT_NEAR(collection_factor(fixtures::fabricated(), 0.8), 0.214, 0.05 * 0.214);
  EXPECT_GT(total_power(fixtures::case_one()), 2.01);
}

TEST(Dipole, CollectionFactorMatchesAdaptiveSimpson) {
  for (const auto& s : {fixtures::case_one(), fixtures::case_three(), fixtures::fabricated()}) {
    const EmissionModel m(s);
    const double theta_max = std::asin(0.8);
    quad::AdaptiveSimpson simpson(
        [&](double th) { return m.transmitted_density(std::sin(th), true) * std::cos(th); }, 1e-10, 30);
    EXPECT_NEAR(collection_factor(s, 0.8), simpson.integrate(0.0, theta_max), 1e-7);
  }
}
