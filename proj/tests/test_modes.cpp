#include <gtest/gtest.h>

#include "dipolestack/dipole.hpp"
#include "dipolestack/modes.hpp"
#include "dipolestack/tmm.hpp"
#include "fixtures.hpp"

using namespace dipolestack;

namespace {

Stack lossy_membrane(double t0, double depth_fraction) {
  return stacks::membrane(t0, depth_fraction * t0, 54.7, 620.0, materials::diamond().with_absorption(5e-4));
}

// Guided peaks seen by emitters at two depths, so no mode hides behind a field node.
std::vector<double> guided(const std::vector<ModeRecord>& a, const std::vector<ModeRecord>& b, Polarization pol) {
  std::vector<double> out;
  for (const auto* list : {&a, &b}) {
    for (const auto& m : *list) {
      if (m.polarization != pol || m.kind != ModeKind::Guided) continue;
      if (std::none_of(out.begin(), out.end(), [&](double x) { return std::abs(x - m.n_eff) < 2e-3; })) {
        out.push_back(m.n_eff);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<double> oracle(const std::vector<SlabMode>& modes, Polarization pol) {
  std::vector<double> out;
  for (const auto& m : modes) {
    if (m.polarization == pol) out.push_back(m.n_eff);
  }
  std::sort(out.begin(), out.end());
  return out;
}

const ModeRecord* nearest(const std::vector<ModeRecord>& modes, Polarization pol, double n) {
  const ModeRecord* best = nullptr;
  for (const auto& m : modes) {
    if (m.polarization != pol) continue;
    if (!best || std::abs(m.n_eff - n) < std::abs(best->n_eff - n)) best = &m;
  }
  return best;
}

}  // namespace

TEST(Modes, SlabOracleMatchesSpectrumPeaks) {
  for (int t0 = 100; t0 <= 1000; t0 += 100) {
    const auto near = find_modes(angular_spectrum(lossy_membrane(t0, 0.123), 2.5));
    const auto deep = find_modes(angular_spectrum(lossy_membrane(t0, 0.377), 2.5));
    const auto ref = slab_modes_oracle(2.414, 1.0, t0, 620.0);
    for (auto pol : {Polarization::S, Polarization::P}) {
      const auto a = guided(near, deep, pol), b = oracle(ref, pol);
      EXPECT_EQ(a.size(), b.size()) << "t0=" << t0 << " pol=" << to_string(pol);
      if (a.size() != b.size()) continue;
      for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-3) << "t0=" << t0;
    }
  }
}

TEST(Modes, OracleBasics) {
  const auto m = slab_modes_oracle(2.414, 1.0, 350.0, 620.0);
  ASSERT_FALSE(m.empty());
  EXPECT_EQ(m.front().polarization, Polarization::S);
  EXPECT_EQ(m.front().order, 0);
  for (std::size_t i = 1; i < m.size(); ++i) EXPECT_LE(m[i].n_eff, m[i - 1].n_eff);
  for (const auto& x : m) {
    EXPECT_GT(x.n_eff, 1.0);
    EXPECT_LT(x.n_eff, 2.414);
  }
  // A very thin slab keeps only the fundamental pair.
  const auto thin = slab_modes_oracle(2.414, 1.0, 20.0, 620.0);
  EXPECT_EQ(thin.size(), 2u);
  EXPECT_THROW(slab_modes_oracle(1.0, 2.414, 350.0, 620.0), DomainError);
  EXPECT_THROW(slab_modes_oracle(2.414, 1.0, 0.0, 620.0), DomainError);
}

TEST(Modes, LeakyModesOfMirroredSlab) {
  const auto modes = find_modes(angular_spectrum(fixtures::mirrored_slab(), 3.2));
  const auto* s = nearest(modes, Polarization::S, 0.475);
  const auto* p = nearest(modes, Polarization::P, 0.542);
  ASSERT_NE(s, nullptr);
  ASSERT_NE(p, nullptr);
  EXPECT_NEAR(s->n_eff, 0.475, 0.01);
  EXPECT_NEAR(p->n_eff, 0.542, 0.01);
  EXPECT_EQ(s->kind, ModeKind::Leaky);
  EXPECT_EQ(p->kind, ModeKind::Leaky);
  for (std::size_t i = 1; i < modes.size(); ++i) EXPECT_LE(modes[i - 1].n_eff, modes[i].n_eff);
}

TEST(Modes, Classification) {
  EXPECT_EQ(classify_mode(0.5, 2.414, 1.0), ModeKind::Leaky);
  EXPECT_EQ(classify_mode(1.5, 2.414, 1.0), ModeKind::Guided);
  EXPECT_EQ(classify_mode(2.9, 2.414, 1.0), ModeKind::SPP);
}

TEST(Modes, HomogeneousSpectrumHasNoModes) {
  EXPECT_TRUE(find_modes(angular_spectrum(fixtures::homogeneous(materials::diamond()), 3.0)).empty());
}

TEST(Modes, PenetrationDepthsOfCaseOne) {
  const auto [up, down] = split_at_dipole(fixtures::case_one());
  EXPECT_NEAR(penetration_depth(up, 0.33, 620.0, Polarization::S), 52.1, 1.0);
  EXPECT_NEAR(penetration_depth(down, 0.33, 620.0, Polarization::S), 50.8, 1.0);
}

TEST(Modes, PenetrationDepthOfMetalMirrorsIsNonNegative) {
  for (const auto& s : {fixtures::case_one(), fixtures::case_three(), fixtures::fabricated(), fixtures::mirrored_slab()}) {
    const auto [up, down] = split_at_dipole(s);
    for (double n : {0.0, 0.2, 0.5, 0.9}) {
      for (auto pol : {Polarization::S, Polarization::P}) {
        EXPECT_GE(penetration_depth(up, n, 620.0, pol), 0.0);
        EXPECT_GE(penetration_depth(down, n, 620.0, pol), 0.0);
      }
    }
  }
}

TEST(Modes, PenetrationDepthPhaseConvention) {
  EXPECT_DOUBLE_EQ(penetration_depth_from_phase(0.0, 620.0), 0.0);
  EXPECT_NEAR(penetration_depth_from_phase(kPi, 620.0), 155.0, 1e-12);
  EXPECT_NEAR(penetration_depth_from_phase(-kPi / 2.0, 620.0), 232.5, 1e-12);
  const SubStack none{materials::diamond(), {}, materials::diamond(), 10.0};
  EXPECT_THROW(penetration_depth(none, 0.3, 620.0, Polarization::S), DomainError);
}

TEST(Modes, ResonanceCondition) {
  const auto c = resonance_check(86.5, 2.414, 0.33, 52.1, 50.8, 620.0);
  EXPECT_NEAR(c.rhs_nm, 309.8, 0.1);
  EXPECT_EQ(c.order_q, 1);
  EXPECT_NEAR(c.residual_nm, 0.2, 0.1);
  EXPECT_NEAR(c.lhs_nm, 310.0, 1e-12);

  const auto ideal = resonance_check(620.0 / (2.0 * 2.414), 2.414, 0.0, 0.0, 0.0, 620.0);
  EXPECT_EQ(ideal.order_q, 1);
  EXPECT_NEAR(ideal.residual_nm, 0.0, 1e-12);

  EXPECT_THROW(resonance_check(86.5, 2.414, 2.5, 0.0, 0.0, 620.0), DomainError);
  EXPECT_THROW(resonance_check(-1.0, 2.414, 0.3, 0.0, 0.0, 620.0), DomainError);
}

TEST(Modes, WorkingPointResonanceOrder) {
  const auto s = fixtures::fabricated();
  const auto modes = find_modes(angular_spectrum(s, 3.0));
  const auto [up, down] = split_at_dipole(s);
  bool any = false;
  for (const auto& m : modes) {
    if (m.kind != ModeKind::Leaky) continue;
    const double dup = penetration_depth(up, m.n_eff, 620.0, m.polarization);
    const double dlow = penetration_depth(down, m.n_eff, 620.0, m.polarization);
    const auto c = resonance_check(s.host.thickness_nm, 2.414, m.n_eff, dup, dlow, 620.0);
    EXPECT_LT(std::abs(c.residual_nm), 5.0) << "n_eff=" << m.n_eff;
    any = true;
  }
  EXPECT_TRUE(any);
}

TEST(Modes, LeakyAngles) {
  EXPECT_NEAR(leaky_to_angle(0.542, 1.0), 32.82, 0.01);
  EXPECT_NEAR(leaky_to_angle(0.475, 1.0), 28.36, 0.01);
  EXPECT_DOUBLE_EQ(leaky_to_angle(0.0, 1.0), 0.0);
  EXPECT_THROW(leaky_to_angle(1.2, 1.0), DomainError);
  EXPECT_THROW(leaky_to_angle(-0.1, 1.0), DomainError);
}

TEST(Modes, ReflectanceDipsAtLeakyAngles) {
  const auto s = fixtures::mirrored_slab();
  for (auto [pol, n] : {std::pair{Polarization::S, 0.475}, std::pair{Polarization::P, 0.542}}) {
    const auto modes = find_modes(angular_spectrum(s, 3.2));
    const double expect = leaky_to_angle(nearest(modes, pol, n)->n_eff, 1.0);
    double best = 0.0, rmin = 2.0;
    for (double a = 10.0; a <= 50.0; a += 0.01) {
      const double r = tmm::stack_reflectance(s, 620.0, a, pol).R;
      if (r < rmin) {
        rmin = r;
        best = a;
      }
    }
    EXPECT_NEAR(best, expect, 0.5) << to_string(pol);
  }
}
