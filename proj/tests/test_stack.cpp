#include <gtest/gtest.h>

#include "dipolestack/stack.hpp"
#include "fixtures.hpp"

using namespace dipolestack;

namespace {
bool mentions(const std::vector<std::string>& v, const std::string& what) {
  for (const auto& s : v)
    if (s.find(what) != std::string::npos) return true;
  return false;
}
}  // namespace

TEST(Stack, CaseOneIsValid) { EXPECT_TRUE(validate(fixtures::case_one()).empty()); }

TEST(Stack, DepthAtHostThickness) {
  auto s = fixtures::case_one();
  s.dipole.depth_nm = s.host.thickness_nm;
  const auto v = validate(s);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v.front(), "dipole.depth_nm must be < host.thickness_nm");
  EXPECT_THROW(require_valid(s), ValidationError);
}

TEST(Stack, AbsorbingCollectionHalfSpace) {
  auto s = fixtures::case_one();
  s.upper = materials::silver_literature();
  EXPECT_TRUE(mentions(validate(s), "collection half space must be transparent"));
}

TEST(Stack, ReportsEveryViolation) {
  auto s = fixtures::case_one();
  s.layers_above[0].thickness_nm = -1.0;
  s.dipole.polar_angle_deg = 120.0;
  s.dipole.depth_nm = 0.0;
  const auto v = validate(s);
  EXPECT_GE(v.size(), 3u);
  EXPECT_TRUE(mentions(v, "layers_above[0]"));
  EXPECT_TRUE(mentions(v, "theta_deg"));
}

TEST(Stack, SplitSymmetricSlab) {
  const auto [up, down] = split_at_dipole(stacks::membrane(350.0, 175.0, 90.0, 620.0));
  EXPECT_DOUBLE_EQ(up.emitter_distance_nm, 175.0);
  EXPECT_DOUBLE_EQ(down.emitter_distance_nm, 175.0);
}

TEST(Stack, SplitCaseOne) {
  const auto s = fixtures::case_one();
  const auto [up, down] = split_at_dipole(s);
  EXPECT_DOUBLE_EQ(up.emitter_distance_nm, 42.9);
  EXPECT_NEAR(down.emitter_distance_nm, 43.6, 1e-12);
  // Layers are listed away from the emitter.
  ASSERT_EQ(up.layers.size(), 2u);
  EXPECT_EQ(up.layers[0].material.name(), "silver-literature");
  EXPECT_DOUBLE_EQ(up.layers[0].thickness_nm, 42.4);
  EXPECT_EQ(up.layers[1].material.name(), "silica");
  EXPECT_EQ(up.exit.name(), "vacuum");
  EXPECT_EQ(up.incidence.name(), "diamond");
  ASSERT_EQ(down.layers.size(), 1u);
  EXPECT_DOUBLE_EQ(down.layers[0].thickness_nm, 300.0);
}

TEST(Stack, SplitRoundTrip) {
  for (const auto& s : {fixtures::case_one(), fixtures::case_three(), fixtures::mirrored_slab()}) {
    const auto [up, down] = split_at_dipole(s);
    EXPECT_DOUBLE_EQ(up.emitter_distance_nm + down.emitter_distance_nm, s.host.thickness_nm);
    EXPECT_EQ(up.layers.size() + down.layers.size(), s.layers_above.size() + s.layers_below.size());
    const Stack r = reassemble(up, down, s.dipole);
    ASSERT_EQ(r.layers_above.size(), s.layers_above.size());
    for (std::size_t i = 0; i < s.layers_above.size(); ++i) {
      EXPECT_EQ(r.layers_above[i].material.name(), s.layers_above[i].material.name());
      EXPECT_DOUBLE_EQ(r.layers_above[i].thickness_nm, s.layers_above[i].thickness_nm);
    }
    ASSERT_EQ(r.layers_below.size(), s.layers_below.size());
    EXPECT_DOUBLE_EQ(r.host.thickness_nm, s.host.thickness_nm);
    EXPECT_EQ(r.upper.name(), s.upper.name());
    EXPECT_EQ(r.lower.name(), s.lower.name());
  }
}

TEST(Stack, SplitRejectsInvalid) {
  auto s = fixtures::case_one();
  s.dipole.depth_nm = 100.0;
  EXPECT_THROW(split_at_dipole(s), ValidationError);
}
