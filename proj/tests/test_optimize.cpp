#include <gtest/gtest.h>

#include "dipolestack/optimize.hpp"
#include "fixtures.hpp"

using namespace dipolestack;

namespace {

ParameterSpace case_one_space() {
  ParameterSpace sp;
  sp.base = fixtures::case_one();
  sp.free = {{Param::T0, 50.0, 150.0}, {Param::D, 10.0, 120.0}, {Param::T1, 10.0, 80.0}, {Param::T2, 50.0, 200.0}};
  return sp;
}

double quadratic(const std::vector<double>& x) {
  const double a = x[0] - 3.0, b = x[1] + 1.0;
  return 5.0 - a * a - 2.0 * b * b - 0.5 * a * b;
}

}  // namespace

TEST(Optimize, ParametersMapOntoStack) {
  Stack s = fixtures::case_one();
  apply_param(s, Param::T1, 33.0);
  apply_param(s, Param::T2, 99.0);
  EXPECT_DOUBLE_EQ(s.layers_above.back().thickness_nm, 33.0);
  EXPECT_DOUBLE_EQ(s.layers_above.front().thickness_nm, 99.0);
  EXPECT_DOUBLE_EQ(read_param(s, Param::T1), 33.0);
  EXPECT_EQ(param_from_string("d"), Param::D);
  EXPECT_THROW(param_from_string("t3"), ValidationError);
  Stack bare = fixtures::homogeneous(materials::diamond());
  EXPECT_THROW(apply_param(bare, Param::T1, 10.0), ValidationError);
}

TEST(Optimize, ObjectiveFlagsDipoleOutsideHost) {
  ParameterSpace sp = case_one_space();
  const std::vector<double> x{80.0, 80.0, 42.4, 107.6};
  const auto v = objective(x, sp);
  EXPECT_FALSE(v.feasible);
  EXPECT_EQ(v.xi, 0.0);
  const std::vector<double> ok{86.5, 42.9, 42.4, 107.6};
  EXPECT_TRUE(objective(ok, sp).feasible);
  EXPECT_NEAR(objective(ok, sp).xi, collection_factor(fixtures::case_one(), 0.8), 1e-12);
  const std::vector<double> outside{200.0, 42.9, 42.4, 107.6};
  EXPECT_THROW(objective(outside, sp), ValidationError);
}

TEST(Optimize, SwarmIsDeterministicForFixedSeed) {
  PsoConfig cfg;
  cfg.swarm_size = 12;
  cfg.iterations = 15;
  cfg.seed = 7;
  cfg.threads = 1;
  const std::vector<double> lo{-5.0, -5.0}, hi{5.0, 5.0};
  const auto a = pso(quadratic, lo, hi, cfg);
  cfg.threads = 4;
  const auto b = pso(quadratic, lo, hi, cfg);
  EXPECT_EQ(a.best, b.best);
  EXPECT_EQ(a.trace, b.trace);
  EXPECT_EQ(a.evaluations, b.evaluations);
  cfg.seed = 8;
  EXPECT_NE(pso(quadratic, lo, hi, cfg).best, a.best);
  for (std::size_t i = 1; i < a.trace.size(); ++i) EXPECT_GE(a.trace[i], a.trace[i - 1]);
  EXPECT_EQ(a.trace.size(), 16u);
}

TEST(Optimize, SwarmFindsQuadraticMaximum) {
  PsoConfig cfg;
  cfg.swarm_size = 30;
  cfg.iterations = 100;
  const auto r = pso(quadratic, {-10.0, -10.0}, {10.0, 10.0}, cfg);
  EXPECT_NEAR(r.best_value, 5.0, 1e-6);
}

TEST(Optimize, DegenerateSpace) {
  ParameterSpace sp;
  sp.base = fixtures::case_one();
  sp.free = {{Param::T0, 86.5, 86.5}};
  PsoConfig cfg;
  cfg.swarm_size = 4;
  cfg.iterations = 3;
  const auto r = pso(sp, cfg);
  EXPECT_DOUBLE_EQ(r.best[0], 86.5);
  EXPECT_NEAR(r.best_value, collection_factor(fixtures::case_one(), 0.8), 1e-12);
  ParameterSpace empty;
  EXPECT_THROW(pso(empty, cfg), ValidationError);
  sp.free = {{Param::T0, 100.0, 50.0}};
  EXPECT_THROW(pso(sp, cfg), ValidationError);
}

TEST(Optimize, RefineConvergesOnQuadratic) {
  const auto r = local_refine(quadratic, {-4.0, 4.0}, {-10.0, -10.0}, {10.0, 10.0});
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.params[0], 3.0, 1e-3);
  EXPECT_NEAR(r.params[1], -1.0, 1e-3);
  EXPECT_NEAR(r.value, 5.0, 1e-6);
  EXPECT_GE(r.value, r.start_value);
}

TEST(Optimize, RefineStopsAtActiveBound) {
  const auto r = local_refine(quadratic, {0.0, 0.0}, {-10.0, 0.0}, {10.0, 10.0});
  EXPECT_DOUBLE_EQ(r.params[1], 0.0);
  EXPECT_NEAR(r.params[0], 3.0 - 0.25, 1e-3);
  EXPECT_THROW(local_refine(quadratic, {20.0, 0.0}, {-10.0, -10.0}, {10.0, 10.0}), ValidationError);
}

TEST(Optimize, PerturbedCaseOneReturns) {
  const auto sp = case_one_space();
  const double target = objective(std::vector<double>{86.5, 42.9, 42.4, 107.6}, sp).xi;
  const auto r = local_refine({88.5, 44.9, 40.4, 110.6}, sp);
  EXPECT_GE(r.value, target * (1.0 - 1e-3));
  EXPECT_NEAR(r.params[0], 86.5, 2.0);
}

TEST(Optimize, HalfMaximumWidths) {
  std::vector<double> x, tri, lor;
  for (double v = -20.0; v <= 20.0 + 1e-9; v += 0.5) {
    x.push_back(v);
    tri.push_back(std::max(0.0, 10.0 - std::abs(v)));
    lor.push_back(1.0 / (1.0 + (v / 3.0) * (v / 3.0)));
  }
  EXPECT_NEAR(fwhm(x, tri), 10.0, 1e-12);
  EXPECT_NEAR(fwhm(x, lor), 6.0, 0.05);
  std::vector<double> ramp;
  for (double v : x) ramp.push_back(v + 30.0);
  EXPECT_THROW(fwhm(x, ramp), OpenResonanceError);
}

TEST(Optimize, LocalMaxima) {
  std::vector<double> x, y;
  for (double v = 0.0; v <= 10.0 + 1e-9; v += 0.1) {
    x.push_back(v);
    y.push_back(std::cos(2.0 * kPi * v / 4.0));
  }
  const auto m = local_maxima(x, y);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_NEAR(m[0], 4.0, 1e-3);
  EXPECT_NEAR(m[1], 8.0, 1e-3);
}

TEST(Optimize, GradientBound) {
  EXPECT_DOUBLE_EQ(gradient_bound(6.0, 1.0, 1000.0), 6.0);
  EXPECT_DOUBLE_EQ(gradient_bound(0.0, 1.0, 800.0), 0.0);
  EXPECT_NEAR(gradient_bound(6.0, 1.7, 800.0), 4.4117647, 1e-6);
  EXPECT_THROW(gradient_bound(6.0, 0.0, 800.0), DomainError);
  EXPECT_THROW(gradient_bound(6.0, 1.0, -1.0), DomainError);
}

TEST(Optimize, SweepGridLayoutAndTransposition) {
  const auto base = fixtures::case_one();
  const std::vector<double> t0{80.0, 86.5, 95.0}, d{20.0, 42.9};
  const auto a = sweep(base, 0.8, {{Axis::T0, t0}, {Axis::D, d}});
  const auto b = sweep(base, 0.8, {{Axis::D, d}, {Axis::T0, t0}});
  ASSERT_EQ(a.size(), 6u);
  for (std::size_t i = 0; i < t0.size(); ++i) {
    for (std::size_t j = 0; j < d.size(); ++j) {
      const std::vector<std::size_t> ia{i, j}, ib{j, i};
      EXPECT_DOUBLE_EQ(a.at(ia), b.at(ib));
    }
  }
  const std::vector<std::size_t> ref{1, 1};
  EXPECT_NEAR(a.at(ref), collection_factor(base, 0.8), 1e-12);
  EXPECT_EQ(a.unflat(a.flat(ref)), ref);
}

TEST(Optimize, SweepMarksInfeasiblePoints) {
  const auto g = sweep(fixtures::case_one(), 0.8, {{Axis::D, {40.0, 90.0}}});
  EXPECT_TRUE(g.feasible[0]);
  EXPECT_FALSE(g.feasible[1]);
  EXPECT_EQ(g.values[1], 0.0);
  EXPECT_THROW(sweep(fixtures::case_one(), 0.8, {}), ValidationError);
  EXPECT_THROW(axis_from_string("thickness"), ValidationError);
}

TEST(Optimize, SweepIsThreadCountIndependent) {
  const auto base = fixtures::case_two();
  const std::vector<SweepAxis> axes{{Axis::T0, linspace_step(70.0, 100.0, 5.0)}, {Axis::Wavelength, {600.0, 620.0}}};
  const auto one = sweep(base, 0.8, axes, {Polarization::S, 1, {}});
  const auto many = sweep(base, 0.8, axes, {Polarization::S, 4, {}});
  EXPECT_EQ(one.values, many.values);
}

TEST(Optimize, LinspaceStep) {
  EXPECT_EQ(linspace_step(0.0, 1.0, 0.25).size(), 5u);
  EXPECT_EQ(linspace_step(2.0, 2.0, 1.0).size(), 1u);
  EXPECT_THROW(linspace_step(0.0, 1.0, 0.0), ValidationError);
}
