#include "fixtures.hpp"

#include <gtest/gtest.h>

using namespace dslip;

TEST(QuarterPeriodResidual, SmallAtPublishedOptimum) {
  ModelParams p;
  GaitSearchSpec spec;
  const PeriodicGait& g = fixtures::nominal_gait();
  EXPECT_LT(quarter_period_residual(g.x0.x[2], g.u0, spec, TerrainParams::rigid(), p).norm(), 1e-6);
  // the reported values are rounded: 0.01 deg in theta moves the residual ~1e-4 m
  PeriodicGait pub = published_gait();
  EXPECT_LT(quarter_period_residual(pub.x0.x[2], pub.u0, spec, TerrainParams::rigid(), p).norm(), 5e-4);
}

TEST(QuarterPeriodResidual, NonzeroAwayFromOptimum) {
  ModelParams p;
  GaitSearchSpec spec;
  ControlInput u = fixtures::nominal_gait().u0;
  u.theta += deg2rad(5.0);
  EXPECT_GT(quarter_period_residual(0.99, u, spec, TerrainParams::rigid(), p).norm(), 1e-3);
}

TEST(QuarterPeriodResidual, InfeasibleHeight) {
  ModelParams p;
  GaitSearchSpec spec;
  ControlInput u = fixtures::nominal_gait().u0;
  EXPECT_THROW(quarter_period_residual(0.9, u, spec, TerrainParams::rigid(), p), InfeasiblePoint);
  EXPECT_THROW(quarter_period_residual(1.01, u, spec, TerrainParams::rigid(), p), InfeasiblePoint);
}

TEST(PublishedGait, AnglesReproducedWithHeightAndStiffnessHeld) {
  const PeriodicGait& g = fixtures::nominal_gait();
  EXPECT_TRUE(g.verified);
  EXPECT_NEAR(rad2deg(g.u0.theta), 107.26, 0.05);
  EXPECT_NEAR(rad2deg(g.u0.phi), 10.94, 0.1);
  EXPECT_EQ(g.x0.x[2], 0.99);
  EXPECT_EQ(g.u0.stiffness, 14164.54);
}

TEST(FindPeriodicGait, ConvergesFromDefaultSeeds) {
  GaitSearchSpec spec;
  PeriodicGait g = find_periodic_gait(spec, TerrainParams::rigid(), ModelParams{});
  EXPECT_LE(g.residual_norm, spec.residual_tolerance);
  EXPECT_TRUE(g.verified);
  EXPECT_LT(g.periodicity_error, 1e-3);
  EXPECT_GT(g.x0.x[2], touchdown_height(g.u0.theta, 1.0));
  EXPECT_LE(g.x0.x[2], 1.0);
  // all variables within bounds
  for (auto [v, lo, hi] : {std::tuple{g.x0.x[2], 0.9, 1.0}, {g.u0.theta, spec.theta.lower, spec.theta.upper},
                           {g.u0.phi, spec.phi.lower, spec.phi.upper},
                           {g.u0.stiffness, spec.stiffness.lower, spec.stiffness.upper}}) {
    EXPECT_GE(v, lo);
    EXPECT_LE(v, hi);
  }
}

TEST(FindPeriodicGait, SeededAtOptimumIsANoOp) {
  const PeriodicGait& g0 = fixtures::nominal_gait();
  GaitSearchSpec spec;
  spec.height.seed = g0.x0.x[2];
  spec.theta.seed = g0.u0.theta;
  spec.phi.seed = g0.u0.phi;
  spec.stiffness.seed = g0.u0.stiffness;
  spec.residual_tolerance = 1e-9;
  PeriodicGait g = find_periodic_gait(spec, TerrainParams::rigid(), ModelParams{});
  EXPECT_EQ(g.iterations, 0);
  EXPECT_EQ(g.u0.theta, g0.u0.theta);
  EXPECT_EQ(g.u0.phi, g0.u0.phi);
}

TEST(FindPeriodicGait, ResidualDoesNotExceedSeed) {
  ModelParams p;
  GaitSearchSpec spec;
  spec.height.seed = 0.97;
  spec.theta.seed = deg2rad(110.0);
  PeriodicGait g = find_periodic_gait(spec, TerrainParams::rigid(), p);
  double seed_res = quarter_period_residual(spec.height.seed,
                                            {spec.theta.seed, spec.phi.seed, spec.stiffness.seed},
                                            spec, TerrainParams::rigid(), p).norm();
  EXPECT_LE(g.residual_norm, seed_res);
}

TEST(FindPeriodicGait, RefusesSoftGround) {
  EXPECT_THROW(find_periodic_gait({}, TerrainParams::compliant(5e5), ModelParams{}), ConfigError);
  EXPECT_NO_THROW(find_periodic_gait({}, TerrainParams::compliant(kRigidEquivalentStiffness), ModelParams{}));
}

TEST(FindPeriodicGait, SeedOutsideBoundsRejected) {
  GaitSearchSpec spec;
  spec.theta.seed = deg2rad(130.0);
  EXPECT_THROW(find_periodic_gait(spec, TerrainParams::rigid(), ModelParams{}), ConfigError);
}

TEST(FindPeriodicGait, NonConvergenceCarriesBestIterate) {
  GaitSearchSpec spec;
  spec.max_iterations = 1;
  spec.residual_tolerance = 1e-14;
  try {
    find_periodic_gait(spec, TerrainParams::rigid(), ModelParams{});
    FAIL() << "expected GaitSearchError";
  } catch (const GaitSearchError& e) {
    EXPECT_TRUE(std::isfinite(e.best_residual));
    EXPECT_GT(e.best_iterate[3], 0.0);
  }
}
