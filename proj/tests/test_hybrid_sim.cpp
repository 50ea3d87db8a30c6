#include "fixtures.hpp"

#include <gtest/gtest.h>

using namespace dslip;

namespace {

StepPlan nominal_plan(const TerrainParams& terrain) {
  const PeriodicGait& g = fixtures::nominal_gait();
  StepPlan plan;
  plan.theta = g.u0.theta;
  plan.phi = g.u0.phi;
  plan.stiffness = StepStiffness::uniform(g.u0.stiffness);
  plan.terrain = terrain;
  return plan;
}

StepOutcome nominal_step(const TerrainParams& terrain, GaitEventKind stop = GaitEventKind::MS) {
  const PeriodicGait& g = fixtures::nominal_gait();
  HybridState s0 = midstance_hybrid_state(g.x0, g.u0.stiffness, terrain, ModelParams{});
  return StepSimulator(ModelParams{}, SimOptions{}).simulate_step(s0, Leg::A, nominal_plan(terrain), stop);
}

}  // namespace

TEST(TouchdownPlacement, VerticalLeg) {
  Vec3 pc(0.3, -0.1, 1.0);
  for (double phi : {0.0, 0.2, -0.4}) {
    Vec3 f = touchdown_placement(pc, kPi / 2, phi, Side::left, 1.0);
    EXPECT_NEAR(f.x(), pc.x(), 1e-15);
    EXPECT_NEAR(f.y(), pc.y(), 1e-15);
    EXPECT_NEAR(pc.z() - f.z(), 1.0, 1e-15);
  }
}

TEST(TouchdownPlacement, PublishedAngles) {
  const double theta = deg2rad(107.26), phi = deg2rad(10.94);
  const Vec3 pc(0.0, 0.0, touchdown_height(theta, 1.0));
  EXPECT_NEAR(pc.z(), 0.955, 5e-4);
  for (Side side : {Side::left, Side::right}) {
    Vec3 f = touchdown_placement(pc, theta, phi, side, 1.0);
    Vec3 d = f - pc;
    EXPECT_NEAR(std::hypot(d.x(), d.y()), 0.297, 5e-4);
    EXPECT_GT(d.x(), 0.0);
    EXPECT_EQ(d.y() > 0.0, side == Side::left);
    EXPECT_NEAR(d.norm(), 1.0, 1e-12);
    EXPECT_NEAR(f.z(), 0.0, 1e-12);
  }
}

TEST(TouchdownPlacement, AngleOutsideRangeRejected) {
  EXPECT_THROW(touchdown_placement(Vec3::Zero(), 0.0, 0.1, Side::left, 1.0), DomainError);
  EXPECT_THROW(touchdown_placement(Vec3::Zero(), kPi, 0.1, Side::left, 1.0), DomainError);
  EXPECT_THROW(touchdown_placement(Vec3::Zero(), -1.0, 0.1, Side::left, 1.0), DomainError);
}

TEST(Mirror, PublishedState) {
  Vec5 x;
  x << 0, 0.05, 0.99, 1, 0;
  Vec5 expect;
  expect << 0, -0.05, 0.99, 1, 0;
  EXPECT_EQ(mirror_state(x), expect);
}

TEST(Mirror, Involutions) {
  Vec5 x;
  x << 0.013, -0.047, 0.987, 1.02, 0.031;
  EXPECT_EQ(mirror_state(mirror_state(x)), x);
  Vec3 u(1.87, 0.19, 14000.0);
  EXPECT_EQ(mirror_control(mirror_control(u)), u);
  MidstanceState ms{x, Leg::B};
  MidstanceState twice = mirror_state(mirror_state(ms));
  EXPECT_EQ(twice.x, x);
  EXPECT_EQ(twice.support, Leg::B);
  Vec5 a = state_signs(1);
  Vec3 b = control_signs(1);
  EXPECT_EQ(a.cwiseProduct(a), Vec5::Ones());
  EXPECT_EQ(b.cwiseProduct(b), Vec3::Ones());
}

TEST(StepSimulation, EventOrderAndGuards) {
  StepOutcome out = nominal_step(TerrainParams::rigid());
  ASSERT_TRUE(out.record.completed());
  ASSERT_EQ(out.events.size(), 5u);
  const GaitEventKind order[] = {GaitEventKind::MS, GaitEventKind::TD, GaitEventKind::LH,
                                 GaitEventKind::LO, GaitEventKind::MS};
  for (int i = 0; i < 5; ++i) EXPECT_EQ(out.events[i].kind, order[i]);
  for (int i = 1; i < 5; ++i) EXPECT_GT(out.record.event_times[i], out.record.event_times[i - 1]);

  const double z_th = touchdown_height(fixtures::nominal_gait().u0.theta, 1.0);
  const HybridState& td = out.events[1].state;
  EXPECT_NEAR(td.com_position.z(), z_th, 1e-8);
  EXPECT_LT(td.com_velocity.z(), 0.0);
  EXPECT_NEAR(td.leg_vector(Leg::B).norm(), 1.0, 1e-12);

  const HybridState& lo = out.events[3].state;
  EXPECT_NEAR(lo.leg_vector(Leg::A).norm(), 1.0, 1e-8);
  EXPECT_GT(lo.com_velocity.z(), 0.0);

  const HybridState& ms = out.events[4].state;
  EXPECT_NEAR(ms.com_velocity.z(), 0.0, 1e-8);
  EXPECT_GT(out.record.ms_out.x[2], 0.0);
  EXPECT_EQ(out.record.ms_out.support, Leg::B);
}

TEST(StepSimulation, RigidSingleSupportConservesEnergy) {
  ModelParams p;
  StepOutcome out = nominal_step(TerrainParams::rigid());
  ASSERT_TRUE(out.record.completed());
  const auto& ev = out.events;
  double e0 = rigid_single_support_energy(ev[0].state, Leg::A, p);
  double e1 = rigid_single_support_energy(ev[1].state, Leg::A, p);
  EXPECT_LT(std::abs(e1 - e0) / e0, 1e-6);
  double e3 = rigid_single_support_energy(ev[3].state, Leg::B, p);
  double e4 = rigid_single_support_energy(ev[4].state, Leg::B, p);
  EXPECT_LT(std::abs(e4 - e3) / e3, 1e-6);
}

TEST(StepSimulation, CompliantTouchdownStartsFootAtRest) {
  StepOutcome out = nominal_step(TerrainParams::compliant(kRigidEquivalentStiffness), GaitEventKind::TD);
  ASSERT_EQ(out.events.back().kind, GaitEventKind::TD);
  const LegState& land = out.state.leg(Leg::B);
  EXPECT_EQ(land.foot_position.z(), 0.0);
  EXPECT_EQ(land.foot_vertical_velocity, 0.0);
  EXPECT_EQ(out.state.support_mode, SupportMode::DS);
}

TEST(StepSimulation, StaticDoubleSupportReachesNoEvent) {
  ModelParams p;
  SimOptions o;
  o.max_phase_time = 0.2;
  const double k = 2e4;
  HybridState s;
  s.com_position = {0, 0, 1.0 - p.body_mass * 9.81 / 2.0 / k};
  s.support_mode = SupportMode::DS;
  s.leg(Leg::A) = {{0, 0, 0}, 0.0, k, LegPhase::stance};
  s.leg(Leg::B) = {{0, 0, 0}, 0.0, k, LegPhase::stance};
  std::array<double, 2> min_h{0.0, 0.0};
  PhaseResult r = StepSimulator(p, o).integrate_phase(s, Leg::A, GaitEventKind::LO, kPi / 2,
                                                      TerrainParams::rigid(), min_h);
  EXPECT_FALSE(r.event.has_value());
  EXPECT_EQ(r.failure, StepFailure::no_event);
}

TEST(StepSimulation, InvalidControlIsAFailureNotAnException) {
  const PeriodicGait& g = fixtures::nominal_gait();
  StrideResult r = stride_map(g.x0, {0.0, g.u0.phi, g.u0.stiffness}, TerrainParams::rigid(), ModelParams{});
  EXPECT_EQ(r.record.outcome, StepFailure::invalid_control);
  r = stride_map(g.x0, {g.u0.theta, g.u0.phi, -5.0}, TerrainParams::rigid(), ModelParams{});
  EXPECT_EQ(r.record.outcome, StepFailure::invalid_control);
}

TEST(StrideMap, PeriodicOnRigidAndRigidEquivalentGround) {
  ModelParams p;
  for (const PeriodicGait& g : {fixtures::nominal_gait(), published_gait()}) {
    StrideResult rigid = stride_map(g.x0, g.u0, TerrainParams::rigid(), p);
    ASSERT_TRUE(rigid.record.completed());
    EXPECT_LT((rigid.next.x - mirror_state(g.x0.x)).cwiseAbs().maxCoeff(), 1e-3);
    StrideResult soft = stride_map(g.x0, g.u0, TerrainParams::compliant(kRigidEquivalentStiffness), p);
    ASSERT_TRUE(soft.record.completed());
    EXPECT_LT((soft.next.x - mirror_state(g.x0.x)).cwiseAbs().maxCoeff(), 1e-2);
  }
}

TEST(StrideMap, MirroringCommutesWithStepping) {
  ModelParams p;
  const PeriodicGait& g = fixtures::nominal_gait();
  MidstanceState x = g.x0;
  x.x += Vec5(0.004, -0.003, -0.002, 0.02, 0.01);
  ControlInput u{g.u0.theta + 0.01, g.u0.phi - 0.01, g.u0.stiffness * 1.02};
  StrideResult a = stride_map(x, u, TerrainParams::rigid(), p);
  StrideResult b = stride_map(mirror_state(x), mirror_control(u), TerrainParams::rigid(), p);
  ASSERT_TRUE(a.record.completed());
  ASSERT_TRUE(b.record.completed());
  EXPECT_EQ(b.next.support, Leg::A);
  EXPECT_LT((mirror_state(a.next.x) - b.next.x).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(StrideMap, PenetrationDepthIsNonNegative) {
  const PeriodicGait& g = fixtures::nominal_gait();
  for (double kg : {5e7, 1e6, 1e5}) {
    StrideResult r = stride_map(g.x0, g.u0, TerrainParams::compliant(kg), ModelParams{});
    for (Leg l : {Leg::A, Leg::B}) EXPECT_GE(r.record.penetration_depth(l), 0.0);
    EXPECT_GT(r.record.penetration_depth(Leg::B), 0.0);
  }
  StrideResult r = stride_map(g.x0, g.u0, TerrainParams::rigid(), ModelParams{});
  EXPECT_EQ(r.record.penetration_depth(Leg::A), 0.0);
  EXPECT_EQ(r.record.penetration_depth(Leg::B), 0.0);
}

TEST(StrideMap, SofterGroundPenetratesDeeper) {
  const PeriodicGait& g = fixtures::nominal_gait();
  double prev = 0.0;
  for (double kg : {5e7, 5e6, 5e5, 5e4}) {
    StrideResult r = stride_map(g.x0, g.u0, TerrainParams::compliant(kg), ModelParams{});
    double d = r.record.penetration_depth(Leg::B);
    EXPECT_GT(d, prev);
    prev = d;
  }
}

TEST(Trajectory, SamplesOnMillisecondGrid) {
  const PeriodicGait& g = fixtures::nominal_gait();
  TrajectoryRecorder rec;
  SimOptions o;
  o.recorder = &rec;
  StrideResult r = stride_map(g.x0, g.u0, TerrainParams::compliant(kRigidEquivalentStiffness), ModelParams{}, o);
  ASSERT_TRUE(r.record.completed());
  const auto& s = rec.samples();
  ASSERT_GT(s.size(), 100u);
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(s[i].time, 1e-3 * static_cast<double>(i), 1e-12);
  EXPECT_LE(s.back().time, r.record.event_times[4]);
  EXPECT_GT(s.back().time + 1e-3, r.record.event_times[4]);
  EXPECT_DOUBLE_EQ(s.front().com_position.z(), g.x0.x[2]);
}
