#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <regex>

using namespace dslip;

namespace {

ExperimentConfig parse(const std::string& text) {
  return parse_config(ConfigSection::parse(text, "test.yaml"));
}

std::string config_error(const std::string& text) {
  try {
    parse(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, Defaults) {
  ExperimentConfig c = parse("");
  EXPECT_EQ(c.max_steps, 100);
  EXPECT_EQ(c.ground, GroundKind::compliant);
  EXPECT_EQ(c.ground_stiffness, 50e6);
  EXPECT_EQ(c.controller, ControllerKind::plain_lqr);
  EXPECT_FALSE(c.perturbation.has_value());
  EXPECT_EQ(c.Q, Mat5::Identity());
}

TEST(Config, FullDocument) {
  ExperimentConfig c = parse(R"(
model: {body_mass: 75, foot_mass: 0.5}
terrain: {kind: compliant, stiffness: 4.0e7}
gait:
  search:
    height: {seed: 0.99, fixed: true}
    theta_deg: {seed: 107, lower: 100, upper: 115}
controller:
  kind: proposed
  r_diag: [1, 1, 2]
  gains: {k1: 4, k2: 1.61}
perturbation: {step: 12, low_stiffness: 9.0e4}
trial: {max_steps: 40}
integrator: {relative: 1.0e-10}
tuning:
  k1: {min: 1, max: 2, step: 0.5}
)");
  EXPECT_EQ(c.model.body_mass, 75.0);
  EXPECT_EQ(c.model.foot_mass, 0.5);
  EXPECT_EQ(c.ground_stiffness, 4e7);
  EXPECT_TRUE(c.search.height.fixed);
  EXPECT_NEAR(c.search.theta.seed, deg2rad(107.0), 1e-15);
  EXPECT_EQ(c.controller, ControllerKind::proposed);
  EXPECT_EQ(c.R(2, 2), 2.0);
  EXPECT_EQ(c.gains, (StiffnessGains{4.0, 1.61}));
  ASSERT_TRUE(c.perturbation);
  EXPECT_EQ(c.perturbation->step, 12);
  EXPECT_EQ(c.perturbation->rigid_stiffness, 4e7);
  EXPECT_EQ(c.max_steps, 40);
  EXPECT_EQ(c.sim.tolerances.relative, 1e-10);
  EXPECT_EQ(c.grid.k1_values(), (std::vector<double>{1.0, 1.5, 2.0}));
  EXPECT_EQ(c.grid.k2_values().size(), 51u);
}

TEST(Config, ErrorsCarryLineNumbers) {
  EXPECT_EQ(config_error("trial:\n  max_steps: 0\n"),
            "test.yaml:2:14: 'trial.max_steps' must be >= 1");
  EXPECT_EQ(config_error("model:\n  body_mass: 80\n  mass: 3\n"),
            "test.yaml:3:3: unknown key 'model.mass'");
  EXPECT_EQ(config_error("terrain:\n  kind: sand\n"),
            "test.yaml:2:3: 'terrain.kind' must be 'rigid' or 'compliant', got 'sand'");
  EXPECT_EQ(config_error("\n\ncontroller:\n  gains: {k1: 0.5, k2: 1}\n"),
            "test.yaml:4:10: stiffness gains must be >= 1, got (0.5, 1)");
  EXPECT_EQ(config_error("model:\n  gravity: [0, -9.81]\n"),
            "test.yaml:2:12: 'model.gravity' must have 3 entries, got 2");
  EXPECT_EQ(config_error("trial:\n  max_steps: many\n"),
            "test.yaml:2:14: 'trial.max_steps' has an invalid value");
  EXPECT_EQ(config_error("perturbation: {step: 10}\n"),
            "test.yaml:1:15: missing key 'perturbation.low_stiffness'");
  EXPECT_EQ(config_error("terrain: {kind: rigid}\nperturbation: {low_stiffness: 1e5}\n"),
            "test.yaml:2:15: a ground perturbation needs compliant terrain");
  std::string bad_yaml = config_error("model: [1, 2\n");
  EXPECT_TRUE(std::regex_search(bad_yaml, std::regex("^test\\.yaml:\\d+:\\d+: "))) << bad_yaml;
}

TEST(Files, GaitRoundTripIsExact) {
  const PeriodicGait& g = fixtures::nominal_gait();
  auto dir = std::filesystem::temp_directory_path() / "dslip_test_gait";
  write_text(dir / "gait.yaml", gait_file_text(g, GaitSearchSpec{}, TerrainParams::rigid()));
  PeriodicGait r = load_gait(dir / "gait.yaml");
  EXPECT_EQ(r.x0.x, g.x0.x);
  EXPECT_EQ(r.u0.vector(), g.u0.vector());
  EXPECT_EQ(r.verified, g.verified);
  EXPECT_EQ(r.residual_norm, g.residual_norm);
  std::filesystem::remove_all(dir);
}

TEST(Files, ControllerRoundTripIsExact) {
  ControllerFile f;
  f.gait = fixtures::nominal_gait();
  f.linearization = fixtures::nominal_linearization();
  f.lqr = fixtures::nominal_lqr();
  auto dir = std::filesystem::temp_directory_path() / "dslip_test_ctrl";
  write_text(dir / "controller.yaml", controller_file_text(f));
  ControllerFile r = load_controller(dir / "controller.yaml");
  EXPECT_EQ(r.lqr.K, f.lqr.K);
  EXPECT_EQ(r.lqr.P, f.lqr.P);
  EXPECT_EQ(r.linearization.Jx, f.linearization.Jx);
  EXPECT_EQ(r.linearization.Ju, f.linearization.Ju);
  EXPECT_EQ(r.gait.u0.vector(), f.gait.u0.vector());
  std::filesystem::remove_all(dir);
}

TEST(Files, MalformedGaitFileReportsLocation) {
  auto dir = std::filesystem::temp_directory_path() / "dslip_test_bad";
  write_text(dir / "gait.yaml", "gait:\n  x0: [0, 0.05, 0.99]\n  theta: 1.8\n");
  try {
    load_gait(dir / "gait.yaml");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("gait.yaml:2:7: 'gait.x0' must have 5 entries"), std::string::npos)
        << e.what();
  }
  std::filesystem::remove_all(dir);
}

TEST(RunWalk, NominalCompletesOnRigidAndRigidEquivalentGround) {
  for (GroundKind g : {GroundKind::rigid, GroundKind::compliant}) {
    TrialSetup s;
    s.ground = g;
    TrialResult r = run_walk(s, fixtures::nominal_controller());
    EXPECT_EQ(r.steps_completed, 100);
    EXPECT_EQ(r.failure, StepFailure::none);
    EXPECT_EQ(r.records.size(), 100u);
    EXPECT_EQ(r.state_errors.size(), 101u);
    EXPECT_EQ(r.control_errors.size(), 100u);
  }
}

TEST(RunWalk, ValidatesSetup) {
  TrialSetup s;
  s.max_steps = 0;
  EXPECT_THROW(run_walk(s, fixtures::nominal_controller()), ConfigError);
  s.max_steps = 10;
  s.ground = GroundKind::rigid;
  s.perturbation = PerturbationSpec{10, 1e5};
  EXPECT_THROW(run_walk(s, fixtures::nominal_controller()), ConfigError);
}

TEST(RunWalk, Deterministic) {
  auto s = fixtures::perturbed_setup(150e3, ControllerKind::proposed, {2.0, 1.34});
  TrialResult a = run_walk(s, fixtures::nominal_controller());
  TrialResult b = run_walk(s, fixtures::nominal_controller());
  EXPECT_EQ(step_records_csv(a.records), step_records_csv(b.records));
}

TEST(RunWalk, NullPerturbationMatchesUnperturbedTrial) {
  TrialSetup plain;
  plain.max_steps = 20;
  auto null = fixtures::perturbed_setup(kRigidEquivalentStiffness, ControllerKind::plain_lqr);
  null.max_steps = 20;
  TrialResult a = run_walk(plain, fixtures::nominal_controller());
  TrialResult b = run_walk(null, fixtures::nominal_controller());
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) EXPECT_EQ(a.records[i].ms_out.x, b.records[i].ms_out.x);
  EXPECT_NEAR(b.max_penetration_depth, a.records[10].penetration_depth(Leg::B), 1e-5);
  EXPECT_LT(b.max_penetration_depth, 1e-3);
}

TEST(RunWalk, PlainLqrFailsSoonAfterASoftStep) {
  auto s = fixtures::perturbed_setup(150e3, ControllerKind::plain_lqr);
  TrialResult r = run_walk(s, fixtures::nominal_controller());
  EXPECT_LT(r.steps_completed, 20);
  EXPECT_GE(r.steps_completed, 10);
  EXPECT_NE(r.failure, StepFailure::none);
}

TEST(Checkpoint, ResumedTrialMatchesFullRun) {
  auto s = fixtures::perturbed_setup(174e3, ControllerKind::proposed, {1.5, 1.24});
  s.max_steps = 30;
  WalkRunner runner(s, fixtures::nominal_controller());
  WalkCheckpoint cp = runner.start();
  runner.advance(cp, 10);
  WalkCheckpoint copy = cp;
  runner.advance(copy, 30);
  TrialResult full = runner.run();
  EXPECT_EQ(step_records_csv(copy.partial.records), step_records_csv(full.records));
}

TEST(Recovery, PeakAndThreshold) {
  TrialResult r;
  for (double e : {0.01, 0.01, 0.01, 0.5, 1.0, 0.3, 0.1, 0.06, 0.04, 0.02})
    r.state_errors.push_back(Vec5::Constant(e / std::sqrt(5.0)));
  Recovery rec = recovery_after(r, 2);
  EXPECT_EQ(rec.peak_step, 4);
  EXPECT_NEAR(rec.peak, 1.0, 1e-12);
  EXPECT_EQ(rec.steps_to_threshold, 4);
  EXPECT_TRUE(rec.within(10));
  EXPECT_FALSE(rec.within(3));
  EXPECT_EQ(recovery_after(r, 20).peak_step, -1);
}

TEST(SteadyStateScore, MeanOfLastTenSteps) {
  TrialResult r;
  r.steps_completed = 12;
  for (int i = 0; i <= 12; ++i) r.state_errors.push_back(Vec5::Zero());
  for (int i = 0; i < 12; ++i) r.control_errors.push_back(Vec3::Zero());
  for (int i = 2; i < 12; ++i) r.state_errors[i][0] = 0.1 * i;
  EXPECT_NEAR(steady_state_score(r, 12), 0.1 * 6.5, 1e-12);
  EXPECT_TRUE(std::isinf(steady_state_score(r, 13)));
}

TEST(Sweep, TableAndMinimumSurvivor) {
  TrialSetup base;
  base.max_steps = 40;
  SweepTable t = robustness_sweep(base, fixtures::nominal_controller(), {1e6, 150e3, 90e3}, 2);
  ASSERT_EQ(t.rows.size(), 3u);
  EXPECT_EQ(t.rows[0].low_stiffness, 1e6);
  EXPECT_TRUE(t.rows[0].survived);
  EXPECT_FALSE(t.rows[1].survived);
  EXPECT_FALSE(t.rows[2].survived);
  ASSERT_TRUE(t.min_surviving_stiffness);
  EXPECT_EQ(*t.min_surviving_stiffness, 1e6);
  EXPECT_TRUE(t.monotonicity_violations.empty());
  EXPECT_GT(t.rows[0].result.max_penetration_depth, 0.005);
  EXPECT_THROW(robustness_sweep(base, fixtures::nominal_controller(), {}), ConfigError);
}

TEST(Sweep, ParallelMatchesSerial) {
  TrialSetup base;
  base.max_steps = 25;
  auto a = robustness_sweep(base, fixtures::nominal_controller(), {1e6, 5e5, 174e3}, 1);
  auto b = robustness_sweep(base, fixtures::nominal_controller(), {1e6, 5e5, 174e3}, 3);
  EXPECT_EQ(sweep_csv(a), sweep_csv(b));
}

TEST(Table1, RowsCarryPublishedValues) {
  TrialSetup base;
  auto rows = reproduce_table1(base, fixtures::nominal_controller());
  ASSERT_EQ(rows.size(), 4u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].published.low_stiffness, kPublishedGains[i].low_stiffness);
    EXPECT_EQ(rows[i].outcome.controller, ControllerKind::proposed);
    EXPECT_NEAR(rows[i].depth_cm, 100.0 * rows[i].outcome.result.max_penetration_depth, 1e-12);
  }
  // 174 and 150 kN/m rows complete with depths near the published ones
  for (int i : {0, 1}) {
    EXPECT_TRUE(rows[i].outcome.survived);
    EXPECT_LT(std::abs(rows[i].relative_error), 0.1);
  }
}

TEST(FindGains, SmallGridPicksASurvivor) {
  auto s = fixtures::perturbed_setup(174e3, ControllerKind::proposed);
  GainGrid grid{1.0, 2.0, 0.5, 1.0, 1.3, 0.1, false};
  TuningReport t = find_gains(s, fixtures::nominal_controller(), grid, 2);
  EXPECT_EQ(t.entries.size(), 12u);
  EXPECT_TRUE(t.best.survived());
  for (const auto& e : t.entries) EXPECT_GE(e.score, t.best.score);
  // the grid search reuses the shared prefix; the result equals a full trial
  auto full = s;
  full.gains = t.best.gains;
  EXPECT_EQ(steady_state_score(run_walk(full, fixtures::nominal_controller()), 100), t.best.score);
}

TEST(FindGains, UnitGainsAtNinetyKilonewtonsFail) {
  auto s = fixtures::perturbed_setup(90e3, ControllerKind::proposed);
  GainGrid grid{1.0, 1.0, 0.25, 1.0, 1.0, 0.05, true};
  EXPECT_THROW(find_gains(s, fixtures::nominal_controller(), grid), TuningError);
}
