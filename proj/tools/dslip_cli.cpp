// dslip: command-line front end for gait search, LQR synthesis and walking
// experiments. Exit codes: 0 ok, 1 trial failure, 2 config error, 3 numeric.

#include <dslip/harness.hpp>

#include <CLI11.hpp>
#include <fmt/format.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace dslip;

namespace {

enum Exit : int { kOk = 0, kTrialFailure = 1, kConfigError = 2, kNumericError = 3 };

struct Options {
  std::string config;
  std::string out;
  std::string gait;
  std::string controller;
  std::optional<double> rtol, atol;
  std::optional<int> steps;
  std::optional<double> kg_low;
  std::optional<int> jobs;
  std::optional<std::string> kind;
  std::optional<double> k1, k2;
  bool quiet = false;
};

ExperimentConfig make_config(const Options& o) {
  ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  if (!o.out.empty()) c.output_dir = o.out;
  if (!o.gait.empty()) c.gait_file = o.gait;
  if (!o.controller.empty()) c.controller_file = o.controller;
  if (o.rtol) c.sim.tolerances.relative = *o.rtol;
  if (o.atol) c.sim.tolerances.absolute = *o.atol;
  if (o.steps) {
    if (*o.steps < 1) throw ConfigError("--steps must be >= 1");
    c.max_steps = *o.steps;
  }
  if (o.jobs) c.jobs = *o.jobs;
  if (o.kind) c.controller = *o.kind == "proposed" ? ControllerKind::proposed : ControllerKind::plain_lqr;
  if (o.k1) c.gains.k1 = *o.k1;
  if (o.k2) c.gains.k2 = *o.k2;
  c.gains.validate();
  if (o.kg_low) {
    if (c.ground == GroundKind::rigid) throw ConfigError("--kg-low needs compliant terrain");
    PerturbationSpec p = c.perturbation.value_or(PerturbationSpec{});
    p.low_stiffness = *o.kg_low;
    p.rigid_stiffness = c.ground_stiffness;
    p.validate();
    c.perturbation = p;
  }
  return c;
}

void say(const Options& o, const std::string& s) {
  if (!o.quiet) std::fputs(s.c_str(), stdout);
}

int cmd_find_gait(const Options& o) {
  ExperimentConfig c = make_config(o);
  PeriodicGait g = find_periodic_gait(c.search, c.search_terrain(), c.model, c.sim);
  fs::path file = c.output_dir / "gait.yaml";
  write_text(file, gait_file_text(g, c.search, c.search_terrain()));
  say(o, fmt::format("z0 = {:.6f} m, theta = {:.4f} deg, phi = {:.4f} deg, k = {:.2f} N/m\n",
                     g.x0.x[2], rad2deg(g.u0.theta), rad2deg(g.u0.phi), g.u0.stiffness));
  say(o, fmt::format("residual {:.3e} m after {} iterations, periodicity error {:.3e}\n",
                     g.residual_norm, g.iterations, g.periodicity_error));
  say(o, fmt::format("wrote {}\n", file.string()));
  return g.verified ? kOk : kTrialFailure;
}

int cmd_linearize(const Options& o) {
  ExperimentConfig c = make_config(o);
  PeriodicGait g = resolve_gait(c);
  ControllerFile f = synthesize_controller(g, c);
  fs::path file = c.output_dir / "controller.yaml";
  write_text(file, controller_file_text(f));
  say(o, fmt::format("spectral radius {:.6f}, DARE residual {:.3e}\n", f.lqr.spectral_radius,
                     f.lqr.dare_residual));
  for (int r = 0; r < 3; ++r) {
    std::string row;
    for (int j = 0; j < 5; ++j) row += fmt::format(" {:12.5g}", f.lqr.K(r, j));
    say(o, "K" + row + "\n");
  }
  say(o, fmt::format("wrote {}\n", file.string()));
  return kOk;
}

int run_trial(const Options& o, bool perturbed) {
  ExperimentConfig c = make_config(o);
  if (!perturbed) c.perturbation.reset();
  if (perturbed && !c.perturbation)
    throw ConfigError("perturb needs a 'perturbation' section or --kg-low");
  WalkingController ctrl = resolve_controller(c);
  TrialSetup setup = c.trial_setup();
  TrajectoryRecorder recorder(c.sample_period);
  setup.sim.recorder = &recorder;
  TrialResult r = run_walk(setup, ctrl);

  const char* command = perturbed ? "perturb" : "walk";
  write_text(c.output_dir / "trajectory.csv", trajectory_csv(recorder.samples()));
  write_text(c.output_dir / "steps.csv", step_records_csv(r.records));
  std::string summary = trial_summary(command, setup, r);
  write_text(c.output_dir / "summary.yaml", summary);
  say(o, summary);
  return r.survived(setup.max_steps) ? kOk : kTrialFailure;
}

int cmd_sweep(const Options& o) {
  ExperimentConfig c = make_config(o);
  if (c.ground == GroundKind::rigid) throw ConfigError("sweep needs compliant terrain");
  WalkingController ctrl = resolve_controller(c);
  TrialSetup setup = c.trial_setup();
  SweepTable t = robustness_sweep(setup, ctrl, c.sweep_stiffness, c.jobs);
  write_text(c.output_dir / "sweep.csv", sweep_csv(t));
  for (const auto& r : t.rows)
    say(o, fmt::format("{:>12.6g} N/m  {:<10} {:>4} steps  depth {:6.3f} cm  recovery {}\n",
                       r.low_stiffness, r.survived ? "survived" : "failed", r.result.steps_completed,
                       100.0 * r.result.max_penetration_depth, r.recovery.steps_to_threshold));
  say(o, t.min_surviving_stiffness
             ? fmt::format("minimum surviving stiffness: {:.6g} N/m\n", *t.min_surviving_stiffness)
             : std::string("no surviving stiffness\n"));
  for (double v : t.monotonicity_violations)
    say(o, fmt::format("note: failure at {:.6g} N/m above the minimum surviving stiffness\n", v));
  say(o, fmt::format("wrote {}\n", (c.output_dir / "sweep.csv").string()));
  return kOk;
}

int cmd_tune_gains(const Options& o) {
  ExperimentConfig c = make_config(o);
  if (!c.perturbation) throw ConfigError("tune-gains needs a 'perturbation' section or --kg-low");
  WalkingController ctrl = resolve_controller(c);
  TrialSetup setup = c.trial_setup();
  try {
    TuningReport t = find_gains(setup, ctrl, c.grid, c.jobs);
    write_text(c.output_dir / "tuning.csv", tuning_csv(t));
    write_text(c.output_dir / "stiffness_gains.yaml",
               fmt::format("gains:\n  k1: {}\n  k2: {}\nlow_stiffness: {}\nsteady_state_score: {}\n"
                           "max_penetration_depth_m: {}\n",
                           detail::num(t.best.gains.k1), detail::num(t.best.gains.k2),
                           detail::num(c.perturbation->low_stiffness), detail::num(t.best.score),
                           detail::num(t.best.max_penetration_depth)));
    say(o, fmt::format("best gains k1 = {:.4g}, k2 = {:.4g}: score {:.4e}, depth {:.3f} cm ({} pairs)\n",
                       t.best.gains.k1, t.best.gains.k2, t.best.score,
                       100.0 * t.best.max_penetration_depth, t.entries.size()));
    return kOk;
  } catch (const TuningError& e) {
    std::fprintf(stderr, "dslip: %s\n", e.what());
    return kTrialFailure;
  }
}

int cmd_table1(const Options& o) {
  ExperimentConfig c = make_config(o);
  WalkingController ctrl = resolve_controller(c);
  TrialSetup setup = c.trial_setup();
  auto rows = reproduce_table1(setup, ctrl, c.jobs);
  write_text(c.output_dir / "table1.csv", table1_csv(rows));
  bool all = true;
  say(o, "kg_low [N/m]   k1    k2    depth [cm]  published  rel.err  outcome\n");
  for (const auto& r : rows) {
    all = all && r.outcome.survived;
    say(o, fmt::format("{:>10.0f}  {:>4.2f}  {:>4.2f}  {:>10.2f}  {:>9.2f}  {:>+6.1f}%  {}\n",
                       r.published.low_stiffness, r.published.gains.k1, r.published.gains.k2,
                       r.depth_cm, r.published.depth_cm, 100.0 * r.relative_error,
                       r.outcome.survived ? "completed"
                                          : fmt::format("failed at step {} ({})",
                                                        r.outcome.result.steps_completed,
                                                        name(r.outcome.result.failure))));
  }
  say(o, fmt::format("wrote {}\n", (c.output_dir / "table1.csv").string()));
  return all ? kOk : kTrialFailure;
}

template <class F>
int guarded(F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "dslip: configuration error: %s\n", e.what());
    return kConfigError;
  } catch (const GaitSearchError& e) {
    std::fprintf(stderr, "dslip: %s (best z0 %.6g, theta %.6g deg, phi %.6g deg, k %.6g)\n",
                 e.what(), e.best_iterate[0], rad2deg(e.best_iterate[1]),
                 rad2deg(e.best_iterate[2]), e.best_iterate[3]);
    return kNumericError;
  } catch (const Error& e) {
    std::fprintf(stderr, "dslip: numeric error: %s\n", e.what());
    return kNumericError;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "dslip: configuration error: %s\n", e.what());
    return kConfigError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-SLIP walking on compliant ground: gait search, LQR, stiffness control"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", o.config, "experiment config (YAML)")->check(CLI::ExistingFile);
    sub->add_option("-o,--out", o.out, "output directory");
    sub->add_option("--rtol", o.rtol, "integrator relative tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--atol", o.atol, "integrator absolute tolerance")->check(CLI::PositiveNumber);
    sub->add_flag("-q,--quiet", o.quiet, "no console report");
  };
  auto gait_opt = [&](CLI::App* sub) {
    sub->add_option("--gait", o.gait, "gait file")->check(CLI::ExistingFile);
  };
  auto trial_opts = [&](CLI::App* sub) {
    gait_opt(sub);
    sub->add_option("--controller", o.controller, "controller file from 'linearize'")
        ->check(CLI::ExistingFile);
    sub->add_option("--steps", o.steps, "number of steps");
    sub->add_option("--kind", o.kind, "plain_lqr or proposed")
        ->check(CLI::IsMember({"plain_lqr", "proposed"}));
    sub->add_option("--k1", o.k1, "perturbed-leg stiffness gain");
    sub->add_option("--k2", o.k2, "support-leg stiffness gain");
    sub->add_option("--jobs", o.jobs, "worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
  };

  std::function<int()> run;
  auto* find = app.add_subcommand("find-gait", "search a periodic gait");
  common(find);
  find->callback([&] { run = [&] { return cmd_find_gait(o); }; });

  auto* lin = app.add_subcommand("linearize", "linearize the stride map and synthesize the LQR");
  common(lin);
  gait_opt(lin);
  lin->callback([&] { run = [&] { return cmd_linearize(o); }; });

  auto* walk = app.add_subcommand("walk", "closed-loop walk without perturbation");
  common(walk);
  trial_opts(walk);
  walk->callback([&] { run = [&] { return run_trial(o, false); }; });

  auto* perturb = app.add_subcommand("perturb", "one-step soft-ground perturbation trial");
  common(perturb);
  trial_opts(perturb);
  perturb->add_option("--kg-low", o.kg_low, "ground stiffness under the perturbed foot")
      ->check(CLI::PositiveNumber);
  perturb->callback([&] { run = [&] { return run_trial(o, true); }; });

  auto* sweep = app.add_subcommand("sweep", "perturbation trials over a stiffness list");
  common(sweep);
  trial_opts(sweep);
  sweep->callback([&] { run = [&] { return cmd_sweep(o); }; });

  auto* tune = app.add_subcommand("tune-gains", "grid search for the stiffness gains");
  common(tune);
  trial_opts(tune);
  tune->add_option("--kg-low", o.kg_low, "ground stiffness under the perturbed foot")
      ->check(CLI::PositiveNumber);
  tune->callback([&] { run = [&] { return cmd_tune_gains(o); }; });

  auto* table = app.add_subcommand("reproduce-table1", "published gains and penetration depths");
  common(table);
  trial_opts(table);
  table->callback([&] { run = [&] { return cmd_table1(o); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }
  return guarded(run);
}
