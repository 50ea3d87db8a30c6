#pragma once

// Experiment orchestration: gait and controller resolution from a config,
// perturbation trials, robustness sweeps, the published gain table and the
// (k1, k2) grid search.

#include <dslip/io.hpp>

#include <atomic>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

namespace dslip {

/// Runs f(0..n-1) on up to `jobs` threads (0: hardware concurrency). Each
/// call must only touch its own output slot; the first exception is rethrown.
template <class F>
void parallel_for(std::size_t n, int jobs, F&& f) {
  std::size_t workers = jobs > 0 ? static_cast<std::size_t>(jobs)
                                 : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            f(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

// ---- gait and controller ------------------------------------------------------

inline PeriodicGait resolve_gait(const ExperimentConfig& c) {
  if (c.gait_file) return load_gait(*c.gait_file);
  return find_periodic_gait(c.search, c.search_terrain(), c.model, c.sim);
}

inline ControllerFile synthesize_controller(const PeriodicGait& gait, const ExperimentConfig& c) {
  LinearizationOptions opt;
  opt.relative_step = c.linearization.relative_step;
  opt.scheme = c.linearization.scheme;
  ControllerFile f;
  f.gait = gait;
  f.linearization = numeric_jacobians(gait, c.linearization.terrain(), c.model, opt);
  f.lqr = synthesize_lqr(f.linearization, c.Q, c.R);
  f.linearization_terrain = c.linearization.ground == GroundKind::rigid ? "rigid" : "compliant";
  f.linearization_stiffness = c.linearization.stiffness;
  return f;
}

inline WalkingController resolve_controller(const ExperimentConfig& c) {
  if (c.controller_file) {
    ControllerFile f = load_controller(*c.controller_file);
    return {f.gait, f.lqr.K};
  }
  PeriodicGait g = resolve_gait(c);
  return {g, synthesize_controller(g, c).lqr.K};
}

// ---- recovery metric ------------------------------------------------------------

struct Recovery {
  int peak_step = -1;
  double peak = 0.0;
  int steps_to_threshold = -1;  // -1: never fell below the threshold

  bool within(int steps) const { return steps_to_threshold >= 0 && steps_to_threshold <= steps; }
};

/// Post-perturbation peak of the MS state error norm and the number of steps
/// until it first falls below `fraction` of that peak.
inline Recovery recovery_after(const TrialResult& r, int perturbation_step, double fraction = 0.05) {
  Recovery rec;
  const int n = static_cast<int>(r.state_errors.size());
  for (int i = perturbation_step + 1; i < n; ++i) {
    double e = r.state_errors[i].norm();
    if (e > rec.peak) {
      rec.peak = e;
      rec.peak_step = i;
    }
  }
  if (rec.peak_step < 0) return rec;
  for (int i = rec.peak_step + 1; i < n; ++i) {
    if (r.state_errors[i].norm() < fraction * rec.peak) {
      rec.steps_to_threshold = i - rec.peak_step;
      break;
    }
  }
  return rec;
}

// ---- perturbation trials and sweeps ----------------------------------------------

struct PerturbationOutcome {
  double low_stiffness = 0.0;
  ControllerKind controller = ControllerKind::plain_lqr;
  StiffnessGains gains;
  TrialResult result;
  Recovery recovery;
  bool survived = false;
};

inline PerturbationOutcome perturbation_trial(const TrialSetup& setup,
                                              const WalkingController& controller) {
  if (!setup.perturbation) throw ConfigError("perturbation trial needs a perturbation spec");
  PerturbationOutcome o;
  o.low_stiffness = setup.perturbation->low_stiffness;
  o.controller = setup.controller;
  o.gains = setup.gains;
  o.result = run_walk(setup, controller);
  o.survived = o.result.survived(setup.max_steps);
  o.recovery = recovery_after(o.result, setup.perturbation->step);
  return o;
}

struct SweepTable {
  std::vector<PerturbationOutcome> rows;  // input order
  std::optional<double> min_surviving_stiffness;
  std::vector<double> monotonicity_violations;  // failed stiffness above a surviving one
};

inline SweepTable robustness_sweep(const TrialSetup& base, const WalkingController& controller,
                                   const std::vector<double>& stiffness, int jobs = 0) {
  if (stiffness.empty()) throw ConfigError("sweep needs at least one stiffness value");
  PerturbationSpec spec = base.perturbation.value_or(PerturbationSpec{});
  SweepTable t;
  t.rows.resize(stiffness.size());
  parallel_for(stiffness.size(), jobs, [&](std::size_t i) {
    TrialSetup s = base;
    s.sim.recorder = nullptr;
    s.perturbation = spec;
    s.perturbation->low_stiffness = stiffness[i];
    s.perturbation->rigid_stiffness = base.rigid_stiffness;
    t.rows[i] = perturbation_trial(s, controller);
  });
  for (const auto& r : t.rows)
    if (r.survived && (!t.min_surviving_stiffness || r.low_stiffness < *t.min_surviving_stiffness))
      t.min_surviving_stiffness = r.low_stiffness;
  for (const auto& r : t.rows)
    if (!r.survived && t.min_surviving_stiffness && r.low_stiffness > *t.min_surviving_stiffness)
      t.monotonicity_violations.push_back(r.low_stiffness);
  return t;
}

// ---- published gain table ------------------------------------------------------------

struct Table1Row {
  GainRow published;
  PerturbationOutcome outcome;
  double depth_cm = 0.0;
  double relative_error = 0.0;
};

inline std::vector<Table1Row> reproduce_table1(const TrialSetup& base,
                                               const WalkingController& controller, int jobs = 0) {
  std::vector<Table1Row> rows(kPublishedGains.size());
  PerturbationSpec spec = base.perturbation.value_or(PerturbationSpec{});
  parallel_for(rows.size(), jobs, [&](std::size_t i) {
    const GainRow& g = kPublishedGains[i];
    TrialSetup s = base;
    s.sim.recorder = nullptr;
    s.controller = ControllerKind::proposed;
    s.gains = g.gains;
    s.perturbation = spec;
    s.perturbation->low_stiffness = g.low_stiffness;
    s.perturbation->rigid_stiffness = base.rigid_stiffness;
    Table1Row& row = rows[i];
    row.published = g;
    row.outcome = perturbation_trial(s, controller);
    row.depth_cm = 100.0 * row.outcome.result.max_penetration_depth;
    row.relative_error = (row.depth_cm - g.depth_cm) / g.depth_cm;
  });
  return rows;
}

// ---- gain tuning ----------------------------------------------------------------

struct TuningEntry {
  StiffnessGains gains;
  int steps_completed = 0;
  StepFailure failure = StepFailure::none;
  double score = std::numeric_limits<double>::infinity();
  double max_penetration_depth = 0.0;
  bool survived() const { return std::isfinite(score); }
};

struct TuningReport {
  std::vector<TuningEntry> entries;  // coarse grid in (k1, k2) order, then refinement
  TuningEntry best;
};

struct TuningError : Error {
  TuningError(const std::string& what, TuningEntry best) : Error(what), best_partial(best) {}
  TuningEntry best_partial;
};

/// Grid search over (k1, k2) minimizing the steady-state score; the shared
/// pre-perturbation prefix is simulated once.
inline TuningReport find_gains(const TrialSetup& base, const WalkingController& controller,
                               const GainGrid& grid, int jobs = 0) {
  grid.validate();
  if (!base.perturbation) throw ConfigError("gain tuning needs a perturbation spec");
  TrialSetup setup = base;
  setup.controller = ControllerKind::proposed;
  setup.sim.recorder = nullptr;

  WalkRunner prefix_runner(setup, controller);
  WalkCheckpoint prefix = prefix_runner.start();
  prefix_runner.advance(prefix, setup.perturbation->step);

  auto evaluate = [&](const std::vector<StiffnessGains>& pairs) {
    std::vector<TuningEntry> out(pairs.size());
    parallel_for(pairs.size(), jobs, [&](std::size_t i) {
      TrialSetup s = setup;
      s.gains = pairs[i];
      WalkRunner runner(s, controller);
      WalkCheckpoint cp = prefix;
      runner.advance(cp, s.max_steps);
      TuningEntry& e = out[i];
      e.gains = pairs[i];
      e.steps_completed = cp.partial.steps_completed;
      e.failure = cp.partial.failure;
      e.score = steady_state_score(cp.partial, s.max_steps);
      e.max_penetration_depth = cp.partial.max_penetration_depth;
    });
    return out;
  };
  auto better = [](const TuningEntry& a, const TuningEntry& b) {
    if (a.score != b.score) return a.score < b.score;
    return a.steps_completed > b.steps_completed;
  };

  std::vector<StiffnessGains> pairs;
  for (double k1 : grid.k1_values())
    for (double k2 : grid.k2_values()) pairs.push_back({k1, k2});
  TuningReport report;
  report.entries = evaluate(pairs);
  report.best = *std::min_element(report.entries.begin(), report.entries.end(), better);

  if (grid.refine && report.best.survived()) {
    std::vector<StiffnessGains> fine;
    const StiffnessGains c = report.best.gains;
    for (int i = -3; i <= 3; ++i)
      for (int j = -3; j <= 3; ++j) {
        if (i % 4 == 0 && j % 4 == 0) continue;
        StiffnessGains g{c.k1 + i * grid.k1_step / 4.0, c.k2 + j * grid.k2_step / 4.0};
        if (g.k1 < 1.0 || g.k2 < 1.0) continue;
        fine.push_back(g);
      }
    auto refined = evaluate(fine);
    report.entries.insert(report.entries.end(), refined.begin(), refined.end());
    for (const auto& e : refined)
      if (better(e, report.best)) report.best = e;
  }

  if (!report.best.survived())
    throw TuningError(fmt::format("no gain pair completed {} steps; best partial survivor ({}, {}) "
                                  "reached {} steps",
                                  setup.max_steps, report.best.gains.k1, report.best.gains.k2,
                                  report.best.steps_completed),
                      report.best);
  return report;
}

// ---- reports ------------------------------------------------------------------

inline std::string sweep_csv(const SweepTable& t) {
  std::string s = "kg_low,controller,k1,k2,outcome,steps,max_depth_m,peak_error,steps_to_5pct\n";
  for (const auto& r : t.rows)
    s += fmt::format("{:.10g},{},{:.10g},{:.10g},{},{},{:.10g},{:.10g},{}\n", r.low_stiffness,
                     name(r.controller), r.gains.k1, r.gains.k2,
                     r.survived ? "survived" : std::string("failed:") + name(r.result.failure),
                     r.result.steps_completed, r.result.max_penetration_depth, r.recovery.peak,
                     r.recovery.steps_to_threshold);
  return s;
}

inline std::string table1_csv(const std::vector<Table1Row>& rows) {
  std::string s = "kg_low,k1,k2,outcome,steps,depth_cm,published_depth_cm,relative_error\n";
  for (const auto& r : rows)
    s += fmt::format("{:.10g},{:.10g},{:.10g},{},{},{:.4f},{:.2f},{:.4f}\n", r.published.low_stiffness,
                     r.published.gains.k1, r.published.gains.k2,
                     r.outcome.survived ? "completed" : std::string("failed:") + name(r.outcome.result.failure),
                     r.outcome.result.steps_completed, r.depth_cm, r.published.depth_cm,
                     r.relative_error);
  return s;
}

inline std::string tuning_csv(const TuningReport& t) {
  std::string s = "k1,k2,outcome,steps,steady_state_score,max_depth_m\n";
  for (const auto& e : t.entries)
    s += fmt::format("{:.10g},{:.10g},{},{},{:.10g},{:.10g}\n", e.gains.k1, e.gains.k2,
                     e.survived() ? "survived" : std::string("failed:") + name(e.failure),
                     e.steps_completed, e.score, e.max_penetration_depth);
  return s;
}

inline std::string trial_summary(const std::string& command, const TrialSetup& setup,
                                 const TrialResult& r) {
  std::string s = fmt::format("command: {}\n", command);
  s += fmt::format("controller: {}\n", name(setup.controller));
  s += fmt::format("ground: {}\n", setup.ground == GroundKind::rigid ? "rigid" : "compliant");
  if (setup.ground == GroundKind::compliant) s += fmt::format("ground_stiffness: {:.10g}\n", setup.rigid_stiffness);
  if (setup.perturbation) {
    s += fmt::format("perturbation:\n  step: {}\n  low_stiffness: {:.10g}\n  leg: {}\n",
                     setup.perturbation->step, setup.perturbation->low_stiffness,
                     name(setup.perturbation->perturbed_leg()));
    if (setup.controller == ControllerKind::proposed)
      s += fmt::format("gains: {{k1: {:.10g}, k2: {:.10g}}}\n", setup.gains.k1, setup.gains.k2);
  }
  s += fmt::format("max_steps: {}\n", setup.max_steps);
  s += fmt::format("steps_completed: {}\n", r.steps_completed);
  s += fmt::format("outcome: {}\n", r.survived(setup.max_steps) ? "completed"
                                     : std::string("failed:") + name(r.failure));
  s += fmt::format("max_penetration_depth_m: {:.10g}\n", r.max_penetration_depth);
  double score = steady_state_score(r, setup.max_steps);
  s += fmt::format("steady_state_score: {}\n", std::isfinite(score) ? fmt::format("{:.10g}", score) : ".inf");
  if (setup.perturbation) {
    Recovery rec = recovery_after(r, setup.perturbation->step);
    s += fmt::format("recovery:\n  peak_step: {}\n  peak_error: {:.10g}\n  steps_to_5pct: {}\n",
                     rec.peak_step, rec.peak, rec.steps_to_threshold);
  }
  return s;
}

}  // namespace dslip
