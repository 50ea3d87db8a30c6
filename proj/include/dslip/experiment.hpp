#pragma once

// Closed-loop walking trials: LQR at every midstance, optional stiffness
// amplification, optional one-step soft-ground perturbation.

#include <dslip/lqr.hpp>
#include <dslip/stiffness_ctrl.hpp>

#include <optional>
#include <vector>

namespace dslip {

enum class ControllerKind { plain_lqr, proposed };

constexpr const char* name(ControllerKind c) {
  return c == ControllerKind::plain_lqr ? "plain_lqr" : "proposed";
}

/// Gait plus feedback gain: everything the step-to-step law needs.
struct WalkingController {
  PeriodicGait gait;
  Mat35 K = Mat35::Zero();
};

struct TrialSetup {
  ModelParams model;
  GroundKind ground = GroundKind::compliant;
  double rigid_stiffness = kRigidEquivalentStiffness;
  ControllerKind controller = ControllerKind::plain_lqr;
  StiffnessGains gains;
  std::optional<PerturbationSpec> perturbation;
  int max_steps = 100;
  SimOptions sim;

  void validate() const {
    model.validate();
    if (max_steps < 1) throw ConfigError("max_steps must be >= 1");
    if (!(rigid_stiffness > 0.0)) throw ConfigError("rigid stiffness must be > 0");
    gains.validate();
    if (perturbation) {
      perturbation->validate();
      if (ground == GroundKind::rigid)
        throw ConfigError("a ground perturbation needs compliant ground");
    }
  }
};

struct TrialResult {
  int steps_completed = 0;
  StepFailure failure = StepFailure::none;
  std::vector<StepRecord> records;
  double max_penetration_depth = 0.0;  // perturbed foot if any, else any foot [m]
  std::vector<Vec5> state_errors;      // side-normalized, one per MS reached
  std::vector<Vec3> control_errors;    // side-normalized, one per step taken

  bool survived(int required) const { return steps_completed >= required; }
};

/// Error norm ||dx~_n|| + ||du~_n|| at step n (control error taken as zero if
/// no control was applied at that MS).
inline double step_error_norm(const TrialResult& r, std::size_t n) {
  double e = r.state_errors.at(n).norm();
  if (n < r.control_errors.size()) e += r.control_errors[n].norm();
  return e;
}

/// Mean over the last `window` steps of the step error norm; infinite if the
/// trial fell short of `required` steps.
inline double steady_state_score(const TrialResult& r, int required, int window = 10) {
  if (!r.survived(required)) return std::numeric_limits<double>::infinity();
  std::size_t n = r.control_errors.size();
  double sum = 0.0;
  for (std::size_t i = n - window; i < n; ++i) sum += step_error_norm(r, i);
  return sum / window;
}

/// Walking state at a midstance; carries the support foot's vertical state
/// across steps on compliant ground.
struct WalkCheckpoint {
  int step = 0;
  HybridState state;
  TrialResult partial;
};

class WalkRunner {
 public:
  WalkRunner(TrialSetup setup, WalkingController controller)
      : setup_(std::move(setup)), ctrl_(std::move(controller)) {
    setup_.validate();
  }

  TerrainParams terrain_for_step(int n) const {
    if (setup_.ground == GroundKind::rigid) return TerrainParams::rigid();
    if (setup_.perturbation) return ground_stiffness_for_step(n, *setup_.perturbation);
    return TerrainParams::compliant(setup_.rigid_stiffness);
  }

  WalkCheckpoint start() const {
    WalkCheckpoint cp;
    TerrainParams t0 = terrain_for_step(0);
    cp.state = midstance_hybrid_state(ctrl_.gait.x0, ctrl_.gait.u0.stiffness, t0, setup_.model);
    return cp;
  }

  /// Advances `cp` until `until_step` midstances have been taken or the
  /// trial fails.
  void advance(WalkCheckpoint& cp, int until_step) const {
    StepSimulator sim(setup_.model, setup_.sim);
    TrialResult& res = cp.partial;
    const Vec5 x0 = ctrl_.gait.x0.x;
    const Vec3 u0 = ctrl_.gait.u0.vector();
    while (cp.step < until_step && res.failure == StepFailure::none) {
      const int n = cp.step;
      const Leg support = n % 2 == 0 ? Leg::A : Leg::B;
      MidstanceState ms = extract_midstance(cp.state, support);
      Vec5 xt = normalized(ms);
      if (res.state_errors.size() == static_cast<std::size_t>(n))
        res.state_errors.push_back(xt - x0);

      Vec3 ut = control_law_normalized(xt, x0, u0, ctrl_.K);
      res.control_errors.push_back(ut - u0);

      StepPlan plan;
      plan.index = n;
      plan.theta = ut[0];
      plan.phi = ut[1];
      plan.terrain = terrain_for_step(n);
      if (setup_.controller == ControllerKind::proposed && setup_.perturbation && ut[2] > 0.0)
        plan.stiffness = step_stiffness(n, ut[2], *setup_.perturbation, setup_.gains);
      else
        plan.stiffness = StepStiffness::uniform(ut[2]);

      StepOutcome out = sim.simulate_step(cp.state, support, plan);
      out.record.control = ControlInput::from_vector(ut);
      res.records.push_back(out.record);
      if (!out.record.completed()) {
        res.failure = out.record.outcome;
        break;
      }
      cp.state = out.state;
      ++cp.step;
      res.steps_completed = cp.step;
      res.state_errors.push_back(normalized(out.record.ms_out) - x0);
    }
    res.max_penetration_depth = max_depth(res.records);
  }

  TrialResult run() const {
    WalkCheckpoint cp = start();
    advance(cp, setup_.max_steps);
    return cp.partial;
  }

  const TrialSetup& setup() const { return setup_; }
  const WalkingController& controller() const { return ctrl_; }

 private:
  double max_depth(const std::vector<StepRecord>& records) const {
    double d = 0.0;
    for (const StepRecord& r : records) {
      if (setup_.perturbation) {
        d = std::max(d, r.penetration_depth(setup_.perturbation->perturbed_leg()));
      } else {
        d = std::max({d, r.penetration_depth(Leg::A), r.penetration_depth(Leg::B)});
      }
    }
    return d;
  }

  TrialSetup setup_;
  WalkingController ctrl_;
};

inline TrialResult run_walk(const TrialSetup& setup, const WalkingController& controller) {
  return WalkRunner(setup, controller).run();
}

}  // namespace dslip
