#pragma once

#include <dslip/harness.hpp>

namespace fixtures {

/// Published operating point with z0 and k held fixed, angles re-solved.
inline const dslip::PeriodicGait& nominal_gait() {
  static const dslip::PeriodicGait g = [] {
    dslip::GaitSearchSpec s;
    dslip::PeriodicGait pub = dslip::published_gait();
    s.height = {pub.x0.x[2], 0.9, 1.0, true};
    s.stiffness = {pub.u0.stiffness, 5000.0, 50000.0, true};
    s.theta.seed = pub.u0.theta;
    s.phi.seed = pub.u0.phi;
    return dslip::find_periodic_gait(s, dslip::TerrainParams::rigid(), dslip::ModelParams{});
  }();
  return g;
}

inline const dslip::StrideLinearization& nominal_linearization() {
  static const dslip::StrideLinearization lin = dslip::numeric_jacobians(
      nominal_gait(), dslip::TerrainParams::compliant(dslip::kRigidEquivalentStiffness),
      dslip::ModelParams{});
  return lin;
}

inline const dslip::LqrSolution& nominal_lqr() {
  static const dslip::LqrSolution sol = dslip::synthesize_lqr(nominal_linearization());
  return sol;
}

inline dslip::WalkingController nominal_controller() { return {nominal_gait(), nominal_lqr().K}; }

inline dslip::TrialSetup perturbed_setup(double kg_low, dslip::ControllerKind kind,
                                         dslip::StiffnessGains gains = {}) {
  dslip::TrialSetup s;
  s.controller = kind;
  s.gains = gains;
  s.perturbation = dslip::PerturbationSpec{10, kg_low};
  return s;
}

}  // namespace fixtures
