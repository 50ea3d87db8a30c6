#pragma once

// Leg-stiffness amplification around an expected one-step unilateral
// low-stiffness ground perturbation, layered on the LQR stiffness output.
//
// At the perturbation step n_p both legs start from the LQR value k_n. At TD
// the landing (perturbed) leg switches to k1 * k_n and the support leg to
// k2 * k_n, each held for the rest of its stance. At the MS of step n_p + 1
// the perturbed leg, now in support, takes k1 * k_{n_p+1} while the other leg
// lands with the plain LQR value; TD changes nothing. Once the perturbed leg
// lifts off both legs follow the LQR value again.

#include <dslip/hybrid_sim.hpp>

#include <fmt/format.h>

#include <span>

namespace dslip {

struct PerturbationSpec {
  int step = 10;                                      // n_p
  double low_stiffness = kRigidEquivalentStiffness;  // kg under the perturbed foot
  double rigid_stiffness = kRigidEquivalentStiffness;

  /// Leg that lands on the soft patch at step n_p (legs alternate with leg A
  /// supporting even steps).
  Leg perturbed_leg() const { return step % 2 == 0 ? Leg::B : Leg::A; }

  void validate() const {
    if (step < 1) throw ConfigError("perturbation step must be >= 1");
    if (!(low_stiffness > 0.0)) throw ConfigError("perturbed ground stiffness must be > 0");
    if (!(low_stiffness <= rigid_stiffness))
      throw ConfigError("perturbed ground stiffness must not exceed the rigid stiffness");
  }
};

struct StiffnessGains {
  double k1 = 1.0;  // perturbed (landing) leg
  double k2 = 1.0;  // support leg

  /// Gains must amplify; (1, 1) is allowed and reduces to the plain LQR.
  void validate() const {
    if (!(k1 >= 1.0) || !(k2 >= 1.0))
      throw ConfigError(fmt::format("stiffness gains must be >= 1, got ({}, {})", k1, k2));
  }
  bool operator==(const StiffnessGains&) const = default;
};

/// Published gains for each perturbation stiffness.
struct GainRow {
  double low_stiffness;
  StiffnessGains gains;
  double depth_cm;
};
inline constexpr std::array<GainRow, 4> kPublishedGains{{
    {174e3, {1.5, 1.24}, 3.14},
    {150e3, {2.0, 1.34}, 3.62},
    {90e3, {4.0, 1.61}, 5.32},
    {30e3, {7.0, 3.15}, 11.43},
}};

enum class ScheduleEvent { MS, TD };

struct LegStiffnessPair {
  double perturbed = 0.0;  // the leg landing on soft ground at n_p
  double other = 0.0;
  bool operator==(const LegStiffnessPair&) const = default;
};

/// Stiffness of both legs after `event` of step n, given the LQR output k_n.
inline LegStiffnessPair leg_stiffness_schedule(int n, ScheduleEvent event, double k_n,
                                               const PerturbationSpec& spec,
                                               const StiffnessGains& gains) {
  if (!(k_n > 0.0)) throw DomainError("leg_stiffness_schedule: k_n must be > 0");
  if (n == spec.step) {
    if (event == ScheduleEvent::MS) return {k_n, k_n};
    return {gains.k1 * k_n, gains.k2 * k_n};
  }
  if (n == spec.step + 1) return {gains.k1 * k_n, k_n};
  return {k_n, k_n};
}

/// The schedule expressed per step role (support / landing leg).
inline StepStiffness step_stiffness(int n, double k_n, const PerturbationSpec& spec,
                                    const StiffnessGains& gains) {
  const Leg support = n % 2 == 0 ? Leg::A : Leg::B;
  const Leg perturbed = spec.perturbed_leg();
  auto pick = [&](const LegStiffnessPair& p, Leg leg) {
    return leg == perturbed ? p.perturbed : p.other;
  };
  LegStiffnessPair at_ms = leg_stiffness_schedule(n, ScheduleEvent::MS, k_n, spec, gains);
  LegStiffnessPair at_td = leg_stiffness_schedule(n, ScheduleEvent::TD, k_n, spec, gains);
  return {pick(at_ms, support), pick(at_td, support), pick(at_td, other(support))};
}

/// Ground stiffness under each leg during step n. The perturbed leg stands on
/// soft ground from its TD in step n_p to its LO in step n_p + 1; it is in
/// swing for the rest of those steps, so a per-step assignment is exact.
inline TerrainParams ground_stiffness_for_step(int n, const PerturbationSpec& spec) {
  TerrainParams t = TerrainParams::compliant(spec.rigid_stiffness);
  if (n == spec.step || n == spec.step + 1)
    t.stiffness[index(spec.perturbed_leg())] = spec.low_stiffness;
  return t;
}

/// Ground stiffness under `leg` at time t, from the trial's step records.
inline double ground_stiffness_at(Leg leg, double t, std::span<const StepRecord> records,
                                  const PerturbationSpec& spec) {
  if (leg != spec.perturbed_leg()) return spec.rigid_stiffness;
  double start = std::numeric_limits<double>::infinity();
  double end = std::numeric_limits<double>::infinity();
  for (const StepRecord& r : records) {
    if (r.index == spec.step) start = r.event_times[1];
    if (r.index == spec.step + 1) end = r.event_times[3];
  }
  return (t >= start && t < end) ? spec.low_stiffness : spec.rigid_stiffness;
}

}  // namespace dslip
