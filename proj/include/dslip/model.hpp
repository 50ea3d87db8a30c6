#pragma once

// Force and acceleration evaluations for the 3D Dual-SLIP biped on rigid and
// Hunt-Crossley compliant ground. Everything here is a pure function.

#include <dslip/types.hpp>

#include <cmath>
#include <fmt/format.h>

namespace dslip {

struct ModelParams {
  double body_mass = 80.0;      // m [kg]
  double rest_length = 1.0;     // l0 [m]
  double foot_mass = 1.0;       // mf [kg], per leg
  Vec3 gravity{0.0, 0.0, -9.81};
  double contact_exponent = 1.5;  // h, Hertzian non-adhesive contact
  double damping_coeff = 0.2;     // ca

  void validate() const {
    if (!(body_mass > 0.0)) throw ConfigError("body_mass must be > 0");
    if (!(rest_length > 0.0)) throw ConfigError("rest_length must be > 0");
    if (!(foot_mass > 0.0)) throw ConfigError("foot_mass must be > 0");
    if (!(foot_mass < body_mass))
      throw ConfigError("foot_mass must be much smaller than body_mass");
    if (!(contact_exponent > 0.0)) throw ConfigError("contact_exponent must be > 0");
    if (!(damping_coeff >= 0.0)) throw ConfigError("damping_coeff must be >= 0");
  }
};

/// Ground stiffness the compliant model treats as equivalent to rigid ground.
inline constexpr double kRigidEquivalentStiffness = 50.0e6;

enum class GroundKind { rigid, compliant };

/// Contact law parameters under one foot.
struct GroundPatch {
  double stiffness = kRigidEquivalentStiffness;  // kg [N/m^h]
  double damping = 0.0;                          // bg
  double exponent = 1.5;                         // h
};

/// Hunt-Crossley damping tied to stiffness: bg = 1.5 * ca * kg.
inline double hunt_crossley_damping(double stiffness, double damping_coeff) {
  return 1.5 * damping_coeff * stiffness;
}

struct TerrainParams {
  GroundKind kind = GroundKind::rigid;
  std::array<double, 2> stiffness{kRigidEquivalentStiffness, kRigidEquivalentStiffness};

  static TerrainParams rigid() { return {}; }
  static TerrainParams compliant(double kg) { return {GroundKind::compliant, {kg, kg}}; }
  static TerrainParams compliant(double kg_a, double kg_b) {
    return {GroundKind::compliant, {kg_a, kg_b}};
  }

  bool is_rigid() const { return kind == GroundKind::rigid; }

  GroundPatch patch(Leg leg, const ModelParams& params) const {
    double kg = stiffness[index(leg)];
    return {kg, hunt_crossley_damping(kg, params.damping_coeff), params.contact_exponent};
  }

  void validate() const {
    for (double kg : stiffness)
      if (!(kg > 0.0)) throw ConfigError(fmt::format("ground stiffness must be > 0, got {}", kg));
  }
};

struct LegState {
  Vec3 foot_position = Vec3::Zero();
  double foot_vertical_velocity = 0.0;
  double stiffness = 0.0;  // k_leg [N/m]
  LegPhase phase = LegPhase::swing;

  bool in_stance() const { return phase == LegPhase::stance; }
};

struct HybridState {
  Vec3 com_position = Vec3::Zero();
  Vec3 com_velocity = Vec3::Zero();
  std::array<LegState, 2> legs{};
  SupportMode support_mode = SupportMode::SS_A;
  double time = 0.0;

  LegState& leg(Leg l) { return legs[index(l)]; }
  const LegState& leg(Leg l) const { return legs[index(l)]; }

  Vec3 leg_vector(Leg l) const { return com_position - leg(l).foot_position; }

  bool consistent() const {
    bool a = leg(Leg::A).in_stance(), b = leg(Leg::B).in_stance();
    switch (support_mode) {
      case SupportMode::SS_A: return a && !b;
      case SupportMode::SS_B: return b && !a;
      case SupportMode::DS: return a && b;
    }
    return false;
  }
};

/// Spring force on the point mass from a leg with vector l (foot to CoM).
inline Vec3 spring_force(const Vec3& leg_vector, double rest_length, double stiffness) {
  double len = leg_vector.norm();
  if (!(len > 0.0)) throw DomainError("spring_force: zero-length leg vector");
  return stiffness * (rest_length - len) * (leg_vector / len);
}

/// Vertical Hunt-Crossley interaction force on a foot at height zf moving at
/// zf_dot. Both terms use the penetration magnitude; the result never pulls.
inline double ground_force(double zf, double zf_dot, const GroundPatch& ground) {
  if (zf >= 0.0) return 0.0;
  double depth_h = std::pow(-zf, ground.exponent);
  double force = ground.stiffness * depth_h + ground.damping * (-zf_dot) * depth_h;
  return force > 0.0 ? force : 0.0;
}

/// CoM acceleration. Legs in swing contribute nothing.
inline Vec3 com_accel(const HybridState& state, const ModelParams& params) {
  if (!state.consistent()) throw DomainError("com_accel: support mode inconsistent with leg phases");
  Vec3 force = params.body_mass * params.gravity;
  for (Leg l : {Leg::A, Leg::B}) {
    const LegState& leg = state.leg(l);
    if (leg.in_stance())
      force += spring_force(state.leg_vector(l), params.rest_length, leg.stiffness);
  }
  return force / params.body_mass;
}

/// Vertical acceleration of a stance foot mass. spring_force_z is the vertical
/// component of the spring force acting on the CoM; the foot sees its negative.
inline double foot_accel(const LegState& leg, double spring_force_z, double ground_force_z,
                         const ModelParams& params) {
  if (!(params.foot_mass > 0.0)) throw ConfigError("foot_accel: foot_mass must be > 0");
  if (!leg.in_stance()) throw DomainError("foot_accel: leg is in swing");
  return (ground_force_z - spring_force_z + params.foot_mass * params.gravity.z()) /
         params.foot_mass;
}

/// Total mechanical energy of the rigid single-support system (feet massless).
inline double rigid_single_support_energy(const HybridState& state, Leg support,
                                          const ModelParams& params) {
  double m = params.body_mass;
  double stretch = params.rest_length - state.leg_vector(support).norm();
  return 0.5 * m * state.com_velocity.squaredNorm() -
         m * params.gravity.z() * state.com_position.z() +
         0.5 * state.leg(support).stiffness * stretch * stretch;
}

}  // namespace dslip
