#pragma once

// Event-driven simulation of one walking step, MS -> TD -> LH -> LO -> MS,
// and the stride map built on it.
//
// Frames: the simulation runs in world coordinates. Leg A is the right leg and
// leg B the left one, so a step supported on A lands B on the +y side. The
// midstance slice is stored in physical coordinates together with its support
// tag; side normalization (the A/B sign matrices) is applied by callers that
// need it (gait search, linearization, control).

#include <dslip/integrator.hpp>
#include <dslip/model.hpp>

#include <fmt/format.h>

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace dslip {

enum class GaitEventKind { MS, TD, LH, LO };

constexpr const char* name(GaitEventKind kind) {
  switch (kind) {
    case GaitEventKind::MS: return "MS";
    case GaitEventKind::TD: return "TD";
    case GaitEventKind::LH: return "LH";
    case GaitEventKind::LO: return "LO";
  }
  return "?";
}

struct GaitEvent {
  GaitEventKind kind = GaitEventKind::MS;
  double time = 0.0;
  HybridState state;
};

enum class Side { right, left };

/// Leg A walks on the right, leg B on the left.
constexpr Side side_of(Leg leg) { return leg == Leg::A ? Side::right : Side::left; }
constexpr double lateral_sign(Side side) { return side == Side::left ? 1.0 : -1.0; }

/// Midstance slice [x_c - x_f, y_c - y_f, z_c, xdot_c, ydot_c] relative to the
/// support foot, in physical (not side-normalized) coordinates.
struct MidstanceState {
  Vec5 x = Vec5::Zero();
  Leg support = Leg::A;
};

/// Touchdown angles [rad] and leg stiffness [N/m].
struct ControlInput {
  double theta = 0.0;
  double phi = 0.0;
  double stiffness = 0.0;

  Vec3 vector() const { return {theta, phi, stiffness}; }
  static ControlInput from_vector(const Vec3& v) { return {v[0], v[1], v[2]}; }
};

// A = diag(1,-1,1,1,-1), B = diag(-1,1,1).
inline Vec5 mirror_state(const Vec5& x) {
  Vec5 y = x;
  y[1] = -y[1];
  y[4] = -y[4];
  return y;
}

inline MidstanceState mirror_state(const MidstanceState& ms) {
  return {mirror_state(ms.x), other(ms.support)};
}

inline ControlInput mirror_control(const ControlInput& u) { return {-u.theta, u.phi, u.stiffness}; }

inline Vec3 mirror_control(const Vec3& u) { return {-u[0], u[1], u[2]}; }

/// Side-normalized slice: the support leg is treated as A.
inline Vec5 normalized(const MidstanceState& ms) {
  return ms.support == Leg::A ? ms.x : mirror_state(ms.x);
}

/// Touchdown angle to CoM height at which the swing leg lands.
inline double touchdown_height(double theta, double rest_length) {
  return rest_length * std::sin(theta);
}

/// Foot position of a leg touching down at rest length from a CoM at pc.
/// theta is the forward angle measured from the backward horizontal, phi the
/// lateral angle of the horizontal projection toward the landing side.
inline Vec3 touchdown_placement(const Vec3& pc, double theta, double phi, Side landing_side,
                                double rest_length) {
  if (!(theta > 0.0 && theta < kPi))
    throw DomainError(fmt::format("touchdown angle {} deg outside (0, 180)", rad2deg(theta)));
  double reach = -rest_length * std::cos(theta);
  return {pc.x() + reach * std::cos(phi),
          pc.y() + lateral_sign(landing_side) * reach * std::sin(phi),
          pc.z() - touchdown_height(theta, rest_length)};
}

enum class StepFailure {
  none,
  fell_below_height,
  leg_overcompressed,
  backward_motion,
  no_event,
  invalid_control,
  numeric,
};

constexpr const char* name(StepFailure f) {
  switch (f) {
    case StepFailure::none: return "none";
    case StepFailure::fell_below_height: return "fell_below_height";
    case StepFailure::leg_overcompressed: return "leg_overcompressed";
    case StepFailure::backward_motion: return "backward_motion";
    case StepFailure::no_event: return "no_event";
    case StepFailure::invalid_control: return "invalid_control";
    case StepFailure::numeric: return "numeric";
  }
  return "?";
}

/// Leg stiffness used during one step: the support leg from MS, both legs
/// from TD on (each held until its own lift-off or the next MS).
struct StepStiffness {
  double support_from_ms = 0.0;
  double support_from_td = 0.0;
  double landing_from_td = 0.0;

  static StepStiffness uniform(double k) { return {k, k, k}; }
  bool operator==(const StepStiffness&) const = default;
};

struct StepPlan {
  int index = 0;
  double theta = 0.0;  // rad, in (0, pi)
  double phi = 0.0;    // rad
  StepStiffness stiffness;
  TerrainParams terrain;  // ground under each leg for the whole step
};

struct StepRecord {
  int index = 0;
  MidstanceState ms_in;
  MidstanceState ms_out;
  ControlInput control;  // side-normalized
  StepStiffness stiffness;
  std::array<double, 2> ground_stiffness{};
  // MS, TD, LH, LO, MS; NaN for events not reached
  std::array<double, 5> event_times{};
  std::array<double, 2> min_foot_height{};  // per physical leg, over the step
  StepFailure outcome = StepFailure::none;

  bool completed() const { return outcome == StepFailure::none; }
  double penetration_depth(Leg leg) const {
    return std::max(0.0, -min_foot_height[dslip::index(leg)]);
  }
};

struct TrajectorySample {
  double time = 0.0;
  Vec3 com_position;
  Vec3 com_velocity;
  std::array<Vec3, 2> foot_position;
  std::array<double, 2> foot_vertical_velocity{};
  SupportMode support_mode = SupportMode::SS_A;
};

/// Collects samples on a fixed time grid k * period.
class TrajectoryRecorder {
 public:
  explicit TrajectoryRecorder(double period = 1e-3) : period_(period) {}

  double period() const { return period_; }
  const std::vector<TrajectorySample>& samples() const { return samples_; }

  double next_time() const { return static_cast<double>(next_) * period_; }
  void push(const TrajectorySample& s) {
    samples_.push_back(s);
    ++next_;
  }
  void skip_to(double t) {
    while (next_time() < t) ++next_;
  }

 private:
  double period_;
  long next_ = 0;
  std::vector<TrajectorySample> samples_;
};

struct SimOptions {
  IntegratorTolerances tolerances;
  double max_phase_time = 2.0;     // s
  double min_height_ratio = 0.4;   // fall when z_c < ratio * l0
  double min_length_ratio = 0.5;   // overcompressed when |l| < ratio * l0
  TrajectoryRecorder* recorder = nullptr;
};

struct StepOutcome {
  HybridState state;  // at the last reached event
  StepRecord record;
  std::vector<GaitEvent> events;
};

namespace detail {

inline constexpr std::size_t kStateSize = 10;
using Flat = std::array<double, kStateSize>;

// [pc(3), vc(3), zf_A, zfdot_A, zf_B, zfdot_B]
inline Flat to_flat(const HybridState& s) {
  return {s.com_position.x(), s.com_position.y(), s.com_position.z(),
          s.com_velocity.x(), s.com_velocity.y(), s.com_velocity.z(),
          s.leg(Leg::A).foot_position.z(), s.leg(Leg::A).foot_vertical_velocity,
          s.leg(Leg::B).foot_position.z(), s.leg(Leg::B).foot_vertical_velocity};
}

inline void from_flat(const Flat& x, double t, HybridState& s) {
  s.com_position = {x[0], x[1], x[2]};
  s.com_velocity = {x[3], x[4], x[5]};
  s.leg(Leg::A).foot_position.z() = x[6];
  s.leg(Leg::A).foot_vertical_velocity = x[7];
  s.leg(Leg::B).foot_position.z() = x[8];
  s.leg(Leg::B).foot_vertical_velocity = x[9];
  s.time = t;
}

inline Vec3 com(const Flat& x) { return {x[0], x[1], x[2]}; }
inline std::size_t foot_z(Leg l) { return 6 + 2 * index(l); }

// Dynamics of one support phase with frozen leg/ground parameters.
struct PhaseDynamics {
  const ModelParams* params = nullptr;
  bool compliant = false;
  std::array<bool, 2> stance{};
  std::array<double, 2> foot_x{}, foot_y{};
  std::array<double, 2> stiffness{};
  std::array<GroundPatch, 2> ground{};

  Vec3 foot(const Flat& x, Leg l) const {
    return {foot_x[index(l)], foot_y[index(l)], compliant ? x[foot_z(l)] : 0.0};
  }
  double leg_length(const Flat& x, Leg l) const { return (com(x) - foot(x, l)).norm(); }

  Flat operator()(const Flat& x, double /*t*/) const {
    Flat dx{};
    Vec3 force = params->body_mass * params->gravity;
    for (Leg l : {Leg::A, Leg::B}) {
      std::size_t i = index(l);
      if (!stance[i]) continue;
      Vec3 fs = spring_force(com(x) - foot(x, l), params->rest_length, stiffness[i]);
      force += fs;
      if (compliant) {
        std::size_t zi = foot_z(l);
        double fg = ground_force(x[zi], x[zi + 1], ground[i]);
        dx[zi] = x[zi + 1];
        dx[zi + 1] = (fg - fs.z() + params->foot_mass * params->gravity.z()) / params->foot_mass;
      }
    }
    Vec3 acc = force / params->body_mass;
    dx[0] = x[3];
    dx[1] = x[4];
    dx[2] = x[5];
    dx[3] = acc.x();
    dx[4] = acc.y();
    dx[5] = acc.z();
    return dx;
  }
};

enum SurfaceId : int {
  kTarget = 0,
  kFell,
  kOvercompressedA,
  kOvercompressedB,
};

}  // namespace detail

/// Static penetration of a stance foot that balances the spring and its own
/// weight on compliant ground (zero foot velocity).
inline double equilibrium_foot_height(const Vec3& pc, const Vec3& foot_xy, double leg_stiffness,
                                      const GroundPatch& ground, const ModelParams& params) {
  double z = 0.0;
  for (int it = 0; it < 100; ++it) {
    Vec3 foot{foot_xy.x(), foot_xy.y(), z};
    Vec3 fs = spring_force(pc - foot, params.rest_length, leg_stiffness);
    double load = fs.z() - params.foot_mass * params.gravity.z();
    double znew = load > 0.0 ? -std::pow(load / ground.stiffness, 1.0 / ground.exponent) : 0.0;
    if (std::abs(znew - z) < 1e-15) {
      z = znew;
      break;
    }
    z = znew;
  }
  return z;
}

/// Hybrid state at midstance with the support foot at the origin of the
/// horizontal plane. On compliant ground the foot sits at its static
/// penetration unless foot_height is given.
inline HybridState midstance_hybrid_state(const MidstanceState& ms, double support_stiffness,
                                          const TerrainParams& terrain, const ModelParams& params,
                                          std::optional<double> foot_height = std::nullopt) {
  HybridState s;
  s.com_position = {ms.x[0], ms.x[1], ms.x[2]};
  s.com_velocity = {ms.x[3], ms.x[4], 0.0};
  LegState& sup = s.leg(ms.support);
  sup.phase = LegPhase::stance;
  sup.stiffness = support_stiffness;
  sup.foot_position = Vec3::Zero();
  if (!terrain.is_rigid()) {
    sup.foot_position.z() =
        foot_height ? *foot_height
                    : equilibrium_foot_height(s.com_position, Vec3::Zero(), support_stiffness,
                                              terrain.patch(ms.support, params), params);
  }
  LegState& swing = s.leg(other(ms.support));
  swing.phase = LegPhase::swing;
  swing.stiffness = support_stiffness;
  s.support_mode = single_support(ms.support);
  return s;
}

inline MidstanceState extract_midstance(const HybridState& s, Leg support) {
  const Vec3& f = s.leg(support).foot_position;
  MidstanceState ms;
  ms.support = support;
  ms.x << s.com_position.x() - f.x(), s.com_position.y() - f.y(), s.com_position.z(),
      s.com_velocity.x(), s.com_velocity.y();
  return ms;
}

struct PhaseResult {
  std::optional<GaitEvent> event;
  StepFailure failure = StepFailure::none;
  HybridState end_state;
};

class StepSimulator {
 public:
  StepSimulator(const ModelParams& params, const SimOptions& options)
      : params_(params), options_(options) {}

  /// Integrates from `state` until the `target` surface is crossed or a
  /// failure surface fires. The phase follows from the support mode; `support`
  /// is the leg that started the step, `theta` sets the TD threshold height.
  PhaseResult integrate_phase(const HybridState& state, Leg support, GaitEventKind target,
                              double theta, const TerrainParams& terrain,
                              std::array<double, 2>& min_foot_height) const {
    using namespace detail;
    const double l0 = params_.rest_length;
    const double z_th = touchdown_height(theta, l0);
    const Leg landing = other(support);

    PhaseDynamics dyn;
    dyn.params = &params_;
    dyn.compliant = !terrain.is_rigid();
    for (Leg l : {Leg::A, Leg::B}) {
      const LegState& leg = state.leg(l);
      dyn.stance[index(l)] = leg.in_stance();
      dyn.foot_x[index(l)] = leg.foot_position.x();
      dyn.foot_y[index(l)] = leg.foot_position.y();
      dyn.stiffness[index(l)] = leg.stiffness;
      dyn.ground[index(l)] = terrain.patch(l, params_);
    }

    std::vector<Surface<kStateSize>> surfaces;
    Surface<kStateSize> goal;
    goal.id = kTarget;
    switch (target) {
      case GaitEventKind::TD:
        goal.value = [z_th](const Flat& x) { return x[2] - z_th; };
        goal.direction = CrossingDirection::falling;
        goal.guard = [&dyn, l0, support](const Flat& x) {
          return x[5] < 0.0 && dyn.leg_length(x, support) <= l0;
        };
        break;
      case GaitEventKind::LH:
        goal.value = [](const Flat& x) { return x[5]; };
        goal.direction = CrossingDirection::rising;
        goal.guard = [&dyn, z_th, l0, support](const Flat& x) {
          return x[2] < z_th && dyn.leg_length(x, support) <= l0;
        };
        break;
      case GaitEventKind::LO:
        goal.value = [&dyn, l0, support](const Flat& x) { return dyn.leg_length(x, support) - l0; };
        goal.direction = CrossingDirection::rising;
        goal.guard = [](const Flat& x) { return x[5] > 0.0; };
        break;
      case GaitEventKind::MS:
        goal.value = [](const Flat& x) { return x[5]; };
        goal.direction = CrossingDirection::falling;
        // z_c > z_TH is checked against the touchdown angle chosen at this
        // midstance, i.e. by the TD surface of the next step.
        goal.guard = [&dyn, l0, landing](const Flat& x) { return dyn.leg_length(x, landing) < l0; };
        break;
    }
    surfaces.push_back(goal);

    const double min_height = options_.min_height_ratio * l0;
    surfaces.push_back({kFell, [min_height](const Flat& x) { return x[2] - min_height; },
                        CrossingDirection::falling, {}});
    const double min_len = options_.min_length_ratio * l0;
    for (Leg l : {Leg::A, Leg::B}) {
      if (!dyn.stance[index(l)]) continue;
      surfaces.push_back({l == Leg::A ? kOvercompressedA : kOvercompressedB,
                          [&dyn, l, min_len](const Flat& x) { return dyn.leg_length(x, l) - min_len; },
                          CrossingDirection::falling, {}});
    }

    auto on_step = [&](const DenseStep<kStateSize>& step) {
      if (dyn.compliant) track_foot_minimum(step, dyn, min_foot_height);
      if (options_.recorder) record(step, state, *options_.recorder);
    };

    const Flat x0 = to_flat(state);
    IntegrationOutcome<kStateSize> out;
    PhaseResult result;
    result.end_state = state;
    try {
      out = integrate_to_event<kStateSize>(dyn, x0, state.time,
                                           state.time + options_.max_phase_time, surfaces,
                                           options_.tolerances, on_step);
    } catch (const NumericError&) {
      result.failure = StepFailure::numeric;
      return result;
    } catch (const DomainError&) {
      result.failure = StepFailure::numeric;
      return result;
    }
    from_flat(out.end_state, out.end_time, result.end_state);

    using Status = IntegrationOutcome<kStateSize>::Status;
    if (out.status == Status::timeout) {
      result.failure = StepFailure::no_event;
      return result;
    }
    if (out.status == Status::rejected_event) {
      result.failure = StepFailure::numeric;
      return result;
    }
    switch (out.crossing.id) {
      case kTarget: break;
      case kFell: result.failure = StepFailure::fell_below_height; return result;
      case kOvercompressedA:
      case kOvercompressedB: result.failure = StepFailure::leg_overcompressed; return result;
      default: result.failure = StepFailure::numeric; return result;
    }
    result.event = GaitEvent{target, out.end_time, result.end_state};
    return result;
  }

  /// Simulates from a midstance state through TD, LH, LO to the next MS (or
  /// stops early after `stop_after`).
  StepOutcome simulate_step(const HybridState& ms_state, Leg support, const StepPlan& plan,
                            GaitEventKind stop_after = GaitEventKind::MS) const {
    StepOutcome out;
    StepRecord& rec = out.record;
    rec.index = plan.index;
    rec.ms_in = extract_midstance(ms_state, support);
    rec.control = {plan.theta, plan.phi, plan.stiffness.support_from_ms};
    rec.stiffness = plan.stiffness;
    rec.ground_stiffness = plan.terrain.stiffness;
    rec.event_times.fill(std::numeric_limits<double>::quiet_NaN());
    rec.event_times[0] = ms_state.time;
    for (Leg l : {Leg::A, Leg::B})
      rec.min_foot_height[index(l)] = ms_state.leg(l).in_stance()
                                          ? ms_state.leg(l).foot_position.z()
                                          : std::numeric_limits<double>::infinity();

    const Leg landing = other(support);
    HybridState s = ms_state;
    s.leg(support).stiffness = plan.stiffness.support_from_ms;
    out.state = s;
    out.events.push_back({GaitEventKind::MS, s.time, s});

    if (!(plan.theta > 0.0 && plan.theta < kPi) || !(plan.stiffness.support_from_ms > 0.0) ||
        !(plan.stiffness.support_from_td > 0.0) || !(plan.stiffness.landing_from_td > 0.0)) {
      rec.outcome = StepFailure::invalid_control;
      return out;
    }

    auto run = [&](GaitEventKind target, std::size_t slot) {
      PhaseResult r = integrate_phase(s, support, target, plan.theta, plan.terrain,
                                      rec.min_foot_height);
      s = r.end_state;
      out.state = s;
      if (!r.event) {
        rec.outcome = r.failure;
        return false;
      }
      rec.event_times[slot] = r.event->time;
      return true;
    };

    // MS -> TD
    if (!run(GaitEventKind::TD, 1)) return finish(out);
    {
      LegState& land = s.leg(landing);
      land.foot_position = touchdown_placement(s.com_position, plan.theta, plan.phi,
                                               side_of(landing), params_.rest_length);
      land.foot_position.z() = 0.0;
      land.foot_vertical_velocity = 0.0;
      land.phase = LegPhase::stance;
      land.stiffness = plan.stiffness.landing_from_td;
      s.leg(support).stiffness = plan.stiffness.support_from_td;
      s.support_mode = SupportMode::DS;
      if (!plan.terrain.is_rigid())
        rec.min_foot_height[index(landing)] = std::min(rec.min_foot_height[index(landing)], 0.0);
      else
        rec.min_foot_height[index(landing)] = 0.0;
      out.state = s;
      out.events.push_back({GaitEventKind::TD, s.time, s});
    }
    if (stop_after == GaitEventKind::TD) return finish(out);

    // TD -> LH
    if (!run(GaitEventKind::LH, 2)) return finish(out);
    out.events.push_back({GaitEventKind::LH, s.time, s});
    if (stop_after == GaitEventKind::LH) return finish(out);

    // LH -> LO
    if (!run(GaitEventKind::LO, 3)) return finish(out);
    s.leg(support).phase = LegPhase::swing;
    s.leg(support).foot_vertical_velocity = 0.0;
    s.support_mode = single_support(landing);
    out.state = s;
    out.events.push_back({GaitEventKind::LO, s.time, s});
    if (stop_after == GaitEventKind::LO) return finish(out);

    // LO -> MS
    if (!run(GaitEventKind::MS, 4)) return finish(out);
    out.events.push_back({GaitEventKind::MS, s.time, s});
    if (!(s.com_velocity.x() > 0.0)) rec.outcome = StepFailure::backward_motion;
    return finish(out);
  }

 private:
  static StepOutcome& finish(StepOutcome& out) {
    const Leg support = out.record.ms_in.support;
    const Leg next = other(support);
    if (out.record.completed() && out.events.back().kind == GaitEventKind::MS &&
        out.events.size() == 5)
      out.record.ms_out = extract_midstance(out.state, next);
    else
      out.record.ms_out = extract_midstance(out.state, support);
    for (double& h : out.record.min_foot_height)
      if (!std::isfinite(h)) h = 0.0;
    return out;
  }

  static void track_foot_minimum(const DenseStep<detail::kStateSize>& step,
                                 const detail::PhaseDynamics& dyn,
                                 std::array<double, 2>& min_height) {
    for (Leg l : {Leg::A, Leg::B}) {
      std::size_t i = index(l);
      if (!dyn.stance[i]) continue;
      std::size_t zi = detail::foot_z(l);
      auto xa = step.state_at(step.t0);
      auto xb = step.state_at(step.t1);
      double m = std::min(xa[zi], xb[zi]);
      if (xa[zi + 1] < 0.0 && xb[zi + 1] > 0.0 && step.t1 - step.t0 > 0.0) {
        auto vel = [&](double t) { return step.state_at(t)[zi + 1]; };
        boost::uintmax_t iters = 100;
        auto stop = [](double a, double b) { return std::abs(b - a) <= 1e-12; };
        auto root = boost::math::tools::toms748_solve(vel, step.t0, step.t1, xa[zi + 1],
                                                      xb[zi + 1], stop, iters);
        m = std::min(m, step.state_at(0.5 * (root.first + root.second))[zi]);
      }
      min_height[i] = std::min(min_height[i], m);
    }
  }

  static void record(const DenseStep<detail::kStateSize>& step, const HybridState& phase_start,
                     TrajectoryRecorder& rec) {
    HybridState s = phase_start;
    while (rec.next_time() <= step.t1) {
      double t = rec.next_time();
      if (t < step.t0) {
        rec.skip_to(step.t0);
        continue;
      }
      detail::from_flat(step.state_at(t), t, s);
      TrajectorySample sample;
      sample.time = t;
      sample.com_position = s.com_position;
      sample.com_velocity = s.com_velocity;
      for (Leg l : {Leg::A, Leg::B}) {
        sample.foot_position[index(l)] = s.leg(l).foot_position;
        sample.foot_vertical_velocity[index(l)] = s.leg(l).foot_vertical_velocity;
      }
      sample.support_mode = s.support_mode;
      rec.push(sample);
    }
  }

  ModelParams params_;
  SimOptions options_;
};

struct StrideResult {
  MidstanceState next;
  StepRecord record;
  HybridState end_state;
};

/// The stride map: next midstance slice from the current one and the step
/// controls. The control is in physical convention (theta negated on steps
/// supported by leg B); `stiffness` overrides the uniform u.stiffness.
inline StrideResult stride_map(const MidstanceState& x, const ControlInput& u,
                               const TerrainParams& terrain, const ModelParams& params,
                               const SimOptions& options = {},
                               std::optional<StepStiffness> stiffness = std::nullopt,
                               std::optional<double> support_foot_height = std::nullopt) {
  ControlInput un = x.support == Leg::A ? u : mirror_control(u);
  StepPlan plan;
  plan.theta = un.theta;
  plan.phi = un.phi;
  plan.stiffness = stiffness ? *stiffness : StepStiffness::uniform(un.stiffness);
  plan.terrain = terrain;
  HybridState s0 = midstance_hybrid_state(x, plan.stiffness.support_from_ms, terrain, params,
                                          support_foot_height);
  StepSimulator sim(params, options);
  StepOutcome out = sim.simulate_step(s0, x.support, plan);
  return {out.record.ms_out, out.record, out.state};
}

}  // namespace dslip
