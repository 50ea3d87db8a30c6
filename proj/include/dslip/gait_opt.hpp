#pragma once

// Quarter-period search for periodic, left-right symmetric walking gaits.
//
// From a midstance state with leg A in support, the dynamics are integrated to
// the first lowest-height event. The gait is symmetric when the CoM ground
// projection at that instant lies midway between the two feet; the two
// horizontal midpoint offsets form the residual. A damped least-squares
// (Levenberg-Marquardt) iteration drives them to zero over (z0, theta, phi, k).

#include <dslip/hybrid_sim.hpp>

#include <fmt/format.h>

#include <array>
#include <cmath>
#include <optional>

namespace dslip {

struct SearchVariable {
  double seed = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool fixed = false;  // held at seed
};

struct GaitSearchSpec {
  double forward_velocity = 1.0;  // xdot_{0,d} [m/s]
  double forward_offset = 0.0;    // x_{0,d} [m]
  double lateral_offset = 0.05;   // y_{0,d} [m], for l0 = 1 m
  double lateral_velocity = 0.0;  // ydot_{0,d} [m/s]

  SearchVariable height{0.98, 0.9, 1.0};
  SearchVariable theta{deg2rad(105.0), deg2rad(95.0), deg2rad(125.0)};
  SearchVariable phi{deg2rad(10.0), deg2rad(2.0), deg2rad(25.0)};
  SearchVariable stiffness{15000.0, 5000.0, 50000.0};

  double residual_tolerance = 1e-10;  // m
  int max_iterations = 200;
  double fd_relative_step = 1e-6;
  double periodicity_tolerance = 1e-3;

  std::array<SearchVariable, 4> variables() const { return {height, theta, phi, stiffness}; }

  void validate() const {
    for (const auto& v : variables()) {
      if (!(v.lower < v.upper)) throw ConfigError("gait search: lower bound must be < upper bound");
      if (!(v.seed >= v.lower && v.seed <= v.upper))
        throw ConfigError(fmt::format("gait search: seed {} outside [{}, {}]", v.seed, v.lower,
                                      v.upper));
    }
    if (!(forward_velocity > 0.0)) throw ConfigError("gait search: forward_velocity must be > 0");
  }
};

/// Minimum ground stiffness for which the quarter-period symmetry is usable.
inline constexpr double kMinGaitSearchStiffness = 1.0e6;

struct PeriodicGait {
  MidstanceState x0;  // support leg A
  ControlInput u0;
  double residual_norm = 0.0;
  double forward_velocity = 0.0;
  double periodicity_error = 0.0;  // max |f(x0, u0) - A x0|
  bool verified = false;
  int iterations = 0;
};

struct InfeasiblePoint : Error {
  using Error::Error;
};

struct GaitSearchError : Error {
  GaitSearchError(const std::string& what, std::array<double, 4> best, double residual)
      : Error(what), best_iterate(best), best_residual(residual) {}
  std::array<double, 4> best_iterate;  // z0, theta, phi, k
  double best_residual;
};

inline MidstanceState search_midstance(double z0, const GaitSearchSpec& spec) {
  MidstanceState ms;
  ms.support = Leg::A;
  ms.x << spec.forward_offset, spec.lateral_offset, z0, spec.forward_velocity,
      spec.lateral_velocity;
  return ms;
}

/// Horizontal offset of the CoM at the first lowest-height event from the
/// midpoint of the two feet. Throws InfeasiblePoint if LH is not reached.
inline Eigen::Vector2d quarter_period_residual(double z0, const ControlInput& u0,
                                               const GaitSearchSpec& spec,
                                               const TerrainParams& terrain,
                                               const ModelParams& params,
                                               const SimOptions& options = {}) {
  if (!(z0 > touchdown_height(u0.theta, params.rest_length)))
    throw InfeasiblePoint("midstance height does not exceed the touchdown height");
  if (!(z0 <= params.rest_length)) throw InfeasiblePoint("midstance height exceeds rest length");

  MidstanceState ms = search_midstance(z0, spec);
  HybridState s0 = midstance_hybrid_state(ms, u0.stiffness, terrain, params);
  StepPlan plan;
  plan.theta = u0.theta;
  plan.phi = u0.phi;
  plan.stiffness = StepStiffness::uniform(u0.stiffness);
  plan.terrain = terrain;
  StepSimulator sim(params, options);
  StepOutcome out = sim.simulate_step(s0, Leg::A, plan, GaitEventKind::LH);
  if (!out.record.completed() || out.events.back().kind != GaitEventKind::LH)
    throw InfeasiblePoint(fmt::format("lowest height not reached ({})", name(out.record.outcome)));

  const HybridState& lh = out.state;
  Vec3 fa = lh.leg(Leg::A).foot_position;
  Vec3 fb = lh.leg(Leg::B).foot_position;
  return {0.5 * (fa.x() + fb.x()) - lh.com_position.x(),
          0.5 * (fa.y() + fb.y()) - lh.com_position.y()};
}

/// max_i |f(x0, u0) - A x0|_i on the given terrain.
inline double periodicity_error(const MidstanceState& x0, const ControlInput& u0,
                                const TerrainParams& terrain, const ModelParams& params,
                                const SimOptions& options = {}) {
  StrideResult r = stride_map(x0, u0, terrain, params, options);
  if (!r.record.completed()) return std::numeric_limits<double>::infinity();
  return (r.next.x - mirror_state(x0.x)).cwiseAbs().maxCoeff();
}

namespace detail {

struct LmProblem {
  const GaitSearchSpec& spec;
  const TerrainParams& terrain;
  const ModelParams& params;
  const SimOptions& options;
  std::array<SearchVariable, 4> vars;

  // q holds all four variables in physical units.
  std::optional<Eigen::Vector2d> residual(const Eigen::Vector4d& q) const {
    try {
      return quarter_period_residual(q[0], ControlInput{q[1], q[2], q[3]}, spec, terrain, params,
                                     options);
    } catch (const InfeasiblePoint&) {
      return std::nullopt;
    } catch (const DomainError&) {
      return std::nullopt;
    }
  }

  Eigen::Vector4d clamp(Eigen::Vector4d q) const {
    for (int i = 0; i < 4; ++i) q[i] = std::clamp(q[i], vars[i].lower, vars[i].upper);
    return q;
  }
};

}  // namespace detail

/// Levenberg-Marquardt search for a periodic gait. Variables are scaled by
/// their bound widths; fixed variables are held at their seeds.
inline PeriodicGait find_periodic_gait(const GaitSearchSpec& spec, const TerrainParams& terrain,
                                       const ModelParams& params, const SimOptions& options = {}) {
  spec.validate();
  params.validate();
  if (!terrain.is_rigid() &&
      std::min(terrain.stiffness[0], terrain.stiffness[1]) < kMinGaitSearchStiffness)
    throw ConfigError(fmt::format(
        "gait search needs ground stiffness >= {:g} N/m: the quarter-period symmetry does not "
        "hold on softer ground",
        kMinGaitSearchStiffness));

  detail::LmProblem prob{spec, terrain, params, options, spec.variables()};
  Eigen::Vector4d scale;
  for (int i = 0; i < 4; ++i) scale[i] = prob.vars[i].fixed ? 0.0 : prob.vars[i].upper - prob.vars[i].lower;

  Eigen::Vector4d q;
  for (int i = 0; i < 4; ++i) q[i] = prob.vars[i].seed;
  auto r0 = prob.residual(q);
  if (!r0) throw GaitSearchError("gait search: seed is infeasible", {q[0], q[1], q[2], q[3]}, INFINITY);
  Eigen::Vector2d r = *r0;
  double cost = r.squaredNorm();

  double lambda = 1e-3;
  int it = 0;
  for (; it < spec.max_iterations && std::sqrt(cost) > spec.residual_tolerance; ++it) {
    // Jacobian in scaled coordinates, forward differences.
    Eigen::Matrix<double, 2, 4> J = Eigen::Matrix<double, 2, 4>::Zero();
    for (int j = 0; j < 4; ++j) {
      if (scale[j] == 0.0) continue;
      double h = spec.fd_relative_step * std::max(std::abs(q[j]), 1.0);
      Eigen::Vector4d qp = q;
      qp[j] += h;
      if (qp[j] > prob.vars[j].upper) qp[j] = q[j] - h;
      auto rp = prob.residual(qp);
      if (!rp) continue;
      J.col(j) = (*rp - r) / (qp[j] - q[j]) * scale[j];
    }
    Eigen::Matrix4d JtJ = J.transpose() * J;
    Eigen::Vector4d g = J.transpose() * r;

    bool accepted = false;
    for (int tries = 0; tries < 30; ++tries) {
      Eigen::Matrix4d M = JtJ;
      for (int i = 0; i < 4; ++i) M(i, i) += lambda * (1.0 + JtJ(i, i)) + (scale[i] == 0.0 ? 1.0 : 0.0);
      Eigen::Vector4d step = -M.ldlt().solve(g);
      Eigen::Vector4d cand = prob.clamp(q + step.cwiseProduct(scale));
      auto rc = prob.residual(cand);
      if (rc && rc->squaredNorm() < cost) {
        q = cand;
        r = *rc;
        cost = r.squaredNorm();
        lambda = std::max(lambda * 0.1, 1e-12);
        accepted = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) break;
  }

  double res = std::sqrt(cost);
  if (!(res <= spec.residual_tolerance))
    throw GaitSearchError(fmt::format("gait search did not converge: residual {:.3e} m after {} "
                                      "iterations",
                                      res, it),
                          {q[0], q[1], q[2], q[3]}, res);

  PeriodicGait gait;
  gait.x0 = search_midstance(q[0], spec);
  gait.u0 = {q[1], q[2], q[3]};
  gait.residual_norm = res;
  gait.forward_velocity = spec.forward_velocity;
  gait.iterations = it;
  gait.periodicity_error = periodicity_error(gait.x0, gait.u0, terrain, params, options);
  gait.verified = gait.periodicity_error < spec.periodicity_tolerance;
  return gait;
}

/// The periodic gait reported for 1 m/s, m = 80 kg, l0 = 1 m on rigid ground.
inline PeriodicGait published_gait() {
  PeriodicGait g;
  g.x0.support = Leg::A;
  g.x0.x << 0.0, 0.05, 0.99, 1.0, 0.0;
  g.u0 = {deg2rad(107.26), deg2rad(10.94), 14164.54};
  g.forward_velocity = 1.0;
  return g;
}

}  // namespace dslip
