#pragma once

// Adaptive integration with event localization on the dense-output
// interpolant. The stepper is Dormand-Prince 5(4) from Boost.Odeint; crossing
// detection, bracketing and root refinement live here.

#include <dslip/types.hpp>

#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace dslip {

struct IntegratorTolerances {
  double relative = 1e-9;
  double absolute = 1e-9;
  double event_time = 1e-10;  // s
  double max_step = 2e-3;     // s; keeps a step from straddling two crossings
  double initial_step = 1e-5;
};

enum class CrossingDirection { rising, falling };

/// A scalar surface function g(x) = 0 with a crossing direction and an
/// optional guard evaluated at the localized point.
template <std::size_t N>
struct Surface {
  using State = std::array<double, N>;
  int id = 0;
  std::function<double(const State&)> value;
  CrossingDirection direction = CrossingDirection::falling;
  std::function<bool(const State&)> guard;  // empty: always accept
  bool stop_on_reject = false;  // a failed guard ends integration instead of being skipped
};

template <std::size_t N>
struct Crossing {
  int id = 0;
  bool accepted = true;
  double time = 0.0;
  std::array<double, N> state{};
};

/// View on the interpolant of the most recent accepted step.
template <std::size_t N>
struct DenseStep {
  double t0 = 0.0;
  double t1 = 0.0;
  std::function<std::array<double, N>(double)> state_at;
};

template <std::size_t N>
struct IntegrationOutcome {
  enum class Status { event, rejected_event, timeout };
  Status status = Status::timeout;
  Crossing<N> crossing;  // valid unless timeout
  double end_time = 0.0;
  std::array<double, N> end_state{};
};

namespace detail {

inline bool crossed(double g0, double g1, CrossingDirection dir) {
  return dir == CrossingDirection::falling ? (g0 > 0.0 && g1 <= 0.0) : (g0 < 0.0 && g1 >= 0.0);
}

}  // namespace detail

/// Integrates dx/dt = rhs(x, t) from (x0, t0) until the earliest crossing of
/// any surface, or until t_max. A crossing whose guard fails is skipped, or
/// ends integration with status rejected_event when the surface asks for it.
/// on_step sees every accepted step, clipped at the returned crossing.
template <std::size_t N, class Rhs>
IntegrationOutcome<N> integrate_to_event(
    Rhs&& rhs, const std::array<double, N>& x0, double t0, double t_max,
    std::span<const Surface<N>> surfaces, const IntegratorTolerances& tol,
    const std::function<void(const DenseStep<N>&)>& on_step = {}) {
  namespace odeint = boost::numeric::odeint;
  using State = std::array<double, N>;

  auto stepper = odeint::make_dense_output(tol.absolute, tol.relative, tol.max_step,
                                           odeint::runge_kutta_dopri5<State>());
  auto system = [&rhs](const State& x, State& dxdt, double t) { dxdt = rhs(x, t); };
  stepper.initialize(x0, t0, std::min(tol.initial_step, t_max - t0));

  std::vector<double> g_prev(surfaces.size());
  for (std::size_t i = 0; i < surfaces.size(); ++i) g_prev[i] = surfaces[i].value(x0);

  auto interpolate = [&stepper](double t) {
    State x;
    stepper.calc_state(t, x);
    return x;
  };

  IntegrationOutcome<N> out;
  std::vector<double> g_now(surfaces.size());
  while (stepper.current_time() < t_max) {
    std::pair<double, double> span;
    try {
      span = stepper.do_step(system);
    } catch (const std::exception& e) {
      throw NumericError(std::string("integrator step failed: ") + e.what());
    }
    auto [ta, tb] = span;
    const State& xb = stepper.current_state();
    for (double v : xb)
      if (!std::isfinite(v)) throw NumericError("integrator produced a non-finite state");

    // Earliest crossing inside [ta, tb].
    std::optional<Crossing<N>> first;
    for (std::size_t i = 0; i < surfaces.size(); ++i) {
      g_now[i] = surfaces[i].value(xb);
      if (!detail::crossed(g_prev[i], g_now[i], surfaces[i].direction)) continue;
      const auto& surf = surfaces[i];
      auto g = [&](double t) { return surf.value(interpolate(t)); };
      double lo = ta, hi = tb;
      double glo = g_prev[i], ghi = g_now[i];
      if (hi - lo > tol.event_time) {
        boost::uintmax_t iters = 200;
        auto stop = [&tol](double a, double b) { return std::abs(b - a) <= tol.event_time; };
        auto root = boost::math::tools::toms748_solve(g, lo, hi, glo, ghi, stop, iters);
        // post-crossing end of the bracket, so the next phase starts past the surface
        hi = root.second;
      }
      if (!first || hi < first->time) {
        Crossing<N> c;
        c.id = surf.id;
        c.time = hi;
        c.state = hi >= tb ? xb : interpolate(hi);
        c.accepted = !surf.guard || surf.guard(c.state);
        if (c.accepted || surf.stop_on_reject) first = c;
      }
    }

    if (first) {
      if (on_step) on_step(DenseStep<N>{ta, first->time, interpolate});
      out.status = first->accepted ? IntegrationOutcome<N>::Status::event
                                   : IntegrationOutcome<N>::Status::rejected_event;
      out.crossing = *first;
      out.end_time = first->time;
      out.end_state = first->state;
      return out;
    }
    if (on_step) on_step(DenseStep<N>{ta, tb, interpolate});
    g_prev = g_now;
  }
  out.status = IntegrationOutcome<N>::Status::timeout;
  out.end_time = stepper.current_time();
  out.end_state = stepper.current_state();
  return out;
}

}  // namespace dslip
