#pragma once

#include <Eigen/Dense>

#include <array>
#include <numbers>
#include <stdexcept>
#include <string>

namespace dslip {

using Vec3 = Eigen::Vector3d;
using Vec5 = Eigen::Matrix<double, 5, 1>;

// Error hierarchy. Trial failures (a biped that falls) are results, not
// errors; these are reserved for bad inputs and numerical breakdown.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DomainError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct NumericError : Error {
  using Error::Error;
};
struct SynthesisError : Error {
  using Error::Error;
};

enum class Leg { A = 0, B = 1 };

constexpr Leg other(Leg leg) { return leg == Leg::A ? Leg::B : Leg::A; }
constexpr std::size_t index(Leg leg) { return static_cast<std::size_t>(leg); }
constexpr const char* name(Leg leg) { return leg == Leg::A ? "A" : "B"; }

enum class LegPhase { swing, stance };

enum class SupportMode { SS_A, SS_B, DS };

constexpr const char* name(SupportMode mode) {
  switch (mode) {
    case SupportMode::SS_A: return "SS_A";
    case SupportMode::SS_B: return "SS_B";
    case SupportMode::DS: return "DS";
  }
  return "?";
}

constexpr SupportMode single_support(Leg leg) {
  return leg == Leg::A ? SupportMode::SS_A : SupportMode::SS_B;
}

inline constexpr double kPi = std::numbers::pi;
constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

}  // namespace dslip
