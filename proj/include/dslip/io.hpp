#pragma once

// Gait and controller files (YAML, full double precision) and the CSV
// outputs of a trial: 1 ms trajectory grid and one row per step.

#include <dslip/config.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

namespace dslip {

namespace detail {

inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  return fmt::format("{:.17g}", v);
}

template <class Vec>
std::string yaml_list(const Vec& v) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + num(v[i]);
  return s + "]";
}

template <class Mat>
std::string yaml_matrix(const Mat& m, const std::string& indent) {
  std::string s;
  for (Eigen::Index r = 0; r < m.rows(); ++r) s += "\n" + indent + "- " + yaml_list(m.row(r));
  return s;
}

template <class Mat>
Mat matrix_from(const ConfigSection& s, const std::string& key) {
  auto rows = s.matrix(key, Mat::RowsAtCompileTime, Mat::ColsAtCompileTime);
  Mat m;
  for (int r = 0; r < Mat::RowsAtCompileTime; ++r)
    for (int c = 0; c < Mat::ColsAtCompileTime; ++c) m(r, c) = rows[r][c];
  return m;
}

}  // namespace detail

inline void write_text(const std::filesystem::path& file, const std::string& text) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ConfigError(fmt::format("{}: cannot write file", file.string()));
  out << text;
  if (!out) throw ConfigError(fmt::format("{}: write failed", file.string()));
}

// ---- gait file ------------------------------------------------------------

inline std::string gait_yaml(const PeriodicGait& g, const std::string& indent = "") {
  using detail::num;
  const std::string& i = indent;
  std::string s;
  s += fmt::format("{}x0: {}  # x, y, z, xdot, ydot; leg A in support\n", i, detail::yaml_list(g.x0.x));
  s += fmt::format("{}theta: {}  # rad ({:.6f} deg)\n", i, num(g.u0.theta), rad2deg(g.u0.theta));
  s += fmt::format("{}phi: {}  # rad ({:.6f} deg)\n", i, num(g.u0.phi), rad2deg(g.u0.phi));
  s += fmt::format("{}stiffness: {}\n", i, num(g.u0.stiffness));
  s += fmt::format("{}forward_velocity: {}\n", i, num(g.forward_velocity));
  s += fmt::format("{}residual_norm: {}\n", i, num(g.residual_norm));
  s += fmt::format("{}periodicity_error: {}\n", i, num(g.periodicity_error));
  s += fmt::format("{}verified: {}\n", i, g.verified);
  s += fmt::format("{}iterations: {}\n", i, g.iterations);
  return s;
}

inline std::string gait_file_text(const PeriodicGait& g, const GaitSearchSpec& spec,
                                  const TerrainParams& terrain) {
  std::string s = "gait:\n" + gait_yaml(g, "  ");
  s += "search:\n";
  s += fmt::format("  terrain: {}\n", terrain.is_rigid() ? "rigid" : "compliant");
  if (!terrain.is_rigid()) s += fmt::format("  stiffness_ground: {}\n", detail::num(terrain.stiffness[0]));
  auto var = [&](const char* name, const SearchVariable& v, double unit) {
    s += fmt::format("  {}: {{seed: {}, lower: {}, upper: {}, fixed: {}}}\n", name,
                     detail::num(v.seed / unit), detail::num(v.lower / unit),
                     detail::num(v.upper / unit), v.fixed);
  };
  s += fmt::format("  forward_velocity: {}\n", detail::num(spec.forward_velocity));
  s += fmt::format("  lateral_offset: {}\n", detail::num(spec.lateral_offset));
  var("height", spec.height, 1.0);
  var("theta_deg", spec.theta, deg2rad(1.0));
  var("phi_deg", spec.phi, deg2rad(1.0));
  var("stiffness", spec.stiffness, 1.0);
  return s;
}

inline PeriodicGait parse_gait(const ConfigSection& s) {
  s.allow_only({"x0", "theta", "phi", "stiffness", "forward_velocity", "residual_norm",
                "periodicity_error", "verified", "iterations"});
  PeriodicGait g;
  auto x = s.doubles("x0", 5);
  g.x0.support = Leg::A;
  g.x0.x << x[0], x[1], x[2], x[3], x[4];
  g.u0.theta = s.get<double>("theta");
  g.u0.phi = s.get<double>("phi");
  g.u0.stiffness = s.get<double>("stiffness");
  if (!(g.u0.theta > 0.0 && g.u0.theta < kPi)) s.fail("'theta' must lie in (0, pi) rad");
  if (!(g.u0.stiffness > 0.0)) s.fail("'stiffness' must be > 0");
  g.forward_velocity = s.get_or("forward_velocity", x[3]);
  g.residual_norm = s.get_or("residual_norm", 0.0);
  g.periodicity_error = s.get_or("periodicity_error", 0.0);
  g.verified = s.get_or("verified", false);
  g.iterations = s.get_or("iterations", 0);
  return g;
}

inline PeriodicGait load_gait(const std::filesystem::path& file) {
  ConfigSection root = ConfigSection::load(file);
  root.allow_only({"gait", "search"});
  return parse_gait(root.section("gait"));
}

// ---- controller (gains) file ------------------------------------------------

struct ControllerFile {
  PeriodicGait gait;
  StrideLinearization linearization;
  LqrSolution lqr;
  std::string linearization_terrain = "compliant";
  double linearization_stiffness = kRigidEquivalentStiffness;
};

inline std::string controller_file_text(const ControllerFile& c) {
  using detail::num;
  using detail::yaml_matrix;
  std::string s = "gait:\n" + gait_yaml(c.gait, "  ");
  s += "linearization:\n";
  s += fmt::format("  terrain: {}\n", c.linearization_terrain);
  s += fmt::format("  stiffness: {}\n", num(c.linearization_stiffness));
  s += "  Jx:" + yaml_matrix(c.linearization.Jx, "    ") + "\n";
  s += "  Ju:" + yaml_matrix(c.linearization.Ju, "    ") + "\n";
  s += "lqr:\n";
  s += "  Q:" + yaml_matrix(c.lqr.Q, "    ") + "\n";
  s += "  R:" + yaml_matrix(c.lqr.R, "    ") + "\n";
  s += "  P:" + yaml_matrix(c.lqr.P, "    ") + "\n";
  s += "  K:" + yaml_matrix(c.lqr.K, "    ") + "\n";
  s += fmt::format("  spectral_radius: {}\n", num(c.lqr.spectral_radius));
  s += fmt::format("  dare_residual: {}\n", num(c.lqr.dare_residual));
  return s;
}

inline ControllerFile load_controller(const std::filesystem::path& file) {
  ConfigSection root = ConfigSection::load(file);
  root.allow_only({"gait", "linearization", "lqr"});
  ControllerFile c;
  c.gait = parse_gait(root.section("gait"));
  if (auto l = root.optional_section("linearization")) {
    l->allow_only({"terrain", "stiffness", "Jx", "Ju"});
    c.linearization_terrain = l->get_or<std::string>("terrain", "compliant");
    c.linearization_stiffness = l->get_or("stiffness", kRigidEquivalentStiffness);
    if (l->has("Jx")) c.linearization.Jx = detail::matrix_from<Mat5>(*l, "Jx");
    if (l->has("Ju")) c.linearization.Ju = detail::matrix_from<Mat53>(*l, "Ju");
  }
  ConfigSection q = root.section("lqr");
  q.allow_only({"Q", "R", "P", "K", "spectral_radius", "dare_residual"});
  c.lqr.K = detail::matrix_from<Mat35>(q, "K");
  if (!c.lqr.K.allFinite()) q.fail("'lqr.K' must be finite");
  if (q.has("Q")) c.lqr.Q = detail::matrix_from<Mat5>(q, "Q");
  if (q.has("R")) c.lqr.R = detail::matrix_from<Mat3>(q, "R");
  if (q.has("P")) c.lqr.P = detail::matrix_from<Mat5>(q, "P");
  c.lqr.spectral_radius = q.get_or("spectral_radius", 0.0);
  c.lqr.dare_residual = q.get_or("dare_residual", 0.0);
  c.linearization.x0 = c.gait.x0.x;
  c.linearization.u0 = c.gait.u0.vector();
  return c;
}

// ---- CSV outputs ------------------------------------------------------------

inline std::string trajectory_csv(const std::vector<TrajectorySample>& samples) {
  std::string s =
      "t,x,y,z,vx,vy,vz,foot_a_x,foot_a_y,foot_a_z,foot_a_zdot,foot_b_x,foot_b_y,foot_b_z,"
      "foot_b_zdot,support_mode\n";
  for (const auto& p : samples) {
    s += fmt::format("{:.4f},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g}", p.time,
                     p.com_position.x(), p.com_position.y(), p.com_position.z(),
                     p.com_velocity.x(), p.com_velocity.y(), p.com_velocity.z());
    for (int l = 0; l < 2; ++l)
      s += fmt::format(",{:.10g},{:.10g},{:.10g},{:.10g}", p.foot_position[l].x(),
                       p.foot_position[l].y(), p.foot_position[l].z(), p.foot_vertical_velocity[l]);
    s += fmt::format(",{}\n", name(p.support_mode));
  }
  return s;
}

inline std::string step_records_csv(const std::vector<StepRecord>& records) {
  std::string s =
      "step,support,x_in,y_in,z_in,xdot_in,ydot_in,x_out,y_out,z_out,xdot_out,ydot_out,"
      "theta,phi,k,k_support_ms,k_support_td,k_landing_td,kg_a,kg_b,t_ms,t_td,t_lh,t_lo,"
      "t_ms_next,min_zf_a,min_zf_b,outcome\n";
  auto g = [](double v) { return std::isnan(v) ? std::string("nan") : fmt::format("{:.10g}", v); };
  for (const auto& r : records) {
    s += fmt::format("{},{}", r.index, name(r.ms_in.support));
    for (int i = 0; i < 5; ++i) s += "," + g(r.ms_in.x[i]);
    for (int i = 0; i < 5; ++i) s += "," + g(r.completed() ? r.ms_out.x[i] : NAN);
    s += fmt::format(",{},{},{}", g(r.control.theta), g(r.control.phi), g(r.control.stiffness));
    s += fmt::format(",{},{},{}", g(r.stiffness.support_from_ms), g(r.stiffness.support_from_td),
                     g(r.stiffness.landing_from_td));
    s += fmt::format(",{},{}", g(r.ground_stiffness[0]), g(r.ground_stiffness[1]));
    for (double t : r.event_times) s += "," + g(t);
    s += fmt::format(",{},{},{}\n", g(r.min_foot_height[0]), g(r.min_foot_height[1]),
                     r.completed() ? "completed" : std::string("failed:") + name(r.outcome));
  }
  return s;
}

}  // namespace dslip
