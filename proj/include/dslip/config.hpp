#pragma once

// Experiment configuration: a YAML document with nested sections. Every
// value is checked on load; errors carry the file, line and column of the
// offending node.

#include <dslip/experiment.hpp>

#include <yaml-cpp/yaml.h>

#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace dslip {

/// A mapping node with its dotted path, for located error messages.
class ConfigSection {
 public:
  ConfigSection(YAML::Node node, std::string path, std::shared_ptr<const std::string> source)
      : node_(std::move(node)), path_(std::move(path)), source_(std::move(source)) {
    if (!node_.IsMap()) fail(node_, "expected a mapping");
  }

  static ConfigSection parse(const std::string& text, const std::string& source_name) {
    auto src = std::make_shared<const std::string>(source_name);
    YAML::Node root;
    try {
      root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
      throw ConfigError(fmt::format("{}:{}:{}: {}", *src, e.mark.line + 1, e.mark.column + 1, e.msg));
    }
    if (root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
    return ConfigSection(root, "", src);
  }

  static ConfigSection load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError(fmt::format("{}: cannot open file", file.string()));
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), file.string());
  }

  const std::string& source() const { return *source_; }
  const std::string& path() const { return path_; }

  bool has(const std::string& key) const { return static_cast<bool>(node_[key]); }

  template <class T>
  T get(const std::string& key) const {
    YAML::Node n = node_[key];
    if (!n) fail(node_, fmt::format("missing key '{}'", qualified(key)));
    return convert<T>(n, key);
  }

  template <class T>
  T get_or(const std::string& key, T fallback) const {
    YAML::Node n = node_[key];
    if (!n) return fallback;
    return convert<T>(n, key);
  }

  /// Value that must satisfy `pred`, with `what` describing the requirement.
  template <class T, class Pred>
  T get_checked(const std::string& key, T fallback, Pred pred, std::string_view what) const {
    T v = get_or<T>(key, fallback);
    if (!pred(v)) fail(node_[key] ? node_[key] : node_, fmt::format("'{}' {}", qualified(key), what));
    return v;
  }

  std::vector<double> doubles(const std::string& key, std::size_t expected = 0) const {
    YAML::Node n = node_[key];
    if (!n) fail(node_, fmt::format("missing key '{}'", qualified(key)));
    if (!n.IsSequence()) fail(n, fmt::format("'{}' must be a list", qualified(key)));
    if (expected != 0 && n.size() != expected)
      fail(n, fmt::format("'{}' must have {} entries, got {}", qualified(key), expected, n.size()));
    std::vector<double> out;
    for (const auto& item : n) out.push_back(convert<double>(item, key));
    return out;
  }

  std::vector<std::vector<double>> matrix(const std::string& key, std::size_t rows,
                                          std::size_t cols) const {
    YAML::Node n = node_[key];
    if (!n) fail(node_, fmt::format("missing key '{}'", qualified(key)));
    if (!n.IsSequence() || n.size() != rows)
      fail(n, fmt::format("'{}' must be a list of {} rows", qualified(key), rows));
    std::vector<std::vector<double>> out;
    for (const auto& row : n) {
      if (!row.IsSequence() || row.size() != cols)
        fail(row, fmt::format("'{}' rows must have {} entries", qualified(key), cols));
      std::vector<double> r;
      for (const auto& item : row) r.push_back(convert<double>(item, key));
      out.push_back(std::move(r));
    }
    return out;
  }

  ConfigSection section(const std::string& key) const {
    YAML::Node n = node_[key];
    if (!n) fail(node_, fmt::format("missing section '{}'", qualified(key)));
    return ConfigSection(n, qualified(key), source_);
  }

  std::optional<ConfigSection> optional_section(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return section(key);
  }

  /// Rejects keys outside `allowed`, pointing at the first unknown one.
  void allow_only(std::initializer_list<std::string_view> allowed) const {
    std::set<std::string_view> ok(allowed);
    for (const auto& kv : node_) {
      auto key = kv.first.as<std::string>();
      if (!ok.count(key)) fail(kv.first, fmt::format("unknown key '{}'", qualified(key)));
    }
  }

  /// Runs a validator and re-throws its ConfigError at this section's line.
  template <class F>
  void validated(F&& f) const {
    try {
      f();
    } catch (const ConfigError& e) {
      fail(node_, e.what());
    }
  }

  [[noreturn]] void fail(const YAML::Node& at, const std::string& msg) const {
    YAML::Mark m = at.Mark();
    if (m.is_null()) throw ConfigError(fmt::format("{}: {}", *source_, msg));
    throw ConfigError(fmt::format("{}:{}:{}: {}", *source_, m.line + 1, m.column + 1, msg));
  }

  [[noreturn]] void fail(const std::string& msg) const { fail(node_, msg); }

  std::string qualified(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  template <class T>
  T convert(const YAML::Node& n, const std::string& key) const {
    try {
      return n.as<T>();
    } catch (const YAML::BadConversion&) {
      fail(n, fmt::format("'{}' has an invalid value", qualified(key)));
    }
  }

  YAML::Node node_;
  std::string path_;
  std::shared_ptr<const std::string> source_;
};

struct GainGrid {
  double k1_min = 1.0, k1_max = 8.0, k1_step = 0.25;
  double k2_min = 1.0, k2_max = 3.5, k2_step = 0.05;
  bool refine = true;

  static std::vector<double> axis(double lo, double hi, double step) {
    std::vector<double> v;
    const long n = std::lround(std::floor((hi - lo) / step + 1e-9));
    for (long i = 0; i <= n; ++i) v.push_back(lo + static_cast<double>(i) * step);
    return v;
  }
  std::vector<double> k1_values() const { return axis(k1_min, k1_max, k1_step); }
  std::vector<double> k2_values() const { return axis(k2_min, k2_max, k2_step); }

  void validate() const {
    if (!(k1_step > 0.0) || !(k2_step > 0.0)) throw ConfigError("grid steps must be > 0");
    if (!(k1_min <= k1_max) || !(k2_min <= k2_max)) throw ConfigError("grid min must not exceed max");
    StiffnessGains{k1_min, k2_min}.validate();
  }
};

struct LinearizationConfig {
  GroundKind ground = GroundKind::compliant;
  double stiffness = kRigidEquivalentStiffness;
  double relative_step = 1e-6;
  DifferenceScheme scheme = DifferenceScheme::central;

  TerrainParams terrain() const {
    return ground == GroundKind::rigid ? TerrainParams::rigid() : TerrainParams::compliant(stiffness);
  }
};

struct ExperimentConfig {
  std::filesystem::path base_dir = ".";

  ModelParams model;
  GroundKind ground = GroundKind::compliant;
  double ground_stiffness = kRigidEquivalentStiffness;

  std::optional<std::filesystem::path> gait_file;
  GaitSearchSpec search;
  GroundKind search_ground = GroundKind::rigid;
  double search_stiffness = kRigidEquivalentStiffness;

  ControllerKind controller = ControllerKind::plain_lqr;
  std::optional<std::filesystem::path> controller_file;
  Mat5 Q = Mat5::Identity();
  Mat3 R = Mat3::Identity();
  LinearizationConfig linearization;
  StiffnessGains gains;

  std::optional<PerturbationSpec> perturbation;
  int max_steps = 100;
  double sample_period = 1e-3;
  SimOptions sim;

  std::vector<double> sweep_stiffness{50e6, 1e6, 500e3, 174e3, 150e3, 90e3, 30e3};
  int jobs = 0;  // 0: hardware concurrency
  GainGrid grid;

  std::filesystem::path output_dir = "out";

  TerrainParams search_terrain() const {
    return search_ground == GroundKind::rigid ? TerrainParams::rigid()
                                              : TerrainParams::compliant(search_stiffness);
  }

  TrialSetup trial_setup() const {
    TrialSetup t;
    t.model = model;
    t.ground = ground;
    t.rigid_stiffness = ground_stiffness;
    t.controller = controller;
    t.gains = gains;
    t.perturbation = perturbation;
    t.max_steps = max_steps;
    t.sim = sim;
    return t;
  }
};

namespace detail {

inline GroundKind parse_ground(const ConfigSection& s, const std::string& key, GroundKind fallback) {
  auto v = s.get_or<std::string>(key, fallback == GroundKind::rigid ? "rigid" : "compliant");
  if (v == "rigid") return GroundKind::rigid;
  if (v == "compliant") return GroundKind::compliant;
  s.fail(fmt::format("'{}' must be 'rigid' or 'compliant', got '{}'", s.qualified(key), v));
}

inline double positive(double v) { return v > 0.0; }

inline SearchVariable parse_variable(const ConfigSection& s, SearchVariable v, double unit) {
  s.allow_only({"seed", "lower", "upper", "fixed"});
  v.seed = s.get_or("seed", v.seed / unit) * unit;
  v.lower = s.get_or("lower", v.lower / unit) * unit;
  v.upper = s.get_or("upper", v.upper / unit) * unit;
  v.fixed = s.get_or("fixed", v.fixed);
  return v;
}

inline void parse_search(const ConfigSection& s, ExperimentConfig& c) {
  s.allow_only({"terrain", "stiffness_ground", "forward_velocity", "forward_offset",
                "lateral_offset", "lateral_velocity", "height", "theta_deg", "phi_deg",
                "stiffness", "residual_tolerance", "max_iterations", "fd_relative_step",
                "periodicity_tolerance"});
  GaitSearchSpec& g = c.search;
  c.search_ground = parse_ground(s, "terrain", GroundKind::rigid);
  c.search_stiffness = s.get_checked("stiffness_ground", c.search_stiffness, positive, "must be > 0");
  g.forward_velocity = s.get_or("forward_velocity", g.forward_velocity);
  g.forward_offset = s.get_or("forward_offset", g.forward_offset);
  g.lateral_offset = s.get_or("lateral_offset", g.lateral_offset);
  g.lateral_velocity = s.get_or("lateral_velocity", g.lateral_velocity);
  if (auto v = s.optional_section("height")) g.height = parse_variable(*v, g.height, 1.0);
  if (auto v = s.optional_section("theta_deg")) g.theta = parse_variable(*v, g.theta, deg2rad(1.0));
  if (auto v = s.optional_section("phi_deg")) g.phi = parse_variable(*v, g.phi, deg2rad(1.0));
  if (auto v = s.optional_section("stiffness")) g.stiffness = parse_variable(*v, g.stiffness, 1.0);
  g.residual_tolerance = s.get_checked("residual_tolerance", g.residual_tolerance, positive, "must be > 0");
  g.max_iterations = s.get_checked("max_iterations", g.max_iterations, [](int v) { return v >= 1; },
                                   "must be >= 1");
  g.fd_relative_step = s.get_checked("fd_relative_step", g.fd_relative_step, positive, "must be > 0");
  g.periodicity_tolerance =
      s.get_checked("periodicity_tolerance", g.periodicity_tolerance, positive, "must be > 0");
  s.validated([&] { g.validate(); });
}

template <int N>
Eigen::Matrix<double, N, N> parse_diag(const ConfigSection& s, const std::string& key) {
  Eigen::Matrix<double, N, N> m = Eigen::Matrix<double, N, N>::Identity();
  if (!s.has(key)) return m;
  auto d = s.doubles(key, N);
  for (int i = 0; i < N; ++i) {
    if (!(d[i] > 0.0)) s.fail(fmt::format("'{}' entries must be > 0", s.qualified(key)));
    m(i, i) = d[i];
  }
  return m;
}

inline void parse_controller(const ConfigSection& s, ExperimentConfig& c) {
  s.allow_only({"kind", "file", "q_diag", "r_diag", "linearization", "gains"});
  auto kind = s.get_or<std::string>("kind", "plain_lqr");
  if (kind == "plain_lqr") c.controller = ControllerKind::plain_lqr;
  else if (kind == "proposed") c.controller = ControllerKind::proposed;
  else s.fail(fmt::format("'{}' must be 'plain_lqr' or 'proposed', got '{}'", s.qualified("kind"), kind));
  if (s.has("file")) c.controller_file = c.base_dir / s.get<std::string>("file");
  c.Q = parse_diag<5>(s, "q_diag");
  c.R = parse_diag<3>(s, "r_diag");
  if (auto l = s.optional_section("linearization")) {
    l->allow_only({"terrain", "stiffness", "relative_step", "scheme"});
    c.linearization.ground = parse_ground(*l, "terrain", GroundKind::compliant);
    c.linearization.stiffness =
        l->get_checked("stiffness", c.linearization.stiffness, positive, "must be > 0");
    c.linearization.relative_step =
        l->get_checked("relative_step", c.linearization.relative_step, positive, "must be > 0");
    auto scheme = l->get_or<std::string>("scheme", "central");
    if (scheme == "central") c.linearization.scheme = DifferenceScheme::central;
    else if (scheme == "forward") c.linearization.scheme = DifferenceScheme::forward;
    else l->fail(fmt::format("'{}' must be 'central' or 'forward'", l->qualified("scheme")));
  }
  if (auto g = s.optional_section("gains")) {
    g->allow_only({"k1", "k2"});
    c.gains.k1 = g->get<double>("k1");
    c.gains.k2 = g->get<double>("k2");
    g->validated([&] { c.gains.validate(); });
  }
}

inline void parse_integrator(const ConfigSection& s, SimOptions& o) {
  s.allow_only({"relative", "absolute", "event_time", "max_step", "initial_step", "max_phase_time",
                "min_height_ratio", "min_length_ratio"});
  auto& t = o.tolerances;
  t.relative = s.get_checked("relative", t.relative, positive, "must be > 0");
  t.absolute = s.get_checked("absolute", t.absolute, positive, "must be > 0");
  t.event_time = s.get_checked("event_time", t.event_time, positive, "must be > 0");
  t.max_step = s.get_checked("max_step", t.max_step, positive, "must be > 0");
  t.initial_step = s.get_checked("initial_step", t.initial_step, positive, "must be > 0");
  o.max_phase_time = s.get_checked("max_phase_time", o.max_phase_time, positive, "must be > 0");
  o.min_height_ratio = s.get_checked("min_height_ratio", o.min_height_ratio,
                                     [](double v) { return v >= 0.0 && v < 1.0; }, "must be in [0, 1)");
  o.min_length_ratio = s.get_checked("min_length_ratio", o.min_length_ratio,
                                     [](double v) { return v >= 0.0 && v < 1.0; }, "must be in [0, 1)");
}

inline void parse_grid_axis(const ConfigSection& s, double& lo, double& hi, double& step) {
  s.allow_only({"min", "max", "step"});
  lo = s.get_or("min", lo);
  hi = s.get_or("max", hi);
  step = s.get_checked("step", step, positive, "must be > 0");
  if (!(lo <= hi)) s.fail("'min' must not exceed 'max'");
}

}  // namespace detail

inline ExperimentConfig parse_config(const ConfigSection& root,
                                     const std::filesystem::path& base_dir = ".") {
  using namespace detail;
  ExperimentConfig c;
  c.base_dir = base_dir;
  root.allow_only({"model", "terrain", "gait", "controller", "perturbation", "trial", "integrator",
                   "sweep", "tuning", "output"});

  if (auto s = root.optional_section("model")) {
    s->allow_only({"body_mass", "rest_length", "foot_mass", "gravity", "contact_exponent",
                   "damping_coeff"});
    ModelParams& m = c.model;
    m.body_mass = s->get_or("body_mass", m.body_mass);
    m.rest_length = s->get_or("rest_length", m.rest_length);
    m.foot_mass = s->get_or("foot_mass", m.foot_mass);
    if (s->has("gravity")) {
      auto g = s->doubles("gravity", 3);
      m.gravity = {g[0], g[1], g[2]};
    }
    m.contact_exponent = s->get_or("contact_exponent", m.contact_exponent);
    m.damping_coeff = s->get_or("damping_coeff", m.damping_coeff);
    s->validated([&] { m.validate(); });
  }

  if (auto s = root.optional_section("terrain")) {
    s->allow_only({"kind", "stiffness"});
    c.ground = parse_ground(*s, "kind", GroundKind::compliant);
    c.ground_stiffness = s->get_checked("stiffness", c.ground_stiffness, positive, "must be > 0");
  }

  if (auto s = root.optional_section("gait")) {
    s->allow_only({"file", "search"});
    if (s->has("file")) c.gait_file = base_dir / s->get<std::string>("file");
    if (auto q = s->optional_section("search")) parse_search(*q, c);
  }

  if (auto s = root.optional_section("controller")) parse_controller(*s, c);

  if (auto s = root.optional_section("perturbation")) {
    s->allow_only({"step", "low_stiffness"});
    PerturbationSpec p;
    p.step = s->get_or("step", p.step);
    p.low_stiffness = s->get<double>("low_stiffness");
    p.rigid_stiffness = c.ground_stiffness;
    s->validated([&] { p.validate(); });
    if (c.ground == GroundKind::rigid) s->fail("a ground perturbation needs compliant terrain");
    c.perturbation = p;
  }

  if (auto s = root.optional_section("trial")) {
    s->allow_only({"max_steps", "sample_period"});
    c.max_steps = s->get_checked("max_steps", c.max_steps, [](int v) { return v >= 1; }, "must be >= 1");
    c.sample_period = s->get_checked("sample_period", c.sample_period, positive, "must be > 0");
  }

  if (auto s = root.optional_section("integrator")) parse_integrator(*s, c.sim);

  if (auto s = root.optional_section("sweep")) {
    s->allow_only({"stiffness", "jobs"});
    if (s->has("stiffness")) {
      c.sweep_stiffness = s->doubles("stiffness");
      if (c.sweep_stiffness.empty()) s->fail("'sweep.stiffness' must not be empty");
      for (double v : c.sweep_stiffness)
        if (!(v > 0.0)) s->fail("'sweep.stiffness' entries must be > 0");
    }
    c.jobs = s->get_checked("jobs", c.jobs, [](int v) { return v >= 0; }, "must be >= 0");
  }

  if (auto s = root.optional_section("tuning")) {
    s->allow_only({"k1", "k2", "refine"});
    if (auto a = s->optional_section("k1")) parse_grid_axis(*a, c.grid.k1_min, c.grid.k1_max, c.grid.k1_step);
    if (auto a = s->optional_section("k2")) parse_grid_axis(*a, c.grid.k2_min, c.grid.k2_max, c.grid.k2_step);
    c.grid.refine = s->get_or("refine", c.grid.refine);
    s->validated([&] { c.grid.validate(); });
  }

  if (auto s = root.optional_section("output")) {
    s->allow_only({"dir"});
    c.output_dir = s->get<std::string>("dir");
  }
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& file) {
  return parse_config(ConfigSection::load(file), file.parent_path().empty() ? "." : file.parent_path());
}

}  // namespace dslip
