#ifndef STAGECCD_PIPELINE_CONFIG_HPP
#define STAGECCD_PIPELINE_CONFIG_HPP

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "stageccd/control/controller.hpp"
#include "stageccd/errors.hpp"
#include "stageccd/geometry/geometry_optimizer.hpp"
#include "stageccd/optim/cobyla.hpp"
#include "stageccd/placement/placement.hpp"
#include "stageccd/structural/stage_params.hpp"

namespace stageccd {

inline constexpr int kConfigSchemaVersion = 1;

struct FixedDevice {
  Eigen::Vector2d position{0.0, 0.0};  // m
  Direction direction{Direction::kZ};
  std::string label;
};

struct ControlConfig {
  SynthesisSettings synthesis{};
  /// Search for a controlled flexible channel starts at this multiple of its
  /// modal frequency.
  double flexible_floor_ratio{2.0};
  double curve_min_hz{0.1};
  double curve_max_hz{5000.0};
  int curve_points{400};
};

/// Everything one pipeline run needs, in SI units.
struct PipelineConfig {
  int schema_version{kConfigSchemaVersion};
  double stage_edge{0.3};
  MaterialSpec material{};
  double magnet_edge{kMagnetArrayEdge};
  double magnet_thickness{kMagnetArrayThickness};
  double magnet_density{kMagnetDensity};

  BoxBounds bounds{};
  StageParams initial{};
  CobylaSettings cobyla{};

  FrequencySpec frequency{};
  double baseline_omega_high{0.0};  // rad/s

  double gamma{50.0};
  PlacementDomain sensor_domain{};
  PlacementOptions placement{};
  std::vector<FixedDevice> lateral_sensors;
  std::vector<Direction> actuator_directions{Direction::kX, Direction::kY, Direction::kZ};

  double damping_ratio{0.005};
  int resolution{30};
  int extra_modes{4};
  ControlConfig control{};
  std::string output_dir{"out"};

  std::vector<LumpedAttachment> attachments() const {
    return corner_magnet_arrays(stage_edge, magnet_edge, magnet_thickness, magnet_density);
  }

  DesignContext design_context() const {
    DesignContext c;
    c.stage_edge = stage_edge;
    c.material = material;
    c.attachments = attachments();
    c.resolution = resolution;
    c.damping_ratio = damping_ratio;
    c.extra_modes = extra_modes;
    return c;
  }

  FrequencySpec baseline_frequency() const {
    return FrequencySpec(0, frequency.m_total, 0.0, baseline_omega_high);
  }

  DevicePattern vertical_sensors() const {
    return DevicePattern::symmetric_four(DeviceKind::kSensor, stage_edge, Direction::kZ, "zs");
  }

  DevicePattern sensors() const {
    std::vector<Eigen::Vector2d> pos;
    std::vector<Direction> dir;
    std::vector<std::string> lab;
    for (const auto& d : lateral_sensors) {
      pos.push_back(d.position);
      dir.push_back(d.direction);
      lab.push_back(d.label);
    }
    return vertical_sensors() + DevicePattern::fixed(DeviceKind::kSensor, pos, dir, lab);
  }

  /// One channel per magnet array and force direction, at the array centre.
  DevicePattern actuators() const {
    std::vector<Eigen::Vector2d> pos;
    std::vector<Direction> dir;
    std::vector<std::string> lab;
    const auto arrays = attachments();
    for (std::size_t k = 0; k < arrays.size(); ++k) {
      for (Direction d : actuator_directions) {
        pos.push_back(arrays[k].center);
        dir.push_back(d);
        lab.push_back("a" + std::to_string(k + 1) + to_string(d));
      }
    }
    return DevicePattern::fixed(DeviceKind::kActuator, pos, dir, lab);
  }

  /// θ_s that puts the vertical sensors at the magnet-array centres.
  Eigen::Vector2d magnet_center_theta() const { return Eigen::Vector2d::Constant(0.5 * magnet_edge); }

  Eigen::VectorXd curve_grid() const {
    return log_grid(hz_to_rad(control.curve_min_hz), hz_to_rad(control.curve_max_hz), control.curve_points);
  }

  void validate() const {
    auto fail = [](const std::string& m) { throw ConfigError(m); };
    if (schema_version != kConfigSchemaVersion) fail("unsupported schema_version");
    try {
      if (!(stage_edge > 0)) fail("stage.edge_mm must be positive");
      material.validate();
      if (!(magnet_edge > 0 && magnet_thickness > 0 && magnet_density > 0)) {
        fail("magnet_arrays: dimensions and density must be positive");
      }
      if (!(magnet_edge < 0.5 * stage_edge)) fail("magnet_arrays.edge_mm must be below half the stage edge");
      validate_geometry_bounds(bounds, stage_edge);
      if (!bounds.contains(initial.to_vector())) fail("geometry.initial_mm lies outside the bounds");
      cobyla.validate(StageParams::kSize);
      frequency.validate();
      if (frequency.m_total > 8) fail("frequency.m_total above 8 is not supported");
      baseline_frequency().validate();
      if (!(gamma >= 0)) fail("placement.gamma must be non-negative");
      sensor_domain.validate();
      if (sensor_domain.lower.minCoeff() < 0 || sensor_domain.upper.maxCoeff() >= 0.5 * stage_edge) {
        fail("placement.sensor_domain_mm must lie in the quarter [0, edge/2) x [0, edge/2)");
      }
      for (const auto& d : lateral_sensors) {
        if (d.position.minCoeff() < 0 || d.position.maxCoeff() > stage_edge) {
          fail("sensors.lateral: position '" + d.label + "' lies off the stage");
        }
      }
      if (actuator_directions.empty()) fail("actuators.directions must not be empty");
      if (!(damping_ratio > 0 && damping_ratio < 1)) fail("damping_ratio must lie in (0, 1)");
      if (resolution < 4) fail("mesh.resolution must be at least 4");
      if (extra_modes < 2) fail("mesh.extra_modes must be at least 2");
      control.synthesis.validate();
      if (!(control.flexible_floor_ratio > 0)) fail("control.flexible_floor_ratio must be positive");
      if (!(control.curve_min_hz > 0 && control.curve_max_hz > control.curve_min_hz) || control.curve_points < 2) {
        fail("control: curve grid must satisfy 0 < min < max with at least 2 points");
      }
      if (output_dir.empty()) fail("output_dir must not be empty");
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  }
};

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& j, const std::string& where, std::initializer_list<const char*> known) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  std::set<std::string> k(known.begin(), known.end());
  for (const auto& [key, value] : j.items()) {
    if (!k.count(key)) throw ConfigError("unknown key '" + key + "' in " + (where.empty() ? "config" : where));
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

template <class T>
T require(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError("missing key " + where + "." + key);
  return get_or<T>(j, key, T{}, where);
}

inline Eigen::Vector2d vec2_mm(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw ConfigError(where + " must be a pair of numbers [x, y] in mm");
  }
  return Eigen::Vector2d(j[0].get<double>(), j[1].get<double>()) * 1e-3;
}

inline Direction parse_direction(const json& j, const std::string& where) {
  const std::string s = j.is_string() ? j.get<std::string>() : "";
  if (s == "x") return Direction::kX;
  if (s == "y") return Direction::kY;
  if (s == "z") return Direction::kZ;
  throw ConfigError(where + " must be one of \"x\", \"y\", \"z\"");
}

inline StageParams params_mm(const json& j, const std::string& where) {
  reject_unknown(j, where, {"base_thickness", "rib_height", "rib_width", "rib_pitch", "frame_width"});
  Eigen::VectorXd v(StageParams::kSize);
  for (int i = 0; i < StageParams::kSize; ++i) v[i] = require<double>(j, StageParams::kNames[i], where) * 1e-3;
  return StageParams::from_vector(v);
}

inline nlohmann::ordered_json params_to_mm(const StageParams& p) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  const auto v = p.to_vector();
  for (int i = 0; i < StageParams::kSize; ++i) j[StageParams::kNames[i]] = v[i] * 1e3;
  return j;
}

inline nlohmann::ordered_json vec2_to_mm(const Eigen::Vector2d& v) { return nlohmann::ordered_json::array({v.x() * 1e3, v.y() * 1e3}); }

}  // namespace detail

/// Parses the versioned JSON schema. Lengths are in mm, frequencies in Hz.
inline PipelineConfig parse_config(const nlohmann::json& j) {
  using detail::get_or;
  using detail::require;
  using nlohmann::json;
  detail::reject_unknown(j, "", {"schema_version", "stage", "magnet_arrays", "geometry", "frequency", "baseline",
                                 "placement", "sensors", "actuators", "damping_ratio", "mesh", "control",
                                 "output_dir"});
  PipelineConfig c;
  c.schema_version = require<int>(j, "schema_version", "config");
  if (c.schema_version != kConfigSchemaVersion) {
    throw ConfigError("unsupported schema_version " + std::to_string(c.schema_version));
  }

  const json stage = j.value("stage", json::object());
  detail::reject_unknown(stage, "stage", {"edge_mm", "material"});
  c.stage_edge = get_or<double>(stage, "edge_mm", 300.0, "stage") * 1e-3;
  const json mat = stage.value("material", json::object());
  detail::reject_unknown(mat, "stage.material", {"name", "young_modulus_gpa", "poisson_ratio", "density_kg_m3"});
  c.material.young_modulus = get_or<double>(mat, "young_modulus_gpa", c.material.young_modulus * 1e-9,
                                            "stage.material") * 1e9;
  c.material.poisson_ratio = get_or<double>(mat, "poisson_ratio", c.material.poisson_ratio, "stage.material");
  c.material.density = get_or<double>(mat, "density_kg_m3", c.material.density, "stage.material");

  const json mag = j.value("magnet_arrays", json::object());
  detail::reject_unknown(mag, "magnet_arrays", {"layout", "edge_mm", "thickness_mm", "density_kg_m3"});
  if (get_or<std::string>(mag, "layout", "corners", "magnet_arrays") != "corners") {
    throw ConfigError("magnet_arrays.layout: only \"corners\" is supported");
  }
  c.magnet_edge = get_or<double>(mag, "edge_mm", c.magnet_edge * 1e3, "magnet_arrays") * 1e-3;
  c.magnet_thickness = get_or<double>(mag, "thickness_mm", c.magnet_thickness * 1e3, "magnet_arrays") * 1e-3;
  c.magnet_density = get_or<double>(mag, "density_kg_m3", c.magnet_density, "magnet_arrays");

  const json geo = require<json>(j, "geometry", "config");
  detail::reject_unknown(geo, "geometry", {"lower_mm", "upper_mm", "initial_mm", "optimizer"});
  c.bounds.lower = detail::params_mm(require<json>(geo, "lower_mm", "geometry"), "geometry.lower_mm").to_vector();
  c.bounds.upper = detail::params_mm(require<json>(geo, "upper_mm", "geometry"), "geometry.upper_mm").to_vector();
  if (geo.contains("initial_mm")) {
    c.initial = detail::params_mm(geo.at("initial_mm"), "geometry.initial_mm");
  } else {
    c.initial = StageParams::from_vector(0.5 * (c.bounds.lower + c.bounds.upper));
  }
  const json opt = geo.value("optimizer", json::object());
  detail::reject_unknown(opt, "geometry.optimizer", {"rho_begin", "rho_end", "max_evaluations"});
  c.cobyla.rho_begin = get_or<double>(opt, "rho_begin", c.cobyla.rho_begin, "geometry.optimizer");
  c.cobyla.rho_end = get_or<double>(opt, "rho_end", c.cobyla.rho_end, "geometry.optimizer");
  c.cobyla.max_evaluations = get_or<int>(opt, "max_evaluations", c.cobyla.max_evaluations, "geometry.optimizer");

  const json fr = require<json>(j, "frequency", "config");
  detail::reject_unknown(fr, "frequency", {"n_controlled", "m_total", "omega_low_hz", "omega_high_hz"});
  c.frequency.n_controlled = require<int>(fr, "n_controlled", "frequency");
  c.frequency.m_total = get_or<int>(fr, "m_total", 4, "frequency");
  c.frequency.omega_low = hz_to_rad(get_or<double>(fr, "omega_low_hz", 0.0, "frequency"));
  c.frequency.omega_high = hz_to_rad(require<double>(fr, "omega_high_hz", "frequency"));

  const json base = j.value("baseline", json::object());
  detail::reject_unknown(base, "baseline", {"omega_high_hz"});
  c.baseline_omega_high = hz_to_rad(get_or<double>(base, "omega_high_hz", 250.0, "baseline"));

  const json pl = j.value("placement", json::object());
  detail::reject_unknown(pl, "placement", {"gamma", "sensor_domain_mm", "grid_resolution", "refine",
                                           "refine_tolerance_mm"});
  c.gamma = get_or<double>(pl, "gamma", c.gamma, "placement");
  if (pl.contains("sensor_domain_mm")) {
    const json d = pl.at("sensor_domain_mm");
    detail::reject_unknown(d, "placement.sensor_domain_mm", {"lower", "upper"});
    c.sensor_domain.lower = detail::vec2_mm(require<json>(d, "lower", "placement.sensor_domain_mm"),
                                            "placement.sensor_domain_mm.lower");
    c.sensor_domain.upper = detail::vec2_mm(require<json>(d, "upper", "placement.sensor_domain_mm"),
                                            "placement.sensor_domain_mm.upper");
  } else {
    c.sensor_domain.lower = Eigen::Vector2d::Constant(0.01);
    c.sensor_domain.upper = Eigen::Vector2d::Constant(0.5 * c.stage_edge - 0.01);
  }
  c.sensor_domain.grid_resolution = get_or<int>(pl, "grid_resolution", 21, "placement");
  c.placement.refine = get_or<bool>(pl, "refine", true, "placement");
  c.placement.refine_tolerance = get_or<double>(pl, "refine_tolerance_mm", 1e-2, "placement") * 1e-3;

  const json se = j.value("sensors", json::object());
  detail::reject_unknown(se, "sensors", {"vertical", "lateral"});
  if (get_or<std::string>(se, "vertical", "symmetric_four", "sensors") != "symmetric_four") {
    throw ConfigError("sensors.vertical: only \"symmetric_four\" is supported");
  }
  if (se.contains("lateral")) {
    const json lat = se.at("lateral");
    if (!lat.is_array()) throw ConfigError("sensors.lateral must be an array");
    for (std::size_t k = 0; k < lat.size(); ++k) {
      const std::string where = "sensors.lateral[" + std::to_string(k) + "]";
      detail::reject_unknown(lat[k], where, {"position_mm", "direction", "label"});
      FixedDevice d;
      d.position = detail::vec2_mm(require<json>(lat[k], "position_mm", where), where + ".position_mm");
      d.direction = detail::parse_direction(require<json>(lat[k], "direction", where), where + ".direction");
      d.label = get_or<std::string>(lat[k], "label", std::string(to_string(d.direction)) + "s" + std::to_string(k + 1),
                                    where);
      c.lateral_sensors.push_back(d);
    }
  } else {
    const double e = c.stage_edge;
    c.lateral_sensors = {{Eigen::Vector2d(0.0, 0.5 * e), Direction::kX, "xs1"},
                         {Eigen::Vector2d(0.25 * e, 0.0), Direction::kY, "ys1"},
                         {Eigen::Vector2d(0.75 * e, 0.0), Direction::kY, "ys2"}};
  }

  const json ac = j.value("actuators", json::object());
  detail::reject_unknown(ac, "actuators", {"directions"});
  if (ac.contains("directions")) {
    c.actuator_directions.clear();
    if (!ac.at("directions").is_array()) throw ConfigError("actuators.directions must be an array");
    for (const auto& d : ac.at("directions")) c.actuator_directions.push_back(detail::parse_direction(d, "actuators.directions"));
  }

  c.damping_ratio = get_or<double>(j, "damping_ratio", c.damping_ratio, "config");

  const json mesh = j.value("mesh", json::object());
  detail::reject_unknown(mesh, "mesh", {"resolution", "extra_modes"});
  c.resolution = get_or<int>(mesh, "resolution", c.resolution, "mesh");
  c.extra_modes = get_or<int>(mesh, "extra_modes", c.extra_modes, "mesh");

  const json co = j.value("control", json::object());
  detail::reject_unknown(co, "control", {"alpha", "z_lp", "robustness_bound", "search_min_hz", "search_max_hz",
                                         "relative_tolerance", "flexible_floor_ratio", "curve_min_hz",
                                         "curve_max_hz", "curve_points"});
  auto& s = c.control.synthesis;
  s.alpha = get_or<double>(co, "alpha", s.alpha, "control");
  s.z_lp = get_or<double>(co, "z_lp", s.z_lp, "control");
  s.robustness_bound = get_or<double>(co, "robustness_bound", s.robustness_bound, "control");
  s.omega_min = hz_to_rad(get_or<double>(co, "search_min_hz", rad_to_hz(s.omega_min), "control"));
  s.omega_max = hz_to_rad(get_or<double>(co, "search_max_hz", rad_to_hz(s.omega_max), "control"));
  s.relative_tolerance = get_or<double>(co, "relative_tolerance", s.relative_tolerance, "control");
  c.control.flexible_floor_ratio = get_or<double>(co, "flexible_floor_ratio", c.control.flexible_floor_ratio, "control");
  c.control.curve_min_hz = get_or<double>(co, "curve_min_hz", c.control.curve_min_hz, "control");
  c.control.curve_max_hz = get_or<double>(co, "curve_max_hz", c.control.curve_max_hz, "control");
  c.control.curve_points = get_or<int>(co, "curve_points", c.control.curve_points, "control");

  c.output_dir = get_or<std::string>(j, "output_dir", c.output_dir, "config");
  c.validate();
  return c;
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return parse_config(j);
}

/// Effective configuration in the schema's units. `output_dir` is left out
/// so that it does not enter the config hash.
inline nlohmann::ordered_json to_json(const PipelineConfig& c) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["schema_version"] = c.schema_version;
  j["stage"] = {{"edge_mm", c.stage_edge * 1e3},
                {"material", {{"young_modulus_gpa", c.material.young_modulus * 1e-9},
                              {"poisson_ratio", c.material.poisson_ratio},
                              {"density_kg_m3", c.material.density}}}};
  j["magnet_arrays"] = {{"layout", "corners"},
                        {"edge_mm", c.magnet_edge * 1e3},
                        {"thickness_mm", c.magnet_thickness * 1e3},
                        {"density_kg_m3", c.magnet_density}};
  j["geometry"] = {{"lower_mm", detail::params_to_mm(StageParams::from_vector(c.bounds.lower))},
                   {"upper_mm", detail::params_to_mm(StageParams::from_vector(c.bounds.upper))},
                   {"initial_mm", detail::params_to_mm(c.initial)},
                   {"optimizer", {{"rho_begin", c.cobyla.rho_begin},
                                  {"rho_end", c.cobyla.rho_end},
                                  {"max_evaluations", c.cobyla.max_evaluations}}}};
  j["frequency"] = {{"n_controlled", c.frequency.n_controlled},
                    {"m_total", c.frequency.m_total},
                    {"omega_low_hz", rad_to_hz(c.frequency.omega_low)},
                    {"omega_high_hz", rad_to_hz(c.frequency.omega_high)}};
  j["baseline"] = {{"omega_high_hz", rad_to_hz(c.baseline_omega_high)}};
  j["placement"] = {{"gamma", c.gamma},
                    {"sensor_domain_mm", {{"lower", detail::vec2_to_mm(c.sensor_domain.lower)},
                                          {"upper", detail::vec2_to_mm(c.sensor_domain.upper)}}},
                    {"grid_resolution", c.sensor_domain.grid_resolution},
                    {"refine", c.placement.refine},
                    {"refine_tolerance_mm", c.placement.refine_tolerance * 1e3}};
  ordered_json lat = ordered_json::array();
  for (const auto& d : c.lateral_sensors) {
    lat.push_back({{"position_mm", detail::vec2_to_mm(d.position)}, {"direction", to_string(d.direction)},
                   {"label", d.label}});
  }
  j["sensors"] = {{"vertical", "symmetric_four"}, {"lateral", lat}};
  ordered_json dirs = ordered_json::array();
  for (Direction d : c.actuator_directions) dirs.push_back(to_string(d));
  j["actuators"] = {{"directions", dirs}};
  j["damping_ratio"] = c.damping_ratio;
  j["mesh"] = {{"resolution", c.resolution}, {"extra_modes", c.extra_modes}};
  const auto& s = c.control.synthesis;
  j["control"] = {{"alpha", s.alpha},
                  {"z_lp", s.z_lp},
                  {"robustness_bound", s.robustness_bound},
                  {"search_min_hz", rad_to_hz(s.omega_min)},
                  {"search_max_hz", rad_to_hz(s.omega_max)},
                  {"relative_tolerance", s.relative_tolerance},
                  {"flexible_floor_ratio", c.control.flexible_floor_ratio},
                  {"curve_min_hz", c.control.curve_min_hz},
                  {"curve_max_hz", c.control.curve_max_hz},
                  {"curve_points", c.control.curve_points}};
  return j;
}

/// 64-bit FNV-1a, as 16 hex digits.
inline std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string config_hash(const PipelineConfig& c) { return fnv1a_hex(to_json(c).dump()); }

}  // namespace stageccd

#endif  // STAGECCD_PIPELINE_CONFIG_HPP
