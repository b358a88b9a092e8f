#ifndef STAGECCD_PIPELINE_PIPELINE_HPP
#define STAGECCD_PIPELINE_PIPELINE_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stageccd/control/controller.hpp"
#include "stageccd/errors.hpp"
#include "stageccd/geometry/geometry_optimizer.hpp"
#include "stageccd/pipeline/config.hpp"
#include "stageccd/placement/placement.hpp"
#include "stageccd/plant/plant.hpp"
#include "stageccd/structural/export.hpp"
#include "stageccd/version.hpp"

namespace stageccd {

enum class PipelineStage { kConfig, kGeometry, kPlacement, kPlant, kControl, kIo };

inline const char* to_string(PipelineStage s) {
  switch (s) {
    case PipelineStage::kConfig: return "config";
    case PipelineStage::kGeometry: return "geometry";
    case PipelineStage::kPlacement: return "placement";
    case PipelineStage::kPlant: return "plant";
    case PipelineStage::kControl: return "control";
    case PipelineStage::kIo: return "io";
  }
  return "?";
}

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;

inline int exit_code(PipelineStage s) {
  switch (s) {
    case PipelineStage::kConfig: return kExitUsage;
    case PipelineStage::kGeometry: return 10;
    case PipelineStage::kPlacement: return 11;
    case PipelineStage::kPlant: return 12;
    case PipelineStage::kControl: return 13;
    case PipelineStage::kIo: return 14;
  }
  return 1;
}

class PipelineError : public Error {
 public:
  PipelineError(PipelineStage stage, const std::string& what)
      : Error(std::string("[") + to_string(stage) + "] " + what), stage_(stage) {}
  PipelineStage stage() const { return stage_; }
  int exit_code() const { return stageccd::exit_code(stage_); }

 private:
  PipelineStage stage_;
};

enum class DesignCase { kProposed, kBaseline };

inline const char* to_string(DesignCase c) { return c == DesignCase::kProposed ? "proposed" : "baseline"; }

struct ChannelReport {
  std::string label;
  double bandwidth_hz{0.0};
  double omega_bw_hz{0.0};
  double kp{0.0};
  double max_sensitivity{0.0};
  double peak_frequency_hz{0.0};
  double gain_margin_db{0.0};
  double phase_margin_deg{0.0};
  bool stable{false};
  int bisection_steps{0};
};

struct DesignReport {
  std::string case_name;
  bool ok{false};
  std::string failed_stage;
  std::string diagnostic;

  double stage_weight_kg{std::numeric_limits<double>::quiet_NaN()};
  double first_res_freq_hz{std::numeric_limits<double>::quiet_NaN()};
  double second_res_freq_hz{std::numeric_limits<double>::quiet_NaN()};
  std::vector<double> flexible_frequencies_hz;
  FrequencySpec frequency{};

  StageParams params{};
  bool geometry_feasible{false};
  bool geometry_converged{false};
  int geometry_evaluations{0};
  int fe_solves{0};
  std::vector<double> constraint_values;

  bool placement_optimized{false};
  Eigen::Vector2d theta_s{0.0, 0.0};
  double placement_objective{0.0};
  std::vector<double> observability;

  int plant_modes{0};
  double meas_condition{0.0};
  double act_condition{0.0};
  std::vector<ChannelReport> channels;
  bool multivariable_available{false};
  MultivariableReport multivariable{};

  std::string config_hash;

  const ChannelReport* channel(const std::string& label) const {
    for (const auto& c : channels) {
      if (c.label == label) return &c;
    }
    return nullptr;
  }
};

/// Final design state that downstream tools can rebuild curves from.
struct SavedDesign {
  DesignCase design_case{DesignCase::kProposed};
  StageParams params{};
  Eigen::Vector2d theta_s{0.0, 0.0};
  std::vector<std::string> labels;
  std::vector<ControllerParams> controllers;
};

struct PipelineRun {
  DesignReport report;
  std::optional<GeometryResult> geometry;
  std::optional<PlacementResult> placement;
  std::shared_ptr<const ModalModel> model;
  std::optional<DecoupledPlant> plant;
  std::vector<ChannelDesign> channels;
  SavedDesign design;
};

struct RunOptions {
  bool write_artifacts{true};
  std::ostream* log{nullptr};
};

namespace detail {

inline nlohmann::ordered_json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

inline double number_from(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

inline std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

inline void log_line(const RunOptions& o, const std::string& s) {
  if (o.log) *o.log << s << std::endl;
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const DesignReport& r, const std::string& timestamp = {}) {
  using nlohmann::ordered_json;
  using detail::number_or_null;
  ordered_json j;
  j["case"] = r.case_name;
  j["status"] = r.ok ? "ok" : "failed";
  if (!r.ok) {
    j["failed_stage"] = r.failed_stage;
    j["diagnostic"] = r.diagnostic;
  }
  j["stage_weight_kg"] = number_or_null(r.stage_weight_kg);
  j["first_res_freq_hz"] = number_or_null(r.first_res_freq_hz);
  j["second_res_freq_hz"] = number_or_null(r.second_res_freq_hz);
  j["flexible_frequencies_hz"] = r.flexible_frequencies_hz;
  j["frequency_spec"] = {{"n_controlled", r.frequency.n_controlled},
                         {"m_total", r.frequency.m_total},
                         {"omega_low_hz", rad_to_hz(r.frequency.omega_low)},
                         {"omega_high_hz", rad_to_hz(r.frequency.omega_high)}};
  j["geometry"] = {{"params_mm", detail::params_to_mm(r.params)},
                   {"feasible", r.geometry_feasible},
                   {"converged", r.geometry_converged},
                   {"evaluations", r.geometry_evaluations},
                   {"fe_solves", r.fe_solves},
                   {"constraint_values", r.constraint_values}};
  j["placement"] = {{"optimized", r.placement_optimized},
                    {"theta_s_mm", detail::vec2_to_mm(r.theta_s)},
                    {"objective", r.placement_objective},
                    {"observability", r.observability}};
  j["plant"] = {{"modes", r.plant_modes},
                {"measurement_condition", r.meas_condition},
                {"actuation_condition", r.act_condition}};
  ordered_json ch = ordered_json::array();
  for (const auto& c : r.channels) {
    ch.push_back({{"label", c.label},
                  {"bandwidth_hz", c.bandwidth_hz},
                  {"omega_bw_hz", c.omega_bw_hz},
                  {"kp", c.kp},
                  {"max_sensitivity", c.max_sensitivity},
                  {"peak_frequency_hz", c.peak_frequency_hz},
                  {"gain_margin_db", number_or_null(c.gain_margin_db)},
                  {"phase_margin_deg", number_or_null(c.phase_margin_deg)},
                  {"stable", c.stable},
                  {"bisection_steps", c.bisection_steps}});
  }
  j["channels"] = ch;
  if (r.multivariable_available) {
    j["multivariable"] = {{"max_singular_sensitivity", r.multivariable.max_singular_sensitivity},
                          {"max_offdiagonal_sensitivity", r.multivariable.max_offdiagonal_sensitivity},
                          {"stable", r.multivariable.stable}};
  }
  ordered_json modules;
  for (const auto& [name, ver] : kModuleVersions) modules[name] = ver;
  j["provenance"] = {{"config_hash", r.config_hash},
                     {"library_version", kLibraryVersion},
                     {"schema_version", kConfigSchemaVersion},
                     {"modules", modules}};
  if (!timestamp.empty()) j["provenance"]["generated_utc"] = timestamp;
  return j;
}

inline nlohmann::ordered_json to_json(const SavedDesign& d) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["case"] = to_string(d.design_case);
  ordered_json p;
  const auto v = d.params.to_vector();
  for (int i = 0; i < StageParams::kSize; ++i) p[StageParams::kNames[i]] = v[i];
  j["params_m"] = p;
  j["theta_s_m"] = {d.theta_s.x(), d.theta_s.y()};
  ordered_json cs = ordered_json::array();
  for (std::size_t k = 0; k < d.controllers.size(); ++k) {
    const auto& c = d.controllers[k];
    cs.push_back({{"label", d.labels[k]},
                  {"kp", c.kp},
                  {"omega_bw", c.omega_bw},
                  {"alpha", c.alpha},
                  {"z_lp", c.z_lp}});
  }
  j["controllers"] = cs;
  return j;
}

inline SavedDesign parse_saved_design(const nlohmann::json& j) {
  try {
    SavedDesign d;
    const std::string c = j.at("case").get<std::string>();
    if (c != "proposed" && c != "baseline") throw ConfigError("design file: unknown case '" + c + "'");
    d.design_case = c == "proposed" ? DesignCase::kProposed : DesignCase::kBaseline;
    Eigen::VectorXd v(StageParams::kSize);
    for (int i = 0; i < StageParams::kSize; ++i) v[i] = j.at("params_m").at(StageParams::kNames[i]).get<double>();
    d.params = StageParams::from_vector(v);
    d.theta_s = Eigen::Vector2d(j.at("theta_s_m").at(0).get<double>(), j.at("theta_s_m").at(1).get<double>());
    for (const auto& cj : j.at("controllers")) {
      ControllerParams p = controller_params(cj.at("omega_bw").get<double>(), cj.at("alpha").get<double>(),
                                             cj.at("z_lp").get<double>());
      p.kp = cj.at("kp").get<double>();
      p.validate();
      d.labels.push_back(cj.at("label").get<std::string>());
      d.controllers.push_back(p);
    }
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("design file: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("design file: ") + e.what());
  }
}

inline SavedDesign load_saved_design(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PipelineError(PipelineStage::kIo, "cannot open design file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("design file " + path + ": " + e.what());
  }
  return parse_saved_design(j);
}

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PipelineError(PipelineStage::kIo, "cannot write " + path.string());
  out << text;
  if (!out) throw PipelineError(PipelineStage::kIo, "write failed for " + path.string());
}

template <class F>
void write_with(const std::filesystem::path& path, F&& fill) {
  std::ostringstream os;
  fill(os);
  write_text(path, os.str());
}

/// Modal plant, decoupling and the model it was built on, for a given design
/// and sensor placement.
inline DecoupledPlant build_decoupled_plant(const PipelineConfig& cfg, const ModalModel& model,
                                            const Eigen::Vector2d& theta, int n_controlled, DesignReport& rep) {
  const Eigen::MatrixXd b = input_matrix(model, cfg.actuators(), theta);
  const Eigen::MatrixXd c = output_matrix(model, cfg.sensors(), theta);
  const ModalStateSpace plant = build_plant(model, b, c);
  const StructuralMatrices mats = assemble(*model.mesh, cfg.material, cfg.attachments());
  const Eigen::Vector2d pivot = mass_center(*model.mesh, mats.mass);
  std::vector<int> controlled;
  for (int k = 0; k < n_controlled; ++k) controlled.push_back(model.flexible_index(k));
  const DecouplingPair pair = make_decoupling(model, b, c, pivot, controlled);
  rep.plant_modes = static_cast<int>(plant.mode_count());
  rep.meas_condition = pair.meas_condition;
  rep.act_condition = pair.act_condition;
  return decouple(plant, pair);
}

inline SynthesisSettings channel_settings(const PipelineConfig& cfg, const ModalModel& model, Eigen::Index k) {
  SynthesisSettings s = cfg.control.synthesis;
  if (k >= 6) {
    const double floor = cfg.control.flexible_floor_ratio * model.frequencies[model.flexible_index(static_cast<int>(k - 6))];
    s.omega_min = std::max(s.omega_min, floor);
    if (!(s.omega_min < s.omega_max)) {
      throw SynthesisError("channel q" + std::to_string(k - 5) + ": search floor " +
                           std::to_string(rad_to_hz(s.omega_min)) + " Hz is not below the upper bound");
    }
  }
  return s;
}

inline ChannelReport channel_report(const std::string& label, const ChannelDesign& d) {
  ChannelReport c;
  c.label = label;
  c.bandwidth_hz = d.metrics.bandwidth_hz;
  c.omega_bw_hz = rad_to_hz(d.params.omega_bw);
  c.kp = d.params.kp;
  c.max_sensitivity = d.metrics.max_sensitivity;
  c.peak_frequency_hz = d.metrics.peak_frequency_hz;
  c.gain_margin_db = d.metrics.gain_margin_db;
  c.phase_margin_deg = d.metrics.phase_margin_deg;
  c.stable = d.metrics.stable;
  c.bisection_steps = static_cast<int>(d.trace.size());
  return c;
}

inline void fill_structure(DesignReport& rep, const DesignEvaluation& ev, const FrequencySpec& spec) {
  rep.params = ev.params;
  rep.stage_weight_kg = ev.mass;
  rep.flexible_frequencies_hz.clear();
  for (Eigen::Index i = 0; i < ev.flexible_frequencies.size(); ++i) {
    rep.flexible_frequencies_hz.push_back(rad_to_hz(ev.flexible_frequencies[i]));
  }
  rep.first_res_freq_hz = rep.flexible_frequencies_hz.at(0);
  rep.second_res_freq_hz = rep.flexible_frequencies_hz.at(1);
  const Eigen::VectorXd c = spec.constraint_values(ev.flexible_frequencies);
  rep.constraint_values.assign(c.data(), c.data() + c.size());
}

/// Bode data of every channel: plant, controller, loop and sensitivity.
inline void write_curves(const std::filesystem::path& dir, const PipelineConfig& cfg, const DecoupledPlant& plant,
                         const std::vector<ControllerParams>& controllers) {
  const Eigen::VectorXd grid = cfg.curve_grid();
  FrequencyResponse diag;
  diag.grid = grid;
  diag.values.resize(grid.size(), plant.channels());
  for (Eigen::Index k = 0; k < plant.channels(); ++k) {
    const ModalChannel ch = plant.channel(k);
    diag.labels.push_back(ch.label);
    for (Eigen::Index g = 0; g < grid.size(); ++g) diag.values(g, k) = ch(grid[g]);
    write_with(dir / ("plant_" + ch.label + ".csv"), [&](std::ostream& os) { write_bode_csv(os, diag, k); });
    if (k < static_cast<Eigen::Index>(controllers.size())) {
      const ControllerParams& p = controllers[static_cast<std::size_t>(k)];
      write_with(dir / ("controller_" + ch.label + ".csv"),
                 [&](std::ostream& os) { write_bode_csv(os, controller_response(p, grid)); });
      write_with(dir / ("loop_" + ch.label + ".csv"),
                 [&](std::ostream& os) { write_bode_csv(os, loop_response(ch, p, grid)); });
      write_with(dir / ("sensitivity_" + ch.label + ".csv"),
                 [&](std::ostream& os) { write_bode_csv(os, sensitivity_response(ch, p, grid)); });
    }
  }
  write_with(dir / "plant_decoupled.csv", [&](std::ostream& os) { write_frequency_response_csv(os, diag); });
}

}  // namespace detail

/// Geometry, placement and control for one case. Never throws for stage
/// failures: the report carries the failing stage and the run stops there.
/// Artifacts produced up to the failure are still written.
inline PipelineRun run_case(const PipelineConfig& cfg, DesignCase which, const RunOptions& opt = {}) {
  cfg.validate();
  namespace fs = std::filesystem;
  const fs::path out_dir(cfg.output_dir);
  PipelineRun run;
  DesignReport& rep = run.report;
  rep.case_name = to_string(which);
  rep.config_hash = config_hash(cfg);
  const bool proposed = which == DesignCase::kProposed;
  const FrequencySpec spec = proposed ? cfg.frequency : cfg.baseline_frequency();
  rep.frequency = spec;
  run.design.design_case = which;

  PipelineStage stage = PipelineStage::kGeometry;
  auto finish = [&]() {
    if (opt.write_artifacts) {
      detail::write_text(out_dir / "report.json", to_json(rep, detail::utc_timestamp()).dump(2) + "\n");
    }
  };
  try {
    if (opt.write_artifacts) {
      detail::write_text(out_dir / "config.json", to_json(cfg).dump(2) + "\n");
    }
    detail::log_line(opt, std::string(rep.case_name) + ": geometry optimization");
    DesignEvaluator evaluator(cfg.design_context(), spec.m_total);
    run.geometry = optimize_geometry(cfg.initial, cfg.bounds, spec, cfg.cobyla, evaluator);
    const GeometryResult& geo = *run.geometry;
    if (opt.write_artifacts) {
      detail::write_with(out_dir / "geometry_history.csv",
                         [&](std::ostream& os) { write_history_csv(os, geo.optimization); });
    }
    detail::fill_structure(rep, evaluator.evaluate(geo.best), spec);
    rep.geometry_feasible = geo.feasible;
    rep.geometry_converged = geo.optimization.converged;
    rep.geometry_evaluations = geo.optimization.evaluations_used;
    rep.fe_solves = geo.fe_solves;
    run.model = geo.model;
    run.design.params = geo.best;
    detail::log_line(opt, std::string(rep.case_name) + ": mass " + std::to_string(rep.stage_weight_kg) + " kg, " +
                              std::to_string(geo.optimization.evaluations_used) + " evaluations");
    if (!geo.feasible) {
      std::ostringstream os;
      os << "geometry optimization ended infeasible (" << geo.optimization.message << "); min constraint "
         << geo.constraint_values.minCoeff();
      throw PipelineError(PipelineStage::kGeometry, os.str());
    }

    stage = PipelineStage::kPlacement;
    const ModalModel& model = *run.model;
    if (proposed) {
      detail::log_line(opt, "proposed: sensor placement");
      run.placement = optimize_placement(model, cfg.vertical_sensors(), cfg.sensor_domain, spec, cfg.gamma,
                                         cfg.placement);
      rep.placement_optimized = true;
      rep.theta_s = run.placement->theta;
      if (opt.write_artifacts) {
        detail::write_with(out_dir / "placement_map.csv",
                           [&](std::ostream& os) { write_placement_map_csv(os, *run.placement); });
      }
    } else {
      rep.theta_s = cfg.magnet_center_theta();
    }
    const GrammianReport gr = placement_objective(model, cfg.vertical_sensors(), rep.theta_s, spec, cfg.gamma);
    rep.placement_objective = gr.objective_value;
    rep.observability = gr.per_mode_observability;
    run.design.theta_s = rep.theta_s;

    stage = PipelineStage::kPlant;
    run.plant = detail::build_decoupled_plant(cfg, model, rep.theta_s, spec.n_controlled, rep);

    stage = PipelineStage::kControl;
    const DecoupledPlant& plant = *run.plant;
    for (Eigen::Index k = 0; k < plant.channels(); ++k) {
      const ModalChannel ch = plant.channel(k);
      detail::log_line(opt, std::string(rep.case_name) + ": synthesizing channel " + ch.label);
      run.channels.push_back(maximize_bandwidth(ch, detail::channel_settings(cfg, model, k)));
      rep.channels.push_back(detail::channel_report(ch.label, run.channels.back()));
      run.design.labels.push_back(ch.label);
      run.design.controllers.push_back(run.channels.back().params);
    }
    rep.multivariable = multivariable_check(plant, run.design.controllers, cfg.curve_grid());
    rep.multivariable_available = true;

    stage = PipelineStage::kIo;
    if (opt.write_artifacts) {
      detail::write_text(out_dir / "design.json", to_json(run.design).dump(2) + "\n");
      detail::write_text(out_dir / "modal.json", modal_to_json(model).dump() + "\n");
      detail::write_curves(out_dir / "curves", cfg, plant, run.design.controllers);
    }
    rep.ok = true;
  } catch (const PipelineError& e) {
    rep.ok = false;
    rep.failed_stage = to_string(e.stage());
    rep.diagnostic = e.what();
  } catch (const Error& e) {
    rep.ok = false;
    rep.failed_stage = to_string(stage);
    rep.diagnostic = std::string("[") + to_string(stage) + "] " + e.what();
  }
  try {
    finish();
  } catch (const PipelineError& e) {
    if (rep.ok) {
      rep.ok = false;
      rep.failed_stage = to_string(e.stage());
      rep.diagnostic = e.what();
    }
  }
  return run;
}

inline PipelineStage stage_from_string(const std::string& s) {
  for (auto st : {PipelineStage::kConfig, PipelineStage::kGeometry, PipelineStage::kPlacement, PipelineStage::kPlant,
                  PipelineStage::kControl, PipelineStage::kIo}) {
    if (s == to_string(st)) return st;
  }
  return PipelineStage::kIo;
}

inline DesignReport checked(PipelineRun&& run) {
  if (!run.report.ok) {
    throw PipelineError(stage_from_string(run.report.failed_stage), run.report.diagnostic);
  }
  return std::move(run.report);
}

/// Proposed case: controlled flexible modes, optimized sensor placement.
inline DesignReport run_pipeline(const PipelineConfig& cfg, const RunOptions& opt = {}) {
  return checked(run_case(cfg, DesignCase::kProposed, opt));
}

/// Baseline case: rigid-body control only, sensors at the magnet-array centres.
inline DesignReport run_baseline(const PipelineConfig& cfg, const RunOptions& opt = {}) {
  return checked(run_case(cfg, DesignCase::kBaseline, opt));
}

/// Rebuilds the structural model, plant and curves of a saved design without
/// re-optimizing. The report's channel metrics come from the saved gains.
inline PipelineRun rebuild_design(const PipelineConfig& cfg, const SavedDesign& design, const RunOptions& opt = {}) {
  cfg.validate();
  PipelineRun run;
  run.design = design;
  DesignReport& rep = run.report;
  const bool proposed = design.design_case == DesignCase::kProposed;
  const FrequencySpec spec = proposed ? cfg.frequency : cfg.baseline_frequency();
  rep.case_name = to_string(design.design_case);
  rep.config_hash = config_hash(cfg);
  rep.frequency = spec;
  rep.theta_s = design.theta_s;
  rep.placement_optimized = proposed;
  DesignEvaluator evaluator(cfg.design_context(), spec.m_total);
  const DesignEvaluation& ev = evaluator.evaluate(design.params);
  detail::fill_structure(rep, ev, spec);
  run.model = ev.model;
  run.plant = detail::build_decoupled_plant(cfg, *run.model, design.theta_s, spec.n_controlled, rep);
  if (static_cast<Eigen::Index>(design.controllers.size()) != run.plant->channels()) {
    throw ConfigError("design file: controller count does not match the plant channels");
  }
  const Eigen::VectorXd grid = SynthesisSettings(cfg.control.synthesis).grid();
  for (Eigen::Index k = 0; k < run.plant->channels(); ++k) {
    ChannelDesign d;
    d.params = design.controllers[static_cast<std::size_t>(k)];
    d.metrics = loop_metrics(run.plant->channel(k), d.params, grid);
    run.channels.push_back(d);
    rep.channels.push_back(detail::channel_report(run.plant->channel(k).label, d));
  }
  rep.multivariable = multivariable_check(*run.plant, design.controllers, cfg.curve_grid());
  rep.multivariable_available = true;
  rep.ok = true;
  if (opt.write_artifacts) {
    detail::write_curves(std::filesystem::path(cfg.output_dir), cfg, *run.plant, design.controllers);
  }
  return run;
}

struct SweepRow {
  double omega_high_hz{0.0};
  double mass_kg{std::numeric_limits<double>::quiet_NaN()};
  double achieved_bandwidth_hz{std::numeric_limits<double>::quiet_NaN()};
  double max_sensitivity{std::numeric_limits<double>::quiet_NaN()};
  bool feasible{false};
  std::string diagnostic;
};

/// Full proposed pipeline for each ω_high (Hz, ascending). Each run writes
/// into its own subdirectory; failed runs become infeasible rows.
inline std::vector<SweepRow> sweep_omega_high(const PipelineConfig& cfg, const std::vector<double>& values_hz,
                                              const RunOptions& opt = {}) {
  if (values_hz.empty()) throw ConfigError("sweep: no omega_high values given");
  for (std::size_t k = 1; k < values_hz.size(); ++k) {
    if (!(values_hz[k] > values_hz[k - 1])) throw ConfigError("sweep: values must be strictly ascending");
  }
  std::vector<SweepRow> rows;
  for (double hz : values_hz) {
    PipelineConfig c = cfg;
    c.frequency.omega_high = hz_to_rad(hz);
    std::ostringstream dir;
    dir << "omega_high_" << hz;
    c.output_dir = (std::filesystem::path(cfg.output_dir) / dir.str()).string();
    SweepRow row;
    row.omega_high_hz = hz;
    try {
      c.validate();
    } catch (const ConfigError& e) {
      row.diagnostic = e.what();
      rows.push_back(row);
      continue;
    }
    detail::log_line(opt, "sweep: omega_high = " + std::to_string(hz) + " Hz");
    const PipelineRun run = run_case(c, DesignCase::kProposed, opt);
    row.mass_kg = run.report.stage_weight_kg;
    row.feasible = run.report.ok;
    row.diagnostic = run.report.diagnostic;
    if (const ChannelReport* z = run.report.channel("z")) row.achieved_bandwidth_hz = z->bandwidth_hz;
    if (!run.report.channels.empty()) {
      row.max_sensitivity = 0.0;
      for (const auto& ch : run.report.channels) row.max_sensitivity = std::max(row.max_sensitivity, ch.max_sensitivity);
    }
    rows.push_back(row);
  }
  return rows;
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "omega_high_hz,mass_kg,achieved_bandwidth_hz,max_sensitivity,feasible\n";
  os.precision(12);
  for (const auto& r : rows) {
    os << r.omega_high_hz << ',' << r.mass_kg << ',' << r.achieved_bandwidth_hz << ',' << r.max_sensitivity << ','
       << (r.feasible ? "true" : "false") << '\n';
  }
}

}  // namespace stageccd

#endif  // STAGECCD_PIPELINE_PIPELINE_HPP
