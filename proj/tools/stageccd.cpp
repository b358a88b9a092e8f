// stageccd: command-line driver for the stage co-design pipeline.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stageccd/stageccd.hpp"

namespace {

using namespace stageccd;

struct CommonOptions {
  std::string config;
  std::string out;
  int resolution{0};
  bool quiet{false};
};

void add_common(CLI::App* sub, CommonOptions& o) {
  sub->add_option("--config", o.config, "Pipeline configuration (JSON)")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", o.out, "Output directory (overrides output_dir)");
  sub->add_option("--resolution", o.resolution, "Mesh elements per edge (overrides mesh.resolution)")
      ->check(CLI::Range(4, 400));
  sub->add_flag("--quiet", o.quiet, "Suppress progress output");
}

PipelineConfig load(const CommonOptions& o) {
  PipelineConfig cfg = load_config(o.config);
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (o.resolution > 0) cfg.resolution = o.resolution;
  cfg.validate();
  return cfg;
}

void print_report(const DesignReport& r) {
  std::cout << std::fixed << std::setprecision(3);
  std::cout << r.case_name << (r.ok ? "" : " (FAILED)") << "\n"
            << "  stage weight      " << r.stage_weight_kg << " kg\n"
            << "  first resonance   " << r.first_res_freq_hz << " Hz\n"
            << "  second resonance  " << r.second_res_freq_hz << " Hz\n"
            << "  sensor theta_s    (" << r.theta_s.x() * 1e3 << ", " << r.theta_s.y() * 1e3 << ") mm\n";
  for (const auto& c : r.channels) {
    std::cout << "  " << std::left << std::setw(4) << c.label << std::right << " bandwidth " << std::setw(9)
              << c.bandwidth_hz << " Hz   max |S| " << c.max_sensitivity << (c.stable ? "" : "  UNSTABLE") << "\n";
  }
  if (!r.ok) std::cout << "  " << r.diagnostic << "\n";
}

int run_one(const CommonOptions& o, DesignCase which) {
  const PipelineConfig cfg = load(o);
  RunOptions ro;
  ro.log = o.quiet ? nullptr : &std::cerr;
  const PipelineRun run = run_case(cfg, which, ro);
  if (!o.quiet) print_report(run.report);
  if (!run.report.ok) {
    std::cerr << "stageccd: " << run.report.diagnostic << "\n";
    return exit_code(stage_from_string(run.report.failed_stage));
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequential structure, placement and control co-design for lightweight motion stages"};
  app.require_subcommand(1);

  CommonOptions design_opt, baseline_opt, sweep_opt, bode_opt, validate_opt;
  std::vector<double> sweep_values;
  std::string design_file;

  auto* design = app.add_subcommand("design", "Run the proposed pipeline (geometry, placement, control)");
  add_common(design, design_opt);
  auto* baseline = app.add_subcommand("baseline", "Run the baseline pipeline (rigid-body control only)");
  add_common(baseline, baseline_opt);
  auto* sweep = app.add_subcommand("sweep", "Run the proposed pipeline for several omega_high values");
  add_common(sweep, sweep_opt);
  sweep->add_option("--values", sweep_values, "omega_high values in Hz, ascending")
      ->required()
      ->delimiter(',');
  auto* bode = app.add_subcommand("bode", "Re-export curves of a saved design without re-optimizing");
  add_common(bode, bode_opt);
  bode->add_option("--design", design_file, "design.json written by design or baseline")
      ->required()
      ->check(CLI::ExistingFile);
  auto* validate = app.add_subcommand("validate-config", "Check a configuration and print its hash");
  add_common(validate, validate_opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*design) return run_one(design_opt, DesignCase::kProposed);
    if (*baseline) return run_one(baseline_opt, DesignCase::kBaseline);
    if (*sweep) {
      const PipelineConfig cfg = load(sweep_opt);
      RunOptions ro;
      ro.log = sweep_opt.quiet ? nullptr : &std::cerr;
      const auto rows = sweep_omega_high(cfg, sweep_values, ro);
      const std::filesystem::path path = std::filesystem::path(cfg.output_dir) / "sweep.csv";
      std::filesystem::create_directories(path.parent_path());
      std::ofstream out(path);
      if (!out) throw PipelineError(PipelineStage::kIo, "cannot write " + path.string());
      write_sweep_csv(out, rows);
      if (!sweep_opt.quiet) write_sweep_csv(std::cout, rows);
      return kExitOk;
    }
    if (*bode) {
      const PipelineConfig cfg = load(bode_opt);
      const SavedDesign saved = load_saved_design(design_file);
      RunOptions ro;
      const PipelineRun run = rebuild_design(cfg, saved, ro);
      std::ofstream out(std::filesystem::path(cfg.output_dir) / "report_rebuilt.json");
      if (!out) throw PipelineError(PipelineStage::kIo, "cannot write report_rebuilt.json");
      out << to_json(run.report).dump(2) << "\n";
      if (!bode_opt.quiet) print_report(run.report);
      return kExitOk;
    }
    if (*validate) {
      const PipelineConfig cfg = load(validate_opt);
      if (!validate_opt.quiet) std::cout << "config ok, hash " << config_hash(cfg) << "\n";
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "stageccd: config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const PipelineError& e) {
    std::cerr << "stageccd: " << e.what() << "\n";
    return e.exit_code();
  } catch (const Error& e) {
    std::cerr << "stageccd: " << e.what() << "\n";
    return 1;
  }
  return kExitUsage;
}
