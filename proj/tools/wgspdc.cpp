// wgspdc: desk-scale simulation of spatially pure photon-pair generation in a
// multimode PPKTP waveguide. Subcommands map onto the analysis pipelines:
// guided modes, phase-matching bands, SFG spectroscopy, joint spectra and
// heralding, knife-edge M2 characterization and model calibration.

#include "wgspdc/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

using namespace wgspdc;

int main(int argc, char** argv) {
  CLI::App app{"multimode-waveguide photon pair source simulator"};
  app.require_subcommand(1);

  std::string config_path;
  if (const char* env = std::getenv("WGSPDC_CONFIG")) config_path = env;
  app.add_option("-c,--config", config_path, "configuration file (or WGSPDC_CONFIG)");
  std::string output_dir;
  app.add_option("-o,--output-dir", output_dir, "override the output directory");
  unsigned threads = 0;
  app.add_option("--threads", threads, "cap worker threads (0 = hardware)");

  PipelineArgs args;

  auto* cmd_init = app.add_subcommand("config-init", "write the default configuration file");
  std::string init_path = "wgspdc.json";
  cmd_init->add_option("path", init_path, "where to write it");

  app.add_subcommand("modes", "guided modes: effective indices and profiles");
  app.add_subcommand("bands", "phase-matching band maps and summary");

  auto* cmd_sfg = app.add_subcommand("sfg-map", "mode-resolved SFG response map");
  cmd_sfg->add_option("--filter-fwhm-nm", args.sfg_filter_fwhm_nm,
                      "tuning filter FWHM (0 = unfiltered)");

  auto* cmd_jsa = app.add_subcommand("jsa", "joint spectra, islands and herald report");
  auto* cmd_herald = app.add_subcommand("herald", "heralded spatial state report only");
  for (CLI::App* c : {cmd_jsa, cmd_herald}) {
    c->add_option("--arm", [&args](const std::vector<std::string>& v) {
        args.herald_arm = v.front();
        return true;
      }, "herald filter arm: H or V");
    c->add_option("--shape", [&args](const std::vector<std::string>& v) {
        args.herald_shape = v.front();
        return true;
      }, "filter shape: tophat or gaussian");
    c->add_option("--center-nm", [&args](const std::vector<std::string>& v) {
        args.herald_center_nm = std::stod(v.front());
        return true;
      }, "filter center (0 = auto on the fundamental band)");
    c->add_option("--fwhm-nm", [&args](const std::vector<std::string>& v) {
        args.herald_fwhm_nm = std::stod(v.front());
        return true;
      }, "filter FWHM in nm");
  }

  auto* cmd_m2 = app.add_subcommand("m2", "knife-edge caustic scan and M2 fit");
  cmd_m2->add_option("--source", args.m2_source, "heralded | hg:N,M | mode:IJ");
  cmd_m2->add_option("--budget", [&args](const std::vector<std::string>& v) {
      args.budget = std::stod(v.front());
      return true;
    }, "expected counts per edge position");
  cmd_m2->add_option("--seed", [&args](const std::vector<std::string>& v) {
      args.seed = std::stoull(v.front());
      return true;
    }, "counting noise seed");
  cmd_m2->add_option("--positions", [&args](const std::vector<std::string>& v) {
      args.edge_positions = std::stoi(v.front());
      return true;
    }, "edge positions per plane");
  cmd_m2->add_flag("--noiseless", [&args](std::int64_t) { args.noiseless = true; },
                   "skip counting noise");
  int plan_inside = 0, plan_outside = 0;
  cmd_m2->add_option("--plan-inside", plan_inside, "planes inside the Rayleigh range (>= 5)");
  cmd_m2->add_option("--plan-outside", plan_outside, "planes beyond twice the Rayleigh range (>= 5)");

  auto* cmd_cal = app.add_subcommand("calibrate", "fit poling period and index steps to the band targets");
  bool cal_no_write = false;
  cmd_cal->add_flag("--no-write-back", cal_no_write, "do not update the configuration file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_init->parsed()) {
      write_config(RunConfig::defaults(), init_path);
      std::cout << "wrote " << init_path << "\n";
      return 0;
    }

    RunConfig cfg = config_path.empty() ? RunConfig::defaults() : parse_config(config_path);
    if (!output_dir.empty()) cfg.output.directory = output_dir;
    if (threads) cfg.output.threads = threads;
    if (plan_inside) cfg.measurement.plan_inside = plan_inside;
    if (plan_outside) cfg.measurement.plan_outside = plan_outside;

    std::string pipeline;
    for (const auto* c : app.get_subcommands()) pipeline = c->get_name();
    if (pipeline == "calibrate" && !cal_no_write && !config_path.empty())
      args.config_write_back = config_path;

    PipelineResult res = run_pipeline(cfg, pipeline, args);
    if (res.exit_code == 0) {
      std::cout << "manifest: " << res.manifest_path << "\n";
      if (pipeline == "calibrate") {
        std::ifstream rep(cfg.output.directory + "/calibration_report.txt");
        std::cout << rep.rdbuf();
      }
    } else {
      std::cerr << res.message << "\n";
    }
    return res.exit_code;
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 3;
  }
}
