#include <doctest.h>

#include "wgspdc/outputs.hpp"
#include "wgspdc/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <json.hpp>

using namespace wgspdc;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig small_config(const std::string& outdir) {
  RunConfig cfg = RunConfig::defaults();
  cfg.output.directory = outdir;
  cfg.jsa.cells_h = 128;
  cfg.jsa.cells_v = 128;
  cfg.bands.map_cells = 65;
  cfg.solver.grid_nx = 192;
  cfg.solver.grid_ny = 192;
  cfg.measurement.field_grid_n = 512;
  cfg.measurement.field_pitch_um = 8.0;
  cfg.measurement.bootstrap_resamples = 50;
  return cfg;
}

} // namespace

TEST_CASE("herald pipeline is reproducible byte for byte") {
  auto cfg1 = small_config("test_out_h1");
  auto cfg2 = small_config("test_out_h2");
  auto r1 = run_pipeline(cfg1, "herald");
  auto r2 = run_pipeline(cfg2, "herald");
  REQUIRE(r1.exit_code == 0);
  REQUIRE(r2.exit_code == 0);
  CHECK(slurp("test_out_h1/manifest.json") == slurp("test_out_h2/manifest.json"));
  CHECK(slurp("test_out_h1/herald_report.json") == slurp("test_out_h2/herald_report.json"));
  fs::remove_all("test_out_h1");
  fs::remove_all("test_out_h2");
}

TEST_CASE("m2 pipeline with counting noise is seed-reproducible") {
  auto cfg = small_config("test_out_m2a");
  PipelineArgs args;
  args.m2_source = "hg:0,0";
  args.edge_positions = 41;
  auto r1 = run_pipeline(cfg, "m2", args);
  REQUIRE(r1.exit_code == 0);
  cfg.output.directory = "test_out_m2b";
  auto r2 = run_pipeline(cfg, "m2", args);
  REQUIRE(r2.exit_code == 0);
  CHECK(slurp("test_out_m2a/manifest.json") == slurp("test_out_m2b/manifest.json"));
  CHECK(slurp("test_out_m2a/caustic.csv") == slurp("test_out_m2b/caustic.csv"));

  // a different seed changes the counts
  cfg.output.directory = "test_out_m2c";
  cfg.measurement.seed = 777;
  auto r3 = run_pipeline(cfg, "m2", args);
  REQUIRE(r3.exit_code == 0);
  CHECK(slurp("test_out_m2a/caustic.csv") != slurp("test_out_m2c/caustic.csv"));

  // noiseless HG oracle: fit is the identity within a part in a thousand
  cfg.output.directory = "test_out_m2d";
  args.noiseless = true;
  auto r4 = run_pipeline(cfg, "m2", args);
  REQUIRE(r4.exit_code == 0);
  auto rep = nlohmann::json::parse(slurp("test_out_m2d/m2_report.json"));
  CHECK(std::abs(rep["x"]["m2"].get<double>() - 1.0) < 1e-3);
  CHECK(std::abs(rep["y"]["m2"].get<double>() - 1.0) < 1e-3);

  for (const char* d : {"test_out_m2a", "test_out_m2b", "test_out_m2c", "test_out_m2d"})
    fs::remove_all(d);
}

TEST_CASE("results are identical at any worker-thread cap") {
  auto cfg = small_config("test_out_t1");
  cfg.output.threads = 1;
  auto r1 = run_pipeline(cfg, "herald");
  REQUIRE(r1.exit_code == 0);
  cfg.output.directory = "test_out_t2";
  cfg.output.threads = 2;
  auto r2 = run_pipeline(cfg, "herald");
  REQUIRE(r2.exit_code == 0);
  CHECK(slurp("test_out_t1/herald_report.json") == slurp("test_out_t2/herald_report.json"));
  set_thread_cap(0);
  fs::remove_all("test_out_t1");
  fs::remove_all("test_out_t2");
}

TEST_CASE("manifest lists exactly the emitted files with their hashes") {
  auto cfg = small_config("test_out_mani");
  auto r = run_pipeline(cfg, "herald");
  REQUIRE(r.exit_code == 0);
  auto manifest = nlohmann::json::parse(slurp("test_out_mani/manifest.json"));
  std::size_t on_disk = 0;
  for (const auto& entry : fs::directory_iterator("test_out_mani")) {
    if (entry.path().filename() == "manifest.json") continue;
    ++on_disk;
    bool found = false;
    for (const auto& f : manifest["files"])
      if (f["path"] == entry.path().filename().string()) {
        found = true;
        CHECK(f["bytes"].get<std::size_t>() == fs::file_size(entry.path()));
        CHECK(f["sha256"].get<std::string>() == sha256_hex(slurp(entry.path())));
      }
    CHECK(found);
  }
  CHECK(on_disk == manifest["files"].size());
  fs::remove_all("test_out_mani");
}

TEST_CASE("calibration outside tolerance fails loudly with exit code 4") {
  auto cfg = small_config("test_out_calfail");
  // index-step bounds far too small for the required band separation
  cfg.calibration.delta_n_min = 1e-3;
  cfg.calibration.delta_n_max = 2e-3;
  cfg.calibration.initial_delta_n_h = 1.5e-3;
  cfg.calibration.initial_delta_n_v = 1.5e-3;
  cfg.bands.family_knots = 7;
  auto r = run_pipeline(cfg, "calibrate");
  CHECK(r.exit_code == 4);
  // the failure report carries the per-target residuals
  std::string rep = slurp("test_out_calfail/calibration_report.txt");
  CHECK(rep.find("FAILED") != std::string::npos);
  CHECK(rep.find("residuals") != std::string::npos);
  fs::remove_all("test_out_calfail");
}

TEST_CASE("unknown pipeline and bad source map to the config exit code") {
  auto cfg = small_config("test_out_err");
  auto r = run_pipeline(cfg, "not-a-pipeline");
  CHECK(r.exit_code == 2);
  PipelineArgs args;
  args.m2_source = "banana";
  auto r2 = run_pipeline(cfg, "m2", args);
  CHECK(r2.exit_code == 2);
  // the machine-readable error report lands next to the manifest
  auto err = nlohmann::json::parse(slurp("test_out_err/error.json"));
  CHECK(err.contains("message"));
  fs::remove_all("test_out_err");
}
