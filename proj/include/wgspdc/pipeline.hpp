#pragma once

#include "wgspdc/config.hpp"

#include <optional>
#include <string>

namespace wgspdc {

// Per-invocation knobs that arrive as CLI flags rather than configuration.
struct PipelineArgs {
  // m2 source: "heralded", "hg:N,M" or "mode:IJ"
  std::string m2_source = "heralded";
  std::optional<double> budget;
  std::optional<std::uint64_t> seed;
  std::optional<bool> noiseless;
  std::optional<int> edge_positions;
  // herald filter overrides
  std::optional<std::string> herald_arm;
  std::optional<std::string> herald_shape;
  std::optional<double> herald_center_nm;
  std::optional<double> herald_fwhm_nm;
  // sfg filter width
  double sfg_filter_fwhm_nm = 0.6;
  // calibrate: write the result back to this configuration file
  std::string config_write_back;
};

struct PipelineResult {
  int exit_code = 0;
  std::string manifest_path;
  std::string message;
};

// Valid names: modes, bands, sfg-map, jsa, herald, m2, calibrate.
// Writes artifacts plus a manifest (path, bytes, sha256 per file) into the
// configured output directory; on failure emits error.json and the matching
// exit code (2 config, 3 numeric/solver, 4 calibration threshold).
PipelineResult run_pipeline(const RunConfig& cfg, const std::string& pipeline,
                            const PipelineArgs& args = {});

} // namespace wgspdc
