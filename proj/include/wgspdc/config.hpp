#pragma once

#include "wgspdc/beamlab.hpp"
#include "wgspdc/jsa.hpp"
#include "wgspdc/modesolver.hpp"
#include "wgspdc/phasematch.hpp"

#include <string>
#include <vector>

namespace wgspdc {

// Full run configuration. Keys carry explicit unit suffixes and unknown keys
// are rejected; parse errors are collected (all of them, with dotted key
// addresses) before failing.
struct RunConfig {
  MaterialSet material;
  WaveguideGeometry geometry;
  PumpEnvelope pump;
  PumpExcitation excitation;

  struct Bands {
    double window_min_nm = 780.0;
    double window_max_nm = 820.0;
    int family_knots = 11;
    int scan_points = 2001;
    double gamma_ref_nm = 799.8;
    int map_cells = 257;
  } bands;

  struct Jsa {
    int cells_h = 512;
    int cells_v = 512;
    double lambda_min_nm = 780.0;
    double lambda_max_nm = 820.0;
    double island_threshold = 0.5;
    double channel_floor_rel = 1e-10;
  } jsa;

  SpectralFilter herald_filter; // center_nm = 0 means: center on the main island

  struct Measurement {
    double waist_um = 50.0;
    double budget_counts = 1e5;
    int edge_positions = 55;
    std::uint64_t seed = 12345;
    int plan_inside = 5;
    int plan_outside = 8;
    int bootstrap_resamples = 200;
    int field_grid_n = 1024;
    double field_pitch_um = 4.0;
    double collection_na = 0.8;
    double accidental_floor_counts = 0.0;
    bool noiseless = false;
    double zr_guess_mm = 10.0;
  } measurement;

  struct Counting {
    double coincidence_window_ns = 6.0;
    double observed_coincidence_hz = 12000.0;
    double coincidence_to_singles_ratio = 0.15;
    double pair_rate_hz = 0.0; // 0: inferred from the observables above
    double efficiency_herald = 0.0;
    double efficiency_signal = 0.0;
    double dark_herald_hz = 0.0;
    double dark_signal_hz = 0.0;
  } counting;

  struct Calibration {
    double initial_poling_period_um = 2.4;
    double initial_delta_n_h = 0.03;
    double initial_delta_n_v = 0.03;
    double center_nm = 799.8;
    double center_tolerance_nm = 0.05;
    double min_separation_nm = 5.0;
    double target_separation_nm = 5.5;
    double fwhm_nm = 0.7;
    double fwhm_tolerance_nm = 0.3;
    double poling_min_um = 1.0;
    double poling_max_um = 500.0;
    double delta_n_min = 1e-3;
    double delta_n_max = 5e-2;
  } calibration;

  struct Solver {
    int grid_nx = 512;
    int grid_ny = 512;
    int label_cap = 3;
    int scan_points = 480;
  } solver;

  struct Output {
    std::string directory = "out";
    bool write_pgm = true;
    unsigned threads = 0;
  } output;

  // derived option bundles
  SolverOptions solver_options() const;
  PmOptions pm_options() const;
  JsaOptions jsa_options() const;
  FieldGridSpec field_grid() const;
  CalibrationTargets calibration_targets() const;
  CalibrationBounds calibration_bounds() const;

  static RunConfig defaults();
};

// Parse/serialize; parse_config throws ConfigError whose message lists every
// violation. Round trip is value-identical.
RunConfig parse_config(const std::string& path);
RunConfig parse_config_text(const std::string& text, const std::string& origin = "<string>");
std::string serialize_config(const RunConfig& cfg);
void write_config(const RunConfig& cfg, const std::string& path);

std::string mode_label_string(ModeLabel l);
ModeLabel mode_label_from_string(const std::string& s);

} // namespace wgspdc
