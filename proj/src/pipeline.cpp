#include "wgspdc/pipeline.hpp"
#include "wgspdc/beamlab.hpp"
#include "wgspdc/outputs.hpp"

#include <json.hpp>

#include <cmath>
#include <sstream>

namespace wgspdc {

using json = nlohmann::ordered_json;

namespace {

std::string triplet_file_tag(const ModeTriplet& t) {
  return t.pump.str() + "P_" + t.h.str() + "H_" + t.v.str() + "V";
}

json fit_json(const M2AxisFit& f) {
  json j;
  j["axis"] = f.axis == Axis::X ? "x" : "y";
  j["a_um2"] = f.a;
  j["b_um2_per_mm"] = f.b;
  j["c_um2_per_mm2"] = f.c;
  j["z0_mm"] = f.z0_mm;
  j["w0_um"] = f.w0_um;
  j["zr_mm"] = f.zr_mm;
  j["m2"] = f.m2;
  j["m2_sigma"] = f.m2_sigma;
  j["chi2_per_dof"] = f.chi2_per_dof;
  return j;
}

SpectralFilter effective_filter(const RunConfig& cfg, const PipelineArgs& args,
                                const PhaseMatcher& pm) {
  SpectralFilter f = cfg.herald_filter;
  if (args.herald_arm) f.arm = (*args.herald_arm == "H") ? SpectralFilter::Arm::H : SpectralFilter::Arm::V;
  if (args.herald_shape)
    f.shape = (*args.herald_shape == "gaussian") ? SpectralFilter::Shape::Gaussian
                                                 : SpectralFilter::Shape::TopHat;
  if (args.herald_center_nm) f.center_nm = *args.herald_center_nm;
  if (args.herald_fwhm_nm) f.fwhm_nm = *args.herald_fwhm_nm;
  if (f.center_nm <= 0) {
    // default: centre the filter on the fundamental band
    f.center_nm = pm.fundamental_band().degenerate_center_nm;
  }
  return f;
}

json filter_json(const SpectralFilter& f) {
  json j;
  j["arm"] = f.arm == SpectralFilter::Arm::H ? "H" : "V";
  j["shape"] = f.shape == SpectralFilter::Shape::TopHat ? "tophat" : "gaussian";
  j["center_nm"] = f.center_nm;
  j["fwhm_nm"] = f.fwhm_nm;
  return j;
}

void emit_modes(const RunConfig& cfg, ArtifactWriter& out) {
  WaveguideSolver solver(cfg.geometry, cfg.material, cfg.solver_options());
  PmOptions pmo = cfg.pm_options();
  const double lo = (pmo.window_min_nm - pmo.knot_margin_nm) * 1e-3;
  const double hi = (pmo.window_max_nm + pmo.knot_margin_nm) * 1e-3;

  std::string csv = "pol,i,j,lambda_um,n_eff\n";
  json index;
  index["profiles"] = json::array();
  for (Pol pol : {Pol::H, Pol::V, Pol::P}) {
    double scale = pol == Pol::P ? 0.5 : 1.0;
    for (int k = 0; k < pmo.family_knots; ++k) {
      double lambda = scale * (lo + (hi - lo) * k / (pmo.family_knots - 1));
      auto modes = solver.solve(pol, lambda);
      for (const auto& m : *modes)
        csv += pol_name(pol) + "," + std::to_string(m.label.i) + "," + std::to_string(m.label.j) +
               "," + format_double(lambda) + "," + format_double(m.n_eff) + "\n";
    }
    if (cfg.output.write_pgm) {
      double lambda_ref = scale * cfg.bands.gamma_ref_nm * 1e-3;
      auto modes = solver.solve(pol, lambda_ref);
      for (const auto& m : *modes) {
        auto intensity = m.intensity();
        std::string name = "mode_" + pol_name(pol) + "_" + m.label.str() + ".pgm";
        json side;
        side["x0_um"] = m.grid.x0;
        side["y0_um"] = m.grid.y0;
        side["dx_um"] = m.grid.dx;
        side["dy_um"] = m.grid.dy;
        side["lambda_um"] = lambda_ref;
        side["n_eff"] = m.n_eff;
        out.write_pgm16(name, intensity.v, m.grid.nx, m.grid.ny, side.dump(2) + "\n");
        json entry;
        entry["pol"] = pol_name(pol);
        entry["mode"] = m.label.str();
        entry["file"] = name;
        entry["n_eff"] = m.n_eff;
        index["profiles"].push_back(entry);
      }
    }
  }
  out.write_bytes("modes.csv", csv);
  out.write_bytes("modes_index.json", index.dump(2) + "\n");
}

void emit_bands(const RunConfig& cfg, ArtifactWriter& out) {
  PhaseMatcher pm(WaveguideSolver(cfg.geometry, cfg.material, cfg.solver_options()),
                  cfg.pm_options());
  auto summary = pm.band_summary();

  json j;
  j["fundamental"]["triplet"] = summary.fundamental.triplet.name();
  j["fundamental"]["degenerate_center_nm"] = summary.fundamental.degenerate_center_nm;
  j["fundamental"]["fwhm_nm"] = summary.fundamental.fwhm_nm;
  j["fundamental"]["gamma_per_um"] = summary.fundamental.triplet.gamma_per_um;
  j["fundamental"]["center_curve"] = json::array();
  for (auto [lh, lv] : summary.fundamental.center_curve) {
    json p;
    p["lambda_h_nm"] = lh;
    p["lambda_v_nm"] = lv;
    j["fundamental"]["center_curve"].push_back(p);
  }
  j["min_separation_nm"] = summary.min_separation_nm;
  j["bands"] = json::array();
  for (const auto& e : summary.bands) {
    json b;
    b["triplet"] = e.triplet.name();
    b["gamma_per_um"] = e.triplet.gamma_per_um;
    b["degenerate_centers_nm"] = e.degenerate_centers_nm;
    b["separation_nm"] = e.separation_nm;
    j["bands"].push_back(b);
  }
  out.write_bytes("band_summary.json", j.dump(2) + "\n");

  SpectralGrid gh{cfg.bands.map_cells, cfg.bands.window_min_nm, cfg.bands.window_max_nm};
  SpectralGrid gv = gh;
  std::vector<double> composite(static_cast<std::size_t>(gh.n) * gv.n, 0.0);
  auto write_map = [&](const ModeTriplet& t) {
    auto map = pm.map_band(t, gh, gv);
    std::vector<std::vector<double>> rows;
    rows.reserve(map.size());
    for (int jv = 0; jv < gv.n; ++jv)
      for (int ih = 0; ih < gh.n; ++ih)
        rows.push_back({gh.inv_per_um(ih), gv.inv_per_um(jv), gh.lambda_nm(ih), gv.lambda_nm(jv),
                        map[static_cast<std::size_t>(jv) * gh.n + ih]});
    out.write_csv("band_" + triplet_file_tag(t) + ".csv",
                  "inv_lambda_H_per_um,inv_lambda_V_per_um,lambda_H_nm,lambda_V_nm,amplitude",
                  rows);
    for (std::size_t q = 0; q < map.size(); ++q)
      composite[q] = std::max(composite[q], std::abs(map[q]));
  };
  write_map(summary.fundamental.triplet);
  for (const auto& e : summary.bands) write_map(e.triplet);

  if (cfg.output.write_pgm) {
    json side;
    side["lambda_min_nm"] = gh.lambda_min_nm;
    side["lambda_max_nm"] = gh.lambda_max_nm;
    side["axes"] = "linear in 1/lambda; row 0 = shortest lambda_V";
    out.write_pgm16("bands_map.pgm", composite, gh.n, gv.n, side.dump(2) + "\n");
  }
}

void emit_sfg_map(const RunConfig& cfg, ArtifactWriter& out, double filter_fwhm_nm) {
  PhaseMatcher pm(WaveguideSolver(cfg.geometry, cfg.material, cfg.solver_options()),
                  cfg.pm_options());
  auto band = pm.fundamental_band();
  double c = band.degenerate_center_nm;
  double half = std::max(4.0 * band.fwhm_nm + 2.0 * filter_fwhm_nm, 3.0);
  const int n = 121;
  std::vector<std::vector<double>> rows;
  std::vector<double> map(static_cast<std::size_t>(n) * n);
  for (int jv = 0; jv < n; ++jv) {
    double l2 = c - half + 2.0 * half * jv / (n - 1);
    for (int ih = 0; ih < n; ++ih) {
      double l1 = c - half + 2.0 * half * ih / (n - 1);
      double v = pm.sfg_response(band.triplet, l1, l2, filter_fwhm_nm);
      map[static_cast<std::size_t>(jv) * n + ih] = v;
      rows.push_back({l1, l2, v});
    }
  }
  out.write_csv("sfg_map.csv", "lambda_1_nm,lambda_2_nm,relative_power", rows);
  if (cfg.output.write_pgm) {
    json side;
    side["center_nm"] = c;
    side["half_span_nm"] = half;
    side["filter_fwhm_nm"] = filter_fwhm_nm;
    out.write_pgm16("sfg_map.pgm", map, n, n, side.dump(2) + "\n");
  }
  json j;
  j["fundamental_center_nm"] = c;
  j["band_fwhm_nm"] = band.fwhm_nm;
  j["filter_fwhm_nm"] = filter_fwhm_nm;
  out.write_bytes("sfg_summary.json", j.dump(2) + "\n");
}

json herald_report(const RunConfig& cfg, const PhaseMatcher& pm, const JointSpectrum& js,
                   const SpectralFilter& filter) {
  auto filtered = apply_filter(js, filter);
  auto heralded_arm = filter.arm == SpectralFilter::Arm::V ? SpectralFilter::Arm::H
                                                           : SpectralFilter::Arm::V;
  auto st = heralded_spatial_state(filtered, heralded_arm);
  json j;
  j["filter"] = filter_json(filter);
  j["heralded_arm"] = heralded_arm == SpectralFilter::Arm::H ? "H" : "V";
  j["purity"] = st.purity;
  j["dominant_mode"] = st.dominant.str();
  j["dominant_population"] = st.dominant_population;
  j["basis"] = json::array();
  for (const auto& b : st.basis) j["basis"].push_back(b.str());
  j["rho"] = json::array();
  const int dim = static_cast<int>(st.basis.size());
  for (int a = 0; a < dim; ++a) {
    json row = json::array();
    for (int b = 0; b < dim; ++b) {
      json ent;
      ent["re"] = st.element(a, b).real();
      ent["im"] = st.element(a, b).imag();
      row.push_back(ent);
    }
    j["rho"].push_back(row);
  }
  (void)cfg;
  (void)pm;
  return j;
}

void emit_jsa(const RunConfig& cfg, const PipelineArgs& args, ArtifactWriter& out,
              bool full_outputs) {
  PhaseMatcher pm(WaveguideSolver(cfg.geometry, cfg.material, cfg.solver_options()),
                  cfg.pm_options());
  auto js = build_jsa(pm, cfg.excitation, cfg.pump, cfg.jsa_options());

  SpectralFilter filter = effective_filter(cfg, args, pm);
  json herald = herald_report(cfg, pm, js, filter);
  out.write_bytes("herald_report.json", herald.dump(2) + "\n");

  if (!full_outputs) return;

  auto jsi = jsi_map(js);
  auto islands = detect_islands(jsi, js.grid_h, js.grid_v, cfg.jsa.island_threshold);
  json ij;
  ij["threshold_fraction"] = cfg.jsa.island_threshold;
  ij["islands"] = json::array();
  for (const auto& isl : islands) {
    json e;
    e["centroid_h_nm"] = isl.centroid_h_nm;
    e["centroid_v_nm"] = isl.centroid_v_nm;
    e["weight"] = isl.weight;
    e["cells"] = isl.cell_count;
    e["bbox_h_nm"] = json::array({isl.min_h_nm, isl.max_h_nm});
    e["bbox_v_nm"] = json::array({isl.min_v_nm, isl.max_v_nm});
    ij["islands"].push_back(e);
  }
  out.write_bytes("islands.json", ij.dump(2) + "\n");

  if (cfg.output.write_pgm) {
    json side;
    side["lambda_min_nm"] = js.grid_h.lambda_min_nm;
    side["lambda_max_nm"] = js.grid_h.lambda_max_nm;
    side["axes"] = "linear in 1/lambda; row 0 = shortest lambda_V";
    out.write_pgm16("jsi.pgm", jsi, js.grid_h.n, js.grid_v.n, side.dump(2) + "\n");
  }

  // per-channel amplitude grids, decimated to keep the text artifacts sane
  const int dec = 4;
  double total = js.total_intensity();
  auto w = js.cell_weights();
  for (const auto& ch : js.channels) {
    double ci = 0;
    for (std::size_t q = 0; q < ch.amp.size(); ++q) ci += std::norm(ch.amp[q]) * w[q];
    if (ci < 1e-3 * total) continue;
    std::vector<std::vector<double>> rows;
    for (int jv = 0; jv < js.grid_v.n; jv += dec)
      for (int ih = 0; ih < js.grid_h.n; ih += dec) {
        cdouble a = ch.amp[static_cast<std::size_t>(jv) * js.grid_h.n + ih];
        rows.push_back({js.grid_h.inv_per_um(ih), js.grid_v.inv_per_um(jv),
                        js.grid_h.lambda_nm(ih), js.grid_v.lambda_nm(jv), a.real(), a.imag()});
      }
    out.write_csv("jsa_channel_" + ch.h.str() + "H_" + ch.v.str() + "V.csv",
                  "inv_lambda_H_per_um,inv_lambda_V_per_um,lambda_H_nm,lambda_V_nm,re,im", rows);
  }
}

void emit_m2(const RunConfig& cfg, const PipelineArgs& args, ArtifactWriter& out) {
  const double lambda_nm = cfg.bands.gamma_ref_nm;
  FieldGridSpec grid = cfg.field_grid();

  MixedBeam beam;
  if (args.m2_source.rfind("hg:", 0) == 0) {
    int n = 0, m = 0;
    if (std::sscanf(args.m2_source.c_str(), "hg:%d,%d", &n, &m) != 2)
      throw ConfigError("m2 source must be 'heralded', 'hg:N,M' or 'mode:IJ'");
    grid.collection_na = 0.0; // analytic oracle field, no collection optics
    beam.components.push_back(hg_field(n, m, cfg.measurement.waist_um, lambda_nm, grid));
    beam.weights.push_back(1.0);
  } else if (args.m2_source.rfind("mode:", 0) == 0) {
    ModeLabel label = mode_label_from_string(args.m2_source.substr(5));
    WaveguideSolver solver(cfg.geometry, cfg.material, cfg.solver_options());
    auto modes = solver.solve(Pol::H, lambda_nm * 1e-3);
    const GuidedMode* pick = nullptr;
    const GuidedMode* fund = nullptr;
    for (const auto& m : *modes) {
      if (m.label == label) pick = &m;
      if (m.label == ModeLabel{0, 0}) fund = &m;
    }
    if (!pick || !fund) throw SolverError("m2: mode " + label.str() + " is not guided here");
    // magnify so the fundamental maps onto the stated waist
    std::vector<double> ix(fund->fx.size()), iy(fund->fy.size());
    for (std::size_t q = 0; q < ix.size(); ++q) ix[q] = fund->fx[q] * fund->fx[q];
    for (std::size_t q = 0; q < iy.size(); ++q) iy[q] = fund->fy[q] * fund->fy[q];
    double wx = second_moment_width(ix, fund->grid.dx);
    double wy = second_moment_width(iy, fund->grid.dy);
    double mag = cfg.measurement.waist_um / std::sqrt(wx * wy);
    beam.components.push_back(facet_field(*pick, lambda_nm, grid, mag));
    beam.weights.push_back(1.0);
  } else if (args.m2_source == "heralded") {
    WaveguideSolver solver(cfg.geometry, cfg.material, cfg.solver_options());
    PhaseMatcher pm(solver, cfg.pm_options());
    auto js = build_jsa(pm, cfg.excitation, cfg.pump, cfg.jsa_options());
    SpectralFilter filter = effective_filter(cfg, args, pm);
    auto filtered = apply_filter(js, filter);
    auto heralded_arm = filter.arm == SpectralFilter::Arm::V ? SpectralFilter::Arm::H
                                                             : SpectralFilter::Arm::V;
    auto st = heralded_spatial_state(filtered, heralded_arm);
    Pol arm_pol = heralded_arm == SpectralFilter::Arm::H ? Pol::H : Pol::V;
    auto arm_modes = solver.solve(arm_pol, lambda_nm * 1e-3);
    beam = heralded_mixed_beam(st, *arm_modes, lambda_nm, grid, cfg.measurement.waist_um);
  } else {
    throw ConfigError("m2 source must be 'heralded', 'hg:N,M' or 'mode:IJ'");
  }

  json report;
  report["source"] = args.m2_source;
  report["lambda_nm"] = lambda_nm;
  std::vector<std::vector<double>> rows;
  for (Axis axis : {Axis::X, Axis::Y}) {
    auto [z0, zr] = estimate_beam_caustic(beam, axis, cfg.measurement.zr_guess_mm);
    auto plan = iso_sampling_plan(z0, zr, cfg.measurement.plan_inside, cfg.measurement.plan_outside);
    std::optional<KnifeEdgeOptions> noise;
    bool noiseless = args.noiseless.value_or(cfg.measurement.noiseless);
    if (!noiseless) {
      KnifeEdgeOptions ko;
      ko.budget = args.budget.value_or(cfg.measurement.budget_counts);
      ko.seed = args.seed.value_or(cfg.measurement.seed) + (axis == Axis::X ? 0 : 1);
      ko.accidental_floor = cfg.measurement.accidental_floor_counts;
      ko.bootstrap_resamples = cfg.measurement.bootstrap_resamples;
      noise = ko;
    }
    auto scan = mixture_caustic(beam, plan, axis, noise,
                                args.edge_positions.value_or(cfg.measurement.edge_positions));
    for (const auto& r : scan.records)
      rows.push_back({r.z_mm, axis == Axis::X ? 0.0 : 1.0, r.w_um, r.sigma_w_um});
    auto fit = fit_m2(scan, axis);
    report[axis == Axis::X ? "x" : "y"] = fit_json(fit);
  }
  out.write_csv("caustic.csv", "z_mm,axis,w_um,sigma_w_um", rows);
  out.write_bytes("m2_report.json", report.dump(2) + "\n");
}

json calibration_json(const CalibrationReport& rep) {
  json j;
  j["within_tolerance"] = rep.within_tolerance;
  j["poling_period_um"] = rep.geometry.poling_period_um;
  j["delta_n_h"] = rep.geometry.delta_n_h;
  j["delta_n_v"] = rep.geometry.delta_n_v;
  j["achieved_center_nm"] = rep.achieved_center_nm;
  j["achieved_fwhm_nm"] = rep.achieved_fwhm_nm;
  j["achieved_min_separation_nm"] = rep.achieved_min_separation_nm;
  j["residuals"] = rep.residuals;
  j["iterations"] = rep.iterations;
  return j;
}

void emit_calibrate(const RunConfig& cfg, const PipelineArgs& args, ArtifactWriter& out) {
  WaveguideGeometry start = cfg.geometry;
  start.poling_period_um = cfg.calibration.initial_poling_period_um;
  start.delta_n_h = cfg.calibration.initial_delta_n_h;
  start.delta_n_v = cfg.calibration.initial_delta_n_v;

  CalibrationReport rep;
  try {
    rep = calibrate(start, cfg.material, cfg.calibration_targets(), cfg.calibration_bounds(),
                    cfg.pm_options(), cfg.solver_options());
  } catch (const CalibrationError& e) {
    out.write_bytes("calibration_report.txt", std::string(e.what()) + "\n");
    throw;
  }
  out.write_bytes("calibration_report.txt", rep.to_string() + "\n");
  out.write_bytes("calibration_report.json", calibration_json(rep).dump(2) + "\n");

  if (!args.config_write_back.empty()) {
    RunConfig updated = cfg;
    updated.geometry = rep.geometry;
    write_config(updated, args.config_write_back);
  }
}

} // namespace

PipelineResult run_pipeline(const RunConfig& cfg, const std::string& pipeline,
                            const PipelineArgs& args) {
  if (cfg.output.threads) set_thread_cap(cfg.output.threads);
  ArtifactWriter out(cfg.output.directory);
  PipelineResult res;
  try {
    if (pipeline == "modes") {
      emit_modes(cfg, out);
    } else if (pipeline == "bands") {
      emit_bands(cfg, out);
    } else if (pipeline == "sfg-map") {
      emit_sfg_map(cfg, out, args.sfg_filter_fwhm_nm);
    } else if (pipeline == "jsa") {
      emit_jsa(cfg, args, out, true);
    } else if (pipeline == "herald") {
      emit_jsa(cfg, args, out, false);
    } else if (pipeline == "m2") {
      emit_m2(cfg, args, out);
    } else if (pipeline == "calibrate") {
      emit_calibrate(cfg, args, out);
    } else {
      throw ConfigError("unknown pipeline: " + pipeline);
    }
    res.manifest_path = out.finish_manifest();
    res.message = "ok";
    return res;
  } catch (const std::exception& e) {
    json err;
    err["pipeline"] = pipeline;
    err["error"] = typeid(e).name();
    err["message"] = e.what();
    out.write_bytes("error.json", err.dump(2) + "\n");
    res.manifest_path = out.finish_manifest();
    res.message = e.what();
    if (dynamic_cast<const ConfigError*>(&e)) {
      res.exit_code = 2;
    } else if (dynamic_cast<const CalibrationError*>(&e)) {
      res.exit_code = 4;
    } else {
      res.exit_code = 3;
    }
    return res;
  }
}

} // namespace wgspdc
