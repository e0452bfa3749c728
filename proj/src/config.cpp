#include "wgspdc/config.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace wgspdc {

using json = nlohmann::ordered_json;

std::string mode_label_string(ModeLabel l) { return l.str(); }

ModeLabel mode_label_from_string(const std::string& s) {
  if (s.size() != 2 || !std::isdigit(static_cast<unsigned char>(s[0])) ||
      !std::isdigit(static_cast<unsigned char>(s[1])))
    throw std::invalid_argument("mode label must be two digits (width, depth nodes), got '" + s + "'");
  return {s[0] - '0', s[1] - '0'};
}

namespace {

// Collects every violation with a dotted key path before failing.
struct Errors {
  std::vector<std::string> list;
  void add(const std::string& path, const std::string& what) { list.push_back(path + ": " + what); }
  void raise_if_any(const std::string& origin) const {
    if (list.empty()) return;
    std::ostringstream os;
    os << "configuration " << origin << " has " << list.size() << " error(s):";
    for (const auto& e : list) os << "\n  - " << e;
    throw ConfigError(os.str());
  }
};

struct Section {
  const json* obj;
  std::string path;
  Errors* errs;
  mutable std::vector<std::string> seen;

  const json* get(const std::string& key) const {
    seen.push_back(key);
    if (!obj || !obj->contains(key)) {
      errs->add(path + "." + key, "missing key");
      return nullptr;
    }
    return &(*obj)[key];
  }

  double number(const std::string& key, double fallback = 0) const {
    const json* v = get(key);
    if (!v) return fallback;
    if (!v->is_number()) {
      errs->add(path + "." + key, "expected a number");
      return fallback;
    }
    return v->get<double>();
  }

  int integer(const std::string& key, int fallback = 0) const {
    const json* v = get(key);
    if (!v) return fallback;
    if (!v->is_number_integer()) {
      errs->add(path + "." + key, "expected an integer");
      return fallback;
    }
    return v->get<int>();
  }

  bool boolean(const std::string& key, bool fallback = false) const {
    const json* v = get(key);
    if (!v) return fallback;
    if (!v->is_boolean()) {
      errs->add(path + "." + key, "expected a boolean");
      return fallback;
    }
    return v->get<bool>();
  }

  std::string text(const std::string& key, const std::string& fallback = "") const {
    const json* v = get(key);
    if (!v) return fallback;
    if (!v->is_string()) {
      errs->add(path + "." + key, "expected a string");
      return fallback;
    }
    return v->get<std::string>();
  }

  Section section(const std::string& key) const {
    const json* v = get(key);
    if (v && !v->is_object()) {
      errs->add(path + "." + key, "expected an object");
      v = nullptr;
    }
    return {v, path.empty() ? key : path + "." + key, errs, {}};
  }

  void finish() const {
    if (!obj) return;
    for (auto it = obj->begin(); it != obj->end(); ++it)
      if (std::find(seen.begin(), seen.end(), it.key()) == seen.end())
        errs->add(path.empty() ? it.key() : path + "." + it.key(), "unknown key");
  }
};

void positive(Errors& errs, const std::string& path, double v) {
  if (!(v > 0)) errs.add(path, "must be > 0, got " + std::to_string(v));
}

SellmeierSet parse_axis(const Section& sec, const std::string& name, Errors& errs) {
  SellmeierSet s;
  s.axis = name;
  std::string tag = sec.text("formula", "constant");
  try {
    s.form = sellmeier_form_from_tag(tag);
  } catch (const std::invalid_argument& e) {
    errs.add(sec.path + ".formula", e.what());
  }
  const json* coeff = sec.get("coefficients");
  if (coeff) {
    if (!coeff->is_array()) {
      errs.add(sec.path + ".coefficients", "expected an array of numbers");
    } else {
      for (const auto& c : *coeff) {
        if (!c.is_number()) {
          errs.add(sec.path + ".coefficients", "expected numbers only");
          break;
        }
        s.coeff.push_back(c.get<double>());
      }
    }
  }
  s.valid_min_um = sec.number("valid_min_um", 0.3);
  s.valid_max_um = sec.number("valid_max_um", 1.2);
  s.citation = sec.text("citation");
  if (!(s.valid_max_um > s.valid_min_um))
    errs.add(sec.path, "valid_max_um must exceed valid_min_um");
  sec.finish();
  return s;
}

json axis_json(const SellmeierSet& s) {
  json j;
  j["formula"] = sellmeier_form_tag(s.form);
  j["coefficients"] = s.coeff;
  j["valid_min_um"] = s.valid_min_um;
  j["valid_max_um"] = s.valid_max_um;
  j["citation"] = s.citation;
  return j;
}

} // namespace

SolverOptions RunConfig::solver_options() const {
  SolverOptions o;
  o.grid_nx = solver.grid_nx;
  o.grid_ny = solver.grid_ny;
  o.label_cap = solver.label_cap;
  o.slab.scan_points = solver.scan_points;
  return o;
}

PmOptions RunConfig::pm_options() const {
  PmOptions o;
  o.window_min_nm = bands.window_min_nm;
  o.window_max_nm = bands.window_max_nm;
  o.family_knots = bands.family_knots;
  o.scan_points = bands.scan_points;
  o.gamma_ref_nm = bands.gamma_ref_nm;
  return o;
}

JsaOptions RunConfig::jsa_options() const {
  JsaOptions o;
  o.grid_h = {jsa.cells_h, jsa.lambda_min_nm, jsa.lambda_max_nm};
  o.grid_v = {jsa.cells_v, jsa.lambda_min_nm, jsa.lambda_max_nm};
  o.channel_floor_rel = jsa.channel_floor_rel;
  return o;
}

FieldGridSpec RunConfig::field_grid() const {
  return {measurement.field_grid_n, measurement.field_pitch_um, measurement.collection_na};
}

CalibrationTargets RunConfig::calibration_targets() const {
  CalibrationTargets t;
  t.center_nm = calibration.center_nm;
  t.center_tolerance_nm = calibration.center_tolerance_nm;
  t.min_separation_nm = calibration.min_separation_nm;
  t.fwhm_nm = calibration.fwhm_nm;
  t.fwhm_tolerance_nm = calibration.fwhm_tolerance_nm;
  t.separation_h_nm = calibration.target_separation_nm;
  t.separation_v_nm = calibration.target_separation_nm;
  return t;
}

CalibrationBounds RunConfig::calibration_bounds() const {
  CalibrationBounds b;
  b.poling_min_um = calibration.poling_min_um;
  b.poling_max_um = calibration.poling_max_um;
  b.delta_n_min = calibration.delta_n_min;
  b.delta_n_max = calibration.delta_n_max;
  return b;
}

RunConfig RunConfig::defaults() {
  RunConfig cfg;
  cfg.material = ktp_fan1987();
  cfg.excitation = PumpExcitation::single({0, 0});
  cfg.herald_filter.center_nm = 0.0; // auto: centre on the fundamental band
  return cfg;
}

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("configuration " + origin + " is not valid JSON: " + std::string(e.what()));
  }
  if (!root.is_object()) throw ConfigError("configuration " + origin + " must be a JSON object");

  Errors errs;
  Section top{&root, "", &errs, {}};
  RunConfig cfg;

  {
    Section mat = top.section("material");
    cfg.material.x = parse_axis(mat.section("x"), "x", errs);
    cfg.material.y = parse_axis(mat.section("y"), "y", errs);
    cfg.material.z = parse_axis(mat.section("z"), "z", errs);
    mat.finish();
  }
  {
    Section g = top.section("geometry");
    cfg.geometry.width_um = g.number("width_um", 2.0);
    cfg.geometry.depth_um = g.number("depth_um", 5.0);
    cfg.geometry.length_mm = g.number("length_mm", 1.0);
    cfg.geometry.poling_period_um = g.number("poling_period_um", 2.29);
    cfg.geometry.delta_n_h = g.number("delta_n_h", 0.037);
    cfg.geometry.delta_n_v = g.number("delta_n_v", 0.037);
    cfg.geometry.cover_index = g.number("cover_index", 1.0);
    std::string shape = g.text("lateral_shape", "step");
    if (shape == "step") {
      cfg.geometry.lateral_shape = LateralShape::Step;
    } else if (shape == "graded") {
      cfg.geometry.lateral_shape = LateralShape::Graded;
    } else {
      errs.add(g.path + ".lateral_shape", "expected 'step' or 'graded'");
    }
    cfg.geometry.lateral_grading_um = g.number("lateral_grading_um", 0.25);
    cfg.geometry.axis_h = g.text("axis_h", "y");
    cfg.geometry.axis_v = g.text("axis_v", "z");
    cfg.geometry.axis_p = g.text("axis_p", "z");
    positive(errs, g.path + ".width_um", cfg.geometry.width_um);
    positive(errs, g.path + ".depth_um", cfg.geometry.depth_um);
    positive(errs, g.path + ".length_mm", cfg.geometry.length_mm);
    positive(errs, g.path + ".poling_period_um", cfg.geometry.poling_period_um);
    positive(errs, g.path + ".delta_n_h", cfg.geometry.delta_n_h);
    positive(errs, g.path + ".delta_n_v", cfg.geometry.delta_n_v);
    g.finish();
  }
  {
    Section p = top.section("pump");
    cfg.pump.center_nm = p.number("center_nm", 399.9);
    cfg.pump.fwhm_nm = p.number("fwhm_nm", 1.0);
    positive(errs, p.path + ".center_nm", cfg.pump.center_nm);
    positive(errs, p.path + ".fwhm_nm", cfg.pump.fwhm_nm);
    const json* exc = p.get("excitation");
    cfg.excitation.components.clear();
    if (exc) {
      if (!exc->is_array() || exc->empty()) {
        errs.add(p.path + ".excitation", "expected a non-empty array");
      } else {
        int idx = 0;
        for (const auto& comp : *exc) {
          Section cs{&comp, p.path + ".excitation[" + std::to_string(idx) + "]", &errs, {}};
          std::string label = cs.text("mode", "00");
          double re = cs.number("re", 0.0);
          double im = cs.number("im", 0.0);
          cs.finish();
          try {
            cfg.excitation.components.push_back({mode_label_from_string(label), {re, im}});
          } catch (const std::invalid_argument& e) {
            errs.add(cs.path + ".mode", e.what());
          }
          ++idx;
        }
        double n2 = cfg.excitation.norm2();
        if (std::abs(n2 - 1.0) > 1e-9)
          errs.add(p.path + ".excitation",
                   "amplitudes must satisfy sum |c|^2 = 1, got " + std::to_string(n2));
      }
    }
    p.finish();
  }
  {
    Section b = top.section("bands");
    cfg.bands.window_min_nm = b.number("window_min_nm", 780.0);
    cfg.bands.window_max_nm = b.number("window_max_nm", 820.0);
    cfg.bands.family_knots = b.integer("family_knots", 11);
    cfg.bands.scan_points = b.integer("scan_points", 2001);
    cfg.bands.gamma_ref_nm = b.number("gamma_ref_nm", 799.8);
    cfg.bands.map_cells = b.integer("map_cells", 257);
    if (!(cfg.bands.window_max_nm > cfg.bands.window_min_nm))
      errs.add(b.path, "window_max_nm must exceed window_min_nm");
    if (cfg.bands.family_knots < 2) errs.add(b.path + ".family_knots", "need >= 2 knots");
    if (cfg.bands.map_cells < 16) errs.add(b.path + ".map_cells", "need >= 16 cells");
    b.finish();
  }
  {
    Section s = top.section("jsa");
    cfg.jsa.cells_h = s.integer("cells_h", 512);
    cfg.jsa.cells_v = s.integer("cells_v", 512);
    cfg.jsa.lambda_min_nm = s.number("lambda_min_nm", 780.0);
    cfg.jsa.lambda_max_nm = s.number("lambda_max_nm", 820.0);
    cfg.jsa.island_threshold = s.number("island_threshold", 0.5);
    cfg.jsa.channel_floor_rel = s.number("channel_floor_rel", 1e-10);
    if (cfg.jsa.cells_h < 16 || cfg.jsa.cells_v < 16) errs.add(s.path, "cells must be >= 16");
    if (!(cfg.jsa.island_threshold > 0 && cfg.jsa.island_threshold < 1))
      errs.add(s.path + ".island_threshold", "must lie in (0, 1)");
    s.finish();
  }
  {
    Section f = top.section("herald_filter");
    std::string arm = f.text("arm", "V");
    if (arm == "H") {
      cfg.herald_filter.arm = SpectralFilter::Arm::H;
    } else if (arm == "V") {
      cfg.herald_filter.arm = SpectralFilter::Arm::V;
    } else {
      errs.add(f.path + ".arm", "expected 'H' or 'V'");
    }
    std::string shape = f.text("shape", "tophat");
    if (shape == "tophat") {
      cfg.herald_filter.shape = SpectralFilter::Shape::TopHat;
    } else if (shape == "gaussian") {
      cfg.herald_filter.shape = SpectralFilter::Shape::Gaussian;
    } else {
      errs.add(f.path + ".shape", "expected 'tophat' or 'gaussian'");
    }
    cfg.herald_filter.center_nm = f.number("center_nm", 0.0);
    cfg.herald_filter.fwhm_nm = f.number("fwhm_nm", 10.0);
    positive(errs, f.path + ".fwhm_nm", cfg.herald_filter.fwhm_nm);
    f.finish();
  }
  {
    Section m = top.section("measurement");
    cfg.measurement.waist_um = m.number("waist_um", 50.0);
    cfg.measurement.budget_counts = m.number("budget_counts", 1e5);
    cfg.measurement.edge_positions = m.integer("edge_positions", 55);
    cfg.measurement.seed = static_cast<std::uint64_t>(m.number("seed", 12345));
    cfg.measurement.plan_inside = m.integer("plan_inside", 5);
    cfg.measurement.plan_outside = m.integer("plan_outside", 8);
    cfg.measurement.bootstrap_resamples = m.integer("bootstrap_resamples", 200);
    cfg.measurement.field_grid_n = m.integer("field_grid_n", 1024);
    cfg.measurement.field_pitch_um = m.number("field_pitch_um", 4.0);
    cfg.measurement.collection_na = m.number("collection_na", 0.8);
    cfg.measurement.accidental_floor_counts = m.number("accidental_floor_counts", 0.0);
    cfg.measurement.noiseless = m.boolean("noiseless", false);
    cfg.measurement.zr_guess_mm = m.number("zr_guess_mm", 10.0);
    positive(errs, m.path + ".waist_um", cfg.measurement.waist_um);
    positive(errs, m.path + ".budget_counts", cfg.measurement.budget_counts);
    positive(errs, m.path + ".field_pitch_um", cfg.measurement.field_pitch_um);
    if (cfg.measurement.edge_positions < 21)
      errs.add(m.path + ".edge_positions", "need >= 21 positions");
    if ((cfg.measurement.field_grid_n & (cfg.measurement.field_grid_n - 1)) != 0)
      errs.add(m.path + ".field_grid_n", "must be a power of two");
    m.finish();
  }
  {
    Section c = top.section("counting");
    cfg.counting.coincidence_window_ns = c.number("coincidence_window_ns", 6.0);
    cfg.counting.observed_coincidence_hz = c.number("observed_coincidence_hz", 12000.0);
    cfg.counting.coincidence_to_singles_ratio = c.number("coincidence_to_singles_ratio", 0.15);
    cfg.counting.pair_rate_hz = c.number("pair_rate_hz", 0.0);
    cfg.counting.efficiency_herald = c.number("efficiency_herald", 0.0);
    cfg.counting.efficiency_signal = c.number("efficiency_signal", 0.0);
    cfg.counting.dark_herald_hz = c.number("dark_herald_hz", 0.0);
    cfg.counting.dark_signal_hz = c.number("dark_signal_hz", 0.0);
    if (!(cfg.counting.coincidence_window_ns >= 0))
      errs.add(c.path + ".coincidence_window_ns", "must be >= 0");
    c.finish();
  }
  {
    Section c = top.section("calibration");
    cfg.calibration.initial_poling_period_um = c.number("initial_poling_period_um", 2.4);
    cfg.calibration.initial_delta_n_h = c.number("initial_delta_n_h", 0.03);
    cfg.calibration.initial_delta_n_v = c.number("initial_delta_n_v", 0.03);
    cfg.calibration.center_nm = c.number("center_nm", 799.8);
    cfg.calibration.center_tolerance_nm = c.number("center_tolerance_nm", 0.05);
    cfg.calibration.min_separation_nm = c.number("min_separation_nm", 5.0);
    cfg.calibration.target_separation_nm = c.number("target_separation_nm", 5.5);
    cfg.calibration.fwhm_nm = c.number("fwhm_nm", 0.7);
    cfg.calibration.fwhm_tolerance_nm = c.number("fwhm_tolerance_nm", 0.3);
    cfg.calibration.poling_min_um = c.number("poling_min_um", 1.0);
    cfg.calibration.poling_max_um = c.number("poling_max_um", 500.0);
    cfg.calibration.delta_n_min = c.number("delta_n_min", 1e-3);
    cfg.calibration.delta_n_max = c.number("delta_n_max", 5e-2);
    c.finish();
  }
  {
    Section s = top.section("solver");
    cfg.solver.grid_nx = s.integer("grid_nx", 512);
    cfg.solver.grid_ny = s.integer("grid_ny", 512);
    cfg.solver.label_cap = s.integer("label_cap", 3);
    cfg.solver.scan_points = s.integer("scan_points", 480);
    if (cfg.solver.grid_nx < 64 || cfg.solver.grid_ny < 64) errs.add(s.path, "grid must be >= 64");
    s.finish();
  }
  {
    Section o = top.section("output");
    cfg.output.directory = o.text("directory", "out");
    cfg.output.write_pgm = o.boolean("write_pgm", true);
    cfg.output.threads = static_cast<unsigned>(o.integer("threads", 0));
    o.finish();
  }
  top.finish();

  if (errs.list.empty()) {
    try {
      cfg.geometry.validate();
    } catch (const std::invalid_argument& e) {
      errs.add("geometry", e.what());
    }
  }
  errs.raise_if_any(origin);
  return cfg;
}

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read configuration file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

std::string serialize_config(const RunConfig& cfg) {
  json j;
  j["material"]["x"] = axis_json(cfg.material.x);
  j["material"]["y"] = axis_json(cfg.material.y);
  j["material"]["z"] = axis_json(cfg.material.z);

  json& g = j["geometry"];
  g["width_um"] = cfg.geometry.width_um;
  g["depth_um"] = cfg.geometry.depth_um;
  g["length_mm"] = cfg.geometry.length_mm;
  g["poling_period_um"] = cfg.geometry.poling_period_um;
  g["delta_n_h"] = cfg.geometry.delta_n_h;
  g["delta_n_v"] = cfg.geometry.delta_n_v;
  g["cover_index"] = cfg.geometry.cover_index;
  g["lateral_shape"] = cfg.geometry.lateral_shape == LateralShape::Step ? "step" : "graded";
  g["lateral_grading_um"] = cfg.geometry.lateral_grading_um;
  g["axis_h"] = cfg.geometry.axis_h;
  g["axis_v"] = cfg.geometry.axis_v;
  g["axis_p"] = cfg.geometry.axis_p;

  json& p = j["pump"];
  p["center_nm"] = cfg.pump.center_nm;
  p["fwhm_nm"] = cfg.pump.fwhm_nm;
  p["excitation"] = json::array();
  for (const auto& c : cfg.excitation.components) {
    json comp;
    comp["mode"] = mode_label_string(c.mode);
    comp["re"] = c.amplitude.real();
    comp["im"] = c.amplitude.imag();
    p["excitation"].push_back(comp);
  }

  json& b = j["bands"];
  b["window_min_nm"] = cfg.bands.window_min_nm;
  b["window_max_nm"] = cfg.bands.window_max_nm;
  b["family_knots"] = cfg.bands.family_knots;
  b["scan_points"] = cfg.bands.scan_points;
  b["gamma_ref_nm"] = cfg.bands.gamma_ref_nm;
  b["map_cells"] = cfg.bands.map_cells;

  json& s = j["jsa"];
  s["cells_h"] = cfg.jsa.cells_h;
  s["cells_v"] = cfg.jsa.cells_v;
  s["lambda_min_nm"] = cfg.jsa.lambda_min_nm;
  s["lambda_max_nm"] = cfg.jsa.lambda_max_nm;
  s["island_threshold"] = cfg.jsa.island_threshold;
  s["channel_floor_rel"] = cfg.jsa.channel_floor_rel;

  json& f = j["herald_filter"];
  f["arm"] = cfg.herald_filter.arm == SpectralFilter::Arm::H ? "H" : "V";
  f["shape"] = cfg.herald_filter.shape == SpectralFilter::Shape::TopHat ? "tophat" : "gaussian";
  f["center_nm"] = cfg.herald_filter.center_nm;
  f["fwhm_nm"] = cfg.herald_filter.fwhm_nm;

  json& m = j["measurement"];
  m["waist_um"] = cfg.measurement.waist_um;
  m["budget_counts"] = cfg.measurement.budget_counts;
  m["edge_positions"] = cfg.measurement.edge_positions;
  m["seed"] = static_cast<double>(cfg.measurement.seed);
  m["plan_inside"] = cfg.measurement.plan_inside;
  m["plan_outside"] = cfg.measurement.plan_outside;
  m["bootstrap_resamples"] = cfg.measurement.bootstrap_resamples;
  m["field_grid_n"] = cfg.measurement.field_grid_n;
  m["field_pitch_um"] = cfg.measurement.field_pitch_um;
  m["collection_na"] = cfg.measurement.collection_na;
  m["accidental_floor_counts"] = cfg.measurement.accidental_floor_counts;
  m["noiseless"] = cfg.measurement.noiseless;
  m["zr_guess_mm"] = cfg.measurement.zr_guess_mm;

  json& c = j["counting"];
  c["coincidence_window_ns"] = cfg.counting.coincidence_window_ns;
  c["observed_coincidence_hz"] = cfg.counting.observed_coincidence_hz;
  c["coincidence_to_singles_ratio"] = cfg.counting.coincidence_to_singles_ratio;
  c["pair_rate_hz"] = cfg.counting.pair_rate_hz;
  c["efficiency_herald"] = cfg.counting.efficiency_herald;
  c["efficiency_signal"] = cfg.counting.efficiency_signal;
  c["dark_herald_hz"] = cfg.counting.dark_herald_hz;
  c["dark_signal_hz"] = cfg.counting.dark_signal_hz;

  json& cal = j["calibration"];
  cal["initial_poling_period_um"] = cfg.calibration.initial_poling_period_um;
  cal["initial_delta_n_h"] = cfg.calibration.initial_delta_n_h;
  cal["initial_delta_n_v"] = cfg.calibration.initial_delta_n_v;
  cal["center_nm"] = cfg.calibration.center_nm;
  cal["center_tolerance_nm"] = cfg.calibration.center_tolerance_nm;
  cal["min_separation_nm"] = cfg.calibration.min_separation_nm;
  cal["target_separation_nm"] = cfg.calibration.target_separation_nm;
  cal["fwhm_nm"] = cfg.calibration.fwhm_nm;
  cal["fwhm_tolerance_nm"] = cfg.calibration.fwhm_tolerance_nm;
  cal["poling_min_um"] = cfg.calibration.poling_min_um;
  cal["poling_max_um"] = cfg.calibration.poling_max_um;
  cal["delta_n_min"] = cfg.calibration.delta_n_min;
  cal["delta_n_max"] = cfg.calibration.delta_n_max;

  json& so = j["solver"];
  so["grid_nx"] = cfg.solver.grid_nx;
  so["grid_ny"] = cfg.solver.grid_ny;
  so["label_cap"] = cfg.solver.label_cap;
  so["scan_points"] = cfg.solver.scan_points;

  json& o = j["output"];
  o["directory"] = cfg.output.directory;
  o["write_pgm"] = cfg.output.write_pgm;
  o["threads"] = static_cast<int>(cfg.output.threads);

  return j.dump(2) + "\n";
}

void write_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write configuration file " + path);
  out << serialize_config(cfg);
}

} // namespace wgspdc
