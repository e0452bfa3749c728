#include <doctest.h>

#include "wgspdc/phasematch.hpp"

#include <cmath>
#include <memory>

using namespace wgspdc;

namespace {

const PhaseMatcher& calibrated_matcher() {
  static PhaseMatcher pm{WaveguideSolver(WaveguideGeometry{}, ktp_fan1987())};
  return pm;
}

} // namespace

TEST_CASE("pump wavelength from energy conservation") {
  CHECK(pump_wavelength_nm(799.8, 799.8) == doctest::Approx(399.9).epsilon(1e-12));
  CHECK(pump_wavelength_nm(800.0, 800.0) == doctest::Approx(400.0).epsilon(1e-15));
  // 1/(1/780 + 1/820), evaluated independently
  CHECK(pump_wavelength_nm(780.0, 820.0) == doctest::Approx(399.75).epsilon(1e-12));
  CHECK_THROWS_AS(pump_wavelength_nm(-1.0, 800.0), std::invalid_argument);
}

TEST_CASE("pm_amplitude: sinc normalization, parity, half-power anchor") {
  CHECK(pm_amplitude(0.0, 1.0) == 1.0);
  for (double db : {0.001, 0.01, 0.05, 0.3}) {
    CHECK(pm_amplitude(db, 1.0) == doctest::Approx(pm_amplitude(-db, 1.0)).epsilon(1e-15));
    CHECK(std::abs(pm_amplitude(db, 1.0)) <= 1.0);
  }
  // |sinc|^2 = 1/2 at the bisected root (frozen from the standalone oracle)
  double s = sinc(kSincHalfPowerArg);
  CHECK(s * s == doctest::Approx(0.5).epsilon(1e-10));
  // half width at half maximum in delta-beta is 2 x* / L
  double L_mm = 1.0;
  double db_hwhm = 2.0 * kSincHalfPowerArg / (L_mm * 1000.0);
  double a = pm_amplitude(db_hwhm, L_mm);
  CHECK(a * a == doctest::Approx(0.5).epsilon(1e-10));
}

TEST_CASE("infinite poling period leaves the unpoled mismatch") {
  WaveguideGeometry g;
  WaveguideSolver s1(g, ktp_fan1987());
  WaveguideGeometry g2 = g;
  g2.poling_period_um = 1e9;
  WaveguideSolver s2(g2, ktp_fan1987());
  PmOptions opt;
  PhaseMatcher pm1(s1, opt), pm2(s2, opt);
  const ModeTriplet* t1 = pm1.find_triplet({0, 0}, {0, 0}, {0, 0});
  const ModeTriplet* t2 = pm2.find_triplet({0, 0}, {0, 0}, {0, 0});
  REQUIRE(t1 != nullptr);
  REQUIRE(t2 != nullptr);
  double diff = pm2.qpm_mismatch(*t2, 800.0, 801.0) - pm1.qpm_mismatch(*t1, 800.0, 801.0);
  CHECK(diff == doctest::Approx(2.0 * kPi / g.poling_period_um - 2.0 * kPi / 1e9).epsilon(1e-12));
}

TEST_CASE("calibrated fundamental band reproduces the measured target set") {
  const auto& pm = calibrated_matcher();
  auto band = pm.fundamental_band();
  CHECK(std::abs(band.degenerate_center_nm - 799.8) < 0.05);
  CHECK(band.fwhm_nm > 0.4);
  CHECK(band.fwhm_nm < 1.0);
  // the root certificate holds on re-evaluation
  double db = pm.qpm_mismatch(band.triplet, band.degenerate_center_nm, band.degenerate_center_nm);
  CHECK(std::abs(db) < 1e-6);
  for (auto [lh, lv] : band.center_curve)
    CHECK(std::abs(pm.qpm_mismatch(band.triplet, lh, lv)) < 1e-6);

  auto summary = pm.band_summary();
  CHECK(summary.min_separation_nm >= 5.0);
}

TEST_CASE("mismatch slope along lambda_H agrees with a finite-difference oracle") {
  const auto& pm = calibrated_matcher();
  const ModeTriplet* f = pm.find_triplet({0, 0}, {0, 0}, {0, 0});
  auto band = pm.fundamental_band();
  double c = band.degenerate_center_nm;
  double h = 0.05;
  double fd = (pm.qpm_mismatch(*f, c + h, c) - pm.qpm_mismatch(*f, c - h, c)) / (2 * h);
  // group-index argument: d(delta beta)/d lambda_H = -(2 pi/lambda^2)(ngP - ngH) < 0
  CHECK(fd < 0.0);
  auto mats = ktp_fan1987();
  double ngp = mats.axis("z").group_index(c * 1e-3 / 2);
  double ngh = mats.axis("y").group_index(c * 1e-3);
  double bulk = -(2 * kPi / (c * c * 1e-6)) * (ngp - ngh) * 1e-3; // rad/um per nm
  CHECK(fd == doctest::Approx(bulk).epsilon(0.15)); // waveguide correction stays moderate
}

TEST_CASE("band centers are stable against scan-grid refinement") {
  WaveguideSolver solver(WaveguideGeometry{}, ktp_fan1987());
  PmOptions coarse;
  PmOptions fine = coarse;
  fine.scan_points = 4 * coarse.scan_points;
  PhaseMatcher pm_c(solver, coarse), pm_f(solver, fine);
  const ModeTriplet* t = pm_c.find_triplet({0, 0}, {0, 0}, {0, 0});
  double c1 = pm_c.degenerate_centers(*t)[0];
  double c2 = pm_f.degenerate_centers(*t)[0];
  CHECK(std::abs(c1 - c2) < 1e-3);
}

TEST_CASE("band FWHM scales inversely with crystal length") {
  WaveguideGeometry g1;
  WaveguideGeometry g2 = g1;
  g2.length_mm = 2.0;
  PhaseMatcher pm1{WaveguideSolver(g1, ktp_fan1987())};
  PhaseMatcher pm2{WaveguideSolver(g2, ktp_fan1987())};
  auto b1 = pm1.fundamental_band();
  auto b2 = pm2.fundamental_band();
  CHECK(b1.fwhm_nm / b2.fwhm_nm == doctest::Approx(2.0).epsilon(0.01));
}

TEST_CASE("band map rides the center curve and marks forbidden triplets") {
  const auto& pm = calibrated_matcher();
  auto band = pm.fundamental_band();
  SpectralGrid gh{257, 795.0, 805.0}, gv{257, 795.0, 805.0};
  auto map = pm.map_band(band.triplet, gh, gv);
  // the map is a ridge along the delta_beta = 0 curve: within each row the
  // maximum must land within one cell of the root-found center
  for (int j = 32; j < gv.n - 32; j += 24) {
    double lv = gv.lambda_nm(j);
    auto roots = pm.centers_at_fixed_v(band.triplet, lv);
    double want = *std::min_element(roots.begin(), roots.end(), [&](double a, double b) {
      return std::abs(a - band.degenerate_center_nm) < std::abs(b - band.degenerate_center_nm);
    });
    if (want < gh.lambda_min_nm + 0.5 || want > gh.lambda_max_nm - 0.5) continue;
    int best = 0;
    for (int i = 1; i < gh.n; ++i)
      if (std::abs(map[static_cast<std::size_t>(j) * gh.n + i]) >
          std::abs(map[static_cast<std::size_t>(j) * gh.n + best]))
        best = i;
    double cell = std::abs(gh.lambda_nm(best) - gh.lambda_nm(best > 0 ? best - 1 : 1));
    CHECK(std::abs(gh.lambda_nm(best) - want) < 1.5 * cell);
    // on the ridge the amplitude is the full coupling strength
    CHECK(std::abs(map[static_cast<std::size_t>(j) * gh.n + best]) ==
          doctest::Approx(std::abs(band.triplet.gamma_per_um)).epsilon(1e-3));
  }

  // parity-forbidden channel: odd total lateral order has |gamma| ~ 0
  const ModeTriplet* forbidden = pm.find_triplet({0, 0}, {1, 0}, {0, 0});
  if (forbidden) {
    auto fmap = pm.map_band(*forbidden, gh, gv);
    for (double v : fmap) CHECK(std::abs(v) < 1e-6);
  }

  // stripes run with negative slope in the inverse-wavelength plane
  const ModeTriplet* t = pm.find_triplet({0, 0}, {0, 0}, {0, 0});
  double lv1 = band.degenerate_center_nm - 1.0, lv2 = band.degenerate_center_nm + 1.0;
  auto pick = [&](double lv) {
    auto roots = pm.centers_at_fixed_v(*t, lv);
    return *std::min_element(roots.begin(), roots.end(), [&](double a, double b) {
      return std::abs(a - band.degenerate_center_nm) < std::abs(b - band.degenerate_center_nm);
    });
  };
  double c1 = pick(lv1), c2 = pick(lv2);
  double slope_inv = (1.0 / c2 - 1.0 / c1) / (1.0 / lv2 - 1.0 / lv1);
  CHECK(slope_inv < 0.0);
  // sign and scale follow -(ngP - ngV)/(ngP - ngH) from the finite differences
  auto mats = ktp_fan1987();
  double ngp = mats.axis("z").group_index(0.3999);
  double ngh = mats.axis("y").group_index(0.7998);
  double ngv = mats.axis("z").group_index(0.7998);
  double expected = -(ngp - ngv) / (ngp - ngh);
  CHECK(slope_inv == doctest::Approx(expected).epsilon(0.3));
}

TEST_CASE("band_center reports the scanned interval when no root exists") {
  WaveguideGeometry g;
  g.poling_period_um = 20.0; // far from any matching condition in the window
  PhaseMatcher pm{WaveguideSolver(g, ktp_fan1987())};
  const ModeTriplet* t = pm.find_triplet({0, 0}, {0, 0}, {0, 0});
  try {
    pm.degenerate_centers(*t);
    FAIL("expected SolverError");
  } catch (const SolverError& e) {
    std::string msg = e.what();
    CHECK(msg.find("780") != std::string::npos);
    CHECK(msg.find("820") != std::string::npos);
    CHECK(msg.find("rad/um") != std::string::npos);
  }
}

TEST_CASE("constructed root: constant-index material centers where the period says") {
  MaterialSet mats;
  mats.x = {"x", SellmeierForm::Constant, {2.25}, 0.2, 2.0, "test"};
  mats.y = {"y", SellmeierForm::Constant, {3.10}, 0.2, 2.0, "test"};
  mats.z = {"z", SellmeierForm::Constant, {3.24}, 0.2, 2.0, "test"};
  WaveguideGeometry g;
  g.poling_period_um = 10.0;
  WaveguideSolver probe(g, mats);
  PhaseMatcher pm0(probe);
  const ModeTriplet* t = pm0.find_triplet({0, 0}, {0, 0}, {0, 0});
  REQUIRE(t != nullptr);
  // choose the period so the mismatch vanishes at exactly 800 nm
  double unpoled = pm0.qpm_mismatch(*t, 800.0, 800.0) + 2.0 * kPi / g.poling_period_um;
  REQUIRE(unpoled > 0);
  WaveguideGeometry g2 = g;
  g2.poling_period_um = 2.0 * kPi / unpoled;
  PhaseMatcher pm{WaveguideSolver(g2, mats)};
  const ModeTriplet* t2 = pm.find_triplet({0, 0}, {0, 0}, {0, 0});
  auto centers = pm.degenerate_centers(*t2);
  double best = *std::min_element(centers.begin(), centers.end(), [](double a, double b) {
    return std::abs(a - 800.0) < std::abs(b - 800.0);
  });
  CHECK(best == doctest::Approx(800.0).epsilon(1e-8));
}

TEST_CASE("sfg response: delta kernels, symmetric peak, numeric convolution oracle") {
  const auto& pm = calibrated_matcher();
  auto band = pm.fundamental_band();
  const ModeTriplet& t = band.triplet;
  double c = band.degenerate_center_nm;

  double a = pm.amplitude(t, c + 0.2, c);
  CHECK(pm.sfg_response(t, c + 0.2, c, 0.0) == doctest::Approx(a * a).epsilon(1e-12));

  // independent direct-quadrature convolution oracle at a probe point
  double fw = 0.6;
  double sg = fw / (2.0 * std::sqrt(2.0 * std::log(2.0)));
  auto oracle = [&](double l1, double l2) {
    double acc = 0, wsum = 0;
    const int nq = 61;
    for (int i = 0; i < nq; ++i)
      for (int j = 0; j < nq; ++j) {
        double d1 = -3.5 * sg + 7.0 * sg * i / (nq - 1);
        double d2 = -3.5 * sg + 7.0 * sg * j / (nq - 1);
        double w = std::exp(-(d1 * d1 + d2 * d2) / (2 * sg * sg));
        double amp = pm.amplitude(t, l1 + d1, l2 + d2);
        acc += w * amp * amp;
        wsum += w;
      }
    return acc / wsum;
  };
  for (double probe : {c, c + 0.4}) {
    double got = pm.sfg_response(t, probe, c, fw);
    CHECK(got == doctest::Approx(oracle(probe, c)).epsilon(5e-3));
  }

  // convolved width: broadened, peak stays centered
  auto cut_fwhm = [&](double fwhm_filter) {
    auto val = [&](double l1) { return pm.sfg_response(t, l1, c, fwhm_filter); };
    double peak = val(c);
    auto flank = [&](double dir) {
      double step = 0.05, x = c + dir * step, prev = c;
      while (val(x) > 0.5 * peak) {
        prev = x;
        x += dir * step;
      }
      for (int it = 0; it < 60; ++it) {
        double mid = 0.5 * (prev + x);
        (val(mid) > 0.5 * peak ? prev : x) = mid;
      }
      return 0.5 * (prev + x);
    };
    return flank(1.0) - flank(-1.0);
  };
  double w0 = cut_fwhm(0.0);
  double wc = cut_fwhm(fw);
  CHECK(wc >= w0);
  // quadrature-sum estimate including the diagonal-band smearing of the
  // second filter: fwhm_conv ~ sqrt(w0^2 + (1 + slope^2) f^2)
  auto mats = ktp_fan1987();
  double ngp = mats.axis("z").group_index(0.3999);
  double slope = (ngp - mats.axis("z").group_index(0.7998)) /
                 (ngp - mats.axis("y").group_index(0.7998));
  double est = std::sqrt(w0 * w0 + (1.0 + slope * slope) * fw * fw);
  CHECK(wc == doctest::Approx(est).epsilon(0.10));

  // peak location unchanged by the symmetric kernel
  double best_l = c - 0.5, best_v = 0;
  for (double l = c - 0.5; l <= c + 0.5; l += 0.02) {
    double v = pm.sfg_response(t, l, c, fw);
    if (v > best_v) {
      best_v = v;
      best_l = l;
    }
  }
  CHECK(std::abs(best_l - c) < 0.05);
}

TEST_CASE("calibration recovers synthetic parameters (identifiability round trip)") {
  // targets generated from a known geometry, then recovered from a perturbed start
  WaveguideGeometry truth;
  truth.poling_period_um = 2.31;
  truth.delta_n_h = 0.036;
  truth.delta_n_v = 0.040;
  PmOptions wide;
  wide.window_min_nm = 754.8;
  wide.window_max_nm = 844.8;
  wide.family_knots = 17;
  PhaseMatcher pm{WaveguideSolver(truth, ktp_fan1987()), wide};
  auto summary = pm.band_summary();
  double sep_h = 1e9, sep_v = 1e9;
  for (const auto& e : summary.bands) {
    bool hh = !(e.triplet.h == ModeLabel{0, 0});
    bool hv = !(e.triplet.v == ModeLabel{0, 0});
    if (hh && !hv) sep_h = std::min(sep_h, e.separation_nm);
    if (hv && !hh) sep_v = std::min(sep_v, e.separation_nm);
  }
  CalibrationTargets targets;
  targets.center_nm = summary.fundamental.degenerate_center_nm;
  targets.fwhm_nm = summary.fundamental.fwhm_nm;
  targets.separation_h_nm = sep_h;
  targets.separation_v_nm = sep_v;
  targets.fwhm_tolerance_nm = 0.5;

  WaveguideGeometry start = truth;
  start.poling_period_um = 2.8;
  start.delta_n_h = 0.030;
  start.delta_n_v = 0.033;
  auto rep = calibrate(start, ktp_fan1987(), targets);
  CHECK(std::abs(rep.geometry.poling_period_um - truth.poling_period_um) /
            truth.poling_period_um < 1e-3);
  CHECK(std::abs(rep.geometry.delta_n_h - truth.delta_n_h) / truth.delta_n_h < 1e-3);
  CHECK(std::abs(rep.geometry.delta_n_v - truth.delta_n_v) / truth.delta_n_v < 1e-3);
}
