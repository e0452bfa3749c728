#include "wgspdc/jsa.hpp"
#include "wgspdc/fitting.hpp"
#include "wgspdc/simd_kernels.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>

namespace wgspdc {

cdouble PumpEnvelope::amplitude(double lambda_h_nm, double lambda_v_nm) const {
  if (!(lambda_h_nm > 0) || !(lambda_v_nm > 0))
    throw std::invalid_argument("pump_amplitude: wavelengths must be positive");
  // work in s = 1/lambda (proportional to frequency); the intensity FWHM in s
  // follows from the wavelength bandwidth at the center
  double s = 1.0 / lambda_h_nm + 1.0 / lambda_v_nm;
  double s0 = 1.0 / center_nm;
  double fwhm_s = fwhm_nm / (center_nm * center_nm);
  double x = (s - s0) / fwhm_s;
  // intensity exp(-4 ln2 x^2) has unit FWHM in x; amplitude is its square root
  return {std::exp(-2.0 * std::log(2.0) * x * x), 0.0};
}

double PumpExcitation::norm2() const {
  double s = 0;
  for (const auto& c : components) s += std::norm(c.amplitude);
  return s;
}

void PumpExcitation::check_normalized() const {
  if (std::abs(norm2() - 1.0) > 1e-9) {
    std::ostringstream os;
    os << "pump excitation norm^2 = " << norm2() << ", expected 1 within 1e-9";
    throw std::invalid_argument(os.str());
  }
}

double SpectralFilter::amplitude_transmission(double lambda_nm) const {
  if (!(fwhm_nm > 0)) throw std::invalid_argument("spectral filter FWHM must be positive");
  if (std::isinf(fwhm_nm)) return 1.0;
  double d = lambda_nm - center_nm;
  if (shape == Shape::TopHat) return std::abs(d) <= 0.5 * fwhm_nm ? 1.0 : 0.0;
  // Gaussian intensity transmission of the stated FWHM; amplitude = sqrt
  return std::exp(-std::log(2.0) * (2.0 * d / fwhm_nm) * (2.0 * d / fwhm_nm));
}

const JointSpectrum::Channel* JointSpectrum::find(ModeLabel h, ModeLabel v) const {
  for (const auto& c : channels)
    if (c.h == h && c.v == v) return &c;
  return nullptr;
}

std::vector<double> JointSpectrum::cell_weights() const {
  std::vector<double> w(cells());
  for (int j = 0; j < grid_v.n; ++j)
    for (int i = 0; i < grid_h.n; ++i)
      w[static_cast<std::size_t>(j) * grid_h.n + i] = grid_h.weight(i) * grid_v.weight(j);
  return w;
}

double JointSpectrum::total_intensity() const {
  auto w = cell_weights();
  const auto& k = simd::active();
  double total = 0;
  for (const auto& c : channels)
    total += k.cdotw(c.amp.data(), c.amp.data(), w.data(), c.amp.size()).real();
  return total;
}

JointSpectrum build_jsa(const PhaseMatcher& matcher, const PumpExcitation& excitation,
                        const PumpEnvelope& envelope, const JsaOptions& opt) {
  if (opt.enforce_normalization) excitation.check_normalized();
  if (opt.grid_h.n < 2 || opt.grid_v.n < 2) throw std::invalid_argument("build_jsa: grid too small");

  JointSpectrum js;
  js.grid_h = opt.grid_h;
  js.grid_v = opt.grid_v;
  const int nh = opt.grid_h.n, nv = opt.grid_v.n;
  const std::size_t cells = js.cells();

  // per-cell pump envelope and per-pump-mode propagation constants
  std::vector<double> pump_alpha(cells);
  for (int j = 0; j < nv; ++j) {
    double lv = opt.grid_v.lambda_nm(j);
    for (int i = 0; i < nh; ++i)
      pump_alpha[static_cast<std::size_t>(j) * nh + i] =
          envelope.amplitude(opt.grid_h.lambda_nm(i), lv).real();
  }

  const auto& fam_p = matcher.family(Pol::P);
  struct PumpTerm {
    cdouble c;
    const ModeDispersion* disp;
    ModeLabel label;
  };
  std::vector<PumpTerm> pumps;
  for (const auto& comp : excitation.components) {
    const ModeDispersion* d = fam_p.find(comp.mode);
    if (!d)
      throw SolverError("build_jsa: pump mode " + comp.mode.str() + " is not a solved guided mode");
    pumps.push_back({comp.amplitude, d, comp.mode});
  }

  std::vector<std::vector<double>> beta_p(pumps.size(), std::vector<double>(cells));
  parallel_for(0, nv, [&](std::size_t j0, std::size_t j1) {
    for (std::size_t j = j0; j < j1; ++j) {
      double sv = opt.grid_v.inv_at(static_cast<int>(j));
      for (int i = 0; i < nh; ++i) {
        double lp_um = 1e-3 / (opt.grid_h.inv_at(i) + sv);
        for (std::size_t p = 0; p < pumps.size(); ++p)
          beta_p[p][j * nh + i] = pumps[p].disp->beta(lp_um);
      }
    }
  });

  const auto& fam_h = matcher.family(Pol::H);
  const auto& fam_v = matcher.family(Pol::V);
  std::vector<std::vector<double>> beta_h, beta_v;
  for (const auto& m : fam_h.modes) {
    std::vector<double> b(nh);
    for (int i = 0; i < nh; ++i) b[i] = m.beta(opt.grid_h.lambda_nm(i) * 1e-3);
    beta_h.push_back(std::move(b));
  }
  for (const auto& m : fam_v.modes) {
    std::vector<double> b(nv);
    for (int j = 0; j < nv; ++j) b[j] = m.beta(opt.grid_v.lambda_nm(j) * 1e-3);
    beta_v.push_back(std::move(b));
  }

  const double qpm = 2.0 * kPi / matcher.solver().geometry().poling_period_um;
  const double half_len_um = 0.5 * matcher.solver().geometry().length_mm * 1000.0;

  // overall coupling scale for the channel floor
  double gmax = 0;
  for (const auto& t : matcher.triplets()) gmax = std::max(gmax, std::abs(t.gamma_per_um));

  for (std::size_t mh = 0; mh < fam_h.modes.size(); ++mh) {
    for (std::size_t mv = 0; mv < fam_v.modes.size(); ++mv) {
      std::vector<double> gam(pumps.size(), 0.0);
      double live = 0;
      for (std::size_t p = 0; p < pumps.size(); ++p) {
        const ModeTriplet* t =
            matcher.find_triplet(pumps[p].label, fam_h.modes[mh].label, fam_v.modes[mv].label);
        if (t) gam[p] = t->gamma_per_um;
        live = std::max(live, std::abs(gam[p]) * std::abs(pumps[p].c));
      }
      if (live < opt.channel_floor_rel * gmax) continue;

      JointSpectrum::Channel ch;
      ch.h = fam_h.modes[mh].label;
      ch.v = fam_v.modes[mv].label;
      ch.amp.assign(cells, cdouble{0, 0});
      parallel_for(0, nv, [&](std::size_t j0, std::size_t j1) {
        for (std::size_t j = j0; j < j1; ++j) {
          for (int i = 0; i < nh; ++i) {
            std::size_t q = j * nh + i;
            cdouble s{0, 0};
            for (std::size_t p = 0; p < pumps.size(); ++p) {
              if (gam[p] == 0.0) continue;
              double db = beta_p[p][q] - beta_h[mh][i] - beta_v[mv][j] - qpm;
              s += pumps[p].c * (gam[p] * sinc(db * half_len_um));
            }
            ch.amp[q] = s * pump_alpha[q];
          }
        }
      });
      js.channels.push_back(std::move(ch));
    }
  }
  return js;
}

std::vector<double> jsi_map(const JointSpectrum& js) {
  std::vector<double> out(js.cells(), 0.0);
  for (const auto& c : js.channels)
    for (std::size_t q = 0; q < out.size(); ++q) out[q] += std::norm(c.amp[q]);
  return out;
}

std::vector<Island> detect_islands(const std::vector<double>& jsi, const SpectralGrid& gh,
                                   const SpectralGrid& gv, double threshold_fraction) {
  if (!(threshold_fraction > 0.0 && threshold_fraction < 1.0))
    throw std::invalid_argument("detect_islands: threshold fraction must lie in (0, 1)");
  if (jsi.size() != static_cast<std::size_t>(gh.n) * gv.n)
    throw ShapeError("detect_islands: map size does not match grids");
  double peak = 0;
  for (double v : jsi) peak = std::max(peak, v);
  if (peak <= 0) return {};
  const double cut = threshold_fraction * peak;

  std::vector<char> visited(jsi.size(), 0);
  std::vector<Island> islands;
  auto idx = [&](int i, int j) { return static_cast<std::size_t>(j) * gh.n + i; };

  for (int j = 0; j < gv.n; ++j)
    for (int i = 0; i < gh.n; ++i) {
      std::size_t q0 = idx(i, j);
      if (visited[q0] || jsi[q0] < cut) continue;
      Island isl;
      isl.min_h_nm = std::numeric_limits<double>::max();
      isl.min_v_nm = std::numeric_limits<double>::max();
      isl.max_h_nm = -isl.min_h_nm;
      isl.max_v_nm = -isl.min_v_nm;
      double swh = 0, swv = 0;
      std::deque<std::pair<int, int>> queue{{i, j}};
      visited[q0] = 1;
      while (!queue.empty()) {
        auto [ci, cj] = queue.front();
        queue.pop_front();
        std::size_t q = idx(ci, cj);
        double w = jsi[q] * gh.weight(ci) * gv.weight(cj);
        double lh = gh.lambda_nm(ci), lv = gv.lambda_nm(cj);
        isl.weight += w;
        swh += w * lh;
        swv += w * lv;
        isl.min_h_nm = std::min(isl.min_h_nm, lh);
        isl.max_h_nm = std::max(isl.max_h_nm, lh);
        isl.min_v_nm = std::min(isl.min_v_nm, lv);
        isl.max_v_nm = std::max(isl.max_v_nm, lv);
        ++isl.cell_count;
        const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          int ni = ci + di[k], nj = cj + dj[k];
          if (ni < 0 || nj < 0 || ni >= gh.n || nj >= gv.n) continue;
          std::size_t nq = idx(ni, nj);
          if (!visited[nq] && jsi[nq] >= cut) {
            visited[nq] = 1;
            queue.push_back({ni, nj});
          }
        }
      }
      isl.centroid_h_nm = swh / isl.weight;
      isl.centroid_v_nm = swv / isl.weight;
      islands.push_back(isl);
    }
  std::sort(islands.begin(), islands.end(),
            [](const Island& a, const Island& b) { return a.weight > b.weight; });
  return islands;
}

JointSpectrum apply_filter(const JointSpectrum& js, const SpectralFilter& filter) {
  JointSpectrum out = js;
  if (filter.arm == SpectralFilter::Arm::H) {
    std::vector<double> t(js.grid_h.n);
    for (int i = 0; i < js.grid_h.n; ++i)
      t[i] = filter.amplitude_transmission(js.grid_h.lambda_nm(i));
    for (auto& c : out.channels)
      for (int j = 0; j < js.grid_v.n; ++j)
        for (int i = 0; i < js.grid_h.n; ++i)
          c.amp[static_cast<std::size_t>(j) * js.grid_h.n + i] *= t[i];
  } else {
    std::vector<double> t(js.grid_v.n);
    for (int j = 0; j < js.grid_v.n; ++j)
      t[j] = filter.amplitude_transmission(js.grid_v.lambda_nm(j));
    for (auto& c : out.channels)
      for (int j = 0; j < js.grid_v.n; ++j)
        for (int i = 0; i < js.grid_h.n; ++i)
          c.amp[static_cast<std::size_t>(j) * js.grid_h.n + i] *= t[j];
  }
  return out;
}

HeraldedState heralded_spatial_state(const JointSpectrum& js, SpectralFilter::Arm heralded_arm) {
  std::vector<ModeLabel> basis;
  auto label_of = [&](const JointSpectrum::Channel& c) {
    return heralded_arm == SpectralFilter::Arm::H ? c.h : c.v;
  };
  auto partner_of = [&](const JointSpectrum::Channel& c) {
    return heralded_arm == SpectralFilter::Arm::H ? c.v : c.h;
  };
  for (const auto& c : js.channels) {
    ModeLabel l = label_of(c);
    if (std::find(basis.begin(), basis.end(), l) == basis.end()) basis.push_back(l);
  }
  const int dim = static_cast<int>(basis.size());
  if (dim == 0) throw std::domain_error("heralded state: spectrum has no channels");

  auto w = js.cell_weights();
  const auto& k = simd::active();
  std::vector<cdouble> rho(dim * dim, cdouble{0, 0});

  auto index_of = [&](ModeLabel l) {
    return static_cast<int>(std::find(basis.begin(), basis.end(), l) - basis.begin());
  };
  for (const auto& ca : js.channels)
    for (const auto& cb : js.channels) {
      if (!(partner_of(ca) == partner_of(cb))) continue; // partner mode is traced out
      int a = index_of(label_of(ca)), b = index_of(label_of(cb));
      if (b < a) continue;
      cdouble v = k.cdotw(ca.amp.data(), cb.amp.data(), w.data(), ca.amp.size());
      rho[a * dim + b] += v;
      if (a != b) rho[b * dim + a] += std::conj(v);
    }

  double trace = 0;
  for (int i = 0; i < dim; ++i) trace += rho[i * dim + i].real();
  if (!(trace > 0)) throw std::domain_error("heralded state: zero total intensity");
  for (auto& v : rho) v /= trace;

  HeraldedState st;
  st.basis = basis;
  st.rho = std::move(rho);
  double purity = 0;
  for (const auto& v : st.rho) purity += std::norm(v);
  st.purity = purity;
  st.dominant_population = -1;
  for (int i = 0; i < dim; ++i)
    if (st.rho[i * dim + i].real() > st.dominant_population) {
      st.dominant_population = st.rho[i * dim + i].real();
      st.dominant = basis[i];
    }
  return st;
}

CountingRates counting_statistics(double pair_rate_hz, double eta_herald, double eta_signal,
                                  double dark_herald_hz, double dark_signal_hz, double window_s) {
  for (double eta : {eta_herald, eta_signal})
    if (!(eta >= 0.0 && eta <= 1.0))
      throw std::invalid_argument("counting_statistics: efficiency outside [0, 1]");
  for (double r : {pair_rate_hz, dark_herald_hz, dark_signal_hz, window_s})
    if (!(r >= 0.0)) throw std::invalid_argument("counting_statistics: negative rate or window");

  CountingRates out;
  out.singles_herald_hz = pair_rate_hz * eta_herald + dark_herald_hz;
  out.singles_signal_hz = pair_rate_hz * eta_signal + dark_signal_hz;
  out.true_coincidence_hz = pair_rate_hz * eta_herald * eta_signal;
  out.accidental_hz = out.singles_herald_hz * out.singles_signal_hz * window_s;
  out.observed_coincidence_hz = out.true_coincidence_hz + out.accidental_hz;
  out.coincidence_to_singles_ratio =
      out.singles_herald_hz > 0 ? out.observed_coincidence_hz / out.singles_herald_hz : 0.0;
  return out;
}

PairRateSolution infer_pair_rate(double observed_coincidence_hz, double ratio, double window_s) {
  if (!(observed_coincidence_hz > 0) || !(ratio > 0) || !(window_s >= 0))
    throw std::invalid_argument("infer_pair_rate: nonpositive observables");
  double singles = observed_coincidence_hz / ratio;
  double true_coinc = observed_coincidence_hz - singles * singles * window_s;
  if (!(true_coinc > 0))
    throw std::domain_error("infer_pair_rate: accidentals alone exceed the observed rate");
  PairRateSolution s;
  s.efficiency = true_coinc / singles;
  s.pair_rate_hz = singles / s.efficiency;
  return s;
}

} // namespace wgspdc
