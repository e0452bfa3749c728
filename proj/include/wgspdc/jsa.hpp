#pragma once

#include "wgspdc/common.hpp"
#include "wgspdc/phasematch.hpp"

#include <optional>
#include <vector>

namespace wgspdc {

// Transform-limited Gaussian pump: amplitude Gaussian in the total frequency
// variable 1/lH + 1/lV, intensity FWHM mapped from the wavelength bandwidth.
struct PumpEnvelope {
  double center_nm = 399.9;
  double fwhm_nm = 1.0;

  cdouble amplitude(double lambda_h_nm, double lambda_v_nm) const;
};

struct PumpExcitation {
  struct Component {
    ModeLabel mode;
    cdouble amplitude;
  };
  std::vector<Component> components;

  double norm2() const;
  // throws std::invalid_argument unless sum |c|^2 = 1 within 1e-9
  void check_normalized() const;
  static PumpExcitation single(ModeLabel mode) { return {{{mode, {1.0, 0.0}}}}; }
};

struct SpectralFilter {
  enum class Arm { H, V };
  enum class Shape { TopHat, Gaussian };
  Arm arm = Arm::V;
  Shape shape = Shape::TopHat;
  double center_nm = 799.8;
  double fwhm_nm = 10.0; // infinity = all-pass

  double amplitude_transmission(double lambda_nm) const;
};

// Complex joint amplitude per down-converted spatial channel (m = H mode,
// n = V mode), sampled on 1/lambda-linear grids, row-major with H fastest.
struct JointSpectrum {
  SpectralGrid grid_h, grid_v;
  struct Channel {
    ModeLabel h, v;
    std::vector<cdouble> amp;
  };
  std::vector<Channel> channels;

  std::size_t cells() const { return static_cast<std::size_t>(grid_h.n) * grid_v.n; }
  const Channel* find(ModeLabel h, ModeLabel v) const;
  // quadrature-weighted total intensity sum_mn integral |A_mn|^2 ds_H ds_V
  double total_intensity() const;
  std::vector<double> cell_weights() const; // trapezoid in both 1/lambda axes
};

struct JsaOptions {
  SpectralGrid grid_h{512, 780.0, 820.0};
  SpectralGrid grid_v{512, 780.0, 820.0};
  double channel_floor_rel = 1e-10; // drop channels with no coupling at all
  bool enforce_normalization = true;
};

// A_mn = sum_p c_p Gamma_pmn pump(lH,lV) sinc(delta_beta_pmn L/2), coherent
// over pump components, channels kept separate.
JointSpectrum build_jsa(const PhaseMatcher& matcher, const PumpExcitation& excitation,
                        const PumpEnvelope& envelope, const JsaOptions& opt = {});

std::vector<double> jsi_map(const JointSpectrum& js); // sum_mn |A_mn|^2 per cell

struct Island {
  double centroid_h_nm = 0;
  double centroid_v_nm = 0;
  double weight = 0; // quadrature-weighted integrated intensity
  double min_h_nm = 0, max_h_nm = 0, min_v_nm = 0, max_v_nm = 0;
  std::size_t cell_count = 0;
};

// 4-connected components of cells above threshold*max, heaviest first.
std::vector<Island> detect_islands(const std::vector<double>& jsi, const SpectralGrid& gh,
                                   const SpectralGrid& gv, double threshold_fraction);

JointSpectrum apply_filter(const JointSpectrum& js, const SpectralFilter& filter);

struct HeraldedState {
  std::vector<ModeLabel> basis;  // spatial modes of the heralded arm
  std::vector<cdouble> rho;      // row-major density matrix over basis
  double purity = 0;             // trace(rho^2)
  ModeLabel dominant;            // largest diagonal element
  double dominant_population = 0;

  cdouble element(int i, int j) const { return rho[i * static_cast<int>(basis.size()) + j]; }
};

// Reduced spatial state of one arm after tracing spectra and the partner
// mode index. Throws std::domain_error when the spectrum carries no
// intensity.
HeraldedState heralded_spatial_state(const JointSpectrum& js, SpectralFilter::Arm heralded_arm);

// --- photon counting ---------------------------------------------------------

struct CountingRates {
  double singles_herald_hz = 0;
  double singles_signal_hz = 0;
  double true_coincidence_hz = 0;
  double accidental_hz = 0;
  double observed_coincidence_hz = 0; // true + accidental
  double coincidence_to_singles_ratio = 0; // against the herald (filtered) arm
};

CountingRates counting_statistics(double pair_rate_hz, double eta_herald, double eta_signal,
                                  double dark_herald_hz, double dark_signal_hz,
                                  double window_s);

struct PairRateSolution {
  double pair_rate_hz = 0;
  double efficiency = 0;
};

// Invert observed (coincidence rate, coincidence-to-singles ratio) under
// equal efficiencies and negligible dark counts.
PairRateSolution infer_pair_rate(double observed_coincidence_hz, double ratio, double window_s);

} // namespace wgspdc
