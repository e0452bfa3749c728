#include "wgspdc/beamlab.hpp"
#include "wgspdc/fft.hpp"
#include "wgspdc/fitting.hpp"
#include "wgspdc/rng.hpp"
#include "wgspdc/simd_kernels.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace wgspdc {

namespace {

// Local cubic (Catmull-Rom) interpolation on a uniform grid; O(h^4) on smooth
// profiles, which the mode factors are. Zero outside the sample span.
double catmull_rom(const std::vector<double>& y, double x0, double dx, int n, double x) {
  double t = (x - x0) / dx;
  if (t < 0.0 || t > n - 1) return 0.0;
  int i = std::clamp(static_cast<int>(t), 0, n - 2);
  double f = t - i;
  double ym = i > 0 ? y[i - 1] : 2 * y[0] - y[1];
  double yp = i + 2 < n ? y[i + 2] : 2 * y[n - 1] - y[n - 2];
  double a0 = y[i];
  double a1 = 0.5 * (y[i + 1] - ym);
  double a2 = ym - 2.5 * y[i] + 2.0 * y[i + 1] - 0.5 * yp;
  double a3 = 0.5 * (yp - ym) + 1.5 * (y[i] - y[i + 1]);
  return a0 + f * (a1 + f * (a2 + f * a3));
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) { return splitmix64(seed ^ salt); }

// The collection objective passes facet spatial frequencies up to NA/lambda;
// in magnified measurement coordinates that is NA/(lambda*M).
void collection_lowpass(TransverseField& f, double na, double magnification) {
  if (!(na > 0)) return;
  const double lam_um = f.lambda_nm * 1e-3;
  const double f_cut = na / (lam_um * magnification);
  // cosine-tapered pupil edge over the outer 15%: a hard cut would ring in
  // real space and leak power to the grid boundary
  const double f_in = 0.85 * f_cut;
  fft2_inplace(f.amp.data(), f.n, f.n, false);
  for (int j = 0; j < f.n; ++j) {
    double fy = fft_freq(j, f.n, f.pitch_um);
    for (int i = 0; i < f.n; ++i) {
      double fx = fft_freq(i, f.n, f.pitch_um);
      double fr = std::sqrt(fx * fx + fy * fy);
      if (fr <= f_in) continue;
      double t = 0.0;
      if (fr < f_cut) {
        double u = (fr - f_in) / (f_cut - f_in);
        double c = std::cos(0.5 * kPi * u);
        t = c * c;
      }
      f.amp[static_cast<std::size_t>(j) * f.n + i] *= t;
    }
  }
  fft2_inplace(f.amp.data(), f.n, f.n, true);
}

} // namespace

double TransverseField::power() const {
  return simd::active().abs2_sum(amp.data(), amp.size()) * pitch_um * pitch_um;
}

void TransverseField::normalize_power() {
  double p = power();
  if (!(p > 0)) throw std::domain_error("field has zero power");
  double s = 1.0 / std::sqrt(p);
  for (auto& a : amp) a *= s;
}

std::vector<double> TransverseField::intensity() const {
  std::vector<double> out(amp.size());
  for (std::size_t q = 0; q < amp.size(); ++q) out[q] = std::norm(amp[q]);
  return out;
}

std::vector<double> TransverseField::marginal(Axis axis) const {
  std::vector<double> out(n, 0.0);
  if (axis == Axis::X) {
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) out[i] += std::norm(amp[static_cast<std::size_t>(j) * n + i]);
  } else {
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) out[j] += std::norm(amp[static_cast<std::size_t>(j) * n + i]);
  }
  for (double& v : out) v *= pitch_um;
  return out;
}

double TransverseField::high_frequency_fraction() const {
  std::vector<cdouble> spec = amp;
  fft2_inplace(spec.data(), n, n, false);
  double fn = 0.5 / pitch_um;
  double cut2 = 0.85 * fn * 0.85 * fn;
  double hi = 0, total = 0;
  for (int j = 0; j < n; ++j) {
    double fy = fft_freq(j, n, pitch_um);
    for (int i = 0; i < n; ++i) {
      double fx = fft_freq(i, n, pitch_um);
      double p = std::norm(spec[static_cast<std::size_t>(j) * n + i]);
      total += p;
      if (fx * fx + fy * fy > cut2) hi += p;
    }
  }
  return total > 0 ? hi / total : 0.0;
}

namespace {

void nyquist_guard(const TransverseField& f, const char* who) {
  // resampling noise floors near 1e-5; genuine undersampling shows at the
  // percent level, so 1e-4 separates the two cleanly
  double frac = f.high_frequency_fraction();
  if (frac > 1e-4) {
    std::ostringstream os;
    os << who << ": " << frac
       << " of the spectral power lies beyond 85% of Nyquist; refine the pitch (currently "
       << f.pitch_um << " um)";
    throw NyquistError(os.str());
  }
}

void edge_guard(const TransverseField& f, const char* who) {
  // energy in the outer two-pixel frame flags window escape / wraparound
  double frame = 0, total = 0;
  for (int j = 0; j < f.n; ++j)
    for (int i = 0; i < f.n; ++i) {
      double p = std::norm(f.amp[static_cast<std::size_t>(j) * f.n + i]);
      total += p;
      if (i < 2 || j < 2 || i >= f.n - 2 || j >= f.n - 2) frame += p;
    }
  if (total > 0 && frame / total > 1e-6) {
    std::ostringstream os;
    os << who << ": " << frame / total
       << " of the power reached the grid edge; enlarge the window (currently "
       << f.n * f.pitch_um << " um)";
    throw NyquistError(os.str());
  }
}

} // namespace

TransverseField superposition_field(const std::vector<const GuidedMode*>& modes,
                                    const std::vector<cdouble>& coefficients, double lambda_nm,
                                    const FieldGridSpec& grid, double magnification) {
  if (modes.empty() || modes.size() != coefficients.size())
    throw std::invalid_argument("superposition_field: modes/coefficients mismatch");
  if (!(magnification > 0)) throw std::invalid_argument("superposition_field: magnification <= 0");

  TransverseField f;
  f.n = grid.n;
  f.pitch_um = grid.pitch_um;
  f.z_mm = 0;
  f.lambda_nm = lambda_nm;
  f.amp.assign(static_cast<std::size_t>(grid.n) * grid.n, cdouble{0, 0});

  const GridSpec& mg = modes[0]->grid;
  for (std::size_t m = 1; m < modes.size(); ++m)
    if (!(modes[m]->grid == mg)) throw ShapeError("superposition_field: modes on different grids");

  for (int j = 0; j < grid.n; ++j) {
    double y = f.coord(j) / magnification;
    for (int i = 0; i < grid.n; ++i) {
      double x = f.coord(i) / magnification;
      cdouble s{0, 0};
      for (std::size_t m = 0; m < modes.size(); ++m) {
        double fx = catmull_rom(modes[m]->fx, mg.x0, mg.dx, mg.nx, x);
        double fy = catmull_rom(modes[m]->fy, mg.y0, mg.dy, mg.ny, y);
        s += coefficients[m] * (fx * fy);
      }
      f.amp[static_cast<std::size_t>(j) * grid.n + i] = s / magnification;
    }
  }
  collection_lowpass(f, grid.collection_na, magnification);
  f.normalize_power();
  nyquist_guard(f, "superposition_field");
  return f;
}

TransverseField facet_field(const GuidedMode& mode, double lambda_nm, const FieldGridSpec& grid,
                            double magnification, bool normalize) {
  TransverseField f;
  f.n = grid.n;
  f.pitch_um = grid.pitch_um;
  f.z_mm = 0;
  f.lambda_nm = lambda_nm;
  f.amp.assign(static_cast<std::size_t>(grid.n) * grid.n, cdouble{0, 0});
  const GridSpec& mg = mode.grid;
  for (int j = 0; j < grid.n; ++j) {
    double y = f.coord(j) / magnification;
    for (int i = 0; i < grid.n; ++i) {
      double x = f.coord(i) / magnification;
      double fx = catmull_rom(mode.fx, mg.x0, mg.dx, mg.nx, x);
      double fy = catmull_rom(mode.fy, mg.y0, mg.dy, mg.ny, y);
      f.amp[static_cast<std::size_t>(j) * grid.n + i] = fx * fy / magnification;
    }
  }
  collection_lowpass(f, grid.collection_na, magnification);
  if (normalize) f.normalize_power();
  nyquist_guard(f, "facet_field");
  return f;
}

TransverseField hg_field(int n_index, int m_index, double w0_um, double lambda_nm,
                         const FieldGridSpec& grid) {
  if (!(w0_um > 0)) throw std::invalid_argument("hg_field: waist must be positive");
  if (n_index < 0 || m_index < 0) throw std::invalid_argument("hg_field: negative mode index");
  auto hermite = [](int order, double x) {
    double h0 = 1.0, h1 = 2.0 * x;
    if (order == 0) return h0;
    if (order == 1) return h1;
    for (int k = 2; k <= order; ++k) {
      double h2 = 2.0 * x * h1 - 2.0 * (k - 1) * h0;
      h0 = h1;
      h1 = h2;
    }
    return h1;
  };
  TransverseField f;
  f.n = grid.n;
  f.pitch_um = grid.pitch_um;
  f.z_mm = 0;
  f.lambda_nm = lambda_nm;
  f.amp.assign(static_cast<std::size_t>(grid.n) * grid.n, cdouble{0, 0});
  const double s = std::sqrt(2.0) / w0_um;
  for (int j = 0; j < grid.n; ++j) {
    double y = f.coord(j);
    double gy = hermite(m_index, s * y) * std::exp(-y * y / (w0_um * w0_um));
    for (int i = 0; i < grid.n; ++i) {
      double x = f.coord(i);
      double gx = hermite(n_index, s * x) * std::exp(-x * x / (w0_um * w0_um));
      f.amp[static_cast<std::size_t>(j) * grid.n + i] = gx * gy;
    }
  }
  f.normalize_power();
  nyquist_guard(f, "hg_field");
  return f;
}

TransverseField thin_lens(const TransverseField& field, double focal_mm) {
  if (focal_mm == 0) throw std::invalid_argument("thin_lens: zero focal length");
  if (std::isinf(focal_mm)) return field;
  TransverseField out = field;
  const double lam_um = field.lambda_nm * 1e-3;
  const double f_um = focal_mm * 1000.0;
  // phase gradient at the grid corner must stay below Nyquist
  double rmax = std::abs(field.coord(0)) * std::sqrt(2.0);
  if (2.0 * kPi * rmax / (lam_um * std::abs(f_um)) > kPi / field.pitch_um) {
    std::ostringstream os;
    os << "thin_lens: lens phase aliases at the grid edge for f = " << focal_mm
       << " mm at pitch " << field.pitch_um << " um";
    throw NyquistError(os.str());
  }
  for (int j = 0; j < field.n; ++j) {
    double y = field.coord(j);
    for (int i = 0; i < field.n; ++i) {
      double x = field.coord(i);
      double phase = -kPi * (x * x + y * y) / (lam_um * f_um);
      out.amp[static_cast<std::size_t>(j) * field.n + i] *= cdouble{std::cos(phase), std::sin(phase)};
    }
  }
  return out;
}

TransverseField propagate(const TransverseField& field, double dz_mm) {
  if (dz_mm == 0.0) return field;
  nyquist_guard(field, "propagate");
  TransverseField out = field;
  out.z_mm = field.z_mm + dz_mm;

  const double lam_um = field.lambda_nm * 1e-3;
  const double k = 2.0 * kPi / lam_um;
  const double dz_um = dz_mm * 1000.0;
  const int n = field.n;

  fft2_inplace(out.amp.data(), n, n, false);
  std::vector<cdouble> row_phase(n);
  for (int j = 0; j < n; ++j) {
    double ky = 2.0 * kPi * fft_freq(j, n, field.pitch_um);
    for (int i = 0; i < n; ++i) {
      double kx = 2.0 * kPi * fft_freq(i, n, field.pitch_um);
      double arg = k * k - kx * kx - ky * ky;
      cdouble h{0, 0};
      if (arg > 0) {
        double phase = std::sqrt(arg) * dz_um;
        h = {std::cos(phase), std::sin(phase)};
      }
      row_phase[i] = h;
    }
    simd::active().cmul_inplace(out.amp.data() + static_cast<std::size_t>(j) * n, row_phase.data(), n);
  }
  fft2_inplace(out.amp.data(), n, n, true);
  edge_guard(out, "propagate");
  return out;
}

double second_moment_width(const std::vector<double>& marginal, double pitch_um) {
  double m0, m1, m2;
  std::vector<double> clipped(marginal.size());
  for (std::size_t i = 0; i < marginal.size(); ++i) clipped[i] = std::max(marginal[i], 0.0);
  simd::active().moments(clipped.data(), clipped.size(), 0.0, pitch_um, &m0, &m1, &m2);
  if (!(m0 > 0)) throw std::domain_error("second_moment_width: zero total intensity");
  double mean = m1 / m0;
  double var = m2 / m0 - mean * mean;
  return 2.0 * std::sqrt(std::max(var, 0.0));
}

double second_moment_width(const TransverseField& field, Axis axis) {
  return second_moment_width(field.marginal(axis), field.pitch_um);
}

void MixedBeam::check() const {
  if (components.empty() || components.size() != weights.size())
    throw std::invalid_argument("mixed beam: components/weights mismatch");
  double s = 0;
  for (double w : weights) {
    if (w < 0) throw std::invalid_argument("mixed beam: negative weight");
    s += w;
  }
  if (std::abs(s - 1.0) > 1e-9)
    throw std::invalid_argument("mixed beam: weights sum to " + std::to_string(s));
}

std::vector<double> MixedBeam::marginal_at(double z_mm, Axis axis) const {
  check();
  std::vector<double> acc;
  double pitch = components.front().pitch_um;
  for (std::size_t c = 0; c < components.size(); ++c) {
    TransverseField f = propagate(components[c], z_mm - components[c].z_mm);
    auto m = f.marginal(axis);
    if (acc.empty()) acc.assign(m.size(), 0.0);
    if (m.size() != acc.size() || f.pitch_um != pitch)
      throw ShapeError("mixed beam: components on different grids");
    for (std::size_t i = 0; i < m.size(); ++i) acc[i] += weights[c] * m[i];
  }
  return acc;
}

MixedBeam heralded_mixed_beam(const HeraldedState& state, const std::vector<GuidedMode>& arm_modes,
                              double lambda_nm, const FieldGridSpec& grid, double waist_um,
                              double weight_floor) {
  const int dim = static_cast<int>(state.basis.size());
  std::vector<const GuidedMode*> basis_modes(dim, nullptr);
  for (int i = 0; i < dim; ++i) {
    for (const auto& m : arm_modes)
      if (m.label == state.basis[i]) basis_modes[i] = &m;
    if (!basis_modes[i])
      throw SolverError("heralded_mixed_beam: no solved mode for label " + state.basis[i].str());
  }

  // magnification: map the fundamental facet mode onto the stated waist
  const GuidedMode* fund = nullptr;
  for (const auto& m : arm_modes)
    if (m.label == ModeLabel{0, 0}) fund = &m;
  if (!fund) throw SolverError("heralded_mixed_beam: fundamental mode missing");
  auto fx = fund->fx;
  auto fy = fund->fy;
  std::vector<double> ix(fx.size()), iy(fy.size());
  for (std::size_t q = 0; q < fx.size(); ++q) ix[q] = fx[q] * fx[q];
  for (std::size_t q = 0; q < fy.size(); ++q) iy[q] = fy[q] * fy[q];
  double wx = second_moment_width(ix, fund->grid.dx);
  double wy = second_moment_width(iy, fund->grid.dy);
  double mag = waist_um / std::sqrt(wx * wy);

  std::vector<double> evals;
  std::vector<cdouble> evecs;
  eigh(state.rho, dim, evals, evecs);

  MixedBeam beam;
  double kept = 0;
  for (int k = dim - 1; k >= 0; --k) { // descending eigenvalue order
    double w = evals[k];
    if (w < weight_floor) continue;
    std::vector<cdouble> coeff(dim);
    for (int i = 0; i < dim; ++i) coeff[i] = evecs[i * dim + k];
    beam.components.push_back(superposition_field(basis_modes, coeff, lambda_nm, grid, mag));
    beam.weights.push_back(w);
    kept += w;
  }
  if (beam.components.empty()) throw std::domain_error("heralded_mixed_beam: state has no weight");
  for (double& w : beam.weights) w /= kept;
  return beam;
}

namespace {

KnifeEdgeCurve scan_from_marginal(const std::vector<double>& marg, double pitch, double z_mm,
                                  Axis axis, const std::vector<double>& edge_um,
                                  const KnifeEdgeOptions& opt) {
  if (edge_um.size() < 3) throw std::invalid_argument("knife_edge_scan: need >= 3 edge positions");
  for (std::size_t i = 1; i < edge_um.size(); ++i)
    if (!(edge_um[i] > edge_um[i - 1]))
      throw std::invalid_argument("knife_edge_scan: edge positions must increase");

  const int n = static_cast<int>(marg.size());
  const double x0 = -(n / 2) * pitch;

  // transmitted fraction above position p with the sampled marginal treated
  // as piecewise linear between pixel centers, so T is smooth enough for the
  // derivative reconstruction downstream
  std::vector<double> cum(n, 0.0); // integral from x0 up to sample i
  for (int i = 1; i < n; ++i) cum[i] = cum[i - 1] + 0.5 * (marg[i - 1] + marg[i]) * pitch;
  const double total = cum[n - 1];
  auto transmitted = [&](double p) {
    double x_lo = x0, x_hi = x0 + (n - 1) * pitch;
    if (p <= x_lo) return 1.0;
    if (p >= x_hi) return 0.0;
    double t = (p - x_lo) / pitch;
    int i = std::min(static_cast<int>(t), n - 2);
    double f = t - i;
    double mi = marg[i] + f * (marg[i + 1] - marg[i]);
    double below = cum[i] + 0.5 * (marg[i] + mi) * f * pitch;
    return 1.0 - below / total;
  };

  double covered = transmitted(edge_um.front()) - transmitted(edge_um.back());
  if (covered < 0.99) {
    std::ostringstream os;
    os << "knife_edge_scan: edge span covers only " << covered * 100.0
       << "% of the beam energy; extend the scan range";
    throw std::invalid_argument(os.str());
  }

  KnifeEdgeCurve curve;
  curve.axis = axis;
  curve.z_mm = z_mm;
  curve.edge_um = edge_um;
  curve.budget = opt.budget;
  curve.noiseless = opt.noiseless;
  curve.seed = opt.seed;
  curve.sampling_variance_um2 = pitch * pitch / 6.0;
  curve.expected.resize(edge_um.size());
  curve.counts.resize(edge_um.size());
  for (std::size_t k = 0; k < edge_um.size(); ++k) {
    double mean = opt.budget * transmitted(edge_um[k]) + opt.accidental_floor;
    curve.expected[k] = mean;
    if (opt.noiseless) {
      curve.counts[k] = mean;
    } else {
      Rng rng = Rng::stream(opt.seed, k); // stream index = position index
      curve.counts[k] = static_cast<double>(rng.poisson(mean));
    }
  }
  return curve;
}

} // namespace

KnifeEdgeCurve knife_edge_scan(const MixedBeam& beam, double z_mm, Axis axis,
                               const std::vector<double>& edge_um, const KnifeEdgeOptions& opt) {
  auto marg = beam.marginal_at(z_mm, axis);
  return scan_from_marginal(marg, beam.components.front().pitch_um, z_mm, axis, edge_um, opt);
}

namespace {

// derivative -> clip -> pedestal subtract -> second moment -> box unsmearing.
// The central difference over +-m samples convolves the marginal with a box
// of width 2 m h whose variance m^2 h^2 / 3 adds exactly; it is removed at
// the end, so a wide baseline trades no bias for much quieter derivatives.
double reconstruct_width(const std::vector<double>& pos, const std::vector<double>& counts,
                         int m, double extra_variance_um2) {
  const int n = static_cast<int>(pos.size());
  if (n < 2 * m + 8) throw SolverError("width_from_knife_edge: too few positions for the baseline");
  std::vector<double> x, f;
  x.reserve(n - 2 * m);
  f.reserve(n - 2 * m);
  for (int k = m; k + m < n; ++k) {
    x.push_back(pos[k]);
    f.push_back(-(counts[k + m] - counts[k - m]) / (pos[k + m] - pos[k - m]));
  }
  for (double& v : f) v = std::max(v, 0.0);
  int outer = std::max(1, static_cast<int>(f.size()) / 20);
  double pedestal = 0;
  for (int k = 0; k < outer; ++k) pedestal += f[k] + f[f.size() - 1 - k];
  pedestal /= 2.0 * outer;
  // residual tail noise must keep both signs after the pedestal leaves, or
  // its clipped mean re-inflates the second moment
  double m0 = 0, m1 = 0, m2 = 0;
  for (std::size_t k = 0; k < f.size(); ++k) {
    double v = f[k] - pedestal;
    m0 += v;
    m1 += v * x[k];
    m2 += v * x[k] * x[k];
  }
  if (!(m0 > 0)) throw SolverError("width_from_knife_edge: reconstructed marginal is empty");
  double mean = m1 / m0;
  double var = m2 / m0 - mean * mean;
  double h = (pos.back() - pos.front()) / (n - 1);
  var -= m * h * m * h / 3.0 + extra_variance_um2;
  return 2.0 * std::sqrt(std::max(var, 0.0));
}

} // namespace

WidthEstimate width_from_knife_edge(const KnifeEdgeCurve& curve, int bootstrap_resamples,
                                    int derivative_baseline) {
  WidthEstimate est;
  est.w_um = reconstruct_width(curve.edge_um, curve.counts, derivative_baseline,
                               curve.sampling_variance_um2);
  if (curve.noiseless || bootstrap_resamples <= 0) return est;

  // parametric bootstrap around the observed counts
  double sum = 0, sum2 = 0;
  int ok = 0;
  for (int r = 0; r < bootstrap_resamples; ++r) {
    std::vector<double> resampled(curve.counts.size());
    for (std::size_t k = 0; k < curve.counts.size(); ++k) {
      Rng rng = Rng::stream(mix_seed(curve.seed, 0x626f6f74ULL),
                            static_cast<std::uint64_t>(r) * curve.counts.size() + k);
      resampled[k] = static_cast<double>(rng.poisson(curve.counts[k]));
    }
    try {
      double w = reconstruct_width(curve.edge_um, resampled, derivative_baseline,
                                   curve.sampling_variance_um2);
      sum += w;
      sum2 += w * w;
      ++ok;
    } catch (const SolverError&) {
      // resample lost the beam entirely; skip
    }
  }
  if (ok > 1) {
    double mean = sum / ok;
    est.sigma_w_um = std::sqrt(std::max(sum2 / ok - mean * mean, 0.0) * ok / (ok - 1.0));
  }
  return est;
}

std::vector<double> iso_sampling_plan(double z0_mm, double zr_mm, int points_inside,
                                      int points_outside) {
  if (!(zr_mm > 0)) throw std::invalid_argument("iso_sampling_plan: Rayleigh range must be positive");
  if (points_inside < 5 || points_outside < 5)
    throw std::invalid_argument(
        "iso_sampling_plan: the standard requires >= 5 points inside z_R and >= 5 outside 2 z_R");
  // the inside cluster stays at +-0.7 z_R so a moderately overestimated
  // Rayleigh range still leaves every point within the true one
  std::vector<double> plan;
  for (int k = 0; k < points_inside; ++k)
    plan.push_back(z0_mm + zr_mm * (-0.7 + 1.4 * k / (points_inside - 1)));
  for (int k = 0; k < points_outside; ++k) {
    double off = (2.5 + 0.5 * (k / 2)) * zr_mm;
    plan.push_back(z0_mm + (k % 2 == 0 ? off : -off));
  }
  std::sort(plan.begin(), plan.end());
  return plan;
}

std::pair<double, double> estimate_beam_caustic(const MixedBeam& beam, Axis axis,
                                                double zr_guess_mm) {
  beam.check();
  std::vector<double> z, w2;
  for (double s : {-2.0, -1.0, 0.0, 1.0, 2.0}) {
    double zp = s * zr_guess_mm;
    z.push_back(zp);
    double w = second_moment_width(beam.marginal_at(zp, axis), beam.components.front().pitch_um);
    w2.push_back(w * w);
  }
  auto q = fit_quadratic(z, w2, {});
  double disc = q.a * q.c - 0.25 * q.b * q.b;
  if (!(q.c > 0) || !(disc > 0))
    throw SolverError("estimate_beam_caustic: preliminary fit is not a diverging caustic");
  return {-q.b / (2 * q.c), std::sqrt(disc) / q.c};
}

bool CausticScan::iso_plan_satisfied(Axis axis) const {
  int inside = 0, outside = 0;
  for (const auto& r : records) {
    if (r.axis != axis) continue;
    double d = std::abs(r.z_mm - z0_estimate_mm);
    if (d < zr_estimate_mm) ++inside;
    if (d > 2.0 * zr_estimate_mm) ++outside;
  }
  return inside >= 5 && outside >= 5;
}

M2AxisFit fit_m2(const CausticScan& scan, Axis axis) {
  std::vector<double> z, w2, sig;
  bool weighted = false;
  for (const auto& r : scan.records) {
    if (r.axis != axis) continue;
    z.push_back(r.z_mm);
    w2.push_back(r.w_um * r.w_um);
    sig.push_back(2.0 * r.w_um * r.sigma_w_um); // sigma of w^2
    if (r.sigma_w_um > 0) weighted = true;
  }
  if (z.size() < 6)
    throw PlanError("fit_m2: need at least 6 records on the requested axis, got " +
                    std::to_string(z.size()));
  if (!scan.iso_plan_satisfied(axis))
    throw PlanError("fit_m2: scan does not satisfy the 5-inside/5-outside sampling plan");

  if (weighted) {
    // a degenerate bootstrap can leave sigma = 0 on isolated planes; give
    // those the median uncertainty instead of infinite weight
    std::vector<double> pos;
    for (double s : sig)
      if (s > 0) pos.push_back(s);
    std::sort(pos.begin(), pos.end());
    double med = pos[pos.size() / 2];
    for (double& s : sig)
      if (!(s > 0)) s = med;
  }
  auto fit = fit_quadratic(z, w2, weighted ? sig : std::vector<double>{});
  auto cov = fit.cov;
  if (!weighted && fit.dof > 0) {
    double s2 = fit.chi2 / fit.dof;
    for (auto& c : cov) c *= s2;
  }

  double disc = fit.a * fit.c - 0.25 * fit.b * fit.b;
  if (!(fit.c > 0) || !(disc > 0)) {
    std::ostringstream os;
    os << "fit_m2: unphysical caustic fit a=" << fit.a << " b=" << fit.b << " c=" << fit.c
       << " (a*c - b^2/4 = " << disc << ")";
    throw SolverError(os.str());
  }

  M2AxisFit out;
  out.axis = axis;
  out.a = fit.a;
  out.b = fit.b;
  out.c = fit.c;
  const double lam_um = scan.lambda_nm * 1e-3;
  const double g = std::sqrt(disc);       // um^2 / mm
  out.m2 = kPi / lam_um * g * 1e-3;       // mm -> um conversion
  double grad[3] = {fit.c / (2 * g), -fit.b / (4 * g), fit.a / (2 * g)};
  double var = 0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) var += grad[i] * cov[i * 3 + j] * grad[j];
  out.m2_sigma = kPi / lam_um * 1e-3 * std::sqrt(std::max(var, 0.0));
  out.z0_mm = -fit.b / (2 * fit.c);
  out.w0_um = std::sqrt(disc / fit.c);
  out.zr_mm = std::sqrt(disc) / fit.c; // w^2 doubles at z0 +- zr
  out.chi2_per_dof = fit.dof > 0 ? fit.chi2 / fit.dof : 0.0;
  return out;
}

PreparedCaustic prepare_caustic(const MixedBeam& beam, const std::vector<double>& plan_z_mm,
                                Axis axis) {
  beam.check();
  PreparedCaustic prep;
  prep.plan_z_mm = plan_z_mm;
  prep.axis = axis;
  prep.pitch_um = beam.components.front().pitch_um;
  prep.lambda_nm = beam.components.front().lambda_nm;
  prep.marginals.resize(plan_z_mm.size());
  prep.noiseless_w_um.resize(plan_z_mm.size());
  for (std::size_t p = 0; p < plan_z_mm.size(); ++p) {
    prep.marginals[p] = beam.marginal_at(plan_z_mm[p], axis);
    prep.noiseless_w_um[p] = second_moment_width(prep.marginals[p], prep.pitch_um);
  }
  if (plan_z_mm.size() >= 3) {
    std::vector<double> w2(plan_z_mm.size());
    for (std::size_t p = 0; p < plan_z_mm.size(); ++p)
      w2[p] = prep.noiseless_w_um[p] * prep.noiseless_w_um[p];
    auto q = fit_quadratic(plan_z_mm, w2, {});
    if (q.c > 0 && q.a * q.c - 0.25 * q.b * q.b > 0) {
      prep.z0_estimate_mm = -q.b / (2 * q.c);
      prep.zr_estimate_mm = std::sqrt(q.a * q.c - 0.25 * q.b * q.b) / q.c;
    }
  }
  return prep;
}

CausticScan scan_from_prepared(const PreparedCaustic& prep,
                               const std::optional<KnifeEdgeOptions>& noise, int edge_positions) {
  CausticScan scan;
  scan.lambda_nm = prep.lambda_nm;
  scan.seed = noise ? noise->seed : 0;
  scan.z0_estimate_mm = prep.z0_estimate_mm;
  scan.zr_estimate_mm = prep.zr_estimate_mm;

  for (std::size_t p = 0; p < prep.plan_z_mm.size(); ++p) {
    CausticRecord rec;
    rec.z_mm = prep.plan_z_mm[p];
    rec.axis = prep.axis;
    if (!noise) {
      rec.w_um = prep.noiseless_w_um[p];
      rec.sigma_w_um = 0;
      rec.counts_used = 0;
    } else {
      // edge span from the noiseless marginal, centred on its centroid
      const auto& m = prep.marginals[p];
      double x0 = -(static_cast<int>(m.size()) / 2) * prep.pitch_um;
      double m0 = 0, m1 = 0;
      for (std::size_t i = 0; i < m.size(); ++i) {
        m0 += m[i];
        m1 += m[i] * (x0 + i * prep.pitch_um);
      }
      double center = m1 / m0;
      double half_span = noise->half_span_widths * prep.noiseless_w_um[p];
      std::vector<double> edges(edge_positions);
      for (int k = 0; k < edge_positions; ++k)
        edges[k] = center - half_span + 2.0 * half_span * k / (edge_positions - 1);
      KnifeEdgeOptions o = *noise;
      o.seed = mix_seed(noise->seed, 0x9e1u + 31 * static_cast<std::uint64_t>(p) +
                                         (prep.axis == Axis::X ? 0 : 1));
      auto curve = scan_from_marginal(m, prep.pitch_um, prep.plan_z_mm[p], prep.axis, edges, o);
      auto est = width_from_knife_edge(curve, o.bootstrap_resamples, o.derivative_baseline);
      rec.w_um = est.w_um;
      rec.sigma_w_um = est.sigma_w_um;
      rec.counts_used = o.budget;
    }
    scan.records.push_back(rec);
  }
  return scan;
}

CausticScan mixture_caustic(const MixedBeam& beam, const std::vector<double>& plan_z_mm, Axis axis,
                            const std::optional<KnifeEdgeOptions>& noise, int edge_positions) {
  return scan_from_prepared(prepare_caustic(beam, plan_z_mm, axis), noise, edge_positions);
}

} // namespace wgspdc
