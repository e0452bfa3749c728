#pragma once

#include "wgspdc/common.hpp"
#include "wgspdc/jsa.hpp"
#include "wgspdc/modesolver.hpp"

#include <optional>
#include <vector>

namespace wgspdc {

enum class Axis { X, Y };

// Complex transverse field on a square-pixel grid, unit power, carrying its
// plane position along the rail and a spectral-occupancy guard flag.
struct TransverseField {
  int n = 0;              // samples per side
  double pitch_um = 0;
  double z_mm = 0;
  double lambda_nm = 0;
  std::vector<cdouble> amp; // row-major, x fastest, coordinates centered

  double coord(int i) const { return (i - n / 2) * pitch_um; }
  double power() const;
  void normalize_power();
  std::vector<double> intensity() const;
  std::vector<double> marginal(Axis axis) const; // intensity integrated across the other axis
  // fraction of spectral power outside 85% of the Nyquist ring
  double high_frequency_fraction() const;
};

struct FieldGridSpec {
  int n = 1024;
  double pitch_um = 4.0;
  // numerical aperture of the collection objective; facet launches are
  // low-passed to the frequencies it can transmit (0 disables)
  double collection_na = 0.8;
};

// Launch a guided mode into free space: resample onto the field grid with an
// optional magnification (ideal imaging of the collection optics) and
// normalize. Throws NyquistError when the grid undersamples the mode.
TransverseField facet_field(const GuidedMode& mode, double lambda_nm, const FieldGridSpec& grid,
                            double magnification = 1.0, bool normalize = true);

// Superposition of guided modes sharing one grid, magnified and normalized.
TransverseField superposition_field(const std::vector<const GuidedMode*>& modes,
                                    const std::vector<cdouble>& coefficients, double lambda_nm,
                                    const FieldGridSpec& grid, double magnification);

// Hermite-Gauss mode of waist w0 (1/e^2 intensity radius of the embedded
// Gaussian) at its waist plane; the analytic oracle family for the fits.
TransverseField hg_field(int n_index, int m_index, double w0_um, double lambda_nm,
                         const FieldGridSpec& grid);

// Quadratic lens phase exp(-i pi r^2 / (lambda f)); norm preserved.
TransverseField thin_lens(const TransverseField& field, double focal_mm);

// Angular-spectrum propagation by dz (unitary; evanescent components of a
// guarded field are negligible by construction).
TransverseField propagate(const TransverseField& field, double dz_mm);

// w = 2 sigma of a sampled 1D intensity marginal.
double second_moment_width(const std::vector<double>& marginal, double pitch_um);
double second_moment_width(const TransverseField& field, Axis axis);

// Incoherent mixture of fields with nonnegative weights summing to 1.
struct MixedBeam {
  std::vector<TransverseField> components;
  std::vector<double> weights;

  void check() const;
  std::vector<double> marginal_at(double z_mm, Axis axis) const; // propagates each component
};

// Build the measurement-space mixture of a heralded spatial state: the
// density matrix is diagonalized and each eigenvector becomes one coherent
// component, scaled so the fundamental mode's waist matches waist_um.
MixedBeam heralded_mixed_beam(const HeraldedState& state,
                              const std::vector<GuidedMode>& arm_modes, double lambda_nm,
                              const FieldGridSpec& grid, double waist_um,
                              double weight_floor = 1e-6);

struct KnifeEdgeCurve {
  Axis axis = Axis::X;
  double z_mm = 0;
  std::vector<double> edge_um;     // knife-edge positions
  std::vector<double> counts;      // recorded counts (Poisson unless noiseless)
  std::vector<double> expected;    // noiseless expectation
  double budget = 0;               // mean counts with the edge withdrawn
  bool noiseless = false;
  std::uint64_t seed = 0;
  // variance the discrete transmission model adds to the true sigma^2
  // (pitch^2/6 for the piecewise-linear marginal); removed in the analysis
  double sampling_variance_um2 = 0;
};

struct KnifeEdgeOptions {
  double budget = 1e5;            // expected counts per position, edge withdrawn
  std::uint64_t seed = 1;
  double accidental_floor = 0.0;  // constant background counts per position
  bool noiseless = false;
  int bootstrap_resamples = 200;
  int derivative_baseline = 5;    // central-difference half-baseline in samples
  double half_span_widths = 3.4;  // scan half-extent in units of the beam width
};

// Transmission counts versus edge position: T(p) integrates the intensity on
// x > p (or y > p); counts are Poisson with mean budget*T + floor, stream
// index = position index. The positions must span > 99% of the beam energy.
KnifeEdgeCurve knife_edge_scan(const MixedBeam& beam, double z_mm, Axis axis,
                               const std::vector<double>& edge_um, const KnifeEdgeOptions& opt);

struct WidthEstimate {
  double w_um = 0;
  double sigma_w_um = 0; // Poisson bootstrap spread (0 for noiseless input)
};

// Differentiate the curve (central differences over +-baseline samples),
// clip negative lobes, subtract the outer-10% pedestal, undo the exact
// box-smearing variance of the wide baseline and take w = 2 sigma of the
// reconstructed marginal. sigma_w comes from a Poisson bootstrap.
WidthEstimate width_from_knife_edge(const KnifeEdgeCurve& curve, int bootstrap_resamples = 200,
                                    int derivative_baseline = 5);

struct CausticRecord {
  double z_mm = 0;
  Axis axis = Axis::X;
  double w_um = 0;
  double sigma_w_um = 0;
  double counts_used = 0;
};

struct CausticScan {
  std::vector<CausticRecord> records;
  double lambda_nm = 0;
  double z0_estimate_mm = 0;
  double zr_estimate_mm = 0;
  std::uint64_t seed = 0;

  bool iso_plan_satisfied(Axis axis) const; // >= 5 inside z_R, >= 5 outside 2 z_R
};

// ISO-style plan: points_inside uniform within +-0.7 z_R of z0 and
// points_outside alternating beyond 2 z_R in half-z_R steps.
std::vector<double> iso_sampling_plan(double z0_mm, double zr_mm, int points_inside,
                                      int points_outside);

// Preliminary noiseless estimate of (z0, z_R) from a coarse 5-plane scan,
// used to lay out the sampling plan for an unknown beam.
std::pair<double, double> estimate_beam_caustic(const MixedBeam& beam, Axis axis,
                                                double zr_guess_mm);

struct M2AxisFit {
  Axis axis = Axis::X;
  double a = 0, b = 0, c = 0; // w^2(z) = a + b z + c z^2 (um^2, um^2/mm, um^2/mm^2)
  double m2 = 0;
  double m2_sigma = 0;
  double w0_um = 0;
  double z0_mm = 0;
  double zr_mm = 0;
  double chi2_per_dof = 0;
};

// Weighted quadratic fit of w^2(z) per axis; M^2 = (pi/lambda) sqrt(a c - b^2/4).
// Throws PlanError when the ISO plan is unmet and SolverError (carrying the
// coefficients) when the fit is unphysical.
M2AxisFit fit_m2(const CausticScan& scan, Axis axis);

// Propagated per-plane marginals of a mixture, reusable across noise seeds.
struct PreparedCaustic {
  std::vector<double> plan_z_mm;
  Axis axis = Axis::X;
  double pitch_um = 0;
  double lambda_nm = 0;
  std::vector<std::vector<double>> marginals;
  std::vector<double> noiseless_w_um;
  double z0_estimate_mm = 0;
  double zr_estimate_mm = 0;
};

PreparedCaustic prepare_caustic(const MixedBeam& beam, const std::vector<double>& plan_z_mm,
                                Axis axis);

// Assemble a scan from prepared planes; with noise the widths come from
// simulated knife-edge counting at edge_positions per plane.
CausticScan scan_from_prepared(const PreparedCaustic& prep,
                               const std::optional<KnifeEdgeOptions>& noise,
                               int edge_positions = 55);

// Caustic of an incoherent mixture: additive second moments at every plane.
// With noise options the widths come from simulated knife-edge scans.
CausticScan mixture_caustic(const MixedBeam& beam, const std::vector<double>& plan_z_mm,
                            Axis axis, const std::optional<KnifeEdgeOptions>& noise,
                            int edge_positions = 55);

} // namespace wgspdc
