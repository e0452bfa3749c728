#pragma once

#include "wgspdc/common.hpp"
#include "wgspdc/interp.hpp"
#include "wgspdc/material.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace wgspdc {

enum class Pol { H, V, P };

std::string pol_name(Pol p);
Pol pol_from_name(const std::string& s);

enum class LateralShape { Step, Graded };

// Channel waveguide model: exponential-permittivity depth profile of
// effective depth d below the surface (y >= 0 into the substrate, cover
// above), and a lateral step (or erf-graded) profile of width w. Polarization
// enters through the crystal axis mapping and its index increase.
struct WaveguideGeometry {
  double width_um = 2.0;
  double depth_um = 5.0;
  double length_mm = 1.0;
  // calibrated values for the shipped KTP dispersion defaults
  double poling_period_um = 2.290009;
  double delta_n_h = 0.037416;
  double delta_n_v = 0.037640;
  double cover_index = 1.0;
  LateralShape lateral_shape = LateralShape::Step;
  double lateral_grading_um = 0.25; // erf rolloff scale for the graded option
  std::string axis_h = "y";
  std::string axis_v = "z";
  std::string axis_p = "z";

  void validate() const; // throws std::invalid_argument on a bad field
  std::uint64_t hash() const;

  const std::string& axis_for(Pol p) const;
  // The pump reuses the index increase of whichever of H/V shares its axis.
  double delta_n_for(Pol p) const;
};

struct ModeLabel {
  int i = 0; // node count along the width (x)
  int j = 0; // node count along the depth (y)
  bool operator==(const ModeLabel&) const = default;
  std::string str() const { return std::to_string(i) + std::to_string(j); }
};

// Scalar field sampled on a uniform grid, row-major with x fastest.
struct Grid2D {
  GridSpec spec;
  std::vector<double> v;

  double& at(int ix, int iy) { return v[static_cast<std::size_t>(iy) * spec.nx + ix]; }
  double at(int ix, int iy) const { return v[static_cast<std::size_t>(iy) * spec.nx + ix]; }
  double trapezoid_integral() const;
  void normalize_trapezoid(); // scale so the trapezoid integral equals 1
};

// One bound mode of a 1D slab problem, sampled on the given axis coordinates.
struct SlabMode {
  double n_eff = 0;
  int nodes = 0;
  std::vector<double> coord; // um
  std::vector<double> amp;   // unit trapezoid norm of amp^2
};

struct SlabOptions {
  double tail_factor = 14.0;   // integration depth in units of d
  double step_um = 0.0;        // 0 = auto from the transverse wavenumber
  int scan_points = 480;
  double min_confinement = 3e-5; // drop modes closer than this to cutoff (n_eff - n_sub)
};

// Bound modes of the exponential-permittivity depth profile
// eps(y) = n_sub^2 + ((n_sub+dn)^2 - n_sub^2) exp(-y/d), cover below y = 0.
// Shooting (RK4, coarse/fine grid with Richardson-extrapolated roots), sorted
// by descending n_eff. No bound mode -> empty list.
std::vector<SlabMode> solve_depth_slab(double n_sub, double delta_n, double depth_um,
                                       double n_cover, double lambda_um,
                                       const SlabOptions& opt = {});

// Bound modes of the symmetric lateral profile. Step profile uses the
// transcendental slab relation; the graded (erf) option reuses the shooter.
std::vector<SlabMode> solve_lateral_slab(double n_core_eff, double n_clad_eff, double width_um,
                                         double lambda_um,
                                         LateralShape shape = LateralShape::Step,
                                         double grading_um = 0.25,
                                         const SlabOptions& opt = {});

// A guided channel mode at one wavelength. The 2D profile is the outer
// product of unit-norm 1D factors, so it has unit trapezoid norm by
// construction.
struct GuidedMode {
  ModeLabel label;
  Pol pol = Pol::H;
  double lambda_um = 0;
  double n_eff = 0;
  GridSpec grid;
  std::vector<double> fx; // size nx, trapezoid-normalized
  std::vector<double> fy; // size ny, trapezoid-normalized

  double beta() const { return 2.0 * kPi * n_eff / lambda_um; } // rad/um
  double amplitude_at(int ix, int iy) const { return fx[ix] * fy[iy]; }
  Grid2D amplitude() const;
  Grid2D intensity() const;
};

// n_eff(lambda) of one labeled mode over solved knots; monotone cubic in
// between, range error outside.
struct ModeDispersion {
  ModeLabel label;
  Pol pol = Pol::H;
  Pchip n_eff_of_lambda;

  double n_eff(double lambda_um) const { return n_eff_of_lambda(lambda_um); }
  double beta(double lambda_um) const { return 2.0 * kPi * n_eff(lambda_um) / lambda_um; }
  double lambda_min() const { return n_eff_of_lambda.x_min(); }
  double lambda_max() const { return n_eff_of_lambda.x_max(); }
};

struct ModeFamily {
  Pol pol = Pol::H;
  std::vector<ModeDispersion> modes; // descending n_eff at the center knot
  const ModeDispersion* find(ModeLabel label) const;
};

struct SolverOptions {
  int grid_nx = 512;
  int grid_ny = 512;
  double window_x_widths = 6.0; // window spans this many channel widths
  double window_y_depths = 6.0; // and this many effective depths
  double cover_fraction = 0.1;  // fraction of the y window above the surface
  int label_cap = 3;            // solve labels with i,j <= cap
  SlabOptions slab;
};

class WaveguideSolver {
public:
  WaveguideSolver(WaveguideGeometry geom, MaterialSet materials, SolverOptions opt = {});

  const WaveguideGeometry& geometry() const { return geom_; }
  const MaterialSet& materials() const { return mat_; }
  const SolverOptions& options() const { return opt_; }
  GridSpec mode_grid() const;

  // All guided modes at one wavelength, descending n_eff, labels capped.
  // Cached by (geometry, polarization, wavelength); the returned vector is
  // immutable shared state.
  std::shared_ptr<const std::vector<GuidedMode>> solve(Pol pol, double lambda_um,
                                                       int max_modes = 64) const;

  ModeFamily family(Pol pol, const std::vector<double>& lambda_knots, int max_modes = 64) const;

  double substrate_index(Pol pol, double lambda_um) const;

private:
  WaveguideGeometry geom_;
  MaterialSet mat_;
  SolverOptions opt_;
};

// Overlap of two constant-phase mode functions reconstructed from normalized
// intensity grids: integral of sqrt(I_A * I_B). In [0, 1], 1 iff identical.
double mode_overlap(const Grid2D& intensity_a, const Grid2D& intensity_b);

// Triple amplitude-product integral, um^-1. Sign carries through.
double nonlinear_overlap(const GuidedMode& pump, const GuidedMode& h, const GuidedMode& v);
double nonlinear_overlap(const Grid2D& u_p, const Grid2D& u_h, const Grid2D& u_v);

} // namespace wgspdc
