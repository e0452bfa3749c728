#pragma once

#include <string>
#include <vector>

namespace wgspdc {

enum class SellmeierForm {
  Constant,     // n^2 = c0
  OnePoleIr,    // n^2 = c0 + c1/(1 - c2/l^2) - c3*l^2        (Fan-style)
  TwoPole,      // n^2 = c0 + c1/(l^2 - c2) + c3/(l^2 - c4)   (Kato-style)
};

SellmeierForm sellmeier_form_from_tag(const std::string& tag);
std::string sellmeier_form_tag(SellmeierForm f);

// One crystal axis' dispersion: n(lambda) from a published coefficient fit.
// Wavelengths are vacuum values in micrometres throughout.
struct SellmeierSet {
  std::string axis;               // "x" | "y" | "z"
  SellmeierForm form = SellmeierForm::Constant;
  std::vector<double> coeff;
  double valid_min_um = 0;
  double valid_max_um = 0;
  std::string citation;

  double n_squared(double lambda_um) const;        // no range check
  double dn2_dlambda(double lambda_um) const;      // analytic d(n^2)/dl

  // n(lambda); throws std::out_of_range naming the wavelength and interval.
  double refractive_index(double lambda_um) const;
  // n_g = n - lambda dn/dlambda with the analytic derivative.
  double group_index(double lambda_um) const;
  double dn_dlambda(double lambda_um) const;

  void check_range(double lambda_um) const;
};

// The three axes of one crystal.
struct MaterialSet {
  SellmeierSet x, y, z;
  const SellmeierSet& axis(const std::string& name) const;
};

// Shipped default: flux-grown KTP fits of Fan et al., Appl. Opt. 26, 2390
// (1987), declared over 0.35-1.1 um. Used when no configuration overrides.
MaterialSet ktp_fan1987();

} // namespace wgspdc
