#include "wgspdc/material.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace wgspdc {

SellmeierForm sellmeier_form_from_tag(const std::string& tag) {
  if (tag == "constant") return SellmeierForm::Constant;
  if (tag == "sellmeier_1pole_ir") return SellmeierForm::OnePoleIr;
  if (tag == "sellmeier_2pole") return SellmeierForm::TwoPole;
  throw std::invalid_argument("unknown sellmeier formula tag: " + tag);
}

std::string sellmeier_form_tag(SellmeierForm f) {
  switch (f) {
    case SellmeierForm::Constant: return "constant";
    case SellmeierForm::OnePoleIr: return "sellmeier_1pole_ir";
    case SellmeierForm::TwoPole: return "sellmeier_2pole";
  }
  return "?";
}

static void need_coeffs(const SellmeierSet& s, std::size_t n) {
  if (s.coeff.size() < n) {
    std::ostringstream os;
    os << "sellmeier set axis " << s.axis << ": " << sellmeier_form_tag(s.form)
       << " needs " << n << " coefficients, got " << s.coeff.size();
    throw std::invalid_argument(os.str());
  }
}

double SellmeierSet::n_squared(double l) const {
  switch (form) {
    case SellmeierForm::Constant:
      need_coeffs(*this, 1);
      return coeff[0];
    case SellmeierForm::OnePoleIr: {
      need_coeffs(*this, 4);
      return coeff[0] + coeff[1] / (1.0 - coeff[2] / (l * l)) - coeff[3] * l * l;
    }
    case SellmeierForm::TwoPole: {
      need_coeffs(*this, 5);
      return coeff[0] + coeff[1] / (l * l - coeff[2]) + coeff[3] / (l * l - coeff[4]);
    }
  }
  return 0;
}

double SellmeierSet::dn2_dlambda(double l) const {
  switch (form) {
    case SellmeierForm::Constant:
      return 0.0;
    case SellmeierForm::OnePoleIr: {
      double t = 1.0 - coeff[2] / (l * l);
      return -2.0 * coeff[1] * coeff[2] / (l * l * l * t * t) - 2.0 * coeff[3] * l;
    }
    case SellmeierForm::TwoPole: {
      double a = l * l - coeff[2];
      double b = l * l - coeff[4];
      return -2.0 * l * (coeff[1] / (a * a) + coeff[3] / (b * b));
    }
  }
  return 0;
}

void SellmeierSet::check_range(double l) const {
  if (!(l >= valid_min_um && l <= valid_max_um) || !std::isfinite(l)) {
    std::ostringstream os;
    os << "wavelength " << l << " um outside validity range [" << valid_min_um
       << ", " << valid_max_um << "] um of sellmeier set axis " << axis;
    throw std::out_of_range(os.str());
  }
}

double SellmeierSet::refractive_index(double l) const {
  check_range(l);
  double n2 = n_squared(l);
  if (!(n2 > 1.0) || !std::isfinite(n2)) {
    std::ostringstream os;
    os << "sellmeier set axis " << axis << " gives nonphysical n^2 = " << n2
       << " at " << l << " um";
    throw std::domain_error(os.str());
  }
  return std::sqrt(n2);
}

double SellmeierSet::dn_dlambda(double l) const {
  check_range(l);
  return dn2_dlambda(l) / (2.0 * std::sqrt(n_squared(l)));
}

double SellmeierSet::group_index(double l) const {
  double n = refractive_index(l);
  return n - l * dn2_dlambda(l) / (2.0 * n);
}

const SellmeierSet& MaterialSet::axis(const std::string& name) const {
  if (name == "x") return x;
  if (name == "y") return y;
  if (name == "z") return z;
  throw std::invalid_argument("unknown crystal axis: " + name);
}

MaterialSet ktp_fan1987() {
  const std::string cite = "Fan et al., Appl. Opt. 26, 2390 (1987)";
  MaterialSet m;
  m.x = {"x", SellmeierForm::OnePoleIr, {2.16747, 0.83733, 0.04611, 0.01713}, 0.35, 1.1, cite};
  m.y = {"y", SellmeierForm::OnePoleIr, {2.19229, 0.83547, 0.04970, 0.01621}, 0.35, 1.1, cite};
  m.z = {"z", SellmeierForm::OnePoleIr, {2.25411, 1.06543, 0.05486, 0.02140}, 0.35, 1.1, cite};
  return m;
}

} // namespace wgspdc
