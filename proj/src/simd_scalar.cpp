#include "wgspdc/simd_kernels.hpp"

#include <cmath>

namespace wgspdc::simd {

namespace {

double sum_scalar(const double* a, std::size_t n) {
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) s += a[i];
  return s;
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double dot3_scalar(const double* w, const double* a, const double* b, std::size_t n) {
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) s += w[i] * a[i] * b[i];
  return s;
}

double sqrt_dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) s += std::sqrt(a[i] * b[i]);
  return s;
}

double abs2_sum_scalar(const std::complex<double>* a, std::size_t n) {
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) s += a[i].real() * a[i].real() + a[i].imag() * a[i].imag();
  return s;
}

std::complex<double> cdotw_scalar(const std::complex<double>* a, const std::complex<double>* b,
                                  const double* w, std::size_t n) {
  double re = 0, im = 0;
  for (std::size_t i = 0; i < n; ++i) {
    // a * conj(b)
    re += w[i] * (a[i].real() * b[i].real() + a[i].imag() * b[i].imag());
    im += w[i] * (a[i].imag() * b[i].real() - a[i].real() * b[i].imag());
  }
  return {re, im};
}

void cmul_inplace_scalar(std::complex<double>* a, const std::complex<double>* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) a[i] *= b[i];
}

void caxpy_scalar(std::complex<double>* y, std::complex<double> alpha,
                  const std::complex<double>* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void moments_scalar(const double* I, std::size_t n, double x0, double dx,
                    double* m0, double* m1, double* m2) {
  double s0 = 0, s1 = 0, s2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double x = x0 + static_cast<double>(i) * dx;
    s0 += I[i];
    s1 += I[i] * x;
    s2 += I[i] * x * x;
  }
  *m0 = s0;
  *m1 = s1;
  *m2 = s2;
}

} // namespace

const Kernels& scalar() {
  static const Kernels k{sum_scalar,       dot_scalar,  dot3_scalar, sqrt_dot_scalar,
                         abs2_sum_scalar,  cdotw_scalar, cmul_inplace_scalar,
                         caxpy_scalar,     moments_scalar};
  return k;
}

} // namespace wgspdc::simd
