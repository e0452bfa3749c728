#pragma once

#include <complex>
#include <cstddef>
#include <string>

// Data-parallel inner-loop kernels. Scalar reference implementations and an
// AVX2+FMA variant share these signatures; the active set is chosen once at
// runtime from CPUID (override with WGSPDC_SIMD=scalar|avx2). SIMD variants
// may reassociate sums, so results agree with the scalar path to rounding,
// not bit-exactly; the equivalence tests pin the tolerance.

namespace wgspdc::simd {

struct Kernels {
  double (*sum)(const double*, std::size_t);
  double (*dot)(const double*, const double*, std::size_t);
  // sum of w[i]*a[i]*b[i]
  double (*dot3)(const double*, const double*, const double*, std::size_t);
  // sum of sqrt(a[i]*b[i]), a,b >= 0
  double (*sqrt_dot)(const double*, const double*, std::size_t);
  // sum of |a[i]|^2
  double (*abs2_sum)(const std::complex<double>*, std::size_t);
  // sum of w[i]*a[i]*conj(b[i])
  std::complex<double> (*cdotw)(const std::complex<double>*, const std::complex<double>*,
                                const double*, std::size_t);
  // a[i] *= b[i]
  void (*cmul_inplace)(std::complex<double>*, const std::complex<double>*, std::size_t);
  // y[i] += alpha * x[i]
  void (*caxpy)(std::complex<double>*, std::complex<double>, const std::complex<double>*, std::size_t);
  // zeroth/first/second moments of a sampled density: m0 = sum I,
  // m1 = sum I*x, m2 = sum I*x^2 with x = x0 + i*dx
  void (*moments)(const double*, std::size_t, double x0, double dx,
                  double* m0, double* m1, double* m2);
};

const Kernels& active();
const Kernels& scalar();
bool avx2_available();
std::string active_name();

// Force a specific implementation (tests); name in {"scalar","avx2","auto"}.
void select(const std::string& name);

} // namespace wgspdc::simd
