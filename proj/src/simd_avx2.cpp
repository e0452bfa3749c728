// AVX2+FMA kernel variants. Built with per-function target attributes so the
// translation unit compiles on any x86-64 host; dispatch guarantees these are
// only called when CPUID reports avx2 and fma.

#include "wgspdc/simd_kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define WGSPDC_HAVE_AVX2_TU 1
#include <immintrin.h>
#endif

#include <cmath>

namespace wgspdc::simd {

#ifdef WGSPDC_HAVE_AVX2_TU

#define WGSPDC_AVX2 __attribute__((target("avx2,fma")))

namespace {

WGSPDC_AVX2 inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(lo) + _mm_cvtsd_f64(_mm_unpackhi_pd(lo, lo));
}

WGSPDC_AVX2 double sum_avx2(const double* a, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
  double s = hsum(acc);
  for (; i < n; ++i) s += a[i];
  return s;
}

WGSPDC_AVX2 double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  double s = hsum(acc);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

WGSPDC_AVX2 double dot3_avx2(const double* w, const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d wa = _mm256_mul_pd(_mm256_loadu_pd(w + i), _mm256_loadu_pd(a + i));
    acc = _mm256_fmadd_pd(wa, _mm256_loadu_pd(b + i), acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += w[i] * a[i] * b[i];
  return s;
}

WGSPDC_AVX2 double sqrt_dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d p = _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_add_pd(acc, _mm256_sqrt_pd(p));
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += std::sqrt(a[i] * b[i]);
  return s;
}

WGSPDC_AVX2 double abs2_sum_avx2(const std::complex<double>* a, std::size_t n) {
  const double* p = reinterpret_cast<const double*>(a);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    __m256d v = _mm256_loadu_pd(p + 2 * i); // re0 im0 re1 im1
    acc = _mm256_fmadd_pd(v, v, acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += a[i].real() * a[i].real() + a[i].imag() * a[i].imag();
  return s;
}

WGSPDC_AVX2 std::complex<double> cdotw_avx2(const std::complex<double>* a,
                                            const std::complex<double>* b,
                                            const double* w, std::size_t n) {
  const double* pa = reinterpret_cast<const double*>(a);
  const double* pb = reinterpret_cast<const double*>(b);
  __m256d acc_re = _mm256_setzero_pd();
  __m256d acc_im = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    __m256d va = _mm256_loadu_pd(pa + 2 * i);              // ar0 ai0 ar1 ai1
    __m256d vb = _mm256_loadu_pd(pb + 2 * i);              // br0 bi0 br1 bi1
    __m128d wl = _mm_loadu_pd(w + i);                      // w0 w1
    __m256d vw = _mm256_set_m128d(_mm_unpackhi_pd(wl, wl), _mm_unpacklo_pd(wl, wl)); // w0 w0 w1 w1
    __m256d vbs = _mm256_permute_pd(vb, 0x5);              // bi0 br0 bi1 br1
    // re: ar*br + ai*bi ; im: ai*br - ar*bi
    acc_re = _mm256_fmadd_pd(_mm256_mul_pd(va, vw), vb, acc_re);
    acc_im = _mm256_fmadd_pd(_mm256_mul_pd(va, vw), vbs, acc_im);
  }
  // acc_re lanes: ar*br, ai*bi pairs -> plain hsum
  double re = hsum(acc_re);
  // acc_im lanes: ar*bi, ai*br alternating; combine with signs (-,+)
  alignas(32) double tmp[4];
  _mm256_storeu_pd(tmp, acc_im);
  double im = -tmp[0] + tmp[1] - tmp[2] + tmp[3];
  for (; i < n; ++i) {
    re += w[i] * (a[i].real() * b[i].real() + a[i].imag() * b[i].imag());
    im += w[i] * (a[i].imag() * b[i].real() - a[i].real() * b[i].imag());
  }
  return {re, im};
}

WGSPDC_AVX2 void cmul_inplace_avx2(std::complex<double>* a, const std::complex<double>* b,
                                   std::size_t n) {
  double* pa = reinterpret_cast<double*>(a);
  const double* pb = reinterpret_cast<const double*>(b);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    __m256d va = _mm256_loadu_pd(pa + 2 * i);
    __m256d vb = _mm256_loadu_pd(pb + 2 * i);
    __m256d br = _mm256_permute_pd(vb, 0x0);  // br0 br0 br1 br1
    __m256d bi = _mm256_permute_pd(vb, 0xf);  // bi0 bi0 bi1 bi1
    __m256d vas = _mm256_permute_pd(va, 0x5); // ai ar swapped
    // (ar+i ai)(br+i bi) = (ar br - ai bi) + i(ar bi + ai br)
    __m256d t = _mm256_mul_pd(vas, bi);
    t = _mm256_xor_pd(t, _mm256_set_pd(0.0, -0.0, 0.0, -0.0)); // negate lanes 0,2
    _mm256_storeu_pd(pa + 2 * i, _mm256_fmadd_pd(va, br, t));
  }
  for (; i < n; ++i) a[i] *= b[i];
}

WGSPDC_AVX2 void caxpy_avx2(std::complex<double>* y, std::complex<double> alpha,
                            const std::complex<double>* x, std::size_t n) {
  double* py = reinterpret_cast<double*>(y);
  const double* px = reinterpret_cast<const double*>(x);
  __m256d ar = _mm256_set1_pd(alpha.real());
  __m256d ai = _mm256_set1_pd(alpha.imag());
  __m256d sign = _mm256_set_pd(0.0, -0.0, 0.0, -0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    __m256d vx = _mm256_loadu_pd(px + 2 * i);
    __m256d vxs = _mm256_permute_pd(vx, 0x5);
    __m256d t = _mm256_xor_pd(_mm256_mul_pd(vxs, ai), sign);
    __m256d prod = _mm256_fmadd_pd(vx, ar, t);
    _mm256_storeu_pd(py + 2 * i, _mm256_add_pd(_mm256_loadu_pd(py + 2 * i), prod));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

WGSPDC_AVX2 void moments_avx2(const double* I, std::size_t n, double x0, double dx,
                              double* m0, double* m1, double* m2) {
  __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd(), s2 = _mm256_setzero_pd();
  __m256d x = _mm256_add_pd(_mm256_set1_pd(x0), _mm256_mul_pd(_mm256_set_pd(3, 2, 1, 0), _mm256_set1_pd(dx)));
  __m256d step = _mm256_set1_pd(4.0 * dx);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v = _mm256_loadu_pd(I + i);
    s0 = _mm256_add_pd(s0, v);
    __m256d vx = _mm256_mul_pd(v, x);
    s1 = _mm256_add_pd(s1, vx);
    s2 = _mm256_fmadd_pd(vx, x, s2);
    x = _mm256_add_pd(x, step);
  }
  double r0 = hsum(s0), r1 = hsum(s1), r2 = hsum(s2);
  for (; i < n; ++i) {
    double xi = x0 + static_cast<double>(i) * dx;
    r0 += I[i];
    r1 += I[i] * xi;
    r2 += I[i] * xi * xi;
  }
  *m0 = r0;
  *m1 = r1;
  *m2 = r2;
}

} // namespace

const Kernels* avx2_kernels() {
  static const Kernels k{sum_avx2,      dot_avx2,   dot3_avx2, sqrt_dot_avx2,
                         abs2_sum_avx2, cdotw_avx2, cmul_inplace_avx2,
                         caxpy_avx2,    moments_avx2};
  return &k;
}

#else

const Kernels* avx2_kernels() { return nullptr; }

#endif

} // namespace wgspdc::simd
