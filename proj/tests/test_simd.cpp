#include <doctest.h>

#include "wgspdc/rng.hpp"
#include "wgspdc/simd_kernels.hpp"

#include <complex>
#include <vector>

using namespace wgspdc;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo = -1, double hi = 1) {
  std::vector<double> v(n);
  for (auto& x : v) x = lo + (hi - lo) * rng.uniform();
  return v;
}

std::vector<cdouble> random_cvec(Rng& rng, std::size_t n) {
  std::vector<cdouble> v(n);
  for (auto& x : v) x = {2 * rng.uniform() - 1, 2 * rng.uniform() - 1};
  return v;
}

} // namespace

TEST_CASE("scalar and avx2 kernels agree on random inputs") {
  if (!simd::avx2_available()) {
    MESSAGE("avx2 unavailable; skipping equivalence suite");
    return;
  }
  const auto& sc = simd::scalar();
  simd::select("avx2");
  const auto& vx = simd::active();

  Rng rng(20240817);
  // odd lengths exercise the tail paths
  for (std::size_t n : {1u, 3u, 4u, 7u, 64u, 129u, 1000u}) {
    auto a = random_vec(rng, n), b = random_vec(rng, n), w = random_vec(rng, n, 0.1, 2.0);
    auto pa = random_vec(rng, n, 0.0, 3.0), pb = random_vec(rng, n, 0.0, 3.0);
    auto ca = random_cvec(rng, n), cb = random_cvec(rng, n);

    CHECK(vx.sum(a.data(), n) == doctest::Approx(sc.sum(a.data(), n)).epsilon(1e-12));
    CHECK(vx.dot(a.data(), b.data(), n) == doctest::Approx(sc.dot(a.data(), b.data(), n)).epsilon(1e-12));
    CHECK(vx.dot3(w.data(), a.data(), b.data(), n) ==
          doctest::Approx(sc.dot3(w.data(), a.data(), b.data(), n)).epsilon(1e-12));
    CHECK(vx.sqrt_dot(pa.data(), pb.data(), n) ==
          doctest::Approx(sc.sqrt_dot(pa.data(), pb.data(), n)).epsilon(1e-12));
    CHECK(vx.abs2_sum(ca.data(), n) == doctest::Approx(sc.abs2_sum(ca.data(), n)).epsilon(1e-12));

    auto dv = vx.cdotw(ca.data(), cb.data(), w.data(), n);
    auto ds = sc.cdotw(ca.data(), cb.data(), w.data(), n);
    CHECK(dv.real() == doctest::Approx(ds.real()).epsilon(1e-12));
    CHECK(dv.imag() == doctest::Approx(ds.imag()).epsilon(1e-12));

    auto m1 = ca, m2 = ca;
    vx.cmul_inplace(m1.data(), cb.data(), n);
    sc.cmul_inplace(m2.data(), cb.data(), n);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(m1[i].real() == doctest::Approx(m2[i].real()).epsilon(1e-12));
      CHECK(m1[i].imag() == doctest::Approx(m2[i].imag()).epsilon(1e-12));
    }

    auto y1 = cb, y2 = cb;
    cdouble alpha{0.3, -1.7};
    vx.caxpy(y1.data(), alpha, ca.data(), n);
    sc.caxpy(y2.data(), alpha, ca.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(y1[i] - y2[i]) < 1e-12);

    double v0, v1, v2, s0, s1, s2;
    vx.moments(pa.data(), n, -3.2, 0.17, &v0, &v1, &v2);
    sc.moments(pa.data(), n, -3.2, 0.17, &s0, &s1, &s2);
    CHECK(v0 == doctest::Approx(s0).epsilon(1e-12));
    CHECK(v1 == doctest::Approx(s1).epsilon(1e-12));
    CHECK(v2 == doctest::Approx(s2).epsilon(1e-12));
  }
  simd::select("auto");
}

TEST_CASE("scalar kernels match naive formulas") {
  const auto& sc = simd::scalar();
  std::vector<double> a{1, 2, 3}, b{4, 5, 6}, w{1, 0.5, 2};
  CHECK(sc.sum(a.data(), 3) == 6);
  CHECK(sc.dot(a.data(), b.data(), 3) == 32);
  CHECK(sc.dot3(w.data(), a.data(), b.data(), 3) == doctest::Approx(4 + 5 + 36));
  std::vector<cdouble> ca{{1, 2}, {0, -1}}, cb{{3, -4}, {2, 2}};
  auto d = sc.cdotw(ca.data(), cb.data(), w.data(), 2);
  // w0*(1+2i)(3+4i) + w1*(-i)(2-2i) = (3-8) + i(4+6) + 0.5*((-2) + i(-2))
  CHECK(d.real() == doctest::Approx(-5 - 1));
  CHECK(d.imag() == doctest::Approx(10 - 1));
}

TEST_CASE("kernel selection honors explicit override") {
  simd::select("scalar");
  CHECK(simd::active_name() == "scalar");
  simd::select("auto");
  if (simd::avx2_available()) CHECK(simd::active_name() == "avx2");
}
