#include <doctest.h>

#include "wgspdc/fitting.hpp"
#include "wgspdc/rng.hpp"

#include <cmath>

using namespace wgspdc;

TEST_CASE("quadratic weighted least squares recovers exact coefficients") {
  std::vector<double> z, y, sig;
  for (int i = 0; i < 12; ++i) {
    double zi = -30 + 6.0 * i;
    z.push_back(zi);
    y.push_back(2500.0 + 0.8 * zi + 25.5 * zi * zi);
    sig.push_back(1.0 + 0.01 * i);
  }
  auto f = fit_quadratic(z, y, sig);
  CHECK(f.a == doctest::Approx(2500.0).epsilon(1e-9));
  CHECK(f.b == doctest::Approx(0.8).epsilon(1e-7));
  CHECK(f.c == doctest::Approx(25.5).epsilon(1e-9));
  CHECK(f.chi2 == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("quadratic fit covariance scales like 1/weight") {
  std::vector<double> z, y, s1, s2;
  Rng rng(7);
  for (int i = 0; i < 30; ++i) {
    double zi = -30 + 2.0 * i;
    z.push_back(zi);
    y.push_back(100 + zi * zi + rng.normal());
    s1.push_back(1.0);
    s2.push_back(2.0);
  }
  auto f1 = fit_quadratic(z, y, s1);
  auto f2 = fit_quadratic(z, y, s2);
  CHECK(f2.cov[0] == doctest::Approx(4.0 * f1.cov[0]).epsilon(1e-9));
  CHECK(f2.cov[8] == doctest::Approx(4.0 * f1.cov[8]).epsilon(1e-9));
}

TEST_CASE("bounded levenberg-marquardt round-trips synthetic parameters") {
  // residuals built from a known parameter triple; recovery within 0.1%
  const double truth[3] = {2.4, 0.031, 0.044};
  auto residual = [&](const std::vector<double>& p) {
    std::vector<double> r(4);
    r[0] = 10.0 * (std::sin(3.0 / p[0]) - std::sin(3.0 / truth[0]));
    r[1] = 50.0 * (std::sqrt(p[1]) - std::sqrt(truth[1]));
    r[2] = 50.0 * (p[2] * p[2] - truth[2] * truth[2]);
    r[3] = 5.0 * ((p[1] + p[2]) - (truth[1] + truth[2]));
    return r;
  };
  auto res = levenberg_marquardt(residual, {2.0, 0.02, 0.02}, {1.0, 1e-3, 1e-3},
                                 {500.0, 5e-2, 5e-2});
  REQUIRE(res.params.size() == 3);
  CHECK(std::abs(res.params[0] - truth[0]) / truth[0] < 1e-3);
  CHECK(std::abs(res.params[1] - truth[1]) / truth[1] < 1e-3);
  CHECK(std::abs(res.params[2] - truth[2]) / truth[2] < 1e-3);
  CHECK(res.cost < 1e-10);
}

TEST_CASE("levenberg-marquardt respects box bounds") {
  // unconstrained optimum at p = 5, bound caps it at 2
  auto residual = [](const std::vector<double>& p) { return std::vector<double>{p[0] - 5.0}; };
  auto res = levenberg_marquardt(residual, {1.0}, {0.5}, {2.0});
  CHECK(res.params[0] <= 2.0 + 1e-12);
  CHECK(res.params[0] == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("hermitian eigensolver on a known 2x2") {
  // [[2, i], [-i, 2]] has eigenvalues 1 and 3
  std::vector<cdouble> a{{2, 0}, {0, 1}, {0, -1}, {2, 0}};
  std::vector<double> w;
  std::vector<cdouble> v;
  eigh(a, 2, w, v);
  REQUIRE(w.size() == 2);
  CHECK(w[0] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(w[1] == doctest::Approx(3.0).epsilon(1e-10));
  // residual |A v - w v|
  for (int k = 0; k < 2; ++k) {
    cdouble r0 = a[0] * v[0 * 2 + k] + a[1] * v[1 * 2 + k] - w[k] * v[0 * 2 + k];
    cdouble r1 = a[2] * v[0 * 2 + k] + a[3] * v[1 * 2 + k] - w[k] * v[1 * 2 + k];
    CHECK(std::abs(r0) < 1e-10);
    CHECK(std::abs(r1) < 1e-10);
  }
}

TEST_CASE("hermitian eigensolver handles degenerate spectra") {
  // identity: all eigenvalues 1, eigenvectors orthonormal
  const int n = 4;
  std::vector<cdouble> a(n * n, cdouble{0, 0});
  for (int i = 0; i < n; ++i) a[i * n + i] = 1.0;
  std::vector<double> w;
  std::vector<cdouble> v;
  eigh(a, n, w, v);
  for (int k = 0; k < n; ++k) CHECK(w[k] == doctest::Approx(1.0).epsilon(1e-10));
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l) {
      cdouble dot{0, 0};
      for (int i = 0; i < n; ++i) dot += std::conj(v[i * n + k]) * v[i * n + l];
      CHECK(std::abs(dot - (k == l ? 1.0 : 0.0)) < 1e-9);
    }
}

TEST_CASE("random hermitian eigendecomposition reconstructs the matrix") {
  Rng rng(99);
  const int n = 6;
  std::vector<cdouble> a(n * n);
  for (int i = 0; i < n; ++i) {
    a[i * n + i] = {2 * rng.uniform() - 1, 0};
    for (int j = i + 1; j < n; ++j) {
      cdouble x{2 * rng.uniform() - 1, 2 * rng.uniform() - 1};
      a[i * n + j] = x;
      a[j * n + i] = std::conj(x);
    }
  }
  std::vector<double> w;
  std::vector<cdouble> v;
  eigh(a, n, w, v);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      cdouble s{0, 0};
      for (int k = 0; k < n; ++k) s += v[i * n + k] * w[k] * std::conj(v[j * n + k]);
      CHECK(std::abs(s - a[i * n + j]) < 1e-8);
    }
}
