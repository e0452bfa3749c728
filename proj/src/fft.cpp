#include "wgspdc/fft.hpp"

#include <cmath>
#include <stdexcept>

namespace wgspdc {

namespace {

bool is_pow2(std::size_t n) { return n && (n & (n - 1)) == 0; }

} // namespace

void fft_inplace(cdouble* a, std::size_t n, bool inverse) {
  if (!is_pow2(n)) throw std::invalid_argument("fft: length must be a power of two");
  // bit reversal
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    double ang = 2.0 * kPi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    cdouble wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      cdouble w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        cdouble u = a[i + k];
        cdouble v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

void fft2_inplace(cdouble* data, int nx, int ny, bool inverse) {
  parallel_for(0, ny, [&](std::size_t j0, std::size_t j1) {
    for (std::size_t j = j0; j < j1; ++j)
      fft_inplace(data + j * static_cast<std::size_t>(nx), nx, inverse);
  });
  // columns via transpose-free strided gather per column block
  parallel_for(0, nx, [&](std::size_t i0, std::size_t i1) {
    std::vector<cdouble> col(ny);
    for (std::size_t i = i0; i < i1; ++i) {
      for (int j = 0; j < ny; ++j) col[j] = data[static_cast<std::size_t>(j) * nx + i];
      fft_inplace(col.data(), ny, inverse);
      for (int j = 0; j < ny; ++j) data[static_cast<std::size_t>(j) * nx + i] = col[j];
    }
  });
  if (inverse) {
    double scale = 1.0 / (static_cast<double>(nx) * ny);
    std::size_t total = static_cast<std::size_t>(nx) * ny;
    for (std::size_t q = 0; q < total; ++q) data[q] *= scale;
  }
}

double fft_freq(int k, int n, double pitch) {
  int kk = k < n / 2 ? k : k - n;
  return static_cast<double>(kk) / (static_cast<double>(n) * pitch);
}

} // namespace wgspdc
