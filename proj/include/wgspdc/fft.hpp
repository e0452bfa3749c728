#pragma once

#include "wgspdc/common.hpp"

#include <vector>

namespace wgspdc {

// In-place iterative radix-2 complex FFT; n must be a power of two.
void fft_inplace(cdouble* data, std::size_t n, bool inverse);

// 2D transform of a row-major nx*ny array (rows, then columns). The inverse
// includes the 1/(nx*ny) normalization so that ifft2(fft2(x)) == x.
void fft2_inplace(cdouble* data, int nx, int ny, bool inverse);

// FFT sample frequency in cycles per unit length for bin k of n samples of
// pitch d (standard wrap-around ordering).
double fft_freq(int k, int n, double pitch);

} // namespace wgspdc
