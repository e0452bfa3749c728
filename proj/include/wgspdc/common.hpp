#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace wgspdc {

using cdouble = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSpeedOfLight_um_per_s = 2.99792458e14; // vacuum c in um/s

// sinc convention used throughout: sin(x)/x, sinc(0) = 1.
inline double sinc(double x) {
  if (std::abs(x) < 1e-8) return 1.0 - x * x / 6.0;
  return std::sin(x) / x;
}

// |sinc|^2 falls to 1/2 at this argument (root of sin^2(x)/x^2 = 1/2).
inline constexpr double kSincHalfPowerArg = 1.391557378252;

struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NyquistError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CalibrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct PlanError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Worker cap shared by all parallel loops. 0 = hardware concurrency.
void set_thread_cap(unsigned n);
unsigned thread_cap();

// Fixed chunk-grid size used by the parallel loops. The decomposition depends
// only on the range, never on the worker count, so a reduction that stores a
// partial per chunk index and combines them in index order is reproducible at
// any thread cap.
inline constexpr std::size_t kParallelChunks = 64;

void parallel_chunks(std::size_t begin, std::size_t end, std::size_t nchunks,
                     const std::function<void(std::size_t chunk, std::size_t lo, std::size_t hi)>& body);

void parallel_for(std::size_t begin, std::size_t end,
                  const std::function<void(std::size_t, std::size_t)>& body);

// Uniform 2D grid, row-major with x fastest. y is the second (slow) axis.
struct GridSpec {
  int nx = 0, ny = 0;
  double x0 = 0, y0 = 0;   // coordinate of sample (0,0)
  double dx = 0, dy = 0;   // pitch
  double x(int i) const { return x0 + i * dx; }
  double y(int j) const { return y0 + j * dy; }
  bool operator==(const GridSpec&) const = default;
};

// Trapezoid weight along one axis of a uniform grid.
inline double trapezoid_weight(int i, int n, double pitch) {
  return (i == 0 || i == n - 1) ? 0.5 * pitch : pitch;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a over raw bytes; used for geometry hashing and cache keys.
inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

} // namespace wgspdc
