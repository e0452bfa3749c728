#pragma once

#include "wgspdc/common.hpp"

#include <array>
#include <functional>
#include <vector>

namespace wgspdc {

// --- box-constrained Levenberg-Marquardt ------------------------------------

struct LmOptions {
  int max_iterations = 200;
  double ftol = 1e-12;       // relative cost decrease
  double xtol = 1e-10;       // relative step size
  double fd_step = 1e-6;     // relative forward-difference step for the Jacobian
  double lambda0 = 1e-3;
};

struct LmResult {
  std::vector<double> params;
  std::vector<double> residuals;
  double cost = 0;           // 0.5 * sum r^2
  int iterations = 0;
  bool converged = false;
};

// Minimize 0.5*|r(p)|^2 subject to lo <= p <= hi. Bounds are enforced with the
// sin-transform p = lo + (hi-lo)*(sin(t)+1)/2, so the solver itself runs
// unconstrained. The residual callback sees the bounded parameters.
LmResult levenberg_marquardt(const std::function<std::vector<double>(const std::vector<double>&)>& residual,
                             std::vector<double> p0, const std::vector<double>& lo,
                             const std::vector<double>& hi, const LmOptions& opt = {});

// --- weighted least squares for w^2(z) = a + b z + c z^2 --------------------

struct QuadraticFit {
  double a = 0, b = 0, c = 0;
  // covariance of (a, b, c), row-major
  std::array<double, 9> cov{};
  double chi2 = 0;
  int dof = 0;
};

// weights = 1/sigma^2 per point; pass empty sigma for unweighted.
QuadraticFit fit_quadratic(const std::vector<double>& z, const std::vector<double>& y,
                           const std::vector<double>& sigma);

// --- dense Hermitian eigensolver (small matrices) ----------------------------

// Cyclic Jacobi on the real symmetric 2n x 2n embedding of a Hermitian matrix
// (row-major, a[i*n+j]). Eigenvalues ascending; eigenvectors returned
// column-wise in v (v[i*n+k] = component i of eigenvector k).
void eigh(const std::vector<cdouble>& a, int n, std::vector<double>& eigenvalues,
          std::vector<cdouble>& v);

} // namespace wgspdc
