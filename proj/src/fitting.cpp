#include "wgspdc/fitting.hpp"

#include <cmath>
#include <stdexcept>

namespace wgspdc {

namespace {

// Solve A x = b for small dense symmetric positive definite A (n<=8 here)
// via Cholesky with a simple diagonal fallback.
bool solve_spd(std::vector<double> A, std::vector<double> b, int n, std::vector<double>& x) {
  std::vector<double> L(n * n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = A[i * n + j];
      for (int k = 0; k < j; ++k) s -= L[i * n + k] * L[j * n + k];
      if (i == j) {
        if (s <= 0) return false;
        L[i * n + i] = std::sqrt(s);
      } else {
        L[i * n + j] = s / L[j * n + j];
      }
    }
  }
  x.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double s = b[i];
    for (int k = 0; k < i; ++k) s -= L[i * n + k] * x[k];
    x[i] = s / L[i * n + i];
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = x[i];
    for (int k = i + 1; k < n; ++k) s -= L[k * n + i] * x[k];
    x[i] = s / L[i * n + i];
  }
  return true;
}

// Inverse of a small symmetric matrix via Cholesky column solves.
bool invert_spd(const std::vector<double>& A, int n, std::vector<double>& inv) {
  inv.assign(n * n, 0.0);
  for (int c = 0; c < n; ++c) {
    std::vector<double> e(n, 0.0), x;
    e[c] = 1.0;
    if (!solve_spd(A, e, n, x)) return false;
    for (int r = 0; r < n; ++r) inv[r * n + c] = x[r];
  }
  return true;
}

double cost_of(const std::vector<double>& r) {
  double c = 0;
  for (double v : r) c += v * v;
  return 0.5 * c;
}

} // namespace

LmResult levenberg_marquardt(const std::function<std::vector<double>(const std::vector<double>&)>& residual,
                             std::vector<double> p0, const std::vector<double>& lo,
                             const std::vector<double>& hi, const LmOptions& opt) {
  const int np = static_cast<int>(p0.size());
  if (lo.size() != p0.size() || hi.size() != p0.size())
    throw std::invalid_argument("levenberg_marquardt: bounds size mismatch");
  for (int i = 0; i < np; ++i) {
    if (!(hi[i] > lo[i])) throw std::invalid_argument("levenberg_marquardt: empty bound interval");
    if (p0[i] < lo[i]) p0[i] = lo[i];
    if (p0[i] > hi[i]) p0[i] = hi[i];
  }

  auto to_bounded = [&](const std::vector<double>& t) {
    std::vector<double> p(np);
    for (int i = 0; i < np; ++i) p[i] = lo[i] + (hi[i] - lo[i]) * 0.5 * (std::sin(t[i]) + 1.0);
    return p;
  };
  std::vector<double> t(np);
  for (int i = 0; i < np; ++i) {
    double u = 2.0 * (p0[i] - lo[i]) / (hi[i] - lo[i]) - 1.0;
    u = std::clamp(u, -1.0 + 1e-12, 1.0 - 1e-12);
    t[i] = std::asin(u);
  }

  std::vector<double> r = residual(to_bounded(t));
  const int nr = static_cast<int>(r.size());
  double cost = cost_of(r);
  double lambda = opt.lambda0;

  LmResult out;
  out.iterations = 0;

  for (int iter = 0; iter < opt.max_iterations; ++iter) {
    out.iterations = iter + 1;
    // forward-difference Jacobian wrt. t
    std::vector<double> J(nr * np);
    for (int j = 0; j < np; ++j) {
      double h = opt.fd_step * std::max(1.0, std::abs(t[j]));
      std::vector<double> tj = t;
      tj[j] += h;
      std::vector<double> rj = residual(to_bounded(tj));
      for (int i = 0; i < nr; ++i) J[i * np + j] = (rj[i] - r[i]) / h;
    }
    // normal equations
    std::vector<double> JtJ(np * np, 0.0), Jtr(np, 0.0);
    for (int i = 0; i < nr; ++i)
      for (int a = 0; a < np; ++a) {
        Jtr[a] += J[i * np + a] * r[i];
        for (int b = 0; b <= a; ++b) JtJ[a * np + b] += J[i * np + a] * J[i * np + b];
      }
    for (int a = 0; a < np; ++a)
      for (int b = a + 1; b < np; ++b) JtJ[a * np + b] = JtJ[b * np + a];

    bool stepped = false;
    for (int tries = 0; tries < 30 && !stepped; ++tries) {
      std::vector<double> A = JtJ;
      for (int a = 0; a < np; ++a) A[a * np + a] += lambda * std::max(JtJ[a * np + a], 1e-12);
      std::vector<double> negg(np), dt;
      for (int a = 0; a < np; ++a) negg[a] = -Jtr[a];
      if (!solve_spd(A, negg, np, dt)) {
        lambda *= 10;
        continue;
      }
      std::vector<double> tn(np);
      double step2 = 0, t2 = 0;
      for (int a = 0; a < np; ++a) {
        tn[a] = t[a] + dt[a];
        step2 += dt[a] * dt[a];
        t2 += t[a] * t[a];
      }
      std::vector<double> rn = residual(to_bounded(tn));
      double cn = cost_of(rn);
      if (cn < cost) {
        double drop = (cost - cn) / std::max(cost, 1e-300);
        t = tn;
        r = rn;
        cost = cn;
        lambda = std::max(lambda * 0.3, 1e-12);
        stepped = true;
        if (drop < opt.ftol || step2 < opt.xtol * opt.xtol * (t2 + opt.xtol)) {
          out.converged = true;
          iter = opt.max_iterations;
        }
      } else {
        lambda *= 10;
      }
    }
    if (!stepped) {
      out.converged = true; // no further descent possible
      break;
    }
  }

  out.params = to_bounded(t);
  out.residuals = r;
  out.cost = cost;
  return out;
}

QuadraticFit fit_quadratic(const std::vector<double>& z, const std::vector<double>& y,
                           const std::vector<double>& sigma) {
  const int n = static_cast<int>(z.size());
  if (y.size() != z.size() || n < 3)
    throw std::invalid_argument("fit_quadratic: need >= 3 points and matching sizes");
  bool weighted = !sigma.empty();
  if (weighted && sigma.size() != z.size())
    throw std::invalid_argument("fit_quadratic: sigma size mismatch");

  // Shift z to its mean for conditioning, fit, then transform back.
  double zm = 0;
  for (double v : z) zm += v;
  zm /= n;

  std::vector<double> A(9, 0.0), rhs(3, 0.0);
  for (int i = 0; i < n; ++i) {
    double w = 1.0;
    if (weighted) {
      if (!(sigma[i] > 0)) throw std::invalid_argument("fit_quadratic: nonpositive sigma");
      w = 1.0 / (sigma[i] * sigma[i]);
    }
    double u = z[i] - zm;
    double basis[3] = {1.0, u, u * u};
    for (int a = 0; a < 3; ++a) {
      rhs[a] += w * basis[a] * y[i];
      for (int b = 0; b < 3; ++b) A[a * 3 + b] += w * basis[a] * basis[b];
    }
  }
  std::vector<double> p, cov;
  if (!solve_spd(A, rhs, 3, p) || !invert_spd(A, 3, cov))
    throw SolverError("fit_quadratic: singular normal equations");

  QuadraticFit f;
  // back-transform: y = p0 + p1 u + p2 u^2, u = z - zm
  f.a = p[0] - p[1] * zm + p[2] * zm * zm;
  f.b = p[1] - 2.0 * p[2] * zm;
  f.c = p[2];
  // covariance via the linear map M: (a,b,c) = M (p0,p1,p2)
  double M[9] = {1, -zm, zm * zm, 0, 1, -2 * zm, 0, 0, 1};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0;
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) s += M[i * 3 + k] * cov[k * 3 + l] * M[j * 3 + l];
      f.cov[i * 3 + j] = s;
    }
  for (int i = 0; i < n; ++i) {
    double u = z[i] - zm;
    double model = p[0] + p[1] * u + p[2] * u * u;
    double w = weighted ? 1.0 / (sigma[i] * sigma[i]) : 1.0;
    f.chi2 += w * (y[i] - model) * (y[i] - model);
  }
  f.dof = n - 3;
  return f;
}

void eigh(const std::vector<cdouble>& a, int n, std::vector<double>& eigenvalues,
          std::vector<cdouble>& v) {
  if (static_cast<int>(a.size()) != n * n) throw std::invalid_argument("eigh: size mismatch");
  // Real symmetric embedding: [[Re, -Im], [Im, Re]], eigenvalues doubled.
  const int m = 2 * n;
  std::vector<double> S(m * m, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double re = 0.5 * (a[i * n + j].real() + a[j * n + i].real());
      double im = 0.5 * (a[i * n + j].imag() - a[j * n + i].imag());
      S[i * m + j] = re;
      S[(i + n) * m + (j + n)] = re;
      S[i * m + (j + n)] = -im;
      S[(i + n) * m + j] = im;
    }
  std::vector<double> V(m * m, 0.0);
  for (int i = 0; i < m; ++i) V[i * m + i] = 1.0;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (int p = 0; p < m; ++p)
      for (int q = p + 1; q < m; ++q) off += S[p * m + q] * S[p * m + q];
    if (off < 1e-26) break;
    for (int p = 0; p < m; ++p)
      for (int q = p + 1; q < m; ++q) {
        double apq = S[p * m + q];
        if (std::abs(apq) < 1e-300) continue;
        double theta = (S[q * m + q] - S[p * m + p]) / (2 * apq);
        double tt = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        double c = 1.0 / std::sqrt(tt * tt + 1), s = tt * c;
        for (int k = 0; k < m; ++k) {
          double skp = S[k * m + p], skq = S[k * m + q];
          S[k * m + p] = c * skp - s * skq;
          S[k * m + q] = s * skp + c * skq;
        }
        for (int k = 0; k < m; ++k) {
          double spk = S[p * m + k], sqk = S[q * m + k];
          S[p * m + k] = c * spk - s * sqk;
          S[q * m + k] = s * spk + c * sqk;
        }
        for (int k = 0; k < m; ++k) {
          double vkp = V[k * m + p], vkq = V[k * m + q];
          V[k * m + p] = c * vkp - s * vkq;
          V[k * m + q] = s * vkp + c * vkq;
        }
      }
  }

  // Each complex eigenpair appears twice in the embedding ((x,y) and the
  // i-rotated partner (-y,x) map to parallel complex vectors x+iy). Walk the
  // sorted columns, reconstruct z = x+iy, and keep it only if it still has
  // weight after Gram-Schmidt against everything kept so far.
  std::vector<int> order(m);
  for (int i = 0; i < m; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int i, int j) { return S[i * m + i] < S[j * m + j]; });

  eigenvalues.assign(n, 0.0);
  v.assign(n * n, cdouble{0, 0});
  int out = 0;
  for (int idx = 0; idx < m && out < n; ++idx) {
    int col = order[idx];
    std::vector<cdouble> vec(n);
    for (int i = 0; i < n; ++i) vec[i] = {V[i * m + col], V[(i + n) * m + col]};
    for (int k = 0; k < out; ++k) {
      cdouble proj{0, 0};
      for (int i = 0; i < n; ++i) proj += std::conj(v[i * n + k]) * vec[i];
      for (int i = 0; i < n; ++i) vec[i] -= proj * v[i * n + k];
    }
    double norm = 0;
    for (int i = 0; i < n; ++i) norm += std::norm(vec[i]);
    norm = std::sqrt(norm);
    if (norm < 1e-6) continue; // i-rotated duplicate of a kept vector
    eigenvalues[out] = S[col * m + col];
    for (int i = 0; i < n; ++i) v[i * n + out] = vec[i] / norm;
    ++out;
  }
}

} // namespace wgspdc
