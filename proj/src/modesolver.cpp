#include "wgspdc/modesolver.hpp"
#include "wgspdc/simd_kernels.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>
#include <unordered_map>

namespace wgspdc {

std::string pol_name(Pol p) {
  switch (p) {
    case Pol::H: return "H";
    case Pol::V: return "V";
    case Pol::P: return "P";
  }
  return "?";
}

Pol pol_from_name(const std::string& s) {
  if (s == "H" || s == "h") return Pol::H;
  if (s == "V" || s == "v") return Pol::V;
  if (s == "P" || s == "p") return Pol::P;
  throw std::invalid_argument("unknown polarization: " + s);
}

void WaveguideGeometry::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0)) {
      std::ostringstream os;
      os << "geometry." << name << " must be > 0, got " << v;
      throw std::invalid_argument(os.str());
    }
  };
  positive(width_um, "width_um");
  positive(depth_um, "depth_um");
  positive(length_mm, "length_mm");
  positive(poling_period_um, "poling_period_um");
  positive(delta_n_h, "delta_n_h");
  positive(delta_n_v, "delta_n_v");
  positive(lateral_grading_um, "lateral_grading_um");
  if (!(cover_index >= 1.0))
    throw std::invalid_argument("geometry.cover_index must be >= 1");
  for (const std::string* a : {&axis_h, &axis_v, &axis_p})
    if (*a != "x" && *a != "y" && *a != "z")
      throw std::invalid_argument("geometry axis mapping must name x, y or z, got " + *a);
  if (axis_p != axis_h && axis_p != axis_v)
    throw std::invalid_argument("geometry.axis_p must share an axis with H or V so its index increase is defined");
}

std::uint64_t WaveguideGeometry::hash() const {
  // covers the mode-determining fields only: poling period and crystal length
  // never enter the mode solve, so cached modes stay valid across them
  double nums[7] = {width_um,    depth_um,           delta_n_h,
                    delta_n_v,   cover_index,        lateral_grading_um,
                    static_cast<double>(lateral_shape == LateralShape::Step ? 0 : 1)};
  std::uint64_t h = fnv1a(nums, sizeof nums);
  h = fnv1a(axis_h.data(), axis_h.size(), h);
  h = fnv1a(axis_v.data(), axis_v.size(), h);
  h = fnv1a(axis_p.data(), axis_p.size(), h);
  return h;
}

const std::string& WaveguideGeometry::axis_for(Pol p) const {
  switch (p) {
    case Pol::H: return axis_h;
    case Pol::V: return axis_v;
    case Pol::P: return axis_p;
  }
  return axis_h;
}

double WaveguideGeometry::delta_n_for(Pol p) const {
  switch (p) {
    case Pol::H: return delta_n_h;
    case Pol::V: return delta_n_v;
    case Pol::P: return axis_p == axis_h ? delta_n_h : delta_n_v;
  }
  return delta_n_h;
}

double Grid2D::trapezoid_integral() const {
  double s = 0;
  for (int iy = 0; iy < spec.ny; ++iy) {
    double wy = trapezoid_weight(iy, spec.ny, spec.dy);
    double row = 0;
    for (int ix = 0; ix < spec.nx; ++ix) row += trapezoid_weight(ix, spec.nx, spec.dx) * at(ix, iy);
    s += wy * row;
  }
  return s;
}

void Grid2D::normalize_trapezoid() {
  double s = trapezoid_integral();
  if (!(s > 0)) throw std::domain_error("normalize_trapezoid: nonpositive integral");
  for (double& x : v) x /= s;
}

namespace {

// ---------------------------------------------------------------------------
// 1D shooting machinery
// ---------------------------------------------------------------------------

// RK4 integration of u'' = (beta^2 - k0^2 eps(y)) u from coord.back() down to
// coord.front(), counting sign changes. Returns the surface match
// u'(end) - slope_target * u(end), renormalized to unit scale (positive
// factors only, so root locations are preserved).
struct ShootResult {
  double match = 0;
  int sign_changes = 0;
};

template <class Eps>
ShootResult shoot_down(const std::vector<double>& coord, const Eps& eps, double beta2, double k02,
                       double start_decay, double slope_target, std::vector<double>* store = nullptr) {
  const std::size_t n = coord.size();
  double u = 1.0, v = -start_decay; // du/dy at the deep end of a decaying tail
  if (store) {
    store->assign(n, 0.0);
    store->back() = u;
  }
  auto G = [&](double y) { return beta2 - k02 * eps(y); };
  int flips = 0;
  double prev_sign = 1.0;
  for (std::size_t k = n - 1; k > 0; --k) {
    double y1 = coord[k], y0 = coord[k - 1];
    double h = y0 - y1; // negative
    double g1 = G(y1), gm = G(0.5 * (y0 + y1)), g0 = G(y0);
    // RK4 for (u, v)
    double k1u = v, k1v = g1 * u;
    double k2u = v + 0.5 * h * k1v, k2v = gm * (u + 0.5 * h * k1u);
    double k3u = v + 0.5 * h * k2v, k3v = gm * (u + 0.5 * h * k2u);
    double k4u = v + h * k3v, k4v = g0 * (u + h * k3u);
    u += h / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u);
    v += h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v);
    double mag = std::max(std::abs(u), std::abs(v));
    if (mag > 1e100) {
      u /= mag;
      v /= mag;
      if (store)
        for (std::size_t q = k; q < n; ++q) (*store)[q] /= mag;
    }
    if (store) (*store)[k - 1] = u;
    double s = u > 0 ? 1.0 : (u < 0 ? -1.0 : prev_sign);
    if (s * prev_sign < 0) ++flips;
    prev_sign = s;
  }
  return {v - slope_target * u, flips};
}

// Safeguarded secant refinement inside a sign-change bracket.
template <class F>
double refine_root(const F& f, double a, double b, double fa, double fb, double tol) {
  for (int it = 0; it < 200; ++it) {
    if (std::abs(b - a) < tol) break;
    double m;
    double denom = fb - fa;
    if (std::abs(denom) > 1e-300) {
      m = b - fb * (b - a) / denom;
      // fall back to bisection when secant leaves the bracket
      if (!(m > std::min(a, b) && m < std::max(a, b))) m = 0.5 * (a + b);
    } else {
      m = 0.5 * (a + b);
    }
    double fm = f(m);
    if (fm == 0.0) return m;
    if (fa * fm < 0) {
      b = m;
      fb = fm;
    } else {
      a = m;
      fa = fm;
    }
  }
  return 0.5 * (a + b);
}

std::vector<double> make_depth_coords(double depth_um, double tail_factor, double h) {
  // denser near the surface, 4x coarser in the deep tail
  std::vector<double> c;
  double y_split = 3.0 * depth_um;
  double y_end = tail_factor * depth_um;
  for (double y = 0.0; y < y_split; y += h) c.push_back(y);
  for (double y = y_split; y <= y_end + 1e-12; y += 4.0 * h) c.push_back(y);
  return c;
}

struct DepthEps {
  double nsub2, Q, d;
  double operator()(double y) const { return nsub2 + Q * std::exp(-y / d); }
};

struct RootAtStep {
  double n_eff;
  int nodes;
};

// All shooting roots for one grid resolution, top of the well downward.
template <class Eps>
std::vector<RootAtStep> scan_roots(const std::vector<double>& coord, const Eps& eps, double k0,
                                   double n_lo, double n_hi, int scan_points, double n_cover,
                                   double n_sub_for_decay) {
  auto match = [&](double ne) {
    double beta2 = ne * ne * k0 * k0;
    double gamma = k0 * std::sqrt(std::max(ne * ne - n_sub_for_decay * n_sub_for_decay, 1e-18));
    double kap = k0 * std::sqrt(std::max(ne * ne - n_cover * n_cover, 0.0));
    return shoot_down(coord, eps, beta2, k0 * k0, gamma, kap);
  };
  std::vector<RootAtStep> roots;
  double prev_x = n_hi;
  ShootResult prev = match(prev_x);
  for (int s = 1; s <= scan_points; ++s) {
    double x = n_hi + (n_lo - n_hi) * static_cast<double>(s) / scan_points;
    ShootResult cur = match(x);
    if (prev.match * cur.match < 0) {
      auto f = [&](double ne) { return match(ne).match; };
      double r = refine_root(f, prev_x, x, prev.match, cur.match, 1e-14);
      roots.push_back({r, match(r).sign_changes});
    }
    prev = cur;
    prev_x = x;
  }
  return roots;
}

} // namespace

std::vector<SlabMode> solve_depth_slab(double n_sub, double delta_n, double depth_um,
                                       double n_cover, double lambda_um, const SlabOptions& opt) {
  if (!(delta_n > 0)) throw std::invalid_argument("solve_depth_slab: delta_n must be > 0");
  if (!(n_cover < n_sub)) throw std::invalid_argument("solve_depth_slab: cover index must be below substrate");
  const double k0 = 2.0 * kPi / lambda_um;
  const double n_surf = n_sub + delta_n;
  DepthEps eps{n_sub * n_sub, n_surf * n_surf - n_sub * n_sub, depth_um};

  double kappa_max = k0 * std::sqrt(eps.Q);
  double h = opt.step_um > 0 ? opt.step_um
                             : std::min(depth_um / 40.0, 2.0 * kPi / kappa_max / 30.0);

  const double n_lo = n_sub + opt.min_confinement;
  const double n_hi = n_surf - 1e-9;
  if (!(n_hi > n_lo)) return {};

  auto coords_h = make_depth_coords(depth_um, opt.tail_factor, h);
  auto coords_h2 = make_depth_coords(depth_um, opt.tail_factor, 0.5 * h);

  auto roots_h = scan_roots(coords_h, eps, k0, n_lo, n_hi, opt.scan_points, n_cover, n_sub);
  auto roots_h2 = scan_roots(coords_h2, eps, k0, n_lo, n_hi, opt.scan_points, n_cover, n_sub);

  // Pair roots by node count and Richardson-extrapolate (RK4: order 4).
  std::vector<SlabMode> out;
  for (const auto& rf : roots_h2) {
    double n_eff = rf.n_eff;
    for (const auto& rc : roots_h)
      if (rc.nodes == rf.nodes) {
        n_eff = rf.n_eff + (rf.n_eff - rc.n_eff) / 15.0;
        break;
      }
    SlabMode m;
    m.n_eff = n_eff;
    m.nodes = rf.nodes;

    // store the profile on the fine grid plus an analytic cover tail
    double beta2 = n_eff * n_eff * k0 * k0;
    double gamma = k0 * std::sqrt(std::max(n_eff * n_eff - n_sub * n_sub, 1e-18));
    double kap = k0 * std::sqrt(std::max(n_eff * n_eff - n_cover * n_cover, 0.0));
    std::vector<double> u;
    shoot_down(coords_h2, eps, beta2, k0 * k0, gamma, kap, &u);
    double u0 = u.front();
    double cover_extent = std::min(2.0, 8.0 / std::max(kap, 1e-6));
    int n_cover_pts = 32;
    m.coord.reserve(coords_h2.size() + n_cover_pts);
    m.amp.reserve(coords_h2.size() + n_cover_pts);
    for (int q = n_cover_pts; q >= 1; --q) {
      double y = -cover_extent * q / n_cover_pts;
      m.coord.push_back(y);
      m.amp.push_back(u0 * std::exp(kap * y));
    }
    for (std::size_t q = 0; q < coords_h2.size(); ++q) {
      m.coord.push_back(coords_h2[q]);
      m.amp.push_back(u[q]);
    }
    // unit trapezoid norm of amp^2 on the stored (nonuniform) samples
    double norm = 0;
    for (std::size_t q = 0; q + 1 < m.coord.size(); ++q)
      norm += 0.5 * (m.amp[q] * m.amp[q] + m.amp[q + 1] * m.amp[q + 1]) * (m.coord[q + 1] - m.coord[q]);
    double scale = 1.0 / std::sqrt(norm);
    if (m.amp[m.coord.size() / 4] < 0) scale = -scale; // fix overall sign: main lobe positive
    for (double& a : m.amp) a *= scale;
    out.push_back(std::move(m));
  }

  std::sort(out.begin(), out.end(), [](const SlabMode& a, const SlabMode& b) { return a.n_eff > b.n_eff; });
  // keep the contiguous 0,1,2,... node sequence; a gap means a lost root near cutoff
  std::vector<SlabMode> seq;
  for (auto& m : out) {
    if (m.nodes != static_cast<int>(seq.size())) break;
    seq.push_back(std::move(m));
  }
  return seq;
}

std::vector<SlabMode> solve_lateral_slab(double n_core_eff, double n_clad_eff, double width_um,
                                         double lambda_um, LateralShape shape, double grading_um,
                                         const SlabOptions& opt) {
  if (n_core_eff < n_clad_eff)
    throw std::invalid_argument("solve_lateral_slab: core effective index below cladding");
  const double k0 = 2.0 * kPi / lambda_um;
  if (n_core_eff - n_clad_eff < 1e-12) return {};

  std::vector<SlabMode> out;

  if (shape == LateralShape::Step) {
    const double kmax = k0 * std::sqrt(n_core_eff * n_core_eff - n_clad_eff * n_clad_eff);
    for (int i = 0;; ++i) {
      if (kmax * width_um <= i * kPi) break;
      auto g = [&](double ne) {
        double kap = k0 * std::sqrt(std::max(n_core_eff * n_core_eff - ne * ne, 0.0));
        double gam = k0 * std::sqrt(std::max(ne * ne - n_clad_eff * n_clad_eff, 0.0));
        return kap * width_um - i * kPi - 2.0 * std::atan2(gam, kap);
      };
      double a = n_clad_eff + 1e-13, b = n_core_eff - 1e-13;
      double fa = g(a), fb = g(b);
      if (fa * fb >= 0) break;
      double ne = refine_root(g, a, b, fa, fb, 1e-15);
      SlabMode m;
      m.n_eff = ne;
      m.nodes = i;
      double kap = k0 * std::sqrt(std::max(n_core_eff * n_core_eff - ne * ne, 0.0));
      double gam = k0 * std::sqrt(std::max(ne * ne - n_clad_eff * n_clad_eff, 0.0));
      double tail = std::min(6.0 * width_um, width_um / 2 + 14.0 / std::max(gam, 1e-6));
      int npts = 1025; // odd so x = 0 is a sample and parity is exact on the grid
      m.coord.resize(npts);
      m.amp.resize(npts);
      bool even = (i % 2) == 0;
      double edge = even ? std::cos(kap * width_um / 2) : std::sin(kap * width_um / 2);
      for (int q = 0; q < npts; ++q) {
        double x = -tail + 2.0 * tail * q / (npts - 1);
        double val;
        if (std::abs(x) <= width_um / 2) {
          val = even ? std::cos(kap * x) : std::sin(kap * x);
        } else {
          double decay = std::exp(-gam * (std::abs(x) - width_um / 2));
          val = (even ? edge : (x > 0 ? edge : -edge)) * decay;
        }
        m.coord[q] = x;
        m.amp[q] = val;
      }
      double norm = 0;
      for (int q = 0; q + 1 < npts; ++q)
        norm += 0.5 * (m.amp[q] * m.amp[q] + m.amp[q + 1] * m.amp[q + 1]) * (m.coord[q + 1] - m.coord[q]);
      for (double& v : m.amp) v /= std::sqrt(norm);
      out.push_back(std::move(m));
    }
    return out; // already descending in n_eff by branch index
  }

  // graded (erf) option: symmetric-profile shooting on the half axis
  struct GradedEps {
    double nc2, dq, w2, s;
    double operator()(double x) const {
      double t = 0.5 * (std::erf((w2 - x) / s) + std::erf((w2 + x) / s));
      return nc2 + dq * t;
    }
  };
  GradedEps eps{n_clad_eff * n_clad_eff,
                n_core_eff * n_core_eff - n_clad_eff * n_clad_eff, width_um / 2, grading_um};
  double kappa_max = k0 * std::sqrt(eps.dq);
  double h = opt.step_um > 0 ? opt.step_um
                             : std::min(width_um / 60.0, 2.0 * kPi / kappa_max / 30.0);
  double X = width_um / 2 + std::max(4.0 * width_um, 10.0 / (k0 * std::sqrt(2 * n_clad_eff * 1e-4)));
  X = std::min(X, 40.0 * width_um);
  std::vector<double> coord;
  for (double x = 0.0; x <= X; x += h) coord.push_back(x);

  for (int parity = 0; parity < 2; ++parity) {
    // parity 0: even (u'(0) = 0), parity 1: odd (u(0) = 0)
    auto match = [&](double ne) {
      double beta2 = ne * ne * k0 * k0;
      double gamma = k0 * std::sqrt(std::max(ne * ne - n_clad_eff * n_clad_eff, 1e-18));
      std::vector<double> u;
      ShootResult r = shoot_down(coord, eps, beta2, k0 * k0, gamma, 0.0, &u);
      // shoot_down's match is u'(0) - 0*u(0) = u'(0); for odd parity use u(0)
      return parity == 0 ? std::make_pair(r.match, r.sign_changes)
                         : std::make_pair(u.front(), r.sign_changes);
    };
    double n_lo = n_clad_eff + opt.min_confinement, n_hi = n_core_eff - 1e-9;
    if (!(n_hi > n_lo)) continue;
    double prev_x = n_hi;
    double prev_f = match(prev_x).first;
    for (int s = 1; s <= opt.scan_points; ++s) {
      double x = n_hi + (n_lo - n_hi) * s / opt.scan_points;
      double fx = match(x).first;
      if (prev_f * fx < 0) {
        auto f = [&](double ne) { return match(ne).first; };
        double ne = refine_root(f, prev_x, x, prev_f, fx, 1e-14);
        SlabMode m;
        m.n_eff = ne;
        int half_cross = match(ne).second;
        m.nodes = parity == 0 ? 2 * half_cross : 2 * half_cross + 1;
        // mirror the half-axis solution
        double beta2 = ne * ne * k0 * k0;
        double gamma = k0 * std::sqrt(std::max(ne * ne - n_clad_eff * n_clad_eff, 1e-18));
        std::vector<double> u;
        shoot_down(coord, eps, beta2, k0 * k0, gamma, 0.0, &u);
        std::size_t np = coord.size();
        m.coord.resize(2 * np - 1);
        m.amp.resize(2 * np - 1);
        for (std::size_t q = 0; q < np; ++q) {
          m.coord[np - 1 + q] = coord[q];
          m.coord[np - 1 - q] = -coord[q];
          m.amp[np - 1 + q] = u[q];
          m.amp[np - 1 - q] = parity == 0 ? u[q] : -u[q];
        }
        if (parity == 1) m.amp[np - 1] = 0.0;
        double norm = 0;
        for (std::size_t q = 0; q + 1 < m.coord.size(); ++q)
          norm += 0.5 * (m.amp[q] * m.amp[q] + m.amp[q + 1] * m.amp[q + 1]) * (m.coord[q + 1] - m.coord[q]);
        double scale = 1.0 / std::sqrt(norm);
        if (m.amp[np - 1 + np / 3] < 0 && parity == 1) scale = -scale;
        if (parity == 0 && m.amp[np - 1] < 0) scale = -scale;
        for (double& a : m.amp) a *= scale;
        out.push_back(std::move(m));
      }
      prev_f = fx;
      prev_x = x;
    }
  }
  std::sort(out.begin(), out.end(), [](const SlabMode& a, const SlabMode& b) { return a.n_eff > b.n_eff; });
  std::vector<SlabMode> seq;
  for (auto& m : out) {
    if (m.nodes != static_cast<int>(seq.size())) break;
    seq.push_back(std::move(m));
  }
  return seq;
}

// ---------------------------------------------------------------------------
// effective-index composition
// ---------------------------------------------------------------------------

Grid2D GuidedMode::amplitude() const {
  Grid2D g{grid, std::vector<double>(static_cast<std::size_t>(grid.nx) * grid.ny)};
  for (int iy = 0; iy < grid.ny; ++iy)
    for (int ix = 0; ix < grid.nx; ++ix) g.at(ix, iy) = fx[ix] * fy[iy];
  return g;
}

Grid2D GuidedMode::intensity() const {
  Grid2D g = amplitude();
  for (double& v : g.v) v *= v;
  return g;
}

WaveguideSolver::WaveguideSolver(WaveguideGeometry geom, MaterialSet materials, SolverOptions opt)
    : geom_(std::move(geom)), mat_(std::move(materials)), opt_(opt) {
  geom_.validate();
}

GridSpec WaveguideSolver::mode_grid() const {
  GridSpec g;
  g.nx = opt_.grid_nx;
  g.ny = opt_.grid_ny;
  double wx = opt_.window_x_widths * geom_.width_um;
  double wy = opt_.window_y_depths * geom_.depth_um;
  g.x0 = -0.5 * wx;
  g.y0 = -opt_.cover_fraction * wy;
  g.dx = wx / (g.nx - 1);
  g.dy = wy / (g.ny - 1);
  return g;
}

double WaveguideSolver::substrate_index(Pol pol, double lambda_um) const {
  return mat_.axis(geom_.axis_for(pol)).refractive_index(lambda_um);
}

namespace {

std::vector<double> resample_trapnorm(const std::vector<double>& coord, const std::vector<double>& amp,
                                      int n, double x0, double dx) {
  Pchip interp(coord, amp);
  std::vector<double> out(n, 0.0);
  for (int q = 0; q < n; ++q) {
    double x = x0 + q * dx;
    out[q] = interp.covers(x) ? interp(x) : 0.0;
  }
  double norm = 0;
  for (int q = 0; q < n; ++q) norm += trapezoid_weight(q, n, dx) * out[q] * out[q];
  if (norm > 0)
    for (double& v : out) v /= std::sqrt(norm);
  return out;
}

struct CacheEntry {
  std::shared_ptr<const std::vector<GuidedMode>> modes;
};

std::mutex g_cache_mu;
std::unordered_map<std::uint64_t, CacheEntry> g_cache;

} // namespace

std::shared_ptr<const std::vector<GuidedMode>> WaveguideSolver::solve(Pol pol, double lambda_um,
                                                                      int max_modes) const {
  std::uint64_t key = geom_.hash();
  double nums[3] = {lambda_um, static_cast<double>(static_cast<int>(pol)), static_cast<double>(max_modes)};
  key = fnv1a(nums, sizeof nums, key);
  int grid_nums[4] = {opt_.grid_nx, opt_.grid_ny, opt_.label_cap, static_cast<int>(opt_.slab.scan_points)};
  key = fnv1a(grid_nums, sizeof grid_nums, key);
  for (const SellmeierSet* s : {&mat_.x, &mat_.y, &mat_.z})
    key = fnv1a(s->coeff.data(), s->coeff.size() * sizeof(double), key);

  {
    std::lock_guard<std::mutex> lk(g_cache_mu);
    auto it = g_cache.find(key);
    if (it != g_cache.end()) return it->second.modes;
  }

  const double n_sub = substrate_index(pol, lambda_um);
  const double dn = geom_.delta_n_for(pol);
  GridSpec grid = mode_grid();

  auto depth = solve_depth_slab(n_sub, dn, geom_.depth_um, geom_.cover_index, lambda_um, opt_.slab);

  auto result = std::make_shared<std::vector<GuidedMode>>();
  for (const auto& dm : depth) {
    if (dm.nodes > opt_.label_cap) break;
    auto lat = solve_lateral_slab(dm.n_eff, n_sub, geom_.width_um, lambda_um, geom_.lateral_shape,
                                  geom_.lateral_grading_um, opt_.slab);
    std::vector<double> fy = resample_trapnorm(dm.coord, dm.amp, grid.ny, grid.y0, grid.dy);
    for (const auto& lm : lat) {
      if (lm.nodes > opt_.label_cap) break;
      GuidedMode m;
      m.label = {lm.nodes, dm.nodes};
      m.pol = pol;
      m.lambda_um = lambda_um;
      m.n_eff = lm.n_eff;
      m.grid = grid;
      m.fx = resample_trapnorm(lm.coord, lm.amp, grid.nx, grid.x0, grid.dx);
      m.fy = fy;
      result->push_back(std::move(m));
    }
  }
  std::sort(result->begin(), result->end(),
            [](const GuidedMode& a, const GuidedMode& b) { return a.n_eff > b.n_eff; });
  if (static_cast<int>(result->size()) > max_modes) result->resize(max_modes);

  std::lock_guard<std::mutex> lk(g_cache_mu);
  if (g_cache.size() > 4096) g_cache.clear();
  g_cache[key] = {result};
  return g_cache[key].modes;
}

const ModeDispersion* ModeFamily::find(ModeLabel label) const {
  for (const auto& m : modes)
    if (m.label == label) return &m;
  return nullptr;
}

ModeFamily WaveguideSolver::family(Pol pol, const std::vector<double>& lambda_knots,
                                   int max_modes) const {
  if (lambda_knots.size() < 2) throw std::invalid_argument("mode family needs >= 2 wavelength knots");
  ModeFamily fam;
  fam.pol = pol;

  std::vector<std::shared_ptr<const std::vector<GuidedMode>>> per_knot(lambda_knots.size());
  parallel_for(0, lambda_knots.size(), [&](std::size_t k0, std::size_t k1) {
    for (std::size_t k = k0; k < k1; ++k) per_knot[k] = solve(pol, lambda_knots[k], max_modes);
  });

  // keep labels present at every knot, ordered by n_eff at the center knot
  const auto& center = *per_knot[per_knot.size() / 2];
  for (const auto& cm : center) {
    std::vector<double> xs, ys;
    bool everywhere = true;
    for (std::size_t k = 0; k < lambda_knots.size(); ++k) {
      const GuidedMode* found = nullptr;
      for (const auto& m : *per_knot[k])
        if (m.label == cm.label) {
          found = &m;
          break;
        }
      if (!found) {
        everywhere = false;
        break;
      }
      xs.push_back(lambda_knots[k]);
      ys.push_back(found->n_eff);
    }
    if (!everywhere) continue;
    ModeDispersion md;
    md.label = cm.label;
    md.pol = pol;
    md.n_eff_of_lambda = Pchip(std::move(xs), std::move(ys));
    fam.modes.push_back(std::move(md));
  }
  return fam;
}

// ---------------------------------------------------------------------------
// overlaps
// ---------------------------------------------------------------------------

static void check_same_grid(const GridSpec& a, const GridSpec& b, const char* who) {
  if (!(a == b)) {
    std::ostringstream os;
    os << who << ": grid mismatch (" << a.nx << "x" << a.ny << " vs " << b.nx << "x" << b.ny << ")";
    throw ShapeError(os.str());
  }
}

double mode_overlap(const Grid2D& ia, const Grid2D& ib) {
  check_same_grid(ia.spec, ib.spec, "mode_overlap");
  for (const Grid2D* g : {&ia, &ib}) {
    double s = g->trapezoid_integral();
    if (std::abs(s - 1.0) > 1e-6)
      throw std::invalid_argument("mode_overlap: intensity grid not unit-normalized (integral " +
                                  std::to_string(s) + ")");
  }
  const auto& k = simd::active();
  const int nx = ia.spec.nx, ny = ia.spec.ny;
  std::vector<double> wa(ia.v.size()), wb(ib.v.size());
  for (int iy = 0; iy < ny; ++iy) {
    double wy = trapezoid_weight(iy, ny, ia.spec.dy);
    for (int ix = 0; ix < nx; ++ix) {
      double w = wy * trapezoid_weight(ix, nx, ia.spec.dx);
      std::size_t q = static_cast<std::size_t>(iy) * nx + ix;
      double a = std::max(ia.v[q], 0.0), b = std::max(ib.v[q], 0.0);
      wa[q] = a * w;
      wb[q] = b * w;
    }
  }
  return k.sqrt_dot(wa.data(), wb.data(), wa.size());
}

double nonlinear_overlap(const Grid2D& up, const Grid2D& uh, const Grid2D& uv) {
  check_same_grid(up.spec, uh.spec, "nonlinear_overlap");
  check_same_grid(up.spec, uv.spec, "nonlinear_overlap");
  const auto& k = simd::active();
  const int nx = up.spec.nx, ny = up.spec.ny;
  std::vector<double> wx(nx), scratch(nx);
  for (int ix = 0; ix < nx; ++ix) wx[ix] = trapezoid_weight(ix, nx, up.spec.dx);
  double total = 0;
  for (int iy = 0; iy < ny; ++iy) {
    const double* rp = up.v.data() + static_cast<std::size_t>(iy) * nx;
    const double* rh = uh.v.data() + static_cast<std::size_t>(iy) * nx;
    const double* rv = uv.v.data() + static_cast<std::size_t>(iy) * nx;
    for (int ix = 0; ix < nx; ++ix) scratch[ix] = rp[ix] * rh[ix];
    total += trapezoid_weight(iy, ny, up.spec.dy) * k.dot3(wx.data(), scratch.data(), rv, nx);
  }
  return total;
}

double nonlinear_overlap(const GuidedMode& pump, const GuidedMode& h, const GuidedMode& v) {
  check_same_grid(pump.grid, h.grid, "nonlinear_overlap");
  check_same_grid(pump.grid, v.grid, "nonlinear_overlap");
  const auto& k = simd::active();
  const int nx = pump.grid.nx, ny = pump.grid.ny;
  // outer-product modes factorize the 2D integral into two 1D ones
  std::vector<double> wx(nx), wy(ny), sx(nx), sy(ny);
  for (int ix = 0; ix < nx; ++ix) {
    wx[ix] = trapezoid_weight(ix, nx, pump.grid.dx);
    sx[ix] = pump.fx[ix] * h.fx[ix];
  }
  for (int iy = 0; iy < ny; ++iy) {
    wy[iy] = trapezoid_weight(iy, ny, pump.grid.dy);
    sy[iy] = pump.fy[iy] * h.fy[iy];
  }
  return k.dot3(wx.data(), sx.data(), v.fx.data(), nx) * k.dot3(wy.data(), sy.data(), v.fy.data(), ny);
}

} // namespace wgspdc
