#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace wgspdc {

// Monotone cubic interpolation (Fritsch-Carlson slopes). Shape-preserving:
// never overshoots between knots, exact at knots. Evaluation outside the knot
// span throws std::out_of_range.
class Pchip {
public:
  Pchip() = default;

  Pchip(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    if (n < 2 || y_.size() != n) throw std::invalid_argument("pchip needs >= 2 knots, matching sizes");
    for (std::size_t i = 1; i < n; ++i)
      if (!(x_[i] > x_[i - 1])) throw std::invalid_argument("pchip knots must increase strictly");
    m_.resize(n);
    std::vector<double> d(n - 1), h(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      h[i] = x_[i + 1] - x_[i];
      d[i] = (y_[i + 1] - y_[i]) / h[i];
    }
    if (n == 2) {
      m_[0] = m_[1] = d[0];
    } else {
      for (std::size_t i = 1; i + 1 < n; ++i) {
        if (d[i - 1] * d[i] <= 0.0) {
          m_[i] = 0.0;
        } else {
          double w1 = 2 * h[i] + h[i - 1];
          double w2 = h[i] + 2 * h[i - 1];
          m_[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
        }
      }
      auto end_slope = [](double h0, double h1, double d0, double d1) {
        double m = ((2 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if (m * d0 <= 0) return 0.0;
        if (d0 * d1 < 0 && std::abs(m) > 3 * std::abs(d0)) return 3 * d0;
        return m;
      };
      m_[0] = end_slope(h[0], h[1], d[0], d[1]);
      m_[n - 1] = end_slope(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);
    }
  }

  bool covers(double x) const { return !x_.empty() && x >= x_.front() && x <= x_.back(); }
  double x_min() const { return x_.front(); }
  double x_max() const { return x_.back(); }
  std::size_t size() const { return x_.size(); }

  double operator()(double x) const {
    if (!covers(x)) {
      std::ostringstream os;
      os << "interpolation argument " << x << " outside solved span [" << x_.front() << ", "
         << x_.back() << "]";
      throw std::out_of_range(os.str());
    }
    auto it = std::upper_bound(x_.begin(), x_.end(), x);
    std::size_t i = (it == x_.end()) ? x_.size() - 2 : static_cast<std::size_t>(it - x_.begin()) - 1;
    if (i >= x_.size() - 1) i = x_.size() - 2;
    double h = x_[i + 1] - x_[i];
    double t = (x - x_[i]) / h;
    double t2 = t * t, t3 = t2 * t;
    double h00 = 2 * t3 - 3 * t2 + 1;
    double h10 = t3 - 2 * t2 + t;
    double h01 = -2 * t3 + 3 * t2;
    double h11 = t3 - t2;
    return h00 * y_[i] + h10 * h * m_[i] + h01 * y_[i + 1] + h11 * h * m_[i + 1];
  }

  double derivative(double x) const {
    if (!covers(x)) throw std::out_of_range("pchip derivative outside span");
    auto it = std::upper_bound(x_.begin(), x_.end(), x);
    std::size_t i = (it == x_.end()) ? x_.size() - 2 : static_cast<std::size_t>(it - x_.begin()) - 1;
    if (i >= x_.size() - 1) i = x_.size() - 2;
    double h = x_[i + 1] - x_[i];
    double t = (x - x_[i]) / h;
    double dh00 = (6 * t * t - 6 * t) / h;
    double dh10 = 3 * t * t - 4 * t + 1;
    double dh01 = (-6 * t * t + 6 * t) / h;
    double dh11 = 3 * t * t - 2 * t;
    return dh00 * y_[i] + dh10 * m_[i] + dh01 * y_[i + 1] + dh11 * m_[i + 1];
  }

private:
  std::vector<double> x_, y_, m_;
};

} // namespace wgspdc
