#pragma once

// Test-only central finite differences. Kept separate from the library's
// own gradient checker so the two can disagree.

#include <cmath>
#include <functional>
#include <vector>

#include "lightd/image.hpp"

namespace oracle {

inline std::vector<double> central_diff(
    const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
    double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    x[i] = xi + h;
    const double up = f(x);
    x[i] = xi - h;
    const double down = f(x);
    x[i] = xi;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// Same, for a function of an image; the perturbation actually stored in
// float is used as the denominator.
inline std::vector<double> image_central_diff(
    const std::function<double(const lightd::Image&)>& f, lightd::Image x, double h) {
  std::vector<double> g(x.data().size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const float xi = x.data()[i];
    const float up = static_cast<float>(xi + h);
    const float down = static_cast<float>(xi - h);
    x.data()[i] = up;
    const double fu = f(x);
    x.data()[i] = down;
    const double fd = f(x);
    x.data()[i] = xi;
    g[i] = (fu - fd) / (static_cast<double>(up) - static_cast<double>(down));
  }
  return g;
}

// ||a - b|| / max(||a||, ||b||); 0 when both vanish.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double s = std::sqrt(std::max(na, nb));
  return s == 0 ? 0.0 : std::sqrt(d) / s;
}

template <typename Span>
std::vector<double> to_doubles(const Span& s) {
  return std::vector<double>(s.begin(), s.end());
}

}  // namespace oracle
