#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "sacfv/errors.hpp"

namespace sacfv {

struct QuadPoint {
  double node;    // on [-1, 1]
  double weight;
};

/// Gauss-Legendre rules on [-1,1] for the orders this project uses.
inline std::vector<QuadPoint> gauss_legendre(int order) {
  switch (order) {
    case 1:
      return {{0.0, 2.0}};
    case 2: {
      const double x = 1.0 / std::sqrt(3.0);
      return {{-x, 1.0}, {x, 1.0}};
    }
    case 3: {
      const double x = std::sqrt(3.0 / 5.0);
      return {{-x, 5.0 / 9.0}, {0.0, 8.0 / 9.0}, {x, 5.0 / 9.0}};
    }
    case 5: {
      const double a = std::sqrt(5.0 - 2.0 * std::sqrt(10.0 / 7.0)) / 3.0;
      const double b = std::sqrt(5.0 + 2.0 * std::sqrt(10.0 / 7.0)) / 3.0;
      const double wa = (322.0 + 13.0 * std::sqrt(70.0)) / 900.0;
      const double wb = (322.0 - 13.0 * std::sqrt(70.0)) / 900.0;
      return {{-b, wb}, {-a, wa}, {0.0, 128.0 / 225.0}, {a, wa}, {b, wb}};
    }
    default:
      throw validation_error("unsupported Gauss-Legendre order");
  }
}

/// Integral of fn over the axis-aligned box [lo, hi] (first `dim` axes) by a
/// tensor Gauss-Legendre rule of the given per-axis order.
inline double integrate_box(int dim, const std::array<double, 3>& lo,
                            const std::array<double, 3>& hi, int order,
                            const std::function<double(const std::array<double, 3>&)>& fn) {
  const auto rule = gauss_legendre(order);
  const std::size_t npts = rule.size();
  double total = 0.0;
  std::array<std::size_t, 3> idx{0, 0, 0};
  const std::size_t count = [&] {
    std::size_t c = 1;
    for (int a = 0; a < dim; ++a) c *= npts;
    return c;
  }();
  std::array<double, 3> mid{}, half{};
  double jac = 1.0;
  for (int a = 0; a < dim; ++a) {
    const auto ia = static_cast<std::size_t>(a);
    mid[ia] = 0.5 * (lo[ia] + hi[ia]);
    half[ia] = 0.5 * (hi[ia] - lo[ia]);
    jac *= half[ia];
  }
  for (std::size_t flat = 0; flat < count; ++flat) {
    std::size_t rem = flat;
    double w = 1.0;
    std::array<double, 3> x{0.0, 0.0, 0.0};
    for (int a = 0; a < dim; ++a) {
      const auto ia = static_cast<std::size_t>(a);
      idx[ia] = rem % npts;
      rem /= npts;
      x[ia] = mid[ia] + half[ia] * rule[idx[ia]].node;
      w *= rule[idx[ia]].weight;
    }
    total += w * fn(x);
  }
  return total * jac;
}

/// Composite 1D integral over [a,b]: `panels` equal panels, GL `order` each.
inline double integrate_interval(double a, double b, int panels, int order,
                                 const std::function<double(double)>& fn) {
  const auto rule = gauss_legendre(order);
  const double dt = (b - a) / panels;
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * dt;
    for (const auto& q : rule) total += q.weight * fn(mid + 0.5 * dt * q.node);
  }
  return total * 0.5 * dt;
}

}  // namespace sacfv
