#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

namespace fraclab::quad {

// Adaptive Gauss-Kronrod on [a, b]; either bound may be infinite.
template <class F>
double adaptive(F&& f, double a, double b, double rel_tol, unsigned max_depth = 15) {
  if (a == b) return 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, max_depth, rel_tol);
}

// Double-exponential rule, robust against integrable endpoint singularities.
template <class F>
double endpoint_singular(F&& f, double a, double b, double rel_tol) {
  if (a == b) return 0.0;
  static thread_local boost::math::quadrature::tanh_sinh<double> rule(12);
  // Mapped onto [-1, 1], where the rule never evaluates at an endpoint.
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  return half * rule.integrate([&](double u) { return f(mid + half * u); }, -1.0, 1.0, rel_tol);
}

// Adaptive integration split at the given interior breakpoints. Points is the
// Kronrod order used on each piece (15 or 31).
template <unsigned Points = 31, class F>
double piecewise(F&& f, double a, double b, std::vector<double> breaks, double rel_tol) {
  breaks.push_back(a);
  breaks.push_back(b);
  std::sort(breaks.begin(), breaks.end());
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double lo = std::max(a, breaks[k]);
    const double hi = std::min(b, breaks[k + 1]);
    if (hi - lo > 1e-14 * (1.0 + std::abs(lo)))
      total += boost::math::quadrature::gauss_kronrod<double, Points>::integrate(f, lo, hi, 15, rel_tol);
  }
  return total;
}

// Double-exponential rule on each piece between breakpoints; suited to
// integrands with algebraic behaviour at the breakpoints.
template <class F>
double piecewise_singular(F&& f, double a, double b, std::vector<double> breaks, double rel_tol) {
  breaks.push_back(a);
  breaks.push_back(b);
  std::sort(breaks.begin(), breaks.end());
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double lo = std::max(a, breaks[k]);
    const double hi = std::min(b, breaks[k + 1]);
    if (hi - lo > 1e-9 * (1.0 + std::abs(lo))) {
      total += endpoint_singular(f, lo, hi, rel_tol);
    } else if (hi > lo) {
      total += (hi - lo) * f(0.5 * (lo + hi));
    }
  }
  return total;
}

// Nested adaptive rule over the rectangle [x0,x1] x [y0,y1].
template <class F>
double rectangle(F&& f, double x0, double x1, double y0, double y1, double rel_tol) {
  auto inner = [&](double x) {
    return adaptive([&](double y) { return f(x, y); }, y0, y1, rel_tol);
  };
  return adaptive(inner, x0, x1, rel_tol);
}

}  // namespace fraclab::quad
