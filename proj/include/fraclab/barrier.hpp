#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "fraclab/common.hpp"
#include "fraclab/lattice.hpp"
#include "fraclab/nonlocal.hpp"

namespace fraclab {

inline constexpr double barrier_r_min = 50.0;

inline double eval_g(double t, double s) {
  if (!(t > 0.0)) throw DomainError("g(t) needs t > 0");
  return std::pow(t, -2.0 * s);
}

inline double eval_h(double t, double r, double s) {
  if (t >= 0.5 * r) return 0.0;
  if (t <= 0.0) return 1.0;
  const double m = 0.5 * r;
  const double dg = -2.0 * s * std::pow(m, -2.0 * s - 1.0);
  return std::min(1.0, eval_g(t, s) - eval_g(m, s) - dg * (t - m));
}

/// Radial profile; `x` is the distance |x|.
inline double eval_v(double x, double r, double s) {
  const double ax = std::abs(x);
  return ax < r ? eval_h(r - ax, r, s) : 1.0;
}

/// The t in (0, r/2) where the tangent-corrected g reaches 1; h == 1 below it.
inline double h_clamp_point(double r, double s) {
  const double m = 0.5 * r;
  const double dg = -2.0 * s * std::pow(m, -2.0 * s - 1.0);
  auto f = [&](double t) { return std::pow(t, -2.0 * s) - std::pow(m, -2.0 * s) - dg * (t - m) - 1.0; };
  boost::uintmax_t iters = 200;
  const auto bracket = boost::math::tools::toms748_solve(
      f, 1e-12 * m, m, boost::math::tools::eps_tolerance<double>(50), iters);
  return 0.5 * (bracket.first + bracket.second);
}

struct BarrierSpec {
  double s = 0.5;
  double tau = 0.1;
  double C5 = 0.0;
  double C_o = 0.0;
  double r = 0.0;
  double R = 0.0;
  double beta = 0.0;
  double t_clamp = 0.0;  // h == 1 for t below this

  /// Builds the barrier for inner radius r; R = r * C_o.
  static BarrierSpec from_r(double s, double tau, double r, double C5, double r_min = barrier_r_min) {
    if (!(s > 0.0 && s < 1.0)) throw ParameterError("barrier exponent s must lie in (0,1)");
    if (!(tau > 0.0)) throw ParameterError("tau must be > 0");
    if (!(C5 > 0.0)) throw ParameterError("C5 must be > 0");
    if (!(r >= r_min)) throw ParameterError("barrier radius r below r_min");
    BarrierSpec b;
    b.s = s;
    b.tau = tau;
    b.C5 = C5;
    b.r = r;
    b.C_o = std::pow(C5 / tau, 1.0 / (2.0 * s));
    b.R = r * b.C_o;
    b.beta = 32.0 * std::pow(r, -2.0 * s);
    if (!(b.beta > 0.0 && b.beta < 1.0)) throw ParameterError("beta = 32 r^{-2s} must lie in (0,1); increase r");
    b.t_clamp = h_clamp_point(r, s);
    return b;
  }

  /// Points where w is not smooth, as signed 1D positions.
  std::vector<double> kinks() const {
    std::vector<double> k;
    for (double a : {0.5 * r, r - t_clamp, r}) {
      k.push_back(a * C_o);
      k.push_back(-a * C_o);
    }
    return k;
  }
};

inline double eval_w(const BarrierSpec& b, double x) {
  return (2.0 - b.beta) * eval_v(x / b.C_o, b.r, b.s) + b.beta - 1.0;
}

namespace detail {

inline std::vector<double> v_kinks(double r, double s) {
  const double tc = h_clamp_point(r, s);
  return {-r, -(r - tc), -0.5 * r, 0.5 * r, r - tc, r};
}

}  // namespace detail

/// [int (v(y) - v(x)) |x-y|^{-1-2s} dy]^+ / (v(x) + 16 r^{-2s}) at one point (1D).
inline double c5_ratio(double x, double r, double s) {
  const auto kinks = detail::v_kinks(r, s);
  const double I =
      fractional_integral_1d([&](double y) { return eval_v(y, r, s); }, x, s, kinks, 1.0, r);
  return std::max(I, 0.0) / (eval_v(x, r, s) + 16.0 * std::pow(r, -2.0 * s));
}

/// Sup of c5_ratio over x_k = r k / sample_count, k = 0..sample_count-1 (the
/// profile is even, so the half-ball suffices). Grids are nested under doubling.
inline double estimate_C5(double s, double r, int sample_count, double r_min = barrier_r_min) {
  if (!(s > 0.0 && s < 1.0)) throw ParameterError("barrier exponent s must lie in (0,1)");
  if (!(r >= r_min)) throw ParameterError("barrier radius r below r_min");
  if (sample_count < 1) throw ParameterError("sample_count must be >= 1");
  std::vector<double> ratio(static_cast<std::size_t>(sample_count));
  parallel_for(ratio.size(), [&](std::size_t k) {
    ratio[k] = c5_ratio(r * static_cast<double>(k) / sample_count, r, s);
  });
  return *std::max_element(ratio.begin(), ratio.end());
}

struct Al1Report {
  std::size_t samples = 0;
  std::size_t passing = 0;
  double fraction = 0.0;
  double worst_ratio = -std::numeric_limits<double>::infinity();  // I_w / (tau (1 + w))
  double worst_x = 0.0;
  double slack = 0.05;
  // counts of I_w / (tau (1+w)) in (-inf,0], (0,0.5], (0.5,1], (1,1+slack], (1+slack,inf)
  std::array<std::size_t, 5> histogram{};
  bool passed = false;
};

struct Al2Report {
  std::size_t samples = 0;
  double sup_q = 0.0;  // q(x) = (1 + w(x)) (R + 1 - |x|)^{2s}
  double inf_q = 0.0;
  double x_sup = 0.0;
  double x_inf = 0.0;
  double C = 0.0;      // max(sup q, 1 / inf q)
  double ratio = 0.0;  // sup q / inf q
  bool finite = false;
};

namespace detail {

inline std::vector<double> barrier_samples(const BarrierSpec& b, const Lattice& lat) {
  if (lat.dim() != 1) throw ParameterError("barrier verification is implemented on 1D lattices");
  if (lat.box_lo(0) > -b.R || lat.box_hi(0) < b.R)
    throw LatticeError("lattice box must contain B_R for barrier verification");
  std::vector<double> xs;
  for (std::size_t i = 0; i < lat.size(); ++i) {
    const double x = lat.center(i)[0];
    if (std::abs(x) < b.R) xs.push_back(x);
  }
  return xs;
}

}  // namespace detail

/// al1 at the lattice cell centers inside B_R: the kernel integral of w at x is
/// at most tau (1 + w(x)), allowing a relative slack.
inline Al1Report verify_al1(const BarrierSpec& b, const Lattice& lat, double slack = 0.05,
                            double required_fraction = 0.99) {
  const auto xs = detail::barrier_samples(b, lat);
  const auto kinks = b.kinks();
  std::vector<double> ratio(xs.size());
  parallel_for(xs.size(), [&](std::size_t k) {
    const double x = xs[k];
    const double I =
        fractional_integral_1d([&](double y) { return eval_w(b, y); }, x, b.s, kinks, 1.0, b.R);
    ratio[k] = I / (b.tau * (1.0 + eval_w(b, x)));
  });
  Al1Report rep;
  rep.samples = xs.size();
  rep.slack = slack;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double q = ratio[k];
    if (q <= 1.0 + slack) ++rep.passing;
    if (q > rep.worst_ratio) {
      rep.worst_ratio = q;
      rep.worst_x = xs[k];
    }
    const int bin = q <= 0.0 ? 0 : q <= 0.5 ? 1 : q <= 1.0 ? 2 : q <= 1.0 + slack ? 3 : 4;
    ++rep.histogram[static_cast<std::size_t>(bin)];
  }
  rep.fraction = xs.empty() ? 0.0 : static_cast<double>(rep.passing) / static_cast<double>(xs.size());
  rep.passed = !xs.empty() && rep.fraction >= required_fraction;
  return rep;
}

/// Two-sided al2 constant from q(x) = (1 + w(x)) (R + 1 - |x|)^{2s} on B_R.
inline Al2Report verify_al2(const BarrierSpec& b, const Lattice& lat) {
  const auto xs = detail::barrier_samples(b, lat);
  Al2Report rep;
  rep.samples = xs.size();
  rep.sup_q = -std::numeric_limits<double>::infinity();
  rep.inf_q = std::numeric_limits<double>::infinity();
  for (double x : xs) {
    const double q = (1.0 + eval_w(b, x)) * std::pow(b.R + 1.0 - std::abs(x), 2.0 * b.s);
    if (q > rep.sup_q) {
      rep.sup_q = q;
      rep.x_sup = x;
    }
    if (q < rep.inf_q) {
      rep.inf_q = q;
      rep.x_inf = x;
    }
  }
  rep.finite = !xs.empty() && std::isfinite(rep.sup_q) && rep.inf_q > 0.0;
  if (rep.finite) {
    rep.C = std::max(rep.sup_q, 1.0 / rep.inf_q);
    rep.ratio = rep.sup_q / rep.inf_q;
  }
  return rep;
}

/// (|x|, w) on `count` equally spaced radii in [0, extent * R].
inline std::vector<std::array<double, 2>> radial_profile(const BarrierSpec& b, int count,
                                                         double extent = 1.25) {
  if (count < 2) throw ParameterError("radial profile needs >= 2 points");
  std::vector<std::array<double, 2>> out;
  for (int k = 0; k < count; ++k) {
    const double x = extent * b.R * k / (count - 1);
    out.push_back({x, eval_w(b, x)});
  }
  return out;
}

}  // namespace fraclab
