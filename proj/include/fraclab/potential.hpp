#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "fraclab/common.hpp"

namespace fraclab {

/// W(t) = a (1 - t^2)^2.
struct Quartic {
  double amplitude = 0.25;
};

/// Clamped cubic spline through (t_k, W_k) on [-1, 1].
class TabulatedWell {
 public:
  TabulatedWell(std::vector<double> t, std::vector<double> w, double slope_lo = 0.0,
                double slope_hi = 0.0)
      : t_(std::move(t)), w_(std::move(w)) {
    if (t_.size() != w_.size() || t_.size() < 3)
      throw ParameterError("tabulated potential needs >= 3 matching samples");
    for (std::size_t k = 1; k < t_.size(); ++k)
      if (!(t_[k] > t_[k - 1])) throw ParameterError("tabulated sample points must increase");
    if (t_.front() != -1.0 || t_.back() != 1.0)
      throw ParameterError("tabulated potential must span exactly [-1, 1]");
    fit(slope_lo, slope_hi);
  }

  double value(double t) const { return eval(t, 0); }
  double deriv(double t) const { return eval(t, 1); }
  double second(double t) const { return eval(t, 2); }

  const std::vector<double>& nodes() const { return t_; }
  const std::vector<double>& samples() const { return w_; }

 private:
  // Solves for second derivatives m_k with prescribed end slopes.
  void fit(double d0, double dn) {
    const std::size_t n = t_.size();
    std::vector<double> a(n, 0.0), b(n, 0.0), c(n, 0.0), r(n, 0.0);
    auto hk = [&](std::size_t k) { return t_[k + 1] - t_[k]; };
    b[0] = 2.0 * hk(0);
    c[0] = hk(0);
    r[0] = 6.0 * ((w_[1] - w_[0]) / hk(0) - d0);
    for (std::size_t k = 1; k + 1 < n; ++k) {
      a[k] = hk(k - 1);
      b[k] = 2.0 * (hk(k - 1) + hk(k));
      c[k] = hk(k);
      r[k] = 6.0 * ((w_[k + 1] - w_[k]) / hk(k) - (w_[k] - w_[k - 1]) / hk(k - 1));
    }
    a[n - 1] = hk(n - 2);
    b[n - 1] = 2.0 * hk(n - 2);
    r[n - 1] = 6.0 * (dn - (w_[n - 1] - w_[n - 2]) / hk(n - 2));
    // Thomas algorithm.
    for (std::size_t k = 1; k < n; ++k) {
      const double m = a[k] / b[k - 1];
      b[k] -= m * c[k - 1];
      r[k] -= m * r[k - 1];
    }
    m_.assign(n, 0.0);
    m_[n - 1] = r[n - 1] / b[n - 1];
    for (std::size_t k = n - 1; k-- > 0;) m_[k] = (r[k] - c[k] * m_[k + 1]) / b[k];
  }

  double eval(double t, int order) const {
    std::size_t k = 0;
    while (k + 2 < t_.size() && t > t_[k + 1]) ++k;
    const double h = t_[k + 1] - t_[k];
    const double A = (t_[k + 1] - t) / h;
    const double B = (t - t_[k]) / h;
    switch (order) {
      case 0:
        return A * w_[k] + B * w_[k + 1] +
               ((A * A * A - A) * m_[k] + (B * B * B - B) * m_[k + 1]) * h * h / 6.0;
      case 1:
        return (w_[k + 1] - w_[k]) / h - (3.0 * A * A - 1.0) * h * m_[k] / 6.0 +
               (3.0 * B * B - 1.0) * h * m_[k + 1] / 6.0;
      default:
        return A * m_[k] + B * m_[k + 1];
    }
  }

  std::vector<double> t_, w_, m_;
};

/// Double-well potential with zeros at the pure phases +-1.
class DoubleWell {
 public:
  DoubleWell() : v_(Quartic{}) {}
  DoubleWell(Quartic q) : v_(q) {
    if (!(q.amplitude > 0.0)) throw ParameterError("quartic amplitude must be > 0");
  }
  DoubleWell(TabulatedWell t) : v_(std::move(t)) {}

  static DoubleWell quartic(double a = 0.25) { return DoubleWell(Quartic{a}); }

  bool is_quartic() const { return std::holds_alternative<Quartic>(v_); }
  const std::variant<Quartic, TabulatedWell>& variant() const { return v_; }

  double value(double t) const {
    check(t);
    if (auto q = std::get_if<Quartic>(&v_)) {
      const double d = 1.0 - t * t;
      return q->amplitude * d * d;
    }
    return std::get<TabulatedWell>(v_).value(t);
  }
  double deriv(double t) const {
    check(t);
    if (auto q = std::get_if<Quartic>(&v_)) return -4.0 * q->amplitude * t * (1.0 - t * t);
    return std::get<TabulatedWell>(v_).deriv(t);
  }
  double second(double t) const {
    check(t);
    if (auto q = std::get_if<Quartic>(&v_)) return 4.0 * q->amplitude * (3.0 * t * t - 1.0);
    return std::get<TabulatedWell>(v_).second(t);
  }

  std::string describe() const {
    if (auto q = std::get_if<Quartic>(&v_)) return "quartic(a=" + std::to_string(q->amplitude) + ")";
    return "tabulated(" + std::to_string(std::get<TabulatedWell>(v_).nodes().size()) + " nodes)";
  }

 private:
  static void check(double t) {
    if (!(t >= -1.0 && t <= 1.0)) throw DomainError("potential argument outside [-1,1]");
  }
  std::variant<Quartic, TabulatedWell> v_;
};

inline double w_eval(const DoubleWell& pot, double t) { return pot.value(t); }
inline double w_deriv(const DoubleWell& pot, double t) { return pot.deriv(t); }
inline double w_second(const DoubleWell& pot, double t) { return pot.second(t); }

struct WcondReport {
  bool passed = false;
  double max_abs_at_wells = 0.0;   // |W(+-1)|
  double max_abs_slope_at_wells = 0.0;
  double min_curvature_at_wells = 0.0;
  double min_interior_value = 0.0;  // min of W over interior samples
};

/// Samples W on the open interval and checks the structural well conditions.
inline WcondReport check_wcond(const DoubleWell& pot, int samples = 1000, double tol = 1e-9) {
  WcondReport r;
  r.max_abs_at_wells = std::max(std::abs(pot.value(-1.0)), std::abs(pot.value(1.0)));
  r.max_abs_slope_at_wells = std::max(std::abs(pot.deriv(-1.0)), std::abs(pot.deriv(1.0)));
  r.min_curvature_at_wells = std::min(pot.second(-1.0), pot.second(1.0));
  r.min_interior_value = std::numeric_limits<double>::infinity();
  for (int k = 1; k < samples; ++k) {
    const double t = -1.0 + 2.0 * k / samples;
    r.min_interior_value = std::min(r.min_interior_value, pot.value(t));
  }
  r.passed = r.max_abs_at_wells <= tol && r.max_abs_slope_at_wells <= tol &&
             r.min_curvature_at_wells > 0.0 && r.min_interior_value > 0.0;
  return r;
}

struct GrowReport {
  bool passed = false;
  double margin = 0.0;  // smallest sampled slack over both conditions; < 0 means violated
  double worst_r = 0.0;
  double worst_t = 0.0;
  int pairs_checked = 0;
};

/// Samples both growth conditions on pairs -1 <= r <= t <= 1 of a uniform grid
/// with `samples` points per axis. The quadratic lower bound is only required
/// for t <= -1 + c.
inline GrowReport check_grow(const DoubleWell& pot, double c, int samples) {
  if (!(c > 0.0)) throw ParameterError("growth constant must be > 0");
  if (samples < 2) throw ParameterError("check_grow needs >= 2 samples");
  GrowReport rep;
  rep.margin = std::numeric_limits<double>::infinity();
  auto grid = [&](int k) { return -1.0 + 2.0 * k / (samples - 1); };
  for (int i = 0; i < samples; ++i) {
    const double r = grid(i);
    const double wr = pot.value(r);
    for (int j = i; j < samples; ++j) {
      const double t = grid(j);
      const double wt = pot.value(t);
      ++rep.pairs_checked;
      double m = (1.0 + r) / c - (wr - wt);
      if (t <= -1.0 + c) {
        const double d = t - r;
        m = std::min(m, wt - wr - c * (1.0 + r) * d - c * d * d);
      }
      if (m < rep.margin) {
        rep.margin = m;
        rep.worst_r = r;
        rep.worst_t = t;
      }
    }
  }
  rep.passed = rep.margin >= -1e-14;
  return rep;
}

/// Largest c in (0, c_max] passing check_grow, by bisection.
inline double find_grow_constant(const DoubleWell& pot, int samples = 200, double c_max = 1.0,
                                 int steps = 40) {
  if (check_grow(pot, c_max, samples).passed) return c_max;
  double lo = 0.0, hi = c_max;
  for (int k = 0; k < steps; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (check_grow(pot, mid, samples).passed) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

}  // namespace fraclab
