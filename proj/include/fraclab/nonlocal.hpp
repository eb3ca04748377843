#pragma once

#include <array>
#include <cmath>
#include <initializer_list>
#include <utility>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "fraclab/common.hpp"
#include "fraclab/lattice.hpp"
#include "fraclab/potential.hpp"
#include "fraclab/quadrature.hpp"

namespace fraclab {

// How near-range pair weights are defined. For s < 1/2 the piecewise-constant
// cell-pair integral is finite and used as is. For s >= 1/2 it diverges on
// face-adjacent cells, so the weight becomes the center-to-cell integral
// h^n * int_{C_j} |x_i - y|^{-(n+2s)} dy, which is still symmetric in (i, j).
enum class WeightScheme { CellPair, CellCenter };

inline WeightScheme scheme_for(double s) {
  return s < 0.5 ? WeightScheme::CellPair : WeightScheme::CellCenter;
}

inline const char* to_string(WeightScheme w) {
  return w == WeightScheme::CellPair ? "cell-pair" : "cell-center";
}

namespace detail {

// Unit-spacing (h = 1) near weights.

inline double cell_pair_1d(long d, double s) {
  const double e = 1.0 - 2.0 * s;
  const double dd = static_cast<double>(d);
  return (2.0 * std::pow(dd, e) - std::pow(dd - 1.0, e) - std::pow(dd + 1.0, e)) /
         (2.0 * s * e);
}

inline double cell_center_1d(long d, double s) {
  const double dd = static_cast<double>(d);
  return (std::pow(dd - 0.5, -2.0 * s) - std::pow(dd + 0.5, -2.0 * s)) / (2.0 * s);
}

// int over unit squares offset by d of |x-y|^{-(2+2s)}, written as the
// convolution int Lambda(z1-d1) Lambda(z2-d2) |z|^{-2-2s} dz with the tent
// function Lambda. Subsquares touching the origin are done in polar
// coordinates with the radial integral in closed form.
inline double cell_pair_2d(long d1, long d2, double s, double tol) {
  auto tent = [](double t) { return std::max(0.0, 1.0 - std::abs(t)); };
  const double p = -2.0 - 2.0 * s;
  double total = 0.0;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      const double x0 = static_cast<double>(d1 - 1 + a), x1 = x0 + 1.0;
      const double y0 = static_cast<double>(d2 - 1 + b), y1 = y0 + 1.0;
      const bool corner = (x0 == 0.0 || x1 == 0.0) && (y0 == 0.0 || y1 == 0.0);
      if (!corner) {
        total += quad::rectangle(
            [&](double z1, double z2) {
              return tent(z1 - d1) * tent(z2 - d2) * std::pow(z1 * z1 + z2 * z2, 0.5 * p);
            },
            x0, x1, y0, y1, tol);
        continue;
      }
      // Reflect so the subsquare is [0,1]^2 with the singular corner at 0.
      const double sx = (x0 == 0.0) ? 1.0 : -1.0;
      const double sy = (y0 == 0.0) ? 1.0 : -1.0;
      const double a1 = tent(-static_cast<double>(d1));
      const double b1 = tent(sx - static_cast<double>(d1)) - a1;
      const double a2 = tent(-static_cast<double>(d2));
      const double b2 = tent(sy - static_cast<double>(d2)) - a2;
      // (a1 + b1 u)(a2 + b2 v) with a1 a2 == 0 because d != 0.
      const double e1 = 1.0 - 2.0 * s, e2 = 2.0 - 2.0 * s;
      auto angular = [&](double phi) {
        const double c = std::cos(phi), sn = std::sin(phi);
        const double rmax = phi < std::numbers::pi / 4 ? 1.0 / c : 1.0 / sn;
        const double k1 = a1 * b2 * sn + a2 * b1 * c;
        const double k2 = b1 * b2 * c * sn;
        return k1 * std::pow(rmax, e1) / e1 + k2 * std::pow(rmax, e2) / e2;
      };
      total += quad::piecewise(angular, 0.0, std::numbers::pi / 2, {std::numbers::pi / 4}, tol);
    }
  }
  return total;
}

inline double cell_center_2d(long d1, long d2, double s, double tol) {
  const double p = -1.0 - s;
  return quad::rectangle([&](double z1, double z2) { return std::pow(z1 * z1 + z2 * z2, p); },
                         d1 - 0.5, d1 + 0.5, d2 - 0.5, d2 + 0.5, tol);
}

}  // namespace detail

/// Pairwise weights w_ij for the kernel |x-y|^{-(n+2s)} on one lattice box.
///
/// Every offset reachable inside the box is tabulated: near offsets
/// (max-norm <= near_radius) by quadrature, far offsets by the midpoint rule
/// h^{2n} |x_i - x_j|^{-(n+2s)}. The self weight is exactly zero. Weights
/// scale as h^{n-2s}, so near values are computed once at h = 1.
class KernelTable {
 public:
  KernelTable() = default;

  KernelTable(Lattice lat, double s, int near_radius, double quad_tol,
              std::vector<double> unit_near)
      : lat_(std::move(lat)), s_(s), near_radius_(near_radius), quad_tol_(quad_tol),
        scheme_(scheme_for(s)), unit_near_(std::move(unit_near)) {
    const long side = 2L * near_radius_ + 1;
    const long expect = lat_.dim() == 1 ? side : side * side;
    if (static_cast<long>(unit_near_.size()) != expect)
      throw ParameterError("near-weight table has the wrong size");
    fill_offsets();
  }

  const Lattice& lattice() const { return lat_; }
  double s() const { return s_; }
  int dim() const { return lat_.dim(); }
  int near_radius() const { return near_radius_; }
  double quad_tol() const { return quad_tol_; }
  WeightScheme scheme() const { return scheme_; }
  double scale() const { return std::pow(lat_.h(), lat_.dim() - 2.0 * s_); }
  const std::vector<double>& unit_near() const { return unit_near_; }

  double weight_offset(long dx, long dy) const { return origin()[dx + stride_ * dy]; }
  double weight(std::size_t i, std::size_t j) const {
    return origin()[position(i) - position(j)];
  }

  /// Linear position of a cell in offset space: weight(i,j) = origin()[pos(i) - pos(j)].
  long position(std::size_t i) const {
    const CellCoord c = lat_.coord(i);
    return c[0] + stride_ * c[1];
  }
  const double* origin() const { return table_.data() + origin_; }

  /// The analytic far rule at unit spacing, used for offsets beyond near_radius.
  double far_unit(long dx, long dy) const {
    const double r2 = static_cast<double>(dx * dx + dy * dy);
    return std::pow(r2, -0.5 * (lat_.dim() + 2.0 * s_));
  }
  double near_unit_weight(long dx, long dy) const {
    const long side = 2L * near_radius_ + 1;
    if (lat_.dim() == 1) return unit_near_[dx + near_radius_];
    return unit_near_[(dx + near_radius_) + side * (dy + near_radius_)];
  }

 private:
  void fill_offsets() {
    const long nx = lat_.extent(0), ny = lat_.extent(1);
    stride_ = 2 * nx - 1;
    table_.assign(static_cast<std::size_t>(stride_ * (2 * ny - 1)), 0.0);
    origin_ = static_cast<std::size_t>((nx - 1) + stride_ * (ny - 1));
    const double sc = scale();
    for (long dy = -(ny - 1); dy <= ny - 1; ++dy) {
      for (long dx = -(nx - 1); dx <= nx - 1; ++dx) {
        double w = 0.0;
        if (dx != 0 || dy != 0) {
          const bool near = std::max(std::abs(dx), std::abs(dy)) <= near_radius_;
          w = sc * (near ? near_unit_weight(dx, dy) : far_unit(dx, dy));
        }
        table_[origin_ + dx + stride_ * dy] = w;
      }
    }
  }

  Lattice lat_;
  double s_ = 0.5;
  int near_radius_ = 4;
  double quad_tol_ = 1e-6;
  WeightScheme scheme_ = WeightScheme::CellCenter;
  std::vector<double> unit_near_;
  std::vector<double> table_;
  std::size_t origin_ = 0;
  long stride_ = 1;
};

/// Near weights at unit spacing, laid out (dx + nr) + (2nr+1)(dy + nr).
inline std::vector<double> compute_unit_near(int dim, double s, int near_radius, double quad_tol) {
  const long nr = near_radius;
  const long side = 2 * nr + 1;
  const WeightScheme sch = scheme_for(s);
  std::vector<double> out(static_cast<std::size_t>(dim == 1 ? side : side * side), 0.0);
  if (dim == 1) {
    for (long d = 1; d <= nr; ++d) {
      const double w = sch == WeightScheme::CellPair ? detail::cell_pair_1d(d, s)
                                                      : detail::cell_center_1d(d, s);
      out[nr + d] = w;
      out[nr - d] = w;
    }
    return out;
  }
  // Only 0 <= d2 <= d1 is integrated; the rest follows from the square's symmetries.
  for (long d1 = 0; d1 <= nr; ++d1) {
    for (long d2 = 0; d2 <= d1; ++d2) {
      if (d1 == 0 && d2 == 0) continue;
      const double w = sch == WeightScheme::CellPair ? detail::cell_pair_2d(d1, d2, s, quad_tol)
                                                      : detail::cell_center_2d(d1, d2, s, quad_tol);
      for (long sx : {-1L, 1L})
        for (long sy : {-1L, 1L}) {
          out[(sx * d1 + nr) + side * (sy * d2 + nr)] = w;
          out[(sx * d2 + nr) + side * (sy * d1 + nr)] = w;
        }
    }
  }
  return out;
}

inline void check_kernel_params(double s, int near_radius, double quad_tol) {
  if (!(s > 0.0 && s < 1.0)) throw ParameterError("kernel exponent s must lie in (0,1)");
  if (near_radius < 2) throw ParameterError("near_radius must be >= 2");
  if (!(quad_tol > 0.0)) throw ParameterError("quad_tol must be > 0");
}

inline KernelTable build_kernel(const Lattice& lat, double s, int near_radius = 4,
                                double quad_tol = 1e-6) {
  check_kernel_params(s, near_radius, quad_tol);
  return KernelTable(lat, s, near_radius, quad_tol,
                     compute_unit_near(lat.dim(), s, near_radius, quad_tol));
}

// ---------------------------------------------------------------------------
// Exterior tails: integrals of the kernel over the complement of the box.

/// Per-cell kernel mass outside the box, split by exterior value. density[k *
/// levels.size() + l] is int_{beyond box, u_o = levels[l]} |x_k - y|^{-(n+2s)} dy
/// for the k-th requested cell (a per-unit-volume density).
struct TailTerms {
  std::vector<double> levels;
  std::vector<double> density;

  double total(std::size_t k) const {
    double t = 0.0;
    for (std::size_t l = 0; l < levels.size(); ++l) t += density[k * levels.size() + l];
    return t;
  }
};

namespace detail {

// 1D: kernel mass of the interval [y0, y1] (disjoint from the cell interior)
// seen from cell [x0, x1]. Cell-averaged for the cell-pair scheme, from the
// cell center otherwise. Bounds may be infinite.
inline double interval_mass_1d(WeightScheme sch, double s, double x0, double x1, double y0,
                               double y1) {
  if (!(y1 > y0)) return 0.0;
  if (y0 >= x1) {
    if (sch == WeightScheme::CellCenter) {
      const double xc = 0.5 * (x0 + x1);
      const double far = std::isinf(y1) ? 0.0 : std::pow(y1 - xc, -2.0 * s);
      return (std::pow(y0 - xc, -2.0 * s) - far) / (2.0 * s);
    }
    const double e = 1.0 - 2.0 * s;
    auto P = [&](double u) { return std::pow(u, e) / e; };
    double v = P(y0 - x0) - P(y0 - x1);
    if (!std::isinf(y1)) v -= P(y1 - x0) - P(y1 - x1);
    return v / (2.0 * s * (x1 - x0));
  }
  // Interval to the left: mirror.
  return interval_mass_1d(sch, s, -x1, -x0, -y1, -y0);
}

inline double ray_exit(const Point& x, double c, double sn, double X0, double X1, double Y0,
                       double Y1) {
  double t = std::numeric_limits<double>::infinity();
  if (c > 0) t = std::min(t, (X1 - x[0]) / c);
  if (c < 0) t = std::min(t, (X0 - x[0]) / c);
  if (sn > 0) t = std::min(t, (Y1 - x[1]) / sn);
  if (sn < 0) t = std::min(t, (Y0 - x[1]) / sn);
  return t;
}

// Kernel mass int |x - y|^{-2-2s} dy over the complement of a union of
// rectangles {x0, x1, y0, y1}, each containing x. Returns the total and the
// part on the positive side of the halfspace (0 without one).
inline std::pair<double, double> outer_density(const Point& x,
                                               std::initializer_list<std::array<double, 4>> rects,
                                               const HalfspaceSign* hs, double s, double tol) {
  const double two_s = 2.0 * s;
  const double two_pi = 2.0 * std::numbers::pi;
  auto angle = [&](double dy, double dx) {
    const double th = std::atan2(dy, dx);
    return th < 0 ? th + two_pi : th;
  };
  std::vector<double> breaks{0.0, 0.5 * std::numbers::pi, std::numbers::pi, 1.5 * std::numbers::pi};
  // Corners of each rectangle and crossings of their edges.
  for (const auto& r : rects)
    for (const auto& q : rects)
      for (double cx : {r[0], r[1]})
        for (double cy : {q[2], q[3]}) breaks.push_back(angle(cy - x[1], cx - x[0]));
  if (hs) {
    for (const auto& r : rects) {
      if (hs->axis == 0) {
        for (double cy : {r[2], r[3]}) breaks.push_back(angle(cy - x[1], hs->threshold - x[0]));
      } else {
        for (double cx : {r[0], r[1]}) breaks.push_back(angle(hs->threshold - x[1], cx - x[0]));
      }
    }
  }
  auto rho = [&](double c, double sn) {
    double r = 0.0;
    for (const auto& q : rects) r = std::max(r, ray_exit(x, c, sn, q[0], q[1], q[2], q[3]));
    return r;
  };
  auto tailfrom = [&](double r) { return std::pow(r, -two_s) / two_s; };
  auto total_f = [&](double th) { return tailfrom(rho(std::cos(th), std::sin(th))); };
  const double total = quad::piecewise<15>(total_f, 0.0, two_pi, breaks, tol);
  if (!hs) return {total, 0.0};
  auto plus_f = [&](double th) {
    const double c = std::cos(th), sn = std::sin(th);
    const double r0 = rho(c, sn);
    const double dir = hs->axis == 0 ? c : sn;
    const double pos = x[hs->axis];
    const double t = hs->threshold;
    if (dir == 0.0) return pos > t ? tailfrom(r0) : 0.0;
    const double rstar = (t - pos) / dir;
    if (dir > 0) return tailfrom(std::max(r0, rstar));
    return rstar <= r0 ? 0.0 : tailfrom(r0) - tailfrom(rstar);
  };
  const double plus = quad::piecewise_singular(plus_f, 0.0, two_pi, breaks, tol);
  return {total, plus};
}

}  // namespace detail

/// Tail densities of the listed cells against the exterior descriptor.
inline TailTerms exterior_tail(const KernelTable& kern, const ExteriorData& ext,
                               std::span<const std::size_t> cells) {
  const Lattice& lat = kern.lattice();
  const double s = kern.s();
  const double h = lat.h();
  TailTerms out;

  // Exterior beyond the box is piecewise constant: one level, or two for a halfspace.
  const HalfspaceSign* hs = std::get_if<HalfspaceSign>(&ext.variant());
  if (hs) {
    if (hs->axis < 0 || hs->axis >= lat.dim()) throw ParameterError("halfspace axis out of range");
    out.levels = {hs->sign, -hs->sign};
  } else if (auto c = std::get_if<ConstantExterior>(&ext.variant())) {
    out.levels = {c->value};
  } else {
    const auto& se = std::get<SampledExterior>(ext.variant());
    for (int a = 0; a < lat.dim(); ++a)
      if (lat.box_lo(a) > -se.r_ext || lat.box_hi(a) < se.r_ext)
        throw LatticeError("lattice box must contain the sampled exterior ball B_{r_ext}");
    out.levels = {se.outside};
  }
  const std::size_t nl = out.levels.size();
  out.density.assign(cells.size() * nl, 0.0);

  if (lat.dim() == 1) {
    const double a = lat.box_lo(0), b = lat.box_hi(0);
    const double inf = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < cells.size(); ++k) {
      const double x0 = lat.center(cells[k])[0] - 0.5 * h, x1 = x0 + h;
      auto mass = [&](double y0, double y1) {
        return detail::interval_mass_1d(kern.scheme(), s, x0, x1, y0, y1);
      };
      const double total = mass(-inf, a) + mass(b, inf);
      if (!hs) {
        out.density[k] = total;
        continue;
      }
      // Part of the exterior where y > threshold.
      const double t = hs->threshold;
      double plus = mass(std::max(b, t), inf);
      if (t < a) plus += mass(t, a);
      out.density[k * 2] = plus;
      out.density[k * 2 + 1] = total - plus;
    }
    return out;
  }

  const double X0 = lat.box_lo(0), X1 = lat.box_hi(0), Y0 = lat.box_lo(1), Y1 = lat.box_hi(1);
  const double tol = std::min(1e-9, kern.quad_tol());
  const std::array<double, 4> box{X0, X1, Y0, Y1};
  if (kern.scheme() == WeightScheme::CellCenter) {
    parallel_for(cells.size(), [&](std::size_t k) {
      const Point x = lat.center(cells[k]);
      const auto [total, plus] = detail::outer_density(x, {box}, hs, s, tol);
      if (!hs) {
        out.density[k] = total;
      } else {
        out.density[k * 2] = plus;
        out.density[k * 2 + 1] = total - plus;
      }
    });
    return out;
  }

  // Cell-pair scheme: cell averages are needed. Exterior cells within the near
  // radius are handled as virtual cells with exact pair weights; what lies
  // beyond is smooth over the cell and averaged with a 4x4 Gauss rule.
  const long nr = kern.near_radius();
  const double vol = lat.cell_volume();
  const double sc = kern.scale();
  static constexpr std::array<double, 4> gx{-0.8611363115940526, -0.3399810435848563,
                                            0.3399810435848563, 0.8611363115940526};
  static constexpr std::array<double, 4> gw{0.3478548451374538, 0.6521451548625461,
                                            0.6521451548625461, 0.3478548451374538};
  parallel_for(cells.size(), [&](std::size_t k) {
    const CellCoord c = lat.coord(cells[k]);
    double total = 0.0, plus = 0.0;
    for (long dy = -nr; dy <= nr; ++dy)
      for (long dx = -nr; dx <= nr; ++dx) {
        const CellCoord v{c[0] + dx, c[1] + dy};
        if (v[0] >= lat.lo()[0] && v[0] < lat.hi()[0] && v[1] >= lat.lo()[1] && v[1] < lat.hi()[1])
          continue;
        const double w = sc * kern.near_unit_weight(dx, dy) / vol;
        total += w;
        const Point yc{(v[0] + 0.5) * h, (v[1] + 0.5) * h};
        if (hs && ext(yc) == hs->sign) plus += w;
      }
    const std::array<double, 4> near_box{(c[0] - nr) * h, (c[0] + nr + 1) * h, (c[1] - nr) * h,
                                          (c[1] + nr + 1) * h};
    const bool inside = near_box[0] >= X0 && near_box[1] <= X1 && near_box[2] >= Y0 && near_box[3] <= Y1;
    const Point xc = lat.center(cells[k]);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) {
        const Point x{xc[0] + 0.5 * h * gx[a], xc[1] + 0.5 * h * gx[b]};
        const auto [t, p] = inside ? detail::outer_density(x, {box}, hs, s, tol)
                                   : detail::outer_density(x, {box, near_box}, hs, s, tol);
        const double wt = 0.25 * gw[a] * gw[b];
        total += wt * t;
        plus += wt * p;
      }
    if (!hs) {
      out.density[k] = total;
    } else {
      out.density[k * 2] = plus;
      out.density[k * 2 + 1] = total - plus;
    }
  });
  return out;
}

/// Kernel mass of the whole complement of the box seen from each listed cell.
inline std::vector<double> exterior_mass(const KernelTable& kern, std::span<const std::size_t> cells) {
  const TailTerms t = exterior_tail(kern, ExteriorData::constant(1.0), cells);
  return t.density;
}

// ---------------------------------------------------------------------------
// Energies.

/// Discrete energy  kinetic_scale * K(u; omega) + h^n sum_{omega} W(u_i)  as a
/// function of the values on omega, with everything outside omega frozen.
///
/// Pairs (i in omega, j fixed) are folded into per-cell constants
/// a_i (x_i - m_i)^2 + q_i, so an evaluation costs |omega|^2 pair visits.
class EnergyModel {
 public:
  EnergyModel(const KernelTable& kern, const DoubleWell* pot, const ScalarField& u,
              const CellSet& omega, double kinetic_scale = 1.0)
      : kern_(&kern), pot_(pot), base_(u), kinetic_scale_(kinetic_scale) {
    require_same_lattice(kern.lattice(), u.lattice(), "energy evaluation (field)");
    require_same_lattice(kern.lattice(), omega.lattice(), "energy evaluation (domain)");
    cells_ = omega.indices();
    pos_.resize(cells_.size());
    for (std::size_t k = 0; k < cells_.size(); ++k) pos_[k] = kern.position(cells_[k]);

    const Lattice& lat = kern.lattice();
    const double vol = lat.cell_volume();
    const TailTerms tail = exterior_tail(kern, u.exterior(), cells_);
    std::vector<std::size_t> fixed;
    for (std::size_t j = 0; j < lat.size(); ++j)
      if (!omega.contains(j)) fixed.push_back(j);
    std::vector<long> fixed_pos(fixed.size());
    std::vector<double> fixed_val(fixed.size());
    for (std::size_t f = 0; f < fixed.size(); ++f) {
      fixed_pos[f] = kern.position(fixed[f]);
      fixed_val[f] = u[fixed[f]];
    }
    a_.assign(cells_.size(), 0.0);
    m_.assign(cells_.size(), 0.0);
    q_.assign(cells_.size(), 0.0);
    const double* w0 = kern.origin();
    const std::size_t nl = tail.levels.size();
    parallel_for(cells_.size(), [&](std::size_t k) {
      const long p = pos_[k];
      double a = 0.0, b = 0.0;
      for (std::size_t f = 0; f < fixed.size(); ++f) {
        const double w = w0[p - fixed_pos[f]];
        a += w;
        b += w * fixed_val[f];
      }
      for (std::size_t l = 0; l < nl; ++l) {
        const double w = vol * tail.density[k * nl + l];
        a += w;
        b += w * tail.levels[l];
      }
      const double m = a > 0.0 ? b / a : 0.0;
      double q = 0.0;
      for (std::size_t f = 0; f < fixed.size(); ++f) {
        const double d = fixed_val[f] - m;
        q += w0[p - fixed_pos[f]] * d * d;
      }
      for (std::size_t l = 0; l < nl; ++l) {
        const double d = tail.levels[l] - m;
        q += vol * tail.density[k * nl + l] * d * d;
      }
      a_[k] = a;
      m_[k] = m;
      q_[k] = q;
    });
  }

  const std::vector<std::size_t>& cells() const { return cells_; }
  const KernelTable& kernel() const { return *kern_; }
  const ScalarField& base() const { return base_; }

  std::vector<double> gather(const ScalarField& u) const {
    std::vector<double> x(cells_.size());
    for (std::size_t k = 0; k < cells_.size(); ++k) x[k] = u[cells_[k]];
    return x;
  }
  ScalarField scatter(std::span<const double> x) const {
    ScalarField out = base_;
    for (std::size_t k = 0; k < cells_.size(); ++k) out.set(cells_[k], x[k]);
    return out;
  }

  /// K(u; omega) (without kinetic_scale).
  double kinetic(std::span<const double> x) const {
    std::vector<double> per(cells_.size());
    const double* w0 = kern_->origin();
    parallel_for(cells_.size(), [&](std::size_t k) {
      const long p = pos_[k];
      const double xi = x[k];
      double in = 0.0;
      for (std::size_t j = 0; j < cells_.size(); ++j) {
        const double d = xi - x[j];
        in += w0[p - pos_[j]] * d * d;
      }
      const double dm = xi - m_[k];
      per[k] = 0.5 * in + a_[k] * dm * dm + q_[k];
    });
    return compensated_sum(per);
  }

  double potential(std::span<const double> x) const {
    if (!pot_) return 0.0;
    CompensatedSum acc;
    for (double v : x) acc.add(pot_->value(v));
    return kern_->lattice().cell_volume() * acc.value();
  }

  double energy(std::span<const double> x) const {
    return kinetic_scale_ * kinetic(x) + potential(x);
  }

  /// Energy plus its gradient with respect to the omega values.
  double energy_and_gradient(std::span<const double> x, std::vector<double>& grad) const {
    grad.assign(cells_.size(), 0.0);
    std::vector<double> per(cells_.size());
    const double* w0 = kern_->origin();
    const double vol = kern_->lattice().cell_volume();
    parallel_for(cells_.size(), [&](std::size_t k) {
      const long p = pos_[k];
      const double xi = x[k];
      double in = 0.0, g = 0.0;
      for (std::size_t j = 0; j < cells_.size(); ++j) {
        const double d = xi - x[j];
        const double wd = w0[p - pos_[j]] * d;
        g += wd;
        in += wd * d;
      }
      const double dm = xi - m_[k];
      per[k] = kinetic_scale_ * (0.5 * in + a_[k] * dm * dm + q_[k]);
      grad[k] = kinetic_scale_ * 2.0 * (g + a_[k] * dm);
      if (pot_) {
        per[k] += vol * pot_->value(xi);
        grad[k] += vol * pot_->deriv(xi);
      }
    });
    return compensated_sum(per);
  }

 private:
  const KernelTable* kern_;
  const DoubleWell* pot_;
  ScalarField base_;
  double kinetic_scale_;
  std::vector<std::size_t> cells_;
  std::vector<long> pos_;
  std::vector<double> a_, m_, q_;
};

inline double gagliardo_K(const KernelTable& kern, const ScalarField& u, const CellSet& omega) {
  EnergyModel m(kern, nullptr, u, omega);
  return m.kinetic(m.gather(u));
}

inline double potential_term(const DoubleWell& pot, const ScalarField& u, const CellSet& omega) {
  require_same_lattice(u.lattice(), omega.lattice(), "potential term");
  CompensatedSum acc;
  for (std::size_t i : omega.indices()) acc.add(pot.value(u[i]));
  return u.lattice().cell_volume() * acc.value();
}

inline double energy_E(const KernelTable& kern, const DoubleWell& pot, const ScalarField& u,
                       const CellSet& omega) {
  return gagliardo_K(kern, u, omega) + potential_term(pot, u, omega);
}

inline void check_eps(double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw ParameterError("eps must be > 0");
}

inline double energy_J_eps(const KernelTable& kern, const DoubleWell& pot, const ScalarField& u,
                           const CellSet& omega, double eps) {
  check_eps(eps);
  return std::pow(eps, 2.0 * kern.s()) * gagliardo_K(kern, u, omega) + potential_term(pot, u, omega);
}

/// Rescaling factor turning J_eps into F_eps, by regime of s.
inline double regime_factor(double eps, double s) {
  check_eps(eps);
  if (is_half(s)) {
    if (eps == 1.0) throw ParameterError("degenerate scaling: |eps log eps| = 0 at eps = 1 for s = 1/2");
    return 1.0 / std::abs(eps * std::log(eps));
  }
  return s < 0.5 ? std::pow(eps, -2.0 * s) : 1.0 / eps;
}

inline double energy_F_eps(const KernelTable& kern, const DoubleWell& pot, const ScalarField& u,
                           const CellSet& omega, double eps) {
  const double f = regime_factor(eps, kern.s());
  return f * energy_J_eps(kern, pot, u, omega, eps);
}

/// u(A, B) = sum_{i in A, j in B} w_ij (u_i - u_j)^2. With b_has_exterior the
/// region beyond the box (values from the exterior descriptor) is added to B.
inline double interaction_u(const KernelTable& kern, const ScalarField& u, const CellSet& A,
                            const CellSet& B, bool b_has_exterior = false) {
  require_same_lattice(kern.lattice(), u.lattice(), "interaction (field)");
  require_same_lattice(A.lattice(), B.lattice(), "interaction (sets)");
  require_same_lattice(kern.lattice(), A.lattice(), "interaction (sets)");
  const auto ai = A.indices();
  const auto bi = B.indices();
  std::vector<double> per(ai.size());
  TailTerms tail;
  if (b_has_exterior) tail = exterior_tail(kern, u.exterior(), ai);
  const double vol = kern.lattice().cell_volume();
  parallel_for(ai.size(), [&](std::size_t k) {
    const std::size_t i = ai[k];
    double acc = 0.0;
    for (std::size_t j : bi) {
      const double d = u[i] - u[j];
      acc += kern.weight(i, j) * d * d;
    }
    for (std::size_t l = 0; l < tail.levels.size(); ++l) {
      const double d = u[i] - tail.levels[l];
      acc += vol * tail.density[k * tail.levels.size() + l] * d * d;
    }
    per[k] = acc;
  });
  return compensated_sum(per);
}

/// Pointwise fractional Laplacian  sum_{j != i} w_ij (u_i - u_j) / h^n + tail,
/// the raw principal-value kernel integral (no normalization constant).
inline std::vector<double> frac_laplacian(const KernelTable& kern, const ScalarField& u,
                                          std::span<const std::size_t> cells) {
  require_same_lattice(kern.lattice(), u.lattice(), "fractional Laplacian");
  const Lattice& lat = kern.lattice();
  for (std::size_t i : cells)
    if (i >= lat.size()) throw LatticeError("cell index outside lattice box");
  const TailTerms tail = exterior_tail(kern, u.exterior(), cells);
  const double vol = lat.cell_volume();
  const std::size_t nl = tail.levels.size();
  std::vector<double> out(cells.size());
  parallel_for(cells.size(), [&](std::size_t k) {
    const std::size_t i = cells[k];
    double acc = 0.0;
    for (std::size_t j = 0; j < lat.size(); ++j) acc += kern.weight(i, j) * (u[i] - u[j]);
    acc /= vol;
    for (std::size_t l = 0; l < nl; ++l) acc += tail.density[k * nl + l] * (u[i] - tail.levels[l]);
    out[k] = acc;
  });
  return out;
}

/// int (f(y) - f(x)) |x - y|^{-1-2s} dy in the principal-value sense for a 1D
/// profile with f == far_value on |y| >= far_radius. `kinks` lists points where
/// f is not smooth; the symmetrized integrand is split there.
template <class F>
double fractional_integral_1d(F&& f, double x, double s, const std::vector<double>& kinks,
                              double far_value, double far_radius, double tol = 1e-10) {
  const double fx = f(x);
  const double T = far_radius + std::abs(x);
  std::vector<double> breaks;
  for (double k : kinks) breaks.push_back(std::abs(k - x));
  breaks.push_back(std::abs(far_radius - x));
  breaks.push_back(std::abs(-far_radius - x));
  // Below t_min the second difference is round-off; its true contribution is
  // O(t_min^{2-2s}) for a profile that is smooth at x.
  const double t_min = 1e-9 * (1.0 + std::abs(x));
  auto g = [&](double t) {
    return (f(x + t) + f(x - t) - 2.0 * fx) * std::pow(t, -1.0 - 2.0 * s);
  };
  std::vector<double> inner;
  for (double b : breaks)
    if (b > t_min && b < T) inner.push_back(b);
  const double body = quad::piecewise(g, t_min, T, inner, tol);
  const double tail = 2.0 * (far_value - fx) * std::pow(T, -2.0 * s) / (2.0 * s);
  return body + tail;
}

}  // namespace fraclab
