#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "fraclab/common.hpp"

namespace fraclab {

using Point = std::array<double, 2>;  // second coordinate unused when dim == 1
using CellCoord = std::array<long, 2>;

inline double norm(const Point& p, int dim) {
  return dim == 1 ? std::abs(p[0]) : std::hypot(p[0], p[1]);
}

/// Regular cell grid covering the box [lo*h, hi*h) on each axis.
///
/// Cell with integer coordinate c has center (c + 1/2) h, so no center ever
/// sits on a coordinate hyperplane. Cells are stored x-fastest.
class Lattice {
 public:
  Lattice() = default;

  Lattice(int dim, double h, CellCoord lo, CellCoord hi) : dim_(dim), h_(h), lo_(lo), hi_(hi) {
    if (dim != 1 && dim != 2) throw ParameterError("lattice dim must be 1 or 2");
    if (!(h > 0.0) || !std::isfinite(h)) throw ParameterError("lattice spacing must be > 0");
    if (dim == 1) {
      lo_[1] = 0;
      hi_[1] = 1;
    }
    for (int a = 0; a < dim; ++a) {
      if (hi_[a] <= lo_[a]) throw ParameterError("lattice requires hi > lo on every axis");
    }
  }

  static Lattice line(double h, long lo, long hi) { return Lattice(1, h, {lo, 0}, {hi, 1}); }
  static Lattice square(double h, long lo, long hi) { return Lattice(2, h, {lo, lo}, {hi, hi}); }

  /// Symmetric box of half-width `half_cells` cells around the origin.
  static Lattice centered(int dim, double h, long half_cells) {
    return Lattice(dim, h, {-half_cells, dim == 2 ? -half_cells : 0},
                   {half_cells, dim == 2 ? half_cells : 1});
  }

  int dim() const { return dim_; }
  double h() const { return h_; }
  CellCoord lo() const { return lo_; }
  CellCoord hi() const { return hi_; }
  long extent(int axis) const { return hi_[axis] - lo_[axis]; }
  std::size_t size() const { return static_cast<std::size_t>(extent(0) * extent(1)); }
  double cell_volume() const { return dim_ == 1 ? h_ : h_ * h_; }

  std::size_t index(CellCoord c) const {
    return static_cast<std::size_t>((c[0] - lo_[0]) + extent(0) * (c[1] - lo_[1]));
  }
  CellCoord coord(std::size_t idx) const {
    const long i = static_cast<long>(idx);
    return {lo_[0] + i % extent(0), lo_[1] + i / extent(0)};
  }
  Point center(std::size_t idx) const {
    const CellCoord c = coord(idx);
    return {(static_cast<double>(c[0]) + 0.5) * h_,
            dim_ == 2 ? (static_cast<double>(c[1]) + 0.5) * h_ : 0.0};
  }
  double box_lo(int axis) const { return static_cast<double>(lo_[axis]) * h_; }
  double box_hi(int axis) const { return static_cast<double>(hi_[axis]) * h_; }

  /// Cell containing p (half-open cells), or nullopt outside the box.
  std::optional<std::size_t> cell_of(const Point& p) const {
    CellCoord c{0, 0};
    for (int a = 0; a < dim_; ++a) {
      c[a] = static_cast<long>(std::floor(p[a] / h_));
      if (c[a] < lo_[a] || c[a] >= hi_[a]) return std::nullopt;
    }
    return index(c);
  }

  bool operator==(const Lattice& o) const {
    return dim_ == o.dim_ && h_ == o.h_ && lo_ == o.lo_ && hi_ == o.hi_;
  }

  std::string describe() const {
    std::ostringstream os;
    os << "dim=" << dim_ << " h=" << h_ << " box=[" << lo_[0] << "," << hi_[0] << ")";
    if (dim_ == 2) os << "x[" << lo_[1] << "," << hi_[1] << ")";
    return os.str();
  }

 private:
  int dim_ = 1;
  double h_ = 1.0;
  CellCoord lo_{0, 0};
  CellCoord hi_{1, 1};
};

inline void require_same_lattice(const Lattice& a, const Lattice& b, const char* what) {
  if (!(a == b)) throw LatticeError(std::string("mismatched lattices in ") + what);
}

/// Boolean voxel set on a lattice box.
class CellSet {
 public:
  CellSet() = default;
  explicit CellSet(Lattice lat) : lat_(std::move(lat)), members_(lat_.size(), 0) {}

  static CellSet full(const Lattice& lat) {
    CellSet s(lat);
    std::fill(s.members_.begin(), s.members_.end(), 1);
    return s;
  }

  const Lattice& lattice() const { return lat_; }
  std::size_t size() const { return members_.size(); }
  bool contains(std::size_t i) const { return members_[i] != 0; }
  void set(std::size_t i, bool v = true) { members_[i] = v ? 1 : 0; }

  std::size_t count() const {
    return static_cast<std::size_t>(std::count(members_.begin(), members_.end(), 1));
  }
  double measure() const { return static_cast<double>(count()) * lat_.cell_volume(); }
  bool empty() const { return count() == 0; }

  std::vector<std::size_t> indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < members_.size(); ++i)
      if (members_[i]) out.push_back(i);
    return out;
  }

  CellSet complement() const {
    CellSet c(lat_);
    for (std::size_t i = 0; i < members_.size(); ++i) c.members_[i] = members_[i] ? 0 : 1;
    return c;
  }
  CellSet united(const CellSet& o) const {
    require_same_lattice(lat_, o.lat_, "CellSet union");
    CellSet c(lat_);
    for (std::size_t i = 0; i < members_.size(); ++i) c.members_[i] = members_[i] | o.members_[i];
    return c;
  }
  CellSet intersected(const CellSet& o) const {
    require_same_lattice(lat_, o.lat_, "CellSet intersection");
    CellSet c(lat_);
    for (std::size_t i = 0; i < members_.size(); ++i) c.members_[i] = members_[i] & o.members_[i];
    return c;
  }
  CellSet minus(const CellSet& o) const {
    require_same_lattice(lat_, o.lat_, "CellSet difference");
    CellSet c(lat_);
    for (std::size_t i = 0; i < members_.size(); ++i)
      c.members_[i] = members_[i] && !o.members_[i];
    return c;
  }
  bool disjoint(const CellSet& o) const {
    require_same_lattice(lat_, o.lat_, "CellSet disjointness");
    for (std::size_t i = 0; i < members_.size(); ++i)
      if (members_[i] && o.members_[i]) return false;
    return true;
  }
  bool subset_of(const CellSet& o) const {
    require_same_lattice(lat_, o.lat_, "CellSet inclusion");
    for (std::size_t i = 0; i < members_.size(); ++i)
      if (members_[i] && !o.members_[i]) return false;
    return true;
  }

  bool operator==(const CellSet& o) const { return lat_ == o.lat_ && members_ == o.members_; }

 private:
  Lattice lat_;
  std::vector<std::uint8_t> members_;
};

inline double measure(const CellSet& set) { return set.measure(); }

// Exterior data. Values are fixed outside the minimization domain and are
// described analytically, never stored as an infinite grid.

struct ConstantExterior {
  double value = 1.0;
};

/// value = sign where x[axis] > threshold, -sign elsewhere.
struct HalfspaceSign {
  int axis = 0;
  double threshold = 0.0;
  double sign = 1.0;
};

/// Explicit samples inside the ball B_{r_ext} (nearest-cell lookup on
/// `grid`), constant `outside` (+1 or -1) beyond it.
struct SampledExterior {
  Lattice grid;
  std::vector<double> values;
  double r_ext = 0.0;
  double outside = 1.0;
};

class ExteriorData {
 public:
  using Variant = std::variant<ConstantExterior, HalfspaceSign, SampledExterior>;

  ExteriorData() : v_(ConstantExterior{1.0}) {}
  ExteriorData(ConstantExterior c) : v_(c) { check_range(c.value); }
  ExteriorData(HalfspaceSign hs) : v_(hs) {
    if (hs.sign != 1.0 && hs.sign != -1.0) throw ParameterError("halfspace sign must be +1 or -1");
  }
  ExteriorData(SampledExterior s) : v_(std::move(s)) {
    const auto& se = std::get<SampledExterior>(v_);
    if (se.outside != 1.0 && se.outside != -1.0)
      throw ParameterError("sampled exterior must be +1 or -1 beyond r_ext");
    if (se.values.size() != se.grid.size())
      throw ParameterError("sampled exterior values do not match its grid");
    for (double x : se.values) check_range(x);
  }

  static ExteriorData constant(double v) { return ExteriorData(ConstantExterior{v}); }
  static ExteriorData halfspace(int axis = 0, double threshold = 0.0, double sign = 1.0) {
    return ExteriorData(HalfspaceSign{axis, threshold, sign});
  }

  const Variant& variant() const { return v_; }

  double operator()(const Point& p) const {
    return std::visit(
        [&](const auto& d) -> double {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, ConstantExterior>) {
            return d.value;
          } else if constexpr (std::is_same_v<T, HalfspaceSign>) {
            return p[d.axis] > d.threshold ? d.sign : -d.sign;
          } else {
            if (norm(p, d.grid.dim()) >= d.r_ext) return d.outside;
            const auto idx = d.grid.cell_of(p);
            return idx ? d.values[*idx] : d.outside;
          }
        },
        v_);
  }

  /// Mirror image under x -> -x (all axes).
  ExteriorData reflected() const {
    return std::visit(
        [](const auto& d) -> ExteriorData {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, ConstantExterior>) {
            return ExteriorData(d);
          } else if constexpr (std::is_same_v<T, HalfspaceSign>) {
            // x > t  <=>  -x < -t; the boundary cell flips to the other side,
            // which never matters at cell centers.
            return ExteriorData(HalfspaceSign{d.axis, -d.threshold, -d.sign});
          } else {
            throw ParameterError("reflection of sampled exterior data is not supported");
          }
        },
        v_);
  }

 private:
  static void check_range(double v) {
    if (!(v >= -1.0 && v <= 1.0)) throw DomainError("exterior value outside [-1,1]");
  }
  Variant v_;
};

/// Cell values of u on the lattice box plus the exterior descriptor beyond it.
class ScalarField {
 public:
  ScalarField() = default;

  /// All cells initialized from the exterior descriptor at their centers.
  ScalarField(Lattice lat, ExteriorData ext) : lat_(std::move(lat)), ext_(std::move(ext)) {
    values_.resize(lat_.size());
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] = ext_(lat_.center(i));
  }

  ScalarField(Lattice lat, std::vector<double> values, ExteriorData ext)
      : lat_(std::move(lat)), values_(std::move(values)), ext_(std::move(ext)) {
    if (values_.size() != lat_.size()) throw ParameterError("field size does not match lattice");
    for (double v : values_)
      if (!(v >= -1.0 && v <= 1.0)) throw DomainError("field value outside [-1,1]");
  }

  const Lattice& lattice() const { return lat_; }
  const ExteriorData& exterior() const { return ext_; }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  void set(std::size_t i, double v) {
    if (!(v >= -1.0 && v <= 1.0)) throw DomainError("field value outside [-1,1]");
    values_[i] = v;
  }

  double at(const Point& p) const {
    const auto idx = lat_.cell_of(p);
    return idx ? values_[*idx] : ext_(p);
  }

  ScalarField negated() const {
    ScalarField out = *this;
    for (double& v : out.values_) v = -v;
    out.ext_ = negate(ext_);
    return out;
  }

 private:
  static ExteriorData negate(const ExteriorData& e) {
    return std::visit(
        [](const auto& d) -> ExteriorData {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, ConstantExterior>) {
            return ExteriorData(ConstantExterior{-d.value});
          } else if constexpr (std::is_same_v<T, HalfspaceSign>) {
            return ExteriorData(HalfspaceSign{d.axis, d.threshold, -d.sign});
          } else {
            SampledExterior c = d;
            for (double& v : c.values) v = -v;
            c.outside = -c.outside;
            return ExteriorData(std::move(c));
          }
        },
        e.variant());
  }

  Lattice lat_;
  std::vector<double> values_;
  ExteriorData ext_;
};

/// Cells whose centers lie strictly inside the ball.
inline CellSet ball_mask(const Lattice& lat, const Point& center, double radius) {
  if (!(radius >= 0.0)) throw ParameterError("ball radius must be >= 0");
  for (int a = 0; a < lat.dim(); ++a) {
    const double need_lo = center[a] - radius;
    const double need_hi = center[a] + radius;
    if (need_lo < lat.box_lo(a) || need_hi > lat.box_hi(a)) {
      const double pad = std::max(lat.box_lo(a) - need_lo, need_hi - lat.box_hi(a));
      std::ostringstream os;
      os << "ball of radius " << radius << " does not fit the lattice box on axis " << a
         << "; requires padding of " << std::ceil(pad / lat.h()) << " cells";
      throw LatticeError(os.str());
    }
  }
  CellSet s(lat);
  for (std::size_t i = 0; i < lat.size(); ++i) {
    const Point c = lat.center(i);
    Point d{c[0] - center[0], c[1] - center[1]};
    if (norm(d, lat.dim()) < radius) s.set(i);
  }
  return s;
}

inline CellSet ball_mask(const Lattice& lat, double radius) { return ball_mask(lat, {0.0, 0.0}, radius); }

/// Radial ramp: -1 on B_{R+1}, +1 beyond B_{R+2}, linear between.
inline double psi_value(double radius_of_x, double R) {
  return -1.0 + 2.0 * std::min(std::max(radius_of_x - R - 1.0, 0.0), 1.0);
}

inline ScalarField psi_field(const Lattice& lat, double R) {
  if (!(R > 0.0)) throw ParameterError("psi_field requires R > 0");
  (void)ball_mask(lat, R + 2.0);  // containment check
  std::vector<double> vals(lat.size());
  for (std::size_t i = 0; i < lat.size(); ++i) vals[i] = psi_value(norm(lat.center(i), lat.dim()), R);
  return ScalarField(lat, std::move(vals), ExteriorData::constant(1.0));
}

}  // namespace fraclab
