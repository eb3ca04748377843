#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "fraclab/common.hpp"
#include "fraclab/lattice.hpp"
#include "fraclab/nonlocal.hpp"

namespace fraclab {

/// L(A, D) = sum_{i in A, j in D} w_ij. With d_has_exterior the region beyond
/// the box is part of D.
inline double L_interaction(const KernelTable& kern, const CellSet& A, const CellSet& D,
                            bool d_has_exterior = false) {
  require_same_lattice(A.lattice(), D.lattice(), "L(A,D)");
  require_same_lattice(kern.lattice(), A.lattice(), "L(A,D)");
  if (!A.disjoint(D)) throw PreconditionError("L(A,D) needs disjoint sets");
  const auto ai = A.indices();
  const auto di = D.indices();
  std::vector<double> ext;
  if (d_has_exterior) ext = exterior_mass(kern, ai);
  const double vol = kern.lattice().cell_volume();
  const double* w0 = kern.origin();
  std::vector<long> dpos(di.size());
  for (std::size_t k = 0; k < di.size(); ++k) dpos[k] = kern.position(di[k]);
  std::vector<double> per(ai.size());
  parallel_for(ai.size(), [&](std::size_t k) {
    const long p = kern.position(ai[k]);
    CompensatedSum acc;
    for (long q : dpos) acc.add(w0[p - q]);
    if (d_has_exterior) acc.add(vol * ext[k]);
    per[k] = acc.value();
  });
  return compensated_sum(per);
}

/// Number of occupied lines parallel to `axis` (the shadow on the orthogonal
/// hyperplane, in cells).
inline std::size_t shadow_count(const CellSet& set, int axis) {
  const Lattice& lat = set.lattice();
  if (axis < 0 || axis >= lat.dim()) throw ParameterError("projection axis out of range");
  if (lat.dim() == 1) return set.empty() ? 0 : 1;
  const int other = 1 - axis;
  std::vector<char> seen(static_cast<std::size_t>(lat.extent(other)), 0);
  for (std::size_t i : set.indices()) seen[lat.coord(i)[other] - lat.lo()[other]] = 1;
  return static_cast<std::size_t>(std::count(seen.begin(), seen.end(), 1));
}

/// (dim-1)-measure of the projection along `axis`.
inline double project_measure(const CellSet& set, int axis) {
  const Lattice& lat = set.lattice();
  return static_cast<double>(shadow_count(set, axis)) * std::pow(lat.h(), lat.dim() - 1);
}

struct LoomisWhitneyReport {
  std::uint64_t count = 0;
  std::array<std::uint64_t, 2> shadows{};
  std::uint64_t lhs = 0;  // count^{n-1}
  std::uint64_t rhs = 0;  // product of shadow counts
  bool holds = false;     // lhs <= rhs
  int best_axis = 0;      // axis of the largest shadow
  bool best_axis_holds = false;  // shadow^n >= count^{n-1}
};

/// Both Loomis-Whitney statements checked in integer arithmetic on cell counts
/// (the powers of h agree on both sides).
inline LoomisWhitneyReport check_loomis_whitney(const CellSet& set) {
  if (set.empty()) throw ParameterError("Loomis-Whitney check needs a nonempty set");
  const int n = set.lattice().dim();
  LoomisWhitneyReport r;
  r.count = set.count();
  r.rhs = 1;
  for (int a = 0; a < n; ++a) {
    r.shadows[static_cast<std::size_t>(a)] = shadow_count(set, a);
    r.rhs *= r.shadows[static_cast<std::size_t>(a)];
    if (r.shadows[static_cast<std::size_t>(a)] > r.shadows[static_cast<std::size_t>(r.best_axis)]) r.best_axis = a;
  }
  r.lhs = n == 1 ? 1 : r.count;
  r.holds = r.lhs <= r.rhs;
  std::uint64_t best_pow = 1;
  for (int a = 0; a < n; ++a) best_pow *= r.shadows[static_cast<std::size_t>(r.best_axis)];
  r.best_axis_holds = best_pow >= r.lhs;
  return r;
}

struct GmtReport {
  double measure_A = 0.0;
  double measure_B = 0.0;
  double measure_B_used = 0.0;  // after the one-cell floor, where it applies
  int regime = 1;               // 1: |B| <= c|A|, 2: |B| > c|A|
  double L = 0.0;
  double bound = 0.0;  // the regime's expression without the constant
  double ratio = 0.0;  // L / bound, the empirical constant
  bool b_floored = false;
};

/// Classifies (A, B) by c_probe and returns L(A, D) / bound with D the
/// complement of A u B, the exterior of the box included.
inline GmtReport check_gmt(const KernelTable& kern, const CellSet& A, const CellSet& B,
                           double c_probe) {
  require_same_lattice(A.lattice(), B.lattice(), "GMT check");
  if (!A.disjoint(B)) throw PreconditionError("A and B must be disjoint");
  if (A.empty()) throw PreconditionError("|A| must be > 0");
  if (!(c_probe > 0.0)) throw ParameterError("c_probe must be > 0");
  const int n = A.lattice().dim();
  const double s = kern.s();
  GmtReport r;
  r.measure_A = A.measure();
  r.measure_B = B.measure();
  r.measure_B_used = r.measure_B;
  r.L = L_interaction(kern, A, A.united(B).complement(), true);
  const double a = r.measure_A;
  r.regime = r.measure_B <= c_probe * a ? 1 : 2;
  if (r.regime == 1 && s >= 0.5 && r.measure_B == 0.0) {
    r.measure_B_used = A.lattice().cell_volume();
    r.b_floored = true;
  }
  const double b = r.measure_B_used;
  if (r.regime == 2) {
    r.bound = std::pow(a, (n - 2.0 * s) / n) * std::pow(b / a, -2.0 * s / n);
  } else if (s < 0.5) {
    r.bound = std::pow(a, (n - 2.0 * s) / n);
  } else if (is_half(s)) {
    r.bound = std::pow(a, (n - 1.0) / n) * std::log(a / b);
  } else {
    r.bound = std::pow(a, (n - 2.0 * s) / n) * std::pow(b / a, 1.0 - 2.0 * s);
  }
  r.ratio = r.L / r.bound;
  return r;
}

struct GmtLocalReport {
  double measure_Q = 0.0;
  double measure_A = 0.0;
  double measure_D = 0.0;
  double measure_B = 0.0;
  double measure_B_used = 0.0;
  bool b_floored = false;
  double L = 0.0;
  double bound = 0.0;
  double ratio = 0.0;
};

/// Localized estimate inside a cube Q for s >= 1/2; B = Q minus (A u D).
inline GmtLocalReport check_gmt_local(const KernelTable& kern, const CellSet& A, const CellSet& D,
                                      const CellSet& Q, double sigma) {
  const double s = kern.s();
  if (s < 0.5) throw ParameterError("localized GMT check is for s in [1/2, 1)");
  require_same_lattice(A.lattice(), Q.lattice(), "localized GMT check");
  require_same_lattice(D.lattice(), Q.lattice(), "localized GMT check");
  if (!A.subset_of(Q) || !D.subset_of(Q)) throw PreconditionError("A and D must lie in Q");
  if (!A.disjoint(D)) throw PreconditionError("A and D must be disjoint");
  if (!(sigma > 0.0 && sigma <= 0.5)) throw ParameterError("sigma must lie in (0, 1/2]");
  const int n = Q.lattice().dim();
  GmtLocalReport r;
  r.measure_Q = Q.measure();
  r.measure_A = A.measure();
  r.measure_D = D.measure();
  if (r.measure_A < sigma * r.measure_Q)
    throw PreconditionError("|A| < sigma |Q|: set A is too small for the localized estimate");
  if (r.measure_D < sigma * r.measure_Q)
    throw PreconditionError("|D| < sigma |Q|: set D is too small for the localized estimate");
  r.measure_B = Q.minus(A).minus(D).measure();
  r.measure_B_used = r.measure_B;
  if (r.measure_B == 0.0) {
    r.measure_B_used = Q.lattice().cell_volume();
    r.b_floored = true;
  }
  r.L = L_interaction(kern, A, D);
  const double q = r.measure_Q, b = r.measure_B_used;
  r.bound = is_half(s) ? std::pow(q, (n - 1.0) / n) * std::log(q / b)
                       : std::pow(q, (n - 2.0 * s) / n) * std::pow(q / b, 2.0 * s - 1.0);
  r.ratio = r.L / r.bound;
  return r;
}

struct SobolevReport {
  double lhs = 0.0;       // int over the complement of E of |x - y|^{-(n+2s)} dy
  double measure = 0.0;   // |E|
  double constant = 0.0;  // lhs |E|^{2s/n}
};

/// Kernel mass of the complement of E seen from cell x (box part plus the
/// exterior of the box).
inline SobolevReport sobolev_set_bound(const KernelTable& kern, const CellSet& E, std::size_t x) {
  require_same_lattice(kern.lattice(), E.lattice(), "Sobolev set bound");
  const Lattice& lat = kern.lattice();
  if (x >= lat.size()) throw LatticeError("query cell outside lattice box");
  if (E.empty()) throw PreconditionError("|E| must be > 0");
  const double vol = lat.cell_volume();
  CompensatedSum acc;
  for (std::size_t j = 0; j < lat.size(); ++j)
    if (!E.contains(j)) acc.add(kern.weight(x, j));
  const std::vector<std::size_t> one{x};
  SobolevReport r;
  r.lhs = acc.value() / vol + exterior_mass(kern, one)[0];
  r.measure = E.measure();
  r.constant = r.lhs * std::pow(r.measure, 2.0 * kern.s() / lat.dim());
  return r;
}

/// Integrated form: sum over x in F of lhs(x) h^n, and its ratio to |F| |E|^{-2s/n}.
struct SobolevIntegratedReport {
  double integral = 0.0;
  double ratio = 0.0;
};

inline SobolevIntegratedReport sobolev_integrated(const KernelTable& kern, const CellSet& E,
                                                  const CellSet& F) {
  const auto cells = F.indices();
  if (cells.empty()) throw PreconditionError("|F| must be > 0");
  std::vector<double> per(cells.size());
  parallel_for(cells.size(), [&](std::size_t k) { per[k] = sobolev_set_bound(kern, E, cells[k]).lhs; });
  SobolevIntegratedReport r;
  r.integral = compensated_sum(per) * kern.lattice().cell_volume();
  const int n = kern.lattice().dim();
  r.ratio = r.integral / (F.measure() * std::pow(E.measure(), -2.0 * kern.s() / n));
  return r;
}

/// l(A): |A|^{(1-2s)/n} for s < 1/2, log |A| for s = 1/2, 1 for s > 1/2.
inline double ell_scale(double measure_A, double s, int dim) {
  if (!(measure_A > 0.0)) throw DomainError("ell_scale needs |A| > 0");
  if (!(s > 0.0 && s < 1.0)) throw ParameterError("s must lie in (0,1)");
  if (dim != 1 && dim != 2) throw ParameterError("dim must be 1 or 2");
  if (is_half(s)) {
    if (!(measure_A > 1.0)) throw DomainError("ell_scale at s = 1/2 needs |A| > 1");
    return std::log(measure_A);
  }
  return s < 0.5 ? std::pow(measure_A, (1.0 - 2.0 * s) / dim) : 1.0;
}

// ---------------------------------------------------------------------------
// Random voxel sets and refinement.

/// Union of k random axis-aligned rectangles, k uniform in [k_min, k_max],
/// inside the box shrunk by `margin` cells, side lengths in [1, max_side].
inline CellSet random_rectangles(const Lattice& lat, std::mt19937_64& rng, int k_min, int k_max,
                                 long max_side, long margin) {
  if (k_min < 1 || k_max < k_min || max_side < 1 || margin < 0)
    throw ParameterError("bad random rectangle parameters");
  const int n = lat.dim();
  for (int a = 0; a < n; ++a)
    if (lat.extent(a) - 2 * margin < 1) throw LatticeError("margin leaves no room for rectangles");
  CellSet out(lat);
  std::uniform_int_distribution<int> kd(k_min, k_max);
  std::uniform_int_distribution<long> sd(1, max_side);
  const int k = kd(rng);
  for (int r = 0; r < k; ++r) {
    CellCoord lo{0, 0}, hi{1, 1};
    for (int a = 0; a < n; ++a) {
      const long lo_a = lat.lo()[a] + margin, hi_a = lat.hi()[a] - margin;
      const long side = std::min(sd(rng), hi_a - lo_a);
      std::uniform_int_distribution<long> pd(lo_a, hi_a - side);
      lo[a] = pd(rng);
      hi[a] = lo[a] + side;
    }
    for (long y = lo[1]; y < hi[1]; ++y)
      for (long x = lo[0]; x < hi[0]; ++x) out.set(lat.index({x, y}));
  }
  return out;
}

struct SetPair {
  CellSet A;
  CellSet B;
};

/// Random disjoint (A, B): A a union of 1..8 rectangles, B a union of
/// rectangles with A removed. Even-numbered cases get a small B (at most
/// 5% of |A| when possible), odd ones a large B.
inline std::vector<SetPair> gmt_corpus(const Lattice& lat, int count, std::uint64_t seed,
                                       long margin) {
  std::mt19937_64 rng(seed);
  std::vector<SetPair> out;
  const long side = std::max(2L, (lat.extent(0) - 2 * margin) / 3);
  while (static_cast<int>(out.size()) < count) {
    CellSet A = random_rectangles(lat, rng, 1, 8, side, margin);
    const bool small = out.size() % 2 == 0;
    CellSet B = random_rectangles(lat, rng, 1, small ? 2 : 6, small ? std::max(1L, side / 6) : side, margin)
                    .minus(A);
    if (small) {
      // Trim B to at most 5% of |A| in index order.
      const std::size_t cap = A.count() / 20;
      std::size_t kept = 0;
      for (std::size_t i : B.indices()) {
        if (kept >= cap) B.set(i, false);
        else ++kept;
      }
    }
    if (A.empty()) continue;
    out.push_back({std::move(A), std::move(B)});
  }
  return out;
}

/// Same box with h / 2; each cell splits into 2^dim cells.
inline Lattice refine(const Lattice& lat) {
  const CellCoord lo = lat.lo(), hi = lat.hi();
  if (lat.dim() == 1) return Lattice(1, 0.5 * lat.h(), {2 * lo[0], 0}, {2 * hi[0], 1});
  return Lattice(2, 0.5 * lat.h(), {2 * lo[0], 2 * lo[1]}, {2 * hi[0], 2 * hi[1]});
}

inline CellSet refine(const CellSet& set, const Lattice& fine) {
  const Lattice& lat = set.lattice();
  if (!(fine == refine(lat))) throw LatticeError("target lattice is not the refinement");
  CellSet out(fine);
  for (std::size_t i : set.indices()) {
    const CellCoord c = lat.coord(i);
    if (lat.dim() == 1) {
      out.set(fine.index({2 * c[0], 0}));
      out.set(fine.index({2 * c[0] + 1, 0}));
    } else {
      for (long dy = 0; dy < 2; ++dy)
        for (long dx = 0; dx < 2; ++dx) out.set(fine.index({2 * c[0] + dx, 2 * c[1] + dy}));
    }
  }
  return out;
}

/// Random set of exactly `cells` cells containing `x`, grown from a union of
/// rectangles by deleting or adding random cells.
inline CellSet random_set_with_measure(const Lattice& lat, std::mt19937_64& rng, std::size_t x,
                                       std::size_t cells, long margin) {
  CellSet E = random_rectangles(lat, rng, 1, 8, std::max(2L, lat.extent(0) / 3), margin);
  E.set(x);
  CellSet inner(lat);
  for (std::size_t i = 0; i < lat.size(); ++i) {
    const CellCoord c = lat.coord(i);
    bool ok = true;
    for (int a = 0; a < lat.dim(); ++a)
      ok = ok && c[a] >= lat.lo()[a] + margin && c[a] < lat.hi()[a] - margin;
    if (ok) inner.set(i);
  }
  if (cells > inner.count()) throw ParameterError("requested measure does not fit the box");
  while (E.count() > cells) {
    auto idx = E.indices();
    std::uniform_int_distribution<std::size_t> pick(0, idx.size() - 1);
    const std::size_t i = idx[pick(rng)];
    if (i != x) E.set(i, false);
  }
  while (E.count() < cells) {
    const auto idx = inner.minus(E).indices();
    std::uniform_int_distribution<std::size_t> pick(0, idx.size() - 1);
    E.set(idx[pick(rng)]);
  }
  return E;
}

}  // namespace fraclab
