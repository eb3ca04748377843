#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "fraclab/nonlocal.hpp"

using namespace fraclab;

namespace {

// Test-side quadrature, kept independent of the library's wrappers.
template <class F>
double gk(F f, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 20, 1e-12);
}

double tent(double t) { return std::max(0.0, 1.0 - std::abs(t)); }

// sum over d2 of the offset-(d1, d2) weights, integrated over the whole column.
double column_constant(double s) {
  return std::sqrt(std::numbers::pi) * std::tgamma(s + 0.5) / std::tgamma(s + 1.0);
}

}  // namespace

TEST(Kernel, SchemeSwitchesAtOneHalf) {
  EXPECT_EQ(scheme_for(0.25), WeightScheme::CellPair);
  EXPECT_EQ(scheme_for(0.5), WeightScheme::CellCenter);
  EXPECT_EQ(scheme_for(0.75), WeightScheme::CellCenter);
}

TEST(Kernel, OneDimCellPairMatchesQuadrature) {
  // int_0^1 int_d^{d+1} |x-y|^{-1-2s} = int tent(t - d) t^{-1-2s} dt
  boost::math::quadrature::tanh_sinh<double> ts;
  for (double s : {0.1, 0.25, 0.4}) {
    for (long d = 1; d <= 4; ++d) {
      auto rise = [&](double t) { return (t - (d - 1)) * std::pow(t, -1.0 - 2.0 * s); };
      auto fall = [&](double t) { return (d + 1 - t) * std::pow(t, -1.0 - 2.0 * s); };
      const double ref = (d == 1 ? ts.integrate([&](double t) { return std::pow(t, -2.0 * s); }, 0.0, 1.0)
                                 : ts.integrate(rise, d - 1.0, d + 0.0)) +
                         ts.integrate(fall, d + 0.0, d + 1.0);
      EXPECT_NEAR(detail::cell_pair_1d(d, s), ref, 1e-10 * ref) << "s=" << s << " d=" << d;
    }
  }
}

TEST(Kernel, OneDimCellCenterValues) {
  EXPECT_NEAR(detail::cell_center_1d(1, 0.5), 4.0 / 3.0, 1e-15);
  const double s = 0.75;
  const double ref = gk([&](double y) { return std::pow(y, -1.0 - 2.0 * s); }, 1.5, 2.5);
  EXPECT_NEAR(detail::cell_center_1d(2, s), ref, 1e-12);
}

TEST(Kernel, TableEntriesAndScaling) {
  const double s = 0.25;
  const KernelTable k1 = build_kernel(Lattice::line(1.0, -10, 10), s, 4);
  const KernelTable kh = build_kernel(Lattice::line(0.5, -10, 10), s, 4);
  EXPECT_EQ(k1.weight(3, 3), 0.0);
  EXPECT_DOUBLE_EQ(k1.weight(3, 4), detail::cell_pair_1d(1, s));
  EXPECT_DOUBLE_EQ(k1.weight(4, 3), k1.weight(3, 4));
  // Offset 7 is beyond the near radius: midpoint rule.
  EXPECT_DOUBLE_EQ(k1.weight(0, 7), std::pow(7.0, -1.5));
  EXPECT_DOUBLE_EQ(kh.weight(0, 7), 0.25 * std::pow(3.5, -1.5));
  for (std::size_t j = 1; j < 20; ++j)
    EXPECT_NEAR(kh.weight(0, j), std::pow(0.5, 0.5) * k1.weight(0, j), 1e-15);
}

TEST(Kernel, TwoDimSymmetric) {
  const KernelTable k = build_kernel(Lattice::square(1.0, -4, 4), 0.3, 3);
  const Lattice& lat = k.lattice();
  for (std::size_t i = 0; i < lat.size(); i += 5)
    for (std::size_t j = 0; j < lat.size(); j += 3) EXPECT_EQ(k.weight(i, j), k.weight(j, i));
  EXPECT_EQ(k.weight_offset(1, 2), k.weight_offset(2, 1));
  EXPECT_EQ(k.weight_offset(-1, 2), k.weight_offset(2, 1));
  EXPECT_EQ(k.weight_offset(0, 0), 0.0);
}

// Summing the 2D weights over a column gives the 1D weight times a Gamma
// constant; the part of the column beyond the near radius is integrated here.
TEST(Kernel, TwoDimCellPairColumnSumRule) {
  for (double s : {0.15, 0.25, 0.4}) {
    const int nr = 4;
    const auto near = compute_unit_near(2, s, nr, 1e-10);
    const long side = 2 * nr + 1;
    for (long d1 = 1; d1 <= 2; ++d1) {
      double sum = 0.0;
      for (long d2 = -nr; d2 <= nr; ++d2) sum += near[(d1 + nr) + side * (d2 + nr)];
      // Columns d2 > nr: sum of tents in z2 is a ramp rising on [nr, nr+1].
      auto inner = [&](double z1) {
        auto g = [&](double z2) {
          return std::clamp(z2 - nr, 0.0, 1.0) * std::pow(z1 * z1 + z2 * z2, -1.0 - s);
        };
        return gk(g, nr, nr + 1.0) + gk(g, nr + 1.0, std::numeric_limits<double>::infinity());
      };
      const double rest =
          2.0 * (gk([&](double z1) { return tent(z1 - d1) * inner(z1); }, d1 - 1.0, d1 + 0.0) +
                 gk([&](double z1) { return tent(z1 - d1) * inner(z1); }, d1 + 0.0, d1 + 1.0));
      const double expect = column_constant(s) * detail::cell_pair_1d(d1, s);
      EXPECT_NEAR(sum + rest, expect, 1e-7 * expect) << "s=" << s << " d1=" << d1;
    }
  }
}

TEST(Kernel, TwoDimCellCenterColumnSumRule) {
  for (double s : {0.5, 0.75}) {
    const int nr = 4;
    const auto near = compute_unit_near(2, s, nr, 1e-10);
    const long side = 2 * nr + 1;
    for (long d1 = 1; d1 <= 2; ++d1) {
      double sum = 0.0;
      for (long d2 = -nr; d2 <= nr; ++d2) sum += near[(d1 + nr) + side * (d2 + nr)];
      auto inner = [&](double z1) {
        return gk([&](double z2) { return std::pow(z1 * z1 + z2 * z2, -1.0 - s); }, nr + 0.5,
                  std::numeric_limits<double>::infinity());
      };
      const double rest = 2.0 * gk(inner, d1 - 0.5, d1 + 0.5);
      const double expect = column_constant(s) * detail::cell_center_1d(d1, s);
      EXPECT_NEAR(sum + rest, expect, 1e-7 * expect) << "s=" << s << " d1=" << d1;
    }
  }
}

TEST(Kernel, ParameterErrors) {
  const Lattice lat = Lattice::line(1.0, 0, 8);
  EXPECT_THROW(build_kernel(lat, 0.0), ParameterError);
  EXPECT_THROW(build_kernel(lat, 1.0), ParameterError);
  EXPECT_THROW(build_kernel(lat, 0.3, 1), ParameterError);
  EXPECT_THROW(build_kernel(lat, 0.3, 4, 0.0), ParameterError);
}

TEST(Tail, OneDimCellCenterClosedForm) {
  const double s = 0.5;
  const KernelTable k = build_kernel(Lattice::line(1.0, -5, 5), s);
  std::vector<std::size_t> cells{0, 4, 9};
  const auto m = exterior_mass(k, cells);
  for (std::size_t n = 0; n < cells.size(); ++n) {
    const double xc = k.lattice().center(cells[n])[0];
    EXPECT_NEAR(m[n], 1.0 / (xc + 5.0) + 1.0 / (5.0 - xc), 1e-14);
  }
}

// A piecewise-constant u is integrated exactly by the cell-pair scheme.
TEST(Gagliardo, OneDimStepIsExact) {
  const double s = 0.25;
  for (long half : {1L, 4L, 20L}) {
    const Lattice lat = Lattice::line(1.0, -half, half);
    const KernelTable k = build_kernel(lat, s, static_cast<int>(2 * half + 2));
    ScalarField u(lat, ExteriorData::constant(1.0));
    CellSet omega(lat);
    for (std::size_t i = 0; i < lat.size(); ++i)
      if (std::abs(lat.center(i)[0]) < 1.0) {
        omega.set(i);
        u.set(i, -1.0);
      }
    // 4 * 2 * int_{-1}^{1} int_1^inf (y-x)^{-3/2} dy dx = 32 sqrt(2)
    EXPECT_NEAR(gagliardo_K(k, u, omega), 32.0 * std::sqrt(2.0), 1e-9) << "half=" << half;
  }
}

TEST(Gagliardo, OneDimHalfspaceTailMatchesCells) {
  const double s = 0.25;
  const ExteriorData ext = ExteriorData::halfspace(0, 0.3, 1.0);
  auto K_on = [&](long half) {
    const Lattice lat = Lattice::line(0.5, -half, half);
    const KernelTable k = build_kernel(lat, s, static_cast<int>(2 * half + 2));
    ScalarField u(lat, ext);
    const CellSet omega = ball_mask(lat, 1.0);
    for (std::size_t i : omega.indices()) u.set(i, 0.2 * lat.center(i)[0]);
    return gagliardo_K(k, u, omega);
  };
  EXPECT_NEAR(K_on(2), K_on(40), 1e-10 * K_on(40));
}

// Box = omega uses only tails; the bigger box resolves the same exterior
// with near-range cell pairs. Both must agree to quadrature accuracy.
TEST(Gagliardo, TwoDimTailMatchesCells) {
  const double s = 0.25;
  for (const ExteriorData& ext : {ExteriorData::constant(1.0), ExteriorData::halfspace(1, 0.0, -1.0)}) {
    auto K_on = [&](long half) {
      const Lattice lat = Lattice::square(1.0, -half, half);
      const KernelTable k = build_kernel(lat, s, static_cast<int>(2 * half), 1e-9);
      ScalarField u(lat, ext);
      CellSet omega(lat);
      for (std::size_t i = 0; i < lat.size(); ++i) {
        const Point c = lat.center(i);
        if (std::max(std::abs(c[0]), std::abs(c[1])) < 1.0) {
          omega.set(i);
          u.set(i, -0.5 + 0.1 * c[0]);
        }
      }
      return gagliardo_K(k, u, omega);
    };
    const double small = K_on(1), big = K_on(4);
    EXPECT_NEAR(small, big, 1e-6 * big);
  }
}

TEST(Gagliardo, ConstantFieldHasZeroEnergy) {
  const Lattice lat = Lattice::square(0.5, -4, 4);
  const KernelTable k = build_kernel(lat, 0.5);
  const ScalarField u(lat, ExteriorData::constant(-1.0));
  const CellSet omega = ball_mask(lat, 1.5);
  EXPECT_EQ(gagliardo_K(k, u, omega), 0.0);
  EXPECT_EQ(energy_E(k, DoubleWell::quartic(), u, omega), 0.0);
}

TEST(Energy, ScalingsAndErrors) {
  const Lattice lat = Lattice::line(1.0, -6, 6);
  const DoubleWell w = DoubleWell::quartic();
  const CellSet omega = ball_mask(lat, 3.0);
  for (double s : {0.25, 0.5, 0.75}) {
    const KernelTable k = build_kernel(lat, s);
    ScalarField u(lat, ExteriorData::halfspace());
    for (std::size_t i : omega.indices()) u.set(i, std::tanh(lat.center(i)[0]));
    const double K = gagliardo_K(k, u, omega), P = potential_term(w, u, omega);
    EXPECT_NEAR(energy_E(k, w, u, omega), K + P, 1e-12 * (K + P));
    const double eps = 0.1;
    const double J = energy_J_eps(k, w, u, omega, eps);
    EXPECT_NEAR(J, std::pow(eps, 2 * s) * K + P, 1e-12 * J);
    const double f = s < 0.5 ? std::pow(eps, -2 * s) : (s == 0.5 ? 1.0 / (eps * std::log(1 / eps)) : 1 / eps);
    EXPECT_NEAR(energy_F_eps(k, w, u, omega, eps), f * J, 1e-12 * f * J);
    EXPECT_THROW(energy_J_eps(k, w, u, omega, 0.0), ParameterError);
  }
  const KernelTable kh = build_kernel(lat, 0.5);
  const ScalarField u(lat, ExteriorData::constant(1.0));
  EXPECT_THROW(energy_F_eps(kh, w, u, omega, 1.0), ParameterError);
}

TEST(Energy, LatticeMismatchIsAnError) {
  const KernelTable k = build_kernel(Lattice::line(1.0, -6, 6), 0.25);
  const Lattice other = Lattice::line(0.5, -6, 6);
  const ScalarField u(other, ExteriorData::constant(1.0));
  EXPECT_THROW(gagliardo_K(k, u, CellSet::full(other)), LatticeError);
}

TEST(Energy, GradientMatchesFiniteDifferences) {
  for (double s : {0.25, 0.75}) {
    const Lattice lat = Lattice::square(0.5, -5, 5);
    const KernelTable k = build_kernel(lat, s);
    const DoubleWell w = DoubleWell::quartic();
    ScalarField u(lat, ExteriorData::halfspace(0, 0.1, 1.0));
    const CellSet omega = ball_mask(lat, 1.6);
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> U(-0.8, 0.8);
    for (std::size_t i : omega.indices()) u.set(i, U(rng));
    const EnergyModel m(k, &w, u, omega);
    auto x = m.gather(u);
    std::vector<double> g;
    const double e = m.energy_and_gradient(x, g);
    EXPECT_NEAR(e, energy_E(k, w, u, omega), 1e-12 * e);
    const double step = 1e-6;
    for (std::size_t c = 0; c < x.size(); c += 3) {
      auto xp = x, xm = x;
      xp[c] += step;
      xm[c] -= step;
      EXPECT_NEAR(g[c], (m.energy(xp) - m.energy(xm)) / (2 * step), 1e-6);
    }
  }
}

TEST(FracLaplacian, IsHalfTheGradientDensity) {
  const double s = 0.5;
  const Lattice lat = Lattice::line(0.25, -16, 16);
  const KernelTable k = build_kernel(lat, s);
  ScalarField u(lat, ExteriorData::halfspace());
  const CellSet omega = ball_mask(lat, 2.0);
  for (std::size_t i : omega.indices()) u.set(i, std::sin(lat.center(i)[0]));
  const EnergyModel m(k, nullptr, u, omega);
  std::vector<double> g;
  m.energy_and_gradient(m.gather(u), g);
  const auto fl = frac_laplacian(k, u, m.cells());
  for (std::size_t c = 0; c < g.size(); ++c) EXPECT_NEAR(g[c], 2.0 * lat.cell_volume() * fl[c], 1e-11);
}

TEST(FracLaplacian, ConvergesForStepProfile) {
  // u = -1 on (-1, 1), +1 outside: the integral at x is 2/(1-x) + 2/(1+x) for s = 1/2.
  const double s = 0.5;
  auto f = [](double y) { return std::abs(y) < 1.0 ? -1.0 : 1.0; };
  for (double x : {0.0, 0.5}) {
    const double ref = 2.0 / (1.0 - x) + 2.0 / (1.0 + x);
    EXPECT_NEAR(fractional_integral_1d(f, x, s, {-1.0, 1.0}, 1.0, 1.0), ref, 1e-8);
    // Lattice version has the opposite sign convention (u_i - u_j).
    const Lattice lat = Lattice::line(0.125, -16, 16);
    const KernelTable k = build_kernel(lat, s, 32);
    ScalarField u(lat, ExteriorData::constant(1.0));
    for (std::size_t i = 0; i < lat.size(); ++i) u.set(i, f(lat.center(i)[0]));
    const std::size_t cell = *lat.cell_of({x + 0.0625, 0.0});
    const double xc = lat.center(cell)[0];
    const double at_center = 2.0 / (1.0 - xc) + 2.0 / (1.0 + xc);
    const std::vector<std::size_t> cells{cell};
    EXPECT_NEAR(-frac_laplacian(k, u, cells)[0], at_center, 1e-10);
  }
}

TEST(FracLaplacian, SmoothProfileIntegral) {
  // f(y) = -cos(pi y / 2) on [-1, 1], 0 outside; compare with a direct double-sided quadrature.
  const double s = 0.3;
  auto f = [](double y) { return std::abs(y) < 1.0 ? -std::cos(std::numbers::pi * y / 2) : 0.0; };
  const double x = 0.2;
  auto g = [&](double t) { return (f(x + t) + f(x - t) - 2 * f(x)) * std::pow(t, -1 - 2 * s); };
  const double ref = gk(g, 0.0, 0.8) + gk(g, 0.8, 1.2) + gk(g, 1.2, 50.0) +
                     2 * (0.0 - f(x)) * std::pow(50.0, -2 * s) / (2 * s);
  EXPECT_NEAR(fractional_integral_1d(f, x, s, {-1.0, 1.0}, 0.0, 1.0), ref, 1e-7);
}

TEST(Determinism, ThreadCountDoesNotChangeEnergy) {
  const Lattice lat = Lattice::square(0.5, -8, 8);
  const KernelTable k = build_kernel(lat, 0.25);
  ScalarField u(lat, ExteriorData::halfspace());
  const CellSet omega = ball_mask(lat, 3.0);
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> U(-1, 1);
  for (std::size_t i : omega.indices()) u.set(i, U(rng));
  set_thread_count(1);
  const double e1 = energy_E(k, DoubleWell::quartic(), u, omega);
  set_thread_count(4);
  const double e4 = energy_E(k, DoubleWell::quartic(), u, omega);
  set_thread_count(1);
  EXPECT_EQ(e1, e4);
}
