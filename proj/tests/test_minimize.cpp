#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fraclab/minimize.hpp"

using namespace fraclab;

namespace {

struct HalfspaceRun {
  Lattice lat = Lattice::line(1.0, -48, 48);
  KernelTable kern = build_kernel(lat, 0.5);
  DoubleWell pot = DoubleWell::quartic();
  CellSet omega = ball_mask(lat, 40.0);
  MinimizeResult res;

  explicit HalfspaceRun(ExteriorData ext = ExteriorData::halfspace()) {
    MinimizeConfig cfg;
    cfg.grad_tol = 1e-7;
    res = minimize_energy(kern, pot, ScalarField(lat, std::move(ext)), omega, cfg);
  }
};

const HalfspaceRun& shared_run() {
  static const HalfspaceRun run;
  return run;
}

}  // namespace

TEST(Minimize, ConstantDataIsAFixedPoint) {
  const Lattice lat = Lattice::square(1.0, -6, 6);
  const KernelTable k = build_kernel(lat, 0.25);
  const CellSet omega = ball_mask(lat, 4.0);
  const auto res = minimize_energy(k, DoubleWell::quartic(), ScalarField(lat, ExteriorData::constant(1.0)),
                                   omega, {});
  EXPECT_TRUE(res.converged);
  EXPECT_EQ(res.iterations, 0);
  EXPECT_EQ(res.energy, 0.0);
  for (std::size_t i = 0; i < lat.size(); ++i) EXPECT_EQ(res.field[i], 1.0);
}

TEST(Minimize, ComparisonWithConstantExteriorFromBadStart) {
  // Starting at -1 inside, the minimizer still has to reach the global minimum +1.
  const Lattice lat = Lattice::line(1.0, -12, 12);
  const KernelTable k = build_kernel(lat, 0.75);
  const CellSet omega = ball_mask(lat, 3.0);
  ScalarField u0(lat, ExteriorData::constant(1.0));
  for (std::size_t i : omega.indices()) u0.set(i, 0.5);
  MinimizeConfig cfg;
  cfg.seed = SeedMode::initial;
  const auto res = minimize_energy(k, DoubleWell::quartic(), u0, omega, cfg);
  ASSERT_TRUE(res.converged) << res.status;
  for (std::size_t i : omega.indices()) EXPECT_NEAR(res.field[i], 1.0, 1e-6);
}

TEST(Minimize, HalfspaceMinimizerIsOddAndMonotone) {
  const auto& run = shared_run();
  ASSERT_TRUE(run.res.converged) << run.res.status;
  const auto& u = run.res.field;
  const std::size_t n = run.lat.size();
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_NEAR(u[i], -u[n - 1 - i], 1e-6);
    if (i > 0) EXPECT_GE(u[i], u[i - 1] - 1e-9);
  }
  // Outside omega nothing moved.
  for (std::size_t i = 0; i < n; ++i)
    if (!run.omega.contains(i)) EXPECT_EQ(u[i], run.lat.center(i)[0] > 0 ? 1.0 : -1.0);
}

TEST(Minimize, TraceIsNonincreasing) {
  const auto& tr = shared_run().res.trace;
  ASSERT_GT(tr.size(), 2u);
  for (std::size_t k = 1; k < tr.size(); ++k) EXPECT_LE(tr[k].energy, tr[k - 1].energy);
}

TEST(Minimize, BeatsExplicitCompetitors) {
  const auto& run = shared_run();
  const double e = energy_E(run.kern, run.pot, run.res.field, run.omega);
  ScalarField step(run.lat, ExteriorData::halfspace());
  EXPECT_LE(e, energy_E(run.kern, run.pot, step, run.omega));
  ScalarField ramp = step;
  for (std::size_t i : run.omega.indices()) ramp.set(i, std::clamp(run.lat.center(i)[0] / 3.0, -1.0, 1.0));
  EXPECT_LE(e, energy_E(run.kern, run.pot, ramp, run.omega));
}

TEST(Residual, SmallAtConvergedMinimizer) {
  const auto& run = shared_run();
  const auto r = el_residual(run.kern, run.pot, run.res.field, run.omega);
  EXPECT_FALSE(r.cells.empty());
  EXPECT_LT(r.sup, 10 * run.res.config.grad_tol);
}

TEST(Residual, LargeForRandomField) {
  const auto& run = shared_run();
  ScalarField u = run.res.field;
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> U(-0.9, 0.9);
  for (std::size_t i : run.omega.indices()) u.set(i, U(rng));
  EXPECT_GT(el_residual(run.kern, run.pot, u, run.omega).sup, run.res.config.grad_tol);
}

TEST(Residual, FullyActiveFieldReportsNothing) {
  const Lattice lat = Lattice::line(1.0, -8, 8);
  const KernelTable k = build_kernel(lat, 0.5);
  const auto r = el_residual(k, DoubleWell::quartic(), ScalarField(lat, ExteriorData::constant(1.0)),
                             CellSet::full(lat));
  EXPECT_TRUE(r.cells.empty());
  EXPECT_EQ(r.sup, 0.0);
}

TEST(Subdomain, ConvergedMinimizerPasses) {
  const auto& run = shared_run();
  const auto rep = subdomain_check(run.kern, run.pot, run.res, ball_mask(run.lat, 20.0), 200);
  EXPECT_EQ(rep.trials, 200);
  EXPECT_TRUE(rep.passed) << rep.worst_margin;
  EXPECT_GE(rep.worst_margin, -1e-6);
  const auto zero = subdomain_check(run.kern, run.pot, run.res, ball_mask(run.lat, 20.0), 5, 0.0);
  EXPECT_EQ(zero.worst_margin, 0.0);
}

TEST(Subdomain, CorruptedFieldIsDetected) {
  const auto& run = shared_run();
  MinimizeResult bad = run.res;
  // Plateau at the top of the well barrier: moving it anywhere lowers W.
  for (std::size_t i : ball_mask(run.lat, 10.0).indices()) bad.field.set(i, 0.0);
  const auto rep = subdomain_check(run.kern, run.pot, bad, ball_mask(run.lat, 10.0), 50, 0.2);
  EXPECT_LT(rep.worst_margin, 0.0);
  EXPECT_FALSE(rep.passed);
}

TEST(Subdomain, RejectsLargerDomain) {
  const auto& run = shared_run();
  EXPECT_THROW(subdomain_check(run.kern, run.pot, run.res, CellSet::full(run.lat), 1), PreconditionError);
}

TEST(Minimize, ReflectionEquivariance) {
  const auto& run = shared_run();
  const HalfspaceRun mirror(ExteriorData::halfspace().reflected());
  const std::size_t n = run.lat.size();
  for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(mirror.res.field[i], run.res.field[n - 1 - i], 1e-9);
}

TEST(Minimize, GradientMatchesDirectionalDifferences) {
  const Lattice lat = Lattice::square(1.0, -6, 6);
  const KernelTable k = build_kernel(lat, 0.25);
  const DoubleWell w = DoubleWell::quartic();
  const CellSet omega = ball_mask(lat, 4.0);
  ScalarField u(lat, ExteriorData::halfspace());
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> U(-0.7, 0.7);
  for (std::size_t i : omega.indices()) u.set(i, U(rng));
  const EnergyModel m(k, &w, u, omega);
  const auto x = m.gather(u);
  std::vector<double> g;
  m.energy_and_gradient(x, g);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> d(x.size());
    for (double& v : d) v = U(rng) / 0.7;
    double dd = 0.0;
    for (std::size_t c = 0; c < d.size(); ++c) dd += g[c] * d[c];
    const double step = 1e-5;
    auto xp = x, xm = x;
    for (std::size_t c = 0; c < d.size(); ++c) {
      xp[c] += step * d[c];
      xm[c] -= step * d[c];
    }
    const double fd = (energy_E(k, w, m.scatter(xp), omega) - energy_E(k, w, m.scatter(xm), omega)) / (2 * step);
    EXPECT_NEAR(dd, fd, 1e-6 * std::abs(fd));
  }
}

TEST(Minimize, IterationLimitIsNotAnException) {
  const auto& run = shared_run();
  MinimizeConfig cfg;
  cfg.max_iters = 3;
  const auto res = minimize_energy(run.kern, run.pot, ScalarField(run.lat, ExteriorData::halfspace()),
                                   run.omega, cfg);
  EXPECT_FALSE(res.converged);
  EXPECT_EQ(res.iterations, 3);
  EXPECT_EQ(res.status, "iteration limit reached");
}

TEST(Minimize, ConfigValidation) {
  MinimizeConfig cfg;
  cfg.grad_tol = 0.0;
  EXPECT_THROW(cfg.validate(), ParameterError);
  cfg = {};
  cfg.max_iters = 0;
  EXPECT_THROW(cfg.validate(), ParameterError);
}
