#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "fraclab/lab.hpp"

using namespace fraclab;

TEST(Config, ParsesKeyValueText) {
  std::istringstream in(
      "# sweep\n"
      "experiment = density\n"
      "s = 0.25   # exponent\n"
      "radii = 8, 16, 32\n"
      "eps = 1/8, 1/16\n"
      "grad_tol = 1e-7\n"
      "dump_fields = yes\n"
      "\n");
  const auto c = parse_config(in);
  EXPECT_EQ(c.experiment, "density");
  EXPECT_EQ(c.s, 0.25);
  EXPECT_EQ(c.radii, (std::vector<double>{8, 16, 32}));
  EXPECT_EQ(c.eps, (std::vector<double>{0.125, 0.0625}));
  EXPECT_EQ(c.minimize.grad_tol, 1e-7);
  EXPECT_TRUE(c.dump_fields);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, RejectsBadInput) {
  ExperimentConfig c;
  EXPECT_THROW(apply_override(c, "nonsense=1"), ParameterError);
  EXPECT_THROW(apply_override(c, "s=abc"), ParameterError);
  EXPECT_THROW(apply_override(c, "no equals sign"), ParameterError);
  std::istringstream bad("s 0.3\n");
  EXPECT_THROW(parse_config(bad), ParameterError);

  c = {};
  c.theta1 = -0.5;
  c.theta_star = 0.0;  // above min(theta1, theta2)
  EXPECT_THROW(c.validate(), ParameterError);
  c = {};
  c.radii = {4, 4, 8};
  EXPECT_THROW(c.validate(), ParameterError);
  c = {};
  c.eps = {0.1, 0.2};
  EXPECT_THROW(c.validate(), ParameterError);
  c = {};
  c.theta2 = 1.0;
  EXPECT_THROW(c.validate(), ParameterError);
}

TEST(Config, ExteriorSpecs) {
  const auto h = make_exterior("halfspace:0:1.5:-1");
  const auto& hs = std::get<HalfspaceSign>(h.variant());
  EXPECT_EQ(hs.threshold, 1.5);
  EXPECT_EQ(hs.sign, -1.0);
  EXPECT_EQ(std::get<ConstantExterior>(make_exterior("constant:-1").variant()).value, -1.0);
  EXPECT_THROW(make_exterior("sphere"), ParameterError);
  EXPECT_THROW(make_exterior("halfspace:0"), ParameterError);
}

TEST(Fit, ExactPowerLaw) {
  const std::vector<double> x{2, 4, 8, 16};
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 * std::pow(v, 0.75));
  const auto f = fit_loglog(x, y);
  EXPECT_NEAR(f.slope, 0.75, 1e-12);
  EXPECT_NEAR(std::exp(f.intercept), 3.0, 1e-11);
  EXPECT_LT(f.max_residual, 1e-12);
}

TEST(Fit, ConfidenceIntervalUsesStudentT) {
  const std::vector<double> x{1, 2, 4};
  const std::vector<double> y{1.0, 2.2, 3.9};
  const auto f = fit_loglog(x, y);
  // one degree of freedom: the 97.5% quantile is tan(0.475 pi)
  const double t = std::tan(0.475 * std::numbers::pi);
  EXPECT_NEAR((f.ci_hi - f.slope) / f.stderr_slope, t, 1e-9);
  EXPECT_NEAR((f.slope - f.ci_lo) / f.stderr_slope, t, 1e-9);
  EXPECT_THROW(fit_loglog({1}, {1}), ParameterError);
  EXPECT_THROW(fit_loglog({1, 2}, {1, -1}), DomainError);
}

namespace {

std::vector<std::array<double, 2>> dyadic(double r0, int count, double (*V)(double)) {
  std::vector<std::array<double, 2>> out;
  for (int k = 0; k < count; ++k) {
    const double r = r0 * std::pow(2.0, k);
    out.push_back({r, V(r)});
  }
  return out;
}

}  // namespace

TEST(IterationLemma, PowerLawPassesWithConstructiveConstant) {
  // V = r^2, sigma = 1/2, gamma = 2, C = 2, R_o = 2, mu = V(2) = 4:
  // j1 = 1, c = min{4/4, (1/8)^4, (2/16)^4} = 2^-12, j2 = 12, R_star = 2^13.
  const auto samples = dyadic(2.0, 24, [](double r) { return r * r; });
  const auto rep = check_iteration_lemma(samples, 0.5, 2.0, 2.0, 2.0, 2.0, 4.0);
  EXPECT_TRUE(rep.ind1);
  EXPECT_TRUE(rep.ind2);
  EXPECT_EQ(rep.j1, 1);
  EXPECT_EQ(rep.c, std::ldexp(1.0, -12));
  EXPECT_EQ(rep.j2, 12);
  EXPECT_EQ(rep.R_star, 8192.0);
  EXPECT_EQ(rep.ind2_checked, 23u);
  EXPECT_EQ(rep.conclusion, "holds");
  EXPECT_EQ(rep.conclusion_checked, 12u);  // 2^13 .. 2^24
  EXPECT_TRUE(rep.passed());
}

TEST(IterationLemma, ConstantIsRejectedAtNamedRadius) {
  const double mu = 3.0, sigma = 0.5, nu = 2.0, C = 2.0;
  const auto samples = dyadic(2.0, 24, [](double) { return 3.0; });
  // direct substitution into the hypothesis
  double expect = 0.0;
  for (const auto& [r, V] : samples) {
    const double alpha = std::min(1.0, std::log(V) / std::log(r));
    if (std::pow(r, sigma) * alpha * std::pow(V, (nu - sigma) / nu) > C * V) {
      expect = r;
      break;
    }
  }
  ASSERT_GT(expect, 0.0);
  const auto rep = check_iteration_lemma(samples, sigma, nu, 2.0, C, 2.0, mu);
  EXPECT_TRUE(rep.ind1);
  EXPECT_FALSE(rep.ind2);
  ASSERT_TRUE(rep.first_violation_r.has_value());
  EXPECT_EQ(*rep.first_violation_r, expect);
  EXPECT_EQ(*rep.first_violation_r, 256.0);
  EXPECT_FALSE(rep.passed());
}

TEST(IterationLemma, UntestedBeyondSamples) {
  const auto samples = dyadic(2.0, 6, [](double r) { return r * r; });
  const auto rep = check_iteration_lemma(samples, 0.5, 2.0, 2.0, 2.0, 2.0, 4.0);
  EXPECT_TRUE(rep.hypotheses_hold());
  EXPECT_EQ(rep.conclusion, "untested");
  EXPECT_EQ(rep.conclusion_checked, 0u);
  EXPECT_TRUE(rep.passed());
}

TEST(IterationLemma, FirstHypothesisAndPreconditions) {
  const auto samples = dyadic(2.0, 6, [](double r) { return r * r; });
  const auto rep = check_iteration_lemma(samples, 0.5, 2.0, 2.0, 2.0, 2.0, 5.0);
  EXPECT_FALSE(rep.ind1);
  EXPECT_EQ(*rep.first_violation_r, 2.0);
  EXPECT_THROW(check_iteration_lemma(samples, 2.0, 2.0, 2.0, 2.0, 2.0, 1.0), ParameterError);
  EXPECT_THROW(check_iteration_lemma(samples, 0.5, 2.0, 2.0, 1.0, 2.0, 1.0), ParameterError);
  auto bad = samples;
  bad[3][1] = 1.0;
  EXPECT_THROW(check_iteration_lemma(bad, 0.5, 2.0, 2.0, 2.0, 2.0, 1.0), PreconditionError);
  EXPECT_THROW(check_iteration_lemma(samples, 0.5, 2.0, 2.0, 2.0, 1.5, 1.0), PreconditionError);
}

TEST(IterationLemma, SyntheticRuns) {
  ExperimentConfig c;
  c.experiment = "iterate";
  EXPECT_TRUE(run_experiment(c).passed());
  c.lemma_model = "constant";
  c.lemma_mu = 3.0;
  const auto rep = run_experiment(c);
  EXPECT_FALSE(rep.passed());
  EXPECT_EQ(rep.metric_value("first_violation_r"), 256.0);
}

TEST(EnergyGrowth, SmallSweep) {
  ExperimentConfig c;
  c.s = 0.25;
  c.radii = {4, 8, 16, 32};
  c.minimize.grad_tol = 1e-8;
  const auto rep = run_energy_growth(c);
  const auto& t = rep.tables.front();
  ASSERT_EQ(t.rows.size(), 4u);
  for (const auto& row : t.rows) {
    EXPECT_EQ(row[3], 1.0);     // converged
    EXPECT_LE(row[1], row[2]);  // below psi
  }
  EXPECT_TRUE(rep.criterion("minimizer energy below psi at every R").passed);
  EXPECT_EQ(rep.fits.size(), 2u);
  EXPECT_EQ(rep.fits[0].points, 3u);  // smallest radius dropped
}

TEST(EnergyGrowth, NeedsFourRadii) {
  ExperimentConfig c;
  c.radii = {4, 8, 16};
  EXPECT_THROW(run_energy_growth(c), ParameterError);
}

TEST(Density, SaturatedPhaseCountsBallCells) {
  ExperimentConfig c;
  c.experiment = "density";
  c.dim = 2;
  c.s = 0.25;
  c.radii = {2, 4, 8};
  c.exterior = "constant:1";
  const auto rep = run_density(c);
  const auto& t = rep.tables.front();
  const Lattice lat = Lattice::centered(2, 1.0, 12);
  for (std::size_t k = 0; k < 3; ++k) {
    const double V = static_cast<double>(ball_mask(lat, c.radii[k]).count());
    EXPECT_EQ(t.rows[k][1], V);
    EXPECT_EQ(t.rows[k][3], V);
  }
  EXPECT_EQ(rep.metric_value("u0"), 1.0);
  EXPECT_TRUE(rep.criterion("V nondecreasing").passed);
}

TEST(Density, WrongPhaseIsInapplicable) {
  ExperimentConfig c;
  c.dim = 2;
  c.radii = {2, 4};
  c.exterior = "constant:-1";
  const auto rep = run_density(c);
  EXPECT_EQ(rep.status, "inapplicable");
  EXPECT_FALSE(rep.passed());
}

TEST(LevelSet, ConstantDataHasEmptyLevelSet) {
  ExperimentConfig c;
  c.s = 0.75;
  c.exterior = "constant:1";
  c.eps = {0.25, 0.125};
  c.macro_h = 0.125;
  const auto rep = run_levelset_convergence(c);
  for (const auto& row : rep.tables.front().rows) {
    EXPECT_EQ(row[5], 0.0);
    EXPECT_EQ(row[6], 0.0);
  }
  EXPECT_TRUE(rep.passed());
}

TEST(SetSuites, SmallCorpora) {
  ExperimentConfig c;
  c.dim = 2;
  c.corpus = 4;
  c.box = 16;
  c.refine_cases = 2;
  const auto g = run_gmt_suite(c);
  EXPECT_EQ(g.table("gmt").rows.size(), 12u);
  EXPECT_EQ(g.table("refinement").rows.size(), 2u);
  EXPECT_TRUE(g.criterion("all ratios strictly positive").passed);

  c.sobolev_sets = 5;
  c.sobolev_radius = 3.0;
  c.sobolev_h = 1.0 / 16;
  c.analytic_tol = 0.05;
  const auto s = run_sobolev_suite(c);
  EXPECT_EQ(s.table("sets").rows.size(), 6u);
  EXPECT_NEAR(s.metric_value("interval_lhs"), 4.0, 0.2);
}

TEST(Reports, BitIdenticalAcrossThreadCounts) {
  ExperimentConfig c;
  c.dim = 2;
  c.s = 0.25;
  c.radii = {2, 4, 6};
  set_thread_count(1);
  const auto a = report_to_json(run_density(c), false).dump();
  set_thread_count(4);
  const auto b = report_to_json(run_density(c), false).dump();
  set_thread_count(1);
  EXPECT_EQ(a, b);
}

TEST(Reports, WritesJsonAndCsv) {
  ExperimentConfig c;
  c.experiment = "iterate";
  const auto rep = run_experiment(c);
  const auto dir = std::filesystem::temp_directory_path() / "fraclab_test_report";
  std::filesystem::remove_all(dir);
  write_report(rep, dir);
  std::ifstream j(dir / "report.json");
  const auto parsed = json::parse(j);
  EXPECT_EQ(parsed.at("status"), "pass");
  EXPECT_EQ(parsed.at("series").at(0).at("file"), "series.csv");
  std::ifstream csv(dir / "series.csv");
  std::string line;
  int lines = 0;
  while (std::getline(csv, line)) ++lines;
  EXPECT_EQ(lines, 1 + c.lemma_samples);
  std::filesystem::remove_all(dir);
  EXPECT_THROW(
      [] {
        ExperimentConfig bad;
        bad.experiment = "nope";
        run_experiment(bad);
      }(),
      ParameterError);
}
