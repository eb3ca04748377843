#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "fraclab/common.hpp"
#include "fraclab/lattice.hpp"
#include "fraclab/nonlocal.hpp"
#include "fraclab/potential.hpp"

namespace fraclab {

/// Where the omega values start from.
enum class SeedMode {
  exterior,  // descriptor evaluated at cell centers (sign-like for halfspace data)
  initial,   // the values of u0 as given
};

struct MinimizeConfig {
  int max_iters = 20000;
  double grad_tol = 1e-6;      // sup norm of the projected per-volume gradient
  double energy_tol = 1e-13;   // relative decrease over a 10-iteration window
  double armijo = 1e-4;
  int max_backtracks = 40;
  double kinetic_scale = 1.0;  // eps^{2s} turns E into J_eps
  SeedMode seed = SeedMode::exterior;

  void validate() const {
    if (max_iters < 1) throw ParameterError("max_iters must be >= 1");
    if (!(grad_tol > 0.0) || !(energy_tol > 0.0)) throw ParameterError("tolerances must be > 0");
    if (!(armijo > 0.0 && armijo < 1.0)) throw ParameterError("Armijo constant must lie in (0,1)");
    if (max_backtracks < 1) throw ParameterError("max_backtracks must be >= 1");
    if (!(kinetic_scale > 0.0)) throw ParameterError("kinetic_scale must be > 0");
  }
};

struct TraceRow {
  int iter = 0;
  double energy = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;
};

struct MinimizeResult {
  ScalarField field;
  CellSet omega;
  std::vector<TraceRow> trace;
  double energy = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string status;
  MinimizeConfig config;
};

namespace detail {

inline double projected_norm(std::span<const double> x, std::span<const double> r) {
  double m = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k)
    m = std::max(m, std::abs(x[k] - std::clamp(x[k] - r[k], -1.0, 1.0)));
  return m;
}

}  // namespace detail

inline ScalarField seeded_field(const ScalarField& u0, const CellSet& omega, SeedMode mode) {
  if (mode == SeedMode::initial) return u0;
  ScalarField u = u0;
  const Lattice& lat = u.lattice();
  for (std::size_t i : omega.indices()) u.set(i, u.exterior()(lat.center(i)));
  return u;
}

/// Projected gradient descent with Barzilai-Borwein steps and Armijo
/// backtracking on  kinetic_scale * K + potential  over the omega values.
inline MinimizeResult minimize_energy(const KernelTable& kern, const DoubleWell& pot,
                                      const ScalarField& u0, const CellSet& omega,
                                      const MinimizeConfig& cfg = {}) {
  cfg.validate();
  require_same_lattice(kern.lattice(), omega.lattice(), "minimization domain");
  const ScalarField start = seeded_field(u0, omega, cfg.seed);
  const EnergyModel model(kern, &pot, start, omega, cfg.kinetic_scale);
  const double vol = kern.lattice().cell_volume();
  const std::size_t n = model.cells().size();

  MinimizeResult res;
  res.omega = omega;
  res.config = cfg;

  std::vector<double> x = model.gather(start), g, r(n);
  double E = model.energy_and_gradient(x, g);
  if (!std::isfinite(E)) throw ParameterError("energy of the initial field is not finite");
  for (std::size_t k = 0; k < n; ++k) r[k] = g[k] / vol;
  double pg = detail::projected_norm(x, r);
  res.trace.push_back({0, E, pg, 0.0});

  double alpha = 1.0;
  std::vector<double> xt(n), gt, rt(n);
  int it = 0;
  while (true) {
    if (pg < cfg.grad_tol) {
      res.converged = true;
      res.status = "projected gradient below tolerance";
      break;
    }
    if (it >= 10) {
      const double old = res.trace[res.trace.size() - 11].energy;
      if (old - E <= cfg.energy_tol * std::max(std::abs(E), 1e-300)) {
        res.converged = true;
        res.status = "energy decrease below tolerance over 10 iterations";
        break;
      }
    }
    if (it >= cfg.max_iters) {
      res.status = "iteration limit reached";
      break;
    }
    double Et = 0.0;
    bool accepted = false;
    for (int bt = 0; bt < cfg.max_backtracks; ++bt) {
      double slope = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        xt[k] = std::clamp(x[k] - alpha * r[k], -1.0, 1.0);
        slope += g[k] * (xt[k] - x[k]);
      }
      Et = model.energy(xt);
      if (Et <= E + cfg.armijo * slope) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      res.status = "line search failed after " + std::to_string(cfg.max_backtracks) + " backtracks";
      break;
    }
    Et = model.energy_and_gradient(xt, gt);
    double ss = 0.0, sy = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      rt[k] = gt[k] / vol;
      const double sk = xt[k] - x[k];
      ss += sk * sk;
      sy += sk * (rt[k] - r[k]);
    }
    const double used = alpha;
    alpha = sy > 0.0 ? std::clamp(ss / sy, 1e-12, 1e12) : std::min(1e12, 2.0 * alpha);
    x.swap(xt);
    g.swap(gt);
    r.swap(rt);
    E = Et;
    pg = detail::projected_norm(x, r);
    ++it;
    res.trace.push_back({it, E, pg, used});
  }
  res.field = model.scatter(x);
  res.energy = E;
  res.grad_norm = pg;
  res.iterations = it;
  return res;
}

/// Per-volume Euler-Lagrange residual 2 (-Delta)^s u + W'(u) on the cells of
/// `interior` that are not at the constraint.
struct Residual {
  std::vector<std::size_t> cells;
  std::vector<double> values;
  double sup = 0.0;
};

inline constexpr double active_tol = 1e-9;

inline Residual el_residual(const KernelTable& kern, const DoubleWell& pot, const ScalarField& u,
                            const CellSet& interior) {
  require_same_lattice(kern.lattice(), interior.lattice(), "residual domain");
  Residual out;
  for (std::size_t i : interior.indices())
    if (std::abs(u[i]) < 1.0 - active_tol) out.cells.push_back(i);
  const auto fl = frac_laplacian(kern, u, out.cells);
  out.values.resize(out.cells.size());
  for (std::size_t k = 0; k < out.cells.size(); ++k) {
    out.values[k] = 2.0 * fl[k] + pot.deriv(u[out.cells[k]]);
    out.sup = std::max(out.sup, std::abs(out.values[k]));
  }
  return out;
}

struct SubdomainReport {
  int trials = 0;
  double worst_margin = 0.0;
  bool passed = false;
};

/// Random admissible perturbations supported in omega_sub. The margin of a
/// trial is  E(u + d) - E(u) + grad_tol * h^n * sum |d|,  energies on omega_sub.
inline SubdomainReport subdomain_check(const KernelTable& kern, const DoubleWell& pot,
                                       const MinimizeResult& result, const CellSet& omega_sub,
                                       int trials, double amplitude = 0.05,
                                       std::uint64_t seed = 12345, double pass_tol = 1e-6) {
  if (!omega_sub.subset_of(result.omega))
    throw PreconditionError("subdomain must be contained in the minimization domain");
  if (trials < 0 || !(amplitude >= 0.0)) throw ParameterError("bad subdomain_check parameters");
  const EnergyModel model(kern, &pot, result.field, omega_sub, result.config.kinetic_scale);
  const std::vector<double> x0 = model.gather(result.field);
  const double e0 = model.energy(x0);
  const double vol = kern.lattice().cell_volume();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);

  SubdomainReport rep;
  rep.trials = trials;
  rep.worst_margin = trials > 0 ? std::numeric_limits<double>::infinity() : 0.0;
  std::vector<double> x(x0.size());
  for (int t = 0; t < trials; ++t) {
    double l1 = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      x[k] = std::clamp(x0[k] + amplitude * U(rng), -1.0, 1.0);
      l1 += std::abs(x[k] - x0[k]);
    }
    const double margin = model.energy(x) - e0 + result.config.grad_tol * vol * l1;
    rep.worst_margin = std::min(rep.worst_margin, margin);
  }
  rep.passed = rep.worst_margin >= -pass_tol;
  return rep;
}

}  // namespace fraclab
