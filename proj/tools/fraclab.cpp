#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "fraclab/fraclab.hpp"

using namespace fraclab;

namespace {

void print_summary(const ExperimentReport& rep, const std::filesystem::path& out) {
  std::printf("%s: %s (%.2f s, %s)\n", rep.experiment.c_str(), rep.status.c_str(), rep.wall_seconds,
              rep.resolution.c_str());
  for (const auto& c : rep.criteria)
    std::printf("  [%s] %s%s%s\n", c.passed ? "pass" : "FAIL", c.name.c_str(), c.detail.empty() ? "" : ": ",
                c.detail.c_str());
  std::printf("  report: %s\n", (out / "report.json").string().c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fraclab: fractional phase-transition experiments"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir;
  int threads = 1;
  std::uint64_t seed = 0;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("--seed", seed, "random seed");
  app.add_option("--set", overrides, "override a config key (key=value), repeatable");

  const std::vector<std::string> experiments{"energy-growth", "density", "levelset", "gmt",
                                             "sobolev",       "barrier", "iterate"};
  for (const auto& e : experiments) app.add_subcommand(e, "run the " + e + " experiment");

  auto* kc = app.add_subcommand("kernel-cache", "build or load a cached kernel table");
  int kc_dim = 2;
  double kc_h = 1.0, kc_s = 0.25, kc_tol = 1e-6;
  int kc_nr = 4;
  long kc_half = 16;
  kc->add_option("--dim", kc_dim)->check(CLI::Range(1, 2));
  kc->add_option("--spacing", kc_h, "lattice spacing h");
  kc->add_option("--s", kc_s);
  kc->add_option("--near-radius", kc_nr);
  kc->add_option("--tol", kc_tol);
  kc->add_option("--half", kc_half, "cells on each side of the origin");

  CLI11_PARSE(app, argc, argv);

  try {
    set_thread_count(threads);
    if (kc->parsed()) {
      const std::filesystem::path dir = out_dir.empty() ? "kernel-cache" : out_dir;
      KernelCache cache(dir);
      const Lattice lat = Lattice::centered(kc_dim, kc_h, kc_half);
      const KernelTable k = cache.get(lat, kc_s, kc_nr, kc_tol);
      std::printf("%s %s (offset-1 weight %.17g)\n", cache.hits() ? "loaded" : "built",
                  cache.path_for({kc_dim, kc_h, kc_s, kc_nr, kc_tol}).string().c_str(), k.weight_offset(1, 0));
      return 0;
    }

    ExperimentConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    cfg.experiment = app.get_subcommands().front()->get_name();
    for (const auto& kv : overrides) apply_override(cfg, kv);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (*seed_opt) cfg.seed = seed;

    const auto rep = run_experiment(cfg);
    const std::filesystem::path out = cfg.out_dir;
    write_report(rep, out);
    if (cfg.experiment == "gmt") {
      CorpusManifest m;
      m.seed = cfg.seed;
      m.count = cfg.corpus;
      m.margin = cfg.margin;
      m.lattice = Lattice::square(cfg.h, 0, cfg.box);
      auto f = open_out(out / "manifest.json");
      f << manifest_to_json(m).dump(2) << '\n';
    }
    print_summary(rep, out);
    return rep.passed() ? 0 : 1;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
