#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fraclab/barrier.hpp"
#include "fraclab/common.hpp"
#include "fraclab/lattice.hpp"
#include "fraclab/minimize.hpp"
#include "fraclab/nonlocal.hpp"
#include "fraclab/potential.hpp"
#include "fraclab/setgeom.hpp"

namespace fraclab {

struct IoError : Error {
  using Error::Error;
};

using json = nlohmann::json;

/// Shortest text that reads back to the same double.
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot open " + p.string() + " for writing");
  return f;
}

inline std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot open " + p.string());
  return f;
}

// ---------------------------------------------------------------------------
// Lattices and cell sets.

inline json lattice_to_json(const Lattice& lat) {
  return {{"dim", lat.dim()},
          {"h", lat.h()},
          {"lo", {lat.lo()[0], lat.lo()[1]}},
          {"hi", {lat.hi()[0], lat.hi()[1]}}};
}

inline Lattice lattice_from_json(const json& j) {
  try {
    return Lattice(j.at("dim").get<int>(), j.at("h").get<double>(),
                   {j.at("lo").at(0).get<long>(), j.at("lo").at(1).get<long>()},
                   {j.at("hi").at(0).get<long>(), j.at("hi").at(1).get<long>()});
  } catch (const json::exception& e) {
    throw IoError(std::string("bad lattice record: ") + e.what());
  }
}

/// One row of 0/1 per y value, lowest y first; 1D sets are a single row.
inline void write_cellset_text(std::ostream& os, const CellSet& set) {
  const Lattice& lat = set.lattice();
  const long nx = lat.extent(0), ny = lat.extent(1);
  for (long r = 0; r < ny; ++r) {
    std::string row(static_cast<std::size_t>(nx), '0');
    for (long c = 0; c < nx; ++c)
      if (set.contains(static_cast<std::size_t>(c + nx * r))) row[static_cast<std::size_t>(c)] = '1';
    os << row << '\n';
  }
}

inline CellSet read_cellset_text(std::istream& is, const Lattice& lat) {
  CellSet out(lat);
  const long nx = lat.extent(0), ny = lat.extent(1);
  std::string line;
  long r = 0;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (r >= ny) throw IoError("cell set text has more rows than the lattice");
    if (static_cast<long>(line.size()) != nx) throw IoError("cell set row " + std::to_string(r) + " has the wrong width");
    for (long c = 0; c < nx; ++c) {
      const char ch = line[static_cast<std::size_t>(c)];
      if (ch == '1') out.set(static_cast<std::size_t>(c + nx * r));
      else if (ch != '0') throw IoError("cell set text may only contain 0 and 1");
    }
    ++r;
  }
  if (r != ny) throw IoError("cell set text has " + std::to_string(r) + " rows, lattice needs " + std::to_string(ny));
  return out;
}

inline json cellset_to_json(const CellSet& set) {
  return {{"lattice", lattice_to_json(set.lattice())}, {"indices", set.indices()}};
}

inline CellSet cellset_from_json(const json& j) {
  const Lattice lat = lattice_from_json(j.at("lattice"));
  CellSet out(lat);
  for (const auto& v : j.at("indices")) {
    const auto i = v.get<std::size_t>();
    if (i >= lat.size()) throw IoError("cell index out of range in set record");
    out.set(i);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fields.

inline void write_field_csv(std::ostream& os, const ScalarField& u) {
  const Lattice& lat = u.lattice();
  os << (lat.dim() == 1 ? "index,x,value\n" : "index,x,y,value\n");
  for (std::size_t i = 0; i < lat.size(); ++i) {
    const Point p = lat.center(i);
    os << i << ',' << fmt_double(p[0]);
    if (lat.dim() == 2) os << ',' << fmt_double(p[1]);
    os << ',' << fmt_double(u[i]) << '\n';
  }
}

/// Restores a field written by write_field_csv onto the same lattice.
inline ScalarField read_field_csv(std::istream& is, const Lattice& lat, ExteriorData ext) {
  std::string line;
  if (!std::getline(is, line)) throw IoError("empty field file");
  std::vector<double> vals(lat.size(), 0.0);
  std::vector<char> seen(lat.size(), 0);
  const std::size_t cols = lat.dim() == 1 ? 3 : 4;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> parts;
    std::stringstream ss(line);
    for (std::string tok; std::getline(ss, tok, ',');) parts.push_back(tok);
    if (parts.size() != cols) throw IoError("field row has the wrong number of columns");
    const std::size_t i = std::stoul(parts[0]);
    if (i >= lat.size()) throw IoError("field index out of range");
    vals[i] = std::stod(parts.back());
    seen[i] = 1;
  }
  for (char c : seen)
    if (!c) throw IoError("field file does not cover every cell");
  return ScalarField(lat, std::move(vals), std::move(ext));
}

// ---------------------------------------------------------------------------
// Potentials, traces, profiles.

/// Two columns t,W; a non-numeric first line is taken as a header.
inline DoubleWell read_tabulated_well(std::istream& is) {
  std::vector<double> t, w;
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw IoError("potential table rows need two columns");
    try {
      const double a = std::stod(line.substr(0, comma));
      const double b = std::stod(line.substr(comma + 1));
      t.push_back(a);
      w.push_back(b);
    } catch (const std::invalid_argument&) {
      if (!first) throw IoError("non-numeric row in potential table: " + line);
    }
    first = false;
  }
  return DoubleWell(TabulatedWell(std::move(t), std::move(w)));
}

inline void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& trace) {
  os << "iteration,energy,grad_norm,step\n";
  for (const auto& r : trace)
    os << r.iter << ',' << fmt_double(r.energy) << ',' << fmt_double(r.grad_norm) << ','
       << fmt_double(r.step) << '\n';
}

inline void write_radial_csv(std::ostream& os, const std::vector<std::array<double, 2>>& prof) {
  os << "r,w\n";
  for (const auto& p : prof) os << fmt_double(p[0]) << ',' << fmt_double(p[1]) << '\n';
}

// ---------------------------------------------------------------------------
// GMT corpus manifests.

struct CorpusManifest {
  std::uint64_t seed = 1;
  int count = 50;
  long margin = 2;
  Lattice lattice = Lattice::square(1.0, 0, 32);
};

inline json manifest_to_json(const CorpusManifest& m) {
  return {{"generator", "gmt_corpus"},
          {"seed", m.seed},
          {"count", m.count},
          {"margin", m.margin},
          {"lattice", lattice_to_json(m.lattice)}};
}

inline CorpusManifest manifest_from_json(const json& j) {
  CorpusManifest m;
  try {
    if (j.at("generator").get<std::string>() != "gmt_corpus") throw IoError("unknown corpus generator");
    m.seed = j.at("seed").get<std::uint64_t>();
    m.count = j.at("count").get<int>();
    m.margin = j.at("margin").get<long>();
  } catch (const json::exception& e) {
    throw IoError(std::string("bad corpus manifest: ") + e.what());
  }
  m.lattice = lattice_from_json(j.at("lattice"));
  if (m.count < 1) throw IoError("corpus manifest count must be >= 1");
  if (m.margin < 0) throw IoError("corpus manifest margin must be >= 0");
  return m;
}

inline std::vector<SetPair> corpus_from_manifest(const CorpusManifest& m) {
  return gmt_corpus(m.lattice, m.count, m.seed, m.margin);
}

// ---------------------------------------------------------------------------
// Kernel cache. Only the unit-spacing near weights are stored; the full table
// is rebuilt from them for the requested lattice.

inline constexpr std::uint32_t kernel_cache_version = 1;
inline constexpr char kernel_cache_magic[4] = {'F', 'L', 'K', 'T'};

struct KernelKey {
  int dim = 1;
  double h = 1.0;
  double s = 0.5;
  int near_radius = 4;
  double quad_tol = 1e-6;

  bool operator==(const KernelKey&) const = default;

  std::string file_name() const {
    char buf[160];
    std::snprintf(buf, sizeof buf, "kernel_d%d_h%a_s%a_nr%d_tol%a.bin", dim, h, s, near_radius, quad_tol);
    return buf;
  }
};

namespace detail {

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw IoError("kernel cache file is truncated");
  return v;
}

}  // namespace detail

inline void write_kernel_cache(std::ostream& os, const KernelKey& key, const std::vector<double>& unit_near) {
  os.write(kernel_cache_magic, 4);
  detail::put(os, kernel_cache_version);
  detail::put(os, static_cast<std::int32_t>(key.dim));
  detail::put(os, key.h);
  detail::put(os, key.s);
  detail::put(os, static_cast<std::int32_t>(key.near_radius));
  detail::put(os, key.quad_tol);
  detail::put(os, static_cast<std::uint64_t>(unit_near.size()));
  os.write(reinterpret_cast<const char*>(unit_near.data()),
           static_cast<std::streamsize>(unit_near.size() * sizeof(double)));
  if (!os) throw IoError("failed writing kernel cache");
}

/// Reads a cache record; throws IoError on a bad header, version or key.
inline std::vector<double> read_kernel_cache(std::istream& is, const KernelKey& key) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != std::string(kernel_cache_magic, 4))
    throw IoError("not a kernel cache file");
  const auto ver = detail::get<std::uint32_t>(is);
  if (ver != kernel_cache_version)
    throw IoError("kernel cache version " + std::to_string(ver) + " is not supported");
  KernelKey got;
  got.dim = detail::get<std::int32_t>(is);
  got.h = detail::get<double>(is);
  got.s = detail::get<double>(is);
  got.near_radius = detail::get<std::int32_t>(is);
  got.quad_tol = detail::get<double>(is);
  if (!(got == key)) throw IoError("kernel cache key mismatch");
  const auto n = detail::get<std::uint64_t>(is);
  const long side = 2L * key.near_radius + 1;
  if (n != static_cast<std::uint64_t>(key.dim == 1 ? side : side * side))
    throw IoError("kernel cache record has the wrong size");
  std::vector<double> out(n);
  is.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!is) throw IoError("kernel cache file is truncated");
  return out;
}

class KernelCache {
 public:
  explicit KernelCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

  const std::filesystem::path& dir() const { return dir_; }
  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }

  std::filesystem::path path_for(const KernelKey& key) const { return dir_ / key.file_name(); }

  /// Loads the table for `lat` if a valid record exists, else builds and stores it.
  /// Stale or damaged records are replaced.
  KernelTable get(const Lattice& lat, double s, int near_radius = 4, double quad_tol = 1e-6) {
    check_kernel_params(s, near_radius, quad_tol);
    const KernelKey key{lat.dim(), lat.h(), s, near_radius, quad_tol};
    const auto p = path_for(key);
    if (std::filesystem::exists(p)) {
      try {
        std::ifstream f(p, std::ios::binary);
        auto near = read_kernel_cache(f, key);
        ++hits_;
        return KernelTable(lat, s, near_radius, quad_tol, std::move(near));
      } catch (const IoError&) {
        // rebuilt below
      }
    }
    ++misses_;
    auto near = compute_unit_near(lat.dim(), s, near_radius, quad_tol);
    auto f = open_out(p);
    write_kernel_cache(f, key, near);
    return KernelTable(lat, s, near_radius, quad_tol, std::move(near));
  }

 private:
  std::filesystem::path dir_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

// ---------------------------------------------------------------------------
// Module reports as JSON.

inline json to_json(const MinimizeResult& r) {
  return {{"energy", r.energy},
          {"grad_norm", r.grad_norm},
          {"iterations", r.iterations},
          {"converged", r.converged},
          {"status", r.status},
          {"config",
           {{"max_iters", r.config.max_iters},
            {"grad_tol", r.config.grad_tol},
            {"energy_tol", r.config.energy_tol},
            {"armijo", r.config.armijo},
            {"max_backtracks", r.config.max_backtracks},
            {"kinetic_scale", r.config.kinetic_scale}}}};
}

inline json to_json(const BarrierSpec& b) {
  return {{"s", b.s}, {"tau", b.tau}, {"C5", b.C5}, {"C_o", b.C_o},
          {"r", b.r}, {"R", b.R},     {"beta", b.beta}, {"t_clamp", b.t_clamp}};
}

inline json to_json(const Al1Report& a) {
  return {{"samples", a.samples},     {"passing", a.passing}, {"fraction", a.fraction},
          {"worst_ratio", a.worst_ratio}, {"worst_x", a.worst_x}, {"slack", a.slack},
          {"histogram", a.histogram}, {"passed", a.passed}};
}

inline json to_json(const Al2Report& a) {
  return {{"samples", a.samples}, {"sup_q", a.sup_q}, {"inf_q", a.inf_q}, {"x_sup", a.x_sup},
          {"x_inf", a.x_inf},     {"C", a.C},         {"ratio", a.ratio}, {"finite", a.finite}};
}

inline json to_json(const GmtReport& g) {
  return {{"measure_A", g.measure_A}, {"measure_B", g.measure_B}, {"measure_B_used", g.measure_B_used},
          {"regime", g.regime},       {"L", g.L},                 {"bound", g.bound},
          {"ratio", g.ratio},         {"b_floored", g.b_floored}};
}

}  // namespace fraclab
