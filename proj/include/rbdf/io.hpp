#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "determining.hpp"
#include "error.hpp"
#include "interpolants.hpp"
#include "nudging.hpp"
#include "param_audit.hpp"
#include "rb_solver.hpp"

namespace rbdf {

/// Every setting the command-line tool reads, as flat key = value text.
struct RunConfig {
  double nu = 1.0;
  double kappa = 1.0;
  double g = 100.0;
  double a = 0.0;
  double L = 2.0 * std::numbers::pi;
  double l = std::numbers::pi;
  int Nx = 64;
  int Ny = 128;

  double dt = 0.005;
  bool pin_mean = true;

  double mu = 100.0;
  std::string interpolant = "fourier";
  double h = 0.25;

  double tau_min = 0.0;
  double spin_tolerance = 1e-6;
  double spin_offset = 0.0;

  std::uint64_t seed = 1;
  double amplitude = 0.1;
  double burn_in = 10.0;
  double t_end = 20.0;
  double record_every = 0.1;
  double snapshot_every = 0.0;
  double span = 12.0;
  long keep_every = 0;

  double v0_scale = 2.0;
  int beta_grid = 8;
  double s_span = 1.0;
  double ds = 0.01;
  double beta_tol = 1e-4;

  std::string bc = "stressfree";
  double J1 = 0.0;
  double J2 = 0.0;
  double rho = 0.0;
  double c_L = 1.0, c_T = 1.0, c_B = 1.0, c_A = 1.0, c_E = 1.0;
  double c0 = 1.0, c1 = 1.0, c2 = 1.0, ct1 = 1.0, ct2 = 1.0;

  int fit_members = 100;

  std::string out = "rbdf_out";
  std::string restart;

  bool operator==(const RunConfig&) const = default;
};

namespace detail {

using FieldPtr = std::variant<double RunConfig::*, int RunConfig::*, long RunConfig::*, bool RunConfig::*,
                              std::uint64_t RunConfig::*, std::string RunConfig::*>;

struct ConfigKey {
  const char* name;
  FieldPtr field;
};

inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"nu", &RunConfig::nu},
      {"kappa", &RunConfig::kappa},
      {"g", &RunConfig::g},
      {"a", &RunConfig::a},
      {"L", &RunConfig::L},
      {"l", &RunConfig::l},
      {"Nx", &RunConfig::Nx},
      {"Ny", &RunConfig::Ny},
      {"dt", &RunConfig::dt},
      {"pin_mean", &RunConfig::pin_mean},
      {"mu", &RunConfig::mu},
      {"interpolant", &RunConfig::interpolant},
      {"h", &RunConfig::h},
      {"tau_min", &RunConfig::tau_min},
      {"spin_tolerance", &RunConfig::spin_tolerance},
      {"spin_offset", &RunConfig::spin_offset},
      {"seed", &RunConfig::seed},
      {"amplitude", &RunConfig::amplitude},
      {"burn_in", &RunConfig::burn_in},
      {"t_end", &RunConfig::t_end},
      {"record_every", &RunConfig::record_every},
      {"snapshot_every", &RunConfig::snapshot_every},
      {"span", &RunConfig::span},
      {"keep_every", &RunConfig::keep_every},
      {"v0_scale", &RunConfig::v0_scale},
      {"beta_grid", &RunConfig::beta_grid},
      {"s_span", &RunConfig::s_span},
      {"ds", &RunConfig::ds},
      {"beta_tol", &RunConfig::beta_tol},
      {"bc", &RunConfig::bc},
      {"J1", &RunConfig::J1},
      {"J2", &RunConfig::J2},
      {"rho", &RunConfig::rho},
      {"c_L", &RunConfig::c_L},
      {"c_T", &RunConfig::c_T},
      {"c_B", &RunConfig::c_B},
      {"c_A", &RunConfig::c_A},
      {"c_E", &RunConfig::c_E},
      {"c0", &RunConfig::c0},
      {"c1", &RunConfig::c1},
      {"c2", &RunConfig::c2},
      {"ct1", &RunConfig::ct1},
      {"ct2", &RunConfig::ct2},
      {"fit_members", &RunConfig::fit_members},
      {"out", &RunConfig::out},
      {"restart", &RunConfig::restart},
  };
  return keys;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw Error(ErrorKind::Config, "bad value for " + key + ": '" + v + "'");
  return out;
}

inline void assign(RunConfig& c, const ConfigKey& k, const std::string& v) {
  std::visit(
      [&](auto ptr) {
        using T = std::remove_reference_t<decltype(c.*ptr)>;
        if constexpr (std::is_same_v<T, std::string>) {
          c.*ptr = v;
        } else if constexpr (std::is_same_v<T, bool>) {
          if (v == "true" || v == "1") c.*ptr = true;
          else if (v == "false" || v == "0") c.*ptr = false;
          else throw Error(ErrorKind::Config, "bad value for " + std::string(k.name) + ": '" + v + "'");
        } else {
          c.*ptr = parse_number<T>(k.name, v);
        }
      },
      k.field);
}

inline std::string render(const RunConfig& c, const ConfigKey& k) {
  return std::visit(
      [&](auto ptr) -> std::string {
        using T = std::remove_cvref_t<decltype(c.*ptr)>;
        if constexpr (std::is_same_v<T, std::string>) return c.*ptr;
        else if constexpr (std::is_same_v<T, bool>) return c.*ptr ? "true" : "false";
        else if constexpr (std::is_same_v<T, double>) return format_g(c.*ptr);
        else return std::to_string(c.*ptr);
      },
      k.field);
}

}  // namespace detail

inline void set_config_value(RunConfig& c, const std::string& key, const std::string& value) {
  for (const auto& k : detail::config_keys())
    if (key == k.name) return detail::assign(c, k, value);
  throw Error(ErrorKind::Config, "unknown key '" + key + "'");
}

inline void validate(const RunConfig& c) {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorKind::Config, what);
  };
  need(c.nu > 0 && c.kappa > 0 && std::isfinite(c.nu) && std::isfinite(c.kappa), "nu and kappa must be positive");
  need(c.g >= 0 && std::isfinite(c.g), "g must be nonnegative");
  need(c.L > 0 && c.l > 0, "L and l must be positive");
  need(c.Nx >= 4 && c.Nx % 2 == 0 && c.Ny >= 4 && c.Ny % 2 == 0, "Nx and Ny must be even and >= 4");
  need(c.dt > 0 && std::isfinite(c.dt), "dt must be positive");
  need(c.mu > 0 && std::isfinite(c.mu), "mu must be positive");
  need(c.h > 0 && c.h < std::min(c.L, c.l), "h must satisfy 0 < h < min(L, l)");
  need(c.interpolant == "fourier" || c.interpolant == "volume" || c.interpolant == "nodal",
       "interpolant must be fourier, volume or nodal");
  need(c.spin_tolerance > 0, "spin_tolerance must be positive");
  need(c.tau_min >= 0 && c.spin_offset >= 0, "tau_min and spin_offset must be nonnegative");
  need(c.amplitude >= 0 && c.burn_in >= 0 && c.t_end > 0, "amplitude, burn_in, t_end must be nonnegative");
  need(c.record_every > 0 && c.snapshot_every >= 0 && c.span > 0 && c.keep_every >= 0,
       "record_every, span must be positive");
  need(c.v0_scale > 0 && c.beta_grid >= 2 && c.s_span > 0 && c.ds > 0 && c.beta_tol > 0,
       "determining-form settings must be positive");
  need(c.bc == "stressfree" || c.bc == "noslip", "bc must be stressfree or noslip");
  need(c.J1 >= 0 && c.J2 >= 0 && c.rho >= 0, "J1, J2, rho must be nonnegative");
  for (double u : {c.c_L, c.c_T, c.c_B, c.c_A, c.c_E, c.c0, c.c1, c.c2, c.ct1, c.ct2})
    need(u > 0 && std::isfinite(u), "universal constants must be positive");
  need(c.fit_members >= 1, "fit_members must be positive");
}

inline RunConfig parse_config(const std::string& text) {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorKind::Config, "line " + std::to_string(lineno) + ": expected key = value");
    set_config_value(c, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  validate(c);
  return c;
}

inline std::string serialize_config(const RunConfig& c) {
  std::string s;
  for (const auto& k : detail::config_keys()) s += std::string(k.name) + " = " + detail::render(c, k) + "\n";
  return s;
}

inline std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline RunConfig load_config(const std::string& path) {
  try {
    return parse_config(read_text(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Io) throw Error(ErrorKind::Config, e.what());
    throw;
  }
}

inline PhysicalParams physical_params(const RunConfig& c) {
  PhysicalParams p;
  p.nu = c.nu;
  p.kappa = c.kappa;
  p.g = c.g;
  p.a = c.a;
  p.domain.L = c.L;
  p.domain.l = c.l;
  p.domain.Nx = c.Nx;
  p.domain.Ny = c.Ny;
  return p;
}

inline StepperConfig stepper_config(const RunConfig& c) {
  StepperConfig s;
  s.dt = c.dt;
  s.pin_mean = c.pin_mean;
  return s;
}

inline InterpolantKind interpolant_kind(const RunConfig& c) {
  return InterpolantKind{interpolant_type_from_string(c.interpolant), c.h};
}

inline SpinUpConfig spin_up_config(const RunConfig& c) {
  SpinUpConfig s;
  s.tau_min = c.tau_min;
  s.tolerance = c.spin_tolerance;
  s.offset = c.spin_offset;
  s.keep_every = c.keep_every;
  return s;
}

inline UniversalConstants universal_constants(const RunConfig& c) {
  UniversalConstants u;
  u.cL = c.c_L;
  u.cT = c.c_T;
  u.cB = c.c_B;
  u.cA = c.c_A;
  u.cE = c.c_E;
  u.c0 = c.c0;
  u.c1 = c.c1;
  u.c2 = c.c2;
  u.ct1 = c.ct1;
  u.ct2 = c.ct2;
  return u;
}

/// ISO-8601 UTC timestamp, second resolution.
inline std::string iso8601_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// CSV file with a leading metadata comment and a header row.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& columns, const std::string& meta = "")
      : f_(path), ncol_(columns.size()) {
    if (!f_) throw Error(ErrorKind::Io, "cannot write " + path);
    f_ << "# rbdf " << iso8601_now();
    if (!meta.empty()) f_ << " " << meta;
    f_ << "\n";
    for (std::size_t i = 0; i < columns.size(); ++i) f_ << (i ? "," : "") << columns[i];
    f_ << "\n";
  }

  void row(const std::vector<double>& values) {
    require(values.size() == ncol_, ErrorKind::InvalidArgument, "row width does not match the header");
    for (std::size_t i = 0; i < values.size(); ++i) f_ << (i ? "," : "") << format_g(values[i]);
    f_ << "\n";
  }

  void flush() { f_.flush(); }

 private:
  std::ofstream f_;
  std::size_t ncol_;
};

/// Writes text with the same metadata comment line that CSV files carry.
inline void write_csv_text(const std::string& path, const std::string& csv, const std::string& meta = "") {
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::Io, "cannot write " + path);
  f << "# rbdf " << iso8601_now();
  if (!meta.empty()) f << " " << meta;
  f << "\n" << csv;
}

struct SnapshotHeader {
  std::uint8_t bc = 0;
  std::uint32_t Nx = 0, Ny = 0;
  double L = 0, l = 0, nu = 0, kappa = 0, g = 0, t = 0;
};

struct Snapshot {
  SnapshotHeader header;
  PhysicalFields fields;  // x2-major in memory, like every grid buffer
};

namespace detail {

constexpr std::array<char, 4> kMagic = {'R', 'B', 'D', 'F'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put_le(std::string& out, T v) {
  std::array<unsigned char, sizeof(T)> b;
  std::memcpy(b.data(), &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b.begin(), b.end());
  out.append(reinterpret_cast<const char*>(b.data()), sizeof(T));
}

template <class T>
T get_le(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw Error(ErrorKind::Io, "snapshot truncated");
  std::array<unsigned char, sizeof(T)> b;
  std::memcpy(b.data(), in.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b.begin(), b.end());
  pos += sizeof(T);
  T v;
  std::memcpy(&v, b.data(), sizeof(T));
  return v;
}

}  // namespace detail

/// File layout: magic, u32 version, u8 bc, u32 Nx, u32 Ny, f64 L, l, nu,
/// kappa, g, t, then u1, u2, theta as little-endian f64 with x1 as the
/// outer index (value of grid point (i, j) at position i*Ny + j).
inline std::string encode_snapshot(const Snapshot& s) {
  const auto& h = s.header;
  const std::size_t n = std::size_t(h.Nx) * h.Ny;
  for (const auto* f : {&s.fields.u1, &s.fields.u2, &s.fields.theta})
    require(f->size() == n, ErrorKind::InvalidArgument, "snapshot field size does not match the grid");
  std::string out;
  out.reserve(64 + 3 * n * 8);
  out.append(detail::kMagic.data(), 4);
  detail::put_le(out, detail::kVersion);
  detail::put_le(out, h.bc);
  detail::put_le(out, h.Nx);
  detail::put_le(out, h.Ny);
  for (double v : {h.L, h.l, h.nu, h.kappa, h.g, h.t}) detail::put_le(out, v);
  for (const auto* f : {&s.fields.u1, &s.fields.u2, &s.fields.theta})
    for (std::uint32_t i = 0; i < h.Nx; ++i)
      for (std::uint32_t j = 0; j < h.Ny; ++j) detail::put_le(out, (*f)[std::size_t(j) * h.Nx + i]);
  return out;
}

inline Snapshot decode_snapshot(const std::string& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), detail::kMagic.data(), 4) != 0)
    throw Error(ErrorKind::Io, "not an RBDF snapshot");
  std::size_t pos = 4;
  const auto version = detail::get_le<std::uint32_t>(bytes, pos);
  if (version != detail::kVersion) throw Error(ErrorKind::Io, "unsupported snapshot version " + std::to_string(version));
  Snapshot s;
  auto& h = s.header;
  h.bc = detail::get_le<std::uint8_t>(bytes, pos);
  h.Nx = detail::get_le<std::uint32_t>(bytes, pos);
  h.Ny = detail::get_le<std::uint32_t>(bytes, pos);
  for (double* v : {&h.L, &h.l, &h.nu, &h.kappa, &h.g, &h.t}) *v = detail::get_le<double>(bytes, pos);
  const std::size_t n = std::size_t(h.Nx) * h.Ny;
  if (bytes.size() != pos + 3 * n * sizeof(double)) throw Error(ErrorKind::Io, "snapshot size does not match its header");
  for (auto* f : {&s.fields.u1, &s.fields.u2, &s.fields.theta}) {
    f->assign(n, 0.0);
    for (std::uint32_t i = 0; i < h.Nx; ++i)
      for (std::uint32_t j = 0; j < h.Ny; ++j) (*f)[std::size_t(j) * h.Nx + i] = detail::get_le<double>(bytes, pos);
  }
  return s;
}

inline Snapshot make_snapshot(const RBState& s, const PhysicalParams& p) {
  Snapshot snap;
  const auto& d = s.grid()->domain();
  snap.header = {static_cast<std::uint8_t>(d.bc), std::uint32_t(d.Nx), std::uint32_t(d.Ny), d.L, d.l, p.nu, p.kappa, p.g,
                 s.t};
  snap.fields = physical_values(s);
  return snap;
}

inline void write_snapshot(const std::string& path, const RBState& s, const PhysicalParams& p) {
  const std::string bytes = encode_snapshot(make_snapshot(s, p));
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "cannot write " + path);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(ErrorKind::Io, "write failed for " + path);
}

inline Snapshot read_snapshot(const std::string& path) { return decode_snapshot(read_text(path)); }

/// Rebuilds a solver state on a grid matching the snapshot header.
inline RBState load_state(const Snapshot& snap, const GridPtr& g) {
  const auto& d = g->domain();
  require(snap.header.Nx == std::uint32_t(d.Nx) && snap.header.Ny == std::uint32_t(d.Ny) && snap.header.L == d.L &&
              snap.header.l == d.l && snap.header.bc == static_cast<std::uint8_t>(d.bc),
          ErrorKind::Config, "snapshot grid does not match the configured domain");
  return restore_state(g, snap.fields, snap.header.t);
}

}  // namespace rbdf
