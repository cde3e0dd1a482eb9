#pragma once

#include "rbdf/error.hpp"
#include "rbdf/fft.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <random>
#include <string>
#include <tuple>
#include <vector>

namespace rbdf {

enum class BoundaryCondition : std::uint8_t { StressFree = 0, NoSlip = 1 };

/// Extended periodic box (0,L) x (-l,l) with Nx x Ny collocation points.
struct DomainSpec {
  double L = 2.0 * std::numbers::pi;
  double l = std::numbers::pi;
  int Nx = 64;
  int Ny = 128;
  BoundaryCondition bc = BoundaryCondition::StressFree;

  double area() const { return 2.0 * l * L; }

  bool operator==(const DomainSpec&) const = default;
};

inline void validate(const DomainSpec& d) {
  require(d.L > 0.0 && std::isfinite(d.L), ErrorKind::InvalidArgument, "L must be positive");
  require(d.l > 0.0 && std::isfinite(d.l), ErrorKind::InvalidArgument, "l must be positive");
  require(d.Nx >= 4 && d.Nx % 2 == 0, ErrorKind::InvalidArgument, "Nx must be even and >= 4");
  require(d.Ny >= 4 && d.Ny % 2 == 0, ErrorKind::InvalidArgument, "Ny must be even and >= 4");
  require(d.bc == BoundaryCondition::StressFree, ErrorKind::InvalidArgument,
          "only stress-free fields can be represented on the grid");
}

/// Wavenumber tables and transforms shared by every field on one domain.
///
/// Spectral index (i, j) with i in [0, Nx/2] and j in [0, Ny) stands for the
/// mode m = i, n = (j < Ny/2 ? j : j - Ny). Derivative factors vanish on the
/// Nyquist column and row so that differentiation keeps fields real; |k|^2
/// uses the true wavenumbers everywhere.
class Grid {
 public:
  explicit Grid(const DomainSpec& d) : dom_(d) {
    validate(d);
    nx_ = d.Nx;
    ny_ = d.Ny;
    mx_ = nx_ / 2 + 1;
    plan_ = FftPlan2D::get(nx_, ny_);
    k1_.resize(mx_);
    weight_.resize(mx_);
    for (int i = 0; i < mx_; ++i) {
      k1_[i] = (i == nx_ / 2) ? 0.0 : 2.0 * std::numbers::pi * i / d.L;
      weight_[i] = (i == 0 || i == nx_ / 2) ? 1.0 : 2.0;
    }
    k2_.resize(ny_);
    for (int j = 0; j < ny_; ++j) k2_[j] = (j == ny_ / 2) ? 0.0 : std::numbers::pi * n_of(j) / d.l;
    ksq_.resize(size());
    keep_.resize(size());
    const int mcut = (nx_ - 1) / 3;
    const int ncut = (ny_ - 1) / 3;
    for (int j = 0; j < ny_; ++j) {
      for (int i = 0; i < mx_; ++i) {
        const std::size_t id = index(i, j);
        const double a = 2.0 * std::numbers::pi * i / d.L;
        const double b = std::numbers::pi * n_of(j) / d.l;
        ksq_[id] = a * a + b * b;
        keep_[id] = (i <= mcut && std::abs(n_of(j)) <= ncut) ? 1 : 0;
      }
    }
  }

  /// Shared instance per domain; fields compare grids by domain.
  static std::shared_ptr<const Grid> make(const DomainSpec& d) {
    static std::mutex mtx;
    static std::map<std::tuple<double, double, int, int>, std::shared_ptr<const Grid>> cache;
    std::lock_guard lock(mtx);
    auto& slot = cache[{d.L, d.l, d.Nx, d.Ny}];
    if (!slot) slot = std::make_shared<const Grid>(d);
    return slot;
  }

  const DomainSpec& domain() const { return dom_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int mx() const { return mx_; }
  std::size_t size() const { return static_cast<std::size_t>(ny_) * mx_; }
  std::size_t physical_size() const { return static_cast<std::size_t>(ny_) * nx_; }
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * mx_ + i; }
  int n_of(int j) const { return j < ny_ / 2 ? j : j - ny_; }
  int mirror_j(int j) const { return (ny_ - j) % ny_; }

  double k1(int i) const { return k1_[i]; }
  double k2(int j) const { return k2_[j]; }
  double ksq(std::size_t id) const { return ksq_[id]; }
  double weight(int i) const { return weight_[i]; }
  bool dealias_keep(std::size_t id) const { return keep_[id] != 0; }
  double area() const { return dom_.area(); }

  double x1(int i) const { return dom_.L * i / nx_; }
  double x2(int j) const { return 2.0 * dom_.l * j / ny_; }

  const FftPlan2D& fft() const { return *plan_; }

 private:
  DomainSpec dom_;
  int nx_ = 0, ny_ = 0, mx_ = 0;
  std::shared_ptr<const FftPlan2D> plan_;
  std::vector<double> k1_, k2_, ksq_, weight_;
  std::vector<std::uint8_t> keep_;
};

using GridPtr = std::shared_ptr<const Grid>;

enum class Parity : std::uint8_t { EvenX2, OddX2 };

inline Parity flip(Parity p) { return p == Parity::EvenX2 ? Parity::OddX2 : Parity::EvenX2; }

/// Fourier coefficients c(m, n) of a real field, f(x) = sum c e^{i k.x}.
struct SpectralField {
  GridPtr grid;
  ComplexBuffer c;
  Parity parity = Parity::EvenX2;

  SpectralField() = default;
  SpectralField(GridPtr g, Parity p) : grid(std::move(g)), c(grid->size(), Complex{}), parity(p) {}

  std::size_t size() const { return c.size(); }
  Complex& operator[](std::size_t id) { return c[id]; }
  const Complex& operator[](std::size_t id) const { return c[id]; }
  Complex& at(int i, int j) { return c[grid->index(i, j)]; }
  const Complex& at(int i, int j) const { return c[grid->index(i, j)]; }

  SpectralField& operator+=(const SpectralField& o) {
    for (std::size_t k = 0; k < c.size(); ++k) c[k] += o.c[k];
    return *this;
  }
  SpectralField& operator-=(const SpectralField& o) {
    for (std::size_t k = 0; k < c.size(); ++k) c[k] -= o.c[k];
    return *this;
  }
  SpectralField& operator*=(double s) {
    for (auto& z : c) z *= s;
    return *this;
  }
  /// this += a * o
  SpectralField& axpy(double a, const SpectralField& o) {
    for (std::size_t k = 0; k < c.size(); ++k) c[k] += a * o.c[k];
    return *this;
  }
  void set_zero() { std::fill(c.begin(), c.end(), Complex{}); }

  bool all_finite() const {
    for (const auto& z : c)
      if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    return true;
  }
};

inline SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
inline SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
inline SpectralField operator*(double s, SpectralField a) { return a *= s; }

using ScalarField = SpectralField;

struct VelocityField {
  SpectralField u1;  // even in x2
  SpectralField u2;  // odd in x2

  VelocityField() = default;
  explicit VelocityField(const GridPtr& g) : u1(g, Parity::EvenX2), u2(g, Parity::OddX2) {}
  VelocityField(SpectralField a, SpectralField b) : u1(std::move(a)), u2(std::move(b)) {}

  const GridPtr& grid() const { return u1.grid; }

  VelocityField& operator+=(const VelocityField& o) {
    u1 += o.u1;
    u2 += o.u2;
    return *this;
  }
  VelocityField& operator-=(const VelocityField& o) {
    u1 -= o.u1;
    u2 -= o.u2;
    return *this;
  }
  VelocityField& operator*=(double s) {
    u1 *= s;
    u2 *= s;
    return *this;
  }
  VelocityField& axpy(double a, const VelocityField& o) {
    u1.axpy(a, o.u1);
    u2.axpy(a, o.u2);
    return *this;
  }
  void set_zero() {
    u1.set_zero();
    u2.set_zero();
  }
  bool all_finite() const { return u1.all_finite() && u2.all_finite(); }
};

inline VelocityField operator+(VelocityField a, const VelocityField& b) { return a += b; }
inline VelocityField operator-(VelocityField a, const VelocityField& b) { return a -= b; }
inline VelocityField operator*(double s, VelocityField a) { return a *= s; }

/// Generic two-component spectral pair; no divergence or parity contract.
using SpectralPair = VelocityField;

inline void require_same_grid(const SpectralField& a, const SpectralField& b) {
  require(a.grid && b.grid && (a.grid == b.grid || a.grid->domain() == b.grid->domain()),
          ErrorKind::InvalidArgument, "fields live on different domains");
}

// ---------------------------------------------------------------------------
// Transforms

inline RealBuffer to_physical(const SpectralField& f) {
  RealBuffer out;
  f.grid->fft().backward(f.c, out);
  return out;
}

inline SpectralField to_spectral(const GridPtr& g, const RealBuffer& values, Parity p) {
  require(values.size() == g->physical_size(), ErrorKind::InvalidArgument,
          "physical array has wrong size");
  SpectralField f(g, p);
  g->fft().forward(values, f.c);
  return f;
}

/// Physical values from a point function f(x1, x2) on the collocation grid.
template <class Fn>
RealBuffer sample(const Grid& g, Fn&& fn) {
  RealBuffer out(g.physical_size());
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) out[static_cast<std::size_t>(j) * g.nx() + i] = fn(g.x1(i), g.x2(j));
  return out;
}

// ---------------------------------------------------------------------------
// Projections

/// Exact projection onto the field's x2-parity class. On the self-conjugate
/// columns (m = 0 and Nyquist) Hermitian symmetry forces even coefficients to
/// be real and odd ones imaginary.
inline SpectralField symmetry_project(const SpectralField& f) {
  const Grid& g = *f.grid;
  SpectralField out(f.grid, f.parity);
  const double s = f.parity == Parity::EvenX2 ? 1.0 : -1.0;
  for (int j = 0; j < g.ny(); ++j) {
    const int jm = g.mirror_j(j);
    for (int i = 0; i < g.mx(); ++i) {
      Complex z = 0.5 * (f.at(i, j) + s * f.at(i, jm));
      if (i == 0 || i == g.nx() / 2) z = (s > 0) ? Complex(z.real(), 0.0) : Complex(0.0, z.imag());
      out.at(i, j) = z;
    }
  }
  return out;
}

inline SpectralField symmetry_project(const SpectralField& f, Parity p) {
  SpectralField tagged = f;
  tagged.parity = p;
  return symmetry_project(tagged);
}

inline VelocityField symmetry_project(const VelocityField& u) {
  return {symmetry_project(u.u1, Parity::EvenX2), symmetry_project(u.u2, Parity::OddX2)};
}

/// Helmholtz-Leray projection, mode by mode; the k = 0 mode is untouched.
inline VelocityField leray_project(const SpectralPair& u) {
  require_same_grid(u.u1, u.u2);
  const Grid& g = *u.grid();
  VelocityField out = u;
  out.u1.parity = Parity::EvenX2;
  out.u2.parity = Parity::OddX2;
  for (int j = 0; j < g.ny(); ++j) {
    for (int i = 0; i < g.mx(); ++i) {
      const std::size_t id = g.index(i, j);
      const double k2 = g.k1(i) * g.k1(i) + g.k2(j) * g.k2(j);
      if (k2 == 0.0) continue;
      const Complex kd = g.k1(i) * u.u1[id] + g.k2(j) * u.u2[id];
      out.u1[id] -= g.k1(i) * kd / k2;
      out.u2[id] -= g.k2(j) * kd / k2;
    }
  }
  return out;
}

/// Zero every mode outside the 2/3 box |m| < Nx/3, |n| < Ny/3.
inline SpectralField dealias(const SpectralField& f) {
  SpectralField out = f;
  for (std::size_t id = 0; id < out.size(); ++id)
    if (!f.grid->dealias_keep(id)) out[id] = Complex{};
  return out;
}

inline VelocityField dealias(const VelocityField& u) { return {dealias(u.u1), dealias(u.u2)}; }

/// Sets the spatial mean of u1 so that its integral over the box equals `a`.
inline void pin_mean(VelocityField& u, double a = 0.0) {
  u.u1[0] = Complex(a / u.grid()->area(), 0.0);
  u.u2[0] = Complex{};
}

inline double mean_integral(const SpectralField& f) { return f[0].real() * f.grid->area(); }

// ---------------------------------------------------------------------------
// Operators

enum class Operator { A0, A1 };

/// -Laplacian: multiplies every coefficient by |k|^2.
inline SpectralField laplacian_apply(const SpectralField& f, Operator = Operator::A0) {
  SpectralField out = f;
  for (std::size_t id = 0; id < out.size(); ++id) out[id] *= f.grid->ksq(id);
  return out;
}

inline VelocityField laplacian_apply(const VelocityField& u, Operator which = Operator::A0) {
  return {laplacian_apply(u.u1, which), laplacian_apply(u.u2, which)};
}

inline SpectralField d_dx1(const SpectralField& f) {
  const Grid& g = *f.grid;
  SpectralField out(f.grid, f.parity);
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.mx(); ++i) out.at(i, j) = Complex(0.0, g.k1(i)) * f.at(i, j);
  return out;
}

inline SpectralField d_dx2(const SpectralField& f) {
  const Grid& g = *f.grid;
  SpectralField out(f.grid, flip(f.parity));
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.mx(); ++i) out.at(i, j) = Complex(0.0, g.k2(j)) * f.at(i, j);
  return out;
}

/// Smallest eigenvalue of -Laplacian on odd 2l-periodic functions, (pi/l)^2.
inline double eig_lambda1(const DomainSpec& d) {
  const double r = std::numbers::pi / d.l;
  return r * r;
}

/// Largest |k.u| over modes, for divergence checks.
inline double max_divergence(const VelocityField& u) {
  const Grid& g = *u.grid();
  double worst = 0.0;
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.mx(); ++i) {
      const std::size_t id = g.index(i, j);
      worst = std::max(worst, std::abs(g.k1(i) * u.u1[id] + g.k2(j) * u.u2[id]));
    }
  return worst;
}

/// Distance of a field from its own parity class, in coefficient 2-norm.
inline double parity_residual(const SpectralField& f) {
  const Grid& g = *f.grid;
  const double s = f.parity == Parity::EvenX2 ? 1.0 : -1.0;
  double acc = 0.0;
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.mx(); ++i) acc += g.weight(i) * std::norm(f.at(i, j) - s * f.at(i, g.mirror_j(j)));
  return std::sqrt(0.25 * acc * g.area());
}

// ---------------------------------------------------------------------------
// Inner products and norms (all Parseval-exact)

namespace detail {

template <class Weight>
double weighted_sum(const SpectralField& f, const SpectralField& h, Weight&& wk) {
  const Grid& g = *f.grid;
  double acc = 0.0;
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.mx(); ++i) {
      const std::size_t id = g.index(i, j);
      acc += g.weight(i) * wk(id) * (f[id].real() * h[id].real() + f[id].imag() * h[id].imag());
    }
  return acc * g.area();
}

}  // namespace detail

/// (f, h) = integral of f h over the extended box.
inline double inner(const SpectralField& f, const SpectralField& h) {
  require_same_grid(f, h);
  return detail::weighted_sum(f, h, [](std::size_t) { return 1.0; });
}

inline double inner(const VelocityField& u, const VelocityField& v) {
  return inner(u.u1, v.u1) + inner(u.u2, v.u2);
}

/// ((f, h)) = integral of grad f . grad h.
inline double inner_h1(const SpectralField& f, const SpectralField& h) {
  require_same_grid(f, h);
  const Grid& g = *f.grid;
  return detail::weighted_sum(f, h, [&g](std::size_t id) { return g.ksq(id); });
}

inline double inner_h1(const VelocityField& u, const VelocityField& v) {
  return inner_h1(u.u1, v.u1) + inner_h1(u.u2, v.u2);
}

inline double norm_L2_sq(const SpectralField& f) { return inner(f, f); }
inline double norm_L2_sq(const VelocityField& u) { return inner(u, u); }
inline double norm_L2(const SpectralField& f) { return std::sqrt(norm_L2_sq(f)); }
inline double norm_L2(const VelocityField& u) { return std::sqrt(norm_L2_sq(u)); }

inline double norm_H1seminorm_sq(const SpectralField& f) { return inner_h1(f, f); }
inline double norm_H1seminorm_sq(const VelocityField& u) { return inner_h1(u, u); }
inline double norm_H1seminorm(const SpectralField& f) { return std::sqrt(norm_H1seminorm_sq(f)); }
inline double norm_H1seminorm(const VelocityField& u) { return std::sqrt(norm_H1seminorm_sq(u)); }

/// (|u|^2/|Omega| + ||u||^2)^{1/2}
inline double norm_V0(const VelocityField& u) {
  return std::sqrt(norm_L2_sq(u) / u.grid()->area() + norm_H1seminorm_sq(u));
}

inline double norm_V1(const SpectralField& theta) { return norm_H1seminorm(theta); }

inline double norm_A_sq(const SpectralField& f) {
  const Grid& g = *f.grid;
  return detail::weighted_sum(f, f, [&g](std::size_t id) { return g.ksq(id) * g.ksq(id); });
}

/// |A0 u|
inline double norm_A0(const VelocityField& u) { return std::sqrt(norm_A_sq(u.u1) + norm_A_sq(u.u2)); }

/// |A1 theta|
inline double norm_A1(const SpectralField& theta) { return std::sqrt(norm_A_sq(theta)); }

// ---------------------------------------------------------------------------
// Random smooth fields

/// Gaussian coefficients on modes with m^2 + n^2 <= radius^2, projected onto
/// the parity class and scaled to unit L2 norm (zero field if empty).
template <class Rng>
SpectralField random_field(const GridPtr& g, Parity p, double radius, Rng& rng) {
  std::normal_distribution<double> N(0.0, 1.0);
  SpectralField f(g, p);
  for (int j = 0; j < g->ny(); ++j)
    for (int i = 0; i < g->mx(); ++i) {
      const double n = g->n_of(j);
      const double amp = (i * i + n * n <= radius * radius) ? 1.0 : 0.0;
      const double re = N(rng);
      const double im = N(rng);
      f.at(i, j) = amp * Complex(re, im);
    }
  f = dealias(symmetry_project(f));
  f[0] = Complex{};
  const double nrm = norm_L2(f);
  if (nrm > 0.0) f *= 1.0 / nrm;
  return f;
}

/// Divergence-free, parity-correct, zero-mean random velocity of unit L2 norm.
template <class Rng>
VelocityField random_velocity(const GridPtr& g, double radius, Rng& rng) {
  VelocityField u(random_field(g, Parity::EvenX2, radius, rng), random_field(g, Parity::OddX2, radius, rng));
  u = symmetry_project(leray_project(u));
  pin_mean(u, 0.0);
  const double nrm = norm_L2(u);
  if (nrm > 0.0) u *= 1.0 / nrm;
  return u;
}

}  // namespace rbdf
