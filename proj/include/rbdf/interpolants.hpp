#pragma once

#include "rbdf/parallel.hpp"
#include "rbdf/spectral_core.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace rbdf {

enum class InterpolantType { FourierLowpass, VolumeAverage, NodalBilinear };

inline std::string to_string(InterpolantType t) {
  switch (t) {
    case InterpolantType::FourierLowpass: return "fourier";
    case InterpolantType::VolumeAverage: return "volume";
    case InterpolantType::NodalBilinear: return "nodal";
  }
  return "unknown";
}

inline InterpolantType interpolant_type_from_string(const std::string& s) {
  if (s == "fourier") return InterpolantType::FourierLowpass;
  if (s == "volume") return InterpolantType::VolumeAverage;
  if (s == "nodal") return InterpolantType::NodalBilinear;
  throw Error(ErrorKind::Config, "unknown interpolant '" + s + "' (fourier|volume|nodal)");
}

struct InterpolantKind {
  InterpolantType type = InterpolantType::FourierLowpass;
  double h = 0.25;

  /// Type I operators only need H1 regularity; nodal values need H2.
  bool type_one() const { return type != InterpolantType::NodalBilinear; }
};

/// Largest |k| kept by the dealiasing box on every axis.
inline double dealias_radius(const Grid& g) {
  const double k1 = 2.0 * std::numbers::pi / g.domain().L * ((g.nx() - 1) / 3);
  const double k2 = std::numbers::pi / g.domain().l * ((g.ny() - 1) / 3);
  return std::min(k1, k2);
}

/// A finite-rank interpolant bound to one grid. Immutable after construction.
///
/// Cell layouts start at x1 = 0 and x2 = 0 so that cells and nodes are mapped
/// onto each other by x2 -> -x2, which keeps parity classes invariant.
class Interpolant {
 public:
  Interpolant(const InterpolantKind& kind, GridPtr g) : kind_(kind), grid_(std::move(g)) {
    const Grid& G = *grid_;
    const double L = G.domain().L, l = G.domain().l;
    require(kind.h > 0.0 && std::isfinite(kind.h), ErrorKind::InvalidArgument, "h must be positive");
    require(kind.h < std::min(L, l), ErrorKind::InvalidArgument, "h must be smaller than min(L, l)");
    require(1.0 / kind.h <= dealias_radius(G) * (1 + 1e-12), ErrorKind::HTooSmall,
            "1/h exceeds the resolved wavenumber range");
    if (kind.type == InterpolantType::FourierLowpass) return;

    ncx_ = std::max(1, static_cast<int>(std::lround(L / kind.h)));
    ncy_ = std::max(2, 2 * static_cast<int>(std::lround(l / kind.h)));
    require(G.nx() >= 2 * ncx_ && G.ny() >= 2 * ncy_, ErrorKind::HTooSmall,
            "interpolant cells are narrower than two grid spacings");
    dx_ = L / ncx_;
    dy_ = 2.0 * l / ncy_;
    const bool avg = kind.type == InterpolantType::VolumeAverage;
    auto sinc = [](double z) { return z == 0.0 ? 1.0 : std::sin(z) / z; };
    e1_.resize(static_cast<std::size_t>(ncx_) * G.mx());
    for (int c = 0; c < ncx_; ++c)
      for (int i = 0; i < G.mx(); ++i) {
        const double k = 2.0 * std::numbers::pi * i / L;
        const double x = avg ? (c + 0.5) * dx_ : c * dx_;
        e1_[static_cast<std::size_t>(c) * G.mx() + i] =
            G.weight(i) * (avg ? sinc(0.5 * k * dx_) : 1.0) * std::exp(Complex(0.0, k * x));
      }
    e2_.resize(static_cast<std::size_t>(ncy_) * G.ny());
    for (int c = 0; c < ncy_; ++c)
      for (int j = 0; j < G.ny(); ++j) {
        const double k = std::numbers::pi * G.n_of(j) / l;
        const double y = avg ? (c + 0.5) * dy_ : c * dy_;
        e2_[static_cast<std::size_t>(c) * G.ny() + j] = (avg ? sinc(0.5 * k * dy_) : 1.0) * std::exp(Complex(0.0, k * y));
      }
  }

  const InterpolantKind& kind() const { return kind_; }
  const GridPtr& grid() const { return grid_; }
  int cells_x() const { return ncx_; }
  int cells_y() const { return ncy_; }

  /// Rank of the operator (number of independent output degrees of freedom).
  std::size_t rank() const {
    if (kind_.type != InterpolantType::FourierLowpass) return static_cast<std::size_t>(ncx_) * ncy_;
    std::size_t r = 0;
    for (int j = 0; j < grid_->ny(); ++j)
      for (int i = 0; i < grid_->mx(); ++i)
        if (keep(grid_->index(i, j))) r += (i == 0) ? 1 : 2;
    return r;
  }

  bool keep(std::size_t id) const { return grid_->ksq(id) * kind_.h * kind_.h <= 1.0 + 1e-12; }

  /// Cell averages or nodal values, cx-major (ncx x ncy).
  std::vector<double> cell_values(const SpectralField& f) const {
    const Grid& G = *grid_;
    std::vector<Complex> partial(static_cast<std::size_t>(ncx_) * G.ny());
    for (int c = 0; c < ncx_; ++c)
      for (int j = 0; j < G.ny(); ++j) {
        Complex acc{};
        const Complex* e = &e1_[static_cast<std::size_t>(c) * G.mx()];
        for (int i = 0; i < G.mx(); ++i) acc += f.at(i, j) * e[i];
        partial[static_cast<std::size_t>(c) * G.ny() + j] = acc;
      }
    std::vector<double> out(static_cast<std::size_t>(ncx_) * ncy_);
    for (int c = 0; c < ncx_; ++c)
      for (int d = 0; d < ncy_; ++d) {
        Complex acc{};
        const Complex* p = &partial[static_cast<std::size_t>(c) * G.ny()];
        const Complex* e = &e2_[static_cast<std::size_t>(d) * G.ny()];
        for (int j = 0; j < G.ny(); ++j) acc += p[j] * e[j];
        out[static_cast<std::size_t>(c) * ncy_ + d] = acc.real();
      }
    return out;
  }

  SpectralField apply(const SpectralField& f) const {
    require(f.grid == grid_ || f.grid->domain() == grid_->domain(), ErrorKind::InvalidArgument,
            "field and interpolant live on different domains");
    if (kind_.type == InterpolantType::FourierLowpass) {
      SpectralField out = f;
      for (std::size_t id = 0; id < out.size(); ++id)
        if (!keep(id)) out[id] = Complex{};
      return out;
    }
    const Grid& G = *grid_;
    const std::vector<double> v = cell_values(f);
    RealBuffer phys(G.physical_size());
    for (int j = 0; j < G.ny(); ++j) {
      const double y = G.x2(j) / dy_;
      const int cy = std::min(static_cast<int>(std::floor(y)), ncy_ - 1);
      const double fy = y - cy;
      for (int i = 0; i < G.nx(); ++i) {
        const double x = G.x1(i) / dx_;
        const int cx = std::min(static_cast<int>(std::floor(x)), ncx_ - 1);
        double val;
        if (kind_.type == InterpolantType::VolumeAverage) {
          // Points on a cell edge take the mean of both neighbours.
          const int ex = on_edge(x) ? static_cast<int>(std::lround(x)) % ncx_ : cx;
          const int ey = on_edge(y) ? static_cast<int>(std::lround(y)) % ncy_ : cy;
          const int exm = on_edge(x) ? (ex + ncx_ - 1) % ncx_ : ex;
          const int eym = on_edge(y) ? (ey + ncy_ - 1) % ncy_ : ey;
          auto at = [&](int a, int b) { return v[static_cast<std::size_t>(a) * ncy_ + b]; };
          val = 0.25 * (at(ex, ey) + at(exm, ey) + at(ex, eym) + at(exm, eym));
        } else {
          const double fx = x - cx;
          const int cx1 = (cx + 1) % ncx_, cy1 = (cy + 1) % ncy_;
          auto at = [&](int a, int b) { return v[static_cast<std::size_t>(a) * ncy_ + b]; };
          val = (1 - fx) * (1 - fy) * at(cx, cy) + fx * (1 - fy) * at(cx1, cy) + (1 - fx) * fy * at(cx, cy1) +
                fx * fy * at(cx1, cy1);
        }
        phys[static_cast<std::size_t>(j) * G.nx() + i] = val;
      }
    }
    return to_spectral(grid_, phys, f.parity);
  }

  SpectralPair apply(const VelocityField& u) const { return {apply(u.u1), apply(u.u2)}; }

 private:
  static bool on_edge(double x) { return std::abs(x - std::round(x)) < 1e-9; }

  InterpolantKind kind_;
  GridPtr grid_;
  int ncx_ = 0, ncy_ = 0;
  double dx_ = 0.0, dy_ = 0.0;
  std::vector<Complex> e1_, e2_;
};

inline SpectralField apply_raw(const InterpolantKind& kind, const SpectralField& f) {
  return Interpolant(kind, f.grid).apply(f);
}

inline SpectralPair apply_raw(const InterpolantKind& kind, const VelocityField& u) {
  return Interpolant(kind, u.grid()).apply(u);
}

/// Half-spectrum indices with |k|^2 <= 1/h^2; trajectories in the range of
/// the modified interpolant are stored on this set only.
class ModeSet {
 public:
  ModeSet() = default;
  ModeSet(GridPtr g, double h) : grid_(std::move(g)) {
    for (int j = 0; j < grid_->ny(); ++j)
      for (int i = 0; i < grid_->mx(); ++i) {
        const std::size_t id = grid_->index(i, j);
        if (grid_->ksq(id) * h * h <= 1.0 + 1e-12) {
          ids_.push_back(id);
          w_.push_back(grid_->weight(i));
          ksq_.push_back(grid_->ksq(id));
        }
      }
  }
  const GridPtr& grid() const { return grid_; }
  std::size_t size() const { return ids_.size(); }
  std::size_t id(std::size_t k) const { return ids_[k]; }
  double weight(std::size_t k) const { return w_[k]; }
  double ksq(std::size_t k) const { return ksq_[k]; }

 private:
  GridPtr grid_;
  std::vector<std::size_t> ids_;
  std::vector<double> w_, ksq_;
};

/// Velocity coefficients restricted to a ModeSet.
struct CompactVelocity {
  std::vector<Complex> u1, u2;

  CompactVelocity& axpy(double a, const CompactVelocity& o) {
    for (std::size_t k = 0; k < u1.size(); ++k) {
      u1[k] += a * o.u1[k];
      u2[k] += a * o.u2[k];
    }
    return *this;
  }
  CompactVelocity& operator*=(double s) {
    for (auto& z : u1) z *= s;
    for (auto& z : u2) z *= s;
    return *this;
  }
};

inline CompactVelocity compress(const ModeSet& m, const VelocityField& u) {
  CompactVelocity c;
  c.u1.resize(m.size());
  c.u2.resize(m.size());
  for (std::size_t k = 0; k < m.size(); ++k) {
    c.u1[k] = u.u1[m.id(k)];
    c.u2[k] = u.u2[m.id(k)];
  }
  return c;
}

inline VelocityField expand(const ModeSet& m, const CompactVelocity& c) {
  VelocityField u(m.grid());
  for (std::size_t k = 0; k < m.size(); ++k) {
    u.u1[m.id(k)] = c.u1[k];
    u.u2[m.id(k)] = c.u2[k];
  }
  return u;
}

/// ||.||_V0 evaluated directly on compact coefficients.
inline double norm_V0(const ModeSet& m, const CompactVelocity& c) {
  double l2 = 0.0, h1 = 0.0;
  for (std::size_t k = 0; k < m.size(); ++k) {
    const double e = m.weight(k) * (std::norm(c.u1[k]) + std::norm(c.u2[k]));
    l2 += e;
    h1 += e * m.ksq(k);
  }
  const double area = m.grid()->area();
  return std::sqrt(l2 + h1 * area);
}

/// ||a - b||_V0 without materializing the difference.
inline double distance_V0(const ModeSet& m, const CompactVelocity& a, const CompactVelocity& b) {
  double l2 = 0.0, h1 = 0.0;
  for (std::size_t k = 0; k < m.size(); ++k) {
    const double e = m.weight(k) * (std::norm(a.u1[k] - b.u1[k]) + std::norm(a.u2[k] - b.u2[k]));
    l2 += e;
    h1 += e * m.ksq(k);
  }
  return std::sqrt(l2 + h1 * m.grid()->area());
}

/// I~_h = P_r I_h: base interpolant followed by the spectral projection onto
/// the velocity eigenmodes with |k|^2 <= 1/h^2 (symmetry, lowpass, Leray).
class ModifiedInterpolant {
 public:
  ModifiedInterpolant(const InterpolantKind& kind, const GridPtr& g)
      : base_(std::make_shared<const Interpolant>(kind, g)), modes_(g, kind.h) {}

  const InterpolantKind& kind() const { return base_->kind(); }
  const Interpolant& base() const { return *base_; }
  const GridPtr& grid() const { return base_->grid(); }
  const ModeSet& modes() const { return modes_; }

  /// Number of velocity eigenfunctions in the range of P_r: the mean mode,
  /// one shear mode per n >= 1 with m = 0, two per n >= 1 with m >= 1.
  std::size_t r() const {
    const Grid& G = *grid();
    std::size_t r = 1;
    for (int j = 0; j < G.ny(); ++j) {
      const int n = G.n_of(j);
      if (n < 1 || j == G.ny() / 2) continue;
      for (int i = 0; i < G.mx() - 1; ++i)
        if (G.ksq(G.index(i, j)) * kind().h * kind().h <= 1.0 + 1e-12) r += (i == 0) ? 1 : 2;
    }
    return r;
  }

  /// P_r alone.
  VelocityField project(const SpectralPair& v) const {
    VelocityField s = symmetry_project(v);
    for (std::size_t id = 0; id < s.u1.size(); ++id)
      if (!base_->keep(id)) {
        s.u1[id] = Complex{};
        s.u2[id] = Complex{};
      }
    return leray_project(s);
  }

  VelocityField apply(const VelocityField& u) const { return project(base_->apply(u)); }

  CompactVelocity apply_compact(const VelocityField& u) const { return compress(modes_, apply(u)); }

 private:
  std::shared_ptr<const Interpolant> base_;
  ModeSet modes_;
};

inline VelocityField apply_modified(const ModifiedInterpolant& m, const VelocityField& u) { return m.apply(u); }

// ---------------------------------------------------------------------------
// Empirical approximation constants

/// Copy the overlapping modes of f onto another grid (zero padding or
/// truncation; same box).
inline SpectralField resample(const SpectralField& f, const GridPtr& to) {
  const Grid& A = *f.grid;
  const Grid& B = *to;
  SpectralField out(to, f.parity);
  const int mmax = std::min(A.mx(), B.mx()) - 1;
  const int nmax = std::min(A.ny(), B.ny()) / 2 - 1;
  for (int j = 0; j < A.ny(); ++j) {
    const int n = A.n_of(j);
    if (std::abs(n) > nmax) continue;
    for (int i = 0; i < mmax; ++i) out.at(i, (n + B.ny()) % B.ny()) = f.at(i, j);
  }
  return out;
}

inline VelocityField resample(const VelocityField& u, const GridPtr& to) {
  return {resample(u.u1, to), resample(u.u2, to)};
}

struct EnsembleSpec {
  DomainSpec domain;              // grid on which errors are measured
  std::vector<double> hs;         // at least four length scales
  int members = 100;              // random fields per ensemble
  double mode_radius = 6.0;       // |(m,n)| cutoff of the random fields
  double spectral_decay = 1.0;    // coefficient amplitude ~ (1 + |k|^2)^{-decay}
  std::uint64_t seed = 1;
};

struct FitSample {
  double h, error, term1, term2, ratio;
};

struct ConstantsFit {
  double c0_hat = 0.0;  // Type I envelope: |phi - I phi| <= c0 h ||phi||_H1
  double c1_hat = 0.0;  // Type II envelope
  double c2_hat = 0.0;
  double c1_ls = 0.0;   // unscaled nonnegative least squares
  double c2_ls = 0.0;
  double max_ratio = 0.0;
  double mean_ratio = 0.0;
  std::vector<FitSample> samples;
};

/// Random smooth velocities drawn on a fixed reference grid, so the same
/// ensemble is obtained for every target grid resolution.
inline std::vector<VelocityField> random_ensemble(const EnsembleSpec& spec, const GridPtr& target) {
  DomainSpec ref = spec.domain;
  ref.Nx = 2 * (static_cast<int>(std::ceil(spec.mode_radius)) + 2) * 2;
  ref.Ny = ref.Nx;
  const GridPtr rg = Grid::make(ref);
  std::mt19937_64 rng(spec.seed);
  std::vector<VelocityField> out;
  for (int k = 0; k < spec.members; ++k) {
    VelocityField u = random_velocity(rg, spec.mode_radius, rng);
    for (std::size_t id = 0; id < u.u1.size(); ++id) {
      const double s = std::pow(1.0 + rg->ksq(id), -spec.spectral_decay);
      u.u1[id] *= s;
      u.u2[id] *= s;
    }
    u *= 1.0 / norm_L2(u);
    out.push_back(resample(u, target));
  }
  return out;
}

/// Fit approximation constants of the raw interpolant on an ensemble. Uses
/// ||phi||_H1 := ||phi||_V0 and ||phi||_H2 := |A0 phi|.
inline ConstantsFit fit_constants(InterpolantType type, const EnsembleSpec& spec) {
  require(spec.hs.size() >= 4, ErrorKind::InvalidArgument, "need at least four values of h");
  require(spec.members >= 1, ErrorKind::InvalidArgument, "empty ensemble");
  const GridPtr g = Grid::make(spec.domain);
  const std::vector<VelocityField> fields = random_ensemble(spec, g);
  std::vector<Interpolant> ops;
  for (double h : spec.hs) ops.emplace_back(InterpolantKind{type, h}, g);

  ConstantsFit fit;
  fit.samples.resize(fields.size() * ops.size());
  parallel_for(fields.size(), [&](std::size_t f) {
    const double v0 = norm_V0(fields[f]);
    const double a0 = norm_A0(fields[f]);
    for (std::size_t o = 0; o < ops.size(); ++o) {
      const double h = spec.hs[o];
      const double err = norm_L2(fields[f] - ops[o].apply(fields[f]));
      fit.samples[f * ops.size() + o] = {h, err, h * v0, h * h * a0, 0.0};
    }
  });

  // Type I envelope.
  for (const auto& s : fit.samples) fit.c0_hat = std::max(fit.c0_hat, s.error / s.term1);

  // Nonnegative least squares in two unknowns, then scaled to an envelope.
  double s11 = 0, s12 = 0, s22 = 0, b1 = 0, b2 = 0;
  for (const auto& s : fit.samples) {
    s11 += s.term1 * s.term1;
    s12 += s.term1 * s.term2;
    s22 += s.term2 * s.term2;
    b1 += s.term1 * s.error;
    b2 += s.term2 * s.error;
  }
  auto sse = [&](double c1, double c2) {
    double acc = 0.0;
    for (const auto& s : fit.samples) acc += std::pow(s.error - c1 * s.term1 - c2 * s.term2, 2);
    return acc;
  };
  double c1 = 0, c2 = 0;
  const double det = s11 * s22 - s12 * s12;
  if (det > 1e-14 * s11 * s22) {
    c1 = (b1 * s22 - b2 * s12) / det;
    c2 = (b2 * s11 - b1 * s12) / det;
  }
  if (!(c1 > 0 && c2 > 0)) {
    const double a1 = s11 > 0 ? std::max(0.0, b1 / s11) : 0.0;
    const double a2 = s22 > 0 ? std::max(0.0, b2 / s22) : 0.0;
    if (sse(a1, 0.0) <= sse(0.0, a2)) {
      c1 = a1;
      c2 = 0.0;
    } else {
      c1 = 0.0;
      c2 = a2;
    }
  }
  fit.c1_ls = c1;
  fit.c2_ls = c2;
  double scale = 0.0, sum = 0.0;
  for (auto& s : fit.samples) {
    const double bound = c1 * s.term1 + c2 * s.term2;
    s.ratio = bound > 0 ? s.error / bound : (s.error > 0 ? INFINITY : 0.0);
    scale = std::max(scale, s.ratio);
    sum += s.ratio;
  }
  fit.max_ratio = scale;
  fit.mean_ratio = fit.samples.empty() ? 0.0 : sum / fit.samples.size();
  fit.c1_hat = c1 * scale;
  fit.c2_hat = c2 * scale;
  return fit;
}

}  // namespace rbdf
