#pragma once

#include "rbdf/spectral_core.hpp"

namespace rbdf {

namespace detail {

inline RealBuffer product(const RealBuffer& a, const RealBuffer& b) {
  RealBuffer out(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) out[k] = a[k] * b[k];
  return out;
}

/// Physical values of (u . grad) f for dealiased inputs.
inline RealBuffer advect_physical(const RealBuffer& u1, const RealBuffer& u2, const SpectralField& f) {
  const RealBuffer fx = to_physical(d_dx1(f));
  const RealBuffer fy = to_physical(d_dx2(f));
  RealBuffer out(u1.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = u1[k] * fx[k] + u2[k] * fy[k];
  return out;
}

}  // namespace detail

/// (u . grad) v, dealiased before and after the product. No Leray projection.
inline SpectralPair B0_apply(const VelocityField& u, const VelocityField& v) {
  require_same_grid(u.u1, v.u1);
  const GridPtr& g = u.grid();
  const VelocityField ud = dealias(u);
  const VelocityField vd = dealias(v);
  const RealBuffer p1 = to_physical(ud.u1);
  const RealBuffer p2 = to_physical(ud.u2);
  SpectralPair out(dealias(to_spectral(g, detail::advect_physical(p1, p2, vd.u1), Parity::EvenX2)),
                   dealias(to_spectral(g, detail::advect_physical(p1, p2, vd.u2), Parity::OddX2)));
  return out;
}

/// b0(u, v, w) = integral of ((u . grad) v) . w
inline double b0_form(const VelocityField& u, const VelocityField& v, const VelocityField& w) {
  return inner(B0_apply(u, v), dealias(w));
}

/// (u . grad) theta, dealiased, projected onto odd functions of x2.
inline ScalarField B1_apply(const VelocityField& u, const ScalarField& theta) {
  require_same_grid(u.u1, theta);
  const VelocityField ud = dealias(u);
  const RealBuffer p1 = to_physical(ud.u1);
  const RealBuffer p2 = to_physical(ud.u2);
  const ScalarField td = dealias(theta);
  return symmetry_project(dealias(to_spectral(u.grid(), detail::advect_physical(p1, p2, td), Parity::OddX2)),
                          Parity::OddX2);
}

inline double b1_form(const VelocityField& u, const ScalarField& theta, const ScalarField& phi) {
  return inner(B1_apply(u, theta), dealias(phi));
}

/// Both advection terms of the Boussinesq system in conservative form,
/// div(u u) and div(u theta). Equal to the advective form when div u = 0;
/// costs three inverse and five forward transforms. Inputs must be dealiased.
struct Advection {
  SpectralPair momentum;
  ScalarField heat;
};

inline Advection advect_conservative(const VelocityField& u, const ScalarField& theta) {
  const GridPtr& g = u.grid();
  const Grid& G = *g;
  const RealBuffer a = to_physical(u.u1);
  const RealBuffer b = to_physical(u.u2);
  const RealBuffer t = to_physical(theta);
  const std::size_t np = a.size();
  RealBuffer q(np);
  auto fwd = [&](auto&& fn) {
    for (std::size_t k = 0; k < np; ++k) q[k] = fn(k);
    ComplexBuffer s;
    G.fft().forward(q, s);
    return s;
  };
  const ComplexBuffer aa = fwd([&](std::size_t k) { return a[k] * a[k]; });
  const ComplexBuffer ab = fwd([&](std::size_t k) { return a[k] * b[k]; });
  const ComplexBuffer bb = fwd([&](std::size_t k) { return b[k] * b[k]; });
  const ComplexBuffer at = fwd([&](std::size_t k) { return a[k] * t[k]; });
  const ComplexBuffer bt = fwd([&](std::size_t k) { return b[k] * t[k]; });

  Advection out{SpectralPair(g), ScalarField(g, Parity::OddX2)};
  for (int j = 0; j < G.ny(); ++j)
    for (int i = 0; i < G.mx(); ++i) {
      const std::size_t id = G.index(i, j);
      if (!G.dealias_keep(id)) continue;
      const Complex ik1(0.0, G.k1(i));
      const Complex ik2(0.0, G.k2(j));
      out.momentum.u1[id] = ik1 * aa[id] + ik2 * ab[id];
      out.momentum.u2[id] = ik1 * ab[id] + ik2 * bb[id];
      out.heat[id] = ik1 * at[id] + ik2 * bt[id];
    }
  return out;
}

}  // namespace rbdf
