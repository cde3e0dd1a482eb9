#include "rbdf/bilinear_forms.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace rbdf;

namespace {

constexpr double pi = std::numbers::pi;

GridPtr grid(int nx, int ny) {
  DomainSpec d;
  d.Nx = nx;
  d.Ny = ny;
  return Grid::make(d);
}

// Direct evaluation of a dealiased half-spectrum series and its gradient.
struct PointValue {
  double f, fx, fy;
};

PointValue eval_series(const SpectralField& s, double x1, double x2) {
  const Grid& g = *s.grid;
  const double L = g.domain().L, l = g.domain().l;
  PointValue p{0, 0, 0};
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.mx(); ++i) {
      const Complex c = s.at(i, j);
      if (c == Complex{}) continue;
      const double a = 2 * pi * i / L;
      const double b = pi * g.n_of(j) / l;
      const Complex e = c * std::exp(Complex(0, a * x1 + b * x2));
      const double w = (i == 0) ? 1.0 : 2.0;
      p.f += w * e.real();
      p.fx += w * (Complex(0, a) * e).real();
      p.fy += w * (Complex(0, b) * e).real();
    }
  return p;
}

double b0_oracle(const VelocityField& u, const VelocityField& v, const VelocityField& w) {
  const Grid& g = *u.grid();
  double acc = 0.0;
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      const double x1 = g.domain().L * i / g.nx(), x2 = 2 * g.domain().l * j / g.ny();
      const auto a1 = eval_series(u.u1, x1, x2), a2 = eval_series(u.u2, x1, x2);
      const auto v1 = eval_series(v.u1, x1, x2), v2 = eval_series(v.u2, x1, x2);
      const auto w1 = eval_series(w.u1, x1, x2), w2 = eval_series(w.u2, x1, x2);
      acc += (a1.f * v1.fx + a2.f * v1.fy) * w1.f + (a1.f * v2.fx + a2.f * v2.fy) * w2.f;
    }
  return acc * g.area() / (g.nx() * g.ny());
}

double b1_oracle(const VelocityField& u, const SpectralField& t, const SpectralField& phi) {
  const Grid& g = *u.grid();
  double acc = 0.0;
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      const double x1 = g.domain().L * i / g.nx(), x2 = 2 * g.domain().l * j / g.ny();
      const auto a1 = eval_series(u.u1, x1, x2), a2 = eval_series(u.u2, x1, x2);
      const auto tt = eval_series(t, x1, x2), pp = eval_series(phi, x1, x2);
      acc += (a1.f * tt.fx + a2.f * tt.fy) * pp.f;
    }
  return acc * g.area() / (g.nx() * g.ny());
}

// Random parity-correct field supported inside the dealiasing box; velocity
// fields are made divergence-free only when asked.
VelocityField random_pair(const GridPtr& g, std::mt19937_64& rng, bool solenoidal) {
  VelocityField u(random_field(g, Parity::EvenX2, 100, rng), random_field(g, Parity::OddX2, 100, rng));
  u.u1[0] = 0.3;
  if (solenoidal) u = leray_project(u);
  return u;
}

}  // namespace

TEST(B0, VanishesForConstantOrZero) {
  auto g = grid(16, 16);
  std::mt19937_64 rng(1);
  VelocityField u = random_pair(g, rng, true);
  VelocityField c(g);
  c.u1[0] = 2.0;
  EXPECT_LE(norm_L2(B0_apply(u, c)), 1e-14);
  VelocityField z(g);
  EXPECT_EQ(norm_L2(B0_apply(z, u)), 0.0);
  EXPECT_EQ(norm_L2(B1_apply(z, u.u2)), 0.0);
}

TEST(B0, SingleModeMatchesCollocation) {
  auto g = grid(8, 8);
  VelocityField u(g), v(g);
  u.u1.at(1, 1) = Complex(0.5, 0.25);
  u.u1.at(1, g->ny() - 1) = Complex(0.5, 0.25);
  u.u2.at(0, 1) = Complex(0, 0.5);
  u.u2.at(0, g->ny() - 1) = Complex(0, -0.5);
  v.u1.at(1, 0) = Complex(0.3, -0.1);
  v.u2.at(1, 1) = Complex(0.2, 0.0);
  v.u2.at(1, g->ny() - 1) = Complex(-0.2, 0.0);
  const SpectralPair b = B0_apply(u, v);
  const RealBuffer b1 = to_physical(b.u1), b2 = to_physical(b.u2);
  double err = 0.0, ref = 0.0;
  for (int j = 0; j < g->ny(); ++j)
    for (int i = 0; i < g->nx(); ++i) {
      const double x1 = g->x1(i), x2 = g->x2(j);
      const auto a1 = eval_series(u.u1, x1, x2), a2 = eval_series(u.u2, x1, x2);
      const auto v1 = eval_series(v.u1, x1, x2), v2 = eval_series(v.u2, x1, x2);
      const double e1 = a1.f * v1.fx + a2.f * v1.fy;
      const double e2 = a1.f * v2.fx + a2.f * v2.fy;
      err = std::max({err, std::abs(e1 - b1[j * g->nx() + i]), std::abs(e2 - b2[j * g->nx() + i])});
      ref = std::max({ref, std::abs(e1), std::abs(e2)});
    }
  EXPECT_GT(ref, 0.1);
  EXPECT_LE(err, 1e-12 * ref);
}

TEST(TrilinearOracle, B0MatchesBruteForceOn8x8) {
  auto g = grid(8, 8);
  std::mt19937_64 rng(20);
  for (int trial = 0; trial < 20; ++trial) {
    VelocityField u = random_pair(g, rng, trial % 2 == 0);
    VelocityField v = random_pair(g, rng, false);
    VelocityField w = random_pair(g, rng, false);
    const double ref = b0_oracle(u, v, w);
    const double scale = norm_L2(u) * norm_H1seminorm(v) * norm_L2(w);
    EXPECT_NEAR(b0_form(u, v, w), ref, 1e-12 * std::max(std::abs(ref), 1e-3 * scale));
  }
}

TEST(TrilinearOracle, B1MatchesBruteForceOn8x8) {
  auto g = grid(8, 8);
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    VelocityField u = random_pair(g, rng, true);
    SpectralField t = random_field(g, Parity::OddX2, 100, rng);
    SpectralField phi = random_field(g, Parity::OddX2, 100, rng);
    const double ref = b1_oracle(u, t, phi);
    EXPECT_NEAR(b1_form(u, t, phi), ref, 1e-12 * std::max(std::abs(ref), 1e-3));
  }
}

TEST(Orthogonality, VanishesOnRandomFields) {
  auto g = grid(64, 128);
  std::mt19937_64 rng(30);
  for (int trial = 0; trial < 10; ++trial) {
    VelocityField u = random_pair(g, rng, true);
    VelocityField v = random_pair(g, rng, false);
    SpectralField t = random_field(g, Parity::OddX2, 100, rng);
    const double nu = norm_H1seminorm(u);
    EXPECT_LE(std::abs(b0_form(u, v, v)), 1e-12 * nu * std::pow(norm_H1seminorm(v), 2));
    EXPECT_LE(std::abs(b1_form(u, t, t)), 1e-12 * nu * std::pow(norm_H1seminorm(t), 2));
    const double ua = std::abs(b0_form(u, u, laplacian_apply(u)));
    EXPECT_LE(ua, 1e-11 * nu * norm_H1seminorm(u) * norm_A0(u));
  }
}

TEST(Orthogonality, SkewSymmetryAndBilinearity) {
  auto g = grid(32, 64);
  std::mt19937_64 rng(31);
  VelocityField u = random_pair(g, rng, true);
  VelocityField v = random_pair(g, rng, false);
  VelocityField w = random_pair(g, rng, false);
  const double a = b0_form(u, v, w), b = b0_form(u, w, v);
  const double scale = norm_H1seminorm(u) * norm_H1seminorm(v) * norm_H1seminorm(w);
  EXPECT_LE(std::abs(a + b), 1e-12 * scale);
  EXPECT_NEAR(b0_form(2.5 * u, v, w), 2.5 * a, 1e-13 * scale);
}

TEST(ProductParity, LandsInCorrectClass) {
  auto g = grid(32, 64);
  std::mt19937_64 rng(32);
  VelocityField u = random_pair(g, rng, true);
  SpectralField t = random_field(g, Parity::OddX2, 100, rng);
  SpectralPair b = B0_apply(u, u);
  EXPECT_LE(parity_residual(b.u1), 1e-12 * norm_L2(b));
  EXPECT_LE(parity_residual(b.u2), 1e-12 * norm_L2(b));
  SpectralField raw = dealias(to_spectral(g, [&] {
    RealBuffer a = to_physical(u.u1), c = to_physical(u.u2);
    RealBuffer tx = to_physical(d_dx1(t)), ty = to_physical(d_dx2(t));
    for (std::size_t k = 0; k < a.size(); ++k) a[k] = a[k] * tx[k] + c[k] * ty[k];
    return a;
  }(), Parity::OddX2));
  EXPECT_LE(parity_residual(raw), 1e-12 * norm_L2(raw));
}

TEST(Conservative, MatchesAdvectiveFormForSolenoidalVelocity) {
  auto g = grid(32, 64);
  std::mt19937_64 rng(33);
  VelocityField u = random_pair(g, rng, true);
  SpectralField t = random_field(g, Parity::OddX2, 100, rng);
  const Advection adv = advect_conservative(u, t);
  const SpectralPair b0 = B0_apply(u, u);
  const SpectralField b1 = B1_apply(u, t);
  EXPECT_LE(norm_L2(adv.momentum - b0), 1e-12 * norm_L2(b0));
  EXPECT_LE(norm_L2(adv.heat - b1), 1e-12 * norm_L2(b1));
}
