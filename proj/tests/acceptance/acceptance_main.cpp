#include "rbdf/rbdf.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

using namespace rbdf;

namespace {

constexpr double pi = std::numbers::pi;
constexpr int NX = 64;
constexpr int NY = 128;
constexpr double DT = 0.005;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

GridPtr grid(int nx, int ny) {
  DomainSpec d;
  d.Nx = nx;
  d.Ny = ny;
  return Grid::make(d);
}

PhysicalParams params(double g, int nx = NX, int ny = NY) {
  PhysicalParams p;
  p.g = g;
  p.domain.Nx = nx;
  p.domain.Ny = ny;
  return p;
}

StepperConfig stepper(double dt = DT) {
  StepperConfig c;
  c.dt = dt;
  return c;
}

std::size_t samples_for(double span) { return static_cast<std::size_t>(steps_for(span, DT)) + 1; }

RBState spun_up(const PhysicalParams& p, double t, std::uint64_t seed = 1) {
  RBStepper st(p, stepper());
  RBState s = random_initial_state(p, 0.1, 0.1, seed);
  for (long k = 0; k < steps_for(t, DT); ++k) st.step_inplace(s);
  s.t = 0.0;
  return s;
}

VelocityField random_pair(const GridPtr& g, std::mt19937_64& rng, bool solenoidal) {
  VelocityField u(random_field(g, Parity::EvenX2, 100, rng), random_field(g, Parity::OddX2, 100, rng));
  u.u1[0] = 0.3;
  if (solenoidal) u = leray_project(u);
  return u;
}

// Point evaluation of a half-spectrum series and its gradient, term by term.
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

// Attractor observation at g = 100 shared by the W-map and reduction checks.
struct Attractor {
  PhysicalParams p = params(100.0);
  NudgeParams np{100.0, {InterpolantType::FourierLowpass, 0.25}, Grid::make(p.domain)};
  ObservedRun run;
  Attractor() { run = observe(spun_up(p, 10.0), p, stepper(), np.interp, 12.0); }
};

const Attractor& attractor() {
  static const Attractor a;
  return a;
}

Outcome ac1() {
  auto g = grid(NX, NY);
  std::mt19937_64 rng(101);
  double r0 = 0, r1 = 0, r2 = 0;
  for (int trial = 0; trial < 50; ++trial) {
    VelocityField u = random_pair(g, rng, true);
    VelocityField v = random_pair(g, rng, false);
    SpectralField t = random_field(g, Parity::OddX2, 100, rng);
    const double nu = norm_L2(u);
    r0 = std::max(r0, std::abs(b0_form(u, v, v)) / (nu * norm_H1seminorm(v) * norm_L2(v)));
    r1 = std::max(r1, std::abs(b1_form(u, t, t)) / (nu * norm_H1seminorm(t) * norm_L2(t)));
    r2 = std::max(r2, std::abs(b0_form(u, u, laplacian_apply(u))) / (nu * norm_H1seminorm(u) * norm_A0(u)));
  }
  return {r0 <= 1e-12 && r1 <= 1e-12 && r2 <= 1e-11,
          fmt("max rel b0(u,v,v)=%.2e b1(u,t,t)=%.2e b0(u,u,A0u)=%.2e", r0, r1, r2)};
}

Outcome ac2() {
  auto g = grid(8, 8);
  std::mt19937_64 rng(202);
  double e0 = 0, e1 = 0;
  for (int trial = 0; trial < 20; ++trial) {
    VelocityField u = random_pair(g, rng, trial % 2 == 0);
    VelocityField v = random_pair(g, rng, false);
    VelocityField w = random_pair(g, rng, false);
    const double ref0 = b0_oracle(u, v, w);
    const double s0 = std::max(std::abs(ref0), 1e-3 * norm_L2(u) * norm_H1seminorm(v) * norm_L2(w));
    e0 = std::max(e0, std::abs(b0_form(u, v, w) - ref0) / s0);
    SpectralField t = random_field(g, Parity::OddX2, 100, rng);
    SpectralField phi = random_field(g, Parity::OddX2, 100, rng);
    const double ref1 = b1_oracle(u, t, phi);
    const double s1 = std::max(std::abs(ref1), 1e-3 * norm_L2(u) * norm_H1seminorm(t) * norm_L2(phi));
    e1 = std::max(e1, std::abs(b1_form(u, t, phi) - ref1) / s1);
  }
  return {e0 <= 1e-12 && e1 <= 1e-12, fmt("max rel error b0=%.2e b1=%.2e", e0, e1)};
}

Outcome ac3() {
  PhysicalParams p = params(100.0);
  p.a = 0.7;
  StepperConfig c = stepper();
  c.pin_mean = false;
  RBStepper st(p, c);
  RBState s = random_initial_state(p, 0.2, 0.1, 3);
  for (int k = 0; k < 10000; ++k) st.step_inplace(s);
  const double drift = std::abs(mean_integral(s.u.u1) - p.a);

  const PhysicalParams q = params(100.0);
  const double K = 2.0 * Grid::make(q.domain)->area();
  double theta_max = 0.0;
  RBState s0 = random_initial_state(q, 0.1, 0.0, 4);
  const GridPtr& g = s0.grid();
  s0.theta = to_spectral(g, sample(*g, [](double x1, double x2) { return 0.1 * std::cos(x1) * std::sin(x2); }),
                         Parity::OddX2);
  const auto snaps = simulate(s0, q, stepper(), 100.0, 0.5, [&](const RBState& r) {
    theta_max = std::max(theta_max, norm_L2(r.theta));
    return true;
  });
  const MaxPrincipleReport mp = check_max_principle(snaps);
  const bool ok = drift <= 1e-10 && theta_max <= K && mp.theta_bound_holds && mp.min_T >= -0.05 && mp.max_T <= 1.05;
  return {ok, fmt("mean drift=%.2e |theta|max=%.4g (bound %.4g) T range=[%.4f, %.4f]", drift, theta_max, K, mp.min_T,
                  mp.max_T)};
}

Outcome ac4() {
  const PhysicalParams p = params(100.0);
  const RBState s0 = random_initial_state(p, 1.0, 0.5, 8);
  auto run = [&](double dt) {
    RBStepper st(p, stepper(dt));
    RBState s = s0;
    for (long k = 0; k < steps_for(1.0, dt); ++k) st.step_inplace(s);
    return s;
  };
  auto rel = [](const RBState& a, const RBState& b) {
    return std::sqrt(norm_L2_sq(a.u - b.u) + norm_L2_sq(a.theta - b.theta)) /
           std::sqrt(norm_L2_sq(b.u) + norm_L2_sq(b.theta));
  };
  const double dt = 0.01;
  const RBState ref = run(dt / 8);
  const double e1 = rel(run(dt), ref);
  const double e2 = rel(run(dt / 2), ref);
  return {e1 / e2 >= 3.5, fmt("err(dt)=%.3e err(dt/2)=%.3e ratio=%.3f", e1, e2, e1 / e2)};
}

Outcome ac5() {
  EnsembleSpec lp;
  lp.domain.Nx = NX;
  lp.domain.Ny = NY;
  lp.hs = {0.8, 0.5, 0.3, 0.2};
  const ConstantsFit f0 = fit_constants(InterpolantType::FourierLowpass, lp);
  double tail = 0.0;
  for (const auto& s : f0.samples) tail = std::max(tail, s.error / s.term1);

  EnsembleSpec nb;
  nb.domain.Nx = NX;
  nb.domain.Ny = NY;
  nb.hs = {1.0, 0.8, 0.6, 0.45};
  const ConstantsFit f1 = fit_constants(InterpolantType::NodalBilinear, nb);
  double env = 0.0;
  for (const auto& s : f1.samples) env = std::max(env, s.error / (f1.c1_hat * s.term1 + f1.c2_hat * s.term2));
  nb.domain.Nx = 2 * NX;
  nb.domain.Ny = 2 * NY;
  const ConstantsFit f2 = fit_constants(InterpolantType::NodalBilinear, nb);
  auto vary = [](double a, double b) {
    if (a == 0.0 && b == 0.0) return 1.0;
    if (a == 0.0 || b == 0.0) return std::numeric_limits<double>::infinity();
    return std::max(a / b, b / a);
  };
  const double v1 = vary(f1.c1_hat, f2.c1_hat), v2 = vary(f1.c2_hat, f2.c2_hat);
  const bool ok = tail <= 1.0 && env <= 1.0 + 1e-12 && v1 < 2.0 && v2 < 2.0;
  return {ok, fmt("lowpass max err/(h||phi||)=%.4f; nodal c1=%.4g c2=%.4g max err/envelope=%.6f; doubled grid "
                  "c1=%.4g c2=%.4g (factors %.3f, %.3f)",
                  tail, f1.c1_hat, f1.c2_hat, env, f2.c1_hat, f2.c2_hat, v1, v2)};
}

Outcome ac6() {
  const PhysicalParams p = params(100.0);
  const auto g = Grid::make(p.domain);
  const RBState ref = spun_up(p, 10.0);
  const NudgeParams np(100.0, {InterpolantType::FourierLowpass, 0.25}, g);
  const SyncReport r = synchronize_experiment(p, np, stepper(), ref, 20.0, 0.1, 2.0);
  const double e0 = r.err_v0[0] + r.err_l2_theta[0];
  double emin = e0;
  for (std::size_t k = 0; k < r.t.size(); ++k) emin = std::min(emin, r.err_v0[k] + r.err_l2_theta[k]);
  const double factor = e0 / emin;
  const double theta_factor = r.err_l2_theta[0] / r.final_err_theta;
  const bool ok = factor >= 1e6 && r.rate < 0.0 && theta_factor >= 1e6;
  return {ok, fmt("decay factor=%.3e rate=%.3f temperature error %.3e -> %.3e", factor, r.rate, r.err_l2_theta[0],
                  r.final_err_theta)};
}

Outcome ac7() {
  const Attractor& A = attractor();
  const WResult W = W_map(A.run.v, A.p, A.np, stepper());
  const double rel = defect_X(A.run.v, W, A.p) / norm_X(A.run.v, A.p);
  return {rel <= 1e-5, fmt("relative defect=%.3e tau=%.3g stationarity=%.2e", rel, W.tau, W.stationarity)};
}

Outcome ac8() {
  const Attractor& A = attractor();
  const CompactVelocity zero = zero_compact(A.np.interp->modes());
  bool monotone = true;
  double f0 = 0.0, beta_end = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Trajectory v0 = random_trajectory(A.np.interp, A.p, 0.0, DT, samples_for(12.0), 40.0, 300 + seed);
    DeterminingForm F(v0, zero, A.p, A.np, stepper());
    BetaEvolveConfig c;
    c.s_span = 2.0;
    c.ds = 0.02;
    c.grid = 4;
    const auto path = F.beta_evolve(c);
    for (std::size_t k = 1; k < path.size(); ++k) monotone = monotone && path[k].beta <= path[k - 1].beta;
    f0 = std::max(f0, F.f(0.0));
    beta_end = std::max(beta_end, path.back().beta);
  }
  Trajectory v0 = A.run.v;
  for (auto& c : v0.samples) c *= 2.0;
  DeterminingForm F(v0, zero, A.p, A.np, stepper());
  ZeroSearchConfig zc;
  zc.grid = 8;
  zc.beta_tol = 2e-4;
  const ZeroSearch z = F.find_zeros(zc);
  const double root = z.roots.size() == 1 ? z.roots[0] : NAN;
  const bool ok = monotone && f0 <= 1e-10 && std::abs(root - 0.5) <= 1e-3;
  return {ok, fmt("beta nonincreasing=%s max final beta=%.4f max f(0)=%.2e roots found=%zu beta*=%.6f",
                  monotone ? "yes" : "no", beta_end, f0, z.roots.size(), root)};
}

Outcome ac9() {
  const PhysicalParams p = params(100.0);
  const auto g = Grid::make(p.domain);
  const NudgeParams np(100.0, {InterpolantType::FourierLowpass, 0.25}, g);
  const std::size_t n = samples_for(12.0);
  double worst = 0.0;
  bool finite = true;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Trajectory v1 = random_trajectory(np.interp, p, 0.0, DT, n, 30.0, seed);
    const Trajectory v2 = random_trajectory(np.interp, p, 0.0, DT, n, 30.0, seed + 500);
    const LipschitzSample s = lipschitz_probe(v1, v2, p, np, stepper());
    finite = finite && std::isfinite(s.ratio_Y);
    worst = std::max(worst, s.ratio_Y);
  }
  const double bound = lipschitz_bound_Y(p, np.mu);
  return {finite && worst <= bound, fmt("max ratio=%.4g bound=%.4g (mu=%g, h=0.25)", worst, bound, np.mu)};
}

Outcome ac10(const AuditInput& measured, double& audit_seconds) {
  const auto t0 = std::chrono::steady_clock::now();
  AuditInput unit;
  unit.J1 = 0.0;
  unit.J2 = 0.0;
  const ConstantMap m = constants_stressfree(unit);
  const bool hand = m.at("C1").value == 4.0 && m.at("K1").value == 13.5 && m.at("Ct0").value == 2.0 &&
                    m.at("C6").value == 8.0;
  const MuHSuggestion s = suggest_mu_h(measured);
  double min_margin = INFINITY;
  std::string worst;
  if (s.feasible)
    for (const auto& [id, c] : s.report.conditions)
      if (c.margin < min_margin) {
        min_margin = c.margin;
        worst = id;
      }
  audit_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool ok = hand && s.feasible && s.report.all_satisfied() && min_margin >= 0.0;
  return {ok, fmt("hand values %s; suggested mu=%.6g h=%.6g (binding %s, %s) smallest margin=%.3e at %s",
                  hand ? "exact" : "MISMATCH", s.mu, s.h, s.binding_mu.c_str(), s.binding_h.c_str(), min_margin,
                  worst.c_str())};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double budget;
    std::function<Outcome(double&)> run;
  };
  auto timed = [](Outcome (*f)()) { return [f](double&) { return f(); }; };

  AuditInput measured;
  measured.p = params(1.0, 16, 32);
  {
    const AttractorBounds b = estimate_attractor_bounds(measured.p, stepper(), 30.0, 31.0);
    measured.J1 = b.J1;
    measured.J2 = b.J2;
  }
  measured.p.domain.Nx = NX;
  measured.p.domain.Ny = NY;

  const std::vector<Criterion> all = {
      {"AC1", 10, timed(ac1)},
      {"AC2", 5, timed(ac2)},
      {"AC3", 120, timed(ac3)},
      {"AC4", 60, timed(ac4)},
      {"AC5", 60, timed(ac5)},
      {"AC6", 300, timed(ac6)},
      {"AC7", 600, timed(ac7)},
      {"AC8", 900, timed(ac8)},
      {"AC9", 900, timed(ac9)},
      {"AC10", 1, [&](double& secs) { return ac10(measured, secs); }},
  };

  int failed = 0;
  for (const Criterion& c : all) {
    const auto t0 = std::chrono::steady_clock::now();
    double secs = -1.0;
    Outcome o;
    try {
      o = c.run(secs);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (secs < 0.0) secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.budget;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    std::printf("%s %s %s; runtime %.1f s (limit %g s%s)\n", c.name, pass ? "PASS" : "FAIL", o.detail.c_str(), secs,
                c.budget, in_time ? "" : ", exceeded");
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
