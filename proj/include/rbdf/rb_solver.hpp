#pragma once

#include "rbdf/bilinear_forms.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <vector>

namespace rbdf {

struct PhysicalParams {
  double nu = 1.0;
  double kappa = 1.0;
  double g = 0.0;
  DomainSpec domain;
  double a = 0.0;  // prescribed integral of u1 over the box
};

inline void validate(const PhysicalParams& p) {
  require(p.nu > 0.0 && std::isfinite(p.nu), ErrorKind::InvalidArgument, "nu must be positive");
  require(p.kappa > 0.0 && std::isfinite(p.kappa), ErrorKind::InvalidArgument, "kappa must be positive");
  require(p.g >= 0.0 && std::isfinite(p.g), ErrorKind::InvalidArgument, "g must be nonnegative");
  require(std::isfinite(p.a), ErrorKind::InvalidArgument, "a must be finite");
  validate(p.domain);
}

/// Grid values (x2-major, x1 contiguous) a state was reconstructed from.
struct PhysicalFields {
  RealBuffer u1, u2, theta;
};

struct RBState {
  VelocityField u;
  ScalarField theta;
  double t = 0.0;
  /// Set when the state came from grid values; writing it back reproduces
  /// exactly these values, which keeps restarts bit-identical.
  std::shared_ptr<const PhysicalFields> physical;

  const GridPtr& grid() const { return u.grid(); }
};

inline RBState zero_state(const GridPtr& g, double t = 0.0) {
  return {VelocityField(g), ScalarField(g, Parity::OddX2), t, nullptr};
}

inline PhysicalFields physical_values(const RBState& s) {
  if (s.physical) return *s.physical;
  return {to_physical(s.u.u1), to_physical(s.u.u2), to_physical(s.theta)};
}

/// Transform grid values back and re-apply the solver projections.
inline RBState restore_state(const GridPtr& g, PhysicalFields values, double t) {
  RBState s;
  s.t = t;
  VelocityField u(to_spectral(g, values.u1, Parity::EvenX2), to_spectral(g, values.u2, Parity::OddX2));
  s.u = dealias(symmetry_project(leray_project(u)));
  s.theta = dealias(symmetry_project(to_spectral(g, values.theta, Parity::OddX2)));
  s.physical = std::make_shared<const PhysicalFields>(std::move(values));
  return s;
}

inline RBState canonicalize(const RBState& s) { return restore_state(s.grid(), physical_values(s), s.t); }

struct StepperConfig {
  double dt = 0.005;
  bool pin_mean = true;
};

/// Time derivatives of the Boussinesq system in functional form.
struct RBTendency {
  SpectralPair du;
  ScalarField dtheta;
};

/// du/dt = -nu A0 u - P B0(u,u) + P(g theta e2),
/// dtheta/dt = -kappa A1 theta - B1(u,theta) + u2/l.
inline RBTendency rb_rhs(const RBState& s, const PhysicalParams& p) {
  const GridPtr& g = s.grid();
  SpectralPair buoy(g);
  buoy.u2 = p.g * s.theta;
  SpectralPair du = leray_project(buoy - B0_apply(s.u, s.u));
  du.axpy(-p.nu, laplacian_apply(s.u, Operator::A0));
  ScalarField dt = (1.0 / p.domain.l) * symmetry_project(s.u.u2, Parity::OddX2);
  dt -= B1_apply(s.u, s.theta);
  dt.axpy(-p.kappa, laplacian_apply(s.theta, Operator::A1));
  dt.parity = Parity::OddX2;
  return {du, dt};
}

/// Integrating-factor Heun (second order). Diffusion is propagated exactly by
/// E = exp(-nu|k|^2 dt) (kappa for theta); advection, buoyancy and the
/// background-gradient forcing are explicit:
///   y* = E (y + dt N(y)),  y+ = E y + dt/2 (E N(y) + N(y*)).
/// A practical step size is dt <= 0.25 min(dx/|u|_inf, 1/(mu nu lambda1)).
class RBStepper {
 public:
  RBStepper(const PhysicalParams& p, const StepperConfig& cfg) : p_(p), cfg_(cfg) {
    validate(p);
    require(cfg.dt > 0.0 && std::isfinite(cfg.dt), ErrorKind::InvalidArgument, "dt must be positive");
    grid_ = Grid::make(p.domain);
    eu_.resize(grid_->size());
    et_.resize(grid_->size());
    for (std::size_t id = 0; id < grid_->size(); ++id) {
      eu_[id] = std::exp(-p.nu * grid_->ksq(id) * cfg.dt);
      et_[id] = std::exp(-p.kappa * grid_->ksq(id) * cfg.dt);
    }
  }

  const PhysicalParams& params() const { return p_; }
  const StepperConfig& config() const { return cfg_; }
  const GridPtr& grid() const { return grid_; }

  /// Explicit part N(y) of the right-hand side.
  RBTendency explicit_terms(const VelocityField& u, const ScalarField& theta) const {
    const Advection adv = advect_conservative(u, theta);
    SpectralPair mom(grid_);
    mom.u2 = p_.g * theta;
    mom -= adv.momentum;
    ScalarField heat = (1.0 / p_.domain.l) * u.u2;
    heat -= adv.heat;
    heat.parity = Parity::OddX2;
    return {leray_project(mom), heat};
  }

  RBState step(const RBState& s) const {
    RBState out = s;
    step_inplace(out);
    return out;
  }

  void step_inplace(RBState& s) const {
    const double dt = cfg_.dt;
    const RBTendency n0 = explicit_terms(s.u, s.theta);
    RBState mid = s;
    mid.u.axpy(dt, n0.du);
    mid.theta.axpy(dt, n0.dtheta);
    propagate(mid.u, mid.theta);
    const RBTendency n1 = explicit_terms(mid.u, mid.theta);

    s.u.axpy(0.5 * dt, n0.du);
    s.theta.axpy(0.5 * dt, n0.dtheta);
    propagate(s.u, s.theta);
    s.u.axpy(0.5 * dt, n1.du);
    s.theta.axpy(0.5 * dt, n1.dtheta);
    s.t += dt;
    s.physical.reset();
    finish(s);
  }

  /// Projections applied after every step; also used by the nudged stepper.
  void finish(RBState& s) const {
    s.u = dealias(symmetry_project(leray_project(s.u)));
    if (cfg_.pin_mean) pin_mean(s.u, p_.a);
    s.theta = dealias(symmetry_project(s.theta, Parity::OddX2));
    if (!s.u.all_finite() || !s.theta.all_finite())
      throw NonFiniteError(s.t, "state became non-finite");
  }

 private:
  void propagate(VelocityField& u, ScalarField& theta) const {
    for (std::size_t id = 0; id < eu_.size(); ++id) {
      u.u1[id] *= eu_[id];
      u.u2[id] *= eu_[id];
      theta[id] *= et_[id];
    }
  }

  PhysicalParams p_;
  StepperConfig cfg_;
  GridPtr grid_;
  std::vector<double> eu_, et_;
};

/// Called after every step with the current state; return false to stop.
using StepObserver = std::function<bool(const RBState&)>;

inline long steps_for(double span, double dt) {
  const double n = span / dt;
  const long k = std::lround(n);
  require(k >= 0 && std::abs(n - static_cast<double>(k)) <= 1e-9 * std::max(1.0, n), ErrorKind::InvalidArgument,
          "time span is not a whole number of steps");
  return k;
}

/// Snapshots at t0, t0 + sample_every, ... up to t_end. Each recorded state is
/// canonicalized (passed through its grid values) and the run continues from
/// the canonical state, so restarting from any snapshot file is bit-identical.
inline std::vector<RBState> simulate(const RBState& state0, const PhysicalParams& p, const StepperConfig& cfg,
                                     double t_end, double sample_every, const StepObserver& observer = {}) {
  require(t_end > state0.t, ErrorKind::InvalidArgument, "t_end must exceed the start time");
  const RBStepper stepper(p, cfg);
  const long nsteps = steps_for(t_end - state0.t, cfg.dt);
  const long stride = std::max(1L, steps_for(sample_every, cfg.dt));
  std::vector<RBState> out;
  RBState s = canonicalize(state0);
  out.push_back(s);
  for (long k = 1; k <= nsteps; ++k) {
    stepper.step_inplace(s);
    if (k % stride == 0 || k == nsteps) {
      s = canonicalize(s);
      out.push_back(s);
    }
    if (observer && !observer(s)) break;
  }
  return out;
}

/// Random state: isotropic Gaussian spectrum on |(m,n)| <= Nx/6, projected,
/// zero mean, with the requested root-mean-square amplitudes.
inline RBState random_initial_state(const PhysicalParams& p, double amp_u, double amp_theta, std::uint64_t seed) {
  validate(p);
  const GridPtr g = Grid::make(p.domain);
  std::mt19937_64 rng(seed);
  const double radius = p.domain.Nx / 6.0;
  RBState s = zero_state(g);
  s.u = random_velocity(g, radius, rng);
  s.u *= amp_u * std::sqrt(g->area());
  pin_mean(s.u, p.a);
  s.theta = random_field(g, Parity::OddX2, radius, rng);
  s.theta *= amp_theta * std::sqrt(g->area());
  return s;
}

struct AttractorBounds {
  double J1 = 0.0;  // sup ||u||_V0
  double J2 = 0.0;  // sup ||u||_H2
  double t_J1 = 0.0;
  double t_J2 = 0.0;
  double window = 0.0;  // length of the sampled interval
};

/// ||u||_H2 through the equivalence c_E^2 (|u|/|Omega| + |A0 u|).
inline double norm_H2(const VelocityField& u, double cE = 1.0) {
  return cE * cE * (norm_L2(u) / u.grid()->area() + norm_A0(u));
}

inline AttractorBounds estimate_attractor_bounds(const PhysicalParams& p, const StepperConfig& cfg, double burn_in,
                                                 double horizon, std::uint64_t seed = 1, double amplitude = 0.1) {
  require(horizon > burn_in && burn_in >= 0.0, ErrorKind::InvalidArgument, "horizon must exceed burn_in");
  const RBStepper stepper(p, cfg);
  RBState s = random_initial_state(p, amplitude, amplitude, seed);
  const long nburn = steps_for(burn_in, cfg.dt);
  const long ntotal = steps_for(horizon, cfg.dt);
  AttractorBounds b;
  b.window = horizon - burn_in;
  for (long k = 0; k <= ntotal; ++k) {
    if (k > 0) stepper.step_inplace(s);
    if (k < nburn) continue;
    const double v0 = norm_V0(s.u);
    const double h2 = norm_H2(s.u);
    if (v0 > b.J1) {
      b.J1 = v0;
      b.t_J1 = s.t;
    }
    if (h2 > b.J2) {
      b.J2 = h2;
      b.t_J2 = s.t;
    }
  }
  return b;
}

struct MaxPrincipleReport {
  double min_T = std::numeric_limits<double>::infinity();
  double max_T = -std::numeric_limits<double>::infinity();
  double max_theta_L2 = 0.0;
  double K = 0.0;  // 2|Omega|
  bool violated = false;          // beyond the strict 1e-6 tolerance
  bool theta_bound_holds = true;  // |theta| <= K for every snapshot
};

/// Range of the total temperature T = theta + 1 - x2/l on the physical
/// half (0,L) x [0,l] of the extended box.
inline MaxPrincipleReport check_max_principle(const std::vector<RBState>& snapshots, double tol = 1e-6) {
  MaxPrincipleReport r;
  for (const RBState& s : snapshots) {
    const Grid& g = *s.grid();
    const double l = g.domain().l;
    r.K = 2.0 * g.area();
    const RealBuffer th = s.physical ? s.physical->theta : to_physical(s.theta);
    for (int j = 0; j <= g.ny() / 2; ++j)
      for (int i = 0; i < g.nx(); ++i) {
        const double T = th[static_cast<std::size_t>(j) * g.nx() + i] + 1.0 - g.x2(j) / l;
        r.min_T = std::min(r.min_T, T);
        r.max_T = std::max(r.max_T, T);
      }
    const double n = norm_L2(s.theta);
    r.max_theta_L2 = std::max(r.max_theta_L2, n);
    if (n > r.K) r.theta_bound_holds = false;
  }
  r.violated = r.min_T < -tol || r.max_T > 1.0 + tol;
  return r;
}

}  // namespace rbdf
