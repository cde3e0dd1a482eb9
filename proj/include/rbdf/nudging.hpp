#pragma once

#include "rbdf/interpolants.hpp"
#include "rbdf/rb_solver.hpp"

#include <cmath>
#include <memory>
#include <vector>

namespace rbdf {

struct NudgeParams {
  double mu = 100.0;
  std::shared_ptr<const ModifiedInterpolant> interp;

  NudgeParams() = default;
  NudgeParams(double mu_, const InterpolantKind& kind, const GridPtr& g)
      : mu(mu_), interp(std::make_shared<const ModifiedInterpolant>(kind, g)) {}
};

inline void validate(const NudgeParams& np) {
  require(np.mu > 0.0 && std::isfinite(np.mu), ErrorKind::InvalidArgument, "mu must be positive");
  require(np.interp != nullptr, ErrorKind::InvalidArgument, "nudging needs an interpolant");
}

/// Right-hand side of the nudged system: the Boussinesq terms at (w, eta)
/// plus -mu nu lambda1 (I~_h w - v) in the momentum equation only.
inline RBTendency aux_rhs(const VelocityField& w, const ScalarField& eta, const VelocityField& v,
                          const PhysicalParams& p, const NudgeParams& np) {
  RBState s{w, eta, 0.0, nullptr};
  RBTendency r = rb_rhs(s, p);
  const double c = np.mu * p.nu * eig_lambda1(p.domain);
  r.du.axpy(-c, np.interp->apply(w) - v);
  return r;
}

/// Strang splitting of the nudged system: half a step of pure relaxation
/// dw/dt = -c (I~_h w - v), a full Boussinesq step, another half relaxation.
/// For the Fourier lowpass I~_h is an orthogonal projection and the
/// relaxation is solved exactly; other interpolants use RK4 substeps.
/// A reference solution u with v = I~_h u at the step times is reproduced
/// exactly by this scheme.
class NudgedStepper {
 public:
  NudgedStepper(const PhysicalParams& p, const StepperConfig& cfg, const NudgeParams& np)
      : stepper_(p, cfg), np_(np) {
    validate(np);
    rate_ = np.mu * p.nu * eig_lambda1(p.domain);
  }

  const RBStepper& base() const { return stepper_; }
  const NudgeParams& nudge() const { return np_; }
  double rate() const { return rate_; }

  void relax(VelocityField& w, const VelocityField& v, double tau) const {
    const ModifiedInterpolant& I = *np_.interp;
    if (I.kind().type == InterpolantType::FourierLowpass) {
      const double f = std::expm1(-rate_ * tau);
      w.axpy(f, I.apply(w) - v);
      return;
    }
    const int n = std::max(1, static_cast<int>(std::ceil(rate_ * tau)));
    const double h = tau / n;
    auto F = [&](const VelocityField& x) { return -rate_ * (I.apply(x) - v); };
    for (int k = 0; k < n; ++k) {
      const VelocityField k1 = F(w);
      const VelocityField k2 = F(w + (0.5 * h) * k1);
      const VelocityField k3 = F(w + (0.5 * h) * k2);
      const VelocityField k4 = F(w + h * k3);
      w.axpy(h / 6, k1).axpy(h / 3, k2).axpy(h / 3, k3).axpy(h / 6, k4);
    }
  }

  /// Advance by dt; v_now and v_next are the driving values at the start and
  /// end of the step.
  void step(RBState& s, const VelocityField& v_now, const VelocityField& v_next) const {
    const double half = 0.5 * stepper_.config().dt;
    relax(s.u, v_now, half);
    stepper_.step_inplace(s);
    relax(s.u, v_next, half);
    if (!s.u.all_finite()) throw NonFiniteError(s.t, "nudged state became non-finite");
  }

 private:
  RBStepper stepper_;
  NudgeParams np_;
  double rate_ = 0.0;
};

struct SyncReport {
  std::vector<double> t;
  std::vector<double> err_v0;        // ||w - u||_V0
  std::vector<double> err_l2_theta;  // |eta - theta|
  std::vector<double> err_h1_theta;  // ||eta - theta||
  double rate = 0.0;                 // fitted d/dt log(err_v0 + err_l2_theta)
  double fit_from = 0.0;
  double fit_to = 0.0;
  double final_err_v0 = 0.0;
  double final_err_theta = 0.0;
};

/// Least-squares slope of log(y) against t over points with y above `floor`.
inline double fit_log_rate(const std::vector<double>& t, const std::vector<double>& y, double t_from, double t_to,
                           double floor) {
  double n = 0, st = 0, sy = 0, stt = 0, sty = 0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (t[k] < t_from || t[k] > t_to || !(y[k] > floor)) continue;
    const double ly = std::log(y[k]);
    n += 1;
    st += t[k];
    sy += ly;
    stt += t[k] * t[k];
    sty += t[k] * ly;
  }
  if (n < 2) return 0.0;
  const double den = n * stt - st * st;
  return den > 0 ? (n * sty - st * sy) / den : 0.0;
}

/// Runs the reference from `reference0` and the nudged system from (0,0),
/// driven by v = I~_h u, in lockstep. Errors are recorded every
/// `record_every` time units; the decay rate is fitted on [fit_from, t_span]
/// using only errors above roundoff level.
inline SyncReport synchronize_experiment(const PhysicalParams& p, const NudgeParams& np, const StepperConfig& cfg,
                                         const RBState& reference0, double t_span, double record_every,
                                         double fit_from = 0.0) {
  require(t_span > 0.0, ErrorKind::InvalidArgument, "t_span must be positive");
  const RBStepper ref(p, cfg);
  const NudgedStepper nud(p, cfg, np);
  RBState u = reference0;
  RBState w = zero_state(u.grid(), u.t);
  const long nsteps = steps_for(t_span, cfg.dt);
  const long stride = std::max(1L, steps_for(record_every, cfg.dt));
  SyncReport rep;
  auto record = [&] {
    rep.t.push_back(u.t - reference0.t);
    rep.err_v0.push_back(norm_V0(w.u - u.u));
    rep.err_l2_theta.push_back(norm_L2(w.theta - u.theta));
    rep.err_h1_theta.push_back(norm_H1seminorm(w.theta - u.theta));
  };
  record();
  VelocityField v_now = np.interp->apply(u.u);
  for (long k = 1; k <= nsteps; ++k) {
    ref.step_inplace(u);
    const VelocityField v_next = np.interp->apply(u.u);
    nud.step(w, v_now, v_next);
    v_now = v_next;
    if (k % stride == 0 || k == nsteps) record();
  }
  std::vector<double> combined(rep.t.size());
  double scale = 0.0;
  for (std::size_t k = 0; k < combined.size(); ++k) {
    combined[k] = rep.err_v0[k] + rep.err_l2_theta[k];
    scale = std::max(scale, combined[k]);
  }
  rep.fit_from = fit_from;
  rep.fit_to = t_span;
  rep.rate = fit_log_rate(rep.t, combined, fit_from, t_span, 1e-12 * scale);
  rep.final_err_v0 = rep.err_v0.back();
  rep.final_err_theta = rep.err_l2_theta.back();
  return rep;
}

}  // namespace rbdf
