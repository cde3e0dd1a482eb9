#pragma once

#include "rbdf/nudging.hpp"
#include "rbdf/parallel.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace rbdf {

// ---------------------------------------------------------------------------
// Trajectories in the range of I~_h

/// Uniformly sampled velocity trajectory in the range of the modified
/// interpolant, stored on its modes. Sample k sits at t0 + k dt.
struct Trajectory {
  double t0 = 0.0;
  double dt = 0.0;
  std::shared_ptr<const ModifiedInterpolant> interp;
  std::vector<CompactVelocity> samples;

  std::size_t size() const { return samples.size(); }
  double span() const { return samples.empty() ? 0.0 : dt * static_cast<double>(samples.size() - 1); }
  double t_end() const { return t0 + span(); }
  double time(std::size_t k) const { return t0 + dt * static_cast<double>(k); }
  const ModeSet& modes() const { return interp->modes(); }

  /// Linear interpolation in time; exact at the sample times.
  CompactVelocity compact_at(double t) const {
    require(!samples.empty(), ErrorKind::InvalidArgument, "empty trajectory");
    if (samples.size() == 1) {
      require(std::abs(t - t0) <= 1e-9 * std::max(1.0, std::abs(t0)), ErrorKind::InvalidArgument,
              "time outside the trajectory span");
      return samples[0];
    }
    const double x = (t - t0) / dt;
    const double last = static_cast<double>(samples.size() - 1);
    require(x >= -1e-9 * std::max(1.0, last) && x <= last * (1 + 1e-12) + 1e-9, ErrorKind::InvalidArgument,
            "time outside the trajectory span");
    const double k = std::round(x);
    if (std::abs(x - k) <= 1e-9 * std::max(1.0, x))
      return samples[static_cast<std::size_t>(std::clamp(k, 0.0, last))];
    const auto k0 = static_cast<std::size_t>(std::floor(x));
    const double a = x - static_cast<double>(k0);
    CompactVelocity c = samples[k0];
    c *= 1.0 - a;
    c.axpy(a, samples[k0 + 1]);
    return c;
  }

  VelocityField value_at(double t) const { return expand(modes(), compact_at(t)); }
};

inline CompactVelocity zero_compact(const ModeSet& m) {
  CompactVelocity c;
  c.u1.assign(m.size(), Complex{});
  c.u2.assign(m.size(), Complex{});
  return c;
}

inline Trajectory constant_trajectory(std::shared_ptr<const ModifiedInterpolant> interp, const CompactVelocity& c,
                                      double t0, double dt, std::size_t n) {
  require(n >= 1 && dt > 0.0, ErrorKind::InvalidArgument, "trajectory needs samples and a positive spacing");
  Trajectory v{t0, dt, std::move(interp), {}};
  v.samples.assign(n, c);
  return v;
}

inline bool same_sampling(const Trajectory& a, const Trajectory& b) {
  return a.size() == b.size() && a.t0 == b.t0 && a.dt == b.dt && a.interp && b.interp &&
         a.interp->grid() == b.interp->grid() && a.modes().size() == b.modes().size();
}

/// a x + b y, sample by sample.
inline Trajectory combine(double a, const Trajectory& x, double b, const Trajectory& y) {
  require(same_sampling(x, y), ErrorKind::InvalidArgument, "trajectories are sampled differently");
  Trajectory out = x;
  for (std::size_t k = 0; k < out.size(); ++k) {
    out.samples[k] *= a;
    out.samples[k].axpy(b, y.samples[k]);
  }
  return out;
}

/// a x + b c for a constant c.
inline Trajectory combine(double a, const Trajectory& x, double b, const CompactVelocity& c) {
  Trajectory out = x;
  for (auto& s : out.samples) {
    s *= a;
    s.axpy(b, c);
  }
  return out;
}

/// Checks uniform sampling and that every sample is in the range of P_r
/// (divergence free, correct parities, supported on the retained modes).
inline void validate(const Trajectory& v, double tol = 1e-10) {
  require(v.interp != nullptr, ErrorKind::InvalidArgument, "trajectory has no interpolant");
  require(!v.samples.empty(), ErrorKind::InvalidArgument, "empty trajectory");
  require(v.samples.size() == 1 || (v.dt > 0.0 && std::isfinite(v.dt)), ErrorKind::InvalidArgument,
          "trajectory spacing must be positive");
  const ModeSet& m = v.modes();
  for (const auto& c : v.samples) {
    require(c.u1.size() == m.size() && c.u2.size() == m.size(), ErrorKind::InvalidArgument,
            "sample does not match the interpolant modes");
    const VelocityField u = expand(m, c);
    if (!u.all_finite()) throw NonFiniteError(v.t0, "trajectory sample is not finite");
    const double n = norm_L2(u);
    const double r = norm_L2(v.interp->project(u) - u);
    require(r <= tol * std::max(n, 1e-300) || r == 0.0, ErrorKind::InvalidArgument,
            "trajectory sample is outside the range of the modified interpolant");
  }
}

inline double x_scale(const PhysicalParams& p) { return p.nu * std::sqrt(eig_lambda1(p.domain)); }

/// ||v||_X = sup_t ||v(t)||_V0 / (nu lambda1^1/2) over the stored span.
inline double norm_X(const Trajectory& v, const PhysicalParams& p) {
  double s = 0.0;
  for (const auto& c : v.samples) s = std::max(s, norm_V0(v.modes(), c));
  return s / x_scale(p);
}

inline double distance_X(const Trajectory& a, const Trajectory& b, const PhysicalParams& p) {
  require(same_sampling(a, b), ErrorKind::InvalidArgument, "trajectories are sampled differently");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s = std::max(s, distance_V0(a.modes(), a.samples[k], b.samples[k]));
  return s / x_scale(p);
}

/// Smooth random trajectory a + sin(2 pi t / period) b with a, b random fields
/// in the range of I~_h, scaled so that ||v||_X equals `x_norm`.
inline Trajectory random_trajectory(std::shared_ptr<const ModifiedInterpolant> interp, const PhysicalParams& p,
                                    double t0, double dt, std::size_t n, double x_norm, std::uint64_t seed,
                                    double period = 2.0) {
  const GridPtr& g = interp->grid();
  std::mt19937_64 rng(seed);
  const double radius = std::sqrt(1.0 / (interp->kind().h * interp->kind().h));
  const CompactVelocity a = compress(interp->modes(), interp->project(random_velocity(g, radius, rng)));
  CompactVelocity b = compress(interp->modes(), interp->project(random_velocity(g, radius, rng)));
  b *= 0.5;
  Trajectory v{t0, dt, interp, {}};
  v.samples.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    CompactVelocity c = a;
    c.axpy(std::sin(2 * std::numbers::pi * (dt * static_cast<double>(k)) / period), b);
    v.samples.push_back(std::move(c));
  }
  const double x = norm_X(v, p);
  require(x > 0.0, ErrorKind::InvalidArgument, "interpolant range is empty");
  for (auto& c : v.samples) c *= x_norm / x;
  return v;
}

// ---------------------------------------------------------------------------
// Y and Z norms

/// Per-sample values entering the Y and Z norms.
struct NormSeries {
  double t0 = 0.0;
  double dt = 0.0;
  std::vector<double> w_v0, w_a0_sq, eta_v1, eta_a1_sq;

  std::size_t size() const { return w_v0.size(); }
  void push(const VelocityField& w, const ScalarField& eta) {
    w_v0.push_back(norm_V0(w));
    w_a0_sq.push_back(norm_A_sq(w.u1) + norm_A_sq(w.u2));
    eta_v1.push_back(norm_V1(eta));
    eta_a1_sq.push_back(norm_A_sq(eta));
  }
  NormSeries tail(std::size_t from) const {
    NormSeries s;
    s.t0 = t0 + dt * static_cast<double>(from);
    s.dt = dt;
    s.w_v0.assign(w_v0.begin() + from, w_v0.end());
    s.w_a0_sq.assign(w_a0_sq.begin() + from, w_a0_sq.end());
    s.eta_v1.assign(eta_v1.begin() + from, eta_v1.end());
    s.eta_a1_sq.assign(eta_a1_sq.begin() + from, eta_a1_sq.end());
    return s;
  }
};

struct WindowIntegral {
  double sup = 0.0;
  long full_windows = 0;  // windows lying entirely inside the span
};

/// sup over sample-aligned windows [t_k, t_k + T] of the trapezoid integral of
/// the piecewise-linear interpolant of `density`. Windows that run past the
/// end of the span are truncated there.
inline WindowIntegral sup_window_integral(const std::vector<double>& density, double dt, double T) {
  const std::size_t n = density.size();
  require(n >= 2 && dt > 0.0, ErrorKind::SpanTooShort, "need at least two samples for a window integral");
  const double span = dt * static_cast<double>(n - 1);
  require(span >= T * (1 - 1e-9), ErrorKind::SpanTooShort, "span is shorter than one window");
  std::vector<double> P(n, 0.0);
  for (std::size_t j = 1; j < n; ++j) P[j] = P[j - 1] + 0.5 * dt * (density[j - 1] + density[j]);
  const double x = T / dt;
  auto m = static_cast<std::size_t>(std::floor(x + 1e-9));
  double r = x - static_cast<double>(m);
  if (r < 1e-9) r = 0.0;
  WindowIntegral out;
  for (std::size_t k = 0; k < n; ++k) {
    double I;
    const std::size_t e = k + m;
    if (e >= n - 1) {
      I = P[n - 1] - P[k];
      if (e == n - 1 && r == 0.0) ++out.full_windows;
    } else {
      I = P[e] - P[k];
      if (r > 0.0) I += dt * (r * density[e] + 0.5 * r * r * (density[e + 1] - density[e]));
      ++out.full_windows;
    }
    out.sup = std::max(out.sup, I);
  }
  return out;
}

struct TrajectoryNorm {
  double value = 0.0;
  double sup_term = 0.0;
  double window_term = 0.0;  // the quantity under the square root
  long full_windows = 0;
};

/// ||w||_Y = sup ||w||_V0 / (nu lambda1^1/2)
///         + ((1/(nu lambda1)) sup_t int_t^{t+T} |A0 w|^2)^{1/2},  T = 1/(nu lambda1).
inline TrajectoryNorm norm_Y(const NormSeries& s, const PhysicalParams& p) {
  const double nl = p.nu * eig_lambda1(p.domain);
  const WindowIntegral W = sup_window_integral(s.w_a0_sq, s.dt, 1.0 / nl);
  TrajectoryNorm n;
  n.sup_term = *std::max_element(s.w_v0.begin(), s.w_v0.end()) / x_scale(p);
  n.window_term = W.sup / nl;
  n.full_windows = W.full_windows;
  n.value = n.sup_term + std::sqrt(n.window_term);
  return n;
}

/// ||eta||_Z = sup ||eta||_V1 + (nu sup_t int_t^{t+T} |A1 eta|^2)^{1/2}.
inline TrajectoryNorm norm_Z(const NormSeries& s, const PhysicalParams& p) {
  const double nl = p.nu * eig_lambda1(p.domain);
  const WindowIntegral W = sup_window_integral(s.eta_a1_sq, s.dt, 1.0 / nl);
  TrajectoryNorm n;
  n.sup_term = *std::max_element(s.eta_v1.begin(), s.eta_v1.end());
  n.window_term = p.nu * W.sup;
  n.full_windows = W.full_windows;
  n.value = n.sup_term + std::sqrt(n.window_term);
  return n;
}

inline NormSeries series_of(const std::vector<VelocityField>& w, const std::vector<ScalarField>& eta, double t0,
                            double dt) {
  require(w.size() == eta.size(), ErrorKind::InvalidArgument, "velocity and temperature lengths differ");
  NormSeries s;
  s.t0 = t0;
  s.dt = dt;
  for (std::size_t k = 0; k < w.size(); ++k) s.push(w[k], eta[k]);
  return s;
}

// ---------------------------------------------------------------------------
// Determining map

struct SpinUpConfig {
  double tau_min = 0.0;    // first spin-up length tried; 0 means 5/(kappa lambda1)
  double tolerance = 1e-6;  // allowed relative X-distance between the two spin-ups on the tail
  double offset = 0.0;     // start of the second spin-up; 0 means 1/(nu lambda1)
  long keep_every = 0;     // keep full tail states every this many steps (0: none)
};

inline double min_spin_up(const PhysicalParams& p) { return 5.0 / (p.kappa * eig_lambda1(p.domain)); }

inline void validate(const SpinUpConfig& s, const PhysicalParams& p) {
  require(s.tau_min == 0.0 || s.tau_min >= min_spin_up(p) * (1 - 1e-12), ErrorKind::InvalidArgument,
          "tau_min must be at least 5/(kappa lambda1)");
  require(s.tolerance > 0.0, ErrorKind::InvalidArgument, "spin-up tolerance must be positive");
  require(s.offset >= 0.0 && s.keep_every >= 0, ErrorKind::InvalidArgument, "bad spin-up offset or stride");
}

struct WResult {
  double t_tail = 0.0;        // start of the returned tail
  double tau = 0.0;           // accepted spin-up length
  double stationarity = 0.0;  // relative X-distance between the two spin-ups on the tail
  int doublings = 0;
  Trajectory Iw;              // I~_h w on the tail, one sample per step
  NormSeries series;          // norms of (w, eta) on the tail
  std::vector<RBState> fields;  // tail states every keep_every steps
};

namespace detail {

struct Lane {
  const Trajectory* v;
  long start;  // step index at which the lane starts from (0, 0)
};

/// Advances one nudged system per lane in lockstep; obs(k, states) is called
/// for k = 0..nsteps with the states at t0 + k dt (inactive lanes are empty).
template <class Obs>
void run_lanes(const NudgedStepper& st, const std::vector<Lane>& lanes, long nsteps, double t0, Obs&& obs) {
  const GridPtr& g = st.base().grid();
  const double dt = st.base().config().dt;
  std::vector<const Trajectory*> drivers;
  std::vector<std::size_t> which(lanes.size());
  for (std::size_t i = 0; i < lanes.size(); ++i) {
    auto it = std::find(drivers.begin(), drivers.end(), lanes[i].v);
    which[i] = static_cast<std::size_t>(it - drivers.begin());
    if (it == drivers.end()) drivers.push_back(lanes[i].v);
  }
  auto t_of = [&](long k) { return t0 + dt * static_cast<double>(k); };
  std::vector<VelocityField> now, next(drivers.size());
  for (const Trajectory* d : drivers) now.push_back(d->value_at(t_of(0)));
  std::vector<std::optional<RBState>> s(lanes.size());
  for (long k = 0; k <= nsteps; ++k) {
    if (k > 0) {
      for (std::size_t d = 0; d < drivers.size(); ++d) next[d] = drivers[d]->value_at(t_of(k));
      for (std::size_t i = 0; i < lanes.size(); ++i)
        if (s[i]) st.step(*s[i], now[which[i]], next[which[i]]);
      std::swap(now, next);
    }
    for (std::size_t i = 0; i < lanes.size(); ++i)
      if (lanes[i].start == k) s[i] = zero_state(g, t_of(k));
    obs(k, s);
  }
}

struct TailChoice {
  long k_tail = 0;
  double tau = 0.0;
  double rel = 0.0;
  int doublings = 0;
};

/// Tries tau = tau_min, 2 tau_min, ... and accepts the first one for which the
/// tail [k_offset + tau/dt, end] is at least one window long and diff/scale
/// stays below tol on it.
inline TailChoice choose_tail(const std::vector<double>& diff, const std::vector<double>& scale, long k_offset,
                              double dt, double tau_min, long window_steps, double tol) {
  const long last = static_cast<long>(diff.size()) - 1;
  TailChoice c;
  double tau = tau_min;
  for (int d = 0;; ++d, tau *= 2) {
    const long kt = k_offset + static_cast<long>(std::ceil(tau / dt - 1e-9));
    if (kt + window_steps > last) {
      require(d > 0, ErrorKind::SpanTooShort,
              "trajectory span must cover the offset, the minimal spin-up and one window");
      throw Error(ErrorKind::TailNotConverged,
                  "spin-ups still differ by " + std::to_string(c.rel) + " (relative) at tau = " +
                      std::to_string(tau / 2) + "; lengthen the trajectory or increase mu");
    }
    double dmax = 0.0, smax = 0.0;
    for (long k = kt; k <= last; ++k) {
      dmax = std::max(dmax, diff[k]);
      smax = std::max(smax, scale[k]);
    }
    c.rel = smax > 0.0 ? dmax / smax : (dmax > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    if (c.rel <= tol) {
      c.k_tail = kt;
      c.tau = tau;
      c.doublings = d;
      return c;
    }
  }
}

inline void check_driver(const Trajectory& v, const NudgeParams& np) {
  validate(v);
  require(v.interp->grid() == np.interp->grid() && v.interp->kind().h == np.interp->kind().h,
          ErrorKind::InvalidArgument, "trajectory and nudging interpolant differ");
}

}  // namespace detail

/// Numerical W~(v): the nudged system is started from (0, 0) at t0 (run A) and
/// again at t0 + offset (run B). The returned tail begins tau after the second
/// start, with tau doubled from tau_min until A and B agree there to the
/// requested tolerance in X-norm.
inline WResult W_map(const Trajectory& v, const PhysicalParams& p, const NudgeParams& np, const StepperConfig& cfg,
                     const SpinUpConfig& spin = {}) {
  detail::check_driver(v, np);
  validate(spin, p);
  const double nl = p.nu * eig_lambda1(p.domain);
  const double offset = spin.offset > 0.0 ? spin.offset : 1.0 / nl;
  const double tau_min = spin.tau_min > 0.0 ? spin.tau_min : min_spin_up(p);
  const double dt = cfg.dt;
  const long nsteps = steps_for(v.span(), dt);
  const long kB = steps_for(offset, dt);
  const long window = static_cast<long>(std::ceil(1.0 / (nl * dt) - 1e-9));
  require(static_cast<double>(kB + window) * dt + tau_min <= v.span() * (1 + 1e-12), ErrorKind::SpanTooShort,
          "trajectory span must cover the offset, the minimal spin-up and one window");

  const NudgedStepper st(p, cfg, np);
  const double xs = x_scale(p);
  const long keep_from = kB + static_cast<long>(std::ceil(tau_min / dt - 1e-9));
  std::vector<double> diff(nsteps + 1, 0.0), scale(nsteps + 1, 0.0);
  std::vector<CompactVelocity> Iw;
  Iw.reserve(nsteps + 1);
  NormSeries series;
  series.t0 = v.t0;
  series.dt = dt;
  std::vector<std::pair<long, RBState>> kept;
  detail::run_lanes(st, {{&v, 0}, {&v, kB}}, nsteps, v.t0, [&](long k, const auto& s) {
    const RBState& a = *s[0];
    Iw.push_back(np.interp->apply_compact(a.u));
    series.push(a.u, a.theta);
    scale[k] = series.w_v0.back() / xs;
    if (s[1]) diff[k] = norm_V0(a.u - s[1]->u) / xs;
    if (spin.keep_every > 0 && k >= keep_from && (k - keep_from) % spin.keep_every == 0) kept.emplace_back(k, a);
  });

  const detail::TailChoice c = detail::choose_tail(diff, scale, kB, dt, tau_min, window, spin.tolerance);
  WResult r;
  r.tau = c.tau;
  r.stationarity = c.rel;
  r.doublings = c.doublings;
  r.t_tail = v.t0 + dt * static_cast<double>(c.k_tail);
  r.Iw = Trajectory{r.t_tail, dt, np.interp, {Iw.begin() + c.k_tail, Iw.end()}};
  r.series = series.tail(static_cast<std::size_t>(c.k_tail));
  for (auto& [k, s] : kept)
    if (k >= c.k_tail) r.fields.push_back(std::move(s));
  return r;
}

/// sup over the tail of ||v - I~_h W(v)||_V0 / (nu lambda1^1/2).
inline double defect_X(const Trajectory& v, const WResult& W, const PhysicalParams& p) {
  double s = 0.0;
  for (std::size_t k = 0; k < W.Iw.size(); ++k)
    s = std::max(s, distance_V0(v.modes(), v.compact_at(W.Iw.time(k)), W.Iw.samples[k]));
  return s / x_scale(p);
}

/// Restriction of v to the sample times of the tail of W.
inline Trajectory restrict_to(const Trajectory& v, const Trajectory& tail) {
  Trajectory out{tail.t0, tail.dt, v.interp, {}};
  out.samples.reserve(tail.size());
  for (std::size_t k = 0; k < tail.size(); ++k) out.samples.push_back(v.compact_at(tail.time(k)));
  return out;
}

// ---------------------------------------------------------------------------
// Determining form

struct DetformRhs {
  Trajectory rhs;  // -q^2 (v - I~_h u*) on the tail window
  double q = 0.0;  // ||v - I~_h W(v)||_X
  double norm_v_X = 0.0;
  bool out_of_ball = false;  // ||v||_X > rho
  WResult W;
};

/// Vector field of the determining form, dv/ds = -||v - I~_h W(v)||_X^2 (v - I~_h u*),
/// evaluated on the common tail window. rho <= 0 skips the ball check.
inline DetformRhs detform_rhs(const Trajectory& v, const CompactVelocity& ustar, const PhysicalParams& p,
                              const NudgeParams& np, const StepperConfig& cfg, const SpinUpConfig& spin = {},
                              double rho = 0.0) {
  DetformRhs r;
  r.norm_v_X = norm_X(v, p);
  r.out_of_ball = rho > 0.0 && r.norm_v_X > rho;
  r.W = W_map(v, p, np, cfg, spin);
  r.q = defect_X(v, r.W, p);
  r.rhs = combine(-r.q * r.q, restrict_to(v, r.W.Iw), r.q * r.q, ustar);
  return r;
}

/// Fritsch-Carlson monotone cubic through (k/n, y(k)), k = 0..n, evaluated at
/// x in [0, 1]. Only the nodes around x are requested. The result stays
/// between the two bracketing node values.
template <class NodeFn>
double monotone_cubic(int n, NodeFn&& y, double x) {
  require(n >= 2, ErrorKind::InvalidArgument, "monotone interpolation needs at least two intervals");
  x = std::clamp(x, 0.0, 1.0);
  const double h = 1.0 / n;
  const int i = std::min(n - 1, static_cast<int>(std::floor(x * n)));
  auto slope = [&](int k) {
    if (k == 0 || k == n) {
      const int s = k == 0 ? 1 : -1;
      const double d0 = (y(k + s) - y(k)) / (s * h);
      const double d1 = (y(k + 2 * s) - y(k + s)) / (s * h);
      double d = 0.5 * (3 * d0 - d1);
      if (d * d0 <= 0.0) d = 0.0;
      else if (d0 * d1 < 0.0 && std::abs(d) > 3 * std::abs(d0)) d = 3 * d0;
      return d;
    }
    const double a = (y(k) - y(k - 1)) / h;
    const double b = (y(k + 1) - y(k)) / h;
    return a * b > 0.0 ? 2.0 / (1.0 / a + 1.0 / b) : 0.0;
  };
  const double t = (x - i * h) / h;
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * y(i) + (t3 - 2 * t2 + t) * h * slope(i) + (-2 * t3 + 3 * t2) * y(i + 1) +
         (t3 - t2) * h * slope(i + 1);
}

struct BetaState {
  double s = 0.0;
  double beta = 1.0;
  double f = 0.0;  // interpolated f(beta)
};

struct BetaEvolveConfig {
  double s_span = 1.0;
  double ds = 0.01;
  int grid = 8;             // f is evaluated exactly at k/grid
  double change_tol = 0.0;  // > 0: NoConvergence if |d beta/ds| exceeds it at the end
};

struct ZeroSearchConfig {
  int grid = 8;
  double beta_tol = 1e-4;  // resolution of the minimum refinement
  double zero_tol = 1e-6;  // f <= zero_tol ||v0 - I~_h u*||_X^2 counts as a zero
};

struct ZeroSearch {
  std::vector<double> roots;    // nontrivial zeros in (0, 1]
  std::vector<double> root_f;   // f at each root
  bool trivial_root = false;    // f(0) is a zero
  std::vector<double> grid_beta, grid_f;
  double scale = 0.0;           // ||v0 - I~_h u*||_X^2
};

/// Scalar reduction of the determining form along v = beta v0 + (1 - beta) I~_h u*:
/// d beta/ds = -beta f(beta), f(beta) = ||v - I~_h W(v)||_X^2. Every exact
/// evaluation of f is one run of W and is cached by beta.
class DeterminingForm {
 public:
  DeterminingForm(Trajectory v0, CompactVelocity ustar, const PhysicalParams& p, const NudgeParams& np,
                  const StepperConfig& cfg, const SpinUpConfig& spin = {}, double rho = 0.0)
      : v0_(std::move(v0)), ustar_(std::move(ustar)), p_(p), np_(np), cfg_(cfg), spin_(spin), rho_(rho) {
    detail::check_driver(v0_, np_);
    require(ustar_.u1.size() == v0_.modes().size(), ErrorKind::InvalidArgument,
            "steady state does not match the interpolant modes");
    validate(spin_, p_);
    const Trajectory d = combine(1.0, v0_, -1.0, ustar_);
    dist_ = norm_X(d, p_);
    if (rho_ > 0.0 && dist_ > 0.75 * rho_)
      warn("||v0 - I u*||_X exceeds 3R with R = rho/4; the theory only covers that ball");
  }

  const Trajectory& v0() const { return v0_; }
  const PhysicalParams& params() const { return p_; }
  double distance_X() const { return dist_; }

  Trajectory point(double beta) const { return combine(beta, v0_, 1.0 - beta, ustar_); }

  double f(double beta) const {
    require(beta >= 0.0 && beta <= 1.0, ErrorKind::InvalidArgument, "beta must lie in [0, 1]");
    {
      std::lock_guard lock(mtx_);
      auto it = cache_.find(beta);
      if (it != cache_.end()) return it->second;
    }
    const Trajectory v = point(beta);
    if (rho_ > 0.0 && norm_X(v, p_) > rho_) warn("trajectory at beta = " + std::to_string(beta) + " is outside B_X(0, rho)");
    const WResult W = W_map(v, p_, np_, cfg_, spin_);
    const double q = defect_X(v, W, p_);
    std::lock_guard lock(mtx_);
    cache_[beta] = q * q;
    ++evaluations_;
    return q * q;
  }

  void prefetch(const std::vector<double>& betas) const {
    parallel_for(betas.size(), [&](std::size_t i) { f(betas[i]); });
  }

  std::map<double, double> cache() const {
    std::lock_guard lock(mtx_);
    return cache_;
  }
  long evaluations() const {
    std::lock_guard lock(mtx_);
    return evaluations_;
  }
  std::vector<std::string> warnings() const {
    std::lock_guard lock(mtx_);
    return warnings_;
  }

  /// Monotone cubic interpolant of f on the nodes k/n; nodes are evaluated
  /// on demand.
  double f_interp(double beta, int n) const {
    return std::max(0.0, monotone_cubic(n, [&](int k) { return f(static_cast<double>(k) / n); }, beta));
  }

  /// Classical RK4 for d beta/ds = -beta f(beta) from beta = 1, halving the
  /// step whenever a stage or the result would leave (0, beta_n].
  std::vector<BetaState> beta_evolve(const BetaEvolveConfig& c) const {
    require(c.s_span > 0.0 && c.ds > 0.0, ErrorKind::InvalidArgument, "s_span and ds must be positive");
    auto F = [&](double b) { return -b * f_interp(b, c.grid); };
    std::vector<BetaState> out;
    double s = 0.0, beta = 1.0;
    out.push_back({s, beta, f_interp(beta, c.grid)});
    double h = c.ds;
    while (s < c.s_span * (1 - 1e-12)) {
      const double step = std::min(h, c.s_span - s);
      const double k1 = F(beta);
      const double b2 = beta + 0.5 * step * k1;
      double next = -1.0;
      if (b2 > 0.0) {
        const double k2 = F(b2);
        const double b3 = beta + 0.5 * step * k2;
        if (b3 > 0.0) {
          const double k3 = F(b3);
          const double b4 = beta + step * k3;
          if (b4 > 0.0) next = beta + step / 6 * (k1 + 2 * k2 + 2 * k3 + F(b4));
        }
      }
      if (!(next > 0.0 && next <= beta)) {
        h = 0.5 * step;
        require(h > 1e-14 * c.s_span, ErrorKind::NoConvergence, "beta step size underflow");
        continue;
      }
      s += step;
      beta = next;
      out.push_back({s, beta, f_interp(beta, c.grid)});
    }
    if (c.change_tol > 0.0) {
      const double rate = beta * out.back().f;
      require(rate <= c.change_tol, ErrorKind::NoConvergence,
              "beta still changing at the end of the span (|d beta/ds| = " + std::to_string(rate) + ")");
    }
    return out;
  }

  /// Grid scan of f on k/grid, then Brent refinement of every local minimum
  /// of sqrt(f); refined minima with f <= zero_tol * scale are zeros.
  ZeroSearch find_zeros(const ZeroSearchConfig& c) const {
    require(c.grid >= 2 && c.beta_tol > 0.0, ErrorKind::InvalidArgument, "bad zero-search settings");
    ZeroSearch z;
    z.scale = dist_ * dist_;
    require(z.scale > 0.0, ErrorKind::InvalidArgument, "v0 coincides with the steady state");
    for (int k = 0; k <= c.grid; ++k) z.grid_beta.push_back(static_cast<double>(k) / c.grid);
    prefetch(z.grid_beta);
    for (double b : z.grid_beta) z.grid_f.push_back(f(b));
    const double tol = c.zero_tol * z.scale;
    z.trivial_root = z.grid_f[0] <= tol;
    for (int k = 1; k <= c.grid; ++k) {
      const bool left = z.grid_f[k] <= z.grid_f[k - 1];
      const bool right = k == c.grid || z.grid_f[k] < z.grid_f[k + 1];
      if (!left || !right) continue;
      const auto [b, fb] = refine_min(z.grid_beta[k - 1], z.grid_beta[std::min(k + 1, c.grid)], c.beta_tol);
      if (fb > tol) continue;
      if (z.trivial_root && b <= 2 * c.beta_tol) continue;
      if (!z.roots.empty() && std::abs(b - z.roots.back()) <= 2 * c.beta_tol) continue;
      z.roots.push_back(b);
      z.root_f.push_back(fb);
    }
    return z;
  }

 private:
  /// Brent minimization of sqrt(f) on [a, b] to a bracket width of about tol.
  std::pair<double, double> refine_min(double a, double b, double tol) const {
    const int bits = 1 + static_cast<int>(std::ceil(-std::log2(tol)));
    std::uintmax_t iters = 200;
    const auto r = boost::math::tools::brent_find_minima([&](double x) { return std::sqrt(f(x)); }, a, b, bits, iters);
    return {r.first, f(r.first)};
  }

  void warn(const std::string& w) const {
    std::lock_guard lock(mtx_);
    warnings_.push_back(w);
  }

  Trajectory v0_;
  CompactVelocity ustar_;
  PhysicalParams p_;
  NudgeParams np_;
  StepperConfig cfg_;
  SpinUpConfig spin_;
  double rho_ = 0.0;
  double dist_ = 0.0;
  mutable std::mutex mtx_;
  mutable std::map<double, double> cache_;
  mutable long evaluations_ = 0;
  mutable std::vector<std::string> warnings_;
};

// ---------------------------------------------------------------------------
// Lipschitz probe and recovery

struct LipschitzSample {
  double gamma_X = 0.0;  // ||v1 - v2||_X
  double phi_Y = 0.0;    // ||W(v1) - W(v2)||_Y
  double psi_Z = 0.0;    // temperature difference in Z
  double ratio_Y = 0.0;
  double ratio_tilde = 0.0;  // (phi_Y + psi_Z) / gamma_X
  double tau = 0.0;
  long full_windows = 0;
};

inline LipschitzSample lipschitz_probe(const Trajectory& v1, const Trajectory& v2, const PhysicalParams& p,
                                       const NudgeParams& np, const StepperConfig& cfg, const SpinUpConfig& spin = {}) {
  detail::check_driver(v1, np);
  detail::check_driver(v2, np);
  validate(spin, p);
  LipschitzSample out;
  out.gamma_X = distance_X(v1, v2, p);
  require(out.gamma_X > 0.0, ErrorKind::DivisionByZero, "v1 and v2 coincide");
  const double nl = p.nu * eig_lambda1(p.domain);
  const double offset = spin.offset > 0.0 ? spin.offset : 1.0 / nl;
  const double tau_min = spin.tau_min > 0.0 ? spin.tau_min : min_spin_up(p);
  const double dt = cfg.dt;
  const long nsteps = steps_for(v1.span(), dt);
  const long kB = steps_for(offset, dt);
  const long window = static_cast<long>(std::ceil(1.0 / (nl * dt) - 1e-9));
  const NudgedStepper st(p, cfg, np);
  const double xs = x_scale(p);
  std::vector<double> diff(nsteps + 1, 0.0), scale(nsteps + 1, 0.0);
  NormSeries series;
  series.t0 = v1.t0;
  series.dt = dt;
  detail::run_lanes(st, {{&v1, 0}, {&v2, 0}, {&v1, kB}, {&v2, kB}}, nsteps, v1.t0, [&](long k, const auto& s) {
    const RBState& a1 = *s[0];
    const RBState& a2 = *s[1];
    series.push(a1.u - a2.u, a1.theta - a2.theta);
    scale[k] = std::max(norm_V0(a1.u), norm_V0(a2.u)) / xs;
    if (s[2]) diff[k] = std::max(norm_V0(a1.u - s[2]->u), norm_V0(a2.u - s[3]->u)) / xs;
  });
  const detail::TailChoice c = detail::choose_tail(diff, scale, kB, dt, tau_min, window, spin.tolerance);
  const NormSeries tail = series.tail(static_cast<std::size_t>(c.k_tail));
  const TrajectoryNorm Y = norm_Y(tail, p);
  out.phi_Y = Y.value;
  out.psi_Z = norm_Z(tail, p).value;
  out.full_windows = Y.full_windows;
  out.ratio_Y = out.phi_Y / out.gamma_X;
  out.ratio_tilde = (out.phi_Y + out.psi_Z) / out.gamma_X;
  out.tau = c.tau;
  return out;
}

struct Recovery {
  WResult W;             // W.fields holds the recovered (u, theta)
  double defect = 0.0;   // ||v - I~_h W(v)||_X / ||v||_X
};

/// For a steady state v of the determining form, W~(v) is the solution
/// (u, theta) with I~_h u = v; temperature included.
inline Recovery recover_solution(const Trajectory& v, const PhysicalParams& p, const NudgeParams& np,
                                 const StepperConfig& cfg, SpinUpConfig spin = {}, double steady_tol = 1e-5) {
  if (spin.keep_every <= 0) spin.keep_every = 1;
  Recovery r;
  r.W = W_map(v, p, np, cfg, spin);
  const double nx = norm_X(restrict_to(v, r.W.Iw), p);
  const double q = defect_X(v, r.W, p);
  r.defect = nx > 0.0 ? q / nx : q;
  require(r.defect <= steady_tol, ErrorKind::NotSteady,
          "v is not a steady state of the determining form (relative defect " + std::to_string(r.defect) + ")");
  return r;
}

// ---------------------------------------------------------------------------
// Observed reference runs

struct ObservedRun {
  Trajectory v;                 // I~_h u at every step
  std::vector<RBState> states;  // u every keep_every steps (first and last always kept)
};

inline ObservedRun observe(const RBState& u0, const PhysicalParams& p, const StepperConfig& cfg,
                           std::shared_ptr<const ModifiedInterpolant> interp, double span, long keep_every = 0) {
  const RBStepper st(p, cfg);
  const long n = steps_for(span, cfg.dt);
  ObservedRun r;
  r.v = Trajectory{u0.t, cfg.dt, interp, {}};
  r.v.samples.reserve(n + 1);
  RBState s = u0;
  for (long k = 0; k <= n; ++k) {
    if (k > 0) st.step_inplace(s);
    r.v.samples.push_back(interp->apply_compact(s.u));
    if (k == 0 || k == n || (keep_every > 0 && k % keep_every == 0)) r.states.push_back(s);
  }
  return r;
}

}  // namespace rbdf
