#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "rbdf/rbdf.hpp"

namespace fs = std::filesystem;
using namespace rbdf;

namespace {

enum Exit { kOk = 0, kFail = 1, kConfig = 2, kNumerical = 3, kInfeasible = 4 };

struct Overrides {
  std::string config;
  std::optional<double> mu, h, t_end;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

RunConfig resolve(const Overrides& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : load_config(o.config);
  if (o.mu) c.mu = *o.mu;
  if (o.h) c.h = *o.h;
  if (o.t_end) c.t_end = *o.t_end;
  if (o.seed) c.seed = *o.seed;
  if (o.out) c.out = *o.out;
  validate(c);
  fs::create_directories(c.out);
  return c;
}

std::string path_in(const RunConfig& c, const std::string& name) { return (fs::path(c.out) / name).string(); }

std::string meta(const RunConfig& c, const std::string& cmd) {
  return "cmd=" + cmd + " nu=" + format_g(c.nu) + " kappa=" + format_g(c.kappa) + " g=" + format_g(c.g) +
         " Nx=" + std::to_string(c.Nx) + " Ny=" + std::to_string(c.Ny) + " dt=" + format_g(c.dt) +
         " mu=" + format_g(c.mu) + " h=" + format_g(c.h) + " seed=" + std::to_string(c.seed);
}

RBState starting_state(const RunConfig& c, const PhysicalParams& p, bool spin_up) {
  if (!c.restart.empty()) return load_state(read_snapshot(c.restart), Grid::make(p.domain));
  RBState s = random_initial_state(p, c.amplitude, c.amplitude, c.seed);
  if (spin_up && c.burn_in > 0.0) {
    const RBStepper st(p, stepper_config(c));
    for (long k = 0; k < steps_for(c.burn_in, c.dt); ++k) st.step_inplace(s);
    s.t = 0.0;
    s = canonicalize(s);
  }
  return s;
}

int cmd_simulate(const RunConfig& c) {
  const PhysicalParams p = physical_params(c);
  const StepperConfig cfg = stepper_config(c);
  const RBState s0 = starting_state(c, p, false);
  CsvWriter energy(path_in(c, "energy.csv"), {"t", "u_L2", "u_V0", "theta_L2", "theta_H1"}, meta(c, "simulate"));
  const double every = c.snapshot_every > 0.0 ? c.snapshot_every : c.record_every;
  const long stride = std::max(1L, steps_for(c.record_every, c.dt));
  long k = 0;
  auto record = [&](const RBState& s) {
    energy.row({s.t, norm_L2(s.u), norm_V0(s.u), norm_L2(s.theta), norm_H1seminorm(s.theta)});
  };
  record(s0);
  const auto snaps = simulate(s0, p, cfg, c.t_end, every, [&](const RBState& s) {
    if (++k % stride == 0) record(s);
    return true;
  });
  std::size_t written = 0;
  if (c.snapshot_every > 0.0)
    for (; written < snaps.size(); ++written) {
      char name[32];
      std::snprintf(name, sizeof name, "snap_%05zu.rbdf", written);
      write_snapshot(path_in(c, name), snaps[written], p);
    }
  write_snapshot(path_in(c, "final.rbdf"), snaps.back(), p);
  std::cout << "simulate: t = " << format_g(snaps.back().t) << ", " << written << " snapshots and final.rbdf in "
            << c.out << "\n";
  return kOk;
}

int cmd_nudge(const RunConfig& c) {
  const PhysicalParams p = physical_params(c);
  const StepperConfig cfg = stepper_config(c);
  const RBState u0 = starting_state(c, p, true);
  const NudgeParams np(c.mu, interpolant_kind(c), u0.grid());
  const SyncReport r = synchronize_experiment(p, np, cfg, u0, c.t_end, c.record_every);
  CsvWriter out(path_in(c, "sync.csv"), {"t", "err_v0", "err_theta_l2", "err_theta_h1"}, meta(c, "nudge"));
  for (std::size_t k = 0; k < r.t.size(); ++k) out.row({r.t[k], r.err_v0[k], r.err_l2_theta[k], r.err_h1_theta[k]});
  std::cout << "nudge: rate = " << format_g(r.rate) << ", final ||w-u||_V0 = " << format_g(r.final_err_v0)
            << ", final |eta-theta| = " << format_g(r.final_err_theta) << "\n";
  return kOk;
}

struct Observed {
  PhysicalParams p;
  StepperConfig cfg;
  NudgeParams np;
  ObservedRun run;
};

Observed observed_attractor(const RunConfig& c, long keep_every = 0) {
  Observed o;
  o.p = physical_params(c);
  o.cfg = stepper_config(c);
  const RBState u0 = starting_state(c, o.p, true);
  o.np = NudgeParams(c.mu, interpolant_kind(c), u0.grid());
  o.run = observe(u0, o.p, o.cfg, o.np.interp, c.span, keep_every);
  return o;
}

int cmd_wmap(const RunConfig& c) {
  SpinUpConfig spin = spin_up_config(c);
  if (spin.keep_every <= 0) spin.keep_every = std::max(1L, steps_for(1.0, c.dt));
  const Observed o = observed_attractor(c);
  const WResult W = W_map(o.run.v, o.p, o.np, o.cfg, spin);
  for (std::size_t i = 0; i < W.fields.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "w_%05zu.rbdf", i);
    write_snapshot(path_in(c, name), W.fields[i], o.p);
  }
  const TrajectoryNorm y = norm_Y(W.series, o.p), z = norm_Z(W.series, o.p);
  const double vx = norm_X(restrict_to(o.run.v, W.Iw), o.p);
  const double defect = defect_X(o.run.v, W, o.p);
  std::ofstream rep(path_in(c, "wmap.txt"));
  rep << "# rbdf " << iso8601_now() << " " << meta(c, "wmap") << "\n"
      << "tail_start = " << format_g(W.t_tail) << "\n"
      << "tau = " << format_g(W.tau) << "\n"
      << "stationarity = " << format_g(W.stationarity) << "\n"
      << "norm_X_v = " << format_g(vx) << "\n"
      << "norm_Y_w = " << format_g(y.value) << " (full windows " << y.full_windows << ")\n"
      << "norm_Z_eta = " << format_g(z.value) << "\n"
      << "defect_X = " << format_g(defect) << "\n"
      << "relative_defect = " << format_g(vx > 0 ? defect / vx : defect) << "\n";
  CsvWriter series(path_in(c, "wmap_series.csv"), {"t", "w_v0", "w_a0_sq", "eta_v1", "eta_a1_sq"}, meta(c, "wmap"));
  for (std::size_t k = 0; k < W.series.w_v0.size(); ++k)
    series.row({W.series.t0 + W.series.dt * double(k), W.series.w_v0[k], W.series.w_a0_sq[k], W.series.eta_v1[k],
                W.series.eta_a1_sq[k]});
  std::cout << "wmap: tau = " << format_g(W.tau) << ", relative defect = " << format_g(vx > 0 ? defect / vx : defect)
            << ", ||w||_Y = " << format_g(y.value) << "\n";
  return kOk;
}

int cmd_detform(const RunConfig& c) {
  const Observed o = observed_attractor(c);
  const Trajectory v0 = combine(c.v0_scale, o.run.v, 0.0, o.run.v);
  const DeterminingForm F(v0, zero_compact(o.np.interp->modes()), o.p, o.np, o.cfg, spin_up_config(c));
  BetaEvolveConfig be;
  be.s_span = c.s_span;
  be.ds = c.ds;
  be.grid = c.beta_grid;
  const auto path = F.beta_evolve(be);
  CsvWriter bc(path_in(c, "beta.csv"), {"s", "beta", "f"}, meta(c, "detform"));
  for (const auto& st : path) bc.row({st.s, st.beta, st.f});
  ZeroSearchConfig zc;
  zc.grid = c.beta_grid;
  zc.beta_tol = c.beta_tol;
  const ZeroSearch Z = F.find_zeros(zc);
  CsvWriter zs(path_in(c, "zeros.csv"), {"beta", "f"}, meta(c, "detform"));
  for (std::size_t i = 0; i < Z.roots.size(); ++i) zs.row({Z.roots[i], Z.root_f[i]});
  std::cout << "detform: " << F.evaluations() << " W evaluations, " << Z.roots.size() << " nontrivial zero(s)";
  for (double r : Z.roots) std::cout << " " << format_g(r);
  std::cout << (Z.trivial_root ? ", beta = 0 is a zero" : "") << "\n";
  for (const auto& w : F.warnings()) std::cerr << "warning: " << w << "\n";
  if (!Z.roots.empty()) {
    SpinUpConfig spin = spin_up_config(c);
    spin.keep_every = std::max(1L, steps_for(1.0, c.dt));
    const Recovery R = recover_solution(F.point(Z.roots.front()), o.p, o.np, o.cfg, spin, 1e-3);
    for (std::size_t i = 0; i < R.W.fields.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "recovered_%05zu.rbdf", i);
      write_snapshot(path_in(c, name), R.W.fields[i], o.p);
    }
    std::cout << "detform: recovered trajectory from beta = " << format_g(Z.roots.front())
              << ", relative defect = " << format_g(R.defect) << "\n";
  }
  return kOk;
}

int cmd_audit(const RunConfig& c) {
  AuditInput in;
  in.p = physical_params(c);
  in.bc = c.bc == "noslip" ? BoundaryCondition::NoSlip : BoundaryCondition::StressFree;
  in.uc = universal_constants(c);
  in.mu = c.mu;
  in.h = c.h;
  in.J1 = c.J1;
  in.J2 = c.J2;
  if (c.J1 == 0.0 && c.J2 == 0.0) {
    const AttractorBounds b = estimate_attractor_bounds(in.p, stepper_config(c), c.burn_in, c.burn_in + c.t_end, c.seed,
                                                        c.amplitude);
    in.J1 = b.J1;
    in.J2 = b.J2;
    std::cout << "audit: measured J1 = " << format_g(b.J1) << " (t = " << format_g(b.t_J1)
              << "), J2 = " << format_g(b.J2) << " (t = " << format_g(b.t_J2) << ")\n";
  }
  if (c.rho > 0.0) in.rho = c.rho;
  const AuditReport r = check_conditions(in);
  const MuHSuggestion s = suggest_mu_h(in);
  std::ostringstream txt;
  txt << report_text(r) << "\nconfigured (empirical) pair: mu = " << format_g(c.mu) << ", h = " << format_g(c.h)
      << "\n";
  if (s.feasible)
    txt << "theoretical pair: mu_min = " << format_g(s.mu) << " (set by " << s.binding_mu
        << "), h_max = " << format_g(s.h) << " (set by " << (s.binding_h.empty() ? "h < min(L, l)" : s.binding_h)
        << ")\n";
  else
    txt << "theoretical pair: infeasible, " << s.reason << "\n";
  if (in.bc == BoundaryCondition::StressFree)
    txt << "Lipschitz bound on ||W(v1)-W(v2)||_Y/||v1-v2||_X at mu = " << format_g(c.mu) << ": "
        << format_g(lipschitz_bound_Y(in.p, c.mu)) << "\n";
  std::ofstream(path_in(c, "audit.txt")) << "# rbdf " << iso8601_now() << " " << meta(c, "audit") << "\n" << txt.str();
  write_csv_text(path_in(c, "audit.csv"), report_csv(r), meta(c, "audit"));
  std::cout << txt.str();
  return s.feasible ? kOk : kInfeasible;
}

int cmd_interp_fit(const RunConfig& c) {
  EnsembleSpec spec;
  spec.domain = physical_params(c).domain;
  spec.hs = {0.25, 0.5, 0.75, 1.0};
  spec.members = c.fit_members;
  spec.seed = c.seed;
  const ConstantsFit fit = fit_constants(interpolant_kind(c).type, spec);
  CsvWriter out(path_in(c, "fit.csv"), {"h", "error", "h_H1", "h2_H2", "ratio"}, meta(c, "interp-fit"));
  for (const auto& s : fit.samples) out.row({s.h, s.error, s.term1, s.term2, s.ratio});
  std::cout << "interp-fit: c0 = " << format_g(fit.c0_hat) << ", c1 = " << format_g(fit.c1_hat)
            << ", c2 = " << format_g(fit.c2_hat) << "\n";
  return kOk;
}

int cmd_selftest() {
  int failed = 0;
  for (const auto& c : run_selftest()) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << (c.detail.empty() ? "" : ": " + c.detail) << "\n";
    if (!c.passed) ++failed;
  }
  return failed == 0 ? kOk : kFail;
}

int exit_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::Config:
    case ErrorKind::InvalidArgument:
    case ErrorKind::Io:
    case ErrorKind::HTooSmall:
    case ErrorKind::HNotLessThanL:
    case ErrorKind::SpanTooShort: return kConfig;
    case ErrorKind::Infeasible: return kInfeasible;
    default: return kNumerical;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rayleigh-Benard determining-form laboratory"};
  app.require_subcommand(1);
  Overrides o;
  auto add_common = [&](CLI::App* sub) {
    sub->set_help_flag("--help", "print this help");
    sub->add_option("--config", o.config, "key = value configuration file");
    sub->add_option("--mu", o.mu, "nudging strength");
    sub->add_option("--h", o.h, "observation length scale");
    sub->add_option("--t-end", o.t_end, "final time or run length");
    sub->add_option("--seed", o.seed, "random seed");
    sub->add_option("--out", o.out, "output directory");
  };
  struct Cmd {
    const char* name;
    const char* help;
    int (*run)(const RunConfig&);
  };
  const Cmd cmds[] = {
      {"simulate", "integrate the Boussinesq system, write snapshots and energy.csv", cmd_simulate},
      {"nudge", "velocity-only nudging against a reference run, write sync.csv", cmd_nudge},
      {"wmap", "evaluate W on an observed attractor trajectory", cmd_wmap},
      {"detform", "scalar reduction of the determining form and zero search", cmd_detform},
      {"audit", "evaluate constants and mu, h conditions", cmd_audit},
      {"interp-fit", "fit interpolant approximation constants", cmd_interp_fit},
  };
  int code = kOk;
  for (const auto& cmd : cmds) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
    add_common(sub);
    sub->callback([&, run = cmd.run] { code = run(resolve(o)); });
  }
  app.add_subcommand("selftest", "run the invariant suite")->callback([&] { code = cmd_selftest(); });
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  } catch (const Error& e) {
    std::cerr << "rbdf: " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "rbdf: " << e.what() << "\n";
    return kNumerical;
  }
  return code;
}
