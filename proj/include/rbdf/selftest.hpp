#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "bilinear_forms.hpp"
#include "io.hpp"
#include "nudging.hpp"
#include "param_audit.hpp"

namespace rbdf {

struct SelftestCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Quick invariant suite on a 16 x 32 grid.
inline std::vector<SelftestCheck> run_selftest() {
  std::vector<SelftestCheck> out;
  auto check = [&](const std::string& name, const std::function<std::string()>& body) {
    SelftestCheck c{name, false, ""};
    try {
      c.detail = body();
      c.passed = c.detail.empty();
    } catch (const std::exception& e) {
      c.detail = e.what();
    }
    out.push_back(c);
  };

  PhysicalParams p;
  p.g = 100.0;
  p.domain.Nx = 16;
  p.domain.Ny = 32;
  const GridPtr g = Grid::make(p.domain);
  std::mt19937_64 rng(7);

  check("trilinear_antisymmetry", [&]() -> std::string {
    for (int k = 0; k < 5; ++k) {
      const VelocityField u = random_velocity(g, 4.0, rng), v = random_velocity(g, 4.0, rng);
      const ScalarField th = random_field(g, Parity::OddX2, 4.0, rng);
      const double s0 = norm_V0(u) * norm_V0(v) * norm_L2(v);
      if (std::abs(b0_form(u, v, v)) > 1e-12 * s0) return "b0(u,v,v) is not zero";
      if (std::abs(b1_form(u, th, th)) > 1e-12 * norm_V0(u) * norm_L2(th) * norm_L2(th)) return "b1(u,t,t) is not zero";
      if (std::abs(b0_form(u, u, laplacian_apply(u))) > 1e-11 * norm_V0(u) * norm_V0(u) * norm_A0(u))
        return "b0(u,u,A0u) is not zero";
    }
    return "";
  });

  check("lowpass_idempotent", [&]() -> std::string {
    const ModifiedInterpolant m(InterpolantKind{InterpolantType::FourierLowpass, 0.5}, g);
    const VelocityField u = random_velocity(g, 6.0, rng);
    const VelocityField a = m.apply(u), b = m.apply(a);
    return norm_L2(b - a) <= 1e-13 * norm_L2(a) ? "" : "P_r I_h is not idempotent";
  });

  check("pure_diffusion_step", [&]() -> std::string {
    PhysicalParams q = p;
    q.g = 0.0;
    RBState s = zero_state(g);
    s.theta.at(1, 2) = Complex(0.3, -0.1);
    s.theta = symmetry_project(s.theta);
    const Complex before = s.theta.at(1, 2);
    const StepperConfig cfg;
    RBStepper(q, cfg).step_inplace(s);
    const double decay = std::exp(-q.kappa * g->ksq(g->index(1, 2)) * cfg.dt);
    return std::abs(s.theta.at(1, 2) - before * decay) <= 1e-12 * std::abs(before) ? "" : "diffusion factor is wrong";
  });

  check("config_round_trip", [&]() -> std::string {
    RunConfig c;
    c.mu = 1.0 / 3.0;
    c.interpolant = "nodal";
    return parse_config(serialize_config(c)) == c ? "" : "parse(serialize(c)) != c";
  });

  check("snapshot_round_trip", [&]() -> std::string {
    const RBState s = random_initial_state(p, 0.1, 0.1, 11);
    const std::string a = encode_snapshot(make_snapshot(s, p));
    const RBState back = load_state(decode_snapshot(a), g);
    return encode_snapshot(make_snapshot(back, p)) == a ? "" : "snapshot bytes changed";
  });

  check("audit_hand_values", [&]() -> std::string {
    AuditInput in;
    in.J1 = in.J2 = 0.0;
    in.h = 0.1;
    const ConstantMap m = constants_stressfree(in);
    if (m.at("C1").value != 4.0 || m.at("K1").value != 13.5 || m.at("Ct0").value != 2.0 || m.at("C6").value != 8.0)
      return "stress-free constants differ from their unit-parameter values";
    AuditInput r = in;
    r.p.domain.L = 1.0;
    r.J1 = r.J2 = 1.0;
    r.h = 0.5;
    const RadiusPair rr = compute_R_rho(r);
    return rr.R == 3.0 && rr.rho == 12.0 ? "" : "R, rho differ from 3, 12";
  });

  check("suggest_replay", [&]() -> std::string {
    AuditInput in;
    in.p.g = 1.0;
    in.J1 = in.J2 = 1e-4;
    in.h = 0.1;
    const MuHSuggestion s = suggest_mu_h(in);
    return s.feasible && s.report.all_satisfied() ? "" : "suggested pair fails: " + s.reason;
  });

  return out;
}

}  // namespace rbdf
