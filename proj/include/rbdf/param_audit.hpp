#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "error.hpp"
#include "rb_solver.hpp"
#include "spectral_core.hpp"

namespace rbdf {

/// Dimensionless constants from functional inequalities and interpolant
/// estimates. User-supplied: no values are fixed by the theory, so every one
/// defaults to 1.
struct UniversalConstants {
  double cL = 1.0;  // Ladyzhenskaya
  double cT = 1.0;  // Titi logarithmic inequality
  double cB = 1.0;  // Brezis-Gallouet
  double cA = 1.0;  // Agmon
  double cE = 1.0;  // elliptic regularity
  double c0 = 1.0;
  double c1 = 1.0;
  double c2 = 1.0;
  double ct1 = 1.0;  // c~1
  double ct2 = 1.0;  // c~2
};

inline void validate(const UniversalConstants& uc) {
  for (double c : {uc.cL, uc.cT, uc.cB, uc.cA, uc.cE, uc.c0, uc.c1, uc.c2, uc.ct1, uc.ct2})
    require(c > 0.0 && std::isfinite(c), ErrorKind::InvalidArgument, "universal constants must be positive");
}

struct AuditInput {
  PhysicalParams p;
  BoundaryCondition bc = BoundaryCondition::StressFree;
  double J1 = 1.0;
  double J2 = 1.0;
  UniversalConstants uc;
  double mu = 100.0;
  double h = 0.25;
  std::optional<double> rho;  // defaults to 4R
};

inline void validate(const AuditInput& in) {
  require(in.p.nu > 0.0 && in.p.kappa > 0.0 && in.p.g >= 0.0, ErrorKind::InvalidArgument,
          "nu, kappa must be positive and g nonnegative");
  require(in.p.domain.L > 0.0 && in.p.domain.l > 0.0, ErrorKind::InvalidArgument, "L and l must be positive");
  require(in.J1 >= 0.0 && in.J2 >= 0.0 && std::isfinite(in.J1) && std::isfinite(in.J2), ErrorKind::InvalidArgument,
          "J1, J2 must be finite and nonnegative");
  require(in.mu > 0.0 && std::isfinite(in.mu), ErrorKind::InvalidArgument, "mu must be positive");
  require(in.h > 0.0 && std::isfinite(in.h), ErrorKind::InvalidArgument, "h must be positive");
  if (in.rho) require(*in.rho >= 0.0 && std::isfinite(*in.rho), ErrorKind::InvalidArgument, "rho must be finite");
  validate(in.uc);
}

struct RadiusPair {
  double R = 0.0;
  double rho = 0.0;
};

/// R = ((c~1 + 1) J1 + c~2 L J2) / (nu lambda1^1/2), rho = 4R.
inline RadiusPair compute_R_rho(const AuditInput& in) {
  validate(in);
  if (!(in.h < in.p.domain.L)) throw Error(ErrorKind::HNotLessThanL, "h must be smaller than L");
  const double lam = eig_lambda1(in.p.domain);
  RadiusPair r;
  r.R = ((in.uc.ct1 + 1.0) * in.J1 + in.uc.ct2 * in.p.domain.L * in.J2) / (in.p.nu * std::sqrt(lam));
  r.rho = 4.0 * r.R;
  return r;
}

struct NamedConstant {
  double value = 0.0;
  std::string formula;
};

using ConstantMap = std::map<std::string, NamedConstant>;

enum class Relation { LessEq, GreaterEq, Greater };

enum class ConditionKind { Mu, H };

struct ConditionResult {
  std::string id;
  ConditionKind kind = ConditionKind::Mu;
  Relation rel = Relation::GreaterEq;
  double lhs = 0.0;
  double rhs = 0.0;
  bool satisfied = false;
  double margin = 0.0;  // positive when satisfied
  std::string formula;
};

struct AuditReport {
  AuditInput input;
  RadiusPair radius;
  ConstantMap constants;
  std::map<std::string, ConditionResult> conditions;
  std::vector<std::string> flags;

  double constant(const std::string& name) const {
    auto it = constants.find(name);
    require(it != constants.end(), ErrorKind::InvalidArgument, "no constant named " + name);
    return it->second.value;
  }

  bool all_satisfied() const {
    return std::all_of(conditions.begin(), conditions.end(), [](const auto& kv) { return kv.second.satisfied; });
  }
};

namespace detail {

inline double resolved_rho(const AuditInput& in) { return in.rho ? *in.rho : compute_R_rho(in).rho; }

struct Chain {
  ConstantMap& m;
  double set(const std::string& name, double v, std::string formula) {
    m[name] = NamedConstant{v, std::move(formula)};
    return v;
  }
};

inline ConditionResult make_condition(std::string id, ConditionKind kind, Relation rel, double lhs, double rhs,
                                      std::string formula) {
  ConditionResult c;
  c.id = std::move(id);
  c.kind = kind;
  c.rel = rel;
  c.lhs = lhs;
  c.rhs = rhs;
  c.formula = std::move(formula);
  switch (rel) {
    case Relation::LessEq:
      c.margin = rhs - lhs;
      c.satisfied = lhs <= rhs;
      break;
    case Relation::GreaterEq:
      c.margin = lhs - rhs;
      c.satisfied = lhs >= rhs;
      break;
    case Relation::Greater:
      c.margin = lhs - rhs;
      c.satisfied = lhs > rhs;
      break;
  }
  if (!std::isfinite(c.margin)) c.satisfied = false;
  return c;
}

}  // namespace detail

/// Constants of the no-slip case. C3 uses alpha = T = 1/(nu lambda1).
inline ConstantMap constants_noslip(const AuditInput& in) {
  validate(in);
  ConstantMap m;
  detail::Chain c{m};
  const auto& p = in.p;
  const auto& u = in.uc;
  const double nu = p.nu, ka = p.kappa;
  const double lam = eig_lambda1(p.domain);
  const double Om = p.domain.area();
  const double l = p.domain.l;
  const double rho = detail::resolved_rho(in);
  const double T = 1.0 / (nu * lam);
  const double alpha = T;

  c.set("lambda1", lam, "(pi/l)^2");
  c.set("Omega", Om, "2 l L");
  c.set("rho", rho, "4R");
  c.set("T", T, "1/(nu lambda1)");
  const double K = c.set("K", 2.0 * Om, "2|Omega|");
  const double C1 = c.set("C1", 4.0 * nu * nu, "4 nu^2");
  c.set("K1", 27.0 * std::pow(u.cL, 8) / (2.0 * nu * nu * nu), "27 c_L^8/(2 nu^3)");
  c.set("K2", 4.0 * (u.cT * u.cT + u.cB * u.cB) * rho * rho / (nu * nu * lam), "4(c_T^2+c_B^2) rho^2/(nu^2 lambda1)");
  const double beta =
      c.set("beta", K * K / 2.0 + alpha * (ka * lam * K * K / 4.0 + 4.0 * C1 * rho * rho / (ka * l * l * lam)),
            "K^2/2 + alpha (kappa lambda1 K^2/(4 rho^2) + 4 C1/(kappa l^2 lambda1)) rho^2");
  const double a1g = 8.0 * u.cL * u.cL * C1 * lam * rho * rho * alpha / ka;
  const double a2g = 8.0 * C1 * rho * rho * alpha / (l * l * ka);
  const double C3 = c.set("C3", (beta / ka + a2g) * std::exp(a1g),
                          "(beta/kappa + 8 C1 rho^2 alpha/(l^2 kappa)) exp(8 c_L^2 C1 lambda1 rho^2 alpha/kappa)");
  const double a1 = c.set("a1",
                          4.0 * u.cL * u.cL / ka * 4.0 * C1 * rho * rho * lam * T +
                              std::pow(u.cL, 4) * nu * nu / (ka * ka) * C3 *
                                  (C3 + (8.0 * u.cL * u.cL * C1 * lam * C3 / ka + 8.0 * C1 / (l * l * ka)) * rho * rho * T),
                          "(4 c_L^2/kappa) 4 C1 rho^2 lambda1 T + (c_L^4 nu^2/kappa^2) C3 [C3 + (8 c_L^2 C1 lambda1 C3/kappa "
                          "+ 8 C1/(l^2 kappa)) rho^2 T]");
  const double K11 = c.set("K11", T * (1.0 / (2.0 * nu) + 1.0 / (ka * l * l * lam)) * in.mu * nu * lam / ka * nu * nu,
                           "T (1/(2 nu) + 1/(kappa l^2 lambda1)) mu nu lambda1 nu^2/kappa");
  const double K12 = c.set("K12", in.mu * nu * lam / (ka * nu * lam) * (lam * T + 1.0 / ka) * nu * nu,
                           "mu nu lambda1 (lambda1 T + 1/kappa) nu^2/(kappa nu lambda1)");
  c.set("K13", std::exp(a1) * (K11 + K12 / T), "exp(a1) (K11 + K12/T)");
  return m;
}

/// Constants of the stress-free case in dependency order
/// C~0 -> C~1 -> K~2 -> C~2 -> beta~ -> C~3 -> K~3, K~4 -> C~4 -> K13..K16.
inline ConstantMap constants_stressfree(const AuditInput& in) {
  validate(in);
  ConstantMap m;
  detail::Chain c{m};
  const auto& p = in.p;
  const auto& u = in.uc;
  const double nu = p.nu, ka = p.kappa, g = p.g;
  const double lam = eig_lambda1(p.domain);
  const double Om = p.domain.area();
  const double l = p.domain.l;
  const double rho = detail::resolved_rho(in);
  const double T = 1.0 / (nu * lam);
  const double alpha = T;

  c.set("lambda1", lam, "(pi/l)^2");
  c.set("Omega", Om, "2 l L");
  c.set("rho", rho, "4R");
  c.set("T", T, "1/(nu lambda1)");
  c.set("K", 2.0 * Om, "2|Omega|");
  c.set("C1", 4.0 * nu * nu, "4 nu^2");
  c.set("K1", 27.0 * std::pow(u.cL, 8) / (2.0 * nu * nu * nu), "27 c_L^8/(2 nu^3)");
  const double e1 = c.set("eps1", 1.0 / Om, "1/|Omega|");
  const double e2 = c.set("eps2", (nu * lam) * (nu * lam), "(nu lambda1)^2");
  const double Kt1 = c.set("Kt1", std::sqrt(Om / lam), "|Omega|^1/2 lambda1^-1/2");
  c.set("Ct0", 2.0 * nu / (lam * ka), "2 nu/(lambda1 kappa)");
  const double Ct1 =
      c.set("Ct1", 32.0 * g * g / (lam * ka * nu * lam) + 8.0 * nu * nu * lam, "32 g^2/(lambda1 kappa nu lambda1) + 8 nu^2 lambda1");
  const double Kt2 = c.set("Kt2", Kt1 * Kt1 * Ct1 / (ka * l * l), "K~1^2 C~1/(kappa l^2)");
  const double Ct2 = c.set("Ct2", 2.0 * Kt2 / (lam * ka), "2 K~2/(lambda1 kappa)");
  const double bt = c.set("beta_t", Ct2 / 2.0 + alpha * (ka * lam * Ct2 / 4.0 + Ct1 / (ka * l * l * lam)),
                          "C~2/2 + alpha (kappa lambda1 C~2/4 + C~1/(kappa l^2 lambda1))");
  const double Ct3 = c.set("Ct3", bt / ka, "beta~/kappa");
  const double Kt3 = c.set("Kt3", 27.0 / (4.0 * ka * ka * ka) * std::pow(u.cL, 4) * Om * Om * Ct1 * Ct1,
                           "27 c_L^4 |Omega|^2 C~1^2/(4 kappa^3)");
  const double Kt4 = c.set("Kt4", 2.0 * Om * Ct1 / (l * l * ka), "2|Omega| C~1/(l^2 kappa)");
  const double Ct4 = c.set("Ct4", (Ct3 + Kt4 * T) * std::exp(2.0 * Kt3 * T * std::pow(rho, 4)),
                           "(C~3 + K~4 T) exp(2 K~3 T rho^4)");
  const double K13 = c.set("K13", u.cL * u.cL * std::sqrt(Om / lam) * Ct4 * rho * rho,
                           "c_L^2 |Omega|^1/2 lambda1^-1/2 C~4 rho^2");
  const double sC1 = std::sqrt(Ct1);
  const double Kh1 = c.set("Kh1", u.cA * u.cE * sC1 * rho / std::sqrt(Om), "c_A c_E C~1^1/2 rho/|Omega|^1/2");
  const double Kh2 = c.set("Kh2", u.cA * u.cE * sC1 * rho, "c_A c_E C~1^1/2 rho");
  const double Kh3 = c.set("Kh3", u.cE * u.cL * sC1 * rho, "c_E c_L C~1^1/2 rho");
  const double Kh4 = c.set("Kh4", u.cE * u.cL * std::pow(Om, 0.25) * sC1 * rho, "c_E c_L |Omega|^1/4 C~1^1/2 rho");
  const double nu3 = nu * nu * nu;
  const double K14 = c.set("K14", 2.0 * Kh1 * Kh1 + 54.0 / nu3 * std::pow(Kh2, 4), "2 K^1^2 + 54 K^2^4/nu^3");
  const double K15 = c.set("K15", 2.0 * Kh3 * Kh3 + 54.0 / nu3 * std::pow(Kh4, 4), "2 K^3^2 + 54 K^4^4/nu^3");
  c.set("K16",
        2.0 * g * g / (lam * ka * e2 * Om) + 2.0 * g * g / (ka * e2) + Kt1 * Kt1 * e2 / (ka * l * l) +
            e1 * u.cL * sC1 * rho * std::sqrt(Om) + e2 * K13 / ka + K15 / nu + K14 * Om / nu,
        "2 g^2 lambda1^-1/(kappa eps2 |Omega|) + 2 g^2/(kappa eps2) + K~1^2 eps2/(kappa l^2) "
        "+ eps1 c_L C~1^1/2 rho |Omega|^1/2 + eps2 K13/kappa + K15/nu + K14 |Omega|/nu");
  const double C6 = c.set("C6", 8.0 * lam * nu3 / ka, "8 lambda1 nu^3/kappa");
  const double rho2 = rho * rho;
  const double a1 = c.set("a1_t",
                          4.0 * u.cL * u.cL / ka * Ct1 * rho2 * T +
                              std::pow(u.cL, 4) * nu * nu / (ka * ka) * Ct4 * rho2 *
                                  (Ct4 * rho2 + T * (2.0 * Kt3 * std::pow(rho, 4) * Ct4 * rho2 + Kt4 * rho2)),
                          "(4 c_L^2/kappa) C~1 rho^2 T + (c_L^4 nu^2/kappa^2) C~4 rho^2 [C~4 rho^2 + T (2 K~3 rho^4 C~4 "
                          "rho^2 + K~4 rho^2)]");
  const double Kt11 = c.set("Kt11", T * (1.0 / nu + 2.0 * Om / (ka * l * l)) * in.mu * C6,
                            "T (1/nu + 2|Omega|/(kappa l^2)) mu C6");
  c.set("Kt12",
        std::exp(a1) * (Kt11 + (8.0 * in.mu * nu * lam * nu * nu * lam * T + 4.0 * in.mu * C6) / (ka * e2 * T)),
        "exp(a1~) [K~11 + (8 mu nu lambda1 nu^2 lambda1 T + 4 mu C6)/(kappa eps2 T)]");
  return m;
}

inline ConstantMap constants_for(const AuditInput& in) {
  return in.bc == BoundaryCondition::NoSlip ? constants_noslip(in) : constants_stressfree(in);
}

/// Evaluates every sufficient condition of the selected boundary case.
inline AuditReport check_conditions(const AuditInput& in) {
  validate(in);
  AuditReport r;
  r.input = in;
  if (in.rho) {
    r.radius.rho = *in.rho;
    r.radius.R = *in.rho / 4.0;
  } else {
    r.radius = compute_R_rho(in);
  }
  r.constants = constants_for(in);
  const auto& p = in.p;
  const auto& u = in.uc;
  const double nu = p.nu, ka = p.kappa, g = p.g;
  const double lam = eig_lambda1(p.domain);
  const double Om = p.domain.area();
  const double l = p.domain.l;
  const double mu = in.mu, h = in.h;
  const double rho = r.radius.rho;
  auto add = [&](ConditionResult c) { r.conditions[c.id] = std::move(c); };
  using detail::make_condition;
  const auto M = ConditionKind::Mu;
  const auto H = ConditionKind::H;

  if (in.bc == BoundaryCondition::NoSlip) {
    const double K = r.constant("K"), C1 = r.constant("C1"), K1 = r.constant("K1"), K2 = r.constant("K2");
    add(make_condition("noslip_h_linear", H, Relation::LessEq, mu * std::sqrt(lam) * u.c1 * h, 0.25,
                       "mu lambda1^1/2 c1 h <= 1/4"));
    add(make_condition("noslip_h_quartic", H, Relation::LessEq, 2.0 * mu * lam * lam * u.c2 * u.c2 * std::pow(h, 4),
                       0.125, "2 mu lambda1^2 c2^2 h^4 <= 1/8"));
    add(make_condition("noslip_mu_buoyancy", M, Relation::Greater, mu * nu * nu * lam * lam * C1,
                       rho > 0.0 ? 5.0 * g * g * K / (2.0 * rho * rho) : (g > 0.0 ? HUGE_VAL : 0.0),
                       "mu nu^2 lambda1^2 C1 > 5 g^2 K/(2 rho^2)"));
    add(make_condition("noslip_mu_nonlinear", M, Relation::Greater, mu * nu / 4.0 - 16.0 * K1 * C1 * C1 * std::pow(rho, 4),
                       0.0, "mu nu/4 - 16 K1 C1^2 rho^4 > 0"));
    const double klogk = std::max(K2 > 0.0 ? K2 * std::log(K2) : 0.0, 0.0);
    if (K2 < 1.0) r.flags.push_back("K2 < 1: K2 log K2 replaced by 0");
    add(make_condition("noslip_mu_lipschitz", M, Relation::GreaterEq,
                       0.5 * mu * nu * lam - g * g / (ka * (nu * lam) * (nu * lam)) - lam * nu / 4.0 * klogk -
                           2.0 * u.cL * u.cL * nu * nu / ka * rho * rho - 2.0 * nu * nu / (l * l * ka),
                       ka * lam / 2.0,
                       "mu nu lambda1/2 - g^2/(kappa (nu lambda1)^2) - (lambda1 nu/4) max(K2 log K2, 0) - 2 c_L^2 nu^2 "
                       "rho^2/kappa - 2 nu^2/(l^2 kappa) >= kappa lambda1/2"));
  } else {
    const double e2 = r.constant("eps2"), Kt1 = r.constant("Kt1"), K16 = r.constant("K16");
    add(make_condition("sf_mu_energy", M, Relation::GreaterEq,
                       mu * nu * lam / 4.0 -
                           (2.0 * g * g / (Om * ka * e2 * lam) + 2.0 * g * g / (ka * e2) + Kt1 * Kt1 * e2 / (ka * l * l)),
                       ka * lam / 2.0,
                       "mu nu lambda1/4 - (2 g^2/(|Omega| kappa eps2 lambda1) + 2 g^2/(kappa eps2) + K~1^2 eps2/(kappa "
                       "l^2)) >= kappa lambda1/2"));
    add(make_condition("sf_mu_mean", M, Relation::GreaterEq, mu * lam / 8.0 - 0.25 / Om, 0.0,
                       "mu lambda1/8 - |Omega|^-1/4 >= 0"));
    add(make_condition("sf_mu_lipschitz", M, Relation::GreaterEq, mu * nu * lam / 4.0 - K16, ka * lam / 4.0,
                       "mu nu lambda1/4 - K16 >= kappa lambda1/4"));
    add(make_condition("sf_h_linear", H, Relation::LessEq, u.c1 * h / std::sqrt(Om), 0.125, "c1 h |Omega|^-1/2 <= 1/8"));
    add(make_condition("sf_h_quartic", H, Relation::LessEq, 2.0 * u.c2 * u.c2 * std::pow(h, 4) * mu * lam / Om, 0.125,
                       "2 c2^2 h^4 mu lambda1 |Omega|^-1 <= 1/8"));
    add(make_condition("sf_h_gradient", H, Relation::LessEq, mu * nu * lam * (u.c1 * u.c1 * h * h + u.c2 * h * h),
                       nu / 2.0, "mu nu lambda1 (c1^2 h^2 + c2 h^2) <= nu/2"));
    if (!std::isfinite(K16)) r.flags.push_back("K16 is not finite in double precision (exp(2 K~3 T rho^4) overflows)");
  }
  return r;
}

struct MuHSuggestion {
  bool feasible = false;
  double mu = 0.0;
  double h = 0.0;
  std::string binding_mu;  // condition that fixes mu_min
  std::string binding_h;   // condition that fixes h_max
  std::string reason;      // set when infeasible
  AuditReport report;      // replay at (mu, h)
};

/// Smallest mu satisfying every mu-condition, then the largest h satisfying
/// every h-condition at that mu, with h kept below min(L, l). The mu-margins
/// are affine in mu and inverted exactly; the h-margins are decreasing in h
/// and inverted by bisection. The pair is replayed through check_conditions.
inline MuHSuggestion suggest_mu_h(const AuditInput& in) {
  validate(in);
  MuHSuggestion s;
  const double h_cap = std::min(in.p.domain.L, in.p.domain.l) * (1.0 - 1e-12);
  AuditInput probe = in;
  probe.h = std::min(in.h, h_cap);
  if (!probe.rho) probe.rho = compute_R_rho(probe).rho;

  auto margins_at_mu = [&](double mu) {
    AuditInput q = probe;
    q.mu = mu;
    return check_conditions(q);
  };
  const AuditReport r1 = margins_at_mu(1.0);
  const AuditReport r2 = margins_at_mu(2.0);
  double mu_min = 0.0;
  for (const auto& [id, c1] : r1.conditions) {
    if (c1.kind != ConditionKind::Mu) continue;
    const double m1 = c1.margin;
    const double slope = r2.conditions.at(id).margin - m1;
    if (!std::isfinite(m1) || !std::isfinite(slope) || slope <= 0.0) {
      s.binding_mu = id;
      s.reason = "condition " + id + " cannot be met by any finite mu (non-finite constants)";
      s.report = r1;
      return s;
    }
    double mu_c = 1.0 - m1 / slope;
    if (c1.rel == Relation::Greater) mu_c = std::nextafter(mu_c, HUGE_VAL) * (1.0 + 1e-12);
    if (mu_c > mu_min) {
      mu_min = mu_c;
      s.binding_mu = id;
    }
  }
  if (mu_min <= 0.0) mu_min = std::numeric_limits<double>::min();

  auto report_at = [&](double mu, double h) {
    AuditInput q = probe;
    q.mu = mu;
    q.h = h;
    return check_conditions(q);
  };
  AuditReport base = report_at(mu_min, probe.h);
  for (int bump = 0; bump < 8; ++bump) {
    bool ok = true;
    for (const auto& [id, c] : base.conditions)
      if (c.kind == ConditionKind::Mu && !c.satisfied) ok = false;
    if (ok) break;
    mu_min *= 1.0 + 1e-12 * std::pow(10.0, bump);
    base = report_at(mu_min, probe.h);
  }

  double h_max = h_cap;
  for (const auto& [id, c] : base.conditions) {
    if (c.kind != ConditionKind::H) continue;
    auto margin = [&](double h) { return report_at(mu_min, h).conditions.at(id).margin; };
    if (margin(h_cap) >= 0.0) continue;
    double lo = 0.0, hi = h_cap;
    auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-14 * std::max(std::abs(a), std::abs(b)); };
    std::uintmax_t iters = 200;
    const auto br = boost::math::tools::bisect([&](double h) { return h == 0.0 ? 1.0 : margin(h); }, lo, hi, tol, iters);
    double hc = br.first;
    while (hc > 0.0 && margin(hc) < 0.0) hc = std::nextafter(hc, 0.0);
    if (hc < h_max) {
      h_max = hc;
      s.binding_h = id;
    }
  }
  s.mu = mu_min;
  s.h = h_max;
  s.report = report_at(mu_min, h_max);
  s.feasible = h_max > 0.0 && s.report.all_satisfied();
  if (!s.feasible) {
    for (const auto& [id, c] : s.report.conditions)
      if (!c.satisfied) {
        s.reason = "condition " + id + " fails at the suggested pair";
        if (c.kind == ConditionKind::Mu) s.binding_mu = id;
        else s.binding_h = id;
        break;
      }
    if (h_max <= 0.0) s.reason = "no positive h satisfies " + s.binding_h;
  }
  return s;
}

/// Upper bound on ||W(v1) - W(v2)||_Y / ||v1 - v2||_X for stress-free data,
/// from sup ||phi||_V0^2 <= mu C6 ||gamma||_X^2 and
/// nu int_T |A0 phi|^2 <= (8 mu nu^3 lambda1^2 T + 4 mu C6) ||gamma||_X^2, T = 1/(nu lambda1).
inline double lipschitz_bound_Y(const PhysicalParams& p, double mu) {
  const double lam = eig_lambda1(p.domain);
  const double nu = p.nu;
  const double T = 1.0 / (nu * lam);
  const double C6 = 8.0 * lam * nu * nu * nu / p.kappa;
  const double sup_term = std::sqrt(mu * C6) / (nu * std::sqrt(lam));
  const double window = (8.0 * mu * nu * nu * nu * lam * lam * T + 4.0 * mu * C6) / nu;
  return sup_term + std::sqrt(window / (nu * lam));
}

inline const char* to_string(Relation r) {
  switch (r) {
    case Relation::LessEq: return "<=";
    case Relation::GreaterEq: return ">=";
    case Relation::Greater: return ">";
  }
  return "?";
}

inline std::string format_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string report_text(const AuditReport& r) {
  std::ostringstream os;
  const auto& in = r.input;
  os << "case: " << (in.bc == BoundaryCondition::NoSlip ? "no-slip" : "stress-free") << "\n";
  os << "nu=" << format_g(in.p.nu) << " kappa=" << format_g(in.p.kappa) << " g=" << format_g(in.p.g)
     << " L=" << format_g(in.p.domain.L) << " l=" << format_g(in.p.domain.l) << "\n";
  os << "mu=" << format_g(in.mu) << " h=" << format_g(in.h) << " J1=" << format_g(in.J1) << " J2=" << format_g(in.J2)
     << "\n";
  os << "R=" << format_g(r.radius.R) << " rho=" << format_g(r.radius.rho) << "\n";
  os << "universal constants (user-supplied, not fixed by the theory): c_L=" << format_g(in.uc.cL)
     << " c_T=" << format_g(in.uc.cT) << " c_B=" << format_g(in.uc.cB) << " c_A=" << format_g(in.uc.cA)
     << " c_E=" << format_g(in.uc.cE) << " c0=" << format_g(in.uc.c0) << " c1=" << format_g(in.uc.c1)
     << " c2=" << format_g(in.uc.c2) << " c~1=" << format_g(in.uc.ct1) << " c~2=" << format_g(in.uc.ct2) << "\n";
  os << "\nconstants\n";
  for (const auto& [name, c] : r.constants) os << "  " << name << " = " << format_g(c.value) << "    [" << c.formula << "]\n";
  os << "\nconditions\n";
  for (const auto& [id, c] : r.conditions)
    os << "  " << (c.satisfied ? "PASS " : "FAIL ") << id << ": " << format_g(c.lhs) << " " << to_string(c.rel) << " "
       << format_g(c.rhs) << " margin=" << format_g(c.margin) << "    [" << c.formula << "]\n";
  for (const auto& f : r.flags) os << "flag: " << f << "\n";
  return os.str();
}

inline std::string report_csv(const AuditReport& r) {
  std::ostringstream os;
  os << "condition,lhs,rhs,margin,pass\n";
  for (const auto& [id, c] : r.conditions)
    os << id << "," << format_g(c.lhs) << "," << format_g(c.rhs) << "," << format_g(c.margin) << ","
       << (c.satisfied ? 1 : 0) << "\n";
  return os.str();
}

}  // namespace rbdf
