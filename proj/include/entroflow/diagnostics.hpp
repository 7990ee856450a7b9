#pragma once

// Stand-alone verification suite: each check with computable content becomes
// a pass/fail report with measured slack. Convention: every instance yields a
// signed slack (inequalities: rhs - lhs; identities: -|lhs - rhs|);
// worst_violation is the minimum slack and a check passes iff
// worst_violation >= -tolerance. Multi-part checks rescale sub-slacks so one
// tolerance governs the report.

#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "entroflow/evaluation.hpp"
#include "entroflow/gradflow.hpp"
#include "entroflow/policy.hpp"

namespace entroflow {

struct CheckReport {
  std::string check_name;
  int instances = 0;
  double worst_violation = 0.0;
  bool passed = true;
  double tolerance = 0.0;
  nlohmann::json details = nlohmann::json::array();

  void add_slack(double slack, nlohmann::json detail) {
    ++instances;
    if (instances == 1 || slack < worst_violation) worst_violation = slack;
    detail["slack"] = slack;
    details.push_back(std::move(detail));
  }

  void finalize() { passed = instances == 0 || worst_violation >= -tolerance; }
};

inline nlohmann::json report_to_json(const CheckReport& rep) {
  nlohmann::json j;
  j["check_name"] = rep.check_name;
  j["instances"] = rep.instances;
  j["worst_violation"] = rep.worst_violation;
  j["passed"] = rep.passed;
  j["tolerance"] = rep.tolerance;
  j["details"] = rep.details;
  return j;
}

namespace detail {

inline Vec rand_vec(std::mt19937& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vec v(n);
  for (double& x : v) x = u(rng);
  return v;
}

inline Vec rand_unit(std::mt19937& rng, int n) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec v(n);
  double s = 0.0;
  do {
    for (double& x : v) x = g(rng);
    s = norm2(v);
  } while (s < 1e-8);
  for (double& x : v) x /= s;
  return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Performance-difference identity
// ---------------------------------------------------------------------------

inline CheckReport check_performance_difference(
    const MdpModel& m, const std::vector<std::pair<Vec, Vec>>& pairs,
    double tolerance = 1e-8) {
  CheckReport rep;
  rep.check_name = "performance_difference";
  rep.tolerance = tolerance;
  for (const auto& [ta, tb] : pairs) {
    LogLinearPolicy pa(m, ta), pb(m, tb);
    const auto ea = evaluate(m, pa), eb = evaluate(m, pb);
    const double lhs = ea.objective - eb.objective;
    double rhs = 0.0;
    for (int s = 0; s < m.n(); ++s) {
      double inner = 0.0;
      for (int j = 0; j < m.nodes(); ++j)
        inner += (eb.q(s, j, m.nodes()) + m.tau * pb.log_density(s)[j]) *
                 (pa.probabilities(s)[j] - pb.probabilities(s)[j]);
      inner += m.tau * kl_between(pa, pb, s);
      rhs += inner * ea.d_rho[s];
    }
    rhs /= (1.0 - m.gamma);
    rep.add_slack(-std::abs(lhs - rhs), {{"lhs", lhs}, {"rhs", rhs}});
  }
  rep.finalize();
  return rep;
}

// ---------------------------------------------------------------------------
// Sandwich bound: equality against pi*, upper bound via the proximal policy
// ---------------------------------------------------------------------------

inline CheckReport check_sandwich(const MdpModel& m, const SoftOptimum& opt,
                                  const std::vector<Vec>& thetas,
                                  double tolerance = 1e-7,
                                  double bound_tolerance = 1e-9) {
  CheckReport rep;
  rep.check_name = "sandwich";
  rep.tolerance = tolerance;
  const PlContext ctx = make_pl_context(m, opt);
  for (const Vec& theta : thetas) {
    LogLinearPolicy pol(m, theta);
    const auto ev = evaluate(m, pol);
    const double gap = ev.objective - opt.v_rho;

    double kl_star = 0.0;
    for (int s = 0; s < m.n(); ++s) {
      Vec pstar(m.nodes());
      for (int j = 0; j < m.nodes(); ++j)
        pstar[j] = opt.pi_star[static_cast<std::size_t>(s) * m.nodes() + j];
      kl_star += kl_tables(pol.probabilities(s), pstar) * ev.d_rho[s];
    }
    const double equality_rhs = m.tau / (1.0 - m.gamma) * kl_star;
    const double slack_eq = -std::abs(gap - equality_rhs);

    const auto prox = proximal_policy(m, ev.Q);
    double kl_prox = 0.0;
    for (int s = 0; s < m.n(); ++s)
      kl_prox += kl_tables(pol.probabilities(s), prox[s]) * ctx.d_star[s];
    const double bound_rhs = m.tau / (1.0 - m.gamma) * kl_prox;
    const double slack_bound = bound_rhs - gap;

    // the bound part carries its own (tighter) tolerance; rescale so the
    // report's single tolerance governs both parts
    const double slack = std::min(slack_eq, slack_bound * (tolerance / bound_tolerance));
    rep.add_slack(slack, {{"gap", gap},
                          {"equality_rhs", equality_rhs},
                          {"proximal_bound", bound_rhs},
                          {"bound_slack", slack_bound}});
  }
  rep.finalize();
  return rep;
}

// ---------------------------------------------------------------------------
// Non-uniform PL inequality
// ---------------------------------------------------------------------------

inline CheckReport check_pl(const MdpModel& m, const SoftOptimum& opt,
                            const std::vector<Vec>& thetas, double tolerance = 1e-10) {
  CheckReport rep;
  rep.check_name = "pl";
  rep.tolerance = tolerance;
  const PlContext ctx = make_pl_context(m, opt);
  double r_running = ctx.sup_log_density_star;
  for (const Vec& theta : thetas) {
    LogLinearPolicy pol(m, theta);
    const auto ev = evaluate(m, pol);
    r_running = std::max(r_running, pol.sup_log_density());
    const double gap = ev.objective - opt.v_rho;
    const Vec grad = objective_gradient(m, pol, ev);
    nlohmann::json detail{{"gap", gap}, {"grad_norm", norm2(grad)}};
    try {
      const auto pl = pl_constant(m, pol, ev, ctx, r_running);
      detail["C_R"] = pl.C_R;
      detail["lambda"] = pl.lambda_theta;
      detail["variant"] = pl.variant == PlVariant::fim ? "fim" : "uncentered";
      const double bound = pl.C_R * dot(grad, grad);
      rep.add_slack(std::isfinite(bound) ? bound - gap
                                         : std::numeric_limits<double>::infinity(),
                    std::move(detail));
    } catch (const DegenerateGeometry&) {
      detail["skipped"] = "degenerate_geometry";
      rep.details.push_back(std::move(detail));
    }
  }
  rep.finalize();
  return rep;
}

// ---------------------------------------------------------------------------
// KL-logit inequality (affine and, for simplex bases, gauge-projected)
// ---------------------------------------------------------------------------

inline CheckReport check_kl_logit(const MdpModel& m,
                                  const std::vector<std::pair<Vec, Vec>>& pairs,
                                  double W = 0.0, double tolerance = 1e-10) {
  CheckReport rep;
  rep.check_name = "kl_logit";
  rep.tolerance = tolerance;
  for (const auto& [ta, tb] : pairs) {
    LogLinearPolicy pa(m, ta), pb(m, tb);
    double sup_density = 0.0;
    for (int s = 0; s < m.n(); ++s)
      for (int j = 0; j < m.nodes(); ++j)
        sup_density = std::max({sup_density, std::exp(pa.log_density(s)[j]),
                                std::exp(pb.log_density(s)[j])});
    double w_inst = W;
    if (W <= 0.0) {
      if (sup_density > 1e8) {  // unbounded-looking densities are skipped
        rep.details.push_back({{"skipped", "density_sup_exceeds_1e8"}});
        continue;
      }
      w_inst = 1.0 / sup_density;
    } else if (sup_density > 1.0 / W + 1e-9) {
      rep.details.push_back({{"skipped", "densities_exceed_supplied_W"}});
      continue;
    }
    const Vec d = subtracted(ta, tb);
    Vec dproj = d;
    if (m.basis.is_simplex()) {
      double mean = 0.0;
      for (double x : d) mean += x / d.size();
      for (double& x : dproj) x -= mean;
    }
    for (int s = 0; s < m.n(); ++s) {
      const double kl = kl_between(pa, pb, s);
      double slack = dot(d, d) / (2.0 * w_inst) - kl;
      if (m.basis.is_simplex())
        slack = std::min(slack, dot(dproj, dproj) / (2.0 * w_inst) - kl);
      rep.add_slack(slack, {{"state", s}, {"kl", kl}, {"W", w_inst}});
    }
  }
  rep.finalize();
  return rep;
}

// ---------------------------------------------------------------------------
// Eigenvalue interlacing under rank-one updates
// ---------------------------------------------------------------------------

struct InterlacingSample {
  Mat b;
  Vec x;
};

// optional policy-derived form: ||G y_perp|| >= lambda_min(M) ||y_perp||
struct PolicySpectrumSample {
  Mat fim;
  Mat uncentered;
  Vec y;
};

inline CheckReport check_interlacing(const std::vector<InterlacingSample>& samples,
                                     const std::vector<PolicySpectrumSample>& policy_samples = {},
                                     double tolerance = 1e-10) {
  CheckReport rep;
  rep.check_name = "interlacing";
  rep.tolerance = tolerance;
  for (const auto& sample : samples) {
    const int p = sample.b.rows();
    Mat a = sample.b;
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < p; ++j) a(i, j) += sample.x[i] * sample.x[j];
    const auto eta = sym_eig(a).eigenvalues;
    const auto lam = sym_eig(sample.b).eigenvalues;
    double slack = 1e300;
    for (int i = 0; i < p; ++i) {
      slack = std::min(slack, eta[i] - lam[i]);
      if (i + 1 < p) slack = std::min(slack, lam[i] - eta[i + 1]);
    }
    rep.add_slack(slack, {{"p", p}});
  }
  for (const auto& sample : policy_samples) {
    const int p = sample.fim.rows();
    Vec yperp = sample.y;
    double mean = 0.0;
    for (double x : sample.y) mean += x / p;
    for (double& x : yperp) x -= mean;
    const double lhs = norm2(sample.fim.apply(yperp));
    const double lam_min = sym_eig(sample.uncentered).eigenvalues.back();
    const double slack = lhs - lam_min * norm2(yperp);
    rep.add_slack(slack, {{"kind", "policy"}, {"lambda_min_M", lam_min}});
  }
  rep.finalize();
  return rep;
}

// ---------------------------------------------------------------------------
// Radial KL probe
// ---------------------------------------------------------------------------

struct RadialProbeLine {
  Vec direction;
  std::vector<double> radii;
  std::vector<double> kl;
  bool monotone = true;   // non-decreasing over the sampled radii
  bool plateau = false;   // growth over the last radius decade below 1e-3
  double last_decade_growth = 0.0;
};

struct RadialProbeReport {
  std::vector<RadialProbeLine> lines;
};

inline RadialProbeReport radial_probe(const MdpModel& m, int state,
                                      const std::vector<Vec>& directions,
                                      const std::vector<double>& radii,
                                      double plateau_threshold = 1e-3) {
  RadialProbeReport out;
  for (Vec u : directions) {
    if (m.basis.is_simplex()) {
      double mean = 0.0;
      for (double x : u) mean += x / u.size();
      for (double& x : u) x -= mean;
      const double nn = norm2(u);
      if (nn < 1e-12) throw Error("radial_probe: direction vanishes after projection");
      for (double& x : u) x /= nn;
    } else {
      const double nn = norm2(u);
      if (nn < 1e-12) throw Error("radial_probe: zero direction");
      for (double& x : u) x /= nn;
    }
    RadialProbeLine line;
    line.direction = u;
    line.radii = radii;
    for (double r : radii) {
      LogLinearPolicy pol(m, scaled(u, r));
      line.kl.push_back(pol.kl_to_reference(state));
    }
    for (std::size_t i = 1; i < line.kl.size(); ++i)
      if (line.kl[i] < line.kl[i - 1] - 1e-12) line.monotone = false;
    // plateau: growth from the largest radius <= r_max/10 up to r_max
    if (!radii.empty()) {
      const double r_max = radii.back();
      int decade_idx = -1;
      for (std::size_t i = 0; i < radii.size(); ++i)
        if (radii[i] <= r_max / 10.0 + 1e-12) decade_idx = static_cast<int>(i);
      if (decade_idx >= 0) {
        line.last_decade_growth = line.kl.back() - line.kl[decade_idx];
        line.plateau = line.last_decade_growth < plateau_threshold;
      }
    }
    out.lines.push_back(std::move(line));
  }
  return out;
}

inline nlohmann::json radial_probe_to_json(const RadialProbeReport& rep) {
  nlohmann::json lines = nlohmann::json::array();
  for (const auto& line : rep.lines) {
    lines.push_back({{"direction", line.direction},
                     {"radii", line.radii},
                     {"kl", line.kl},
                     {"monotone", line.monotone},
                     {"plateau", line.plateau},
                     {"last_decade_growth", line.last_decade_growth}});
  }
  return {{"check_name", "radial_probe"}, {"lines", lines}};
}

// ---------------------------------------------------------------------------
// Score bounds and smoothness
// ---------------------------------------------------------------------------

inline CheckReport check_score_bounds(const MdpModel& m, int samples, unsigned seed,
                                      double tolerance = 1e-12) {
  CheckReport rep;
  rep.check_name = "score_bounds";
  rep.tolerance = tolerance;
  std::mt19937 rng(seed);
  const int p = m.basis.dim();
  for (int i = 0; i < samples; ++i) {
    const Vec ta = detail::rand_vec(rng, p, -3.0, 3.0);
    const Vec tb = detail::rand_vec(rng, p, -3.0, 3.0);
    LogLinearPolicy pa(m, ta), pb(m, tb);
    const int s = static_cast<int>(rng() % m.n());
    const int j = static_cast<int>(rng() % m.nodes());
    const double bound_slack = 2.0 - norm2(pa.score(s, j));
    const double smooth_slack =
        2.0 * norm2(subtracted(ta, tb)) - norm2(subtracted(pa.score(s, j), pb.score(s, j)));
    rep.add_slack(std::min(bound_slack, smooth_slack),
                  {{"state", s}, {"node", j}});
  }
  rep.finalize();
  return rep;
}

// ---------------------------------------------------------------------------
// Suite runner
// ---------------------------------------------------------------------------

struct SuiteOptions {
  std::vector<std::string> checks;  // empty means all
  int instances = 30;
  unsigned seed = 42;
  double tolerance_override = -1.0;  // >= 0 replaces every check tolerance
};

inline const std::vector<std::string>& known_checks() {
  static const std::vector<std::string> names = {
      "performance_difference", "sandwich",    "pl",          "kl_logit",
      "interlacing",            "score_bounds"};
  return names;
}

inline std::vector<CheckReport> run_suite(const MdpModel& m, const SuiteOptions& opts) {
  std::vector<std::string> selected = opts.checks;
  if (selected.empty()) selected = known_checks();
  for (const auto& name : selected) {
    bool ok = false;
    for (const auto& known : known_checks()) ok = ok || known == name;
    if (!ok) throw Error("unknown check name: " + name);
  }

  std::mt19937 rng(opts.seed);
  const int p = m.basis.dim();
  auto thetas = [&](int count, double scale) {
    std::vector<Vec> out;
    for (int i = 0; i < count; ++i) out.push_back(detail::rand_vec(rng, p, -scale, scale));
    return out;
  };
  auto pairs = [&](int count, double scale) {
    std::vector<std::pair<Vec, Vec>> out;
    for (int i = 0; i < count; ++i)
      out.emplace_back(detail::rand_vec(rng, p, -scale, scale),
                       detail::rand_vec(rng, p, -scale, scale));
    return out;
  };

  std::vector<CheckReport> reports;
  auto want = [&](const std::string& name) {
    for (const auto& sel : selected)
      if (sel == name) return true;
    return false;
  };

  std::optional<SoftOptimum> opt;
  auto the_opt = [&]() -> const SoftOptimum& {
    if (!opt) opt = soft_optimal(m);
    return *opt;
  };

  if (want("performance_difference"))
    reports.push_back(check_performance_difference(
        m, pairs(opts.instances, 2.0),
        opts.tolerance_override >= 0 ? opts.tolerance_override : 1e-8));
  if (want("sandwich"))
    reports.push_back(check_sandwich(
        m, the_opt(), thetas(opts.instances, 2.0),
        opts.tolerance_override >= 0 ? opts.tolerance_override : 1e-7));
  if (want("pl"))
    reports.push_back(check_pl(m, the_opt(), thetas(opts.instances, 2.0),
                               opts.tolerance_override >= 0 ? opts.tolerance_override
                                                            : 1e-10));
  if (want("kl_logit"))
    reports.push_back(check_kl_logit(
        m, pairs(opts.instances, 1.5), 0.0,
        opts.tolerance_override >= 0 ? opts.tolerance_override : 1e-10));
  if (want("interlacing")) {
    std::vector<InterlacingSample> samples;
    for (int i = 0; i < std::max(opts.instances, 100); ++i) {
      const int pp = 2 + static_cast<int>(rng() % 7);
      Mat b(pp, pp);
      for (int r = 0; r < pp; ++r)
        for (int c = r; c < pp; ++c) {
          const double v = detail::rand_vec(rng, 1, -1.5, 1.5)[0];
          b(r, c) = v;
          b(c, r) = v;
        }
      samples.push_back({std::move(b), detail::rand_vec(rng, pp, -1.0, 1.0)});
    }
    // the projected lower bound needs the simplex null-vector structure
    std::vector<PolicySpectrumSample> policy_samples;
    if (m.basis.is_simplex()) {
      for (int i = 0; i < 10; ++i) {
        LogLinearPolicy pol(m, detail::rand_vec(rng, p, -2.0, 2.0));
        const int s = static_cast<int>(rng() % m.n());
        policy_samples.push_back(
            {pol.fim(s), pol.uncentered_cov(s), detail::rand_vec(rng, p, -1.0, 1.0)});
      }
    }
    reports.push_back(check_interlacing(
        samples, policy_samples,
        opts.tolerance_override >= 0 ? opts.tolerance_override : 1e-10));
  }
  if (want("score_bounds"))
    reports.push_back(check_score_bounds(
        m, std::max(opts.instances, 100), opts.seed + 1,
        opts.tolerance_override >= 0 ? opts.tolerance_override : 1e-12));
  return reports;
}

}  // namespace entroflow
