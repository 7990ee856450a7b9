#pragma once

// Policy-gradient flow engine: the exact gradient of the regularized
// objective, its realizable closed form, adaptive ODE integration with
// per-record spectral diagnostics, and the non-uniform PL constant.

#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "entroflow/evaluation.hpp"
#include "entroflow/numerics.hpp"
#include "entroflow/policy.hpp"

namespace entroflow {

// grad V(rho) = (1-gamma)^{-1} sum_s d(s) sum_j pi_j (Q + tau log f) score
inline Vec objective_gradient(const MdpModel& m, const LogLinearPolicy& pol,
                              const EvaluationResult& ev) {
  const int n = m.n(), J = m.nodes(), p = m.basis.dim();
  Vec grad(p, 0.0);
  for (int s = 0; s < n; ++s) {
    Vec acc(p, 0.0);
    double total = 0.0;
    for (int j = 0; j < J; ++j) {
      const double aj = pol.probabilities(s)[j] *
                        (ev.q(s, j, J) + m.tau * pol.log_density(s)[j]);
      if (aj == 0.0) continue;
      total += aj;
      const double* g = m.feature(s, j);
      for (int i = 0; i < p; ++i) acc[i] += aj * g[i];
    }
    const Vec& gbar = pol.mean_feature(s);
    for (int i = 0; i < p; ++i) grad[i] += ev.d_rho[s] * (acc[i] - total * gbar[i]);
  }
  for (double& x : grad) x /= (1.0 - m.gamma);
  return grad;
}

inline Vec objective_gradient(const MdpModel& m, const Vec& theta) {
  LogLinearPolicy pol(m, theta);
  return objective_gradient(m, pol, evaluate(m, pol));
}

// grad V = tau/(1-gamma) * (sum_s G(s) d(s)) (theta - theta(pi_theta)).
// theta(pi) comes from the occupancy-weighted fit; affine bases use the
// per-state-constant gauge (constants in Q never reach the score).
inline Vec gradient_realizable_form(const MdpModel& m, const Vec& theta) {
  LogLinearPolicy pol(m, theta);
  const auto ev = evaluate(m, pol);
  std::vector<Vec> probs(m.n());
  for (int s = 0; s < m.n(); ++s) probs[s] = pol.probabilities(s);
  const RealizabilityResult fit =
      m.basis.is_simplex() ? realizability_fit(m, probs, ev.d_rho, ev.Q)
                           : realizability_solve_gauged(m, probs, ev.d_rho, ev.Q);
  if (fit.residual_rms > 1e-6)
    throw NotRealizable("gradient_realizable_form: realizability residual too large",
                        fit.residual_rms);
  const int p = m.basis.dim();
  Mat ghat(p, p);
  for (int s = 0; s < m.n(); ++s) {
    const Mat g = pol.fim(s);
    for (int a = 0; a < p; ++a)
      for (int b = 0; b < p; ++b) ghat(a, b) += ev.d_rho[s] * g(a, b);
  }
  Vec diff(p);
  for (int i = 0; i < p; ++i) diff[i] = theta[i] - fit.theta[i];
  Vec out = ghat.apply(diff);
  for (double& x : out) x *= m.tau / (1.0 - m.gamma);
  return out;
}

// ---------------------------------------------------------------------------
// PL constant
// ---------------------------------------------------------------------------

enum class PlVariant { fim, uncentered };

struct PlContext {
  Vec d_star;                       // occupancy of the soft-optimal policy
  double density_ratio = 1.0;       // max_s d*(s)/rho(s)
  double sup_log_density_star = 0;  // sup |log d(pi*)/d(mu)|
  double v_star_rho = 0.0;
};

inline PlContext make_pl_context(const MdpModel& m, const SoftOptimum& opt) {
  PlContext ctx;
  std::vector<Vec> pstar(m.n(), Vec(m.nodes()));
  for (int s = 0; s < m.n(); ++s)
    for (int j = 0; j < m.nodes(); ++j)
      pstar[s][j] = opt.pi_star[static_cast<std::size_t>(s) * m.nodes() + j];
  ctx.d_star = occupancy(m, pstar);
  ctx.density_ratio = 0.0;
  for (int s = 0; s < m.n(); ++s)
    ctx.density_ratio = std::max(ctx.density_ratio, ctx.d_star[s] / m.rho[s]);
  ctx.sup_log_density_star = opt.sup_log_density;
  ctx.v_star_rho = opt.v_rho;
  return ctx;
}

struct PlResult {
  double C_R = 0.0;
  double lambda_theta = 0.0;  // the lambda-integral entering the constant
  PlVariant variant = PlVariant::fim;
};

// C_R(theta) = e^{R_hat} / (2 (1-gamma) tau) * |d d*/d rho|_inf^2 * lambda^-2
// with R_hat = max(2 (1 + gamma tau R) / ((1-gamma) tau), R). The fim variant
// integrates lambda_min(G) against d*, the simplex variant integrates
// lambda_min of the uncentered covariance against the current occupancy.
inline PlResult pl_constant(const MdpModel& m, const LogLinearPolicy& pol,
                            const EvaluationResult& ev, const PlContext& ctx,
                            double R) {
  if (R < pol.sup_log_density() - 1e-9 || R < ctx.sup_log_density_star - 1e-9)
    throw Error("pl_constant: R must dominate the policy and optimal log densities");
  PlResult out;
  out.variant = m.basis.is_simplex() ? PlVariant::uncentered : PlVariant::fim;
  double lambda_int = 0.0;
  for (int s = 0; s < m.n(); ++s) {
    if (out.variant == PlVariant::fim) {
      const auto sp = sym_eig(pol.fim(s));
      lambda_int += sp.eigenvalues.back() * ctx.d_star[s];
    } else {
      const auto sp = sym_eig(pol.uncentered_cov(s));
      lambda_int += sp.eigenvalues.back() * ev.d_rho[s];
    }
  }
  if (lambda_int <= 1e-14)
    throw DegenerateGeometry("pl_constant: lambda integral vanishes");
  out.lambda_theta = lambda_int;
  const double r_hat =
      std::max(2.0 * (1.0 + m.gamma * m.tau * R) / ((1.0 - m.gamma) * m.tau), R);
  out.C_R = std::exp(r_hat) / (2.0 * (1.0 - m.gamma) * m.tau) *
            ctx.density_ratio * ctx.density_ratio / (lambda_int * lambda_int);
  return out;
}

// ---------------------------------------------------------------------------
// Flow integration
// ---------------------------------------------------------------------------

struct FlowRecord {
  double t = 0.0;
  Vec theta;
  double objective = 0.0;
  double grad_norm = 0.0;
  double gap = 0.0;
  double lambda_fim = 0.0;   // sum_s lambda_min(G(s)) d*(s)
  double lambda_cov = 0.0;   // sum_s lambda_min(M(s)) d*(s)
  double C_R = 0.0;          // +inf when the geometry is degenerate
  double sup_log_density = 0.0;
  double ones_dot_theta = 0.0;
  bool pl_degenerate = false;
};

enum class FlowTermination { time_budget, gap_tol, step_failure };

inline const char* to_string(FlowTermination t) {
  switch (t) {
    case FlowTermination::time_budget: return "time_budget";
    case FlowTermination::gap_tol: return "gap_tol";
    case FlowTermination::step_failure: return "step_failure";
  }
  return "?";
}

struct FlowOptions {
  RkScheme scheme = RkScheme::rkf45;
  double h = 0.01;            // rk4 fixed step
  double tolerance = 1e-9;    // rkf45 per-step error control
  double initial_step = 1e-2;
  double t_end = 100.0;
  double log_every = 1.0;
  double gap_tol = 0.0;       // <= 0 disables early termination on the gap
};

struct FlowTrajectory {
  std::vector<FlowRecord> records;
  FlowTermination termination = FlowTermination::time_budget;
  Vec theta0;
  FlowOptions options;
  double v_star_rho = 0.0;
  double density_ratio = 1.0;
  double sup_log_density_star = 0.0;
  double r_running_final = 0.0;  // final running sup of |log density|
  double sup_C_R = 0.0;          // max over records (inf if any degenerate)
};

inline FlowTrajectory integrate_flow(const MdpModel& m, const Vec& theta0,
                                     const FlowOptions& opts) {
  if (!(opts.t_end > 0.0)) throw Error("integrate_flow: t_end must be positive");
  if (opts.scheme == RkScheme::rk4 && !(opts.h > 0.0))
    throw Error("integrate_flow: rk4 requires a positive step");
  if (opts.scheme == RkScheme::rkf45 && !(opts.tolerance > 0.0))
    throw Error("integrate_flow: rkf45 requires a positive tolerance");

  const auto opt = soft_optimal(m, 1e-12, 100000);
  const PlContext ctx = make_pl_context(m, opt);

  FlowTrajectory traj;
  traj.theta0 = theta0;
  traj.options = opts;
  traj.v_star_rho = ctx.v_star_rho;
  traj.density_ratio = ctx.density_ratio;
  traj.sup_log_density_star = ctx.sup_log_density_star;

  double r_running = ctx.sup_log_density_star;

  auto rhs = [&](double, const Vec& th) {
    if (!all_finite(th)) throw DivergedFlow("integrate_flow: non-finite parameter");
    Vec g = objective_gradient(m, th);
    for (double& x : g) x = -x;
    return g;
  };

  auto record_at = [&](double t, const Vec& th) {
    LogLinearPolicy pol(m, th);
    const auto ev = evaluate(m, pol);
    r_running = std::max(r_running, pol.sup_log_density());
    FlowRecord rec;
    rec.t = t;
    rec.theta = th;
    rec.objective = ev.objective;
    rec.gap = ev.objective - ctx.v_star_rho;
    rec.grad_norm = norm2(objective_gradient(m, pol, ev));
    rec.sup_log_density = pol.sup_log_density();
    for (double x : th) rec.ones_dot_theta += x;
    for (int s = 0; s < m.n(); ++s) {
      rec.lambda_fim += sym_eig(pol.fim(s)).eigenvalues.back() * ctx.d_star[s];
      rec.lambda_cov += sym_eig(pol.uncentered_cov(s)).eigenvalues.back() * ctx.d_star[s];
    }
    try {
      rec.C_R = pl_constant(m, pol, ev, ctx, r_running).C_R;
    } catch (const DegenerateGeometry&) {
      rec.C_R = std::numeric_limits<double>::infinity();
      rec.pl_degenerate = true;
    }
    traj.sup_C_R = std::max(traj.sup_C_R, rec.C_R);
    traj.records.push_back(std::move(rec));
  };

  Vec theta = theta0;
  double t = 0.0;
  record_at(0.0, theta);
  if (opts.gap_tol > 0.0 && traj.records.back().gap <= opts.gap_tol) {
    traj.termination = FlowTermination::gap_tol;
    traj.r_running_final = r_running;
    return traj;
  }

  double h_adapt = opts.initial_step;
  int next_record = 1;
  bool done = false;
  while (!done) {
    const double t_record = std::min(next_record * opts.log_every, opts.t_end);
    while (t < t_record - 1e-12) {
      if (!all_finite(theta)) throw DivergedFlow("integrate_flow: non-finite parameter");
      if (opts.scheme == RkScheme::rk4) {
        const double h = std::min(opts.h, t_record - t);
        try {
          theta = rk_step(rhs, t, theta, h, RkScheme::rk4).theta_next;
        } catch (const DivergedDerivative&) {
          throw DivergedFlow("integrate_flow: derivative evaluation diverged");
        }
        t += h;
      } else {
        const double h = std::min(h_adapt, t_record - t);
        const bool clamped = h < h_adapt;
        RkStepResult step;
        try {
          step = rk_step(rhs, t, theta, h, RkScheme::rkf45);
        } catch (const DivergedDerivative&) {
          throw DivergedFlow("integrate_flow: derivative evaluation diverged");
        }
        const double err = *step.error_estimate;
        const double tol = opts.tolerance * (1.0 + norm_inf(theta));
        if (err <= tol) {
          theta = step.theta_next;
          t += h;
          const double grow =
              err > 0.0 ? 0.9 * std::pow(tol / err, 0.2) : 5.0;
          // a step clamped to the record boundary says nothing about h_adapt
          if (!clamped) h_adapt = h * std::min(5.0, std::max(0.2, grow));
        } else {
          h_adapt = h * std::max(0.2, 0.9 * std::pow(tol / err, 0.2));
          if (h_adapt < 1e-12) {
            traj.termination = FlowTermination::step_failure;
            record_at(t, theta);
            traj.r_running_final = r_running;
            return traj;
          }
        }
      }
    }
    t = t_record;
    record_at(t, theta);
    if (opts.gap_tol > 0.0 && traj.records.back().gap <= opts.gap_tol) {
      traj.termination = FlowTermination::gap_tol;
      done = true;
    } else if (t >= opts.t_end - 1e-12) {
      traj.termination = FlowTermination::time_budget;
      done = true;
    }
    ++next_record;
  }
  traj.r_running_final = r_running;
  return traj;
}

// ---------------------------------------------------------------------------
// Convergence-rate fit and CSV export
// ---------------------------------------------------------------------------

struct ConvergenceFit {
  double rate = 0.0;
  double r_squared = 0.0;
};

inline ConvergenceFit convergence_fit(const FlowTrajectory& traj, double tail_fraction) {
  if (!(tail_fraction > 0.0 && tail_fraction <= 1.0))
    throw Error("convergence_fit: tail fraction must lie in (0, 1]");
  const int n = static_cast<int>(traj.records.size());
  const int start = n - std::max(1, static_cast<int>(std::ceil(tail_fraction * n)));
  std::vector<double> ts, ys;
  for (int i = start; i < n; ++i) {
    if (traj.records[i].gap > 1e-14) {
      ts.push_back(traj.records[i].t);
      ys.push_back(std::log(traj.records[i].gap));
    }
  }
  if (ts.size() < 10)
    throw InsufficientData("convergence_fit: fewer than 10 usable records in the tail");
  const double nn = static_cast<double>(ts.size());
  double mt = 0.0, my = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    mt += ts[i];
    my += ys[i];
  }
  mt /= nn;
  my /= nn;
  double stt = 0.0, sty = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    stt += (ts[i] - mt) * (ts[i] - mt);
    sty += (ts[i] - mt) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (stt <= 0.0) throw InsufficientData("convergence_fit: degenerate time window");
  const double slope = sty / stt;
  ConvergenceFit out;
  out.rate = -slope;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double pred = my + slope * (ts[i] - mt);
    ss_res += (ys[i] - pred) * (ys[i] - pred);
  }
  out.r_squared = syy > 1e-30 ? 1.0 - ss_res / syy : 1.0;
  return out;
}

inline std::string format_float17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

// RFC 4180 style: CRLF line endings, header row, full-precision floats
inline std::string trajectory_csv(const FlowTrajectory& traj) {
  std::string out =
      "t,objective,gap,grad_norm,lambda_fim,lambda_cov,C_R,sup_log_density,"
      "ones_dot_theta";
  const int p = traj.theta0.size();
  for (int i = 0; i < p; ++i) out += ",theta_" + std::to_string(i);
  out += "\r\n";
  for (const auto& r : traj.records) {
    out += format_float17(r.t);
    out += ",";
    out += format_float17(r.objective);
    out += ",";
    out += format_float17(r.gap);
    out += ",";
    out += format_float17(r.grad_norm);
    out += ",";
    out += format_float17(r.lambda_fim);
    out += ",";
    out += format_float17(r.lambda_cov);
    out += ",";
    out += format_float17(r.C_R);
    out += ",";
    out += format_float17(r.sup_log_density);
    out += ",";
    out += format_float17(r.ones_dot_theta);
    for (int i = 0; i < p; ++i) {
      out += ",";
      out += format_float17(r.theta[i]);
    }
    out += "\r\n";
  }
  return out;
}

}  // namespace entroflow
