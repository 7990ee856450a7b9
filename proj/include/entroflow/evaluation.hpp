#pragma once

// Exact policy evaluation and planning on the quadrature-discretized model:
// V and Q from the on-policy Bellman system, occupancy from the adjoint
// solve, the soft-optimal solution via the dynamic programming principle,
// proximal policies, and the least-squares recovery of theta(pi).

#include <optional>
#include <vector>

#include "entroflow/mdp.hpp"
#include "entroflow/numerics.hpp"
#include "entroflow/policy.hpp"

namespace entroflow {

struct EvaluationResult {
  Vec V;                  // per state
  std::vector<double> Q;  // n * J
  Vec d_rho;              // occupancy over states
  Vec kl_per_state;
  double objective = 0.0;  // rho . V

  double q(int s, int j, int J) const { return Q[static_cast<std::size_t>(s) * J + j]; }
};

namespace detail {

inline Mat policy_kernel(const MdpModel& m, const std::vector<Vec>& probs) {
  const int n = m.n(), J = m.nodes();
  Mat p(n, n);
  for (int s = 0; s < n; ++s)
    for (int j = 0; j < J; ++j) {
      const double pj = probs[s][j];
      if (pj == 0.0) continue;
      for (int s2 = 0; s2 < n; ++s2) p(s, s2) += pj * m.t(s, j, s2);
    }
  return p;
}

inline Mat bellman_matrix(const MdpModel& m, const Mat& p_pi) {
  const int n = m.n();
  Mat a = Mat::identity(n);
  for (int s = 0; s < n; ++s)
    for (int s2 = 0; s2 < n; ++s2) a(s, s2) -= m.gamma * p_pi(s, s2);
  return a;
}

}  // namespace detail

// Occupancy d_rho for an arbitrary per-state action distribution table.
inline Vec occupancy(const MdpModel& m, const std::vector<Vec>& probs) {
  const Mat a = detail::bellman_matrix(m, detail::policy_kernel(m, probs));
  LuFactor lu(a);
  if (lu.condition_estimate() > 1e12)
    throw IllConditioned("occupancy: evaluation system ill conditioned");
  Vec rhs(m.n());
  for (int s = 0; s < m.n(); ++s) rhs[s] = (1.0 - m.gamma) * m.rho[s];
  return lu.solve_transpose(rhs);
}

inline EvaluationResult evaluate(const MdpModel& m, const LogLinearPolicy& pol) {
  const int n = m.n(), J = m.nodes();
  std::vector<Vec> probs(n);
  for (int s = 0; s < n; ++s) probs[s] = pol.probabilities(s);

  Vec r(n, 0.0);
  for (int s = 0; s < n; ++s) {
    double cbar = 0.0;
    for (int j = 0; j < J; ++j) cbar += probs[s][j] * m.c(s, j);
    r[s] = cbar + m.tau * pol.kl_to_reference(s);
  }

  const Mat a = detail::bellman_matrix(m, detail::policy_kernel(m, probs));
  LuFactor lu(a);
  if (lu.condition_estimate() > 1e12)
    throw IllConditioned("evaluate: evaluation system ill conditioned");

  EvaluationResult out;
  out.V = lu.solve(r);
  out.Q.assign(static_cast<std::size_t>(n) * J, 0.0);
  for (int s = 0; s < n; ++s)
    for (int j = 0; j < J; ++j) {
      double tv = 0.0;
      for (int s2 = 0; s2 < n; ++s2) tv += m.t(s, j, s2) * out.V[s2];
      out.Q[static_cast<std::size_t>(s) * J + j] = m.c(s, j) + m.gamma * tv;
    }
  Vec rhs(n);
  for (int s = 0; s < n; ++s) rhs[s] = (1.0 - m.gamma) * m.rho[s];
  out.d_rho = lu.solve_transpose(rhs);
  out.kl_per_state.resize(n);
  for (int s = 0; s < n; ++s) out.kl_per_state[s] = pol.kl_to_reference(s);
  out.objective = dot(m.rho, out.V);
  return out;
}

// ---------------------------------------------------------------------------
// Soft-optimal solution (dynamic programming principle)
// ---------------------------------------------------------------------------

struct SoftOptimum {
  Vec V_star;
  std::vector<double> Q_star;           // n * J
  std::vector<double> pi_star;          // n * J probabilities
  std::vector<double> log_density_star; // n * J, log d(pi*)/d(mu)
  std::optional<Vec> theta_star;
  int iterations = 0;
  double final_residual = 0.0;
  double sup_log_density = 0.0;
  double v_rho = 0.0;  // V*(rho)
};

struct RealizabilityResult {
  Vec theta;
  double residual_rms = 0.0;
  bool unique = false;
  int rank = 0;
  bool rank_borderline = false;
};

// Occupancy-plus-floor weighted least squares of -Q/tau on the features.
inline RealizabilityResult realizability_fit(const MdpModel& m,
                                             const std::vector<Vec>& probs,
                                             const Vec& d_rho,
                                             const std::vector<double>& Q) {
  const int n = m.n(), J = m.nodes(), p = m.basis.dim();
  std::vector<LstsqRow> rows;
  rows.reserve(static_cast<std::size_t>(n) * J);
  for (int s = 0; s < n; ++s)
    for (int j = 0; j < J; ++j) {
      LstsqRow row;
      row.feature = m.table.feature(s, j);
      row.target = -Q[static_cast<std::size_t>(s) * J + j] / m.tau;
      row.weight = d_rho[s] * probs[s][j] + 1e-6;
      rows.push_back(std::move(row));
    }
  auto fit = weighted_lstsq(rows);
  RealizabilityResult out;
  out.theta = std::move(fit.theta);
  out.residual_rms = fit.residual_rms;
  out.rank = fit.rank;
  out.rank_borderline = fit.rank_borderline;
  out.unique = (fit.rank == p);
  return out;
}

inline RealizabilityResult realizability_solve(const MdpModel& m,
                                               const LogLinearPolicy& pol,
                                               const EvaluationResult& eval) {
  std::vector<Vec> probs(m.n());
  for (int s = 0; s < m.n(); ++s) probs[s] = pol.probabilities(s);
  return realizability_fit(m, probs, eval.d_rho, eval.Q);
}

inline RealizabilityResult realizability_solve(const MdpModel& m,
                                               const LogLinearPolicy& pol) {
  return realizability_solve(m, pol, evaluate(m, pol));
}

// Same fit with per-state constant columns appended. Softmax policies and the
// score are both invariant to per-state constants added to Q, so this is the
// fit that matters for affine (non-simplex) bases, where constants do not lie
// in the feature span: the returned theta reproduces the proximal policy
// exactly whenever Q is realizable modulo per-state constants.
inline RealizabilityResult realizability_solve_gauged(const MdpModel& m,
                                                      const std::vector<Vec>& probs,
                                                      const Vec& d_rho,
                                                      const std::vector<double>& Q) {
  const int n = m.n(), J = m.nodes(), p = m.basis.dim();
  std::vector<LstsqRow> rows;
  rows.reserve(static_cast<std::size_t>(n) * J);
  for (int s = 0; s < n; ++s)
    for (int j = 0; j < J; ++j) {
      LstsqRow row;
      row.feature.assign(p + n, 0.0);
      const double* g = m.feature(s, j);
      for (int i = 0; i < p; ++i) row.feature[i] = g[i];
      row.feature[p + s] = 1.0;
      row.target = -Q[static_cast<std::size_t>(s) * J + j] / m.tau;
      row.weight = d_rho[s] * probs[s][j] + 1e-6;
      rows.push_back(std::move(row));
    }
  auto fit = weighted_lstsq(rows);
  RealizabilityResult out;
  out.theta.assign(fit.theta.begin(), fit.theta.begin() + p);
  out.residual_rms = fit.residual_rms;
  out.rank = fit.rank;
  out.rank_borderline = fit.rank_borderline;
  out.unique = (fit.rank == p + n);
  return out;
}

inline SoftOptimum soft_optimal(const MdpModel& m, double tol = 1e-12,
                                int max_iters = 100000) {
  if (!(tol > 0.0)) throw Error("soft_optimal: tolerance must be positive");
  const int n = m.n(), J = m.nodes();
  Vec log_w(J);
  for (int j = 0; j < J; ++j) log_w[j] = std::log(m.actions.weights[j]);

  Vec v(n, 0.0);
  std::vector<double> q(static_cast<std::size_t>(n) * J, 0.0);
  double delta = 0.0;
  int it = 0;
  for (; it < max_iters; ++it) {
    delta = 0.0;
    Vec vnew(n);
    for (int s = 0; s < n; ++s) {
      Vec scaled_q(J);
      for (int j = 0; j < J; ++j) {
        double tv = 0.0;
        for (int s2 = 0; s2 < n; ++s2) tv += m.t(s, j, s2) * v[s2];
        const double qq = m.c(s, j) + m.gamma * tv;
        q[static_cast<std::size_t>(s) * J + j] = qq;
        scaled_q[j] = -qq / m.tau;
      }
      vnew[s] = -m.tau * log_sum_exp(scaled_q, log_w);
      delta = std::max(delta, std::abs(vnew[s] - v[s]));
    }
    v = vnew;
    if (delta <= tol * (1.0 - m.gamma)) {
      ++it;
      break;
    }
  }
  if (delta > tol * (1.0 - m.gamma))
    throw NotConverged("soft_optimal: max iterations exceeded", delta);

  SoftOptimum out;
  // one more pass so Q* is consistent with the final V*
  out.Q_star.assign(static_cast<std::size_t>(n) * J, 0.0);
  for (int s = 0; s < n; ++s)
    for (int j = 0; j < J; ++j) {
      double tv = 0.0;
      for (int s2 = 0; s2 < n; ++s2) tv += m.t(s, j, s2) * v[s2];
      out.Q_star[static_cast<std::size_t>(s) * J + j] = m.c(s, j) + m.gamma * tv;
    }
  out.V_star = v;
  out.iterations = it;
  out.final_residual = delta;
  out.v_rho = dot(m.rho, v);

  out.pi_star.assign(static_cast<std::size_t>(n) * J, 0.0);
  out.log_density_star.assign(static_cast<std::size_t>(n) * J, 0.0);
  for (int s = 0; s < n; ++s) {
    Vec ld(J);
    for (int j = 0; j < J; ++j)
      ld[j] = -(out.Q_star[static_cast<std::size_t>(s) * J + j] - v[s]) / m.tau;
    const double corr = log_sum_exp(ld, log_w);  // ~0, removes fixed-point slack
    for (int j = 0; j < J; ++j) {
      const double l = ld[j] - corr;
      out.log_density_star[static_cast<std::size_t>(s) * J + j] = l;
      out.pi_star[static_cast<std::size_t>(s) * J + j] =
          m.actions.weights[j] * std::exp(l);
      out.sup_log_density = std::max(out.sup_log_density, std::abs(l));
    }
  }

  // theta* from the least-squares recovery of -Q*/tau; affine bases are fit
  // modulo per-state constants (see realizability_solve_gauged)
  std::vector<Vec> pstar(n, Vec(J));
  for (int s = 0; s < n; ++s)
    for (int j = 0; j < J; ++j)
      pstar[s][j] = out.pi_star[static_cast<std::size_t>(s) * J + j];
  const Vec dstar = occupancy(m, pstar);
  RealizabilityResult fit =
      m.basis.is_simplex()
          ? realizability_fit(m, pstar, dstar, out.Q_star)
          : realizability_solve_gauged(m, pstar, dstar, out.Q_star);
  if (fit.residual_rms <= 1e-6) out.theta_star = fit.theta;
  return out;
}

// pi_bar(a_j | s) proportional to w_j exp(-Q(s, a_j)/tau)
inline std::vector<Vec> proximal_policy(const MdpModel& m,
                                        const std::vector<double>& Q) {
  const int n = m.n(), J = m.nodes();
  Vec log_w(J);
  for (int j = 0; j < J; ++j) log_w[j] = std::log(m.actions.weights[j]);
  std::vector<Vec> out(n, Vec(J, 0.0));
  for (int s = 0; s < n; ++s) {
    Vec ld(J);
    for (int j = 0; j < J; ++j) ld[j] = -Q[static_cast<std::size_t>(s) * J + j] / m.tau;
    const double z = log_sum_exp(ld, log_w);
    for (int j = 0; j < J; ++j)
      out[s][j] = m.actions.weights[j] * std::exp(ld[j] - z);
  }
  return out;
}

inline std::vector<Vec> proximal_policy(const MdpModel& m, const LogLinearPolicy& pol) {
  return proximal_policy(m, evaluate(m, pol).Q);
}

inline nlohmann::json evaluation_to_json(const EvaluationResult& ev) {
  return {{"V", ev.V},
          {"Q", ev.Q},
          {"d_rho", ev.d_rho},
          {"kl_per_state", ev.kl_per_state},
          {"objective", ev.objective}};
}

inline nlohmann::json soft_optimum_to_json(const SoftOptimum& opt) {
  nlohmann::json j{{"V_star", opt.V_star},
                   {"Q_star", opt.Q_star},
                   {"pi_star", opt.pi_star},
                   {"iterations", opt.iterations},
                   {"final_residual", opt.final_residual},
                   {"sup_log_density", opt.sup_log_density},
                   {"v_rho", opt.v_rho}};
  if (opt.theta_star)
    j["theta_star"] = *opt.theta_star;
  else
    j["theta_star"] = nullptr;
  return j;
}

// KL(p | q) between two per-state action distributions given as probability
// tables over the same grid (used for distributions that may live outside
// the log-linear class, e.g. pi* or proximal policies).
inline double kl_tables(const Vec& p, const Vec& q) {
  double kl = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (p[j] <= 0.0) continue;
    kl += p[j] * std::log(p[j] / q[j]);
  }
  if (kl < 0.0 && kl >= -1e-12) kl = 0.0;
  return kl;
}

}  // namespace entroflow
