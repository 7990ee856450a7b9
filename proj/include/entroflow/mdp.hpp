#pragma once

// MDP model container plus constructors: the linear-MDP builder (simplex
// features contracted against component distributions), a constant-kernel
// builder whose cost lies in the feature span (the realizable fixture for
// affine bases), the single-state hat-function bandit, and a seeded random
// generator for non-realizable witnesses.

#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "entroflow/errors.hpp"
#include "entroflow/features.hpp"
#include "entroflow/numerics.hpp"

namespace entroflow {

struct MdpModel {
  StateSpace states;
  ActionGrid actions;
  FeatureBasis basis;
  FeatureTable table;
  std::vector<double> transition;  // n * J * n, rows (s,j) stochastic
  std::vector<double> cost;        // n * J, |c| <= 1
  double gamma = 0.9;
  double tau = 1.0;
  Vec rho;
  double cost_rescale = 1.0;  // factor applied to w when |<w,g>| exceeded 1

  int n() const { return states.size(); }
  int nodes() const { return actions.size(); }

  double t(int s, int j, int s2) const {
    return transition[(static_cast<std::size_t>(s) * nodes() + j) * n() + s2];
  }
  double& t(int s, int j, int s2) {
    return transition[(static_cast<std::size_t>(s) * nodes() + j) * n() + s2];
  }
  double c(int s, int j) const { return cost[static_cast<std::size_t>(s) * nodes() + j]; }
  double& c(int s, int j) { return cost[static_cast<std::size_t>(s) * nodes() + j]; }

  const double* feature(int s, int j) const { return table.row(s, j); }

  void allocate() {
    transition.assign(static_cast<std::size_t>(n()) * nodes() * n(), 0.0);
    cost.assign(static_cast<std::size_t>(n()) * nodes(), 0.0);
  }

  void refresh_table() { table = tabulate(basis, states, actions); }
};

struct LinearMdpSpec {
  Vec w;                  // cost weights, c = <w, g>
  std::vector<Vec> psi;   // p probability distributions over states
};

// ---------------------------------------------------------------------------
// validation
// ---------------------------------------------------------------------------

struct ValidationItem {
  std::string name;
  bool passed = true;
  double worst_violation = 0.0;
};

struct ValidationReport {
  std::vector<ValidationItem> items;
  bool all_passed = true;

  const ValidationItem& item(const std::string& name) const {
    for (const auto& it : items)
      if (it.name == name) return it;
    throw Error("validation item not found: " + name);
  }
};

inline ValidationReport validate_model(const MdpModel& m) {
  ValidationReport rep;
  auto push = [&](const std::string& name, double violation, double tol) {
    ValidationItem it{name, violation <= tol, violation};
    rep.all_passed = rep.all_passed && it.passed;
    rep.items.push_back(it);
  };

  double finite_bad = 0.0;
  auto scan_finite = [&](double x) {
    if (!std::isfinite(x)) finite_bad = 1.0;
  };
  for (double x : m.transition) scan_finite(x);
  for (double x : m.cost) scan_finite(x);
  for (double x : m.rho) scan_finite(x);
  push("Finite", finite_bad, 0.0);

  double row_violation = 0.0, neg = 0.0;
  for (int s = 0; s < m.n(); ++s)
    for (int j = 0; j < m.nodes(); ++j) {
      double sum = 0.0;
      for (int s2 = 0; s2 < m.n(); ++s2) {
        sum += m.t(s, j, s2);
        neg = std::max(neg, -m.t(s, j, s2));
      }
      row_violation = std::max(row_violation, std::abs(sum - 1.0));
    }
  push("RowStochastic", row_violation, 1e-12);
  push("TransitionNonnegative", neg, 0.0);

  double cmax = 0.0;
  for (double x : m.cost) cmax = std::max(cmax, std::abs(x));
  push("CostOutOfRange", std::max(0.0, cmax - 1.0), 1e-12);

  double rsum = 0.0, rmin = 1e300;
  for (double x : m.rho) {
    rsum += x;
    rmin = std::min(rmin, x);
  }
  push("RhoNormalized", std::abs(rsum - 1.0), 1e-12);
  push("RhoPositive", rmin > 0.0 ? 0.0 : std::max(-rmin, 1e-300), 0.0);

  double wsum = 0.0, wmin = 1e300;
  for (double x : m.actions.weights) {
    wsum += x;
    wmin = std::min(wmin, x);
  }
  push("WeightsNormalized", std::abs(wsum - 1.0), 1e-12);
  push("WeightsPositive", wmin <= 0.0 ? 1.0 : 0.0, 0.0);

  push("GammaRange", (m.gamma >= 0.0 && m.gamma < 1.0) ? 0.0 : 1.0, 0.0);
  push("TauPositive", m.tau > 0.0 ? 0.0 : 1.0, 0.0);
  return rep;
}

// ---------------------------------------------------------------------------
// constructors
// ---------------------------------------------------------------------------

namespace detail {

inline void fill_span_cost(MdpModel& m, Vec w) {
  double cmax = 0.0;
  for (int s = 0; s < m.n(); ++s)
    for (int j = 0; j < m.nodes(); ++j) {
      double v = 0.0;
      const double* g = m.feature(s, j);
      for (int i = 0; i < m.basis.dim(); ++i) v += w[i] * g[i];
      if (!std::isfinite(v)) throw CostOutOfRange("cost weights produce non-finite costs");
      cmax = std::max(cmax, std::abs(v));
    }
  m.cost_rescale = 1.0;
  if (cmax > 1.0) {
    m.cost_rescale = 1.0 / cmax;
    for (double& x : w) x *= m.cost_rescale;
  }
  for (int s = 0; s < m.n(); ++s)
    for (int j = 0; j < m.nodes(); ++j) {
      double v = 0.0;
      const double* g = m.feature(s, j);
      for (int i = 0; i < m.basis.dim(); ++i) v += w[i] * g[i];
      m.c(s, j) = v;
    }
}

inline void check_distribution(const Vec& d, const std::string& what) {
  double sum = 0.0;
  for (double x : d) {
    if (x < 0.0) throw Error(what + ": negative entry");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw Error(what + ": does not sum to 1");
}

}  // namespace detail

inline MdpModel build_linear_mdp(const LinearMdpSpec& spec, FeatureBasis basis,
                                 StateSpace states, ActionGrid actions, double gamma,
                                 double tau, Vec rho) {
  if (!basis.is_simplex())
    throw NotSimplex("build_linear_mdp: the linear construction requires a simplex basis");
  const int p = basis.dim();
  if (static_cast<int>(spec.w.size()) != p || static_cast<int>(spec.psi.size()) != p)
    throw Error("build_linear_mdp: spec dimensions do not match the basis");
  for (const auto& psi : spec.psi) {
    if (static_cast<int>(psi.size()) != states.size())
      throw Error("build_linear_mdp: psi dimension mismatch");
    detail::check_distribution(psi, "psi");
  }
  actions.validate();
  detail::check_distribution(rho, "rho");

  MdpModel m;
  m.states = std::move(states);
  m.actions = std::move(actions);
  m.basis = std::move(basis);
  m.gamma = gamma;
  m.tau = tau;
  m.rho = std::move(rho);
  m.refresh_table();
  m.allocate();
  for (int s = 0; s < m.n(); ++s)
    for (int j = 0; j < m.nodes(); ++j) {
      const double* g = m.feature(s, j);
      for (int s2 = 0; s2 < m.n(); ++s2) {
        double v = 0.0;
        for (int i = 0; i < p; ++i) v += g[i] * spec.psi[i][s2];
        m.t(s, j, s2) = v;
      }
    }
  detail::fill_span_cost(m, spec.w);
  return m;
}

// Constant transition kernel T(s,a,.) = nu with a feature-span cost. Every
// policy's Q function then equals <w, g> plus a policy-dependent constant,
// which the softmax and the score both ignore, so the optimal policy stays
// inside the log-linear class for any feature basis (the affine-basis
// counterpart of the linear MDP fixture).
inline MdpModel build_const_transition_mdp(Vec w, Vec nu, FeatureBasis basis,
                                           StateSpace states, ActionGrid actions,
                                           double gamma, double tau, Vec rho) {
  if (static_cast<int>(w.size()) != basis.dim())
    throw Error("build_const_transition_mdp: w dimension mismatch");
  if (static_cast<int>(nu.size()) != states.size())
    throw Error("build_const_transition_mdp: nu dimension mismatch");
  detail::check_distribution(nu, "nu");
  detail::check_distribution(rho, "rho");
  actions.validate();

  MdpModel m;
  m.states = std::move(states);
  m.actions = std::move(actions);
  m.basis = std::move(basis);
  m.gamma = gamma;
  m.tau = tau;
  m.rho = std::move(rho);
  m.refresh_table();
  m.allocate();
  for (int s = 0; s < m.n(); ++s)
    for (int j = 0; j < m.nodes(); ++j)
      for (int s2 = 0; s2 < m.n(); ++s2) m.t(s, j, s2) = nu[s2];
  detail::fill_span_cost(m, std::move(w));
  return m;
}

inline MdpModel build_hat_bandit(Vec grid, int nodes, double gamma = 0.9,
                                 double tau = 1.0) {
  if (nodes < 64) throw Error("build_hat_bandit: at least 64 quadrature nodes required");
  MdpModel m;
  m.states.embeddings = {Vec{0.0}};
  m.actions = ActionGrid::midpoint_1d(0.0, 1.0, nodes);
  m.basis = hat_basis(std::move(grid));
  m.gamma = gamma;
  m.tau = tau;
  m.rho = Vec{1.0};
  m.refresh_table();
  m.allocate();
  for (int j = 0; j < nodes; ++j) m.t(0, j, 0) = 1.0;
  return m;
}

inline MdpModel build_random_mdp(int n_states, FeatureBasis basis, ActionGrid actions,
                                 double gamma, double tau, unsigned seed) {
  if (n_states < 1) throw Error("build_random_mdp: need at least one state");
  actions.validate();
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  MdpModel m;
  switch (basis.kind()) {
    case BasisKind::bernstein: {
      if (static_cast<int>(basis.bernstein().embeddings.size()) != n_states)
        throw Error("build_random_mdp: bernstein basis was built for a different state count");
      m.states.embeddings = basis.bernstein().embeddings;
      break;
    }
    case BasisKind::tabular: {
      if (basis.tabular().n_states != n_states || basis.tabular().n_nodes != actions.size())
        throw Error("build_random_mdp: tabular basis shape mismatch");
      m.states = StateSpace::indexed(n_states);
      break;
    }
    case BasisKind::trig: {
      const int d1 = static_cast<int>(basis.trig().state_frequencies[0].size());
      for (int i = 0; i < n_states; ++i) {
        Vec e(d1);
        for (double& x : e) x = unif(rng);
        m.states.embeddings.push_back(std::move(e));
      }
      break;
    }
    case BasisKind::hat: {
      for (int i = 0; i < n_states; ++i) m.states.embeddings.push_back(Vec{unif(rng)});
      break;
    }
  }
  m.actions = std::move(actions);
  m.basis = std::move(basis);
  m.gamma = gamma;
  m.tau = tau;
  m.rho.assign(n_states, 1.0 / n_states);
  m.refresh_table();
  m.allocate();

  // Dirichlet(1)-like rows via normalized exponentials, floored away from 0
  for (int s = 0; s < m.n(); ++s)
    for (int j = 0; j < m.nodes(); ++j) {
      double sum = 0.0;
      for (int s2 = 0; s2 < m.n(); ++s2) {
        double x = -std::log(std::max(unif(rng), 1e-300));
        x = std::max(x, 1e-12);
        m.t(s, j, s2) = x;
        sum += x;
      }
      for (int s2 = 0; s2 < m.n(); ++s2) m.t(s, j, s2) /= sum;
    }
  for (int s = 0; s < m.n(); ++s)
    for (int j = 0; j < m.nodes(); ++j) m.c(s, j) = 2.0 * unif(rng) - 1.0;
  return m;
}

// ---------------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------------

inline nlohmann::json basis_descriptor(const FeatureBasis& b) {
  nlohmann::json j;
  j["kind"] = to_string(b.kind());
  j["dim"] = b.dim();
  j["scale"] = b.scale();
  j["is_simplex"] = b.is_simplex();
  j["claims_full_affine_span"] = b.claims_full_affine_span();
  switch (b.kind()) {
    case BasisKind::trig:
      j["frequencies"] = b.trig().frequencies;
      j["state_frequencies"] = b.trig().state_frequencies;
      break;
    case BasisKind::bernstein:
      j["degree"] = b.bernstein().degree;
      j["direction"] = b.bernstein().direction;
      j["state_offsets"] = b.bernstein().state_offsets;
      j["m_h"] = b.bernstein().m_h;
      j["M_h"] = b.bernstein().M_h;
      break;
    case BasisKind::hat:
      j["grid"] = b.hat().grid;
      break;
    case BasisKind::tabular:
      j["n_states"] = b.tabular().n_states;
      j["n_nodes"] = b.tabular().n_nodes;
      break;
  }
  return j;
}

inline nlohmann::json model_to_json(const MdpModel& m) {
  nlohmann::json j;
  j["states"] = m.states.embeddings;
  j["nodes"] = m.actions.nodes;
  j["weights"] = m.actions.weights;
  j["T"] = m.transition;
  j["c"] = m.cost;
  j["gamma"] = m.gamma;
  j["tau"] = m.tau;
  j["rho"] = m.rho;
  j["basis"] = basis_descriptor(m.basis);
  j["cost_rescale"] = m.cost_rescale;
  return j;
}

}  // namespace entroflow
