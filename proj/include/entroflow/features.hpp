#pragma once

// Feature bases g : S x A -> R^p. Four kinds: trigonometric pairs, Bernstein
// polynomials along a direction, P1 hat functions on a 1-d grid, and a
// tabular indicator basis. All bases are normalized so that the pointwise
// euclidean norm never exceeds 1 (trig carries an explicit 1/sqrt(|K|)
// scale, the simplex bases satisfy it through the partition of unity).
//
// Tabular convention: state embeddings are the state indices themselves
// (embedding {i} for state i) and evaluation snaps actions to the nearest
// quadrature node.

#include <cmath>
#include <cstdint>
#include <variant>
#include <vector>

#include "entroflow/errors.hpp"
#include "entroflow/numerics.hpp"

namespace entroflow {

struct StateSpace {
  std::vector<Vec> embeddings;

  int size() const { return static_cast<int>(embeddings.size()); }

  static StateSpace linspace(int n, double lo, double hi) {
    StateSpace s;
    for (int i = 0; i < n; ++i) {
      const double x = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
      s.embeddings.push_back(Vec{x});
    }
    return s;
  }

  static StateSpace indexed(int n) {
    StateSpace s;
    for (int i = 0; i < n; ++i) s.embeddings.push_back(Vec{static_cast<double>(i)});
    return s;
  }
};

// Quadrature representation of the reference measure mu on the action set.
struct ActionGrid {
  std::vector<Vec> nodes;
  Vec weights;  // strictly positive, sums to 1

  int size() const { return static_cast<int>(nodes.size()); }

  static ActionGrid midpoint_1d(double lo, double hi, int count) {
    if (count < 1 || !(hi > lo)) throw BadGrid("midpoint_1d: invalid interval or count");
    ActionGrid g;
    const double h = (hi - lo) / count;
    for (int j = 0; j < count; ++j) {
      g.nodes.push_back(Vec{lo + (j + 0.5) * h});
      g.weights.push_back(1.0 / count);
    }
    return g;
  }

  void validate() const {
    if (nodes.empty()) throw BadGrid("ActionGrid: empty");
    double s = 0.0;
    for (double w : weights) {
      if (!(w > 0.0)) throw BadGrid("ActionGrid: weights must be strictly positive");
      s += w;
    }
    if (std::abs(s - 1.0) > 1e-12) throw BadGrid("ActionGrid: weights must sum to 1");
  }
};

enum class BasisKind { trig, bernstein, hat, tabular };

inline const char* to_string(BasisKind k) {
  switch (k) {
    case BasisKind::trig: return "trig";
    case BasisKind::bernstein: return "bernstein";
    case BasisKind::hat: return "hat";
    case BasisKind::tabular: return "tabular";
  }
  return "?";
}

struct TrigParams {
  std::vector<Vec> frequencies;        // k in Z^{d2} \ {0}, one per +-pair
  std::vector<Vec> state_frequencies;  // l_k in R^{d1}, aligned with frequencies
};

struct BernsteinParams {
  int degree = 1;
  Vec direction;                 // u in R^{d2}, nonzero
  Vec state_offsets;             // q(s_i) per state index
  std::vector<Vec> embeddings;   // copy of the state embeddings for lookup
  double m_h = 0.0, M_h = 1.0;   // range of q(s) + u.a over S x nodes
};

struct HatParams {
  Vec grid;  // strictly increasing
};

struct TabularParams {
  int n_states = 0;
  int n_nodes = 0;
};

class FeatureBasis {
 public:
  FeatureBasis() = default;

  BasisKind kind() const { return kind_; }
  int dim() const { return p_; }
  double scale() const { return scale_; }
  bool is_simplex() const { return is_simplex_; }
  bool claims_full_affine_span() const { return claims_full_affine_span_; }

  const TrigParams& trig() const { return std::get<TrigParams>(params_); }
  const BernsteinParams& bernstein() const { return std::get<BernsteinParams>(params_); }
  const HatParams& hat() const { return std::get<HatParams>(params_); }
  const TabularParams& tabular() const { return std::get<TabularParams>(params_); }

  // Evaluate g(s, a). `grid` is required only by the tabular basis, which
  // snaps `a` to its nearest node.
  Vec eval(const Vec& s, const Vec& a, const ActionGrid* grid = nullptr) const {
    switch (kind_) {
      case BasisKind::trig: return eval_trig(s, a);
      case BasisKind::bernstein: return eval_bernstein(s, a);
      case BasisKind::hat: return eval_hat(a);
      case BasisKind::tabular: {
        if (grid == nullptr)
          throw Error("tabular basis evaluation requires the action grid");
        const int si = static_cast<int>(std::llround(s.at(0)));
        return eval_tabular(si, nearest_node(*grid, a));
      }
    }
    throw Error("unreachable basis kind");
  }

  // Index-aware evaluation used when tabulating over a model's grids.
  Vec eval_indexed(int s_index, const Vec& s, int node_index, const Vec& a) const {
    if (kind_ == BasisKind::tabular) return eval_tabular(s_index, node_index);
    return eval(s, a);
  }

  friend FeatureBasis trig_basis(std::vector<Vec> frequencies,
                                 std::vector<Vec> state_frequencies);
  friend FeatureBasis bernstein_basis(int k, Vec u, Vec q, const StateSpace& states,
                                      const ActionGrid& actions);
  friend FeatureBasis hat_basis(Vec grid);
  friend FeatureBasis tabular_basis(int n_states, int n_nodes);

 private:
  static int nearest_node(const ActionGrid& grid, const Vec& a) {
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (int j = 0; j < grid.size(); ++j) {
      double d = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k) {
        const double diff = grid.nodes[j][k] - a[k];
        d += diff * diff;
      }
      if (d < bd) {
        bd = d;
        best = j;
      }
    }
    return best;
  }

  Vec eval_trig(const Vec& s, const Vec& a) const {
    const auto& pr = trig();
    Vec g;
    g.reserve(p_);
    for (std::size_t k = 0; k < pr.frequencies.size(); ++k) {
      double phase = 0.0;
      const Vec& freq = pr.frequencies[k];
      for (std::size_t d = 0; d < freq.size(); ++d) phase += freq[d] * a[d];
      const Vec& lk = pr.state_frequencies[k];
      for (std::size_t d = 0; d < lk.size() && d < s.size(); ++d) phase += lk[d] * s[d];
      g.push_back(scale_ * std::cos(phase));
      g.push_back(scale_ * std::sin(phase));
    }
    return g;
  }

  Vec eval_bernstein(const Vec& s, const Vec& a) const {
    const auto& pr = bernstein();
    // locate the state by nearest embedding (exact on the model's grid)
    int si = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pr.embeddings.size(); ++i) {
      double d = 0.0;
      for (std::size_t k = 0; k < s.size(); ++k) {
        const double diff = pr.embeddings[i][k] - s[k];
        d += diff * diff;
      }
      if (d < bd) {
        bd = d;
        si = static_cast<int>(i);
      }
    }
    double ht = pr.state_offsets[si];
    for (std::size_t d = 0; d < pr.direction.size(); ++d) ht += pr.direction[d] * a[d];
    double h = (ht - pr.m_h) / (pr.M_h - pr.m_h);
    if (h < -1e-9 || h > 1.0 + 1e-9)
      throw RangeViolation("bernstein: normalized coordinate outside [0,1]");
    h = std::min(1.0, std::max(0.0, h));
    const int k = pr.degree;
    Vec g(k + 1, 0.0);
    if (h == 0.0) {
      g[0] = 1.0;
    } else if (h == 1.0) {
      g[k] = 1.0;
    } else {
      const double lh = std::log(h);
      const double l1h = std::log1p(-h);
      for (int l = 0; l <= k; ++l)
        g[l] = std::exp(log_binomial(k, l) + l * lh + (k - l) * l1h);
    }
    return g;
  }

  Vec eval_hat(const Vec& a) const {
    const auto& pr = hat();
    const int nseg = static_cast<int>(pr.grid.size()) - 1;
    double x = a.at(0);
    x = std::min(pr.grid.back(), std::max(pr.grid.front(), x));
    int i = 0;
    while (i + 1 < nseg && x > pr.grid[i + 1]) ++i;
    Vec g(pr.grid.size(), 0.0);
    const double left = pr.grid[i], right = pr.grid[i + 1];
    const double t = (x - left) / (right - left);
    g[i] = 1.0 - t;
    g[i + 1] = t;
    return g;
  }

  Vec eval_tabular(int s_index, int node_index) const {
    const auto& pr = std::get<TabularParams>(params_);
    Vec g(p_, 0.0);
    if (s_index < 0 || s_index >= pr.n_states || node_index < 0 || node_index >= pr.n_nodes)
      throw Error("tabular basis: index out of range");
    g[static_cast<std::size_t>(s_index) * pr.n_nodes + node_index] = 1.0;
    return g;
  }

  // log C(n, k) via the Pascal-row recursion in log space
  static double log_binomial(int n, int k) {
    double v = 0.0;
    for (int i = 1; i <= k; ++i) v += std::log(static_cast<double>(n - k + i)) - std::log(static_cast<double>(i));
    return v;
  }

  BasisKind kind_ = BasisKind::hat;
  int p_ = 0;
  double scale_ = 1.0;
  bool is_simplex_ = false;
  bool claims_full_affine_span_ = false;
  std::variant<TrigParams, BernsteinParams, HatParams, TabularParams> params_;
};

inline FeatureBasis trig_basis(std::vector<Vec> frequencies,
                               std::vector<Vec> state_frequencies) {
  if (frequencies.empty()) throw ZeroMode("trig_basis: empty frequency set");
  if (state_frequencies.size() != frequencies.size())
    throw Error("trig_basis: one state-frequency vector per action frequency required");
  for (std::size_t i = 0; i < frequencies.size(); ++i) {
    bool all_zero = true;
    for (double x : frequencies[i])
      if (x != 0.0) all_zero = false;
    if (all_zero) throw ZeroMode("trig_basis: zero action frequency");
    for (std::size_t j = 0; j < i; ++j) {
      bool same = frequencies[i].size() == frequencies[j].size();
      bool negated = same;
      if (same)
        for (std::size_t d = 0; d < frequencies[i].size(); ++d) {
          if (frequencies[i][d] != frequencies[j][d]) same = false;
          if (frequencies[i][d] != -frequencies[j][d]) negated = false;
        }
      if (same || negated)
        throw RedundantMode("trig_basis: duplicate or negated frequency pair");
    }
  }
  FeatureBasis b;
  b.kind_ = BasisKind::trig;
  b.p_ = 2 * static_cast<int>(frequencies.size());
  b.scale_ = 1.0 / std::sqrt(static_cast<double>(frequencies.size()));
  b.is_simplex_ = false;
  b.claims_full_affine_span_ = true;
  b.params_ = TrigParams{std::move(frequencies), std::move(state_frequencies)};
  return b;
}

inline FeatureBasis bernstein_basis(int k, Vec u, Vec q, const StateSpace& states,
                                    const ActionGrid& actions) {
  if (k < 1) throw Error("bernstein_basis: degree must be >= 1");
  if (norm2(u) == 0.0) throw DegenerateDirection("bernstein_basis: zero direction");
  if (static_cast<int>(q.size()) != states.size())
    throw Error("bernstein_basis: one offset per state required");
  double mh = std::numeric_limits<double>::infinity();
  double Mh = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < states.size(); ++i) {
    for (int j = 0; j < actions.size(); ++j) {
      double ht = q[i];
      for (std::size_t d = 0; d < u.size(); ++d) ht += u[d] * actions.nodes[j][d];
      mh = std::min(mh, ht);
      Mh = std::max(Mh, ht);
    }
  }
  if (!(Mh > mh)) throw DegenerateDirection("bernstein_basis: constant direction over the grid");
  FeatureBasis b;
  b.kind_ = BasisKind::bernstein;
  b.p_ = k + 1;
  b.scale_ = 1.0;
  b.is_simplex_ = true;
  b.claims_full_affine_span_ = false;
  BernsteinParams pr;
  pr.degree = k;
  pr.direction = std::move(u);
  pr.state_offsets = std::move(q);
  pr.embeddings = states.embeddings;
  pr.m_h = mh;
  pr.M_h = Mh;
  b.params_ = std::move(pr);
  return b;
}

inline FeatureBasis hat_basis(Vec grid) {
  if (grid.size() < 2) throw BadGrid("hat_basis: need at least two grid points");
  for (std::size_t i = 0; i + 1 < grid.size(); ++i)
    if (!(grid[i] < grid[i + 1])) throw BadGrid("hat_basis: grid must be strictly increasing");
  FeatureBasis b;
  b.kind_ = BasisKind::hat;
  b.p_ = static_cast<int>(grid.size());
  b.scale_ = 1.0;
  b.is_simplex_ = true;
  b.claims_full_affine_span_ = false;
  b.params_ = HatParams{std::move(grid)};
  return b;
}

inline FeatureBasis tabular_basis(int n_states, int n_nodes) {
  if (n_states < 1 || n_nodes < 1) throw Error("tabular_basis: empty index set");
  FeatureBasis b;
  b.kind_ = BasisKind::tabular;
  b.p_ = n_states * n_nodes;
  b.scale_ = 1.0;
  b.is_simplex_ = true;
  b.claims_full_affine_span_ = false;
  b.params_ = TabularParams{n_states, n_nodes};
  return b;
}

inline Vec eval_features(const FeatureBasis& basis, const Vec& s, const Vec& a,
                         const ActionGrid* grid = nullptr) {
  return basis.eval(s, a, grid);
}

// Precomputed g(s_i, a_j) over a model's grids.
struct FeatureTable {
  int n = 0, J = 0, p = 0;
  std::vector<double> data;  // n * J * p

  const double* row(int s, int j) const {
    return data.data() + (static_cast<std::size_t>(s) * J + j) * p;
  }

  Vec feature(int s, int j) const {
    const double* r = row(s, j);
    return Vec(r, r + p);
  }
};

inline FeatureTable tabulate(const FeatureBasis& basis, const StateSpace& states,
                             const ActionGrid& actions) {
  FeatureTable t;
  t.n = states.size();
  t.J = actions.size();
  t.p = basis.dim();
  t.data.resize(static_cast<std::size_t>(t.n) * t.J * t.p);
  for (int s = 0; s < t.n; ++s)
    for (int j = 0; j < t.J; ++j) {
      const Vec g = basis.eval_indexed(s, states.embeddings[s], j, actions.nodes[j]);
      std::copy(g.begin(), g.end(),
                t.data.begin() + (static_cast<std::size_t>(s) * t.J + j) * t.p);
    }
  return t;
}

// mu-mass of the eps-super-level set of a -> u.g(s,a); the finite-grid probe
// behind the zero-measure argmax assumptions. Inclusive comparison so that
// eps >= range covers the whole grid.
inline double probe_argmax_measure(const FeatureBasis& basis, const Vec& s, const Vec& u,
                                   const ActionGrid& grid, double eps) {
  if (!(eps > 0.0)) throw Error("probe_argmax_measure: margin must be positive");
  if (std::abs(norm2(u) - 1.0) > 1e-9)
    throw Error("probe_argmax_measure: direction must be a unit vector");
  if (basis.is_simplex()) {
    double s1 = 0.0;
    for (double x : u) s1 += x;
    if (std::abs(s1) > 1e-9)
      throw Error("probe_argmax_measure: simplex probes require u orthogonal to 1");
  }
  Vec phi(grid.size());
  double best = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < grid.size(); ++j) {
    const Vec g = basis.eval(s, grid.nodes[j], &grid);
    phi[j] = dot(u, g);
    best = std::max(best, phi[j]);
  }
  double mass = 0.0;
  for (int j = 0; j < grid.size(); ++j)
    if (phi[j] >= best - eps) mass += grid.weights[j];
  return mass;
}

}  // namespace entroflow
