#pragma once

// Log-linear softmax policy over a model's quadrature grid:
//   log f(a_j | s) = theta.g(s, a_j) - log Z(s),  pi_j(s) = w_j exp(log f).
// A policy value is immutable; all per-state caches are filled eagerly at
// construction.

#include <vector>

#include "entroflow/mdp.hpp"
#include "entroflow/numerics.hpp"

namespace entroflow {

class LogLinearPolicy {
 public:
  LogLinearPolicy(const MdpModel& m, Vec theta) : m_(&m), theta_(std::move(theta)) {
    const int n = m.n(), J = m.nodes(), p = m.basis.dim();
    if (static_cast<int>(theta_.size()) != p)
      throw Error("LogLinearPolicy: theta dimension mismatch");
    if (!all_finite(theta_)) throw Error("LogLinearPolicy: non-finite theta");
    Vec log_w(J);
    for (int j = 0; j < J; ++j) log_w[j] = std::log(m.actions.weights[j]);
    logf_.assign(n, Vec(J, 0.0));
    probs_.assign(n, Vec(J, 0.0));
    gbar_.assign(n, Vec(p, 0.0));
    logz_.assign(n, 0.0);
    kl_.assign(n, 0.0);
    sup_logf_ = 0.0;
    for (int s = 0; s < n; ++s) {
      Vec logits(J);
      for (int j = 0; j < J; ++j) {
        const double* g = m.feature(s, j);
        double v = 0.0;
        for (int i = 0; i < p; ++i) v += theta_[i] * g[i];
        logits[j] = v;
      }
      logz_[s] = log_sum_exp(logits, log_w);
      if (!std::isfinite(logz_[s]))
        throw DivergedFlow("LogLinearPolicy: log-normalizer overflowed");
      double kl = 0.0;
      for (int j = 0; j < J; ++j) {
        const double lf = logits[j] - logz_[s];
        logf_[s][j] = lf;
        const double pj = m.actions.weights[j] * std::exp(lf);
        probs_[s][j] = pj;
        if (pj > 0.0) kl += pj * lf;
        sup_logf_ = std::max(sup_logf_, std::abs(lf));
        const double* g = m.feature(s, j);
        for (int i = 0; i < p; ++i) gbar_[s][i] += pj * g[i];
      }
      if (kl < 0.0 && kl >= -1e-12) kl = 0.0;  // quadrature round-off floor
      kl_[s] = kl;
    }
  }

  const MdpModel& model() const { return *m_; }
  const Vec& theta() const { return theta_; }
  int dim() const { return static_cast<int>(theta_.size()); }

  double log_z(int s) const { return logz_[s]; }
  const Vec& log_density(int s) const { return logf_[s]; }
  const Vec& probabilities(int s) const { return probs_[s]; }
  const Vec& mean_feature(int s) const { return gbar_[s]; }
  double kl_to_reference(int s) const { return kl_[s]; }
  double sup_log_density() const { return sup_logf_; }

  Vec score(int s, int j) const {
    const double* g = m_->feature(s, j);
    Vec v(dim());
    for (int i = 0; i < dim(); ++i) v[i] = g[i] - gbar_[s][i];
    return v;
  }

  Mat fim(int s) const {
    const int p = dim();
    Mat g(p, p);
    for (int j = 0; j < m_->nodes(); ++j) {
      const double pj = probs_[s][j];
      if (pj == 0.0) continue;
      const Vec sc = score(s, j);
      for (int a = 0; a < p; ++a)
        for (int b = 0; b < p; ++b) g(a, b) += pj * sc[a] * sc[b];
    }
    return g;
  }

  Mat uncentered_cov(int s) const {
    const int p = dim();
    Mat mcov(p, p);
    for (int j = 0; j < m_->nodes(); ++j) {
      const double pj = probs_[s][j];
      if (pj == 0.0) continue;
      const double* g = m_->feature(s, j);
      for (int a = 0; a < p; ++a)
        for (int b = 0; b < p; ++b) mcov(a, b) += pj * g[a] * g[b];
    }
    return mcov;
  }

 private:
  const MdpModel* m_;
  Vec theta_;
  std::vector<Vec> logf_;
  std::vector<Vec> probs_;
  std::vector<Vec> gbar_;
  Vec logz_;
  Vec kl_;
  double sup_logf_;
};

inline const Vec& log_density(const LogLinearPolicy& pol, int s) {
  return pol.log_density(s);
}

inline Vec score(const LogLinearPolicy& pol, int s, int j) { return pol.score(s, j); }

inline Mat fim(const LogLinearPolicy& pol, int s) { return pol.fim(s); }

inline Mat uncentered_cov(const LogLinearPolicy& pol, int s) {
  return pol.uncentered_cov(s);
}

inline double kl_to_reference(const LogLinearPolicy& pol, int s) {
  return pol.kl_to_reference(s);
}

inline double kl_between(const LogLinearPolicy& a, const LogLinearPolicy& b, int s) {
  if (&a.model() != &b.model())
    throw Error("kl_between: policies must share the same model");
  const Vec& pa = a.probabilities(s);
  const Vec& la = a.log_density(s);
  const Vec& lb = b.log_density(s);
  double kl = 0.0;
  for (std::size_t j = 0; j < pa.size(); ++j) kl += pa[j] * (la[j] - lb[j]);
  if (kl < 0.0 && kl >= -1e-12) kl = 0.0;
  return kl;
}

// total variation distance sum_j |pi_a - pi_b| at a state
inline double tv_distance(const LogLinearPolicy& a, const LogLinearPolicy& b, int s) {
  const Vec& pa = a.probabilities(s);
  const Vec& pb = b.probabilities(s);
  double tv = 0.0;
  for (std::size_t j = 0; j < pa.size(); ++j) tv += std::abs(pa[j] - pb[j]);
  return tv;
}

}  // namespace entroflow
