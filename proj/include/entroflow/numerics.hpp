#pragma once

// Dense linear-algebra and integration kernel shared by every other module.
// All matrices here are tiny (p <= 32 for spectra, a few dozen states for
// solves), so the algorithms favour determinism and accuracy over speed:
// cyclic Jacobi sweeps, LU with partial pivoting plus one refinement step,
// one-sided Jacobi orthogonalization for least squares.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "entroflow/errors.hpp"

namespace entroflow {

using Vec = std::vector<double>;

inline bool all_finite(const Vec& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline double norm_inf(const Vec& a) {
  double m = 0.0;
  for (double x : a) m = std::max(m, std::abs(x));
  return m;
}

inline double norm1(const Vec& a) {
  double s = 0.0;
  for (double x : a) s += std::abs(x);
  return s;
}

inline Vec scaled(const Vec& a, double c) {
  Vec r(a);
  for (double& x : r) x *= c;
  return r;
}

inline Vec subtracted(const Vec& a, const Vec& b) {
  Vec r(a);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
  return r;
}

class Mat {
 public:
  Mat() = default;
  Mat(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), a_(static_cast<std::size_t>(rows) * cols, fill) {}

  static Mat identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  double& operator()(int i, int j) { return a_[static_cast<std::size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * cols_ + j]; }

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  bool finite() const {
    for (double x : a_)
      if (!std::isfinite(x)) return false;
    return true;
  }

  double frobenius() const {
    double s = 0.0;
    for (double x : a_) s += x * x;
    return std::sqrt(s);
  }

  double max_abs() const {
    double m = 0.0;
    for (double x : a_) m = std::max(m, std::abs(x));
    return m;
  }

  Vec apply(const Vec& x) const {
    Vec y(rows_, 0.0);
    for (int i = 0; i < rows_; ++i) {
      double s = 0.0;
      for (int j = 0; j < cols_; ++j) s += (*this)(i, j) * x[j];
      y[i] = s;
    }
    return y;
  }

  Vec apply_transpose(const Vec& x) const {
    Vec y(cols_, 0.0);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) y[j] += (*this)(i, j) * x[i];
    return y;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> a_;
};

// ---------------------------------------------------------------------------
// Symmetric eigendecomposition (cyclic Jacobi, deterministic sweep order)
// ---------------------------------------------------------------------------

struct SymmetricSpectrum {
  Vec eigenvalues;   // sorted descending
  Mat eigenvectors;  // orthonormal columns aligned with eigenvalues
};

inline SymmetricSpectrum sym_eig(const Mat& m) {
  const int p = m.rows();
  if (p != m.cols()) throw InvalidMatrix("sym_eig: matrix is not square");
  if (!m.finite()) throw InvalidMatrix("sym_eig: non-finite entries");
  const double scale = m.max_abs();
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j)
      if (std::abs(m(i, j) - m(j, i)) > 1e-12 * (1.0 + scale))
        throw InvalidMatrix("sym_eig: matrix asymmetric beyond tolerance");

  Mat a(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) a(i, j) = 0.5 * (m(i, j) + m(j, i));
  Mat v = Mat::identity(p);

  const double fro = a.frobenius();
  const double stop = 1e-15 * (1.0 + fro);
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < p; ++i)
      for (int j = i + 1; j < p; ++j) off += a(i, j) * a(i, j);
    if (std::sqrt(2.0 * off) <= stop) break;
    for (int q = 1; q < p; ++q) {
      for (int pp = 0; pp < q; ++pp) {
        const double apq = a(pp, q);
        if (std::abs(apq) <= 1e-300) continue;
        const double tau = (a(q, q) - a(pp, pp)) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (int k = 0; k < p; ++k) {
          const double akp = a(k, pp);
          const double akq = a(k, q);
          a(k, pp) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < p; ++k) {
          const double apk = a(pp, k);
          const double aqk = a(q, k);
          a(pp, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < p; ++k) {
          const double vkp = v(k, pp);
          const double vkq = v(k, q);
          v(k, pp) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<int> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int i, int j) { return a(i, i) > a(j, j); });

  SymmetricSpectrum out;
  out.eigenvalues.resize(p);
  out.eigenvectors = Mat(p, p);
  for (int j = 0; j < p; ++j) {
    out.eigenvalues[j] = a(order[j], order[j]);
    for (int i = 0; i < p; ++i) out.eigenvectors(i, j) = v(i, order[j]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Linear solves (LU with partial pivoting, Hager condition estimate)
// ---------------------------------------------------------------------------

class LuFactor {
 public:
  explicit LuFactor(const Mat& a) : n_(a.rows()), lu_(a), a_(a), piv_(a.rows()) {
    if (a.rows() != a.cols()) throw InvalidMatrix("LuFactor: matrix is not square");
    if (!a.finite()) throw InvalidMatrix("LuFactor: non-finite entries");
    std::iota(piv_.begin(), piv_.end(), 0);
    for (int k = 0; k < n_; ++k) {
      int pivot = k;
      double best = std::abs(lu_(k, k));
      for (int i = k + 1; i < n_; ++i) {
        const double cand = std::abs(lu_(i, k));
        if (cand > best) {
          best = cand;
          pivot = i;
        }
      }
      if (best == 0.0) throw IllConditioned("LuFactor: exactly singular matrix");
      if (pivot != k) {
        for (int j = 0; j < n_; ++j) std::swap(lu_(k, j), lu_(pivot, j));
        std::swap(piv_[k], piv_[pivot]);
      }
      for (int i = k + 1; i < n_; ++i) {
        lu_(i, k) /= lu_(k, k);
        const double lik = lu_(i, k);
        if (lik == 0.0) continue;
        for (int j = k + 1; j < n_; ++j) lu_(i, j) -= lik * lu_(k, j);
      }
    }
  }

  int size() const { return n_; }

  Vec solve(const Vec& b) const {
    Vec x = raw_solve(b);
    // one step of iterative refinement in double precision
    Vec r = residual(b, x);
    const Vec dx = raw_solve(r);
    for (int i = 0; i < n_; ++i) x[i] -= dx[i];
    return x;
  }

  Vec solve_transpose(const Vec& b) const {
    Vec x = raw_solve_transpose(b);
    Vec r(n_, 0.0);
    const Vec ax = a_.apply_transpose(x);
    for (int i = 0; i < n_; ++i) r[i] = ax[i] - b[i];
    const Vec dx = raw_solve_transpose(r);
    for (int i = 0; i < n_; ++i) x[i] -= dx[i];
    return x;
  }

  // Hager-style lower bound on ||A^{-1}||_1; together with ||A||_1 this gives
  // the usual 1-norm condition estimate.
  double condition_estimate() const {
    double anorm = 0.0;
    for (int j = 0; j < n_; ++j) {
      double col = 0.0;
      for (int i = 0; i < n_; ++i) col += std::abs(a_(i, j));
      anorm = std::max(anorm, col);
    }
    Vec x(n_, 1.0 / n_);
    double est = 0.0;
    for (int iter = 0; iter < 5; ++iter) {
      const Vec y = raw_solve(x);
      est = norm1(y);
      Vec xi(n_);
      for (int i = 0; i < n_; ++i) xi[i] = (y[i] >= 0.0 ? 1.0 : -1.0);
      const Vec z = raw_solve_transpose(xi);
      int jmax = 0;
      for (int i = 1; i < n_; ++i)
        if (std::abs(z[i]) > std::abs(z[jmax])) jmax = i;
      if (std::abs(z[jmax]) <= dot(z, x)) break;
      std::fill(x.begin(), x.end(), 0.0);
      x[jmax] = 1.0;
    }
    return anorm * est;
  }

  Vec residual(const Vec& b, const Vec& x) const {
    const Vec ax = a_.apply(x);
    Vec r(n_);
    for (int i = 0; i < n_; ++i) r[i] = ax[i] - b[i];
    return r;
  }

 private:
  Vec raw_solve(const Vec& b) const {
    Vec y(n_);
    for (int i = 0; i < n_; ++i) y[i] = b[piv_[i]];
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < i; ++j) y[i] -= lu_(i, j) * y[j];
    for (int i = n_ - 1; i >= 0; --i) {
      for (int j = i + 1; j < n_; ++j) y[i] -= lu_(i, j) * y[j];
      y[i] /= lu_(i, i);
    }
    return y;
  }

  // A^T x = b with PA = LU, i.e. A^T = U^T L^T P.
  Vec raw_solve_transpose(const Vec& b) const {
    Vec y(b);
    for (int i = 0; i < n_; ++i) {
      for (int j = 0; j < i; ++j) y[i] -= lu_(j, i) * y[j];
      y[i] /= lu_(i, i);
    }
    for (int i = n_ - 1; i >= 0; --i)
      for (int j = i + 1; j < n_; ++j) y[i] -= lu_(j, i) * y[j];
    Vec x(n_);
    for (int i = 0; i < n_; ++i) x[piv_[i]] = y[i];
    return x;
  }

  int n_;
  Mat lu_;
  Mat a_;
  std::vector<int> piv_;
};

inline Vec solve_linear(const Mat& a, const Vec& b) {
  if (!all_finite(b)) throw InvalidMatrix("solve_linear: non-finite right-hand side");
  LuFactor lu(a);
  if (lu.condition_estimate() > 1e12)
    throw IllConditioned("solve_linear: condition estimate exceeds 1e12");
  return lu.solve(b);
}

// ---------------------------------------------------------------------------
// Weighted least squares (one-sided Jacobi SVD, minimum-norm solution)
// ---------------------------------------------------------------------------

struct LstsqRow {
  Vec feature;
  double target = 0.0;
  double weight = 1.0;
};

struct LstsqResult {
  Vec theta;
  double residual_rms = 0.0;
  int rank = 0;
  bool rank_borderline = false;  // some singular value within 10x of the cutoff
  Vec singular_values;
};

inline LstsqResult weighted_lstsq(const std::vector<LstsqRow>& rows) {
  if (rows.empty()) throw EmptyProblem("weighted_lstsq: no rows");
  const int p = static_cast<int>(rows[0].feature.size());
  const int m = static_cast<int>(rows.size());
  double wsum = 0.0;
  bool any_positive = false;
  for (const auto& r : rows) {
    if (static_cast<int>(r.feature.size()) != p)
      throw InvalidMatrix("weighted_lstsq: inconsistent feature dimensions");
    if (r.weight < 0.0) throw InvalidMatrix("weighted_lstsq: negative weight");
    if (r.weight > 0.0) any_positive = true;
    wsum += r.weight;
  }
  if (!any_positive) throw EmptyProblem("weighted_lstsq: all weights zero");

  // B = sqrt(W) F (column major), y = sqrt(W) t
  std::vector<Vec> cols(p, Vec(m, 0.0));
  Vec y(m, 0.0);
  for (int i = 0; i < m; ++i) {
    const double sw = std::sqrt(rows[i].weight);
    for (int j = 0; j < p; ++j) cols[j][i] = sw * rows[i].feature[j];
    y[i] = sw * rows[i].target;
  }

  Mat v = Mat::identity(p);
  for (int sweep = 0; sweep < 60; ++sweep) {
    bool converged = true;
    for (int i = 0; i < p - 1; ++i) {
      for (int j = i + 1; j < p; ++j) {
        const double alpha = dot(cols[i], cols[i]);
        const double beta = dot(cols[j], cols[j]);
        const double gamma = dot(cols[i], cols[j]);
        if (std::abs(gamma) <= 1e-15 * std::sqrt(alpha * beta) + 1e-300) continue;
        converged = false;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (int k = 0; k < m; ++k) {
          const double bi = cols[i][k];
          const double bj = cols[j][k];
          cols[i][k] = c * bi - s * bj;
          cols[j][k] = s * bi + c * bj;
        }
        for (int k = 0; k < p; ++k) {
          const double vi = v(k, i);
          const double vj = v(k, j);
          v(k, i) = c * vi - s * vj;
          v(k, j) = s * vi + c * vj;
        }
      }
    }
    if (converged) break;
  }

  Vec sigma(p, 0.0);
  double sigma_max = 0.0;
  for (int j = 0; j < p; ++j) {
    sigma[j] = norm2(cols[j]);
    sigma_max = std::max(sigma_max, sigma[j]);
  }
  const double thresh = 1e-10 * sigma_max;

  LstsqResult out;
  out.theta.assign(p, 0.0);
  out.singular_values = sigma;
  for (int j = 0; j < p; ++j) {
    if (sigma[j] > 0.0 && sigma[j] >= 0.1 * thresh && sigma[j] <= 10.0 * thresh)
      out.rank_borderline = true;
    if (sigma[j] > thresh && sigma[j] > 0.0) {
      ++out.rank;
      const double coeff = dot(cols[j], y) / (sigma[j] * sigma[j]);
      for (int k = 0; k < p; ++k) out.theta[k] += coeff * v(k, j);
    }
  }

  double ss = 0.0;
  for (const auto& r : rows) {
    const double e = dot(r.feature, out.theta) - r.target;
    ss += r.weight * e * e;
  }
  out.residual_rms = std::sqrt(ss / wsum);
  return out;
}

// ---------------------------------------------------------------------------
// Stable log-sum-exp
// ---------------------------------------------------------------------------

inline double log_sum_exp(const Vec& values, const Vec& log_weights) {
  if (values.empty()) throw EmptyProblem("log_sum_exp: empty input");
  if (values.size() != log_weights.size())
    throw InvalidMatrix("log_sum_exp: length mismatch");
  const std::size_t n = values.size();
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double t = values[i] + log_weights[i];
    if (std::isnan(t)) return t;
    m = std::max(m, t);
  }
  if (!std::isfinite(m)) return m;  // all -inf, or one addend overflowed to +inf
  Vec addends(n);
  for (std::size_t i = 0; i < n; ++i)
    addends[i] = std::exp(values[i] + log_weights[i] - m);
  // summing in sorted order makes the result independent of input permutation
  std::sort(addends.begin(), addends.end(), std::greater<double>());
  double s = 0.0;
  for (double a : addends) s += a;
  return m + std::log(s);
}

// ---------------------------------------------------------------------------
// Explicit Runge-Kutta steppers (classical RK4 and Fehlberg 4(5))
// ---------------------------------------------------------------------------

enum class RkScheme { rk4, rkf45 };

struct RkStepResult {
  Vec theta_next;
  std::optional<double> error_estimate;  // absent for rk4
};

using OdeRhs = std::function<Vec(double, const Vec&)>;

namespace detail {
inline Vec rk_eval(const OdeRhs& f, double t, const Vec& y) {
  Vec k = f(t, y);
  if (k.size() != y.size() || !all_finite(k))
    throw DivergedDerivative("rk_step: derivative returned non-finite values");
  return k;
}
}  // namespace detail

inline RkStepResult rk_step(const OdeRhs& f, double t, const Vec& theta, double h,
                            RkScheme scheme) {
  if (!(h > 0.0)) throw InvalidMatrix("rk_step: step size must be positive");
  if (!all_finite(theta)) throw DivergedDerivative("rk_step: non-finite state");
  const std::size_t p = theta.size();

  auto shifted = [&](const Vec& base, std::initializer_list<std::pair<double, const Vec*>> terms) {
    Vec y(base);
    for (const auto& [c, k] : terms)
      for (std::size_t i = 0; i < p; ++i) y[i] += h * c * (*k)[i];
    return y;
  };

  if (scheme == RkScheme::rk4) {
    const Vec k1 = detail::rk_eval(f, t, theta);
    const Vec k2 = detail::rk_eval(f, t + 0.5 * h, shifted(theta, {{0.5, &k1}}));
    const Vec k3 = detail::rk_eval(f, t + 0.5 * h, shifted(theta, {{0.5, &k2}}));
    const Vec k4 = detail::rk_eval(f, t + h, shifted(theta, {{1.0, &k3}}));
    Vec next(theta);
    for (std::size_t i = 0; i < p; ++i)
      next[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return {std::move(next), std::nullopt};
  }

  // Fehlberg 4(5)
  const Vec k1 = detail::rk_eval(f, t, theta);
  const Vec k2 = detail::rk_eval(f, t + h / 4.0, shifted(theta, {{1.0 / 4.0, &k1}}));
  const Vec k3 = detail::rk_eval(
      f, t + 3.0 * h / 8.0, shifted(theta, {{3.0 / 32.0, &k1}, {9.0 / 32.0, &k2}}));
  const Vec k4 = detail::rk_eval(
      f, t + 12.0 * h / 13.0,
      shifted(theta, {{1932.0 / 2197.0, &k1}, {-7200.0 / 2197.0, &k2}, {7296.0 / 2197.0, &k3}}));
  const Vec k5 = detail::rk_eval(
      f, t + h,
      shifted(theta, {{439.0 / 216.0, &k1}, {-8.0, &k2}, {3680.0 / 513.0, &k3}, {-845.0 / 4104.0, &k4}}));
  const Vec k6 = detail::rk_eval(
      f, t + h / 2.0,
      shifted(theta, {{-8.0 / 27.0, &k1}, {2.0, &k2}, {-3544.0 / 2565.0, &k3},
                      {1859.0 / 4104.0, &k4}, {-11.0 / 40.0, &k5}}));

  Vec y4(theta), y5(theta);
  for (std::size_t i = 0; i < p; ++i) {
    y4[i] += h * (25.0 / 216.0 * k1[i] + 1408.0 / 2565.0 * k3[i] +
                  2197.0 / 4104.0 * k4[i] - 1.0 / 5.0 * k5[i]);
    y5[i] += h * (16.0 / 135.0 * k1[i] + 6656.0 / 12825.0 * k3[i] +
                  28561.0 / 56430.0 * k4[i] - 9.0 / 50.0 * k5[i] + 2.0 / 55.0 * k6[i]);
  }
  double err = 0.0;
  for (std::size_t i = 0; i < p; ++i) err = std::max(err, std::abs(y5[i] - y4[i]));
  return {std::move(y5), err};
}

}  // namespace entroflow
