#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "entroflow/policy.hpp"
#include "oracles.hpp"

using namespace entroflow;

namespace {
const double kPi = 3.14159265358979323846;
const double kLog3 = std::log(3.0);

MdpModel trig_model(unsigned seed = 1, int J = 256, int n = 4) {
  auto basis = trig_basis({Vec{1.0}, Vec{2.0}}, {Vec{0.8}, Vec{1.7}});
  return build_random_mdp(n, basis, ActionGrid::midpoint_1d(0.0, 2.0 * kPi, J), 0.9, 0.5,
                          seed);
}

MdpModel hat_bandit_4096() {
  return build_hat_bandit(Vec{0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0}, 4096, 0.9, 1.0);
}

Vec hat_direction(double beta) { return Vec{-beta, beta, beta, -beta}; }
}  // namespace

TEST_CASE("log_density: zero parameter reproduces the reference measure") {
  auto m = trig_model();
  LogLinearPolicy pol(m, Vec(4, 0.0));
  for (int s = 0; s < m.n(); ++s) {
    CHECK(std::abs(pol.log_z(s)) <= 1e-12);
    double total = 0.0;
    for (int j = 0; j < m.nodes(); ++j) {
      CHECK(std::abs(pol.log_density(s)[j]) <= 1e-12);
      total += pol.probabilities(s)[j];
    }
    CHECK(std::abs(total - 1.0) <= 1e-12);
    CHECK(pol.kl_to_reference(s) == 0.0);
  }
}

TEST_CASE("log_density: simplex gauge invariance under theta + c*1") {
  auto m = hat_bandit_4096();
  auto rng = oracles::make_rng(6);
  const Vec theta = oracles::random_vec(rng, 4, -2.0, 2.0);
  Vec shifted = theta;
  for (double& x : shifted) x += 3.7;
  LogLinearPolicy a(m, theta), b(m, shifted);
  for (int j = 0; j < m.nodes(); j += 97)
    CHECK(a.log_density(0)[j] == Catch::Approx(b.log_density(0)[j]).margin(1e-12));
}

TEST_CASE("log_density matches a direct normalized-exponential oracle") {
  auto m = trig_model(2, 128);
  auto rng = oracles::make_rng(12);
  for (int rep = 0; rep < 5; ++rep) {
    const Vec theta = oracles::random_vec(rng, 4, -1.5, 1.5);
    LogLinearPolicy pol(m, theta);
    for (int s = 0; s < m.n(); ++s) {
      double z = 0.0;
      Vec raw(m.nodes());
      for (int j = 0; j < m.nodes(); ++j) {
        double v = 0.0;
        const double* g = m.feature(s, j);
        for (int i = 0; i < 4; ++i) v += theta[i] * g[i];
        raw[j] = std::exp(v);
        z += m.actions.weights[j] * raw[j];
      }
      for (int j = 0; j < m.nodes(); j += 13)
        CHECK(pol.log_density(s)[j] ==
              Catch::Approx(std::log(raw[j] / z)).margin(1e-12));
    }
  }
}

TEST_CASE("policy sums to one and respects the sup-norm bound") {
  auto m = trig_model(3);
  auto rng = oracles::make_rng(21);
  for (int rep = 0; rep < 10; ++rep) {
    const Vec theta = oracles::random_vec(rng, 4, -4.0, 4.0);
    LogLinearPolicy pol(m, theta);
    for (int s = 0; s < m.n(); ++s) {
      double total = 0.0;
      for (double p : pol.probabilities(s)) total += p;
      CHECK(std::abs(total - 1.0) <= 1e-12);
    }
    CHECK(pol.sup_log_density() <= 2.0 * norm2(theta) + 1e-12);
  }
}

TEST_CASE("score: single-node grid gives zero, zero-parameter trig gives raw features") {
  ActionGrid one;
  one.nodes = {Vec{0.0}};
  one.weights = {1.0};
  auto basis = trig_basis({Vec{1.0}}, {Vec{0.0}});
  auto m1 = build_random_mdp(2, basis, one, 0.5, 1.0, 9);
  LogLinearPolicy p1(m1, Vec{0.4, -0.2});
  for (int s = 0; s < 2; ++s) CHECK(norm2(p1.score(s, 0)) <= 1e-15);

  // full-period trig at theta = 0: the feature mean vanishes, score = g
  auto m = trig_model(4, 512);
  LogLinearPolicy p0(m, Vec(4, 0.0));
  for (int s = 0; s < m.n(); ++s) {
    CHECK(norm2(p0.mean_feature(s)) <= 1e-10);
    const Vec sc = p0.score(s, 7);
    const double* g = m.feature(s, 7);
    for (int i = 0; i < 4; ++i) CHECK(sc[i] == Catch::Approx(g[i]).margin(1e-10));
  }
}

TEST_CASE("score centering and norm bound over random draws") {
  auto m = trig_model(5);
  auto rng = oracles::make_rng(31);
  for (int rep = 0; rep < 10; ++rep) {
    const Vec theta = oracles::random_vec(rng, 4, -3.0, 3.0);
    LogLinearPolicy pol(m, theta);
    for (int s = 0; s < m.n(); ++s) {
      Vec mean(4, 0.0);
      for (int j = 0; j < m.nodes(); ++j) {
        const Vec sc = pol.score(s, j);
        CHECK(norm2(sc) <= 2.0 + 1e-12);
        for (int i = 0; i < 4; ++i) mean[i] += pol.probabilities(s)[j] * sc[i];
      }
      CHECK(norm_inf(mean) <= 1e-12);
    }
  }
}

TEST_CASE("score smoothness and policy TV-Lipschitz bounds") {
  auto m = trig_model(6);
  auto rng = oracles::make_rng(41);
  for (int rep = 0; rep < 20; ++rep) {
    const Vec t1 = oracles::random_vec(rng, 4, -3.0, 3.0);
    Vec t2 = t1;
    const Vec dt = oracles::random_vec(rng, 4, -1.0, 1.0);
    for (int i = 0; i < 4; ++i) t2[i] += dt[i];
    LogLinearPolicy p1(m, t1), p2(m, t2);
    const double dn = norm2(subtracted(t2, t1));
    for (int s = 0; s < m.n(); ++s) {
      const int j = static_cast<int>(rng() % m.nodes());
      CHECK(norm2(subtracted(p2.score(s, j), p1.score(s, j))) <= 2.0 * dn + 1e-12);
      CHECK(tv_distance(p1, p2, s) <= 2.0 * dn + 1e-12);
    }
  }
}

TEST_CASE("fim: zero on single-node grids, PSD, matches the covariance oracle") {
  ActionGrid one;
  one.nodes = {Vec{0.0}};
  one.weights = {1.0};
  auto m1 = build_random_mdp(1, trig_basis({Vec{1.0}}, {Vec{0.0}}), one, 0.5, 1.0, 2);
  LogLinearPolicy p1(m1, Vec{1.0, 0.0});
  CHECK(p1.fim(0).max_abs() <= 1e-15);

  auto m = trig_model(7);
  auto rng = oracles::make_rng(51);
  for (int rep = 0; rep < 5; ++rep) {
    const Vec theta = oracles::random_vec(rng, 4, -2.0, 2.0);
    LogLinearPolicy pol(m, theta);
    for (int s = 0; s < m.n(); ++s) {
      const Mat g = pol.fim(s);
      auto sp = sym_eig(g);
      CHECK(sp.eigenvalues.back() >= -1e-12);

      // two-pass covariance oracle: sum pi g g^T - gbar gbar^T
      const Mat mc = pol.uncentered_cov(s);
      const Vec& gb = pol.mean_feature(s);
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
          CHECK(g(a, b) == Catch::Approx(mc(a, b) - gb[a] * gb[b]).margin(1e-12));
    }
  }
}

TEST_CASE("fim: simplex bases have null vector 1") {
  auto m = hat_bandit_4096();
  auto rng = oracles::make_rng(61);
  for (int rep = 0; rep < 10; ++rep) {
    const Vec theta = oracles::random_vec(rng, 4, -3.0, 3.0);
    LogLinearPolicy pol(m, theta);
    const Mat g = pol.fim(0);
    const Vec g1 = g.apply(Vec(4, 1.0));
    CHECK(norm_inf(g1) <= 1e-10);
  }
}

TEST_CASE("uncentered covariance: corner case and interlacing with the FIM") {
  ActionGrid one;
  one.nodes = {Vec{0.0}};
  one.weights = {1.0};
  auto mtab = build_random_mdp(1, tabular_basis(1, 1), one, 0.0, 1.0, 3);
  LogLinearPolicy ptab(mtab, Vec{0.3});
  const Mat mc = ptab.uncentered_cov(0);
  CHECK(mc(0, 0) == Catch::Approx(1.0));

  auto m = trig_model(8);
  auto rng = oracles::make_rng(71);
  for (int rep = 0; rep < 100; ++rep) {
    const Vec theta = oracles::random_vec(rng, 4, -2.0, 2.0);
    const int s = static_cast<int>(rng() % m.n());
    LogLinearPolicy pol(m, theta);
    const auto lam = sym_eig(pol.fim(s)).eigenvalues;       // B
    const auto eta = sym_eig(pol.uncentered_cov(s)).eigenvalues;  // B + gbar gbar^T
    for (int i = 0; i < 4; ++i) {
      CHECK(eta[i] >= lam[i] - 1e-10);
      if (i + 1 < 4) CHECK(lam[i] >= eta[i + 1] - 1e-10);
    }
  }
}

TEST_CASE("kl_to_reference: hat bandit closed forms") {
  auto m = hat_bandit_4096();
  LogLinearPolicy zero(m, Vec(4, 0.0));
  CHECK(zero.kl_to_reference(0) == 0.0);

  // beta = 40 against the asymptotic expansion log3 - 2/beta + 3/(2 beta^2)
  LogLinearPolicy b40(m, hat_direction(40.0));
  CHECK(std::abs(b40.kl_to_reference(0) - (kLog3 - 2.0 / 40.0 + 3.0 / 3200.0)) <= 2e-4);

  // beta = 200: same expansion (the distance to log 3 is ~2/beta ~ 1e-2)
  LogLinearPolicy b200(m, hat_direction(200.0));
  const double expect200 = kLog3 - 2.0 / 200.0 + 3.0 / (2.0 * 200.0 * 200.0);
  CHECK(std::abs(b200.kl_to_reference(0) - expect200) <= 2e-4);
  CHECK(std::abs(b200.kl_to_reference(0) - kLog3) <= 1.05e-2);
  CHECK(b200.kl_to_reference(0) < kLog3);
}

TEST_CASE("kl_between: identity, logit bound, simplex gauge") {
  auto m = trig_model(9);
  auto rng = oracles::make_rng(81);
  const Vec theta = oracles::random_vec(rng, 4, -1.0, 1.0);
  LogLinearPolicy a(m, theta);
  for (int s = 0; s < m.n(); ++s) CHECK(kl_between(a, a, s) == 0.0);

  for (int rep = 0; rep < 20; ++rep) {
    const Vec t1 = oracles::random_vec(rng, 4, -1.5, 1.5);
    const Vec t2 = oracles::random_vec(rng, 4, -1.5, 1.5);
    LogLinearPolicy p1(m, t1), p2(m, t2);
    for (int s = 0; s < m.n(); ++s) {
      double dmax = 0.0;
      for (int j = 0; j < m.nodes(); ++j)
        dmax = std::max({dmax, std::exp(p1.log_density(s)[j]),
                         std::exp(p2.log_density(s)[j])});
      const double w = 1.0 / dmax;
      const double dn = norm2(subtracted(t1, t2));
      CHECK(kl_between(p1, p2, s) <= dn * dn / (2.0 * w) + 1e-10);
    }
  }

  // simplex refinement with the optimal gauge shift
  auto mh = hat_bandit_4096();
  for (int rep = 0; rep < 10; ++rep) {
    const Vec t1 = oracles::random_vec(rng, 4, -2.0, 2.0);
    const Vec t2 = oracles::random_vec(rng, 4, -2.0, 2.0);
    LogLinearPolicy p1(mh, t1), p2(mh, t2);
    double dmax = 0.0;
    for (int j = 0; j < mh.nodes(); ++j)
      dmax = std::max({dmax, std::exp(p1.log_density(0)[j]),
                       std::exp(p2.log_density(0)[j])});
    const double w = 1.0 / dmax;
    Vec d = subtracted(t1, t2);
    double mean = 0.0;
    for (double x : d) mean += x / 4.0;
    for (double& x : d) x -= mean;
    CHECK(kl_between(p1, p2, 0) <= dot(d, d) / (2.0 * w) + 1e-10);
  }

  // gauge pair: simplex theta' = theta + c*1 gives KL exactly zero
  const Vec t{0.7, -0.4, 0.1, 0.9};
  Vec tc = t;
  for (double& x : tc) x += 2.5;
  LogLinearPolicy g1(mh, t), g2(mh, tc);
  CHECK(kl_between(g1, g2, 0) <= 1e-14);
}

TEST_CASE("variance concavity under policy mixtures") {
  auto m = trig_model(10);
  auto rng = oracles::make_rng(91);
  for (int rep = 0; rep < 30; ++rep) {
    const Vec t1 = oracles::random_vec(rng, 4, -2.0, 2.0);
    const Vec t2 = oracles::random_vec(rng, 4, -2.0, 2.0);
    const double q = 0.5 * (1.0 + oracles::random_vec(rng, 1)[0]);
    const Vec v = oracles::random_unit(rng, 4);
    LogLinearPolicy p1(m, t1), p2(m, t2);
    const int s = static_cast<int>(rng() % m.n());

    auto variance = [&](const Vec& probs) {
      double mean = 0.0, second = 0.0;
      for (int j = 0; j < m.nodes(); ++j) {
        double x = 0.0;
        const double* g = m.feature(s, j);
        for (int i = 0; i < 4; ++i) x += v[i] * g[i];
        mean += probs[j] * x;
        second += probs[j] * x * x;
      }
      return second - mean * mean;
    };

    Vec mix(m.nodes());
    for (int j = 0; j < m.nodes(); ++j)
      mix[j] = q * p1.probabilities(s)[j] + (1.0 - q) * p2.probabilities(s)[j];
    const double var_mix = variance(mix);
    const double lower = q * variance(p1.probabilities(s)) +
                         (1.0 - q) * variance(p2.probabilities(s));
    CHECK(var_mix >= lower - 1e-12);
  }
}

TEST_CASE("negative entropy is strongly convex on bounded densities") {
  // F(f') >= F(f) + <1 + log f, f' - f>_mu + (W/2) ||f' - f||^2_{L2(mu)}
  // for densities bounded by 1/W
  auto m = trig_model(12, 256, 3);
  auto rng = oracles::make_rng(111);
  for (int rep = 0; rep < 30; ++rep) {
    LogLinearPolicy pa(m, oracles::random_vec(rng, 4, -1.5, 1.5));
    LogLinearPolicy pb(m, oracles::random_vec(rng, 4, -1.5, 1.5));
    const int s = static_cast<int>(rng() % m.n());
    double sup_density = 0.0;
    for (int j = 0; j < m.nodes(); ++j)
      sup_density = std::max({sup_density, std::exp(pa.log_density(s)[j]),
                              std::exp(pb.log_density(s)[j])});
    const double w = 1.0 / sup_density;
    double f_a = 0.0, f_b = 0.0, linear = 0.0, quad = 0.0;
    for (int j = 0; j < m.nodes(); ++j) {
      const double mu_j = m.actions.weights[j];
      const double fa = std::exp(pa.log_density(s)[j]);
      const double fb = std::exp(pb.log_density(s)[j]);
      f_a += mu_j * fa * pa.log_density(s)[j];
      f_b += mu_j * fb * pb.log_density(s)[j];
      linear += mu_j * (1.0 + pa.log_density(s)[j]) * (fb - fa);
      quad += mu_j * (fb - fa) * (fb - fa);
    }
    CHECK(f_b >= f_a + linear + 0.5 * w * quad - 1e-10);
  }
}

TEST_CASE("radial KL growth: trig grows, hat plateau stays below log 3") {
  auto m = trig_model(11, 512);
  auto rng = oracles::make_rng(101);
  for (int rep = 0; rep < 10; ++rep) {
    const Vec u = oracles::random_unit(rng, 4);
    LogLinearPolicy small(m, scaled(u, 5.0));
    LogLinearPolicy large(m, scaled(u, 50.0));
    for (int s = 0; s < m.n(); ++s)
      CHECK(large.kl_to_reference(s) > small.kl_to_reference(s));
  }

  auto mh = hat_bandit_4096();
  for (double r : {1.0, 10.0, 100.0, 200.0, 1000.0}) {
    LogLinearPolicy pol(mh, hat_direction(r / 2.0));  // theta = r * unit direction
    CHECK(pol.kl_to_reference(0) < kLog3 + 1e-2);
  }
}
