// Acceptance suite: one pass/fail line per criterion, selected by number on
// the command line (default: all). Exit code is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "entroflow/config.hpp"
#include "entroflow/diagnostics.hpp"
#include "entroflow/gradflow.hpp"

using namespace entroflow;

namespace {

const double kLog3 = std::log(3.0);

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

ExperimentConfig fixture_config(const std::string& name) {
  return parse_config(slurp(std::filesystem::path(ENTROFLOW_FIXTURE_DIR) / name));
}

MdpModel fixture_model(const std::string& name) {
  return build_model(fixture_config(name));
}

Vec rand_vec(std::mt19937& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vec v(n);
  for (double& x : v) x = u(rng);
  return v;
}

Vec rand_unit(std::mt19937& rng, int n) {
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

Vec fd_gradient(const MdpModel& m, const Vec& theta, double h) {
  Vec g(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    Vec up = theta, dn = theta;
    up[i] += h;
    dn[i] -= h;
    g[i] = (evaluate(m, LogLinearPolicy(m, up)).objective -
            evaluate(m, LogLinearPolicy(m, dn)).objective) /
           (2.0 * h);
  }
  return g;
}

FlowTrajectory run_fixture_flow(const std::string& name) {
  const auto cfg = fixture_config(name);
  const auto model = build_model(cfg);
  return integrate_flow(model, build_theta0(cfg, model.basis.dim()),
                        build_flow_options(cfg));
}

// ---------------------------------------------------------------------------

bool criterion_1(std::string& detail) {
  auto m = build_hat_bandit(Vec{0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0}, 4096, 0.9, 1.0);
  const double kl40 = LogLinearPolicy(m, Vec{-40.0, 40.0, 40.0, -40.0}).kl_to_reference(0);
  const double expect40 = kLog3 - 2.0 / 40.0 + 3.0 / 3200.0;
  const double err40 = std::abs(kl40 - expect40);
  const double kl200 =
      LogLinearPolicy(m, Vec{-200.0, 200.0, 200.0, -200.0}).kl_to_reference(0);
  const double err200 = std::abs(kl200 - kLog3);
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "|KL(40)-asy|=%.3g (tol 2e-4), |KL(200)-log3|=%.6g (tol 5e-3)", err40,
                err200);
  detail = buf;
  return err40 <= 2e-4 && err200 <= 5e-3;
}

bool criterion_2(std::string& detail) {
  auto m = build_hat_bandit(Vec{0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0}, 4096, 0.9, 1.0);
  double worst = 0.0;
  for (double beta : {1.0, 5.0, 10.0}) {
    LogLinearPolicy pol(m, Vec{-beta, beta, beta, -beta});
    const double z_quad = std::exp(pol.log_z(0));
    const double z_exact =
        std::exp(beta) / 3.0 * (1.0 + (1.0 - std::exp(-2.0 * beta)) / beta);
    worst = std::max(worst, std::abs(z_quad - z_exact) / z_exact);
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf), "worst relative error %.3g (tol 1e-4)", worst);
  detail = buf;
  return worst <= 1e-4;
}

bool criterion_3(std::string& detail) {
  std::mt19937 rng(1003);
  double worst = 0.0;
  for (const char* name : {"trig_linear.cfg", "bernstein_linear.cfg", "hat_bandit.cfg"}) {
    const auto m = fixture_model(name);
    for (int rep = 0; rep < 20; ++rep) {
      const Vec theta = rand_vec(rng, m.basis.dim(), -2.0, 2.0);
      const Vec grad = objective_gradient(m, theta);
      const Vec ref = fd_gradient(m, theta, 1e-5);
      worst = std::max(worst, norm2(subtracted(grad, ref)) / (1e-12 + norm2(ref)));
    }
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf), "worst relative error %.3g (tol 1e-5)", worst);
  detail = buf;
  return worst <= 1e-5;
}

bool criterion_4(std::string& detail) {
  std::mt19937 rng(1004);
  double worst = 0.0;
  for (const char* name : {"trig_linear.cfg", "bernstein_linear.cfg"}) {
    const auto m = fixture_model(name);
    for (int rep = 0; rep < 20; ++rep) {
      const Vec theta = rand_vec(rng, m.basis.dim(), -2.0, 2.0);
      const Vec direct = objective_gradient(m, theta);
      const Vec realizable = gradient_realizable_form(m, theta);
      worst = std::max(worst,
                       norm2(subtracted(realizable, direct)) / (1e-12 + norm2(direct)));
    }
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf), "worst relative difference %.3g (tol 1e-6)", worst);
  detail = buf;
  return worst <= 1e-6;
}

bool criterion_5(std::string& detail) {
  // performance difference on 50 random-model instances
  std::mt19937 rng(1005);
  double worst_pd = 0.0;
  auto basis = hat_basis(Vec{0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0});
  for (int model_idx = 0; model_idx < 10; ++model_idx) {
    auto m = build_random_mdp(4, basis, ActionGrid::midpoint_1d(0.0, 1.0, 96), 0.9, 0.5,
                              500 + model_idx);
    std::vector<std::pair<Vec, Vec>> pairs;
    for (int i = 0; i < 5; ++i)
      pairs.emplace_back(rand_vec(rng, 4, -2.0, 2.0), rand_vec(rng, 4, -2.0, 2.0));
    const auto rep = check_performance_difference(m, pairs);
    worst_pd = std::max(worst_pd, -rep.worst_violation);
  }

  // sandwich equality on 50 instances across the two linear fixtures
  double worst_sw = 0.0;
  for (const char* name : {"trig_linear.cfg", "bernstein_linear.cfg"}) {
    const auto m = fixture_model(name);
    const auto opt = soft_optimal(m);
    std::vector<Vec> thetas;
    for (int i = 0; i < 25; ++i) thetas.push_back(rand_vec(rng, 4, -2.0, 2.0));
    for (const Vec& theta : thetas) {
      LogLinearPolicy pol(m, theta);
      const auto ev = evaluate(m, pol);
      const double gap = ev.objective - opt.v_rho;
      double rhs = 0.0;
      for (int s = 0; s < m.n(); ++s) {
        Vec pstar(m.nodes());
        for (int j = 0; j < m.nodes(); ++j)
          pstar[j] = opt.pi_star[static_cast<std::size_t>(s) * m.nodes() + j];
        rhs += kl_tables(pol.probabilities(s), pstar) * ev.d_rho[s];
      }
      rhs *= m.tau / (1.0 - m.gamma);
      worst_sw = std::max(worst_sw, std::abs(gap - rhs));
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "performance-difference worst %.3g, sandwich worst %.3g (tol 1e-7)",
                worst_pd, worst_sw);
  detail = buf;
  return worst_pd <= 1e-7 && worst_sw <= 1e-7;
}

bool criterion_6(std::string& detail) {
  const auto traj = run_fixture_flow("trig_linear.cfg");
  bool monotone = true;
  for (std::size_t i = 1; i < traj.records.size(); ++i)
    monotone = monotone && traj.records[i].gap <= traj.records[i - 1].gap + 1e-12;
  const double gap0 = traj.records.front().gap;
  const double gap_end = traj.records.back().gap;
  const double reduction = gap0 / std::max(gap_end, 1e-300);
  const auto fit = convergence_fit(traj, 0.5);
  bool envelope = true;
  for (const auto& rec : traj.records)
    envelope = envelope &&
               rec.gap <= gap0 * std::exp(-rec.t / traj.sup_C_R) + 1e-12;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "monotone=%d, r2=%.6f, reduction=%.3gx, envelope=%d (sup C_R=%.3g)",
                monotone ? 1 : 0, fit.r_squared, reduction, envelope ? 1 : 0,
                traj.sup_C_R);
  detail = buf;
  return monotone && fit.r_squared >= 0.99 && reduction >= 1e6 && envelope;
}

bool criterion_7(std::string& detail) {
  const auto traj = run_fixture_flow("bernstein_linear.cfg");
  double ones0 = 0.0;
  for (double x : traj.theta0) ones0 += x;
  double worst_drift = 0.0, min_lambda = 1e300;
  for (const auto& rec : traj.records) {
    worst_drift = std::max(worst_drift, std::abs(rec.ones_dot_theta - ones0));
    min_lambda = std::min(min_lambda, rec.lambda_cov);
  }
  const double floor_value =
      std::exp(-traj.r_running_final - 2.0 * norm2(traj.theta0)) *
      traj.records.front().lambda_cov;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "max |1.theta_t - 1.theta_0| = %.3g (tol 1e-8), min lambda_cov %.3g vs "
                "floor %.3g",
                worst_drift, min_lambda, floor_value);
  detail = buf;
  return worst_drift <= 1e-8 && min_lambda >= floor_value - 1e-10;
}

bool criterion_8(std::string& detail) {
  bool ok = true;
  double worst = 1e300;
  for (const char* name : {"trig_linear.cfg", "bernstein_linear.cfg"}) {
    const auto traj = run_fixture_flow(name);
    for (const auto& rec : traj.records) {
      if (rec.pl_degenerate) continue;
      const double slack = rec.C_R * rec.grad_norm * rec.grad_norm - rec.gap;
      if (std::isfinite(slack)) worst = std::min(worst, slack);
      ok = ok && rec.gap <= rec.C_R * rec.grad_norm * rec.grad_norm + 1e-10;
    }
  }
  std::mt19937 rng(1008);
  for (const char* name : {"trig_linear.cfg", "bernstein_linear.cfg", "hat_bandit.cfg"}) {
    const auto m = fixture_model(name);
    const auto opt = soft_optimal(m);
    std::vector<Vec> thetas;
    for (int i = 0; i < 30; ++i) {
      Vec u = rand_unit(rng, m.basis.dim());
      const double r = 3.0 * rand_vec(rng, 1, 0.0, 1.0)[0];
      thetas.push_back(scaled(u, r));
    }
    const auto rep = check_pl(m, opt, thetas);
    ok = ok && rep.passed;
    worst = std::min(worst, rep.worst_violation);
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf), "smallest PL slack %.3g (must be >= -1e-10)", worst);
  detail = buf;
  return ok;
}

bool criterion_9(std::string& detail) {
  std::mt19937 rng(1009);
  double min_eig = 1e300, worst_null = 0.0;
  for (const char* name : {"trig_linear.cfg", "bernstein_linear.cfg", "hat_bandit.cfg"}) {
    const auto m = fixture_model(name);
    for (int rep = 0; rep < 20; ++rep) {
      LogLinearPolicy pol(m, rand_vec(rng, m.basis.dim(), -3.0, 3.0));
      for (int s = 0; s < m.n(); ++s) {
        const Mat g = pol.fim(s);
        min_eig = std::min(min_eig, sym_eig(g).eigenvalues.back());
        if (m.basis.is_simplex())
          worst_null = std::max(worst_null, norm_inf(g.apply(Vec(m.basis.dim(), 1.0))));
      }
    }
  }
  std::vector<InterlacingSample> samples;
  for (int i = 0; i < 100; ++i) {
    const int p = 2 + static_cast<int>(rng() % 7);
    Mat b(p, p);
    for (int r = 0; r < p; ++r)
      for (int c = r; c < p; ++c) {
        const double v = rand_vec(rng, 1, -1.5, 1.5)[0];
        b(r, c) = v;
        b(c, r) = v;
      }
    samples.push_back({std::move(b), rand_vec(rng, p, -1.0, 1.0)});
  }
  const auto rep = check_interlacing(samples);
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "min FIM eigenvalue %.3g (>= -1e-12), |G.1|_inf %.3g (<= 1e-10), "
                "interlacing worst %.3g (>= -1e-10)",
                min_eig, worst_null, rep.worst_violation);
  detail = buf;
  return min_eig >= -1e-12 && worst_null <= 1e-10 && rep.passed;
}

bool criterion_10(std::string& detail) {
  const auto mt = fixture_model("trig_linear.cfg");
  std::mt19937 rng(1010);
  std::vector<Vec> dirs;
  for (int i = 0; i < 20; ++i) dirs.push_back(rand_unit(rng, mt.basis.dim()));
  const auto trig_rep = radial_probe(mt, 0, dirs, {5.0, 12.5, 25.0, 50.0});
  bool increasing = true;
  for (const auto& line : trig_rep.lines)
    for (std::size_t i = 1; i < line.kl.size(); ++i)
      increasing = increasing && line.kl[i] > line.kl[i - 1];

  const auto mh = fixture_model("hat_bandit.cfg");
  const auto hat_rep = radial_probe(mh, 0, {Vec{-1.0, 1.0, 1.0, -1.0}},
                                    {4.0, 40.0, 400.0, 4000.0, 40000.0});
  const bool plateau = hat_rep.lines[0].plateau;
  const double terminal = hat_rep.lines[0].kl.back();
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "trig increasing=%d, hat plateau=%d, terminal KL %.6f < log3+1e-2=%.6f",
                increasing ? 1 : 0, plateau ? 1 : 0, terminal, kLog3 + 1e-2);
  detail = buf;
  return increasing && plateau && terminal < kLog3 + 1e-2;
}

bool criterion_11(std::string& detail) {
  std::mt19937 rng(1011);
  double worst = 1e300;
  const char* names[] = {"trig_linear.cfg", "bernstein_linear.cfg", "hat_bandit.cfg"};
  for (int f = 0; f < 3; ++f) {
    const auto m = fixture_model(names[f]);
    const int p = m.basis.dim();
    const int count = f == 2 ? 166 : 167;  // 500 instances in total
    for (int i = 0; i < count; ++i) {
      const Vec ta = rand_vec(rng, p, -2.5, 2.5);
      const Vec tb = rand_vec(rng, p, -2.5, 2.5);
      LogLinearPolicy pa(m, ta), pb(m, tb);
      const double dn = norm2(subtracted(ta, tb));
      const int s = static_cast<int>(rng() % m.n());
      const int j = static_cast<int>(rng() % m.nodes());
      worst = std::min(worst, 2.0 - norm2(pa.score(s, j)));
      worst = std::min(worst,
                       2.0 * dn - norm2(subtracted(pa.score(s, j), pb.score(s, j))));
      worst = std::min(worst, 2.0 * dn - tv_distance(pa, pb, s));
      const auto ea = evaluate(m, pa);
      const auto eb = evaluate(m, pb);
      double occ_tv = 0.0;
      for (int ss = 0; ss < m.n(); ++ss) occ_tv += std::abs(ea.d_rho[ss] - eb.d_rho[ss]);
      worst = std::min(worst, 2.0 * m.gamma / (1.0 - m.gamma) * dn - occ_tv);
      const double sup = pa.sup_log_density();
      worst = std::min(worst, (1.0 + m.tau * sup) / (1.0 - m.gamma) -
                                  std::abs(ea.V[s]));
      worst = std::min(worst, (1.0 + m.gamma * m.tau * sup) / (1.0 - m.gamma) -
                                  std::abs(ea.q(s, j, m.nodes())));
    }
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf), "smallest slack %.3g (must be >= -1e-10)", worst);
  detail = buf;
  return worst >= -1e-10;
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<bool(std::string&)> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all = {
      {1, "hat-function KL closed form", 1.0, criterion_1},
      {2, "Z_beta quadrature vs closed form", 1.0, criterion_2},
      {3, "gradient vs finite differences", 30.0, criterion_3},
      {4, "realizable-form equivalence", 10.0, criterion_4},
      {5, "performance-difference and sandwich identities", 30.0, criterion_5},
      {6, "linear convergence of the trig flow", 300.0, criterion_6},
      {7, "simplex conservation and covariance floor", 300.0, criterion_7},
      {8, "PL inequality suite", 120.0, criterion_8},
      {9, "spectral structure", 10.0, criterion_9},
      {10, "radial KL probes", 30.0, criterion_10},
      {11, "bound suite", 60.0, criterion_11},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  int failures = 0;
  for (const auto& crit : criteria()) {
    if (!selected.empty() &&
        std::find(selected.begin(), selected.end(), crit.id) == selected.end())
      continue;
    std::string detail;
    bool ok = false;
    const auto start = std::chrono::steady_clock::now();
    try {
      ok = crit.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
      ok = false;
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_budget = seconds < crit.budget_seconds;
    const bool passed = ok && in_budget;
    failures += passed ? 0 : 1;
    std::printf("[%s] criterion %2d (%s): %s [%.2fs / %.0fs]\n",
                passed ? "PASS" : "FAIL", crit.id, crit.name, detail.c_str(), seconds,
                crit.budget_seconds);
  }
  return failures;
}
