// entroflow: config-driven experiment front end.
//
//   entroflow run-flow <cfg>       integrate the policy-gradient flow
//   entroflow verify <cfg>         run the verification suite
//   entroflow probe-kl <cfg>       radial KL probes
//   entroflow print-config <cfg>   echo the parsed config canonically
//
// Exit codes: 0 success, 1 check failure, 2 config error, 3 numerical
// divergence, 4 I/O error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "entroflow/config.hpp"
#include "entroflow/diagnostics.hpp"
#include "entroflow/gradflow.hpp"
#include "entroflow/io.hpp"

namespace {

using namespace entroflow;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

ExperimentConfig load_config(const std::string& path) {
  ExperimentConfig cfg = parse_config(read_file(path));
  if (const char* env = std::getenv("ENTROFLOW_OUT"); env != nullptr && *env != '\0')
    cfg.output.directory = env;
  return cfg;
}

bool wants_format(const ExperimentConfig& cfg, const std::string& fmt) {
  for (const auto& f : cfg.output.formats)
    if (f == fmt) return true;
  return false;
}

int cmd_run_flow(const std::string& cfg_path) {
  const ExperimentConfig cfg = load_config(cfg_path);
  const MdpModel model = build_model(cfg);
  const Vec theta0 = build_theta0(cfg, model.basis.dim());
  const FlowOptions opts = build_flow_options(cfg);

  const FlowTrajectory traj = integrate_flow(model, theta0, opts);
  if (traj.termination == FlowTermination::step_failure)
    throw StepFailure("run-flow: adaptive step collapsed below 1e-12");

  nlohmann::json summary;
  summary["termination"] = to_string(traj.termination);
  summary["records"] = traj.records.size();
  summary["final_gap"] = traj.records.back().gap;
  summary["sup_C_R"] = traj.sup_C_R;
  summary["v_star_rho"] = traj.v_star_rho;
  summary["theta0"] = theta0;
  {
    // only the component orthogonal to 1 is identified for simplex bases
    const Vec& th = traj.records.back().theta;
    double mean = 0.0;
    for (double x : th) mean += x / th.size();
    Vec perp = th;
    for (double& x : perp) x -= mean;
    summary["final_theta_norm"] = norm2(th);
    summary["final_theta_perp_norm"] = norm2(perp);
  }
  try {
    const auto fit = convergence_fit(traj, 0.5);
    summary["rate"] = fit.rate;
    summary["r_squared"] = fit.r_squared;
  } catch (const InsufficientData&) {
    summary["rate"] = nullptr;
    summary["r_squared"] = nullptr;
    summary["fit"] = "insufficient_data";
  }

  const std::filesystem::path dir = cfg.output.directory;
  if (wants_format(cfg, "csv")) atomic_write_file(dir / "trajectory.csv", trajectory_csv(traj));
  if (wants_format(cfg, "json")) {
    atomic_write_file(dir / "summary.json", summary.dump(2) + "\n");
    atomic_write_file(dir / "model.json", model_to_json(model).dump() + "\n");
  }
  if (wants_format(cfg, "svg")) atomic_write_file(dir / "convergence.svg", convergence_svg(traj));

  std::cout << "flow: " << traj.records.size() << " records, termination "
            << to_string(traj.termination) << ", final gap "
            << format_float17(traj.records.back().gap) << "\n";
  return 0;
}

int cmd_verify(const std::string& cfg_path, std::vector<std::string> suite) {
  const ExperimentConfig cfg = load_config(cfg_path);

  std::vector<std::string> selected =
      suite.empty() ? cfg.diagnostics.checks : std::move(suite);
  if (selected.size() == 1 && selected[0] == "all") selected.clear();
  bool run_radial = selected.empty();
  std::vector<std::string> standard;
  for (const auto& name : selected) {
    if (name == "radial_probe") {
      run_radial = true;
      continue;
    }
    bool known = false;
    for (const auto& k : known_checks()) known = known || k == name;
    if (!known) throw ConfigError("unknown check name '" + name + "'", 0, "suite");
    standard.push_back(name);
  }

  const MdpModel model = build_model(cfg);
  const std::filesystem::path dir = cfg.output.directory;

  SuiteOptions opts;
  opts.checks = standard;
  opts.instances = cfg.diagnostics.instances;
  opts.seed = cfg.diagnostics.seed;
  opts.tolerance_override = cfg.diagnostics.tolerance_override;
  std::vector<CheckReport> reports;
  if (selected.empty() || !standard.empty()) reports = run_suite(model, opts);

  nlohmann::json aggregate;
  aggregate["checks"] = nlohmann::json::array();
  bool all_passed = true;
  for (const auto& rep : reports) {
    atomic_write_file(dir / ("check_" + rep.check_name + ".json"),
                      report_to_json(rep).dump(2) + "\n");
    aggregate["checks"].push_back({{"name", rep.check_name},
                                   {"passed", rep.passed},
                                   {"worst_violation", rep.worst_violation},
                                   {"instances", rep.instances}});
    all_passed = all_passed && rep.passed;
    std::cout << (rep.passed ? "pass " : "FAIL ") << rep.check_name
              << "  worst_violation=" << format_float17(rep.worst_violation) << "\n";
  }

  if (run_radial) {
    std::mt19937 rng(cfg.diagnostics.seed);
    std::vector<Vec> dirs;
    if (model.basis.kind() == BasisKind::hat) {
      // boundary-down direction: the hat-basis plateau witness
      Vec u(model.basis.dim(), 1.0);
      u.front() = -1.0;
      u.back() = -1.0;
      dirs.push_back(std::move(u));
    }
    for (int i = 0; i < 8; ++i) {
      std::normal_distribution<double> g(0.0, 1.0);
      Vec u(model.basis.dim());
      double nn = 0.0;
      do {
        for (double& x : u) x = g(rng);
        nn = norm2(u);
      } while (nn < 1e-8);
      for (double& x : u) x /= nn;
      dirs.push_back(std::move(u));
    }
    const std::vector<double> radii{0.5, 1.0, 4.0, 40.0, 400.0, 4000.0, 40000.0};
    const auto probe = radial_probe(model, 0, dirs, radii);
    atomic_write_file(dir / "check_radial_probe.json",
                      radial_probe_to_json(probe).dump(2) + "\n");
    int plateaus = 0;
    for (const auto& line : probe.lines) plateaus += line.plateau ? 1 : 0;
    aggregate["checks"].push_back({{"name", "radial_probe"},
                                   {"passed", true},
                                   {"plateau_directions", plateaus},
                                   {"instances", static_cast<int>(probe.lines.size())}});
    std::cout << "pass radial_probe  plateau_directions=" << plateaus << "\n";
  }

  aggregate["all_passed"] = all_passed;
  atomic_write_file(dir / "verify_summary.json", aggregate.dump(2) + "\n");
  return all_passed ? 0 : 1;
}

int cmd_probe_kl(const std::string& cfg_path, int directions, double r_max, int r_steps,
                 const std::string& direction_file) {
  const ExperimentConfig cfg = load_config(cfg_path);
  const MdpModel model = build_model(cfg);
  const int p = model.basis.dim();

  std::vector<Vec> dirs;
  if (!direction_file.empty()) {
    std::ifstream in(direction_file);
    if (!in) throw IoError("cannot read direction file '" + direction_file + "'");
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      Vec u;
      double x;
      while (ls >> x) u.push_back(x);
      if (u.empty()) continue;
      if (static_cast<int>(u.size()) != p)
        throw ConfigError("direction dimension mismatch in '" + direction_file + "'");
      dirs.push_back(std::move(u));
    }
  } else {
    std::mt19937 rng(cfg.diagnostics.seed);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int i = 0; i < directions; ++i) {
      Vec u(p);
      double nn = 0.0;
      do {
        for (double& x : u) x = g(rng);
        nn = norm2(u);
      } while (nn < 1e-8);
      for (double& x : u) x /= nn;
      dirs.push_back(std::move(u));
    }
  }
  if (dirs.empty()) throw ConfigError("no probe directions given");
  if (r_steps < 1) throw ConfigError("r_steps must be >= 1");

  std::vector<double> radii;
  for (int i = 1; i <= r_steps; ++i) radii.push_back(r_max * i / r_steps);
  const auto probe = radial_probe(model, 0, dirs, radii);

  std::string csv = "direction_index,r,kl\r\n";
  std::vector<SvgSeries> series;
  for (std::size_t d = 0; d < probe.lines.size(); ++d) {
    SvgSeries s;
    s.label = "direction " + std::to_string(d);
    for (std::size_t i = 0; i < probe.lines[d].radii.size(); ++i) {
      csv += std::to_string(d) + "," + format_float17(probe.lines[d].radii[i]) + "," +
             format_float17(probe.lines[d].kl[i]) + "\r\n";
      s.points.emplace_back(probe.lines[d].radii[i], probe.lines[d].kl[i]);
    }
    series.push_back(std::move(s));
  }

  const std::filesystem::path dir = cfg.output.directory;
  if (wants_format(cfg, "csv")) atomic_write_file(dir / "kl_probe.csv", csv);
  if (wants_format(cfg, "svg"))
    atomic_write_file(dir / "kl_probe.svg",
                      svg_line_chart(series, "r", "KL(pi_ru | mu)", /*log_y=*/false));
  if (wants_format(cfg, "json"))
    atomic_write_file(dir / "kl_probe.json", radial_probe_to_json(probe).dump(2) + "\n");

  std::cout << "probe: " << probe.lines.size() << " directions, " << radii.size()
            << " radii, terminal kl "
            << format_float17(probe.lines.back().kl.back()) << "\n";
  return 0;
}

int cmd_print_config(const std::string& cfg_path) {
  std::cout << print_config(load_config(cfg_path));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"entropy-regularized policy gradient flow laboratory"};
  app.require_subcommand(1);

  std::string cfg_path;
  std::vector<std::string> suite;
  int directions = 8;
  double r_max = 50.0;
  int r_steps = 20;
  std::string direction_file;

  auto* run = app.add_subcommand("run-flow", "integrate the policy-gradient flow");
  run->add_option("config", cfg_path, "experiment config file")->required();

  auto* verify = app.add_subcommand("verify", "run the verification suite");
  verify->add_option("config", cfg_path, "experiment config file")->required();
  verify->add_option("--suite", suite, "check names (default: config selection)");

  auto* probe = app.add_subcommand("probe-kl", "radial KL probes");
  probe->add_option("config", cfg_path, "experiment config file")->required();
  probe->add_option("--directions", directions, "number of random directions");
  probe->add_option("--r-max", r_max, "largest radius");
  probe->add_option("--r-steps", r_steps, "number of radii");
  probe->add_option("--direction-file", direction_file, "explicit directions, one per line");

  auto* print = app.add_subcommand("print-config", "echo the parsed config");
  print->add_option("config", cfg_path, "experiment config file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run_flow(cfg_path);
    if (verify->parsed()) return cmd_verify(cfg_path, suite);
    if (probe->parsed()) return cmd_probe_kl(cfg_path, directions, r_max, r_steps, direction_file);
    if (print->parsed()) return cmd_print_config(cfg_path);
  } catch (const entroflow::ConfigError& e) {
    std::cerr << "config error";
    if (e.line > 0) std::cerr << " at line " << e.line;
    if (!e.field.empty()) std::cerr << " (field " << e.field << ")";
    std::cerr << ": " << e.what() << "\n";
    return 2;
  } catch (const entroflow::DivergedFlow& e) {
    std::cerr << "numerical divergence: " << e.what() << "\n";
    return 3;
  } catch (const entroflow::StepFailure& e) {
    std::cerr << "numerical divergence: " << e.what() << "\n";
    return 3;
  } catch (const entroflow::NotConverged& e) {
    std::cerr << "numerical divergence: " << e.what()
              << " (residual " << e.residual << ")\n";
    return 3;
  } catch (const entroflow::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 4;
  } catch (const entroflow::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
