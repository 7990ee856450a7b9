#pragma once

// Experiment configuration: a sectioned key=value text format, strict about
// unknown keys so a config file alone reproduces a run exactly. Sections:
// [model], [basis], [flow], [diagnostics], [output].

#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "entroflow/diagnostics.hpp"
#include "entroflow/errors.hpp"
#include "entroflow/mdp.hpp"

namespace entroflow {

struct ModelConfig {
  std::string kind = "linear";  // linear | random | hat-bandit
  int states = 5;
  double gamma = 0.9;
  double tau = 0.2;
  unsigned seed = 42;
  std::string rho_kind = "uniform";  // uniform | explicit
  Vec rho_values;
  double cost_scale = 0.5;
  int action_nodes = 512;
  double action_min = 0.0;
  double action_max = 1.0;
  std::string embedding_kind = "linspace";  // linspace | explicit
  double embedding_lo = 0.0;
  double embedding_hi = 1.0;
  Vec embedding_values;
};

struct BasisConfig {
  std::string kind = "hat";  // trig | bernstein | hat | tabular
  Vec frequencies;           // trig, one integer-valued entry per mode (d2 = 1)
  Vec state_frequencies;     // trig, one entry per mode (d1 = 1)
  int degree = 3;            // bernstein
  double direction = 1.0;    // bernstein (d2 = 1)
  std::string offset_kind = "embedding";  // bernstein: embedding | explicit
  Vec offset_values;
  Vec grid;  // hat
};

struct FlowConfig {
  std::string theta0_kind = "zeros";  // zeros | random | explicit
  unsigned theta0_seed = 0;
  double theta0_norm = 1.0;
  Vec theta0_values;
  std::string integrator = "rkf45";  // rk4 | rkf45
  double h = 0.01;
  double tolerance = 1e-9;
  double t_end = 100.0;
  double log_every = 1.0;
  double gap_tol = 0.0;
};

struct DiagnosticsConfig {
  std::vector<std::string> checks;  // empty = all
  int instances = 30;
  unsigned seed = 42;
  double tolerance_override = -1.0;
};

struct OutputConfig {
  std::string directory = "out";
  std::vector<std::string> formats = {"csv", "json", "svg"};
};

struct ExperimentConfig {
  ModelConfig model;
  BasisConfig basis;
  FlowConfig flow;
  DiagnosticsConfig diagnostics;
  OutputConfig output;
};

// ---------------------------------------------------------------------------
// parsing
// ---------------------------------------------------------------------------

namespace cfg_detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

inline double to_double(const std::string& s, int line, const std::string& field) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("expected a number, got '" + s + "'", line, field);
  }
}

inline long to_long(const std::string& s, int line, const std::string& field) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("expected an integer, got '" + s + "'", line, field);
  }
}

inline Vec to_vec(const std::vector<std::string>& toks, std::size_t from, int line,
                  const std::string& field) {
  Vec v;
  for (std::size_t i = from; i < toks.size(); ++i)
    v.push_back(to_double(toks[i], line, field));
  return v;
}

}  // namespace cfg_detail

inline ExperimentConfig parse_config_text(const std::string& text) {
  using namespace cfg_detail;
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("malformed section header", line_no);
      section = line.substr(1, line.size() - 2);
      if (section != "model" && section != "basis" && section != "flow" &&
          section != "diagnostics" && section != "output")
        throw ConfigError("unknown section '" + section + "'", line_no, section);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("expected key = value", line_no, section);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string field = section + "." + key;
    const auto toks = split_ws(value);
    auto need = [&](std::size_t n) {
      if (toks.size() != n)
        throw ConfigError("wrong number of values for " + field, line_no, field);
    };

    if (section == "model") {
      if (key == "kind") {
        need(1);
        cfg.model.kind = toks[0];
      } else if (key == "states") {
        need(1);
        cfg.model.states = static_cast<int>(to_long(toks[0], line_no, field));
      } else if (key == "gamma") {
        need(1);
        cfg.model.gamma = to_double(toks[0], line_no, field);
      } else if (key == "tau") {
        need(1);
        cfg.model.tau = to_double(toks[0], line_no, field);
      } else if (key == "seed") {
        need(1);
        cfg.model.seed = static_cast<unsigned>(to_long(toks[0], line_no, field));
      } else if (key == "rho") {
        if (toks.empty()) throw ConfigError("empty rho spec", line_no, field);
        cfg.model.rho_kind = toks[0];
        if (toks[0] == "uniform") {
          need(1);
        } else if (toks[0] == "explicit") {
          cfg.model.rho_values = to_vec(toks, 1, line_no, field);
        } else {
          throw ConfigError("rho must be 'uniform' or 'explicit ...'", line_no, field);
        }
      } else if (key == "cost_scale") {
        need(1);
        cfg.model.cost_scale = to_double(toks[0], line_no, field);
      } else if (key == "action_nodes") {
        need(1);
        cfg.model.action_nodes = static_cast<int>(to_long(toks[0], line_no, field));
      } else if (key == "action_min") {
        need(1);
        cfg.model.action_min = to_double(toks[0], line_no, field);
      } else if (key == "action_max") {
        need(1);
        cfg.model.action_max = to_double(toks[0], line_no, field);
      } else if (key == "embedding") {
        if (toks.empty()) throw ConfigError("empty embedding spec", line_no, field);
        cfg.model.embedding_kind = toks[0];
        if (toks[0] == "linspace") {
          need(3);
          cfg.model.embedding_lo = to_double(toks[1], line_no, field);
          cfg.model.embedding_hi = to_double(toks[2], line_no, field);
        } else if (toks[0] == "explicit") {
          cfg.model.embedding_values = to_vec(toks, 1, line_no, field);
        } else {
          throw ConfigError("embedding must be 'linspace lo hi' or 'explicit ...'",
                            line_no, field);
        }
      } else {
        throw ConfigError("unknown key '" + key + "' in [model]", line_no, field);
      }
    } else if (section == "basis") {
      if (key == "kind") {
        need(1);
        cfg.basis.kind = toks[0];
      } else if (key == "frequencies") {
        cfg.basis.frequencies = to_vec(toks, 0, line_no, field);
      } else if (key == "state_frequencies") {
        cfg.basis.state_frequencies = to_vec(toks, 0, line_no, field);
      } else if (key == "degree") {
        need(1);
        cfg.basis.degree = static_cast<int>(to_long(toks[0], line_no, field));
      } else if (key == "direction") {
        need(1);
        cfg.basis.direction = to_double(toks[0], line_no, field);
      } else if (key == "offset") {
        if (toks.empty()) throw ConfigError("empty offset spec", line_no, field);
        cfg.basis.offset_kind = toks[0];
        if (toks[0] == "embedding") {
          need(1);
        } else if (toks[0] == "explicit") {
          cfg.basis.offset_values = to_vec(toks, 1, line_no, field);
        } else {
          throw ConfigError("offset must be 'embedding' or 'explicit ...'", line_no,
                            field);
        }
      } else if (key == "grid") {
        cfg.basis.grid = to_vec(toks, 0, line_no, field);
      } else {
        throw ConfigError("unknown key '" + key + "' in [basis]", line_no, field);
      }
    } else if (section == "flow") {
      if (key == "theta0") {
        if (toks.empty()) throw ConfigError("empty theta0 spec", line_no, field);
        cfg.flow.theta0_kind = toks[0];
        if (toks[0] == "zeros") {
          need(1);
        } else if (toks[0] == "random") {
          need(3);
          cfg.flow.theta0_seed = static_cast<unsigned>(to_long(toks[1], line_no, field));
          cfg.flow.theta0_norm = to_double(toks[2], line_no, field);
        } else if (toks[0] == "explicit") {
          cfg.flow.theta0_values = to_vec(toks, 1, line_no, field);
        } else {
          throw ConfigError("theta0 must be zeros | random seed norm | explicit ...",
                            line_no, field);
        }
      } else if (key == "integrator") {
        need(1);
        cfg.flow.integrator = toks[0];
      } else if (key == "h") {
        need(1);
        cfg.flow.h = to_double(toks[0], line_no, field);
      } else if (key == "tolerance") {
        need(1);
        cfg.flow.tolerance = to_double(toks[0], line_no, field);
      } else if (key == "t_end") {
        need(1);
        cfg.flow.t_end = to_double(toks[0], line_no, field);
      } else if (key == "log_every") {
        need(1);
        cfg.flow.log_every = to_double(toks[0], line_no, field);
      } else if (key == "gap_tol") {
        need(1);
        cfg.flow.gap_tol = to_double(toks[0], line_no, field);
      } else {
        throw ConfigError("unknown key '" + key + "' in [flow]", line_no, field);
      }
    } else if (section == "diagnostics") {
      if (key == "checks") {
        if (toks.size() == 1 && toks[0] == "all") {
          cfg.diagnostics.checks.clear();
        } else {
          cfg.diagnostics.checks = toks;
        }
      } else if (key == "instances") {
        need(1);
        cfg.diagnostics.instances = static_cast<int>(to_long(toks[0], line_no, field));
      } else if (key == "seed") {
        need(1);
        cfg.diagnostics.seed = static_cast<unsigned>(to_long(toks[0], line_no, field));
      } else if (key == "tolerance_override") {
        need(1);
        cfg.diagnostics.tolerance_override = to_double(toks[0], line_no, field);
      } else {
        throw ConfigError("unknown key '" + key + "' in [diagnostics]", line_no, field);
      }
    } else if (section == "output") {
      if (key == "directory") {
        need(1);
        cfg.output.directory = toks[0];
      } else if (key == "formats") {
        cfg.output.formats = toks;
      } else {
        throw ConfigError("unknown key '" + key + "' in [output]", line_no, field);
      }
    } else {
      throw ConfigError("key outside any section", line_no, key);
    }
  }
  return cfg;
}

inline void validate_config(const ExperimentConfig& cfg) {
  auto fail = [](const std::string& msg, const std::string& field) {
    throw ConfigError(msg, 0, field);
  };
  if (cfg.model.kind != "linear" && cfg.model.kind != "random" &&
      cfg.model.kind != "hat-bandit")
    fail("model kind must be linear | random | hat-bandit", "model.kind");
  if (!(cfg.model.gamma >= 0.0 && cfg.model.gamma < 1.0))
    fail("gamma must lie in [0, 1)", "model.gamma");
  if (!(cfg.model.tau > 0.0)) fail("tau must be positive", "model.tau");
  if (cfg.model.states < 1) fail("states must be >= 1", "model.states");
  if (cfg.model.action_nodes < 1) fail("action_nodes must be >= 1", "model.action_nodes");
  if (cfg.basis.kind != "trig" && cfg.basis.kind != "bernstein" &&
      cfg.basis.kind != "hat" && cfg.basis.kind != "tabular")
    fail("basis kind must be trig | bernstein | hat | tabular", "basis.kind");
  if (cfg.model.kind == "hat-bandit" && cfg.basis.kind != "hat")
    fail("hat-bandit models require the hat basis", "basis.kind");
  if (!(cfg.flow.t_end > 0.0)) fail("t_end must be positive", "flow.t_end");
  if (cfg.flow.integrator != "rk4" && cfg.flow.integrator != "rkf45")
    fail("integrator must be rk4 | rkf45", "flow.integrator");
  if (!(cfg.flow.log_every > 0.0)) fail("log_every must be positive", "flow.log_every");
  for (const auto& name : cfg.diagnostics.checks) {
    bool ok = name == "radial_probe";
    for (const auto& known : known_checks()) ok = ok || known == name;
    if (!ok) fail("unknown check name '" + name + "'", "diagnostics.checks");
  }
  for (const auto& fmt : cfg.output.formats)
    if (fmt != "csv" && fmt != "json" && fmt != "svg")
      fail("unknown output format '" + fmt + "'", "output.formats");
}

inline ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg = parse_config_text(text);
  validate_config(cfg);
  return cfg;
}

// canonical re-emission; parse(print(cfg)) reproduces cfg exactly
inline std::string print_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  auto num = [](double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return std::string(buf);
  };
  auto vec = [&](const Vec& v) {
    std::string s;
    for (double x : v) {
      if (!s.empty()) s += " ";
      s += num(x);
    }
    return s;
  };
  out << "[model]\n";
  out << "kind = " << cfg.model.kind << "\n";
  out << "states = " << cfg.model.states << "\n";
  out << "gamma = " << num(cfg.model.gamma) << "\n";
  out << "tau = " << num(cfg.model.tau) << "\n";
  out << "seed = " << cfg.model.seed << "\n";
  if (cfg.model.rho_kind == "uniform")
    out << "rho = uniform\n";
  else
    out << "rho = explicit " << vec(cfg.model.rho_values) << "\n";
  out << "cost_scale = " << num(cfg.model.cost_scale) << "\n";
  out << "action_nodes = " << cfg.model.action_nodes << "\n";
  out << "action_min = " << num(cfg.model.action_min) << "\n";
  out << "action_max = " << num(cfg.model.action_max) << "\n";
  if (cfg.model.embedding_kind == "linspace")
    out << "embedding = linspace " << num(cfg.model.embedding_lo) << " "
        << num(cfg.model.embedding_hi) << "\n";
  else
    out << "embedding = explicit " << vec(cfg.model.embedding_values) << "\n";
  out << "\n[basis]\n";
  out << "kind = " << cfg.basis.kind << "\n";
  if (cfg.basis.kind == "trig") {
    out << "frequencies = " << vec(cfg.basis.frequencies) << "\n";
    out << "state_frequencies = " << vec(cfg.basis.state_frequencies) << "\n";
  } else if (cfg.basis.kind == "bernstein") {
    out << "degree = " << cfg.basis.degree << "\n";
    out << "direction = " << num(cfg.basis.direction) << "\n";
    if (cfg.basis.offset_kind == "embedding")
      out << "offset = embedding\n";
    else
      out << "offset = explicit " << vec(cfg.basis.offset_values) << "\n";
  } else if (cfg.basis.kind == "hat") {
    out << "grid = " << vec(cfg.basis.grid) << "\n";
  }
  out << "\n[flow]\n";
  if (cfg.flow.theta0_kind == "zeros")
    out << "theta0 = zeros\n";
  else if (cfg.flow.theta0_kind == "random")
    out << "theta0 = random " << cfg.flow.theta0_seed << " " << num(cfg.flow.theta0_norm)
        << "\n";
  else
    out << "theta0 = explicit " << vec(cfg.flow.theta0_values) << "\n";
  out << "integrator = " << cfg.flow.integrator << "\n";
  out << "h = " << num(cfg.flow.h) << "\n";
  out << "tolerance = " << num(cfg.flow.tolerance) << "\n";
  out << "t_end = " << num(cfg.flow.t_end) << "\n";
  out << "log_every = " << num(cfg.flow.log_every) << "\n";
  out << "gap_tol = " << num(cfg.flow.gap_tol) << "\n";
  out << "\n[diagnostics]\n";
  if (cfg.diagnostics.checks.empty()) {
    out << "checks = all\n";
  } else {
    out << "checks =";
    for (const auto& name : cfg.diagnostics.checks) out << " " << name;
    out << "\n";
  }
  out << "instances = " << cfg.diagnostics.instances << "\n";
  out << "seed = " << cfg.diagnostics.seed << "\n";
  out << "tolerance_override = " << num(cfg.diagnostics.tolerance_override) << "\n";
  out << "\n[output]\n";
  out << "directory = " << cfg.output.directory << "\n";
  out << "formats =";
  for (const auto& fmt : cfg.output.formats) out << " " << fmt;
  out << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// model construction from a validated config
// ---------------------------------------------------------------------------

namespace cfg_detail {

inline StateSpace build_states(const ModelConfig& mc) {
  if (mc.embedding_kind == "explicit") {
    if (static_cast<int>(mc.embedding_values.size()) != mc.states)
      throw ConfigError("embedding list length must equal states", 0, "model.embedding");
    StateSpace s;
    for (double x : mc.embedding_values) s.embeddings.push_back(Vec{x});
    return s;
  }
  return StateSpace::linspace(mc.states, mc.embedding_lo, mc.embedding_hi);
}

inline Vec build_rho(const ModelConfig& mc) {
  if (mc.rho_kind == "explicit") {
    if (static_cast<int>(mc.rho_values.size()) != mc.states)
      throw ConfigError("rho list length must equal states", 0, "model.rho");
    return mc.rho_values;
  }
  return Vec(mc.states, 1.0 / mc.states);
}

}  // namespace cfg_detail

inline FeatureBasis build_basis(const ExperimentConfig& cfg, const StateSpace& states,
                                const ActionGrid& actions) {
  const auto& bc = cfg.basis;
  if (bc.kind == "trig") {
    if (bc.frequencies.empty())
      throw ConfigError("trig basis needs frequencies", 0, "basis.frequencies");
    if (bc.state_frequencies.size() != bc.frequencies.size())
      throw ConfigError("one state frequency per action frequency required", 0,
                        "basis.state_frequencies");
    std::vector<Vec> freqs, state_freqs;
    for (std::size_t i = 0; i < bc.frequencies.size(); ++i) {
      freqs.push_back(Vec{bc.frequencies[i]});
      state_freqs.push_back(Vec{bc.state_frequencies[i]});
    }
    return trig_basis(freqs, state_freqs);
  }
  if (bc.kind == "bernstein") {
    Vec q;
    if (bc.offset_kind == "embedding") {
      for (const auto& e : states.embeddings) q.push_back(e[0]);
    } else {
      if (static_cast<int>(bc.offset_values.size()) != states.size())
        throw ConfigError("offset list length must equal states", 0, "basis.offset");
      q = bc.offset_values;
    }
    return bernstein_basis(bc.degree, Vec{bc.direction}, q, states, actions);
  }
  if (bc.kind == "hat") {
    if (bc.grid.size() < 2) throw ConfigError("hat basis needs a grid", 0, "basis.grid");
    return hat_basis(bc.grid);
  }
  return tabular_basis(states.size(), actions.size());
}

inline MdpModel build_model(const ExperimentConfig& cfg) {
  const auto& mc = cfg.model;
  if (mc.kind == "hat-bandit") {
    if (mc.states != 1)
      throw ConfigError("hat-bandit models have exactly one state", 0, "model.states");
    return build_hat_bandit(cfg.basis.grid, mc.action_nodes, mc.gamma, mc.tau);
  }

  auto actions = ActionGrid::midpoint_1d(mc.action_min, mc.action_max, mc.action_nodes);
  if (mc.kind == "random") {
    auto states_tmp = cfg_detail::build_states(mc);
    auto basis = build_basis(cfg, states_tmp, actions);
    auto m = build_random_mdp(mc.states, basis, actions, mc.gamma, mc.tau, mc.seed);
    if (mc.rho_kind == "explicit") {
      m.rho = cfg_detail::build_rho(mc);
      detail::check_distribution(m.rho, "rho");
    }
    return m;
  }

  // kind == linear: simplex bases get the component construction, affine
  // bases the constant-kernel construction with a feature-span cost
  auto states = cfg_detail::build_states(mc);
  auto basis = build_basis(cfg, states, actions);
  auto rho = cfg_detail::build_rho(mc);
  std::mt19937 rng(mc.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int p = basis.dim();
  Vec w(p);
  for (double& x : w) x = mc.cost_scale * (2.0 * unif(rng) - 1.0);
  if (basis.is_simplex()) {
    LinearMdpSpec spec;
    spec.w = std::move(w);
    for (int i = 0; i < p; ++i) {
      Vec psi(mc.states);
      double sum = 0.0;
      for (double& x : psi) {
        x = 0.05 + unif(rng);
        sum += x;
      }
      for (double& x : psi) x /= sum;
      spec.psi.push_back(std::move(psi));
    }
    return build_linear_mdp(spec, basis, states, actions, mc.gamma, mc.tau, rho);
  }
  Vec nu(mc.states);
  double sum = 0.0;
  for (double& x : nu) {
    x = 0.1 + unif(rng);
    sum += x;
  }
  for (double& x : nu) x /= sum;
  return build_const_transition_mdp(std::move(w), std::move(nu), basis, states, actions,
                                    mc.gamma, mc.tau, rho);
}

inline Vec build_theta0(const ExperimentConfig& cfg, int p) {
  const auto& fc = cfg.flow;
  if (fc.theta0_kind == "zeros") return Vec(p, 0.0);
  if (fc.theta0_kind == "random") {
    std::mt19937 rng(fc.theta0_seed);
    std::normal_distribution<double> g(0.0, 1.0);
    Vec v(p);
    double nn = 0.0;
    do {
      for (double& x : v) x = g(rng);
      nn = norm2(v);
    } while (nn < 1e-8);
    for (double& x : v) x *= fc.theta0_norm / nn;
    return v;
  }
  if (static_cast<int>(fc.theta0_values.size()) != p)
    throw ConfigError("theta0 list length must equal the basis dimension", 0,
                      "flow.theta0");
  return fc.theta0_values;
}

inline FlowOptions build_flow_options(const ExperimentConfig& cfg) {
  FlowOptions o;
  o.scheme = cfg.flow.integrator == "rk4" ? RkScheme::rk4 : RkScheme::rkf45;
  o.h = cfg.flow.h;
  o.tolerance = cfg.flow.tolerance;
  o.t_end = cfg.flow.t_end;
  o.log_every = cfg.flow.log_every;
  o.gap_tol = cfg.flow.gap_tol;
  return o;
}

}  // namespace entroflow
