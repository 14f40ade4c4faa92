#ifndef AXON_HARNESS_HPP
#define AXON_HARNESS_HPP

/**
 * @file harness.hpp
 * @brief Experiment configuration, deterministic artifact writing, and the
 *        orchestration layer shared by the command-line driver and the tests.
 *
 * A configuration file is JSON with five optional sections (physical, gains,
 * trigger, solver, experiment); every omitted field keeps its shipped
 * default, so an empty file denotes the reference scenario. Loading is
 * strict: unknown fields and type mismatches are rejected with the dotted
 * field path, and every section invariant is checked before any run starts.
 *
 * All output files are assembled in memory and written in one pass, so two
 * runs of the same resolved configuration produce byte-identical artifacts.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "axon/analysis.hpp"
#include "axon/backstepping.hpp"
#include "axon/model.hpp"
#include "axon/sim.hpp"
#include "axon/trigger.hpp"

namespace axon {

/// Raised for unreadable, malformed, or invariant-violating configuration.
/// The command-line driver maps it to its own exit code.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// =========================================================================
// Experiment configuration
// =========================================================================

/**
 * Complete description of one experiment: the four module parameter sets
 * plus the experiment section (default mode, output directory, and the
 * m-dynamics source selector).
 */
struct ExperimentConfig {
  PhysicalParams physical;
  ControllerGains gains;
  TriggerParams trigger;
  SolverConfig solver;
  std::string mode = "petc";       ///< default controller mode
  std::string output_dir = "out";  ///< default artifact directory
  std::string m_dynamics = "u";    ///< "u" (error profile) or "w" (target profile)
  bool deterministic = true;       ///< seed-free determinism; always on
};

namespace detail {

inline double as_number(const nlohmann::json& v, const std::string& path) {
  if (!v.is_number())
    throw ConfigError("field " + path + " must be a number");
  return v.get<double>();
}

inline int as_integer(const nlohmann::json& v, const std::string& path) {
  if (!v.is_number_integer())
    throw ConfigError("field " + path + " must be an integer");
  return v.get<int>();
}

inline std::string as_string(const nlohmann::json& v, const std::string& path) {
  if (!v.is_string())
    throw ConfigError("field " + path + " must be a string");
  return v.get<std::string>();
}

inline bool as_bool(const nlohmann::json& v, const std::string& path) {
  if (!v.is_boolean())
    throw ConfigError("field " + path + " must be a boolean");
  return v.get<bool>();
}

inline void parse_physical(const nlohmann::json& j, PhysicalParams& p) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const std::string path = "physical." + k;
    if (k == "D_m2_per_s") p.D_m2_per_s = as_number(it.value(), path);
    else if (k == "a_m_per_s") p.a_m_per_s = as_number(it.value(), path);
    else if (k == "g_per_s") p.g_per_s = as_number(it.value(), path);
    else if (k == "r_g_m4_per_mol_s") p.r_g_m4_per_mol_s = as_number(it.value(), path);
    else if (k == "r_g_tilde_per_s") p.r_g_tilde_per_s = as_number(it.value(), path);
    else if (k == "c_inf_mol_per_m3") p.c_inf_mol_per_m3 = as_number(it.value(), path);
    else if (k == "l_c_m") p.l_c_m = as_number(it.value(), path);
    else if (k == "l_s_m") p.l_s_m = as_number(it.value(), path);
    else if (k == "l_0_m") p.l_0_m = as_number(it.value(), path);
    else if (k == "c0_scale") p.c0_scale = as_number(it.value(), path);
    else if (k == "gamma_bio") p.gamma_bio = as_number(it.value(), path);
    else throw ConfigError("unknown field " + path);
  }
}

inline void parse_gains(const nlohmann::json& j, ControllerGains& g) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const std::string path = "gains." + k;
    if (k == "k1") g.k1 = as_number(it.value(), path);
    else if (k == "k2") g.k2 = as_number(it.value(), path);
    else if (k == "epsilon") {
      if (!it.value().is_array() || it.value().size() != 2)
        throw ConfigError("field gains.epsilon must be an array of two numbers");
      g.epsilon(0) = as_number(it.value()[0], "gains.epsilon[0]");
      g.epsilon(1) = as_number(it.value()[1], "gains.epsilon[1]");
    }
    else throw ConfigError("unknown field " + path);
  }
}

inline void parse_trigger(const nlohmann::json& j, TriggerParams& t,
                          std::string& m_dynamics) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const std::string path = "trigger." + k;
    if (k == "gamma") t.gamma = as_number(it.value(), path);
    else if (k == "eta") t.eta = as_number(it.value(), path);
    else if (k == "sigma") t.sigma = as_number(it.value(), path);
    else if (k == "rho") t.rho = as_number(it.value(), path);
    else if (k == "beta") {
      if (!it.value().is_array() || it.value().size() != 5)
        throw ConfigError("field trigger.beta must be an array of five numbers");
      t.beta1 = as_number(it.value()[0], "trigger.beta[0]");
      t.beta2 = as_number(it.value()[1], "trigger.beta[1]");
      t.beta3 = as_number(it.value()[2], "trigger.beta[2]");
      t.beta4 = as_number(it.value()[3], "trigger.beta[3]");
      t.beta5 = as_number(it.value()[4], "trigger.beta[4]");
    }
    else if (k == "m0") t.m0 = as_number(it.value(), path);
    else if (k == "h") t.h = as_number(it.value(), path);
    else if (k == "m_dynamics") {
      m_dynamics = as_string(it.value(), path);
      if (m_dynamics != "u" && m_dynamics != "w")
        throw ConfigError("trigger.m_dynamics must be \"u\" or \"w\"");
    }
    else throw ConfigError("unknown field " + path);
  }
}

inline void parse_solver(const nlohmann::json& j, SolverConfig& s) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const std::string path = "solver." + k;
    if (k == "n_grid") s.n_grid = as_integer(it.value(), path);
    else if (k == "dt_s") s.dt_s = as_number(it.value(), path);
    else if (k == "t_final_s") s.t_final_s = as_number(it.value(), path);
    else if (k == "scheme") {
      const std::string v = as_string(it.value(), path);
      if (v == "imex") s.scheme = Scheme::imex;
      else if (v == "explicit_euler") s.scheme = Scheme::explicit_euler;
      else throw ConfigError("solver.scheme must be \"imex\" or \"explicit_euler\"");
    }
    else if (k == "l_cap_m") s.l_cap_m = as_number(it.value(), path);
    else if (k == "output_stride") s.output_stride = as_integer(it.value(), path);
    else throw ConfigError("unknown field " + path);
  }
}

inline void parse_experiment(const nlohmann::json& j, ExperimentConfig& cfg) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const std::string path = "experiment." + k;
    if (k == "mode") cfg.mode = as_string(it.value(), path);
    else if (k == "output_dir") cfg.output_dir = as_string(it.value(), path);
    else if (k == "deterministic") {
      if (!as_bool(it.value(), path))
        throw ConfigError("experiment.deterministic must remain true");
      cfg.deterministic = true;
    }
    else throw ConfigError("unknown field " + path);
  }
}

}  // namespace detail

/// Mode handling shared by the loader and the driver.
inline ControllerMode parse_mode(const std::string& s) {
  if (s == "continuous") return ControllerMode::continuous;
  if (s == "cetc") return ControllerMode::cetc;
  if (s == "petc") return ControllerMode::petc;
  throw ConfigError("mode must be one of continuous, cetc, petc");
}

inline const char* mode_name(ControllerMode m) {
  switch (m) {
    case ControllerMode::continuous: return "continuous";
    case ControllerMode::cetc: return "cetc";
    default: return "petc";
  }
}

/// Minimal dwell times plus the derived trigger constants they came from.
struct DwellReport {
  double rho1 = 0.0;
  double q = 0.0;
  double tau_integral = 0.0;
  double tau_closed = 0.0;
  double h = 0.0;
  bool h_ok = false;  ///< h <= min(tau_integral, tau_closed)
};

/// Derives rho1/q from the gains and evaluates both dwell times.
inline DwellReport dwell_report(const ExperimentConfig& cfg) {
  const DerivedConstants dc = derive_constants(cfg.physical);
  const GainArtifacts art = build_artifacts(cfg.gains, dc, cfg.physical);
  const TriggerParams tp = derive_trigger_constants(cfg.trigger, art);
  const DwellTimes dw = dwell_time(tp);
  DwellReport r;
  r.rho1 = tp.rho1;
  r.q = tp.q;
  r.tau_integral = dw.tau_integral;
  r.tau_closed = dw.tau_closed;
  r.h = tp.h;
  r.h_ok = tp.h <= std::min(dw.tau_integral, dw.tau_closed);
  return r;
}

/**
 * Cross-module checks run once per load: section invariants (delegated to
 * the owning modules, with the section path prepended to the message), a
 * Hurwitz test of the gains, and the sampled-data rule h <= min(tau) which
 * force_h downgrades from an error to an accepted override.
 */
inline void validate_config(const ExperimentConfig& cfg, bool force_h) {
  try {
    validate(cfg.physical);
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(std::string("physical.") + ex.what());
  }
  try {
    cfg.trigger.validate();
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(std::string("trigger.") + ex.what());
  }
  try {
    cfg.solver.validate(cfg.physical);
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(std::string("solver.") + ex.what());
  }
  parse_mode(cfg.mode);

  const DerivedConstants dc = derive_constants(cfg.physical);
  const GainReport rep = validate_gains(cfg.gains, dc);
  if (!(rep.k1_inequality && rep.k2_inequality && rep.spectral))
    throw ConfigError("gains.k1/k2 do not render the lumped closed loop Hurwitz");

  const DwellReport dw = dwell_report(cfg);
  if (!force_h && !dw.h_ok) {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "trigger.h = %g s exceeds the minimal dwell time %g s "
                  "(sampled-data rule 0 < h <= tau; --force-h overrides)",
                  dw.h, std::min(dw.tau_integral, dw.tau_closed));
    throw ConfigError(buf);
  }
}

/**
 * Constraints that depend on which controller actually runs: CETC checks
 * the trigger every solver step and needs dt small against the dwell time;
 * PETC needs the sampling period to sit on the step grid.
 */
inline void enforce_mode_constraints(const ExperimentConfig& cfg, ControllerMode mode) {
  if (mode == ControllerMode::cetc) {
    const DwellReport dw = dwell_report(cfg);
    const double tau = std::min(dw.tau_integral, dw.tau_closed);
    if (!(cfg.solver.dt_s <= tau / 5.0)) {
      char buf[160];
      std::snprintf(buf, sizeof(buf),
                    "solver.dt_s = %g s must be at most tau/5 = %g s so the "
                    "continuous trigger is checked well inside one dwell interval",
                    cfg.solver.dt_s, tau / 5.0);
      throw ConfigError(buf);
    }
  }
  if (mode == ControllerMode::petc) {
    const double ratio = cfg.trigger.h / cfg.solver.dt_s;
    const double nearest = std::llround(ratio);
    if (!(nearest >= 1.0 && std::abs(ratio - nearest) <= 1e-9 * ratio))
      throw ConfigError("trigger.h must be a positive integer multiple of solver.dt_s "
                        "so periodic checks land on solver steps");
  }
}

/// Builds a config from already-parsed JSON. Shared by the file loader and
/// the sweep machinery (which edits the resolved JSON between runs).
inline ExperimentConfig config_from_json(const nlohmann::json& root, bool force_h = false) {
  if (!root.is_object())
    throw ConfigError("config root must be a JSON object");
  ExperimentConfig cfg;
  for (auto it = root.begin(); it != root.end(); ++it) {
    const std::string& k = it.key();
    if (!it.value().is_object())
      throw ConfigError("section " + k + " must be a JSON object");
    if (k == "physical") detail::parse_physical(it.value(), cfg.physical);
    else if (k == "gains") detail::parse_gains(it.value(), cfg.gains);
    else if (k == "trigger") detail::parse_trigger(it.value(), cfg.trigger, cfg.m_dynamics);
    else if (k == "solver") detail::parse_solver(it.value(), cfg.solver);
    else if (k == "experiment") detail::parse_experiment(it.value(), cfg);
    else throw ConfigError("unknown field " + k);
  }
  validate_config(cfg, force_h);
  return cfg;
}

/**
 * Reads and validates a configuration file. An empty (or all-whitespace)
 * file selects the shipped defaults; anything else must parse as a JSON
 * object. Unknown fields are rejected with their dotted path.
 */
inline ExperimentConfig load_config(const std::string& path, bool force_h = false) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const bool blank =
      text.find_first_not_of(" \t\r\n") == std::string::npos;
  nlohmann::json root = nlohmann::json::object();
  if (!blank) {
    try {
      root = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& ex) {
      throw ConfigError(std::string("config parse error: ") + ex.what());
    }
  }
  return config_from_json(root, force_h);
}

// =========================================================================
// Resolved configuration and fingerprint
// =========================================================================

/// Fully-expanded configuration as JSON: every field present, defaults filled.
inline nlohmann::json resolved_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  const PhysicalParams& p = cfg.physical;
  j["physical"] = {
      {"D_m2_per_s", p.D_m2_per_s},
      {"a_m_per_s", p.a_m_per_s},
      {"g_per_s", p.g_per_s},
      {"r_g_m4_per_mol_s", p.r_g_m4_per_mol_s},
      {"r_g_tilde_per_s", p.r_g_tilde_per_s},
      {"c_inf_mol_per_m3", p.c_inf_mol_per_m3},
      {"l_c_m", p.l_c_m},
      {"l_s_m", p.l_s_m},
      {"l_0_m", p.l_0_m},
      {"c0_scale", p.c0_scale},
      {"gamma_bio", p.gamma_bio},
  };
  j["gains"] = {
      {"k1", cfg.gains.k1},
      {"k2", cfg.gains.k2},
      {"epsilon", {cfg.gains.epsilon(0), cfg.gains.epsilon(1)}},
  };
  const TriggerParams& t = cfg.trigger;
  j["trigger"] = {
      {"gamma", t.gamma},
      {"eta", t.eta},
      {"sigma", t.sigma},
      {"rho", t.rho},
      {"beta", {t.beta1, t.beta2, t.beta3, t.beta4, t.beta5}},
      {"m0", t.m0},
      {"h", t.h},
      {"m_dynamics", cfg.m_dynamics},
  };
  j["solver"] = {
      {"n_grid", cfg.solver.n_grid},
      {"dt_s", cfg.solver.dt_s},
      {"t_final_s", cfg.solver.t_final_s},
      {"scheme", cfg.solver.scheme == Scheme::imex ? "imex" : "explicit_euler"},
      {"l_cap_m", cfg.solver.l_cap_m},
      {"output_stride", cfg.solver.output_stride},
  };
  j["experiment"] = {
      {"mode", cfg.mode},
      {"output_dir", cfg.output_dir},
      {"deterministic", cfg.deterministic},
  };
  return j;
}

/// FNV-1a 64-bit hash of a byte string.
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/// Hash of serialized JSON; reproducible from the emitted resolved-config file.
inline std::string fingerprint_of_json(const nlohmann::json& j) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(j.dump(2))));
  return buf;
}

inline std::string config_fingerprint(const ExperimentConfig& cfg) {
  return fingerprint_of_json(resolved_json(cfg));
}

// =========================================================================
// Artifact writers
// =========================================================================

namespace detail {

inline std::string num17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("failed writing output file " + path.string());
}

}  // namespace detail

/**
 * Fixed-order CSV: t_s, l_m, c_c_mol_m3, U_continuous, U_applied, d, m,
 * gamma_p, event_flag, err_l2_u and, when the monitor ran, V. The gamma_p
 * cell is empty outside PETC mode.
 */
inline std::string timeseries_csv(const RunResult& r, bool lyapunov) {
  std::string out;
  out.reserve(r.series.size() * 160 + 128);
  out += "t_s,l_m,c_c_mol_m3,U_continuous,U_applied,d,m,gamma_p,event_flag,err_l2_u";
  if (lyapunov) out += ",V";
  out += "\n";
  for (const TimePoint& row : r.series) {
    out += detail::num17(row.t_s);
    out += ',';
    out += detail::num17(row.l_m);
    out += ',';
    out += detail::num17(row.c_c_mol_m3);
    out += ',';
    out += detail::num17(row.U_continuous);
    out += ',';
    out += detail::num17(row.U_applied);
    out += ',';
    out += detail::num17(row.d);
    out += ',';
    out += detail::num17(row.m);
    out += ',';
    if (row.has_gamma_p) out += detail::num17(row.gamma_p);
    out += ',';
    out += std::to_string(row.event_flag);
    out += ',';
    out += detail::num17(row.err_l2_u);
    if (lyapunov) {
      out += ',';
      out += detail::num17(row.has_V ? row.V : std::numeric_limits<double>::quiet_NaN());
    }
    out += '\n';
  }
  return out;
}

/// One JSON object per event. The trigger value is keyed by the rule that
/// fired: d2_minus_gamma_m for CETC samples, gamma_p for PETC samples.
inline std::string events_jsonl(const RunResult& r, ControllerMode mode) {
  std::string out;
  out.reserve(r.events.size() * 96);
  const char* value_key =
      mode == ControllerMode::petc ? "gamma_p" : "d2_minus_gamma_m";
  for (const EventRecord& ev : r.events) {
    nlohmann::json line = {
        {"t", ev.t},
        {"U_held", ev.u_held},
        {value_key, ev.trigger_value},
        {"check_index", ev.check_index},
    };
    out += line.dump();
    out += '\n';
  }
  return out;
}

/// Run summary: metrics, dwell constants, fingerprint, and the abort marker.
/// Non-finite values serialize as null.
inline std::string metrics_json(const RunResult& r, const ExperimentConfig& cfg,
                                ControllerMode mode) {
  const DwellReport dw = dwell_report(cfg);
  const RunMetrics& m = r.metrics;
  nlohmann::json j = {
      {"mode", mode_name(mode)},
      {"config_fingerprint", config_fingerprint(cfg)},
      {"aborted", r.aborted},
      {"abort_reason", r.abort_reason},
      {"t_converge_l", m.t_converge_l},
      {"t_converge_c", m.t_converge_c},
      {"event_count", m.event_count},
      {"step_count", m.step_count},
      {"check_count", m.check_count},
      {"first_event_t", m.first_event_t},
      {"min_gap", m.min_gap},
      {"mean_gap", m.mean_gap},
      {"max_gap", m.max_gap},
      {"final_l_rel_err", m.final_l_rel_err},
      {"final_err_l2_u", m.final_err_l2_u},
      {"final_c_c_rel_err", m.final_c_c_rel_err},
      {"max_abs_ldot", m.max_abs_ldot},
      {"v_bar", m.v_bar},
      {"ldot_exceeded_v_bar", m.ldot_exceeded_v_bar},
      {"max_m", m.max_m},
      {"max_cetc_budget", m.max_cetc_budget},
      {"max_petc_gamma_nonfiring", m.max_petc_gamma_nonfiring},
      {"rho1", dw.rho1},
      {"q", dw.q},
      {"tau_integral", dw.tau_integral},
      {"tau_closed", dw.tau_closed},
      {"h", dw.h},
  };
  return j.dump(2) + "\n";
}

/// Generic plotting stub emitted next to every run.
inline const char* plot_stub() {
  return R"PY(#!/usr/bin/env python3
"""Plot timeseries.csv (and events.jsonl when present) from this directory."""
import csv
import json
import os
import sys

here = os.path.dirname(os.path.abspath(__file__))

rows = []
with open(os.path.join(here, "timeseries.csv")) as f:
    for row in csv.DictReader(f):
        rows.append(row)

def col(name):
    return [float(r[name]) for r in rows if r.get(name) not in (None, "")]

t = col("t_s")
events = []
path = os.path.join(here, "events.jsonl")
if os.path.exists(path):
    with open(path) as f:
        events = [json.loads(line) for line in f if line.strip()]

try:
    import matplotlib.pyplot as plt
except ImportError:
    print("matplotlib not available; %d rows, %d events" % (len(rows), len(events)))
    sys.exit(0)

fig, axes = plt.subplots(4, 1, sharex=True, figsize=(9, 11))
axes[0].plot(t, [v * 1e6 for v in col("l_m")])
axes[0].set_ylabel("l [um]")
axes[1].plot(t, col("c_c_mol_m3"))
axes[1].set_ylabel("c_c [mol/m^3]")
axes[2].plot(t, col("U_continuous"), label="U fresh", lw=0.8)
axes[2].plot(t, col("U_applied"), label="U applied", lw=0.8)
if events:
    axes[2].plot([e["t"] for e in events], [e["U_held"] for e in events],
                 ".", ms=2, label="events")
axes[2].set_ylabel("U")
axes[2].legend(loc="best", fontsize=8)
axes[3].semilogy(t, [max(v, 1e-300) for v in col("err_l2_u")])
axes[3].set_ylabel("rel L2 error")
axes[3].set_xlabel("t [s]")
fig.tight_layout()
out = os.path.join(here, "run.png")
fig.savefig(out, dpi=130)
print("wrote", out)
)PY";
}

/**
 * Writes the five per-run artifacts into dir (creating it):
 * timeseries.csv, events.jsonl, metrics.json, resolved_config.json, plot.py.
 */
inline void write_run_artifacts(const ExperimentConfig& cfg, ControllerMode mode,
                                const RunResult& r, const std::filesystem::path& dir,
                                bool lyapunov) {
  std::filesystem::create_directories(dir);
  detail::write_file(dir / "timeseries.csv", timeseries_csv(r, lyapunov));
  detail::write_file(dir / "events.jsonl", events_jsonl(r, mode));
  detail::write_file(dir / "metrics.json", metrics_json(r, cfg, mode));
  detail::write_file(dir / "resolved_config.json", resolved_json(cfg).dump(2) + "\n");
  detail::write_file(dir / "plot.py", plot_stub());
}

// =========================================================================
// Run orchestration
// =========================================================================

/// Runs one simulation after the mode-specific load checks.
inline RunResult execute_run(const ExperimentConfig& cfg, ControllerMode mode,
                             bool lyapunov = false) {
  enforce_mode_constraints(cfg, mode);
  SimOptions opts;
  opts.mode = mode;
  opts.lyapunov = lyapunov;
  opts.m_from_target = cfg.m_dynamics == "w";
  return run_simulation(cfg.physical, cfg.gains, cfg.trigger, cfg.solver, opts);
}

/// Runs and persists one simulation; returns the result for inspection.
inline RunResult run_and_write(const ExperimentConfig& cfg, ControllerMode mode,
                               const std::filesystem::path& dir, bool lyapunov = false) {
  RunResult r = execute_run(cfg, mode, lyapunov);
  write_run_artifacts(cfg, mode, r, dir, lyapunov);
  return r;
}

/// Outcome of the three-mode comparison.
struct CompareOutcome {
  RunResult continuous;
  RunResult cetc;
  RunResult petc;
  bool any_aborted = false;
};

namespace detail {

inline void append_compare_row(std::string& out, const char* label,
                               const RunResult& r) {
  const RunMetrics& m = r.metrics;
  out += label;
  out += ',';
  out += std::to_string(m.event_count);
  out += ',';
  out += num17(m.t_converge_l);
  out += ',';
  out += num17(m.t_converge_c);
  out += ',';
  out += num17(m.final_l_rel_err);
  out += ',';
  out += num17(m.final_err_l2_u);
  out += ',';
  out += num17(m.min_gap);
  out += ',';
  out += num17(m.mean_gap);
  out += ',';
  out += r.aborted ? "1" : "0";
  out += '\n';
}

}  // namespace detail

/**
 * Runs all three controller modes on one configuration concurrently (three
 * independent workers, no shared mutable state), writes per-mode artifact
 * directories, a comparison summary, and the applied-input trajectories
 * aligned on the shared output time grid.
 */
inline CompareOutcome compare_all(const ExperimentConfig& cfg,
                                  const std::filesystem::path& out_dir,
                                  bool lyapunov = false) {
  enforce_mode_constraints(cfg, ControllerMode::cetc);
  enforce_mode_constraints(cfg, ControllerMode::petc);
  auto fc = std::async(std::launch::async, [&] {
    return execute_run(cfg, ControllerMode::continuous, lyapunov);
  });
  auto fe = std::async(std::launch::async, [&] {
    return execute_run(cfg, ControllerMode::cetc, lyapunov);
  });
  auto fp = std::async(std::launch::async, [&] {
    return execute_run(cfg, ControllerMode::petc, lyapunov);
  });
  CompareOutcome out;
  out.continuous = fc.get();
  out.cetc = fe.get();
  out.petc = fp.get();
  out.any_aborted =
      out.continuous.aborted || out.cetc.aborted || out.petc.aborted;

  write_run_artifacts(cfg, ControllerMode::continuous, out.continuous,
                      out_dir / "continuous", lyapunov);
  write_run_artifacts(cfg, ControllerMode::cetc, out.cetc, out_dir / "cetc", lyapunov);
  write_run_artifacts(cfg, ControllerMode::petc, out.petc, out_dir / "petc", lyapunov);

  std::string summary =
      "mode,event_count,t_converge_l,t_converge_c,final_l_rel_err,"
      "final_err_l2_u,min_gap,mean_gap,aborted\n";
  detail::append_compare_row(summary, "continuous", out.continuous);
  detail::append_compare_row(summary, "cetc", out.cetc);
  detail::append_compare_row(summary, "petc", out.petc);
  detail::write_file(out_dir / "compare_summary.csv", summary);

  const size_t rows = std::min({out.continuous.series.size(),
                                out.cetc.series.size(), out.petc.series.size()});
  std::string table;
  table.reserve(rows * 96 + 64);
  table += "t_s,U_applied_continuous,U_applied_cetc,U_applied_petc\n";
  for (size_t i = 0; i < rows; ++i) {
    table += detail::num17(out.continuous.series[i].t_s);
    table += ',';
    table += detail::num17(out.continuous.series[i].U_applied);
    table += ',';
    table += detail::num17(out.cetc.series[i].U_applied);
    table += ',';
    table += detail::num17(out.petc.series[i].U_applied);
    table += '\n';
  }
  detail::write_file(out_dir / "input_comparison.csv", table);
  return out;
}

/// One sweep point: the raw value token, its run directory, and the metrics.
struct SweepPoint {
  std::string token;
  std::string dir_name;
  bool aborted = false;
  RunMetrics metrics;
};

/**
 * Applies one --param value to the resolved JSON and revalidates the whole
 * configuration, so a sweep point obeys exactly the rules a config file
 * does. The path is dotted, e.g. trigger.sigma or solver.dt_s.
 */
inline ExperimentConfig config_with_value(const ExperimentConfig& base,
                                          const std::string& param_path,
                                          const std::string& token, bool force_h) {
  const size_t dot = param_path.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 >= param_path.size())
    throw ConfigError("sweep parameter path must look like section.field");
  const std::string section = param_path.substr(0, dot);
  const std::string field = param_path.substr(dot + 1);

  nlohmann::json j = resolved_json(base);
  if (!j.contains(section) || !j[section].is_object() || !j[section].contains(field))
    throw ConfigError("unknown sweep parameter " + param_path);
  nlohmann::json& slot = j[section][field];

  errno = 0;
  char* end = nullptr;
  const double value = std::strtod(token.c_str(), &end);
  if (token.empty() || end != token.c_str() + token.size() || errno != 0)
    throw ConfigError("sweep value '" + token + "' is not a number");

  if (slot.is_number_integer()) {
    const long long iv = std::llround(value);
    if (std::abs(value - static_cast<double>(iv)) > 0.0)
      throw ConfigError("sweep parameter " + param_path + " takes integer values");
    slot = iv;
  } else if (slot.is_number()) {
    slot = value;
  } else {
    throw ConfigError("sweep parameter " + param_path + " is not numeric");
  }
  return config_from_json(j, force_h);
}

namespace detail {

/// Directory-safe name for one sweep point.
inline std::string sweep_dir_name(const std::string& param_path,
                                  const std::string& token) {
  std::string name = param_path + "=" + token;
  for (char& c : name)
    if (c == '/' || c == '\\' || c == ' ') c = '_';
  return name;
}

}  // namespace detail

/**
 * Runs one simulation per value with no shared mutable state (each worker
 * owns a full config copy), writes one artifact directory per point plus a
 * sweep_summary.csv, and preserves the order the values were given in.
 */
inline std::vector<SweepPoint> sweep_runs(const ExperimentConfig& base,
                                          const std::string& param_path,
                                          const std::vector<std::string>& tokens,
                                          const std::filesystem::path& out_dir,
                                          ControllerMode mode, bool force_h,
                                          bool lyapunov = false) {
  if (tokens.empty()) throw ConfigError("sweep needs at least one value");

  struct Prepared {
    ExperimentConfig cfg;
    std::string dir_name;
  };
  std::vector<Prepared> prep;
  prep.reserve(tokens.size());
  for (const std::string& tok : tokens) {
    Prepared pr{config_with_value(base, param_path, tok, force_h),
                detail::sweep_dir_name(param_path, tok)};
    enforce_mode_constraints(pr.cfg, mode);
    prep.push_back(std::move(pr));
  }

  std::vector<std::future<RunResult>> futures;
  futures.reserve(prep.size());
  for (const Prepared& pr : prep)
    futures.push_back(std::async(std::launch::async, [&pr, mode, lyapunov] {
      return execute_run(pr.cfg, mode, lyapunov);
    }));

  std::vector<SweepPoint> points;
  points.reserve(prep.size());
  std::string summary =
      "param,value,mode,aborted,t_converge_l,t_converge_c,event_count,"
      "min_gap,mean_gap,final_l_rel_err,final_err_l2_u\n";
  for (size_t i = 0; i < prep.size(); ++i) {
    RunResult r = futures[i].get();
    write_run_artifacts(prep[i].cfg, mode, r, out_dir / prep[i].dir_name, lyapunov);
    SweepPoint pt;
    pt.token = tokens[i];
    pt.dir_name = prep[i].dir_name;
    pt.aborted = r.aborted;
    pt.metrics = r.metrics;
    points.push_back(pt);

    summary += param_path;
    summary += ',';
    summary += tokens[i];
    summary += ',';
    summary += mode_name(mode);
    summary += ',';
    summary += r.aborted ? "1" : "0";
    summary += ',';
    summary += detail::num17(r.metrics.t_converge_l);
    summary += ',';
    summary += detail::num17(r.metrics.t_converge_c);
    summary += ',';
    summary += std::to_string(r.metrics.event_count);
    summary += ',';
    summary += detail::num17(r.metrics.min_gap);
    summary += ',';
    summary += detail::num17(r.metrics.mean_gap);
    summary += ',';
    summary += detail::num17(r.metrics.final_l_rel_err);
    summary += ',';
    summary += detail::num17(r.metrics.final_err_l2_u);
    summary += '\n';
  }
  detail::write_file(out_dir / "sweep_summary.csv", summary);
  return points;
}

// =========================================================================
// Kernel verification report
// =========================================================================

/**
 * Self-checks of the gain-kernel machinery on the configured parameters:
 * the phi(0) = H - eps identity, finite-difference agreement of phi',
 * the matrix exponential against its series form on seeded random 4x4
 * inputs, the Hurwitz report for the gains, and sample values of phi and p.
 * all_ok collects the pass flags for the --check exit path.
 */
inline nlohmann::json kernel_report(const ExperimentConfig& cfg, bool& all_ok) {
  const DerivedConstants dc = derive_constants(cfg.physical);
  const GainArtifacts art = build_artifacts(cfg.gains, dc, cfg.physical);
  nlohmann::json j;

  const Eigen::RowVector2d phi0 = eval_phi(0.0, art);
  const Eigen::Vector2d target = dc.H - cfg.gains.epsilon;
  const double id_err = std::max(std::abs(phi0(0) - target(0)),
                                 std::abs(phi0(1) - target(1)));
  const double id_scale = std::max({1.0, std::abs(target(0)), std::abs(target(1))});
  const bool id_ok = id_err <= 1e-12 * id_scale;
  j["phi0_identity"] = {
      {"phi0", {phi0(0), phi0(1)}},
      {"H_minus_eps", {target(0), target(1)}},
      {"max_abs_err", id_err},
      {"pass", id_ok},
  };

  // centered finite differences of phi against eval_phi_prime; the step
  // balances truncation against cancellation in the exponential chain
  double fd_worst = 0.0;
  const double span = cfg.solver.l_cap_m;
  for (int i = 0; i < 20; ++i) {
    const double x = -span * (i + 0.5) / 20.0;
    const double step = 2e-5 * span;
    const Eigen::RowVector2d hi = eval_phi(x + step, art);
    const Eigen::RowVector2d lo = eval_phi(x - step, art);
    const Eigen::RowVector2d fd = (hi - lo) / (2.0 * step);
    const Eigen::RowVector2d an = eval_phi_prime(x, art);
    for (int c = 0; c < 2; ++c) {
      const double rel = std::abs(fd(c) - an(c)) /
                         std::max(1e-300, std::abs(an(c)));
      fd_worst = std::max(fd_worst, rel);
    }
  }
  const bool fd_ok = fd_worst <= 1e-6;
  j["phi_prime_fd"] = {{"offsets", 20}, {"max_rel_err", fd_worst}, {"pass", fd_ok}};

  // matrix exponential vs its series form on seeded random 4x4 matrices
  std::mt19937 rng(2026);
  double exp_worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::Matrix4d M;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c)
        M(r, c) = 2.0 * (static_cast<double>(rng()) / 4294967296.0) - 1.0;
    const Eigen::Matrix4d E = mat_exp4(M);
    const Eigen::MatrixXd S = mat_exp_series(M);
    const double rel = (E - S).norm() / std::max(1e-300, S.norm());
    exp_worst = std::max(exp_worst, rel);
  }
  const bool exp_ok = exp_worst <= 1e-10;
  j["mat_exp_series"] = {{"trials", 50}, {"max_rel_err", exp_worst}, {"pass", exp_ok}};

  const GainReport rep = validate_gains(cfg.gains, dc);
  const bool hurwitz_ok = rep.k1_inequality && rep.k2_inequality && rep.spectral;
  j["hurwitz"] = {
      {"k1_inequality", rep.k1_inequality},
      {"k2_inequality", rep.k2_inequality},
      {"spectral", rep.spectral},
      {"eig_real", {rep.eig1.real(), rep.eig2.real()}},
      {"eig_imag", {rep.eig1.imag(), rep.eig2.imag()}},
      {"pass", hurwitz_ok},
  };

  nlohmann::json samples = nlohmann::json::array();
  for (double x : {0.0, 0.25 * cfg.physical.l_s_m, 0.5 * cfg.physical.l_s_m,
                   cfg.physical.l_s_m}) {
    const Eigen::RowVector2d ph = eval_phi(-x, art);
    const Eigen::RowVector2d pv = eval_p(x, art);
    samples.push_back({{"x_m", x},
                       {"phi_at_minus_x", {ph(0), ph(1)}},
                       {"p", {pv(0), pv(1)}}});
  }
  j["samples"] = samples;

  all_ok = id_ok && fd_ok && exp_ok && hurwitz_ok;
  j["pass"] = all_ok;
  return j;
}

}  // namespace axon

#endif  // AXON_HARNESS_HPP
