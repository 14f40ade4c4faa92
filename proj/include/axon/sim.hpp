#ifndef AXON_SIM_HPP
#define AXON_SIM_HPP

/**
 * @file sim.hpp
 * @brief Time integration of the moving-boundary tubulin plant and the
 *        closed-loop run driver.
 *
 * The plant lives on [0, l(t)] with the length driven by the growth-cone
 * state. The front-fixing map sigma = x / l(t) pins the domain to [0, 1];
 * the price is a sigma * dl/dt advection correction in the interior
 * operator. The grid carries n_grid interior nodes plus both boundary
 * nodes: sigma_j = j * dsigma, j = 0 .. n_grid + 1, dsigma = 1/(n_grid+1).
 * Node 0 sees the Robin actuation row, node n_grid + 1 is pinned to the
 * growth-cone concentration (Dirichlet).
 *
 * Two schemes: an IMEX Euler step (implicit backward-Euler diffusion via a
 * tridiagonal solve, explicit everything else) stable at any dt of
 * interest, and a fully explicit forward Euler step under the usual
 * diffusion CFL bound, kept as a cross-check.
 */

#include <axon/analysis.hpp>
#include <axon/backstepping.hpp>
#include <axon/linalg.hpp>
#include <axon/model.hpp>
#include <axon/trigger.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace axon {

// =========================================================================
// Solver configuration
// =========================================================================

enum class Scheme { imex, explicit_euler };

struct SolverConfig {
  int n_grid = 64;          ///< interior node count on the sigma grid
  double dt_s = 1e-4;       ///< time step (s)
  double t_final_s = 300.0; ///< horizon (s)
  Scheme scheme = Scheme::imex;
  double l_cap_m = 5e-5;    ///< blow-up guard length (m)
  int output_stride = 1000; ///< record every this many steps

  void validate(const PhysicalParams& p) const {
    if (n_grid < 16) throw std::invalid_argument("n_grid must be at least 16");
    if (!(dt_s > 0.0)) throw std::invalid_argument("dt must be positive");
    if (!(t_final_s > 0.0)) throw std::invalid_argument("t_final must be positive");
    if (!(l_cap_m > p.l_s_m))
      throw std::invalid_argument("l_cap must exceed the target length l_s");
    if (output_stride < 1)
      throw std::invalid_argument("output_stride must be at least 1");
    if (scheme == Scheme::explicit_euler) {
      const double dsig = 1.0 / (n_grid + 1);
      const double bound =
          dsig * dsig * p.l_0_m * p.l_0_m / (2.0 * p.D_m2_per_s);
      if (dt_s > bound)
        throw std::invalid_argument(
            "explicit scheme requires dt <= dsigma^2 l_0^2 / (2 D)");
    }
  }
};

// =========================================================================
// Plant state
// =========================================================================

struct SimState {
  std::vector<double> c_hat; ///< samples on sigma_j = j/(n_grid+1), j = 0..n_grid+1
  double c_c = 0.0;          ///< growth-cone concentration (mol/m^3)
  double l = 0.0;            ///< axon length (m)
  double t = 0.0;            ///< time (s)
};

/// Uniform initial profile c0_scale * c_inf with the cone state matching at
/// sigma = 1, starting from length l_0.
inline SimState make_initial_state(const SolverConfig& sc, const PhysicalParams& p) {
  SimState s;
  const double c0 = p.c0_scale * p.c_inf_mol_per_m3;
  s.c_hat.assign(static_cast<size_t>(sc.n_grid) + 2, c0);
  s.c_c = c0;
  s.l = p.l_0_m;
  s.t = 0.0;
  return s;
}

namespace detail {

inline void require_finite_state(const SimState& s) {
  bool ok = std::isfinite(s.c_c) && std::isfinite(s.l) && std::isfinite(s.t);
  for (double v : s.c_hat) ok = ok && std::isfinite(v);
  if (!ok) throw std::runtime_error("state is not finite");
}

/// 2nd-order one-sided sigma-derivative at the tip node.
inline double tip_sigma_gradient(const std::vector<double>& c, double dsig) {
  const size_t m = c.size() - 1;
  return (3.0 * c[m] - 4.0 * c[m - 1] + c[m - 2]) / (2.0 * dsig);
}

}  // namespace detail

// =========================================================================
// Semi-discrete operator
// =========================================================================

struct PlantRhs {
  std::vector<double> dc_hat;
  double dc_c = 0.0;
  double dl = 0.0;
};

/**
 * Time derivative of the front-fixed state under a held boundary input.
 *
 * Interior: (D/l^2) c_ss - ((a - sigma l') / l) c_s - g c with central
 * differences. Node 0 eliminates the ghost value through the Robin row
 * c_s(0)/l + c(0) = -q_s and takes its advection one-sided (2nd order).
 * The tip gradient entering the cone balance uses the matching one-sided
 * stencil. The Dirichlet node's derivative is the cone derivative itself.
 */
inline PlantRhs front_fixed_rhs(const SimState& s, double q_s_applied,
                                const PhysicalParams& p, const DerivedConstants& dc) {
  detail::require_finite_state(s);
  if (!std::isfinite(q_s_applied))
    throw std::runtime_error("boundary input is not finite");
  const int last = static_cast<int>(s.c_hat.size()) - 1; // = n_grid + 1
  if (last < 3) throw std::invalid_argument("state grid is too coarse");
  const double dsig = 1.0 / last;
  const double l = s.l;
  if (!(l > 0.0)) throw std::runtime_error("length left the admissible region");
  const double ldot = growth_rhs(s.c_c, p);
  const double diff = p.D_m2_per_s / (l * l);
  const double a = p.a_m_per_s;
  const double g = p.g_per_s;
  const std::vector<double>& c = s.c_hat;

  PlantRhs r;
  r.dc_hat.assign(c.size(), 0.0);

  const double ghost = c[1] + 2.0 * dsig * l * (c[0] + q_s_applied);
  const double adv0 = (-3.0 * c[0] + 4.0 * c[1] - c[2]) / (2.0 * dsig);
  r.dc_hat[0] = diff * (ghost - 2.0 * c[0] + c[1]) / (dsig * dsig) -
                (a / l) * adv0 - g * c[0];

  for (int j = 1; j < last; ++j) {
    const double sig = j * dsig;
    r.dc_hat[j] =
        diff * (c[j - 1] - 2.0 * c[j] + c[j + 1]) / (dsig * dsig) -
        ((a - sig * ldot) / l) * (c[j + 1] - c[j - 1]) / (2.0 * dsig) -
        g * c[j];
  }

  const double c_x_tip = detail::tip_sigma_gradient(c, dsig) / l;
  r.dc_c = cone_ode_rhs(s.c_c, c_x_tip, dc, p);
  r.dl = ldot;
  r.dc_hat[last] = r.dc_c;
  return r;
}

// =========================================================================
// Time stepping
// =========================================================================

/**
 * One step of the configured scheme. The lumped states advance first by
 * explicit Euler on the old state; the PDE update then uses the old length
 * and old growth speed in its coefficients and the new cone value in the
 * Dirichlet row. Throws std::runtime_error if the new length leaves
 * (0, l_cap), before any output state is built.
 */
inline SimState step(const SimState& s, double q_s_applied, const SolverConfig& cfg,
                     const PhysicalParams& p, const DerivedConstants& dc) {
  const int N = cfg.n_grid;
  if (static_cast<int>(s.c_hat.size()) != N + 2)
    throw std::invalid_argument("state grid does not match n_grid");
  const double dt = cfg.dt_s;

  PlantRhs rhs = front_fixed_rhs(s, q_s_applied, p, dc);
  const double c_c_new = s.c_c + dt * rhs.dc_c;
  const double l_new = s.l + dt * rhs.dl;
  if (!(l_new > 0.0) || l_new >= cfg.l_cap_m)
    throw std::runtime_error("length left the admissible region");

  SimState out;
  out.c_hat.resize(s.c_hat.size());
  out.c_c = c_c_new;
  out.l = l_new;
  out.t = s.t + dt;

  if (cfg.scheme == Scheme::explicit_euler) {
    for (int j = 0; j <= N; ++j) out.c_hat[j] = s.c_hat[j] + dt * rhs.dc_hat[j];
  } else {
    const double dsig = 1.0 / (N + 1);
    const double l = s.l;
    const double ldot = growth_rhs(s.c_c, p);
    const double a = p.a_m_per_s;
    const double g = p.g_per_s;
    const double mu = dt * p.D_m2_per_s / (l * l * dsig * dsig);
    const std::vector<double>& c = s.c_hat;

    std::vector<double> sub(static_cast<size_t>(N) + 1, -mu);
    std::vector<double> dia(static_cast<size_t>(N) + 1, 1.0 + 2.0 * mu);
    std::vector<double> sup(static_cast<size_t>(N) + 1, -mu);
    std::vector<double> rhs_v(static_cast<size_t>(N) + 1, 0.0);

    const double adv0 = (-3.0 * c[0] + 4.0 * c[1] - c[2]) / (2.0 * dsig);
    dia[0] = 1.0 + 2.0 * mu - 2.0 * mu * dsig * l;
    sup[0] = -2.0 * mu;
    rhs_v[0] = c[0] + dt * (-(a / l) * adv0 - g * c[0]) +
               2.0 * mu * dsig * l * q_s_applied;

    for (int j = 1; j <= N; ++j) {
      const double sig = j * dsig;
      const double advj = (c[j + 1] - c[j - 1]) / (2.0 * dsig);
      rhs_v[j] = c[j] + dt * (-((a - sig * ldot) / l) * advj - g * c[j]);
    }
    rhs_v[N] += mu * c_c_new;

    thomas_solve(sub, dia, sup, rhs_v);
    for (int j = 0; j <= N; ++j) out.c_hat[j] = rhs_v[j];
  }

  out.c_hat[N + 1] = c_c_new;
  detail::require_finite_state(out);
  return out;
}

// =========================================================================
// Run driver
// =========================================================================

struct SimOptions {
  ControllerMode mode = ControllerMode::continuous;
  bool lyapunov = false;      ///< record the V column at output rows
  bool m_from_target = false; ///< feed the m dynamics target-system samples
};

/// One output row of timeseries.csv.
struct TimePoint {
  double t_s = 0.0;
  double l_m = 0.0;
  double c_c_mol_m3 = 0.0;
  double U_continuous = 0.0; ///< fresh feedback at this instant
  double U_applied = 0.0;    ///< held (applied) feedback
  double d = 0.0;
  double m = 0.0;
  double gamma_p = 0.0;      ///< PETC check value (valid when has_gamma_p)
  bool has_gamma_p = false;
  int event_flag = 0;        ///< events since the previous recorded row
  double err_l2_u = 0.0;     ///< ||u|| / ||c_eq|| on the current grid
  double V = 0.0;            ///< Lyapunov functional (valid when has_V)
  bool has_V = false;
};

/// Summary numbers for metrics.json.
struct RunMetrics {
  double t_converge_l = std::numeric_limits<double>::quiet_NaN();
  double t_converge_c = std::numeric_limits<double>::quiet_NaN();
  std::int64_t event_count = 0;
  std::int64_t step_count = 0;
  std::int64_t check_count = 0;
  double first_event_t = std::numeric_limits<double>::quiet_NaN();
  double min_gap = std::numeric_limits<double>::quiet_NaN();
  double mean_gap = std::numeric_limits<double>::quiet_NaN();
  double max_gap = std::numeric_limits<double>::quiet_NaN();
  double final_l_rel_err = std::numeric_limits<double>::quiet_NaN();
  double final_err_l2_u = std::numeric_limits<double>::quiet_NaN();
  double final_c_c_rel_err = std::numeric_limits<double>::quiet_NaN();
  double max_abs_ldot = 0.0;
  double v_bar = 0.0; ///< D/(16(D+1)) growth-speed region bound
  bool ldot_exceeded_v_bar = false;
  double max_m = -std::numeric_limits<double>::infinity();
  /// Largest d^2 + gamma m observed over non-firing CETC checks.
  double max_cetc_budget = -std::numeric_limits<double>::infinity();
  /// Largest Gamma_p observed over non-firing PETC checks.
  double max_petc_gamma_nonfiring = -std::numeric_limits<double>::infinity();
};

/**
 * Convergence and event statistics from a recorded series. Convergence
 * times are sustained-entry times: the earliest recorded instant from which
 * the 5% band holds through the end of the series. NaN marks a threshold
 * never sustained (or an empty/too-short event log for the gap fields).
 */
inline RunMetrics run_metrics(const std::vector<TimePoint>& series,
                              const std::vector<EventRecord>& events,
                              const PhysicalParams& p) {
  RunMetrics m;
  m.v_bar = p.D_m2_per_s / (16.0 * (p.D_m2_per_s + 1.0));
  m.event_count = static_cast<std::int64_t>(events.size());
  if (!events.empty()) m.first_event_t = events.front().t;
  if (events.size() >= 2) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    double sum = 0.0;
    for (size_t i = 1; i < events.size(); ++i) {
      const double gap = events[i].t - events[i - 1].t;
      lo = std::min(lo, gap);
      hi = std::max(hi, gap);
      sum += gap;
    }
    m.min_gap = lo;
    m.max_gap = hi;
    m.mean_gap = sum / static_cast<double>(events.size() - 1);
  }
  if (series.empty()) return m;

  const double tol_l = 0.05 * p.l_s_m;
  size_t i = series.size();
  while (i > 0 && std::abs(series[i - 1].l_m - p.l_s_m) <= tol_l) --i;
  if (i < series.size()) m.t_converge_l = series[i].t_s;

  size_t j = series.size();
  while (j > 0 && series[j - 1].err_l2_u <= 0.05) --j;
  if (j < series.size()) m.t_converge_c = series[j].t_s;

  const TimePoint& last = series.back();
  m.final_l_rel_err = std::abs(last.l_m - p.l_s_m) / p.l_s_m;
  m.final_err_l2_u = last.err_l2_u;
  m.final_c_c_rel_err =
      std::abs(last.c_c_mol_m3 - p.c_inf_mol_per_m3) / p.c_inf_mol_per_m3;
  return m;
}

struct RunResult {
  std::vector<TimePoint> series;
  std::vector<EventRecord> events;
  SimState final_state;
  bool aborted = false;
  std::string abort_reason;
  RunMetrics metrics;
};

/**
 * Full closed-loop run from a given initial state. Per instant t_k = k dt,
 * k = 0 .. K: map the state to error coordinates, evaluate the fresh
 * feedback, advance the hold state (the instant k = 0 synchronizes the
 * hold without logging), record a row when the stride or the horizon says
 * so, then take a plant step under q_s = q_s* - U_held. The trigger is
 * advanced at k = K as well so the last recorded row is a checked instant.
 * A geometry or finiteness abort flushes the partial series with the abort
 * marker set. The series clock starts at zero regardless of initial.t.
 */
inline RunResult run_simulation(const SimState& initial, const PhysicalParams& p,
                                const ControllerGains& gains, const TriggerParams& tp_in,
                                const SolverConfig& sc, const SimOptions& opts) {
  validate(p);
  sc.validate(p);
  if (static_cast<int>(initial.c_hat.size()) != sc.n_grid + 2)
    throw std::invalid_argument("state grid does not match n_grid");
  if (!(initial.l > 0.0 && initial.l < sc.l_cap_m))
    throw std::invalid_argument("initial length must lie in (0, l_cap)");
  const DerivedConstants dc = derive_constants(p);
  const GainArtifacts art = build_artifacts(gains, dc, p);
  const TriggerParams tp = derive_trigger_constants(tp_in, art);

  LyapunovSetup lyap;
  if (opts.lyapunov) lyap = make_lyapunov_setup(gains, dc);

  const std::int64_t K = std::llround(sc.t_final_s / sc.dt_s);
  const std::int64_t steps_per_h =
      std::max<std::int64_t>(1, std::llround(tp.h / sc.dt_s));
  const double dsig = 1.0 / (sc.n_grid + 1);

  RunResult out;
  out.metrics.v_bar = p.D_m2_per_s / (16.0 * (p.D_m2_per_s + 1.0));
  SimState state = initial;
  TriggerState ts = make_trigger_state(tp, opts.mode);

  std::int64_t events_since_row = 0;
  std::int64_t steps_taken = 0;
  std::int64_t checks = 0;
  double max_abs_ldot = 0.0;
  double max_m = -std::numeric_limits<double>::infinity();
  double max_cetc_budget = -std::numeric_limits<double>::infinity();
  double max_petc_gamma = -std::numeric_limits<double>::infinity();
  std::vector<double> ceq_grid;
  std::vector<double> w;

  for (std::int64_t k = 0;; ++k) {
    const double t = k * sc.dt_s;
    state.t = t;
    const ErrorCoords e = to_error_coords(state.c_hat, state.c_c, state.l, dc, p);
    const double U_fresh = control_law(e.u, e.X, state.l, art);
    const double dx = state.l * dsig;
    const bool record = (k % sc.output_stride == 0) || k == K;

    if (opts.m_from_target || (opts.lyapunov && record))
      w = transform_to_target(e.u, e.X, state.l, art);

    TriggerObservables obs;
    obs.X = e.X;
    if (opts.m_from_target) {
      obs.u_boundary = w.front();
      obs.u_l2norm = l2_norm(w, dx);
    } else {
      obs.u_boundary = e.u.front();
      obs.u_l2norm = l2_norm(e.u, dx);
    }

    const bool was_primed = ts.primed;
    const auto ev = advance_trigger(ts, U_fresh, t, sc.dt_s, obs, tp);
    if (ev) {
      out.events.push_back(*ev);
      ++events_since_row;
    }

    max_m = std::max(max_m, ts.m);
    max_abs_ldot = std::max(max_abs_ldot, std::abs(growth_rhs(state.c_c, p)));
    if (was_primed && opts.mode == ControllerMode::cetc) {
      ++checks;
      if (!ev)
        max_cetc_budget =
            std::max(max_cetc_budget, ts.d * ts.d + tp.gamma * ts.m);
    }
    if (was_primed && opts.mode == ControllerMode::petc &&
        k % steps_per_h == 0) {
      ++checks;
      if (!ev) max_petc_gamma = std::max(max_petc_gamma, petc_gamma(ts.d, ts.m, tp));
    }

    auto make_row = [&]() {
      TimePoint row;
      row.t_s = t;
      row.l_m = state.l;
      row.c_c_mol_m3 = state.c_c;
      row.U_continuous = U_fresh;
      row.U_applied = ts.u_held;
      row.d = ts.d;
      row.m = ts.m;
      if (opts.mode == ControllerMode::petc) {
        row.gamma_p = petc_gamma(ts.d, ts.m, tp);
        row.has_gamma_p = true;
      }
      row.event_flag = static_cast<int>(events_since_row);
      events_since_row = 0;
      steady_state_profile_grid(state.l, sc.n_grid + 1, dc, p, ceq_grid);
      row.err_l2_u = l2_norm(e.u, dx) / l2_norm(ceq_grid, dx);
      if (opts.lyapunov) {
        row.V = evaluate_V(w, e.X, ts.m, state.l, lyap);
        row.has_V = true;
      }
      return row;
    };

    if (record) out.series.push_back(make_row());
    if (k == K) break;

    const double q_s = dc.q_s_star - ts.u_held;
    try {
      state = step(state, q_s, sc, p, dc);
      ++steps_taken;
    } catch (const std::runtime_error& ex) {
      out.aborted = true;
      out.abort_reason = ex.what();
      if (!record) out.series.push_back(make_row());
      break;
    }
  }

  out.final_state = state;
  out.metrics = run_metrics(out.series, out.events, p);
  out.metrics.step_count = steps_taken;
  out.metrics.check_count = checks;
  out.metrics.max_abs_ldot = max_abs_ldot;
  out.metrics.ldot_exceeded_v_bar = max_abs_ldot > out.metrics.v_bar;
  out.metrics.max_m = max_m;
  out.metrics.max_cetc_budget = max_cetc_budget;
  out.metrics.max_petc_gamma_nonfiring = max_petc_gamma;
  return out;
}

/// Convenience overload starting from the standard initial data.
inline RunResult run_simulation(const PhysicalParams& p, const ControllerGains& gains,
                                const TriggerParams& tp_in, const SolverConfig& sc,
                                const SimOptions& opts) {
  return run_simulation(make_initial_state(sc, p), p, gains, tp_in, sc, opts);
}

}  // namespace axon

#endif  // AXON_SIM_HPP
