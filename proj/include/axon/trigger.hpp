#ifndef AXON_TRIGGER_HPP
#define AXON_TRIGGER_HPP

/**
 * @file trigger.hpp
 * @brief Sampled-and-held actuation: deviation tracking, the dynamic trigger
 *        variable, CETC/PETC event rules, dwell times, and event records.
 *
 * Between events the boundary input is frozen (zero-order hold) and the
 * deviation d = U(t) - U_held grows. A dynamic internal variable m, kept
 * negative, filters the deviation energy:
 *
 *   dm/dt = -eta m + rho d^2 - beta1 |X|^2 - beta2 |X|^4 - beta3 |X|^6
 *           - beta4 u(0)^2 - beta5 ||u||^2
 *
 * The continuous-time rule (CETC) fires when d^2 > -gamma m. The periodic
 * rule (PETC) evaluates, only at sampling instants t = n h,
 *
 *   Gamma_p = (q + gamma rho) e^{q h} d^2 - gamma rho d^2 + q gamma m
 *
 * with q = 1 + eta + rho1 and rho1 = 7 (p(0) B)^2, and fires on
 * Gamma_p > 0. Both rules admit a positive minimal dwell time, computed
 * here in two forms (integral and closed-form logarithm) that are reported
 * side by side rather than reconciled.
 */

#include <axon/backstepping.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>

namespace axon {

enum class ControllerMode { continuous, cetc, petc };

// =========================================================================
// Parameters
// =========================================================================

/**
 * Trigger design constants. The raw fields mirror the `trigger` config
 * section; rho1 and q are derived from the gain kernels by
 * derive_trigger_constants and default to zero until then. The stored q is
 * for reporting; evaluators recompute it from eta and rho1 so a stale copy
 * can never disagree with the fields it derives from.
 */
struct TriggerParams {
  double gamma = 1.0;   ///< deviation-vs-m weight in the CETC rule
  double eta = 2.0;     ///< decay rate of m
  double sigma = 0.8;   ///< dwell-time design fraction, in (0, 1)
  double rho = 1.5e-15; ///< deviation energy feed into m
  double beta1 = 2.5e8; ///< |X|^2 weight
  double beta2 = 8e9;   ///< |X|^4 weight
  double beta3 = 1e11;  ///< |X|^6 weight
  double beta4 = 4e11;  ///< u(0)^2 weight
  double beta5 = 4.5e11; ///< ||u||^2 weight
  double m0 = -0.5;     ///< initial internal-variable value, negative
  double h = 5e-4;      ///< PETC sampling period (s)
  /// Degenerate-mode switch for equivalence studies: every PETC check
  /// fires regardless of Gamma_p. Off in normal operation.
  bool force_fire = false;
  double rho1 = 0.0;    ///< derived: 7 (p(0) B)^2
  double q = 0.0;       ///< derived: 1 + eta + rho1

  void validate() const {
    if (!(sigma > 0.0 && sigma < 1.0))
      throw std::invalid_argument("sigma must lie in (0, 1)");
    if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
    if (!(eta > 0.0)) throw std::invalid_argument("eta must be positive");
    if (!(rho > 0.0)) throw std::invalid_argument("rho must be positive");
    if (!(beta1 >= 0.0 && beta2 >= 0.0 && beta3 >= 0.0 && beta4 >= 0.0 &&
          beta5 >= 0.0))
      throw std::invalid_argument("beta weights must be nonnegative");
    if (!(m0 < 0.0)) throw std::invalid_argument("m0 must be negative");
    if (!(h > 0.0)) throw std::invalid_argument("h must be positive");
  }
};

/// rho1 = 7 (p(0) B)^2, the kernel-dependent floor entering q.
inline double compute_rho1(const GainArtifacts& art) {
  const double p0B = eval_p(0.0, art).dot(art.B);
  return 7.0 * p0B * p0B;
}

/// Validates @p tp and fills in the kernel-derived fields rho1 and q.
inline TriggerParams derive_trigger_constants(TriggerParams tp,
                                              const GainArtifacts& art) {
  tp.validate();
  tp.rho1 = compute_rho1(art);
  tp.q = 1.0 + tp.eta + tp.rho1;
  return tp;
}

// =========================================================================
// Dwell times
// =========================================================================

struct DwellTimes {
  double tau_integral = 0.0;
  double tau_closed = 0.0;
};

namespace detail {

template <typename F>
double adaptive_simpson_rec(F&& f, double a, double b, double fa, double fm,
                            double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double flm = f(0.5 * (a + m));
  const double frm = f(0.5 * (m + b));
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol,
                              depth - 1) +
         adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol,
                              depth - 1);
}

template <typename F>
double adaptive_simpson(F&& f, double a, double b, double tol) {
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, 52);
}

}  // namespace detail

/**
 * Minimal inter-event time in both published forms.
 *
 * tau_integral integrates 1/(a1 s^2 + a2 s + a3) over [0, 1] with
 *   a1 = rho sigma gamma,
 *   a2 = 1 + 2 rho1 + (1 - sigma) rho + eta,
 *   a3 = (1 + rho1 + gamma (1 - sigma) rho + eta)(1 - sigma)/sigma,
 * and tau_closed evaluates (1/q) ln(1 + sigma q / ((1 - sigma)(q + gamma
 * rho))). The two use rho where gamma rho respectively appears, so they
 * need not coincide; callers get both.
 */
inline DwellTimes dwell_time(const TriggerParams& tp) {
  if (!(tp.sigma > 0.0 && tp.sigma < 1.0))
    throw std::invalid_argument("sigma must lie in (0, 1)");
  const double q = 1.0 + tp.eta + tp.rho1;
  const double a1 = tp.rho * tp.sigma * tp.gamma;
  const double a2 = 1.0 + 2.0 * tp.rho1 + (1.0 - tp.sigma) * tp.rho + tp.eta;
  const double a3 = (1.0 + tp.rho1 + tp.gamma * (1.0 - tp.sigma) * tp.rho +
                     tp.eta) *
                    (1.0 - tp.sigma) / tp.sigma;
  DwellTimes dw;
  dw.tau_integral = detail::adaptive_simpson(
      [&](double s) { return 1.0 / ((a1 * s + a2) * s + a3); }, 0.0, 1.0,
      1e-14);
  dw.tau_closed =
      std::log(1.0 + tp.sigma * q / ((1.0 - tp.sigma) * (q + tp.gamma * tp.rho))) /
      q;
  return dw;
}

// =========================================================================
// Trigger dynamics and rules
// =========================================================================

/// Right side of the m dynamics; |X|^2 is the squared Euclidean norm.
inline double m_rhs(double m, double d, const Eigen::Vector2d& X,
                    double u_boundary, double u_l2norm,
                    const TriggerParams& tp) {
  const double X2 = X.squaredNorm();
  return -tp.eta * m + tp.rho * d * d - tp.beta1 * X2 - tp.beta2 * X2 * X2 -
         tp.beta3 * X2 * X2 * X2 - tp.beta4 * u_boundary * u_boundary -
         tp.beta5 * u_l2norm * u_l2norm;
}

/// CETC rule: fire iff d^2 > -gamma m (strict).
inline bool cetc_should_trigger(double d, double m, double gamma) {
  return d * d > -gamma * m;
}

/// PETC check value; the event fires iff this is positive at t = n h.
inline double petc_gamma(double d, double m, const TriggerParams& tp) {
  const double q = 1.0 + tp.eta + tp.rho1;
  const double d2 = d * d;
  return (q + tp.gamma * tp.rho) * std::exp(q * tp.h) * d2 -
         tp.gamma * tp.rho * d2 + q * tp.gamma * m;
}

// =========================================================================
// Hold state and event stepping
// =========================================================================

/// Plant quantities consumed by the m dynamics each step.
struct TriggerObservables {
  Eigen::Vector2d X = Eigen::Vector2d::Zero();
  double u_boundary = 0.0;  ///< u(0, t)
  double u_l2norm = 0.0;    ///< ||u(., t)|| on [0, l]
};

struct TriggerState {
  double u_held = 0.0;
  double d = 0.0;
  double m = -0.5;
  double t_last_event = -std::numeric_limits<double>::infinity();
  ControllerMode mode = ControllerMode::continuous;
  /// True once the initial sample at t = 0 has synchronized u_held with the
  /// fresh feedback. That first sample is not logged as an event: the hold
  /// starts aligned in every mode, so event records begin with the first
  /// genuine trigger.
  bool primed = false;
};

inline TriggerState make_trigger_state(const TriggerParams& tp,
                                       ControllerMode mode) {
  TriggerState st;
  st.m = tp.m0;
  st.mode = mode;
  return st;
}

/// One event per line of events.jsonl.
struct EventRecord {
  double t = 0.0;
  double u_held = 0.0;
  /// d^2 + gamma m at a CETC firing, Gamma_p at a PETC firing.
  double trigger_value = 0.0;
  /// PETC: the sampling index n with t = n h. CETC: the solver step index.
  std::int64_t check_index = 0;
};

/**
 * Advances the hold state across one solver step starting at time t.
 *
 * The deviation is evaluated against the incoming fresh feedback, m takes
 * one explicit Euler step, and then the mode's rule decides whether to
 * re-sample. In continuous mode the hold tracks the fresh value exactly and
 * nothing is ever logged. PETC evaluates its rule only when t lands on a
 * multiple of h (the solver step is required to divide h).
 */
inline std::optional<EventRecord> advance_trigger(TriggerState& st,
                                                  double U_fresh, double t,
                                                  double dt,
                                                  const TriggerObservables& obs,
                                                  const TriggerParams& tp) {
  if (!std::isfinite(U_fresh))
    throw std::runtime_error("boundary feedback is not finite");
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");

  if (!st.primed) {
    st.u_held = U_fresh;
    st.d = 0.0;
    st.t_last_event = t;
    st.primed = true;
    st.m += dt * m_rhs(st.m, 0.0, obs.X, obs.u_boundary, obs.u_l2norm, tp);
    return std::nullopt;
  }

  if (st.mode == ControllerMode::continuous) {
    st.u_held = U_fresh;
    st.d = 0.0;
    st.m += dt * m_rhs(st.m, 0.0, obs.X, obs.u_boundary, obs.u_l2norm, tp);
    return std::nullopt;
  }

  const double d_pre = U_fresh - st.u_held;
  st.m += dt * m_rhs(st.m, d_pre, obs.X, obs.u_boundary, obs.u_l2norm, tp);

  bool fire = false;
  EventRecord rec;
  const std::int64_t step = static_cast<std::int64_t>(std::llround(t / dt));
  if (st.mode == ControllerMode::cetc) {
    fire = cetc_should_trigger(d_pre, st.m, tp.gamma);
    rec.trigger_value = d_pre * d_pre + tp.gamma * st.m;
    rec.check_index = step;
  } else {
    const std::int64_t steps_per_h =
        std::max<std::int64_t>(1, std::llround(tp.h / dt));
    if (step % steps_per_h == 0) {
      const double gp = petc_gamma(d_pre, st.m, tp);
      fire = tp.force_fire || gp > 0.0;
      rec.trigger_value = gp;
      rec.check_index = step / steps_per_h;
    }
  }

  if (fire) {
    st.u_held = U_fresh;
    st.d = 0.0;
    st.t_last_event = t;
    rec.t = t;
    rec.u_held = U_fresh;
    return rec;
  }
  st.d = d_pre;
  return std::nullopt;
}

}  // namespace axon

#endif  // AXON_TRIGGER_HPP
