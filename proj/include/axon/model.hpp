#ifndef AXON_MODEL_HPP
#define AXON_MODEL_HPP

/**
 * @file model.hpp
 * @brief Physical model of tubulin-driven axon growth: parameters, derived
 *        constants, the steady state, and reference-error coordinates.
 *
 * The axon occupies the interval [0, l(t)]. Tubulin concentration c(x,t)
 * obeys a diffusion-advection-degradation equation; the growth cone at the
 * moving tip carries a lumped concentration c_c(t), and the length grows in
 * proportion to the cone's excess concentration:
 *
 *   c_t = D c_xx - a c_x - g c                                on (0, l(t))
 *   c_x(0,t) + c(0,t) = -q_s(t)                               soma actuation
 *   c(l(t),t) = c_c(t)                                        tip coupling
 *   dc_c/dt = a_cone c_c - (D/l_c) c_x(l,t) - (r_g/l_c) c_c^2 + c_inf r~_g
 *   dl/dt   = r_g (c_c - c_inf)
 *
 * All quantities are SI: concentrations mol/m^3, lengths m, times s.
 */

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace axon {

// =========================================================================
// Parameters
// =========================================================================

/// Biological and geometric constants plus simulation targets.
struct PhysicalParams {
  double D_m2_per_s = 1.0e-11;         ///< axial diffusivity D [m^2/s]
  double a_m_per_s = 1.0e-8;           ///< active transport velocity a [m/s]
  double g_per_s = 5.0e-7;             ///< degradation rate g [1/s]
  double r_g_m4_per_mol_s = 1.783e-5;  ///< lumped growth rate r_g [m^4/(mol s)]
  double r_g_tilde_per_s = 0.053;      ///< microtubule assembly rate r~_g [1/s]
  double c_inf_mol_per_m3 = 0.0119;    ///< equilibrium cone concentration [mol/m^3]
  double l_c_m = 4.0e-6;               ///< growth-cone compartment length l_c [m]
  double l_s_m = 12.0e-6;              ///< target axon length l_s [m]
  double l_0_m = 1.0e-6;               ///< initial axon length l(0) [m]
  double c0_scale = 1.5;               ///< initial profile multiplier of c_inf
  double gamma_bio = 1.0e4;            ///< tabulated biological constant; not read by any equation
};

/// Throws std::invalid_argument when a parameter violates its sign/order rule.
inline void validate(const PhysicalParams& p) {
  if (!(p.D_m2_per_s > 0.0)) throw std::invalid_argument("diffusivity D must be positive");
  if (!(p.g_per_s > 0.0)) throw std::invalid_argument("degradation rate g must be positive");
  if (!(p.r_g_m4_per_mol_s > 0.0)) throw std::invalid_argument("growth rate r_g must be positive");
  if (!(p.c_inf_mol_per_m3 > 0.0)) throw std::invalid_argument("equilibrium concentration c_inf must be positive");
  if (!(p.l_c_m > 0.0)) throw std::invalid_argument("cone length l_c must be positive");
  if (!(p.l_0_m > 0.0 && p.l_0_m < p.l_s_m))
    throw std::invalid_argument("initial length must satisfy 0 < l_0 < l_s");
}

// =========================================================================
// Derived constants
// =========================================================================

/**
 * Closed-form quantities derived from PhysicalParams.
 *
 * a1_tilde is the cone coefficient of the error system (and of the matrices
 * A, A1 below); a_cone is the coefficient of c_c in the plant's cone mass
 * balance. They differ by exactly 2*kappa*c_inf, which is what makes
 * (c_eq, c_inf, l_s) an exact equilibrium of the plant while the error
 * system keeps its stated coefficients.
 */
struct DerivedConstants {
  double lambda_plus = 0.0;   ///< steady-state exponent [1/m]
  double lambda_minus = 0.0;  ///< steady-state exponent [1/m]
  double K_plus = 0.0;        ///< steady-state weight
  double K_minus = 0.0;       ///< steady-state weight
  double beta = 0.0;          ///< D/l_c [m/s]
  double kappa = 0.0;         ///< r_g/l_c [m^3/(mol s)]
  double a1_tilde = 0.0;      ///< (a - r_g c_inf)/l_c - g - r~_g [1/s]
  double a_cone = 0.0;        ///< (a + r_g c_inf)/l_c - g - r~_g [1/s]
  double a2_tilde = 0.0;      ///< c_inf (K+ lam+^2 + K- lam-^2)
  double a3_tilde = 0.0;      ///< (a^2 + D g - a g l_c)/D^2
  double q_s_star = 0.0;      ///< steady boundary input
  Eigen::Vector2d H;          ///< boundary coupling [1, -c_eq'(l_s)]
  Eigen::Vector2d B;          ///< input vector [-beta, 0]
  Eigen::Matrix2d A;          ///< cone/length system matrix
  Eigen::Matrix2d A1;         ///< linearized system matrix
};

/// Populates every derived field from closed forms. Pure; rejects degenerate inputs.
inline DerivedConstants derive_constants(const PhysicalParams& p) {
  validate(p);
  const double D = p.D_m2_per_s, a = p.a_m_per_s, g = p.g_per_s;
  const double rg = p.r_g_m4_per_mol_s, rgt = p.r_g_tilde_per_s;
  const double ci = p.c_inf_mol_per_m3, lc = p.l_c_m, ls = p.l_s_m;

  DerivedConstants dc;
  const double s = std::sqrt(a * a + 4.0 * D * g);
  dc.lambda_plus = (a + s) / (2.0 * D);
  dc.lambda_minus = (a - s) / (2.0 * D);
  dc.K_plus = 0.5 + (a - 2.0 * g * lc) / (2.0 * s);
  dc.K_minus = 0.5 - (a - 2.0 * g * lc) / (2.0 * s);
  dc.beta = D / lc;
  dc.kappa = rg / lc;
  dc.a1_tilde = (a - rg * ci) / lc - g - rgt;
  dc.a_cone = (a + rg * ci) / lc - g - rgt;
  dc.a2_tilde = ci * (dc.K_plus * dc.lambda_plus * dc.lambda_plus +
                      dc.K_minus * dc.lambda_minus * dc.lambda_minus);
  dc.a3_tilde = (a * a + D * g - a * g * lc) / (D * D);
  dc.q_s_star = -ci * (dc.K_plus * (1.0 + dc.lambda_plus) * std::exp(-dc.lambda_plus * ls) +
                       dc.K_minus * (1.0 + dc.lambda_minus) * std::exp(-dc.lambda_minus * ls));
  dc.H << 1.0, -(a - g * lc) * ci / D;
  dc.B << -dc.beta, 0.0;
  dc.A << dc.a1_tilde, -dc.beta * dc.a2_tilde, rg, 0.0;
  dc.A1 << dc.a1_tilde, dc.a3_tilde, rg, 0.0;
  return dc;
}

// =========================================================================
// Steady state
// =========================================================================

/**
 * @brief Steady concentration profile c_eq(x).
 * @param x position [m]; values outside [0, l_s] evaluate the same closed
 *          form (analytic extension used by the error coordinates when the
 *          axon is shorter or longer than l_s).
 */
inline double steady_state_profile(double x, const DerivedConstants& dc,
                                   const PhysicalParams& p) {
  const double dxl = x - p.l_s_m;
  return p.c_inf_mol_per_m3 * (dc.K_plus * std::exp(dc.lambda_plus * dxl) +
                               dc.K_minus * std::exp(dc.lambda_minus * dxl));
}

/// Spatial derivative c_eq'(x) of the steady profile.
inline double steady_state_profile_deriv(double x, const DerivedConstants& dc,
                                         const PhysicalParams& p) {
  const double dxl = x - p.l_s_m;
  return p.c_inf_mol_per_m3 *
         (dc.K_plus * dc.lambda_plus * std::exp(dc.lambda_plus * dxl) +
          dc.K_minus * dc.lambda_minus * std::exp(dc.lambda_minus * dxl));
}

/// Steady boundary input q_s* holding the profile at length l_s.
inline double steady_state_input(const DerivedConstants& dc, const PhysicalParams&) {
  return dc.q_s_star;
}

/**
 * Samples c_eq on the uniform grid x_j = j*(l/n), j = 0..n, by multiplicative
 * recurrence on the two exponentials (two std::exp calls total).
 */
inline void steady_state_profile_grid(double l, int n, const DerivedConstants& dc,
                                      const PhysicalParams& p, std::vector<double>& out) {
  out.resize(static_cast<size_t>(n) + 1);
  const double dx = l / n;
  const double ci = p.c_inf_mol_per_m3;
  const double rp = std::exp(dc.lambda_plus * dx);
  const double rm = std::exp(dc.lambda_minus * dx);
  double ep = std::exp(-dc.lambda_plus * p.l_s_m);
  double em = std::exp(-dc.lambda_minus * p.l_s_m);
  for (int j = 0; j <= n; ++j) {
    out[static_cast<size_t>(j)] = ci * (dc.K_plus * ep + dc.K_minus * em);
    ep *= rp;
    em *= rm;
  }
}

// =========================================================================
// Reference-error coordinates
// =========================================================================

/// Error state: concentration deviation samples u and lumped deviation X.
struct ErrorCoords {
  std::vector<double> u;  ///< u(x_j) = c(x_j) - c_eq(x_j) on the [0, l] grid
  Eigen::Vector2d X;      ///< [c_c - c_inf, l - l_s]
};

/**
 * Maps plant state to error coordinates. @p c_profile holds samples at
 * x_j = j*(l/n) including both endpoints.
 */
inline ErrorCoords to_error_coords(const std::vector<double>& c_profile, double c_c,
                                   double l, const DerivedConstants& dc,
                                   const PhysicalParams& p) {
  ErrorCoords e;
  const int n = static_cast<int>(c_profile.size()) - 1;
  steady_state_profile_grid(l, n, dc, p, e.u);
  for (size_t j = 0; j < c_profile.size(); ++j) e.u[j] = c_profile[j] - e.u[j];
  e.X << c_c - p.c_inf_mol_per_m3, l - p.l_s_m;
  return e;
}

/// Inverse of to_error_coords: reconstructs (c_profile, c_c, l).
inline void from_error_coords(const ErrorCoords& e, const DerivedConstants& dc,
                              const PhysicalParams& p, std::vector<double>& c_profile,
                              double& c_c, double& l) {
  c_c = e.X(0) + p.c_inf_mol_per_m3;
  l = e.X(1) + p.l_s_m;
  const int n = static_cast<int>(e.u.size()) - 1;
  steady_state_profile_grid(l, n, dc, p, c_profile);
  for (size_t j = 0; j < e.u.size(); ++j) c_profile[j] += e.u[j];
}

// =========================================================================
// Nonlinear error-system terms
// =========================================================================

namespace detail {
inline void check_exponent_range(double z2, const DerivedConstants& dc) {
  if (std::abs(dc.lambda_plus * z2) > 700.0 || std::abs(dc.lambda_minus * z2) > 700.0)
    throw std::overflow_error("length deviation too large: steady-profile exponent overflow");
}
}  // namespace detail

/// Boundary remainder h~(z2) = c_inf (1 - K+ e^{lam+ z2} - K- e^{lam- z2}); h~(0) = 0.
inline double h_tilde(double z2, const DerivedConstants& dc, const PhysicalParams& p) {
  detail::check_exponent_range(z2, dc);
  return p.c_inf_mol_per_m3 * (1.0 - dc.K_plus * std::exp(dc.lambda_plus * z2) -
                               dc.K_minus * std::exp(dc.lambda_minus * z2));
}

/**
 * Cone remainder f1(z2) = a2~ z2 - c_eq'(l_s + z2) + c_eq'(l_s); satisfies
 * f1(0) = 0 and f1'(0) = 0 by the definitions of c_eq'(l_s) and a2~.
 */
inline double f1(double z2, const DerivedConstants& dc, const PhysicalParams& p) {
  detail::check_exponent_range(z2, dc);
  const double ci = p.c_inf_mol_per_m3;
  return dc.a2_tilde * z2 -
         ci * (dc.K_plus * dc.lambda_plus * std::exp(dc.lambda_plus * z2) +
               dc.K_minus * dc.lambda_minus * std::exp(dc.lambda_minus * z2)) +
         ci * (p.a_m_per_s - p.g_per_s * p.l_c_m) / p.D_m2_per_s;
}

/// Nonlinear terms of the error system: f(X) (2-vector) and boundary value h(X).
struct NonlinearTerms {
  Eigen::Vector2d f;
  double h = 0.0;
};

inline NonlinearTerms nonlinear_ode_terms(const Eigen::Vector2d& X,
                                          const DerivedConstants& dc,
                                          const PhysicalParams& p) {
  NonlinearTerms out;
  out.f << -dc.kappa * X(0) * X(0) + dc.beta * f1(X(1), dc, p), 0.0;
  out.h = X(0) + h_tilde(X(1), dc, p);
  return out;
}

// =========================================================================
// Plant right-hand sides (lumped states)
// =========================================================================

/// Cone mass balance dc_c/dt given the tip concentration gradient c_x(l,t).
inline double cone_ode_rhs(double c_c, double c_x_tip, const DerivedConstants& dc,
                           const PhysicalParams& p) {
  return dc.a_cone * c_c - dc.beta * c_x_tip - dc.kappa * c_c * c_c +
         p.c_inf_mol_per_m3 * p.r_g_tilde_per_s;
}

/// Growth law dl/dt = r_g (c_c - c_inf).
inline double growth_rhs(double c_c, const PhysicalParams& p) {
  return p.r_g_m4_per_mol_s * (c_c - p.c_inf_mol_per_m3);
}

}  // namespace axon

#endif  // AXON_MODEL_HPP
