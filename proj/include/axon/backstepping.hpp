#ifndef AXON_BACKSTEPPING_HPP
#define AXON_BACKSTEPPING_HPP

/**
 * @file backstepping.hpp
 * @brief Gain kernels and the continuous boundary feedback law.
 *
 * The backstepping transformation maps the error system to a stable target
 * system. Its kernels are closed-form in a 4x4 matrix exponential:
 *
 *   phi(x)^T = [(H - eps)^T, K^T - (1/D) (H - eps)^T B H^T] e^{N1 x} [I; 0]
 *   k(x,y)   = -(1/D) phi(x - y)^T B
 *   p(x)     = phi'(-x)^T + phi(-x)^T
 *   U(t)     = -(1/D) Int_0^l p(x) B u(x,t) dx + p(l) X(t)
 */

#include <complex>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "axon/linalg.hpp"
#include "axon/model.hpp"

namespace axon {

// =========================================================================
// Gains
// =========================================================================

/// Feedback gains K = [k1, k2] and target boundary offset eps.
struct ControllerGains {
  double k1 = -0.001;
  double k2 = 3.0e13;
  Eigen::Vector2d epsilon = Eigen::Vector2d::Zero();
};

/// Stability report for the closed-loop lumped system A1 + B K^T.
struct GainReport {
  bool k1_inequality = false;  ///< k1 > a1_tilde / beta
  bool k2_inequality = false;  ///< k2 > a3_tilde / beta
  bool spectral = false;       ///< both eigenvalues strictly in the left half-plane
  std::complex<double> eig1, eig2;
  double k1_margin = 0.0;
  double k2_margin = 0.0;
  bool hurwitz() const { return k1_inequality && k2_inequality && spectral; }
};

inline GainReport validate_gains(const ControllerGains& g, const DerivedConstants& dc) {
  GainReport r;
  r.k1_margin = g.k1 - dc.a1_tilde / dc.beta;
  r.k2_margin = g.k2 - dc.a3_tilde / dc.beta;
  r.k1_inequality = r.k1_margin > 0.0;
  r.k2_inequality = r.k2_margin > 0.0;
  Eigen::Matrix2d acl = dc.A1 + dc.B * Eigen::RowVector2d(g.k1, g.k2);
  Eigen::ComplexEigenSolver<Eigen::Matrix2d> es(acl);
  r.eig1 = es.eigenvalues()(0);
  r.eig2 = es.eigenvalues()(1);
  r.spectral = r.eig1.real() < 0.0 && r.eig2.real() < 0.0;
  return r;
}

// =========================================================================
// Kernel artifacts
// =========================================================================

/// Immutable kernel data: the block matrix N1 and the prefix row of phi.
struct GainArtifacts {
  Eigen::Matrix4d N1;
  Eigen::RowVector4d prefix;  ///< [phi(0)^T, phi'(0)^T]
  double D = 0.0;
  Eigen::Vector2d B;
};

/**
 * Assembles N1 = [0, (1/D)(g I + A + (a/D) B H^T); I, (1/D)(a I - B H^T)].
 *
 * The blocks encode the second-order kernel condition
 *   D phi''(s)^T = phi(s)^T (A + g I + (a/D) B H^T) + phi'(s)^T (a I - B H^T),
 * obtained by pushing the transformation through the error dynamics and
 * collecting the X coefficients; the minus sign on B H^T in the phi' block
 * is load-bearing, as the closed loop is unstable with it flipped.
 */
inline Eigen::Matrix4d build_N1(const DerivedConstants& dc, const PhysicalParams& p) {
  const double D = p.D_m2_per_s, a = p.a_m_per_s, g = p.g_per_s;
  const Eigen::Matrix2d BHt = dc.B * dc.H.transpose();
  const Eigen::Matrix2d M1 = (g * Eigen::Matrix2d::Identity() + dc.A + (a / D) * BHt) / D;
  const Eigen::Matrix2d M2 = (a * Eigen::Matrix2d::Identity() - BHt) / D;
  Eigen::Matrix4d N1 = Eigen::Matrix4d::Zero();
  N1.block<2, 2>(0, 2) = M1;
  N1.block<2, 2>(2, 0) = Eigen::Matrix2d::Identity();
  N1.block<2, 2>(2, 2) = M2;
  return N1;
}

inline GainArtifacts build_artifacts(const ControllerGains& g, const DerivedConstants& dc,
                                     const PhysicalParams& p) {
  GainArtifacts art;
  art.N1 = build_N1(dc, p);
  art.D = p.D_m2_per_s;
  art.B = dc.B;
  // phi'(0) = K - (1/D)((H - eps)^T B) H, so that the finite part of the
  // target system is exactly (A + B K^T) X + B w_x(l).
  const double HeB = (dc.H - g.epsilon).dot(dc.B);
  art.prefix(0) = dc.H(0) - g.epsilon(0);
  art.prefix(1) = dc.H(1) - g.epsilon(1);
  art.prefix(2) = g.k1 - (HeB / p.D_m2_per_s) * dc.H(0);
  art.prefix(3) = g.k2 - (HeB / p.D_m2_per_s) * dc.H(1);
  return art;
}

// =========================================================================
// Kernel evaluation
// =========================================================================

inline Eigen::RowVector2d eval_phi(double x, const GainArtifacts& art) {
  const Eigen::Matrix4d E = mat_exp4(art.N1 * x);
  const Eigen::RowVector4d r = art.prefix * E;
  return Eigen::RowVector2d(r(0), r(1));
}

inline Eigen::RowVector2d eval_phi_prime(double x, const GainArtifacts& art) {
  const Eigen::Matrix4d E = mat_exp4(art.N1 * x);
  const Eigen::RowVector4d r = (art.prefix * art.N1) * E;
  return Eigen::RowVector2d(r(0), r(1));
}

/// p(x) = phi'(-x)^T + phi(-x)^T.
inline Eigen::RowVector2d eval_p(double x, const GainArtifacts& art) {
  return eval_phi_prime(-x, art) + eval_phi(-x, art);
}

/// Volterra kernel k(x,y) = -(1/D) phi(x - y)^T B.
inline double eval_k(double x, double y, const GainArtifacts& art) {
  return -eval_phi(x - y, art).dot(art.B) / art.D;
}

// =========================================================================
// Grid tables and the feedback law
// =========================================================================

/**
 * Kernel samples on the uniform grid x_j = j*dx, j = 0..n. Node values come
 * from one matrix exponential T = e^{-N1 dx} and cumulative row-vector
 * products (the exponential of a fixed generator is multiplicative over
 * offsets, so every node value is an exact evaluation, not an interpolant).
 */
struct KernelTable {
  std::vector<double> pB;     ///< p(x_j) . B
  Eigen::RowVector2d p_end;   ///< p(x_n) row
};

inline KernelTable build_kernel_table(double dx, int n, const GainArtifacts& art) {
  KernelTable kt;
  kt.pB.resize(static_cast<size_t>(n) + 1);
  const Eigen::Matrix4d T = mat_exp4(art.N1 * (-dx));
  Eigen::RowVector4d r = art.prefix * (art.N1 + Eigen::Matrix4d::Identity());
  for (int j = 0; j <= n; ++j) {
    kt.pB[static_cast<size_t>(j)] = r(0) * art.B(0) + r(1) * art.B(1);
    if (j == n) kt.p_end = Eigen::RowVector2d(r(0), r(1));
    r = r * T;
  }
  return kt;
}

/**
 * Continuous feedback U = -(1/D) Int p(x) B u(x) dx + p(l) X with composite
 * trapezoid quadrature on the sample grid of @p u (uniform on [0, l]).
 */
inline double control_law(const std::vector<double>& u, const Eigen::Vector2d& X, double l,
                          const GainArtifacts& art) {
  if (!(l > 0.0)) throw std::invalid_argument("control_law requires l > 0");
  const int n = static_cast<int>(u.size()) - 1;
  const double dx = l / n;
  const KernelTable kt = build_kernel_table(dx, n, art);
  double s = 0.5 * (kt.pB.front() * u.front() + kt.pB.back() * u.back());
  for (int j = 1; j < n; ++j) s += kt.pB[static_cast<size_t>(j)] * u[static_cast<size_t>(j)];
  return -(s * dx) / art.D + kt.p_end.dot(X);
}

}  // namespace axon

#endif  // AXON_BACKSTEPPING_HPP
