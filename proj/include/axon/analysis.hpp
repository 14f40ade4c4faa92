#ifndef AXON_ANALYSIS_HPP
#define AXON_ANALYSIS_HPP

/**
 * @file analysis.hpp
 * @brief Lyapunov matrices, the forward backstepping transformation, and the
 *        V monitor evaluated on runs.
 *
 * The closed-loop finite part A_cl = A + B K^T admits Lyapunov certificates
 * P solving A_cl^T P + P A_cl = -Q. The monitor functional
 *
 *   V = d1 (1/2) Int_0^l w^2 dx + X^T (d2 P1 + (1/2) P2) X - m
 *
 * is evaluated on the transformed profile w(x) = u(x) - Int_x^l k(x,y) u(y)
 * dy - phi(x-l)^T X. V is a linear-regime diagnostic: the exact functional
 * uses a nonlinear remainder shift of w that has no computable form here,
 * so V is reported, never asserted against a theorem.
 */

#include <axon/backstepping.hpp>
#include <axon/linalg.hpp>

#include <stdexcept>
#include <vector>

namespace axon {

// =========================================================================
// Lyapunov matrices
// =========================================================================

/**
 * Solves A_cl^T P + P A_cl = -Q for symmetric P through the 2x2 closed
 * form
 *
 *   P = [ (A_cl - tr(A_cl) I)^T Q (A_cl - tr(A_cl) I) + det(A_cl) Q ]
 *       / ( -2 tr(A_cl) det(A_cl) ),
 *
 * a consequence of Cayley-Hamilton. The vectorized 3-unknown linear
 * system is unusable here: closed loops of interest have solution entries
 * spanning thirteen orders of magnitude, which makes that system more
 * ill-conditioned than double precision can absorb, while the closed form
 * only adds same-sign terms. Requires A_cl Hurwitz (trace/determinant
 * test) and symmetric Q; the scaled residual of the accepted solution
 * must clear 1e-10, where the scale is the magnitude of the terms
 * entering the equation (the raw residual floats at machine precision
 * times ||P|| ||A_cl||, which for stiff closed loops is far above the
 * raw tolerance).
 */
inline Eigen::Matrix2d solve_lyapunov_2x2(const Eigen::Matrix2d& A_cl,
                                          const Eigen::Matrix2d& Q) {
  const double tau = A_cl.trace();
  const double delta = A_cl.determinant();
  if (!(tau < 0.0 && delta > 0.0))
    throw std::invalid_argument("closed-loop matrix must be Hurwitz");
  if ((Q - Q.transpose()).cwiseAbs().maxCoeff() >
      1e-12 * (1.0 + Q.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("Q must be symmetric");
  const Eigen::Matrix2d S = A_cl - tau * Eigen::Matrix2d::Identity();
  Eigen::Matrix2d P =
      (S.transpose() * Q * S + delta * Q) / (-2.0 * tau * delta);
  P(1, 0) = P(0, 1);
  const Eigen::Matrix2d res = A_cl.transpose() * P + P * A_cl + Q;
  const double scale = (A_cl.transpose() * P).norm() + (P * A_cl).norm() +
                       Q.norm();
  if (!(res.norm() <= 1e-10 * std::max(1.0, scale)))
    throw std::runtime_error("lyapunov residual exceeds tolerance");
  return P;
}

/// Certificate bundle for the V monitor.
struct LyapunovSetup {
  Eigen::Matrix2d P1 = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d P2 = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d Q1 = Eigen::Matrix2d::Identity();
  Eigen::Matrix2d Q2 = Eigen::Matrix2d::Identity();
  double d1 = 1.0;
  double d2 = 1.0;
};

/**
 * Builds the monitor certificates with Q1 = Q2 = I and unit weights. The
 * published lower-bound formulas for d1, d2 need constants this model does
 * not expose, so the weights stay at their diagnostic defaults.
 */
inline LyapunovSetup make_lyapunov_setup(const ControllerGains& g,
                                         const DerivedConstants& dc) {
  LyapunovSetup ls;
  const Eigen::Matrix2d A_cl =
      dc.A + dc.B * Eigen::RowVector2d(g.k1, g.k2);
  ls.P1 = solve_lyapunov_2x2(A_cl, ls.Q1);
  ls.P2 = solve_lyapunov_2x2(A_cl, ls.Q2);
  return ls;
}

// =========================================================================
// Forward transformation and the V functional
// =========================================================================

/**
 * Maps the error profile to target coordinates,
 *   w(x_j) = u(x_j) - Int_{x_j}^{l} k(x_j, y) u(y) dy - phi(x_j - l)^T X,
 * with composite trapezoid on the tail integral. Both kernel factors
 * depend only on node differences, so one semigroup chain per call yields
 * every needed value exactly.
 */
inline std::vector<double> transform_to_target(const std::vector<double>& u,
                                               const Eigen::Vector2d& X,
                                               double l,
                                               const GainArtifacts& art) {
  if (u.size() < 2) throw std::invalid_argument("profile needs at least two samples");
  if (!(l > 0.0)) throw std::invalid_argument("transform requires l > 0");
  const int n = static_cast<int>(u.size()) - 1;
  const double dx = l / n;

  // phi(-m dx) rows and k offsets k(x, x + m dx) = -(1/D) phi(-m dx)^T B.
  std::vector<Eigen::RowVector2d> phi(static_cast<size_t>(n) + 1);
  std::vector<double> kneg(static_cast<size_t>(n) + 1);
  const Eigen::Matrix4d T = mat_exp4(art.N1 * (-dx));
  Eigen::RowVector4d r = art.prefix;
  for (int m = 0; m <= n; ++m) {
    phi[static_cast<size_t>(m)] = Eigen::RowVector2d(r(0), r(1));
    kneg[static_cast<size_t>(m)] =
        -(r(0) * art.B(0) + r(1) * art.B(1)) / art.D;
    r = r * T;
  }

  std::vector<double> w(u.size());
  for (int j = 0; j <= n; ++j) {
    double integral = 0.0;
    if (j < n) {
      double s = 0.5 * (kneg[0] * u[static_cast<size_t>(j)] +
                        kneg[static_cast<size_t>(n - j)] * u.back());
      for (int i = j + 1; i < n; ++i)
        s += kneg[static_cast<size_t>(i - j)] * u[static_cast<size_t>(i)];
      integral = s * dx;
    }
    w[static_cast<size_t>(j)] = u[static_cast<size_t>(j)] - integral -
                                phi[static_cast<size_t>(n - j)].dot(X);
  }
  return w;
}

/// V = d1 (1/2) ||w||^2 + X^T (d2 P1 + (1/2) P2) X - m on a uniform
/// [0, l] sample grid.
inline double evaluate_V(const std::vector<double>& w,
                         const Eigen::Vector2d& X, double m, double l,
                         const LyapunovSetup& ls) {
  if (w.size() < 2) throw std::invalid_argument("profile needs at least two samples");
  const double dx = l / (static_cast<double>(w.size()) - 1.0);
  const double nrm = l2_norm(w, dx);
  const Eigen::Matrix2d W = ls.d2 * ls.P1 + 0.5 * ls.P2;
  return ls.d1 * 0.5 * nrm * nrm + X.dot(W * X) - m;
}

}  // namespace axon

#endif  // AXON_ANALYSIS_HPP
