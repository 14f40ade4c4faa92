#ifndef AXON_LINALG_HPP
#define AXON_LINALG_HPP

// Small numerical kernels shared across the library: dense matrix
// exponential, tridiagonal solve, and grid quadrature.

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

namespace axon {

/**
 * Matrix exponential via scaling-and-squaring (Pade core). Intended for the
 * small dense matrices used by the gain kernels; rejects n > 8 and
 * non-finite entries.
 */
inline Eigen::MatrixXd mat_exp(const Eigen::MatrixXd& M) {
  if (M.rows() != M.cols()) throw std::invalid_argument("mat_exp requires a square matrix");
  if (M.rows() > 8) throw std::invalid_argument("mat_exp supports n <= 8");
  if (!M.allFinite()) throw std::invalid_argument("mat_exp rejects non-finite entries");
  return M.exp();
}

/// Fixed-size variant used in the per-step hot path.
inline Eigen::Matrix4d mat_exp4(const Eigen::Matrix4d& M) {
  if (!M.allFinite()) throw std::invalid_argument("mat_exp rejects non-finite entries");
  return M.exp();
}

/**
 * Reference matrix exponential: scaled Taylor series summed to convergence.
 * Slower than mat_exp; used by the verification report to cross-check it.
 */
inline Eigen::MatrixXd mat_exp_series(const Eigen::MatrixXd& M) {
  const double norm = M.cwiseAbs().rowwise().sum().maxCoeff();
  int s = 0;
  while (norm / std::pow(2.0, s) > 0.5) ++s;
  const Eigen::MatrixXd A = M / std::pow(2.0, s);
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(M.rows(), M.cols());
  Eigen::MatrixXd sum = term;
  for (int k = 1; k <= 40; ++k) {
    term = (term * A) / static_cast<double>(k);
    sum += term;
    if (term.cwiseAbs().maxCoeff() < 1e-300) break;
  }
  for (int i = 0; i < s; ++i) sum = sum * sum;
  return sum;
}

/**
 * Thomas algorithm for a tridiagonal system. Diagonals are overwritten;
 * the solution replaces @p d. @p a is the sub-diagonal (a[0] unused),
 * @p c the super-diagonal (c[n-1] unused).
 */
inline void thomas_solve(std::vector<double>& a, std::vector<double>& b,
                         std::vector<double>& c, std::vector<double>& d) {
  const size_t n = b.size();
  for (size_t i = 1; i < n; ++i) {
    const double w = a[i] / b[i - 1];
    b[i] -= w * c[i - 1];
    d[i] -= w * d[i - 1];
  }
  d[n - 1] /= b[n - 1];
  for (size_t i = n - 1; i-- > 0;) d[i] = (d[i] - c[i] * d[i + 1]) / b[i];
}

/// Composite trapezoid of samples f_j at uniform spacing dx.
inline double trapezoid(const std::vector<double>& f, double dx) {
  double s = 0.5 * (f.front() + f.back());
  for (size_t j = 1; j + 1 < f.size(); ++j) s += f[j];
  return s * dx;
}

/// L2 norm sqrt(integral of f^2) by composite trapezoid.
inline double l2_norm(const std::vector<double>& f, double dx) {
  double s = 0.5 * (f.front() * f.front() + f.back() * f.back());
  for (size_t j = 1; j + 1 < f.size(); ++j) s += f[j] * f[j];
  return std::sqrt(s * dx);
}

}  // namespace axon

#endif  // AXON_LINALG_HPP
