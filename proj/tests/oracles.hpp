#ifndef AXON_TESTS_ORACLES_HPP
#define AXON_TESTS_ORACLES_HPP

// Independent reference implementations used only by the test suite.
// Deliberately written against different types (long double, plain arrays)
// than the library so that agreement is meaningful.

#include <array>
#include <cmath>

#include <Eigen/Dense>

namespace oracle {

using Mat4L = std::array<std::array<long double, 4>, 4>;

inline Mat4L matmul(const Mat4L& A, const Mat4L& B) {
  Mat4L C{};
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 4; ++k) {
      const long double a = A[i][k];
      for (int j = 0; j < 4; ++j) C[i][j] += a * B[k][j];
    }
  return C;
}

inline long double max_abs(const Mat4L& A) {
  long double m = 0;
  for (auto& row : A)
    for (auto v : row) m = std::max(m, std::fabs(v));
  return m;
}

// Taylor series with scaling and squaring in long double arithmetic.
inline Mat4L exp_series(Mat4L A) {
  int s = 0;
  while (max_abs(A) > 0.25L) {
    for (auto& row : A)
      for (auto& v : row) v *= 0.5L;
    ++s;
  }
  Mat4L term{}, sum{};
  for (int i = 0; i < 4; ++i) term[i][i] = sum[i][i] = 1.0L;
  for (int k = 1; k <= 30; ++k) {
    term = matmul(term, A);
    for (auto& row : term)
      for (auto& v : row) v /= k;
    long double tmax = 0;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        sum[i][j] += term[i][j];
        tmax = std::max(tmax, std::fabs(term[i][j]));
      }
    if (tmax < 1e-26L) break;
  }
  for (int i = 0; i < s; ++i) sum = matmul(sum, sum);
  return sum;
}

inline Mat4L from_eigen(const Eigen::Matrix4d& M) {
  Mat4L A{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) A[i][j] = static_cast<long double>(M(i, j));
  return A;
}

inline Eigen::Matrix4d to_eigen(const Mat4L& A) {
  Eigen::Matrix4d M;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) M(i, j) = static_cast<double>(A[i][j]);
  return M;
}

// Richardson-extrapolated central difference (4th order in h).
template <typename F>
double deriv_richardson(F f, double x, double h) {
  const double d1 = (f(x + h) - f(x - h)) / (2.0 * h);
  const double d2 = (f(x + 0.5 * h) - f(x - 0.5 * h)) / h;
  return (4.0 * d2 - d1) / 3.0;
}

}  // namespace oracle

#endif  // AXON_TESTS_ORACLES_HPP
