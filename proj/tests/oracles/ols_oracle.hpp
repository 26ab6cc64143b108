#pragma once

// Least squares through the explicit normal equations X'X b = X'y, solved by
// Gaussian elimination with partial pivoting on plain row-major vectors.

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;  // row-major, rows x cols

inline std::vector<double> solve_linear(Matrix A, std::vector<double> b) {
  const std::size_t n = A.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
    if (A[piv][col] == 0.0) throw std::runtime_error("singular system");
    std::swap(A[piv], A[col]);
    std::swap(b[piv], b[col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = A[r][col] / A[col][col];
      for (std::size_t c = col; c < n; ++c) A[r][c] -= f * A[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= A[i][c] * x[c];
    x[i] = s / A[i][i];
  }
  return x;
}

inline std::vector<double> normal_equations(const Matrix& X, const std::vector<double>& y) {
  const std::size_t n = X.size(), k = X.front().size();
  Matrix XtX(k, std::vector<double>(k, 0.0));
  std::vector<double> Xty(k, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t i = 0; i < k; ++i) {
      Xty[i] += X[r][i] * y[r];
      for (std::size_t j = 0; j < k; ++j) XtX[i][j] += X[r][i] * X[r][j];
    }
  return solve_linear(XtX, Xty);
}

// Diagonal of (X'X)^-1, one unit-vector solve per column.
inline std::vector<double> inverse_gram_diagonal(const Matrix& X) {
  const std::size_t n = X.size(), k = X.front().size();
  Matrix XtX(k, std::vector<double>(k, 0.0));
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) XtX[i][j] += X[r][i] * X[r][j];
  std::vector<double> diag(k);
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<double> e(k, 0.0);
    e[i] = 1.0;
    diag[i] = solve_linear(XtX, e)[i];
  }
  return diag;
}

}  // namespace oracle
