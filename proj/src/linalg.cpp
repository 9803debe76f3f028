#include "sparse_rl/linalg.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace sparse_rl {

double dot(std::span<const double> x, std::span<const double> y) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
  return acc;
}

double max_abs(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::fabs(v));
  return m;
}

double l1_norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += std::fabs(v);
  return s;
}

double l2_norm_sq(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

double max_asymmetry(const Matrix& m) {
  double worst = 0.0;
  for (int i = 0; i < m.rows; ++i)
    for (int j = i + 1; j < m.cols; ++j) worst = std::max(worst, std::fabs(m(i, j) - m(j, i)));
  return worst;
}

Vec cholesky_solve(Matrix a, Vec b) {
  const int n = a.rows;
  if (a.cols != n || static_cast<int>(b.size()) != n)
    throw std::invalid_argument("cholesky_solve: dimension mismatch");
  // In-place lower Cholesky.
  for (int j = 0; j < n; ++j) {
    double diag = a(j, j);
    for (int k = 0; k < j; ++k) diag -= a(j, k) * a(j, k);
    if (diag <= 0.0) throw std::invalid_argument("cholesky_solve: matrix is not positive definite");
    diag = std::sqrt(diag);
    a(j, j) = diag;
    for (int i = j + 1; i < n; ++i) {
      double v = a(i, j);
      for (int k = 0; k < j; ++k) v -= a(i, k) * a(j, k);
      a(i, j) = v / diag;
    }
  }
  // Forward then backward substitution.
  for (int i = 0; i < n; ++i) {
    double v = b[i];
    for (int k = 0; k < i; ++k) v -= a(i, k) * b[k];
    b[i] = v / a(i, i);
  }
  for (int i = n - 1; i >= 0; --i) {
    double v = b[i];
    for (int k = i + 1; k < n; ++k) v -= a(k, i) * b[k];
    b[i] = v / a(i, i);
  }
  return b;
}

Vec matvec(const Matrix& m, std::span<const double> x) {
  Vec out(m.rows, 0.0);
  for (int i = 0; i < m.rows; ++i) {
    double acc = 0.0;
    for (int j = 0; j < m.cols; ++j) acc += m(i, j) * x[j];
    out[i] = acc;
  }
  return out;
}

Matrix principal_submatrix(const Matrix& m, std::span<const int> idx) {
  Matrix out(static_cast<int>(idx.size()), static_cast<int>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = 0; j < idx.size(); ++j)
      out(static_cast<int>(i), static_cast<int>(j)) = m(idx[i], idx[j]);
  return out;
}

std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

}  // namespace sparse_rl
