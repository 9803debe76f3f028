#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace sparse_rl {

using Vec = std::vector<double>;

// Dense row-major matrix, sized for desk-scale problems (d up to a few
// hundred). Heavy numerics on it live in sparsereg (eigenvalues) and here
// (Cholesky solve).
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

  double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }

  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
};

double dot(std::span<const double> x, std::span<const double> y);
double max_abs(std::span<const double> x);
double l1_norm(std::span<const double> x);
double l2_norm_sq(std::span<const double> x);

double max_asymmetry(const Matrix& m);

// Solves A x = b for symmetric positive definite A. Throws on non-SPD input.
Vec cholesky_solve(Matrix a, Vec b);

// Matrix-vector product.
Vec matvec(const Matrix& m, std::span<const double> x);

// Principal submatrix on the given index set.
Matrix principal_submatrix(const Matrix& m, std::span<const int> idx);

std::string format_g17(double v);

}  // namespace sparse_rl
