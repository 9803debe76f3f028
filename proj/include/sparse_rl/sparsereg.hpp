#pragma once

#include <string>
#include <vector>

#include "sparse_rl/linalg.hpp"
#include "sparse_rl/rng.hpp"

namespace sparse_rl {

struct RegressionDataset {
  int dim = 0;
  std::vector<Vec> rows;  // design rows, sup-norm at most 1 each
  Vec targets;

  int size() const { return static_cast<int>(rows.size()); }
};

struct LassoConfig {
  double lambda1 = 0.0;
  double tol = 1e-8;      // max absolute coordinate change per sweep
  int max_sweeps = 10000;
  double delta = 0.1;     // confidence level feeding the lambda rules
};

struct LassoResult {
  Vec w;
  bool converged = false;
  int sweeps = 0;
  std::vector<double> objective_history;  // one entry per completed sweep
};

// sign(v) * max(|v| - t, 0)
double soft_threshold(double v, double t);

// Minimizes (1/n) sum_i (y_i - phi_i^T w)^2 + lambda1 * ||w||_1 by cyclic
// coordinate descent in coordinate order 1..d, starting from zero unless a
// warm start is supplied. Coordinates whose column is identically zero stay
// at zero. A dataset large relative to d is handled through precomputed
// Gram statistics; the iterates solve the same problem either way.
LassoResult lasso_fit(const RegressionDataset& data, const LassoConfig& cfg,
                      const Vec* warm_start = nullptr);

double lasso_objective(const RegressionDataset& data, double lambda1, const Vec& w);

// (2/n) X^T (y - X w), the stationarity residual behind the optimality
// certificate.
Vec lasso_gradient(const RegressionDataset& data, const Vec& w);

// All eigenvalues of a symmetric matrix by cyclic Jacobi rotations,
// ascending. Rejects asymmetric input.
Vec symmetric_eigenvalues(Matrix m);

double min_eigenvalue(const Matrix& m);

struct ReInterval {
  double lower = 0.0;
  double upper = 0.0;
};

// Interval estimate of the restricted minimum eigenvalue
//   min_{|S| <= s} min { <b, M b> / ||b_S||_2^2 : ||b_{S^c}||_1 <= 3 ||b_S||_1 }.
// The lower endpoint is the smallest eigenvalue of M, which certifiably
// bounds the cone value from below. The upper endpoint probes the cone by
// randomized support sampling plus local refinement; for d <= 12 and s <= 3
// every support is additionally enumerated (disable with enumerate_small to
// probe the randomized route alone). Per-support probe values are memoized,
// so large budgets cost roughly one refinement per distinct support.
ReInterval restricted_eigenvalue_estimate(const Matrix& m, int s, int search_budget,
                                          RngStream& rng, bool enumerate_small = true);

// CSV with header y,phi_1..phi_d.
RegressionDataset load_dataset_csv(const std::string& path);

}  // namespace sparse_rl
