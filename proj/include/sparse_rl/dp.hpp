#pragma once

#include <string>
#include <vector>

#include "sparse_rl/linalg.hpp"
#include "sparse_rl/linmdp.hpp"

namespace sparse_rl {

// Exact finite-horizon dynamic programming. Everything here propagates full
// distributions; Monte Carlo appears only in tests, as an oracle. All
// functions are pure and safe to call concurrently.

// Values indexed V[h][x] for h = 0..H (V[H] is the terminal zero vector) and
// Q[h][x][a] for h = 0..H-1.
struct ValueSequence {
  std::vector<Vec> V;
  std::vector<std::vector<Vec>> Q;

  int horizon() const { return static_cast<int>(Q.size()); }
};

// Average per-episode visitation probability of each pair.
struct OccupancyTable {
  std::vector<Vec> mu;  // mu[x][a]

  double total() const;
};

struct CovarianceReport {
  Matrix sigma;
  double sigma_min = 0.0;
  // Filled by sparsereg's restricted-eigenvalue probe when requested.
  bool has_restricted_interval = false;
  double restricted_lower = 0.0;
  double restricted_upper = 0.0;
};

// One application of the optimality backup: out[x][a] = r(x,a) + sum_x' P(x'|x,a) value_next[x'].
std::vector<Vec> bellman_backup(const SparseLinearMdp& mdp, const Vec& value_next);

// Backward induction with max over actions; argmax ties resolve to the
// lowest action index everywhere in this project.
ValueSequence optimal_values(const SparseLinearMdp& mdp);

StepPolicy greedy_actions(const ValueSequence& values);

ValueSequence policy_values(const SparseLinearMdp& mdp, const StationaryPolicy& policy);
ValueSequence policy_values(const SparseLinearMdp& mdp, const StepPolicy& policy);

OccupancyTable occupancy_frequencies(const SparseLinearMdp& mdp, const StationaryPolicy& policy);

// Uncentered feature covariance under the policy's occupancy, with its
// smallest eigenvalue.
CovarianceReport expected_covariance(const SparseLinearMdp& mdp, const StationaryPolicy& policy);

// Fills the report's restricted-eigenvalue interval for support size s.
void attach_restricted_interval(CovarianceReport& report, int s, int search_budget,
                                RngStream& rng);

void write_value_csv(const ValueSequence& values, const std::string& path);

}  // namespace sparse_rl
