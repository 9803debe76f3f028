#pragma once

#include <string>
#include <vector>

#include "sparse_rl/linmdp.hpp"
#include "sparse_rl/sparsereg.hpp"

namespace sparse_rl {

// The slice of an MDP an agent may see: rewards, features, action menus.
// Transition structure stays hidden.
struct MdpView {
  int horizon = 0;
  const std::vector<int>* actions_per_state = nullptr;
  const FeatureMap* features = nullptr;
  const std::vector<Vec>* rewards = nullptr;

  static MdpView of(const SparseLinearMdp& mdp) {
    return {mdp.horizon, &mdp.actions_per_state, &mdp.features, &mdp.rewards};
  }
  int num_states() const { return static_cast<int>(actions_per_state->size()); }
  int num_actions(int x) const { return (*actions_per_state)[x]; }
};

// Exploration episodes split into H disjoint folds of R episodes each, in
// arrival order; fold h feeds only the step-h regression.
struct EpisodeBatch {
  std::vector<Trajectory> episodes;
  int horizon = 0;
  int episodes_per_fold = 0;  // R

  std::pair<int, int> fold_range(int h) const {  // [begin, end) episode indices, h in 0..H-1
    return {h * episodes_per_fold, (h + 1) * episodes_per_fold};
  }
};

// Per-step regression weights; w[H] is pinned to zero.
struct WeightStack {
  std::vector<Vec> w;           // size H+1
  std::vector<char> converged;  // size H, per-step fit flags

  int horizon() const { return static_cast<int>(converged.size()); }
  bool all_converged() const;
};

EpisodeBatch partition_folds(std::vector<Trajectory> episodes, int horizon);

// Q_w(x,a) = r(x,a) + phi(x,a)^T w: the weights model the expected next-state
// value, with the known reward added on top.
double q_value(const MdpView& view, const Vec& w, int x, int a);
double state_value(const MdpView& view, const Vec& w, int x);

// Backward pass h = H..1. Step-h regression targets are the clamped greedy
// values of the successor states under the step-(h+1) weights (zero at the
// terminal boundary), clamped to [0, H]; each step fits by lasso on its own
// fold, warm-started from the next step's weights.
WeightStack lasso_fqi(const EpisodeBatch& folds, const MdpView& view, const LassoConfig& cfg);

// Greedy nonstationary policy from a weight stack; ties to the lowest index.
StepPolicy greedy_policy(const WeightStack& weights, const MdpView& view);

// Factorization-aware regression target: w_k = sum_x' clamp(value, 0, H) *
// psi_k(x') on the active set, zero elsewhere. Test oracle; agents never
// call it.
Vec oracle_bellman_weights(const SparseLinearMdp& mdp, const Vec& value_fn);

void write_weight_stack_csv(const WeightStack& weights, const std::string& path);
void write_weight_stack_manifest(const WeightStack& weights, const std::string& path);

}  // namespace sparse_rl
