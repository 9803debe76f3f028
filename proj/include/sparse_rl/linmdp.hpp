#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sparse_rl/linalg.hpp"
#include "sparse_rl/rng.hpp"

namespace sparse_rl {

class RngStream;

// Feature map over state-action pairs. Menus may differ per state; a pair
// that is absent from a state's menu has no feature vector.
//
// Invariants enforced at build time: every stored vector has length `dim`
// and sup-norm at most 1.
struct FeatureMap {
  int dim = 0;
  std::vector<std::vector<Vec>> phi;  // phi[x][a]

  static FeatureMap build(int dim, std::vector<std::vector<Vec>> table);

  const Vec& at(int x, int a) const { return phi[x][a]; }
  int num_states() const { return static_cast<int>(phi.size()); }
  int num_actions(int x) const { return static_cast<int>(phi[x].size()); }
};

// Finite episodic MDP whose transition kernel factors through an active
// coordinate subset: P(x'|x,a) = sum_{k in K} phi_k(x,a) psi_k(x').
//
// Transitions are stored both factored (features + psi) and as a
// materialized table; the validator cross-checks the two. Sampling uses the
// table. A pair may be flagged clamped, meaning the factored value leaves
// [0,1] and the table row is the clamped-and-renormalized version of it.
// All fields are immutable after construction by convention.
struct SparseLinearMdp {
  int horizon = 0;
  std::vector<int> actions_per_state;
  FeatureMap features;
  std::vector<int> active_set;  // sorted coordinate indices
  std::vector<Vec> psi;         // psi[i][x'] aligned with active_set[i]
  int sparsity = 0;             // declared bound on |active_set|
  std::vector<Vec> rewards;     // rewards[x][a], values in [0,1]
  std::vector<std::vector<Vec>> transitions;  // transitions[x][a][x']
  Vec initial_distribution;
  std::vector<std::vector<char>> clamped;  // clamped[x][a], may be empty

  int num_states() const { return static_cast<int>(actions_per_state.size()); }
  int num_actions(int x) const { return actions_per_state[x]; }
  int feature_dim() const { return features.dim; }
  bool is_clamped(int x, int a) const {
    return !clamped.empty() && clamped[x][a] != 0;
  }
  // Factored transition probability sum_{k in K} phi_k(x,a) psi_k(x').
  double factored_probability(int x, int a, int x_next) const;
};

// Per-state distribution over that state's action menu.
struct StationaryPolicy {
  std::vector<Vec> rows;

  int num_states() const { return static_cast<int>(rows.size()); }
};

// Deterministic nonstationary policy: one action per (step, state).
using StepPolicy = std::vector<std::vector<int>>;

enum class Phase { explore, exploit, baseline };

const char* phase_name(Phase p);

struct TrajectoryStep {
  int state = 0;
  int action = 0;
  double reward = 0.0;
  int next_state = 0;
};

struct Trajectory {
  long episode = 0;
  Phase phase = Phase::explore;
  std::vector<TrajectoryStep> steps;  // exactly `horizon` entries
};

struct Violation {
  std::string where;
  std::string message;
};

// Violations are data, not failures: an empty report means valid.
struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string to_string() const;
};

ValidationReport validate_mdp(const SparseLinearMdp& mdp);

// Indicator features over state-action pairs; d = numStates * numActions.
FeatureMap tabular_feature_map(int num_states, int num_actions);

// Seeded generator of valid sparse linear MDPs. The kernel factors through
// s anchor distributions; each pair's active coordinates hold convex weights
// over the anchors. When s == d == numStates*numActions this degenerates to
// a random tabular MDP under the indicator feature map. Coordinates outside
// the active set carry seeded values in [-1, 1]: they do not enter the
// kernel, but they keep the learner's regression genuinely d-dimensional.
SparseLinearMdp random_sparse_mdp(int num_states, int num_actions, int d, int s, int horizon,
                                  std::uint64_t seed);

StationaryPolicy uniform_policy(const SparseLinearMdp& mdp);

Trajectory sample_episode(const SparseLinearMdp& mdp, const StationaryPolicy& policy,
                          RngStream& rng, long episode_index = 0,
                          Phase phase = Phase::explore);

Trajectory sample_episode(const SparseLinearMdp& mdp, const StepPolicy& policy, RngStream& rng,
                          long episode_index = 0, Phase phase = Phase::exploit);

// Structured-text instance serialization. Round-trips are lossless for
// 17-significant-digit decimal strings.
std::string instance_to_text(const SparseLinearMdp& mdp);
SparseLinearMdp instance_from_text(const std::string& text);
void save_instance(const SparseLinearMdp& mdp, const std::string& path);
SparseLinearMdp load_instance(const std::string& path);

}  // namespace sparse_rl
