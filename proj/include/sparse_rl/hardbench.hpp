#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sparse_rl/dp.hpp"
#include "sparse_rl/linmdp.hpp"

namespace sparse_rl {

// Needle-in-a-haystack episodic family. Five states: a start state whose d
// actions route deterministically to either an informative or an
// uninformative bandit state (only one action finds the informative one),
// and absorbing good/bad states. Transition probabilities out of the bandit
// states are linear in an unknown parameter vector theta over the first
// `ambient_dim` feature coordinates; the full feature dimension is
// 2*ambient_dim + 3.
struct HardInstance {
  SparseLinearMdp mdp;
  int ambient_dim = 0;   // d
  int level = 0;         // s: 1 + number of nonzero leading theta entries
  int needle = 0;        // k in 1..d; 0 means the null variant (no informative route)
  double epsilon = 0.0;
  int action_cap = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<signed char>> a2_patterns;  // uninformative-state menu, values -1/0/1
  std::vector<std::vector<signed char>> a3_patterns;  // informative-state menu, values -1/1
  Vec theta;
  bool is_alternative = false;
  std::vector<signed char> z_tilde;  // set on alternatives
  Vec theta_tilde;                   // set on alternatives

  // State indices.
  static constexpr int kStart = 0;
  static constexpr int kInformative = 1;
  static constexpr int kUninformative = 2;
  static constexpr int kGood = 3;
  static constexpr int kBad = 4;

  const Vec& effective_theta() const { return is_alternative ? theta_tilde : theta; }
};

// Builds the full instance as a valid SparseLinearMdp. Action menus at the
// bandit states are deterministic seeded subsets of their pattern families,
// capped at action_cap; the uninformative menu always contains the
// highest-value pattern, and the informative menu is organized as sign-flip
// batches of orthogonal rows so that uniform play over it has an identity
// feature covariance on the theta block. Uninformative-state patterns whose
// raw success probability leaves [0,1] are clamped and flagged. k = 0 gives
// the null variant in the same code path (every start action routes to the
// uninformative state).
HardInstance build_hard_instance(int d, int s, int k, double epsilon, int action_cap,
                                 std::uint64_t seed, int horizon);

// Start state: take the needle action; bandit states: uniform over the menu;
// absorbing states: the single self-loop action. Rejects the null variant.
StationaryPolicy exploratory_policy_for(const HardInstance& instance);

struct ConditioningReport {
  CovarianceReport full;          // covariance over all 2d+3 coordinates
  double theta_block_sigma_min = 0.0;  // smallest eigenvalue on coordinates 0..d-1
};

// Conditioning of the exploratory policy's data. The start-state action
// coordinates are unreachable under this policy by construction, so the
// full-dimension spectrum always touches zero; the quantity of interest is
// the conditioning on the theta block, where the unknown parameter lives.
ConditioningReport exploratory_conditioning(const HardInstance& instance);

// Argmin over candidate perturbation directions of the visitation-weighted
// squared feature overlap sum_a w_a <pattern_a, z>^2. Candidates have
// support inside the zero run of theta (coordinates s-1..d-2), entries in
// {-1,0,1} and l1-norm s-1; enumerated fully for d <= 12, otherwise a seeded
// sample of action_cap candidates. Ties break to the lexicographically
// smallest vector.
std::vector<signed char> select_z_tilde(const HardInstance& instance, const Vec& a2_weights);

// Twin instance with theta replaced by theta + 2*epsilon*z everywhere theta
// enters the transition probabilities. The twin's uninformative menu gains
// the action matching z's sign pattern when it is not already present.
HardInstance build_alternative_instance(const HardInstance& instance,
                                        const std::vector<signed char>& z);

struct HardDiagnostics {
  long tau = 0;           // first episode taking the needle action, clamped at N
  bool event_d = false;   // low-visitation event indicator
  double visitation_sum = 0.0;
  Vec a2_visit_counts;    // per uninformative-menu action, episodes before tau
};

HardDiagnostics hard_run_diagnostics(const std::vector<Trajectory>& runs,
                                     const HardInstance& instance, long total_episodes);

struct KlReport {
  double total = 0.0;
  double bound = 0.0;  // 8 eps^2 (s-1)^2
  bool infinite = false;
  int excluded_clamped = 0;
  Vec per_action;

  // The ceiling is guaranteed for alternatives selected against the trace
  // that generated the weights; arbitrary (alternative, trace) pairs can sit
  // above it.
  bool within_bound() const { return !infinite && total <= bound + 1e-9; }
};

// Exact trajectory-law divergence between the two instances up to the
// stopping time, as a weighted sum of per-action Bernoulli divergences over
// the uninformative state's menu. Actions clamped in either instance are
// excluded; a probability that is zero or one in exactly one instance sets
// the infinite flag.
KlReport stepwise_kl(const HardInstance& base, const HardInstance& alternative,
                     const Vec& a2_weights);

// Exhaustive search for the best-conditioned policy among candidates and
// two-candidate mixtures on a grid. Exact covariance evaluation per
// candidate; intended for small instances. In a live online run this search
// is unavailable: it reads the transition kernel.
std::pair<StationaryPolicy, double> find_exploratory_policy_bruteforce(
    const SparseLinearMdp& mdp, const std::vector<StationaryPolicy>& candidates,
    int mixture_grid);

void save_hard_instance(const HardInstance& instance, const std::string& path);

}  // namespace sparse_rl
