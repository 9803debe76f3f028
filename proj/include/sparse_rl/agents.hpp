#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sparse_rl/dp.hpp"
#include "sparse_rl/fqi.hpp"
#include "sparse_rl/linmdp.hpp"

namespace sparse_rl {

enum class BudgetMode { oracle, conservative, fixed };

struct ExplorationBudget {
  BudgetMode mode = BudgetMode::fixed;
  long n1 = 0;                 // exploration episodes, a multiple of the horizon
  long episodes_per_fold = 0;  // n1 / H
  bool capped = false;         // the formula exceeded N and was cut back
};

// Exploration-length rules. Oracle mode evaluates
//   (2048 s^2 H^4 N^2 log(2dH/delta) / c_min^2)^(1/3),
// conservative mode drops the s and c_min knowledge,
//   (512 H^4 N^2 log(2dH/delta))^(1/3),
// and fixed mode takes the caller's episode count. All modes round up to a
// multiple of H and cap at the largest such multiple not exceeding N (the
// cap is reported, not an error: small-N high-dimensional corners
// legitimately exceed it).
ExplorationBudget choose_exploration_length(long total_episodes, int horizon, int dim,
                                            int sparsity, double c_min, double delta,
                                            BudgetMode mode, long fixed_n1 = 0);

// Both published forms of the regularization level; fold_size is the default
// (its sample count is what the per-step regression actually sees).
enum class LambdaRule { fold_size, episode_count };

double lambda_for(LambdaRule rule, int horizon, int dim, double delta, long fold_samples,
                  long total_episodes);

struct EpisodeLog {
  int initial_state = 0;
  Phase phase = Phase::explore;
  double regret = 0.0;
  double cumulative = 0.0;
};

struct RunRecord {
  std::vector<EpisodeLog> episodes;
  WeightStack weights;
  long total_episodes = 0;  // N
  long exploration_episodes = 0;  // N1
  long episodes_per_fold = 0;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  bool lasso_converged = true;
  bool budget_capped = false;
  std::vector<Trajectory> trajectories;  // kept only on request

  double cumulative_regret() const {
    return episodes.empty() ? 0.0 : episodes.back().cumulative;
  }
};

// Explore-then-commit online run. Episodes 1..N1 follow the supplied
// exploratory policy; the logged transitions are folded and fed to lasso_fqi;
// the remaining episodes follow the frozen greedy policy. Per-episode regret
// is exact: optimal values and the executed policy's values both come from
// the dp module, never from sampled returns.
RunRecord run_online_lasso_fqi(const SparseLinearMdp& mdp, const StationaryPolicy& explore_policy,
                               long total_episodes, const ExplorationBudget& budget,
                               const LassoConfig& cfg, LambdaRule lambda_rule,
                               std::uint64_t seed, bool keep_trajectories = false);

enum class BaselineKind { uniform_random, ridge_fqi_etc, oracle_optimal };

struct BaselineParams {
  long n1 = 0;                                   // ridge variant only
  double lambda2 = 0.0;                          // ridge penalty level
  const StationaryPolicy* explore_policy = nullptr;  // ridge variant only
  bool keep_trajectories = false;
};

RunRecord run_baseline(const SparseLinearMdp& mdp, BaselineKind kind, long total_episodes,
                       const BaselineParams& params, std::uint64_t seed);

void write_run_csv(const RunRecord& run, const std::string& path);
void write_run_manifest(const RunRecord& run, const std::string& path);

}  // namespace sparse_rl
