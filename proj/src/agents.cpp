#include "sparse_rl/agents.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace sparse_rl {

namespace {

long ceil_to_multiple(double value, int step) {
  if (value <= 0.0) return step;
  long units = static_cast<long>(std::ceil(value / step));
  return units * static_cast<long>(step);
}

long floor_to_multiple(long value, int step) { return (value / step) * static_cast<long>(step); }

std::uint64_t run_hash(const SparseLinearMdp& mdp, long n, long n1, const LassoConfig& cfg,
                       std::uint64_t seed, const char* tag) {
  std::ostringstream os;
  os << tag << "|" << mdp.num_states() << "|" << mdp.feature_dim() << "|" << mdp.horizon << "|"
     << n << "|" << n1 << "|" << format_g17(cfg.lambda1) << "|" << format_g17(cfg.tol) << "|"
     << cfg.max_sweeps << "|" << format_g17(cfg.delta) << "|" << seed;
  std::string s = os.str();
  return fnv1a64({s.data(), s.size()});
}

}  // namespace

ExplorationBudget choose_exploration_length(long total_episodes, int horizon, int dim,
                                            int sparsity, double c_min, double delta,
                                            BudgetMode mode, long fixed_n1) {
  if (total_episodes <= 0 || horizon <= 0 || dim <= 0 || sparsity <= 0)
    throw std::invalid_argument("choose_exploration_length: inputs must be positive");
  if (delta <= 0.0 || delta >= 1.0)
    throw std::invalid_argument("choose_exploration_length: delta must be in (0,1)");

  ExplorationBudget budget;
  budget.mode = mode;
  const double log_term = std::log(2.0 * dim * horizon / delta);
  double raw = 0.0;
  switch (mode) {
    case BudgetMode::oracle: {
      if (c_min <= 0.0)
        throw std::invalid_argument("choose_exploration_length: oracle mode needs c_min > 0");
      double h4 = std::pow(static_cast<double>(horizon), 4.0);
      double num = 2048.0 * sparsity * sparsity * h4 * static_cast<double>(total_episodes) *
                   static_cast<double>(total_episodes) * log_term / (c_min * c_min);
      raw = std::cbrt(num);
      budget.n1 = ceil_to_multiple(raw, horizon);
      break;
    }
    case BudgetMode::conservative: {
      double h4 = std::pow(static_cast<double>(horizon), 4.0);
      double num = 512.0 * h4 * static_cast<double>(total_episodes) *
                   static_cast<double>(total_episodes) * log_term;
      raw = std::cbrt(num);
      budget.n1 = ceil_to_multiple(raw, horizon);
      break;
    }
    case BudgetMode::fixed: {
      if (fixed_n1 <= 0)
        throw std::invalid_argument("choose_exploration_length: fixed mode needs a length");
      budget.n1 = ceil_to_multiple(static_cast<double>(fixed_n1), horizon);
      break;
    }
  }
  long cap = floor_to_multiple(total_episodes, horizon);
  if (cap < horizon) cap = horizon;  // degenerate tiny-N corner
  if (budget.n1 > cap) {
    budget.n1 = cap;
    budget.capped = true;
  }
  budget.episodes_per_fold = budget.n1 / horizon;
  return budget;
}

double lambda_for(LambdaRule rule, int horizon, int dim, double delta, long fold_samples,
                  long total_episodes) {
  switch (rule) {
    case LambdaRule::fold_size:
      return horizon * std::sqrt(std::log(2.0 * dim / delta) / static_cast<double>(fold_samples));
    case LambdaRule::episode_count:
      return horizon * std::sqrt(std::log(2.0 * dim) / static_cast<double>(total_episodes));
  }
  return 0.0;
}

RunRecord run_online_lasso_fqi(const SparseLinearMdp& mdp, const StationaryPolicy& explore_policy,
                               long total_episodes, const ExplorationBudget& budget,
                               const LassoConfig& cfg, LambdaRule lambda_rule,
                               std::uint64_t seed, bool keep_trajectories) {
  if (budget.n1 > total_episodes)
    throw std::invalid_argument("run_online_lasso_fqi: exploration budget exceeds N");
  if (budget.n1 % mdp.horizon != 0)
    throw std::invalid_argument("run_online_lasso_fqi: N1 must be a multiple of the horizon");

  RunRecord record;
  record.total_episodes = total_episodes;
  record.exploration_episodes = budget.n1;
  record.episodes_per_fold = budget.episodes_per_fold;
  record.seed = seed;
  record.budget_capped = budget.capped;
  record.episodes.reserve(total_episodes);

  LassoConfig fit_cfg = cfg;
  if (fit_cfg.lambda1 <= 0.0) {
    long fold_samples = budget.episodes_per_fold * static_cast<long>(mdp.horizon);
    fit_cfg.lambda1 = lambda_for(lambda_rule, mdp.horizon, mdp.feature_dim(), cfg.delta,
                                 fold_samples, total_episodes);
  }
  record.config_hash = run_hash(mdp, total_episodes, budget.n1, fit_cfg, seed, "lasso-fqi");

  ValueSequence optimal = optimal_values(mdp);
  ValueSequence explore_values = policy_values(mdp, explore_policy);

  RngStream rng = RngStream::keyed({seed, 0x657463ULL});
  std::vector<Trajectory> exploration;
  exploration.reserve(budget.n1);
  double cumulative = 0.0;
  for (long n = 0; n < budget.n1; ++n) {
    Trajectory traj = sample_episode(mdp, explore_policy, rng, n, Phase::explore);
    int x1 = traj.steps.front().state;
    double regret = optimal.V[0][x1] - explore_values.V[0][x1];
    cumulative += regret;
    record.episodes.push_back({x1, Phase::explore, regret, cumulative});
    exploration.push_back(std::move(traj));
  }

  if (keep_trajectories) record.trajectories = exploration;

  EpisodeBatch folds = partition_folds(std::move(exploration), mdp.horizon);
  MdpView view = MdpView::of(mdp);
  record.weights = lasso_fqi(folds, view, fit_cfg);
  record.lasso_converged = record.weights.all_converged();

  StepPolicy committed = greedy_policy(record.weights, view);
  ValueSequence committed_values = policy_values(mdp, committed);
  for (long n = budget.n1; n < total_episodes; ++n) {
    Trajectory traj = sample_episode(mdp, committed, rng, n, Phase::exploit);
    int x1 = traj.steps.front().state;
    double regret = optimal.V[0][x1] - committed_values.V[0][x1];
    cumulative += regret;
    record.episodes.push_back({x1, Phase::exploit, regret, cumulative});
    if (keep_trajectories) record.trajectories.push_back(std::move(traj));
  }
  return record;
}

namespace {

// Ridge counterpart of lasso_fqi: identical fold structure and targets, with
// the l1 penalty replaced by lambda2 * ||w||_2^2.
WeightStack ridge_fqi(const EpisodeBatch& folds, const MdpView& view, double lambda2) {
  const int H = view.horizon;
  const int d = view.features->dim;
  WeightStack stack;
  stack.w.assign(H + 1, Vec(d, 0.0));
  stack.converged.assign(H, 1);
  const double hi = static_cast<double>(H);
  for (int h = H - 1; h >= 0; --h) {
    auto [begin, end] = folds.fold_range(h);
    Matrix gram(d, d);
    Vec b(d, 0.0);
    long n = 0;
    for (int e = begin; e < end; ++e) {
      for (const TrajectoryStep& step : folds.episodes[e].steps) {
        const Vec& f = view.features->at(step.state, step.action);
        double y = 0.0;
        if (h + 1 < H) {
          y = state_value(view, stack.w[h + 1], step.next_state);
          y = std::min(hi, std::max(0.0, y));
        }
        ++n;
        for (int i = 0; i < d; ++i) {
          if (f[i] == 0.0) continue;
          b[i] += f[i] * y;
          for (int j = i; j < d; ++j) gram(i, j) += f[i] * f[j];
        }
      }
    }
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < i; ++j) gram(i, j) = gram(j, i);
    // Normal equations of (1/n)||y - Xw||^2 + lambda2 ||w||^2.
    double shift = std::max(lambda2, 1e-12) * static_cast<double>(n);
    for (int i = 0; i < d; ++i) gram(i, i) += shift;
    stack.w[h] = cholesky_solve(gram, b);
  }
  return stack;
}

}  // namespace

RunRecord run_baseline(const SparseLinearMdp& mdp, BaselineKind kind, long total_episodes,
                       const BaselineParams& params, std::uint64_t seed) {
  RunRecord record;
  record.total_episodes = total_episodes;
  record.seed = seed;
  LassoConfig hash_cfg;
  hash_cfg.lambda1 = params.lambda2;

  ValueSequence optimal = optimal_values(mdp);
  RngStream rng = RngStream::keyed({seed, 0x62617365ULL});
  double cumulative = 0.0;

  switch (kind) {
    case BaselineKind::uniform_random: {
      record.config_hash = run_hash(mdp, total_episodes, 0, hash_cfg, seed, "uniform");
      StationaryPolicy uniform = uniform_policy(mdp);
      ValueSequence values = policy_values(mdp, uniform);
      for (long n = 0; n < total_episodes; ++n) {
        Trajectory traj = sample_episode(mdp, uniform, rng, n, Phase::baseline);
        int x1 = traj.steps.front().state;
        double regret = optimal.V[0][x1] - values.V[0][x1];
        cumulative += regret;
        record.episodes.push_back({x1, Phase::baseline, regret, cumulative});
        if (params.keep_trajectories) record.trajectories.push_back(std::move(traj));
      }
      break;
    }
    case BaselineKind::oracle_optimal: {
      record.config_hash = run_hash(mdp, total_episodes, 0, hash_cfg, seed, "oracle");
      StepPolicy greedy = greedy_actions(optimal);
      ValueSequence values = policy_values(mdp, greedy);
      for (long n = 0; n < total_episodes; ++n) {
        Trajectory traj = sample_episode(mdp, greedy, rng, n, Phase::baseline);
        int x1 = traj.steps.front().state;
        double regret = optimal.V[0][x1] - values.V[0][x1];
        cumulative += regret;
        record.episodes.push_back({x1, Phase::baseline, regret, cumulative});
        if (params.keep_trajectories) record.trajectories.push_back(std::move(traj));
      }
      break;
    }
    case BaselineKind::ridge_fqi_etc: {
      if (!params.explore_policy)
        throw std::invalid_argument("run_baseline: ridge variant needs an exploration policy");
      long n1 = params.n1;
      if (n1 <= 0 || n1 % mdp.horizon != 0 || n1 > total_episodes)
        throw std::invalid_argument("run_baseline: ridge variant needs a valid N1");
      record.exploration_episodes = n1;
      record.episodes_per_fold = n1 / mdp.horizon;
      record.config_hash = run_hash(mdp, total_episodes, n1, hash_cfg, seed, "ridge");
      ValueSequence explore_values = policy_values(mdp, *params.explore_policy);
      std::vector<Trajectory> exploration;
      exploration.reserve(n1);
      for (long n = 0; n < n1; ++n) {
        Trajectory traj = sample_episode(mdp, *params.explore_policy, rng, n, Phase::explore);
        int x1 = traj.steps.front().state;
        double regret = optimal.V[0][x1] - explore_values.V[0][x1];
        cumulative += regret;
        record.episodes.push_back({x1, Phase::explore, regret, cumulative});
        exploration.push_back(std::move(traj));
      }
      EpisodeBatch folds = partition_folds(std::move(exploration), mdp.horizon);
      MdpView view = MdpView::of(mdp);
      record.weights = ridge_fqi(folds, view, params.lambda2);
      StepPolicy committed = greedy_policy(record.weights, view);
      ValueSequence committed_values = policy_values(mdp, committed);
      for (long n = n1; n < total_episodes; ++n) {
        Trajectory traj = sample_episode(mdp, committed, rng, n, Phase::exploit);
        int x1 = traj.steps.front().state;
        double regret = optimal.V[0][x1] - committed_values.V[0][x1];
        cumulative += regret;
        record.episodes.push_back({x1, Phase::exploit, regret, cumulative});
        if (params.keep_trajectories) record.trajectories.push_back(std::move(traj));
      }
      break;
    }
  }
  return record;
}

void write_run_csv(const RunRecord& run, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "episode,phase,initial_state,episode_regret,cumulative_regret\n";
  for (std::size_t n = 0; n < run.episodes.size(); ++n) {
    const EpisodeLog& e = run.episodes[n];
    out << n + 1 << "," << phase_name(e.phase) << "," << e.initial_state << ","
        << format_g17(e.regret) << "," << format_g17(e.cumulative) << "\n";
  }
}

void write_run_manifest(const RunRecord& run, const std::string& path) {
  nlohmann::json j;
  j["N"] = run.total_episodes;
  j["N1"] = run.exploration_episodes;
  j["episodes_per_fold"] = run.episodes_per_fold;
  j["seed"] = run.seed;
  j["config_hash"] = run.config_hash;
  j["lasso_converged"] = run.lasso_converged;
  j["budget_capped"] = run.budget_capped;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace sparse_rl
