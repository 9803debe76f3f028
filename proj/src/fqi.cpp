#include "sparse_rl/fqi.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace sparse_rl {

bool WeightStack::all_converged() const {
  for (char c : converged)
    if (!c) return false;
  return true;
}

EpisodeBatch partition_folds(std::vector<Trajectory> episodes, int horizon) {
  if (horizon <= 0) throw std::invalid_argument("partition_folds: horizon must be positive");
  if (episodes.empty() || static_cast<int>(episodes.size()) % horizon != 0)
    throw std::invalid_argument(
        "partition_folds: episode count must be a positive multiple of the horizon");
  EpisodeBatch batch;
  batch.horizon = horizon;
  batch.episodes_per_fold = static_cast<int>(episodes.size()) / horizon;
  batch.episodes = std::move(episodes);
  return batch;
}

double q_value(const MdpView& view, const Vec& w, int x, int a) {
  return (*view.rewards)[x][a] + dot(view.features->at(x, a), w);
}

double state_value(const MdpView& view, const Vec& w, int x) {
  double best = q_value(view, w, x, 0);
  for (int a = 1; a < view.num_actions(x); ++a) best = std::max(best, q_value(view, w, x, a));
  return best;
}

WeightStack lasso_fqi(const EpisodeBatch& folds, const MdpView& view, const LassoConfig& cfg) {
  const int H = view.horizon;
  if (folds.horizon != H) throw std::invalid_argument("lasso_fqi: fold horizon mismatch");
  const int d = view.features->dim;

  WeightStack stack;
  stack.w.assign(H + 1, Vec(d, 0.0));
  stack.converged.assign(H, 1);

  const double hi = static_cast<double>(H);
  for (int h = H - 1; h >= 0; --h) {
    auto [begin, end] = folds.fold_range(h);
    RegressionDataset data;
    data.dim = d;
    data.rows.reserve(static_cast<std::size_t>(end - begin) * H);
    data.targets.reserve(data.rows.capacity());
    for (int e = begin; e < end; ++e) {
      for (const TrajectoryStep& step : folds.episodes[e].steps) {
        data.rows.push_back(view.features->at(step.state, step.action));
        // Terminal boundary: the value beyond the last step is zero.
        double y = 0.0;
        if (h + 1 < H) {
          y = state_value(view, stack.w[h + 1], step.next_state);
          y = std::min(hi, std::max(0.0, y));
        }
        data.targets.push_back(y);
      }
    }
    LassoResult fit = lasso_fit(data, cfg, &stack.w[h + 1]);
    stack.w[h] = std::move(fit.w);
    stack.converged[h] = fit.converged ? 1 : 0;
  }
  return stack;
}

StepPolicy greedy_policy(const WeightStack& weights, const MdpView& view) {
  const int H = view.horizon;
  if (weights.horizon() != H) throw std::invalid_argument("greedy_policy: weight stack mismatch");
  StepPolicy policy(H);
  for (int h = 0; h < H; ++h) {
    policy[h].resize(view.num_states());
    for (int x = 0; x < view.num_states(); ++x) {
      int best = 0;
      double best_q = q_value(view, weights.w[h], x, 0);
      for (int a = 1; a < view.num_actions(x); ++a) {
        double q = q_value(view, weights.w[h], x, a);
        if (q > best_q) {
          best_q = q;
          best = a;
        }
      }
      policy[h][x] = best;
    }
  }
  return policy;
}

Vec oracle_bellman_weights(const SparseLinearMdp& mdp, const Vec& value_fn) {
  if (static_cast<int>(value_fn.size()) != mdp.num_states())
    throw std::invalid_argument("oracle_bellman_weights: value vector length mismatch");
  Vec w(mdp.features.dim, 0.0);
  const double hi = static_cast<double>(mdp.horizon);
  for (std::size_t i = 0; i < mdp.active_set.size(); ++i) {
    double acc = 0.0;
    for (int xn = 0; xn < mdp.num_states(); ++xn) {
      double v = std::min(hi, std::max(0.0, value_fn[xn]));
      acc += v * mdp.psi[i][xn];
    }
    w[mdp.active_set[i]] = acc;
  }
  return w;
}

void write_weight_stack_csv(const WeightStack& weights, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "h,coordinate,value\n";
  for (int h = 0; h < weights.horizon(); ++h)
    for (std::size_t j = 0; j < weights.w[h].size(); ++j)
      out << h + 1 << "," << j << "," << format_g17(weights.w[h][j]) << "\n";
}

void write_weight_stack_manifest(const WeightStack& weights, const std::string& path) {
  nlohmann::json j;
  j["horizon"] = weights.horizon();
  j["converged_per_step"] = std::vector<bool>(weights.converged.begin(), weights.converged.end());
  j["all_converged"] = weights.all_converged();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace sparse_rl
