#include "sparse_rl/dp.hpp"

#include <fstream>
#include <stdexcept>

#include "sparse_rl/sparsereg.hpp"

namespace sparse_rl {

double OccupancyTable::total() const {
  double s = 0.0;
  for (const Vec& row : mu)
    for (double v : row) s += v;
  return s;
}

std::vector<Vec> bellman_backup(const SparseLinearMdp& mdp, const Vec& value_next) {
  if (static_cast<int>(value_next.size()) != mdp.num_states())
    throw std::invalid_argument("bellman_backup: value vector length mismatch");
  std::vector<Vec> out(mdp.num_states());
  for (int x = 0; x < mdp.num_states(); ++x) {
    out[x].resize(mdp.num_actions(x));
    for (int a = 0; a < mdp.num_actions(x); ++a) {
      const Vec& row = mdp.transitions[x][a];
      double acc = 0.0;
      for (int xn = 0; xn < mdp.num_states(); ++xn) acc += row[xn] * value_next[xn];
      out[x][a] = mdp.rewards[x][a] + acc;
    }
  }
  return out;
}

ValueSequence optimal_values(const SparseLinearMdp& mdp) {
  const int H = mdp.horizon;
  ValueSequence seq;
  seq.V.assign(H + 1, Vec(mdp.num_states(), 0.0));
  seq.Q.resize(H);
  for (int h = H - 1; h >= 0; --h) {
    seq.Q[h] = bellman_backup(mdp, seq.V[h + 1]);
    for (int x = 0; x < mdp.num_states(); ++x) {
      double best = seq.Q[h][x][0];
      for (int a = 1; a < mdp.num_actions(x); ++a) best = std::max(best, seq.Q[h][x][a]);
      seq.V[h][x] = best;
    }
  }
  return seq;
}

StepPolicy greedy_actions(const ValueSequence& values) {
  StepPolicy policy(values.horizon());
  for (int h = 0; h < values.horizon(); ++h) {
    policy[h].resize(values.Q[h].size());
    for (std::size_t x = 0; x < values.Q[h].size(); ++x) {
      const Vec& q = values.Q[h][x];
      int best = 0;
      for (int a = 1; a < static_cast<int>(q.size()); ++a)
        if (q[a] > q[best]) best = a;  // ties keep the lowest index
      policy[h][x] = best;
    }
  }
  return policy;
}

ValueSequence policy_values(const SparseLinearMdp& mdp, const StationaryPolicy& policy) {
  if (policy.num_states() != mdp.num_states())
    throw std::invalid_argument("policy_values: policy does not cover all states");
  const int H = mdp.horizon;
  ValueSequence seq;
  seq.V.assign(H + 1, Vec(mdp.num_states(), 0.0));
  seq.Q.resize(H);
  for (int h = H - 1; h >= 0; --h) {
    seq.Q[h] = bellman_backup(mdp, seq.V[h + 1]);
    for (int x = 0; x < mdp.num_states(); ++x) {
      double acc = 0.0;
      for (int a = 0; a < mdp.num_actions(x); ++a) acc += policy.rows[x][a] * seq.Q[h][x][a];
      seq.V[h][x] = acc;
    }
  }
  return seq;
}

ValueSequence policy_values(const SparseLinearMdp& mdp, const StepPolicy& policy) {
  if (static_cast<int>(policy.size()) != mdp.horizon)
    throw std::invalid_argument("policy_values: step policy must cover all steps");
  const int H = mdp.horizon;
  ValueSequence seq;
  seq.V.assign(H + 1, Vec(mdp.num_states(), 0.0));
  seq.Q.resize(H);
  for (int h = H - 1; h >= 0; --h) {
    seq.Q[h] = bellman_backup(mdp, seq.V[h + 1]);
    for (int x = 0; x < mdp.num_states(); ++x) seq.V[h][x] = seq.Q[h][x][policy[h][x]];
  }
  return seq;
}

OccupancyTable occupancy_frequencies(const SparseLinearMdp& mdp, const StationaryPolicy& policy) {
  if (policy.num_states() != mdp.num_states())
    throw std::invalid_argument("occupancy_frequencies: policy does not cover all states");
  OccupancyTable table;
  table.mu.resize(mdp.num_states());
  for (int x = 0; x < mdp.num_states(); ++x) table.mu[x].assign(mdp.num_actions(x), 0.0);

  Vec dist = mdp.initial_distribution;
  const double step_weight = 1.0 / mdp.horizon;
  for (int h = 0; h < mdp.horizon; ++h) {
    Vec next(mdp.num_states(), 0.0);
    for (int x = 0; x < mdp.num_states(); ++x) {
      if (dist[x] == 0.0) continue;
      for (int a = 0; a < mdp.num_actions(x); ++a) {
        double mass = dist[x] * policy.rows[x][a];
        if (mass == 0.0) continue;
        table.mu[x][a] += mass * step_weight;
        const Vec& row = mdp.transitions[x][a];
        for (int xn = 0; xn < mdp.num_states(); ++xn) next[xn] += mass * row[xn];
      }
    }
    dist = std::move(next);
  }
  return table;
}

CovarianceReport expected_covariance(const SparseLinearMdp& mdp, const StationaryPolicy& policy) {
  OccupancyTable occ = occupancy_frequencies(mdp, policy);
  const int d = mdp.features.dim;
  CovarianceReport report;
  report.sigma = Matrix(d, d);
  for (int x = 0; x < mdp.num_states(); ++x) {
    for (int a = 0; a < mdp.num_actions(x); ++a) {
      double w = occ.mu[x][a];
      if (w == 0.0) continue;
      const Vec& f = mdp.features.at(x, a);
      for (int i = 0; i < d; ++i) {
        if (f[i] == 0.0) continue;
        double wi = w * f[i];
        for (int j = 0; j < d; ++j) report.sigma(i, j) += wi * f[j];
      }
    }
  }
  report.sigma_min = min_eigenvalue(report.sigma);
  return report;
}

void attach_restricted_interval(CovarianceReport& report, int s, int search_budget,
                                RngStream& rng) {
  ReInterval interval = restricted_eigenvalue_estimate(report.sigma, s, search_budget, rng);
  report.has_restricted_interval = true;
  report.restricted_lower = interval.lower;
  report.restricted_upper = interval.upper;
}

void write_value_csv(const ValueSequence& values, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "h,state,V,Q\n";
  for (int h = 0; h < values.horizon(); ++h) {
    for (std::size_t x = 0; x < values.V[h].size(); ++x) {
      out << h + 1 << "," << x << "," << format_g17(values.V[h][x]);
      for (double q : values.Q[h][x]) out << "," << format_g17(q);
      out << "\n";
    }
  }
}

}  // namespace sparse_rl
