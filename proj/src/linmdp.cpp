#include "sparse_rl/linmdp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace sparse_rl {

namespace {

constexpr double kRowSumTol = 1e-9;
constexpr double kProbTol = 1e-9;
constexpr double kInitTol = 1e-12;

std::string pair_tag(int x, int a) {
  return "(x=" + std::to_string(x) + ",a=" + std::to_string(a) + ")";
}

}  // namespace

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::explore: return "explore";
    case Phase::exploit: return "exploit";
    case Phase::baseline: return "baseline";
  }
  return "?";
}

FeatureMap FeatureMap::build(int dim, std::vector<std::vector<Vec>> table) {
  if (dim <= 0) throw std::invalid_argument("FeatureMap: dimension must be positive");
  for (std::size_t x = 0; x < table.size(); ++x) {
    for (std::size_t a = 0; a < table[x].size(); ++a) {
      const Vec& v = table[x][a];
      if (static_cast<int>(v.size()) != dim)
        throw std::invalid_argument("FeatureMap: vector length mismatch at " +
                                    pair_tag(static_cast<int>(x), static_cast<int>(a)));
      if (max_abs(v) > 1.0 + 1e-15)
        throw std::invalid_argument("FeatureMap: sup-norm bound violated at " +
                                    pair_tag(static_cast<int>(x), static_cast<int>(a)));
    }
  }
  FeatureMap fm;
  fm.dim = dim;
  fm.phi = std::move(table);
  return fm;
}

double SparseLinearMdp::factored_probability(int x, int a, int x_next) const {
  const Vec& f = features.at(x, a);
  double p = 0.0;
  for (std::size_t i = 0; i < active_set.size(); ++i) p += f[active_set[i]] * psi[i][x_next];
  return p;
}

std::string ValidationReport::to_string() const {
  if (violations.empty()) return "OK";
  std::ostringstream os;
  for (const Violation& v : violations) os << v.where << ": " << v.message << "\n";
  return os.str();
}

ValidationReport validate_mdp(const SparseLinearMdp& mdp) {
  ValidationReport report;
  auto flag = [&](const std::string& where, const std::string& msg) {
    report.violations.push_back({where, msg});
  };

  const int n_states = mdp.num_states();
  if (mdp.horizon <= 0) flag("horizon", "must be positive");
  if (static_cast<int>(mdp.features.phi.size()) != n_states)
    flag("features", "state count mismatch");
  if (static_cast<int>(mdp.active_set.size()) > mdp.sparsity)
    flag("active_set", "size " + std::to_string(mdp.active_set.size()) +
                           " exceeds declared sparsity " + std::to_string(mdp.sparsity));
  for (int k : mdp.active_set)
    if (k < 0 || k >= mdp.features.dim) flag("active_set", "coordinate out of range");
  if (mdp.psi.size() != mdp.active_set.size()) flag("psi", "row count != |active_set|");
  bool factors_usable = mdp.psi.size() == mdp.active_set.size();
  for (std::size_t i = 0; i < mdp.psi.size(); ++i)
    if (static_cast<int>(mdp.psi[i].size()) != n_states) {
      flag("psi[" + std::to_string(i) + "]", "row length != state count");
      factors_usable = false;
    }
  if (static_cast<int>(mdp.transitions.size()) != n_states ||
      static_cast<int>(mdp.rewards.size()) != n_states) {
    flag("tables", "state count mismatch");
    return report;  // shapes too broken for per-pair checks
  }

  double init_sum = 0.0;
  for (double p : mdp.initial_distribution) {
    init_sum += p;
    if (p < -kInitTol) flag("initial_distribution", "negative mass");
  }
  if (std::fabs(init_sum - 1.0) > kInitTol)
    flag("initial_distribution", "mass " + format_g17(init_sum) + " != 1");

  for (int x = 0; x < n_states; ++x) {
    const int n_act = mdp.num_actions(x);
    if (static_cast<int>(mdp.features.phi.size()) != n_states ||
        static_cast<int>(mdp.features.phi[x].size()) != n_act ||
        static_cast<int>(mdp.transitions[x].size()) != n_act ||
        static_cast<int>(mdp.rewards[x].size()) != n_act) {
      flag("state " + std::to_string(x), "table shapes do not match the action menu");
      continue;
    }
    for (int a = 0; a < n_act; ++a) {
      const std::string tag = pair_tag(x, a);
      const Vec& f = mdp.features.at(x, a);
      if (static_cast<int>(f.size()) != mdp.features.dim) {
        flag("phi" + tag, "length mismatch");
        continue;
      }
      if (max_abs(f) > 1.0 + 1e-12) flag("phi" + tag, "sup-norm above 1");

      double r = mdp.rewards[x][a];
      if (r < -1e-12 || r > 1.0 + 1e-12) flag("reward" + tag, "outside [0,1]");

      const Vec& row = mdp.transitions[x][a];
      if (static_cast<int>(row.size()) != n_states) {
        flag("P" + tag, "row length mismatch");
        continue;
      }
      double row_sum = 0.0;
      for (double p : row) {
        row_sum += p;
        if (p < -kProbTol || p > 1.0 + kProbTol) flag("P" + tag, "entry outside [0,1]");
      }
      if (std::fabs(row_sum - 1.0) > kRowSumTol)
        flag("P" + tag, "row sums to " + format_g17(row_sum));
      if (!factors_usable) continue;

      // Factored/materialized cross-check. The factored row must sum to one
      // for every pair; entries must lie in [0,1] unless the pair is flagged
      // clamped, in which case the table row has to equal the clamped and
      // renormalized factored row.
      double fact_sum = 0.0;
      Vec fact(n_states, 0.0);
      for (int xn = 0; xn < n_states; ++xn) {
        fact[xn] = mdp.factored_probability(x, a, xn);
        fact_sum += fact[xn];
      }
      if (std::fabs(fact_sum - 1.0) > kRowSumTol)
        flag("factored" + tag, "row sums to " + format_g17(fact_sum));
      if (!mdp.is_clamped(x, a)) {
        for (int xn = 0; xn < n_states; ++xn) {
          if (fact[xn] < -kProbTol || fact[xn] > 1.0 + kProbTol) {
            flag("factored" + tag, "entry outside [0,1] on an unflagged pair");
            break;
          }
        }
        for (int xn = 0; xn < n_states; ++xn) {
          if (std::fabs(fact[xn] - row[xn]) > kProbTol) {
            flag("factored" + tag, "disagrees with materialized table");
            break;
          }
        }
      } else {
        Vec clipped(n_states, 0.0);
        double mass = 0.0;
        for (int xn = 0; xn < n_states; ++xn) {
          clipped[xn] = std::min(1.0, std::max(0.0, fact[xn]));
          mass += clipped[xn];
        }
        for (int xn = 0; xn < n_states; ++xn) {
          double expect = mass > 0.0 ? clipped[xn] / mass : 0.0;
          if (std::fabs(expect - row[xn]) > kProbTol) {
            flag("clamped" + tag, "table row is not the clamped factored row");
            break;
          }
        }
      }
    }
  }
  return report;
}

FeatureMap tabular_feature_map(int num_states, int num_actions) {
  if (num_states <= 0 || num_actions <= 0)
    throw std::invalid_argument("tabular_feature_map: counts must be positive");
  long long dim_ll = static_cast<long long>(num_states) * num_actions;
  if (dim_ll > (1 << 24)) throw std::invalid_argument("tabular_feature_map: dimension overflow");
  const int dim = static_cast<int>(dim_ll);
  std::vector<std::vector<Vec>> table(num_states);
  for (int x = 0; x < num_states; ++x) {
    table[x].resize(num_actions, Vec(dim, 0.0));
    for (int a = 0; a < num_actions; ++a) table[x][a][x * num_actions + a] = 1.0;
  }
  return FeatureMap::build(dim, std::move(table));
}

SparseLinearMdp random_sparse_mdp(int num_states, int num_actions, int d, int s, int horizon,
                                  std::uint64_t seed) {
  if (num_states <= 0 || num_actions <= 0 || horizon <= 0)
    throw std::invalid_argument("random_sparse_mdp: sizes must be positive");
  if (s > d) throw std::invalid_argument("random_sparse_mdp: s > d is infeasible");
  if (s <= 0) throw std::invalid_argument("random_sparse_mdp: s must be positive");
  // The indicator-basis degenerate case factors each pair through its own
  // coordinate; the anchor construction below instead needs one anchor
  // distribution per active coordinate.
  const bool tabular = (s == d) && (d == num_states * num_actions);
  if (!tabular && s > num_states)
    throw std::invalid_argument("random_sparse_mdp: s > numStates has no valid factorization");

  RngStream rng = RngStream::keyed({seed, 0x6d647067656eULL});

  SparseLinearMdp mdp;
  mdp.horizon = horizon;
  mdp.actions_per_state.assign(num_states, num_actions);
  mdp.sparsity = s;

  // Anchor next-state distributions, one per active coordinate (one per pair
  // in the tabular degenerate case).
  std::vector<Vec> anchors(s, Vec(num_states, 0.0));
  auto fill_distribution = [&](Vec& dist) {
    double total = 0.0;
    for (double& v : dist) {
      v = rng.next_unit() + 1e-9;
      total += v;
    }
    for (double& v : dist) v /= total;
  };
  if (!tabular)
    for (Vec& a : anchors) fill_distribution(a);

  mdp.active_set.resize(s);
  if (tabular) {
    for (int k = 0; k < s; ++k) mdp.active_set[k] = k;
  } else {
    // Seeded draw of s distinct coordinates.
    std::vector<int> all(d);
    for (int i = 0; i < d; ++i) all[i] = i;
    for (int i = 0; i < s; ++i) {
      int j = i + rng.next_below(d - i);
      std::swap(all[i], all[j]);
    }
    mdp.active_set.assign(all.begin(), all.begin() + s);
    std::sort(mdp.active_set.begin(), mdp.active_set.end());
  }

  std::vector<std::vector<Vec>> phi_table(num_states);
  mdp.rewards.resize(num_states);
  mdp.transitions.resize(num_states);
  mdp.psi.assign(s, Vec(num_states, 0.0));

  if (tabular) {
    FeatureMap fm = tabular_feature_map(num_states, num_actions);
    for (int x = 0; x < num_states; ++x) {
      mdp.rewards[x].resize(num_actions);
      mdp.transitions[x].resize(num_actions);
      for (int a = 0; a < num_actions; ++a) {
        Vec row(num_states, 0.0);
        fill_distribution(row);
        mdp.psi[x * num_actions + a] = row;
        mdp.transitions[x][a] = std::move(row);
        mdp.rewards[x][a] = rng.next_unit();
      }
    }
    mdp.features = std::move(fm);
  } else {
    for (int x = 0; x < num_states; ++x) {
      phi_table[x].resize(num_actions, Vec(d, 0.0));
      mdp.rewards[x].resize(num_actions);
      mdp.transitions[x].resize(num_actions);
      for (int a = 0; a < num_actions; ++a) {
        Vec& f = phi_table[x][a];
        // Convex weights over the anchors on the active coordinates.
        Vec w(s, 0.0);
        fill_distribution(w);
        for (int k = 0; k < s; ++k) f[mdp.active_set[k]] = w[k];
        // Off-kernel coordinates: seeded values in [-1, 1]. They multiply
        // nothing in the factorization, so the kernel is unchanged.
        std::size_t next_active = 0;
        for (int j = 0; j < d; ++j) {
          if (next_active < mdp.active_set.size() && mdp.active_set[next_active] == j) {
            ++next_active;
            continue;
          }
          f[j] = rng.next_range(-1.0, 1.0);
        }
        Vec row(num_states, 0.0);
        for (int k = 0; k < s; ++k)
          for (int xn = 0; xn < num_states; ++xn) row[xn] += w[k] * anchors[k][xn];
        mdp.transitions[x][a] = std::move(row);
        mdp.rewards[x][a] = rng.next_unit();
      }
    }
    for (int k = 0; k < s; ++k) mdp.psi[k] = anchors[k];
    // Sup-norm rescale hook: convex weights already satisfy the bound, so the
    // compensating factor is 1.
    mdp.features = FeatureMap::build(d, std::move(phi_table));
  }

  mdp.initial_distribution.assign(num_states, 0.0);
  fill_distribution(mdp.initial_distribution);
  return mdp;
}

StationaryPolicy uniform_policy(const SparseLinearMdp& mdp) {
  StationaryPolicy p;
  p.rows.resize(mdp.num_states());
  for (int x = 0; x < mdp.num_states(); ++x)
    p.rows[x].assign(mdp.num_actions(x), 1.0 / mdp.num_actions(x));
  return p;
}

namespace {

void check_policy_shape(const SparseLinearMdp& mdp, const StationaryPolicy& policy) {
  if (policy.num_states() != mdp.num_states())
    throw std::invalid_argument("policy does not cover all states");
  for (int x = 0; x < mdp.num_states(); ++x)
    if (static_cast<int>(policy.rows[x].size()) != mdp.num_actions(x))
      throw std::invalid_argument("policy row has wrong action count at state " +
                                  std::to_string(x));
}

}  // namespace

Trajectory sample_episode(const SparseLinearMdp& mdp, const StationaryPolicy& policy,
                          RngStream& rng, long episode_index, Phase phase) {
  check_policy_shape(mdp, policy);
  Trajectory traj;
  traj.episode = episode_index;
  traj.phase = phase;
  traj.steps.reserve(mdp.horizon);
  int x = rng.sample_distribution(mdp.initial_distribution);
  for (int h = 0; h < mdp.horizon; ++h) {
    int a = rng.sample_distribution(policy.rows[x]);
    int xn = rng.sample_distribution(mdp.transitions[x][a]);
    traj.steps.push_back({x, a, mdp.rewards[x][a], xn});
    x = xn;
  }
  return traj;
}

Trajectory sample_episode(const SparseLinearMdp& mdp, const StepPolicy& policy, RngStream& rng,
                          long episode_index, Phase phase) {
  if (static_cast<int>(policy.size()) != mdp.horizon)
    throw std::invalid_argument("step policy must cover all steps");
  Trajectory traj;
  traj.episode = episode_index;
  traj.phase = phase;
  traj.steps.reserve(mdp.horizon);
  int x = rng.sample_distribution(mdp.initial_distribution);
  for (int h = 0; h < mdp.horizon; ++h) {
    int a = policy[h][x];
    int xn = rng.sample_distribution(mdp.transitions[x][a]);
    traj.steps.push_back({x, a, mdp.rewards[x][a], xn});
    x = xn;
  }
  return traj;
}

namespace {

using nlohmann::json;

json vec_to_json(const Vec& v) { return json(v); }

}  // namespace

std::string instance_to_text(const SparseLinearMdp& mdp) {
  json j;
  j["d"] = mdp.features.dim;
  j["s"] = mdp.sparsity;
  j["H"] = mdp.horizon;
  j["states"] = mdp.num_states();
  j["actions_per_state"] = mdp.actions_per_state;
  json phi = json::array();
  for (int x = 0; x < mdp.num_states(); ++x) {
    json per_state = json::array();
    for (int a = 0; a < mdp.num_actions(x); ++a) per_state.push_back(vec_to_json(mdp.features.at(x, a)));
    phi.push_back(per_state);
  }
  j["phi"] = phi;
  json psi = json::array();
  for (std::size_t i = 0; i < mdp.active_set.size(); ++i)
    psi.push_back({{"k", mdp.active_set[i]}, {"values", vec_to_json(mdp.psi[i])}});
  j["psi"] = psi;
  j["rewards"] = mdp.rewards;
  j["xi0"] = mdp.initial_distribution;
  j["active_set"] = mdp.active_set;
  if (!mdp.clamped.empty()) {
    json flags = json::array();
    for (int x = 0; x < mdp.num_states(); ++x)
      for (int a = 0; a < mdp.num_actions(x); ++a)
        if (mdp.clamped[x][a]) flags.push_back({x, a});
    j["clamped_pairs"] = flags;
  }
  return j.dump(2);
}

SparseLinearMdp instance_from_text(const std::string& text) {
  json j = json::parse(text);
  SparseLinearMdp mdp;
  mdp.horizon = j.at("H").get<int>();
  mdp.sparsity = j.at("s").get<int>();
  const int d = j.at("d").get<int>();
  mdp.actions_per_state = j.at("actions_per_state").get<std::vector<int>>();
  const int n_states = j.at("states").get<int>();
  if (static_cast<int>(mdp.actions_per_state.size()) != n_states)
    throw std::invalid_argument("instance file: actions_per_state does not match states");
  std::vector<std::vector<Vec>> phi_table(n_states);
  const json& phi = j.at("phi");
  for (int x = 0; x < n_states; ++x) {
    for (const json& row : phi.at(x)) phi_table[x].push_back(row.get<Vec>());
  }
  mdp.features = FeatureMap::build(d, std::move(phi_table));
  for (const json& entry : j.at("psi")) {
    mdp.active_set.push_back(entry.at("k").get<int>());
    mdp.psi.push_back(entry.at("values").get<Vec>());
  }
  mdp.rewards = j.at("rewards").get<std::vector<Vec>>();
  mdp.initial_distribution = j.at("xi0").get<Vec>();
  if (j.contains("clamped_pairs")) {
    mdp.clamped.resize(n_states);
    for (int x = 0; x < n_states; ++x) mdp.clamped[x].assign(mdp.actions_per_state[x], 0);
    for (const json& pr : j.at("clamped_pairs"))
      mdp.clamped[pr.at(0).get<int>()][pr.at(1).get<int>()] = 1;
  }

  // Rebuild the materialized table from the factors, applying the recorded
  // clamp flags, so a round-tripped instance is exactly self-consistent.
  mdp.transitions.resize(n_states);
  for (int x = 0; x < n_states; ++x) {
    mdp.transitions[x].resize(mdp.actions_per_state[x]);
    for (int a = 0; a < mdp.actions_per_state[x]; ++a) {
      Vec row(n_states, 0.0);
      double mass = 0.0;
      for (int xn = 0; xn < n_states; ++xn) {
        double p = mdp.factored_probability(x, a, xn);
        if (mdp.is_clamped(x, a)) p = std::min(1.0, std::max(0.0, p));
        row[xn] = p;
        mass += p;
      }
      if (mdp.is_clamped(x, a) && mass > 0.0)
        for (double& p : row) p /= mass;
      mdp.transitions[x][a] = std::move(row);
    }
  }
  return mdp;
}

void save_instance(const SparseLinearMdp& mdp, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << instance_to_text(mdp) << "\n";
}

SparseLinearMdp load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return instance_from_text(buf.str());
}

}  // namespace sparse_rl
