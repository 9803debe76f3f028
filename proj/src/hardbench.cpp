#include "sparse_rl/hardbench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <stdexcept>

#include "json.hpp"
#include "sparse_rl/sparsereg.hpp"

namespace sparse_rl {

namespace {

using Pattern = std::vector<signed char>;

double pattern_dot(const Pattern& p, const Vec& v) {
  double acc = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j)
    if (p[j] != 0) acc += static_cast<double>(p[j]) * v[j];
  return acc;
}

// Sylvester sign matrix entry: +1 when popcount(i & j) is even.
int hadamard_entry(unsigned i, unsigned j) {
  return (__builtin_popcount(i & j) & 1) ? -1 : 1;
}

// Informative-state menu: sign patterns over coordinates 0..d-2 with a fixed
// +1 tail at coordinate d-1. Small families are enumerated outright; larger
// ones are built from sign-flipped batches of orthogonal rows, so a full
// batch contributes an exact multiple of the identity to the uniform-play
// feature covariance. Batch 0 is unflipped, so the all-plus pattern (the
// highest-value action) is always element 0.
std::vector<Pattern> informative_menu(int d, int cap, RngStream& rng) {
  const int m = d - 1;
  std::vector<Pattern> menu;
  std::set<Pattern> seen;
  auto push = [&](Pattern p) {
    if (seen.insert(p).second) menu.push_back(std::move(p));
  };

  long long family_size = m < 62 ? (1LL << m) : std::numeric_limits<long long>::max();
  long long target = std::min<long long>(cap, family_size);

  if (family_size <= target || family_size <= cap) {
    for (long long t = 0; t < family_size && static_cast<long long>(menu.size()) < target; ++t) {
      Pattern p(d, 1);
      for (int j = 0; j < m; ++j) p[j] = (t >> j) & 1 ? -1 : 1;
      push(std::move(p));
    }
    return menu;
  }

  unsigned n_had = 1;
  while (static_cast<int>(n_had) < d) n_had <<= 1;
  int guard = 0;
  for (int batch = 0; static_cast<long long>(menu.size()) < target && guard < 64; ++batch, ++guard) {
    std::vector<int> flip(m, 1);
    if (batch > 0)
      for (int j = 0; j < m; ++j) flip[j] = rng.next_sign();
    bool clean = true;
    std::vector<Pattern> rows;
    rows.reserve(n_had);
    for (unsigned t = 0; t < n_had; ++t) {
      Pattern p(d, 1);
      for (int j = 0; j < m; ++j)
        p[j] = static_cast<signed char>(flip[j] * hadamard_entry(t, static_cast<unsigned>(j + 1)));
      if (seen.count(p)) {
        clean = false;
        break;
      }
      rows.push_back(std::move(p));
    }
    if (!clean) continue;  // resample the flip vector
    for (Pattern& p : rows) {
      if (static_cast<long long>(menu.size()) >= target) break;
      push(std::move(p));
    }
  }
  return menu;
}

// Uninformative-state menu: patterns with support of size s-1 inside
// coordinates 0..d-2, signs free, zero tail. Element 0 is the pattern
// aligned with theta's support, the highest-value action.
std::vector<Pattern> uninformative_menu(int d, int s, int cap, RngStream& rng) {
  std::vector<Pattern> menu;
  std::set<Pattern> seen;
  Pattern best(d, 0);
  for (int j = 0; j < s - 1; ++j) best[j] = 1;
  seen.insert(best);
  menu.push_back(best);

  double family = 1.0;
  for (int i = 0; i < s - 1; ++i) family *= static_cast<double>(d - 1 - i) / (i + 1);
  family *= std::pow(2.0, s - 1);
  long long target = family < static_cast<double>(4 * cap)
                         ? std::min<long long>(cap, static_cast<long long>(family + 0.5))
                         : cap;

  int guard = 0;
  while (static_cast<long long>(menu.size()) < target && guard < 200000) {
    ++guard;
    Pattern p(d, 0);
    std::vector<int> coords;
    while (static_cast<int>(coords.size()) < s - 1) {
      int j = rng.next_below(d - 1);
      if (std::find(coords.begin(), coords.end(), j) == coords.end()) coords.push_back(j);
    }
    for (int j : coords) p[j] = static_cast<signed char>(rng.next_sign());
    if (seen.insert(p).second) menu.push_back(std::move(p));
  }
  return menu;
}

// Assembles the SparseLinearMdp from the menus and parameter vector.
// Feature layout over 2d+3 coordinates:
//   0..d-1     theta block (bandit-state patterns live here)
//   d, d+1     absorbing self-loop markers for the good/bad states
//   d+2..2d+1  one coordinate per start-state action
//   2d+2       shared tail coordinate of every bandit-state feature
void assemble_mdp(HardInstance& inst, int horizon) {
  const int d = inst.ambient_dim;
  const int dim = 2 * d + 3;
  const int k = inst.needle;
  const Vec& theta = inst.effective_theta();
  SparseLinearMdp& mdp = inst.mdp;

  mdp.horizon = horizon;
  mdp.actions_per_state = {d, static_cast<int>(inst.a3_patterns.size()),
                           static_cast<int>(inst.a2_patterns.size()), 1, 1};

  std::vector<std::vector<Vec>> phi(5);
  phi[HardInstance::kStart].assign(d, Vec(dim, 0.0));
  for (int j = 0; j < d; ++j) {
    phi[HardInstance::kStart][j][d + 2 + j] = 1.0;
    phi[HardInstance::kStart][j][2 * d + 2] = 1.0;
  }
  auto bandit_feature = [&](const Pattern& p) {
    Vec f(dim, 0.0);
    for (int j = 0; j < d; ++j) f[j] = static_cast<double>(p[j]);
    f[2 * d + 2] = 1.0;
    return f;
  };
  for (const Pattern& p : inst.a3_patterns) phi[HardInstance::kInformative].push_back(bandit_feature(p));
  for (const Pattern& p : inst.a2_patterns) phi[HardInstance::kUninformative].push_back(bandit_feature(p));
  phi[HardInstance::kGood].assign(1, Vec(dim, 0.0));
  phi[HardInstance::kGood][0][d] = 1.0;
  phi[HardInstance::kBad].assign(1, Vec(dim, 0.0));
  phi[HardInstance::kBad][0][d + 1] = 1.0;
  mdp.features = FeatureMap::build(dim, std::move(phi));

  // Per-state factor vectors; psi_c(x') is their transpose.
  std::vector<Vec> psi_of_state(5, Vec(dim, 0.0));
  if (k >= 1) psi_of_state[HardInstance::kInformative][d + 2 + (k - 1)] = 1.0;
  for (int j = 0; j < d; ++j)
    if (j != k - 1) psi_of_state[HardInstance::kUninformative][d + 2 + j] = 1.0;
  for (int j = 0; j < d; ++j) {
    psi_of_state[HardInstance::kGood][j] = theta[j];
    psi_of_state[HardInstance::kBad][j] = -theta[j];
  }
  psi_of_state[HardInstance::kGood][d] = 1.0;
  psi_of_state[HardInstance::kBad][d + 1] = 1.0;
  for (int j = 0; j < d; ++j) psi_of_state[HardInstance::kBad][d + 2 + j] = -1.0;
  psi_of_state[HardInstance::kBad][2 * d + 2] = 1.0;

  mdp.active_set.clear();
  mdp.psi.clear();
  for (int c = 0; c < dim; ++c) {
    bool nonzero = false;
    for (int x = 0; x < 5; ++x)
      if (psi_of_state[x][c] != 0.0) nonzero = true;
    if (!nonzero) continue;
    mdp.active_set.push_back(c);
    Vec row(5, 0.0);
    for (int x = 0; x < 5; ++x) row[x] = psi_of_state[x][c];
    mdp.psi.push_back(std::move(row));
  }
  mdp.sparsity = static_cast<int>(mdp.active_set.size());

  mdp.rewards.resize(5);
  mdp.transitions.resize(5);
  mdp.clamped.resize(5);
  for (int x = 0; x < 5; ++x) {
    int n_act = mdp.actions_per_state[x];
    mdp.rewards[x].assign(n_act, x == HardInstance::kGood ? 1.0 : 0.0);
    mdp.transitions[x].assign(n_act, Vec(5, 0.0));
    mdp.clamped[x].assign(n_act, 0);
  }
  for (int j = 0; j < d; ++j) {
    int dest = (j == k - 1) ? HardInstance::kInformative : HardInstance::kUninformative;
    mdp.transitions[HardInstance::kStart][j][dest] = 1.0;
  }
  auto bandit_row = [&](int x, int a, const Pattern& p) {
    double q = pattern_dot(p, theta);
    Vec row(5, 0.0);
    if (q < 0.0 || q > 1.0) {
      mdp.clamped[x][a] = 1;
      double g = std::min(1.0, std::max(0.0, q));
      double b = std::min(1.0, std::max(0.0, 1.0 - q));
      double mass = g + b;
      row[HardInstance::kGood] = g / mass;
      row[HardInstance::kBad] = b / mass;
    } else {
      row[HardInstance::kGood] = q;
      row[HardInstance::kBad] = 1.0 - q;
    }
    mdp.transitions[x][a] = std::move(row);
  };
  for (std::size_t a = 0; a < inst.a3_patterns.size(); ++a)
    bandit_row(HardInstance::kInformative, static_cast<int>(a), inst.a3_patterns[a]);
  for (std::size_t a = 0; a < inst.a2_patterns.size(); ++a)
    bandit_row(HardInstance::kUninformative, static_cast<int>(a), inst.a2_patterns[a]);
  mdp.transitions[HardInstance::kGood][0][HardInstance::kGood] = 1.0;
  mdp.transitions[HardInstance::kBad][0][HardInstance::kBad] = 1.0;

  mdp.initial_distribution.assign(5, 0.0);
  mdp.initial_distribution[HardInstance::kStart] = 1.0;
}

}  // namespace

HardInstance build_hard_instance(int d, int s, int k, double epsilon, int action_cap,
                                 std::uint64_t seed, int horizon) {
  if (s < 2 || s > d) throw std::invalid_argument("build_hard_instance: need 2 <= s <= d");
  if (k < 0 || k > d) throw std::invalid_argument("build_hard_instance: k must be in 0..d");
  if (action_cap < 2) throw std::invalid_argument("build_hard_instance: action cap too small");
  if (horizon < 1) throw std::invalid_argument("build_hard_instance: horizon must be positive");
  if (!(epsilon > 0.0) || epsilon > 0.5 / (s - 1))
    throw std::invalid_argument(
        "build_hard_instance: epsilon must lie in (0, 1/(2(s-1))] for valid probabilities");

  HardInstance inst;
  inst.ambient_dim = d;
  inst.level = s;
  inst.needle = k;
  inst.epsilon = epsilon;
  inst.action_cap = action_cap;
  inst.seed = seed;

  inst.theta.assign(d, 0.0);
  for (int j = 0; j < s - 1; ++j) inst.theta[j] = epsilon;
  inst.theta[d - 1] = 0.5;

  // Menus must not depend on k: the null variant and every needle position
  // share them, which is what makes the variants indistinguishable away from
  // the start state.
  RngStream rng_a3 = RngStream::keyed({seed, 0x6133ULL});
  RngStream rng_a2 = RngStream::keyed({seed, 0x6132ULL});
  inst.a3_patterns = informative_menu(d, action_cap, rng_a3);
  inst.a2_patterns = uninformative_menu(d, s, action_cap, rng_a2);

  assemble_mdp(inst, horizon);
  return inst;
}

StationaryPolicy exploratory_policy_for(const HardInstance& instance) {
  if (instance.needle < 1)
    throw std::invalid_argument("exploratory_policy_for: the null variant has no informative route");
  StationaryPolicy policy;
  policy.rows.resize(5);
  policy.rows[HardInstance::kStart].assign(instance.ambient_dim, 0.0);
  policy.rows[HardInstance::kStart][instance.needle - 1] = 1.0;
  policy.rows[HardInstance::kInformative].assign(instance.a3_patterns.size(),
                                                 1.0 / instance.a3_patterns.size());
  policy.rows[HardInstance::kUninformative].assign(instance.a2_patterns.size(),
                                                   1.0 / instance.a2_patterns.size());
  policy.rows[HardInstance::kGood] = {1.0};
  policy.rows[HardInstance::kBad] = {1.0};
  return policy;
}

ConditioningReport exploratory_conditioning(const HardInstance& instance) {
  ConditioningReport report;
  report.full = expected_covariance(instance.mdp, exploratory_policy_for(instance));
  std::vector<int> block(instance.ambient_dim);
  for (int j = 0; j < instance.ambient_dim; ++j) block[j] = j;
  Matrix sub = principal_submatrix(report.full.sigma, block);
  report.theta_block_sigma_min = min_eigenvalue(sub);
  return report;
}

namespace {

bool in_perturbation_family(const Pattern& z, int d, int s) {
  if (static_cast<int>(z.size()) != d) return false;
  int l1 = 0;
  for (int j = 0; j < d; ++j) {
    if (z[j] < -1 || z[j] > 1) return false;
    if (z[j] != 0) {
      if (j < s - 1 || j >= d - 1) return false;
      ++l1;
    }
  }
  return l1 == s - 1;
}

}  // namespace

std::vector<signed char> select_z_tilde(const HardInstance& instance, const Vec& a2_weights) {
  const int d = instance.ambient_dim;
  const int s = instance.level;
  if (a2_weights.size() != instance.a2_patterns.size())
    throw std::invalid_argument("select_z_tilde: weight vector does not match the menu");
  const int lo = s - 1, hi = d - 2;  // allowed support coordinates
  if (d < 2 * s)
    throw std::invalid_argument("select_z_tilde: candidate family needs d >= 2s");

  std::vector<Pattern> candidates;
  if (d <= 12) {
    std::vector<int> coords(s - 1);
    auto rec = [&](auto&& self, int start, int depth) -> void {
      if (depth == s - 1) {
        int combos = 1 << (s - 1);
        for (int mask = 0; mask < combos; ++mask) {
          Pattern z(d, 0);
          for (int i = 0; i < s - 1; ++i)
            z[coords[i]] = (mask >> i) & 1 ? 1 : -1;
          candidates.push_back(std::move(z));
        }
        return;
      }
      for (int j = start; j <= hi - (s - 2 - depth); ++j) {
        coords[depth] = j;
        self(self, j + 1, depth + 1);
      }
    };
    rec(rec, lo, 0);
  } else {
    RngStream rng = RngStream::keyed({instance.seed, 0x7a74ULL});
    std::set<Pattern> seen;
    int guard = 0;
    while (static_cast<int>(candidates.size()) < instance.action_cap && guard < 200000) {
      ++guard;
      Pattern z(d, 0);
      std::vector<int> coords;
      while (static_cast<int>(coords.size()) < s - 1) {
        int j = lo + rng.next_below(hi - lo + 1);
        if (std::find(coords.begin(), coords.end(), j) == coords.end()) coords.push_back(j);
      }
      for (int j : coords) z[j] = static_cast<signed char>(rng.next_sign());
      if (seen.insert(z).second) candidates.push_back(std::move(z));
    }
  }
  if (candidates.empty()) throw std::invalid_argument("select_z_tilde: no candidates");
  std::sort(candidates.begin(), candidates.end());

  double best = std::numeric_limits<double>::infinity();
  std::size_t best_idx = 0;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    double acc = 0.0;
    for (std::size_t a = 0; a < instance.a2_patterns.size(); ++a) {
      if (a2_weights[a] == 0.0) continue;
      double overlap = 0.0;
      const Pattern& p = instance.a2_patterns[a];
      const Pattern& z = candidates[c];
      for (int j = lo; j <= hi; ++j)
        if (z[j] != 0 && p[j] != 0) overlap += static_cast<double>(z[j]) * p[j];
      acc += a2_weights[a] * overlap * overlap;
    }
    if (acc < best) {
      best = acc;
      best_idx = c;
    }
  }
  return candidates[best_idx];
}

HardInstance build_alternative_instance(const HardInstance& instance,
                                        const std::vector<signed char>& z) {
  if (!in_perturbation_family(z, instance.ambient_dim, instance.level))
    throw std::invalid_argument("build_alternative_instance: z is not a valid perturbation");
  HardInstance alt = instance;
  alt.is_alternative = true;
  alt.z_tilde = z;
  alt.theta_tilde = instance.theta;
  for (int j = 0; j < instance.ambient_dim; ++j)
    alt.theta_tilde[j] += 2.0 * instance.epsilon * static_cast<double>(z[j]);
  if (std::find(alt.a2_patterns.begin(), alt.a2_patterns.end(), z) == alt.a2_patterns.end())
    alt.a2_patterns.push_back(z);
  assemble_mdp(alt, instance.mdp.horizon);
  return alt;
}

HardDiagnostics hard_run_diagnostics(const std::vector<Trajectory>& runs,
                                     const HardInstance& instance, long total_episodes) {
  HardDiagnostics diag;
  diag.a2_visit_counts.assign(instance.a2_patterns.size(), 0.0);
  diag.tau = total_episodes;
  const int needle_action = instance.needle - 1;
  for (std::size_t n = 0; n < runs.size(); ++n) {
    const Trajectory& traj = runs[n];
    if (instance.needle >= 1 && !traj.steps.empty() &&
        traj.steps[0].state == HardInstance::kStart && traj.steps[0].action == needle_action) {
      diag.tau = static_cast<long>(n) + 1;
      break;
    }
  }
  const int s = instance.level;
  for (std::size_t n = 0; n + 1 < static_cast<std::size_t>(diag.tau) && n < runs.size(); ++n) {
    const Trajectory& traj = runs[n];
    if (traj.steps.size() < 2) continue;
    const TrajectoryStep& step = traj.steps[1];
    if (step.state != HardInstance::kUninformative) continue;
    diag.a2_visit_counts[step.action] += 1.0;
    const Pattern& p = instance.a2_patterns[step.action];
    for (int j = 0; j < s - 1; ++j) diag.visitation_sum += static_cast<double>(p[j]);
  }
  diag.event_d = diag.visitation_sum <= static_cast<double>(diag.tau) * s / 2.0;
  return diag;
}

namespace {

// Bernoulli divergence q log(q/p) + (1-q) log((1-q)/(1-p)); infinite when a
// zero or one is mismatched.
std::pair<double, bool> bernoulli_kl(double q, double p) {
  double total = 0.0;
  if (q > 0.0) {
    if (p <= 0.0) return {0.0, true};
    total += q * std::log(q / p);
  }
  if (q < 1.0) {
    if (p >= 1.0) return {0.0, true};
    total += (1.0 - q) * std::log((1.0 - q) / (1.0 - p));
  }
  return {total, false};
}

}  // namespace

KlReport stepwise_kl(const HardInstance& base, const HardInstance& alternative,
                     const Vec& a2_weights) {
  if (base.ambient_dim != alternative.ambient_dim || base.level != alternative.level ||
      base.epsilon != alternative.epsilon)
    throw std::invalid_argument("stepwise_kl: instances do not share structure");
  if (a2_weights.size() != base.a2_patterns.size())
    throw std::invalid_argument("stepwise_kl: weight vector does not match the menu");

  KlReport report;
  const double se = static_cast<double>(base.level - 1) * base.epsilon;
  report.bound = 8.0 * se * se;
  report.per_action.assign(base.a2_patterns.size(), 0.0);
  for (std::size_t a = 0; a < base.a2_patterns.size(); ++a) {
    if (a2_weights[a] == 0.0) continue;
    const Pattern& p = base.a2_patterns[a];
    double q = pattern_dot(p, base.theta);
    double q_alt = pattern_dot(p, alternative.effective_theta());
    if (q < 0.0 || q > 1.0 || q_alt < 0.0 || q_alt > 1.0) {
      ++report.excluded_clamped;
      continue;
    }
    auto [kl, inf] = bernoulli_kl(q, q_alt);
    if (inf) {
      report.infinite = true;
      continue;
    }
    report.per_action[a] = kl;
    report.total += a2_weights[a] * kl;
  }
  return report;
}

std::pair<StationaryPolicy, double> find_exploratory_policy_bruteforce(
    const SparseLinearMdp& mdp, const std::vector<StationaryPolicy>& candidates,
    int mixture_grid) {
  if (candidates.empty())
    throw std::invalid_argument("find_exploratory_policy_bruteforce: no candidates");
  StationaryPolicy best_policy = candidates.front();
  double best_value = -std::numeric_limits<double>::infinity();
  auto consider = [&](const StationaryPolicy& policy) {
    double value = expected_covariance(mdp, policy).sigma_min;
    if (value > best_value) {
      best_value = value;
      best_policy = policy;
    }
  };
  for (const StationaryPolicy& p : candidates) consider(p);
  if (mixture_grid > 1) {
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      for (std::size_t j = i + 1; j < candidates.size(); ++j) {
        for (int g = 1; g < mixture_grid; ++g) {
          double alpha = static_cast<double>(g) / mixture_grid;
          StationaryPolicy mix = candidates[i];
          for (std::size_t x = 0; x < mix.rows.size(); ++x)
            for (std::size_t a = 0; a < mix.rows[x].size(); ++a)
              mix.rows[x][a] = alpha * candidates[i].rows[x][a] +
                               (1.0 - alpha) * candidates[j].rows[x][a];
          consider(mix);
        }
      }
    }
  }
  return {best_policy, best_value};
}

void save_hard_instance(const HardInstance& instance, const std::string& path) {
  nlohmann::json j = nlohmann::json::parse(instance_to_text(instance.mdp));
  nlohmann::json side;
  side["d"] = instance.ambient_dim;
  side["s"] = instance.level;
  side["k"] = instance.needle;
  side["epsilon"] = instance.epsilon;
  side["action_cap"] = instance.action_cap;
  side["seed"] = instance.seed;
  if (instance.is_alternative) {
    side["z_tilde"] = std::vector<int>(instance.z_tilde.begin(), instance.z_tilde.end());
  } else {
    side["z_tilde"] = nullptr;
  }
  side["feature_extension"] =
      "absorbing self-loops are carried by dedicated marker coordinates d and d+1";
  j["hard"] = side;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace sparse_rl
