#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>

#include "sparse_rl/agents.hpp"
#include "sparse_rl/hardbench.hpp"
#include "sparse_rl/sparsereg.hpp"

using namespace sparse_rl;

namespace {

double pattern_theta(const std::vector<signed char>& p, const Vec& theta) {
  double acc = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) acc += static_cast<double>(p[j]) * theta[j];
  return acc;
}

std::vector<Trajectory> uniform_rollout(const HardInstance& inst, long episodes,
                                        std::uint64_t seed) {
  StationaryPolicy uniform = uniform_policy(inst.mdp);
  RngStream rng = RngStream::keyed({seed, 0x726fULL});
  std::vector<Trajectory> runs;
  for (long n = 0; n < episodes; ++n)
    runs.push_back(sample_episode(inst.mdp, uniform, rng, n, Phase::baseline));
  return runs;
}

}  // namespace

TEST_CASE("instance structure") {
  for (auto [d, s] : std::vector<std::pair<int, int>>{{8, 3}, {16, 3}, {32, 4}}) {
    HardInstance inst = build_hard_instance(d, s, 1, 1.0 / (8.0 * s), 64, 3, 3);
    CHECK(inst.mdp.feature_dim() == 2 * d + 3);
    CHECK(validate_mdp(inst.mdp).ok());
    CHECK(inst.mdp.num_actions(HardInstance::kStart) == d);
    // Absorbing states: one action, self-loop with probability one.
    CHECK(inst.mdp.transitions[HardInstance::kGood][0][HardInstance::kGood] == 1.0);
    CHECK(inst.mdp.transitions[HardInstance::kBad][0][HardInstance::kBad] == 1.0);
    // Rewards: one exactly at the good state.
    for (int x = 0; x < 5; ++x)
      for (int a = 0; a < inst.mdp.num_actions(x); ++a)
        CHECK(inst.mdp.rewards[x][a] == (x == HardInstance::kGood ? 1.0 : 0.0));
  }
  SUBCASE("parameter domain") {
    CHECK_THROWS(build_hard_instance(8, 1, 1, 0.1, 64, 3, 3));
    CHECK_THROWS(build_hard_instance(8, 3, 9, 0.1, 64, 3, 3));
    CHECK_THROWS(build_hard_instance(8, 3, 1, 0.3, 64, 3, 3));  // above 1/(2(s-1))
    CHECK_THROWS(build_hard_instance(8, 3, 1, 0.0, 64, 3, 3));
    CHECK_NOTHROW(build_hard_instance(8, 3, 1, 0.25, 64, 3, 3));  // boundary is allowed
  }
}

TEST_CASE("theta layout and start-state routing") {
  const int d = 10, s = 3, k = 4;
  const double eps = 1.0 / 24.0;
  HardInstance inst = build_hard_instance(d, s, k, eps, 16, 5, 3);
  for (int j = 0; j < s - 1; ++j) CHECK(inst.theta[j] == eps);
  for (int j = s - 1; j < d - 1; ++j) CHECK(inst.theta[j] == 0.0);
  CHECK(inst.theta[d - 1] == 0.5);
  for (int j = 0; j < d; ++j) {
    int dest = j == k - 1 ? HardInstance::kInformative : HardInstance::kUninformative;
    CHECK(inst.mdp.transitions[HardInstance::kStart][j][dest] == 1.0);
  }
}

TEST_CASE("menu families have the advertised shapes") {
  const int d = 12, s = 3;
  HardInstance inst = build_hard_instance(d, s, 2, 1.0 / 24.0, 32, 9, 3);
  // Informative menu: signs on the first d-1 coordinates, +1 tail.
  CHECK(static_cast<int>(inst.a3_patterns.size()) == 32);
  for (const auto& p : inst.a3_patterns) {
    CHECK(p[d - 1] == 1);
    for (int j = 0; j < d - 1; ++j) CHECK((p[j] == 1 || p[j] == -1));
  }
  // The highest-value pattern leads the menu.
  for (int j = 0; j < d - 1; ++j) CHECK(inst.a3_patterns[0][j] == 1);
  // Uninformative menu: support of size s-1 before the tail coordinate.
  for (const auto& p : inst.a2_patterns) {
    CHECK(p[d - 1] == 0);
    int l1 = 0;
    for (int j = 0; j < d - 1; ++j) l1 += std::abs(p[j]);
    CHECK(l1 == s - 1);
  }
  // Element 0 carries the full positive overlap with theta.
  CHECK(pattern_theta(inst.a2_patterns[0], inst.theta) ==
        doctest::Approx((s - 1) * inst.epsilon).epsilon(1e-12));
  // Menus are deduplicated.
  std::set<std::vector<signed char>> uniq(inst.a2_patterns.begin(), inst.a2_patterns.end());
  CHECK(uniq.size() == inst.a2_patterns.size());
}

TEST_CASE("negative-probability patterns are clamped and flagged") {
  HardInstance inst = build_hard_instance(10, 3, 1, 0.04, 64, 4, 3);
  bool saw_clamp = false;
  for (std::size_t a = 0; a < inst.a2_patterns.size(); ++a) {
    double q = pattern_theta(inst.a2_patterns[a], inst.theta);
    const Vec& row = inst.mdp.transitions[HardInstance::kUninformative][a];
    if (q < 0.0) {
      saw_clamp = true;
      CHECK(inst.mdp.is_clamped(HardInstance::kUninformative, static_cast<int>(a)));
      CHECK(row[HardInstance::kGood] == 0.0);
      CHECK(row[HardInstance::kBad] == 1.0);
    } else {
      CHECK(row[HardInstance::kGood] == doctest::Approx(q).epsilon(1e-12));
    }
  }
  CHECK(saw_clamp);  // sign patterns over theta's support exist at this cap
  CHECK(validate_mdp(inst.mdp).ok());
}

TEST_CASE("optimal value closed forms") {
  // Exact value of the start state by hand: the best route is the needle
  // action into the informative state, then the best informative pattern;
  // committing to the uninformative state gives (H-2)(s-1)eps.
  for (auto [d, s] : std::vector<std::pair<int, int>>{{8, 3}, {12, 4}}) {
    const double eps = 1.0 / (8.0 * s);
    const int horizon = 4;
    HardInstance inst = build_hard_instance(d, s, 2, eps, 64, 3, horizon);
    ValueSequence opt = optimal_values(inst.mdp);
    double informative_route = (horizon - 2) * (0.5 + (s - 1) * eps);
    CHECK(opt.V[0][HardInstance::kStart] ==
          doctest::Approx(informative_route).epsilon(1e-12));
    // Value of committing to the uninformative state: best pattern there.
    CHECK(opt.V[0][HardInstance::kUninformative] ==
          doctest::Approx((horizon - 1) * (s - 1) * eps).epsilon(1e-12));
  }
  SUBCASE("at the boundary gap the start value meets (H-1)(s-1)eps exactly") {
    const int s = 3;
    const double eps = 0.5 / (s - 1);
    HardInstance inst = build_hard_instance(8, s, 2, eps, 64, 3, 3);
    ValueSequence opt = optimal_values(inst.mdp);
    CHECK(opt.V[0][HardInstance::kStart] ==
          doctest::Approx((3 - 1) * (s - 1) * eps).epsilon(1e-12));
  }
  SUBCASE("the null variant has no informative route") {
    const int s = 3;
    const double eps = 1.0 / 24.0;
    HardInstance null_inst = build_hard_instance(8, s, 0, eps, 64, 3, 3);
    ValueSequence opt = optimal_values(null_inst.mdp);
    CHECK(opt.V[0][HardInstance::kStart] ==
          doctest::Approx((3 - 2) * (s - 1) * eps).epsilon(1e-12));
  }
}

TEST_CASE("null variant differs from the needle variant only in the start row") {
  HardInstance needle = build_hard_instance(10, 3, 7, 1.0 / 24.0, 16, 11, 3);
  HardInstance null_inst = build_hard_instance(10, 3, 0, 1.0 / 24.0, 16, 11, 3);
  for (int x = 0; x < 5; ++x) {
    for (int a = 0; a < needle.mdp.num_actions(x); ++a) {
      if (x == HardInstance::kStart && a == 6) continue;  // the needle action
      CHECK(needle.mdp.transitions[x][a] == null_inst.mdp.transitions[x][a]);
    }
  }
  CHECK(null_inst.mdp.transitions[HardInstance::kStart][6][HardInstance::kUninformative] == 1.0);
  CHECK(needle.mdp.transitions[HardInstance::kStart][6][HardInstance::kInformative] == 1.0);
}

TEST_CASE("exploratory policy and conditioning") {
  HardInstance inst = build_hard_instance(8, 3, 3, 1.0 / 24.0, 64, 3, 3);
  StationaryPolicy policy = exploratory_policy_for(inst);
  for (const Vec& row : policy.rows) {
    double total = 0.0;
    for (double p : row) {
      CHECK(p >= 0.0);
      total += p;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(policy.rows[HardInstance::kStart][2] == 1.0);

  SUBCASE("null variant is rejected") {
    HardInstance null_inst = build_hard_instance(8, 3, 0, 1.0 / 24.0, 64, 3, 3);
    CHECK_THROWS(exploratory_policy_for(null_inst));
  }
  SUBCASE("theta-block conditioning is a dimension-free constant") {
    Vec values;
    for (int d : {8, 16, 32}) {
      HardInstance hi = build_hard_instance(d, 3, 1, 1.0 / 24.0, 64, 3, 3);
      ConditioningReport cond = exploratory_conditioning(hi);
      CHECK(cond.theta_block_sigma_min > 0.0);
      // Full batches of orthogonal rows at this cap: identity over the theta
      // block, weighted by one step of three.
      CHECK(cond.theta_block_sigma_min == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
      values.push_back(cond.theta_block_sigma_min);
      // The start-action block is untouched under this policy, so the full
      // spectrum bottoms out at zero; that is a property of the construction.
      CHECK(cond.full.sigma_min == doctest::Approx(0.0).epsilon(1e-12));
    }
    double lo = *std::min_element(values.begin(), values.end());
    double hi = *std::max_element(values.begin(), values.end());
    CHECK(hi < 2.0 * lo);
  }
}

TEST_CASE("perturbation direction selection") {
  HardInstance inst = build_hard_instance(10, 3, 2, 1.0 / 24.0, 24, 13, 3);
  SUBCASE("zero weights give the lexicographically smallest candidate") {
    Vec weights(inst.a2_patterns.size(), 0.0);
    std::vector<signed char> z = select_z_tilde(inst, weights);
    // Smallest support {s-1, s} with both signs negative.
    for (int j = 0; j < 10; ++j) {
      signed char expect = (j == 2 || j == 3) ? -1 : 0;
      CHECK(z[j] == expect);
    }
  }
  SUBCASE("selection matches an independent enumeration oracle") {
    RngStream rng(17);
    Vec weights(inst.a2_patterns.size(), 0.0);
    for (double& w : weights) w = std::floor(rng.next_range(0.0, 4.0));
    std::vector<signed char> z = select_z_tilde(inst, weights);

    double best = 1e300;
    std::vector<signed char> best_z;
    // Brute force over supports {i,j} in coordinates 2..8 and sign masks,
    // in the same lexicographic-minimum convention.
    std::vector<std::vector<signed char>> all;
    for (int i = 2; i <= 8; ++i)
      for (int j = i + 1; j <= 8; ++j)
        for (int si : {-1, 1})
          for (int sj : {-1, 1}) {
            std::vector<signed char> cand(10, 0);
            cand[i] = static_cast<signed char>(si);
            cand[j] = static_cast<signed char>(sj);
            all.push_back(cand);
          }
    std::sort(all.begin(), all.end());
    for (const auto& cand : all) {
      double acc = 0.0;
      for (std::size_t a = 0; a < inst.a2_patterns.size(); ++a) {
        double overlap = 0.0;
        for (int j = 0; j < 10; ++j)
          overlap += static_cast<double>(cand[j]) * inst.a2_patterns[a][j];
        acc += weights[a] * overlap * overlap;
      }
      if (acc < best) {
        best = acc;
        best_z = cand;
      }
    }
    CHECK(z == best_z);
  }
  SUBCASE("structure of the returned direction") {
    Vec weights(inst.a2_patterns.size(), 1.0);
    std::vector<signed char> z = select_z_tilde(inst, weights);
    CHECK(z[0] == 0);
    CHECK(z[1] == 0);
    CHECK(z[9] == 0);
    int l1 = 0;
    for (signed char v : z) l1 += std::abs(v);
    CHECK(l1 == 2);
  }
  SUBCASE("narrow families are rejected") {
    HardInstance narrow = build_hard_instance(5, 3, 1, 1.0 / 24.0, 8, 13, 3);
    Vec weights(narrow.a2_patterns.size(), 0.0);
    CHECK_THROWS(select_z_tilde(narrow, weights));
  }
}

TEST_CASE("alternative twin") {
  HardInstance inst = build_hard_instance(10, 3, 2, 1.0 / 24.0, 24, 14, 3);
  Vec weights(inst.a2_patterns.size(), 1.0);
  std::vector<signed char> z = select_z_tilde(inst, weights);
  HardInstance alt = build_alternative_instance(inst, z);
  CHECK(alt.is_alternative);
  CHECK(validate_mdp(alt.mdp).ok());

  SUBCASE("degenerate directions are rejected") {
    std::vector<signed char> zero(10, 0);
    CHECK_THROWS(build_alternative_instance(inst, zero));
    std::vector<signed char> wrong(10, 0);
    wrong[0] = 1;
    wrong[4] = 1;  // support touches theta's leading block
    CHECK_THROWS(build_alternative_instance(inst, wrong));
  }
  SUBCASE("the matching action's success probability rises by 2*eps*(s-1)") {
    // The twin's menu contains the action whose pattern equals z.
    auto it = std::find(alt.a2_patterns.begin(), alt.a2_patterns.end(), z);
    REQUIRE(it != alt.a2_patterns.end());
    int a = static_cast<int>(it - alt.a2_patterns.begin());
    double before = std::max(0.0, pattern_theta(z, inst.theta));
    double after = alt.mdp.transitions[HardInstance::kUninformative][a][HardInstance::kGood];
    CHECK(after - before == doctest::Approx(2.0 * inst.epsilon * 2).epsilon(1e-12));
  }
  SUBCASE("everything but theta is shared") {
    CHECK(alt.needle == inst.needle);
    CHECK(alt.a3_patterns == inst.a3_patterns);
    for (std::size_t a = 0; a < inst.a2_patterns.size(); ++a)
      CHECK(alt.a2_patterns[a] == inst.a2_patterns[a]);
    CHECK(alt.theta == inst.theta);
    for (int j = 0; j < 10; ++j)
      CHECK(alt.theta_tilde[j] ==
            doctest::Approx(inst.theta[j] + 2.0 * inst.epsilon * z[j]).epsilon(1e-15));
  }
}

TEST_CASE("stopping time and visitation event") {
  HardInstance inst = build_hard_instance(8, 3, 3, 1.0 / 24.0, 16, 15, 3);

  SUBCASE("scripted runs match hand evaluation") {
    // Five episodes; the needle action (index 2) first appears in episode 4.
    std::vector<Trajectory> runs;
    std::vector<int> start_actions = {0, 5, 1, 2, 2};
    std::vector<int> bandit_actions = {3, 0, 1, 0, 0};
    for (int n = 0; n < 5; ++n) {
      Trajectory t;
      t.episode = n;
      int dest = start_actions[n] == 2 ? HardInstance::kInformative
                                       : HardInstance::kUninformative;
      t.steps.push_back({HardInstance::kStart, start_actions[n], 0.0, dest});
      t.steps.push_back({dest, bandit_actions[n], 0.0, HardInstance::kBad});
      t.steps.push_back({HardInstance::kBad, 0, 0.0, HardInstance::kBad});
      runs.push_back(t);
    }
    HardDiagnostics diag = hard_run_diagnostics(runs, inst, 5);
    CHECK(diag.tau == 4);
    double hand_sum = 0.0;
    for (int n = 0; n < 3; ++n) {  // episodes before tau
      const auto& p = inst.a2_patterns[bandit_actions[n]];
      hand_sum += p[0] + p[1];
    }
    CHECK(diag.visitation_sum == doctest::Approx(hand_sum).epsilon(1e-12));
    CHECK(diag.event_d == (hand_sum <= 4.0 * 3.0 / 2.0));
    CHECK(diag.a2_visit_counts[bandit_actions[0]] >= 1.0);
  }
  SUBCASE("immediate needle gives tau one, absent needle gives tau N") {
    std::vector<Trajectory> immediate(1);
    immediate[0].steps = {{HardInstance::kStart, 2, 0.0, HardInstance::kInformative},
                          {HardInstance::kInformative, 0, 0.0, HardInstance::kGood},
                          {HardInstance::kGood, 0, 1.0, HardInstance::kGood}};
    CHECK(hard_run_diagnostics(immediate, inst, 7).tau == 1);

    std::vector<Trajectory> never(4);
    for (auto& t : never)
      t.steps = {{HardInstance::kStart, 0, 0.0, HardInstance::kUninformative},
                 {HardInstance::kUninformative, 0, 0.0, HardInstance::kBad},
                 {HardInstance::kBad, 0, 0.0, HardInstance::kBad}};
    CHECK(hard_run_diagnostics(never, inst, 4).tau == 4);
  }
}

TEST_CASE("uniform play needs about d episodes to find the needle") {
  const int d = 16;
  const long n = 16;
  double mean_tau = 0.0;
  int runs_total = 0;
  for (int k = 1; k <= d; ++k) {
    HardInstance inst = build_hard_instance(d, 3, k, 1.0 / 24.0, 16, 21, 3);
    for (int seed = 0; seed < 16; ++seed) {
      auto runs = uniform_rollout(inst, n, 400 + seed * 31 + k);
      mean_tau += static_cast<double>(hard_run_diagnostics(runs, inst, n).tau);
      ++runs_total;
    }
  }
  mean_tau /= runs_total;
  CHECK(mean_tau >= std::min<double>(n, d / 2.0));
}

TEST_CASE("trajectory-law divergence") {
  HardInstance inst = build_hard_instance(16, 3, 2, 1.0 / 24.0, 24, 16, 3);

  SUBCASE("identical twins have zero divergence") {
    Vec weights(inst.a2_patterns.size(), 2.0);
    KlReport report = stepwise_kl(inst, inst, weights);
    CHECK(report.total == 0.0);
    CHECK(!report.infinite);
  }
  SUBCASE("single-action trace matches the closed-form divergence") {
    HardInstance wide = build_hard_instance(16, 3, 2, 1.0 / 24.0, 24, 18, 3);
    // A pattern supported entirely past theta's leading block has q = 0 in
    // the base instance; a direction matching its signs lifts it to 4 eps.
    int target = -1;
    for (std::size_t a = 0; a < wide.a2_patterns.size(); ++a) {
      const auto& p = wide.a2_patterns[a];
      if (p[0] == 0 && p[1] == 0) {
        target = static_cast<int>(a);
        break;
      }
    }
    REQUIRE(target >= 0);
    std::vector<signed char> z(16, 0);
    for (int j = 2; j < 15; ++j) z[j] = wide.a2_patterns[target][j];
    HardInstance alt = build_alternative_instance(wide, z);
    Vec base_weights(wide.a2_patterns.size(), 0.0);
    base_weights[target] = 3.0;
    KlReport report = stepwise_kl(wide, alt, base_weights);
    double q_alt = 4.0 * wide.epsilon;  // overlap is exactly s-1 = 2
    double expect = 3.0 * std::log(1.0 / (1.0 - q_alt));
    CHECK(report.total == doctest::Approx(expect).epsilon(1e-12));
    CHECK(!report.infinite);
  }
  SUBCASE("pipeline traces stay under the published ceiling") {
    // Trace lengths are sized so an overlap-free direction always exists:
    // (s-1)(N-1) visited support slots cannot cover the candidate support
    // range. The selected direction then has zero overlap and the divergence
    // vanishes; the ceiling holds with slack.
    int checked = 0;
    for (int trial = 0; trial < 20; ++trial) {
      int d = trial % 2 == 0 ? 16 : 20;
      int s = trial % 2 == 0 ? 3 : 4;
      long n = trial % 2 == 0 ? 6 : 5;
      HardInstance hi =
          build_hard_instance(d, s, 1 + trial % d, 1.0 / (8.0 * s), 32, 600 + trial, 3);
      auto runs = uniform_rollout(hi, n, 700 + trial);
      HardDiagnostics diag = hard_run_diagnostics(runs, hi, n);
      std::vector<signed char> z = select_z_tilde(hi, diag.a2_visit_counts);
      HardInstance alt = build_alternative_instance(hi, z);
      KlReport report = stepwise_kl(hi, alt, diag.a2_visit_counts);
      CHECK(!report.infinite);
      CHECK(report.total <= report.bound + 1e-9);
      ++checked;
    }
    CHECK(checked == 20);
  }
  SUBCASE("the canonical gap keeps the ceiling below one eighth") {
    for (int s : {2, 3, 5, 9}) {
      double eps = 1.0 / (8.0 * s);
      double bound = 8.0 * eps * eps * (s - 1) * (s - 1);
      CHECK(bound < 1.0 / 8.0);
    }
  }
  SUBCASE("mismatched zero probabilities raise the infinite flag") {
    // Hand-built twin whose theta_tilde zeroes an action that has positive
    // probability in the base instance.
    HardInstance alt = inst;
    alt.is_alternative = true;
    alt.z_tilde.assign(16, 0);
    alt.theta_tilde = inst.theta;
    alt.theta_tilde[0] = 0.0;
    alt.theta_tilde[1] = 0.0;
    Vec weights(inst.a2_patterns.size(), 0.0);
    // Find a pattern supported entirely on the leading block: q > 0, q_alt = 0.
    bool found = false;
    for (std::size_t a = 0; a < inst.a2_patterns.size(); ++a) {
      const auto& p = inst.a2_patterns[a];
      if (p[0] == 1 && p[1] == 1) {
        weights[a] = 1.0;
        found = true;
        break;
      }
    }
    REQUIRE(found);
    KlReport report = stepwise_kl(inst, alt, weights);
    CHECK(report.infinite);
  }
}

TEST_CASE("brute-force exploratory search") {
  SUBCASE("single candidate is returned unchanged") {
    SparseLinearMdp mdp = random_sparse_mdp(3, 2, 6, 3, 2, 31);
    StationaryPolicy uniform = uniform_policy(mdp);
    auto [policy, value] = find_exploratory_policy_bruteforce(mdp, {uniform}, 0);
    CHECK(policy.rows == uniform.rows);
    CHECK(value == doctest::Approx(expected_covariance(mdp, uniform).sigma_min).epsilon(1e-10));
  }
  SUBCASE("uniform play wins on a symmetric two-state instance") {
    SparseLinearMdp mdp = random_sparse_mdp(2, 2, 4, 4, 2, 32);
    // Symmetric kernel and one-hot features: any determinism starves a pair.
    mdp.transitions = {{{0.5, 0.5}, {0.5, 0.5}}, {{0.5, 0.5}, {0.5, 0.5}}};
    mdp.psi = {{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}};
    mdp.initial_distribution = {0.5, 0.5};
    std::vector<StationaryPolicy> candidates;
    for (int a0 : {0, 1})
      for (int a1 : {0, 1}) {
        StationaryPolicy det;
        det.rows = {{a0 == 0 ? 1.0 : 0.0, a0 == 0 ? 0.0 : 1.0},
                    {a1 == 0 ? 1.0 : 0.0, a1 == 0 ? 0.0 : 1.0}};
        candidates.push_back(det);
      }
    candidates.push_back(uniform_policy(mdp));
    auto [policy, value] = find_exploratory_policy_bruteforce(mdp, candidates, 4);
    CHECK(value == doctest::Approx(expected_covariance(mdp, uniform_policy(mdp)).sigma_min)
                       .epsilon(1e-10));
    for (const Vec& row : policy.rows) CHECK(row == Vec{0.5, 0.5});
  }
}

TEST_CASE("builder fuzz: every shape yields a valid instance") {
  // Sweeps the enumerated/batched menu paths, partial batches, tiny caps,
  // the null variant, and both gap extremes.
  RngStream rng(777);
  for (int trial = 0; trial < 60; ++trial) {
    int d = 2 + rng.next_below(30);
    int s = 2 + rng.next_below(std::min(d - 1, 5) + 1);
    if (s > d) s = d;
    int k = rng.next_below(d + 1);  // 0 included
    int cap = 2 + rng.next_below(63);
    int horizon = 1 + rng.next_below(5);
    double eps_max = 0.5 / (s - 1);
    double eps = trial % 3 == 0 ? eps_max : eps_max * rng.next_range(0.05, 0.95);
    HardInstance inst = build_hard_instance(d, s, k, eps, cap, 5000 + trial, horizon);
    ValidationReport rep = validate_mdp(inst.mdp);
    if (!rep.ok()) {
      CAPTURE(d);
      CAPTURE(s);
      CAPTURE(k);
      CAPTURE(cap);
      FAIL_CHECK(rep.to_string());
    }
    CHECK(inst.mdp.feature_dim() == 2 * d + 3);
    CHECK(static_cast<int>(inst.a3_patterns.size()) <= cap);
    CHECK(static_cast<int>(inst.a2_patterns.size()) <= cap);
    // Same seed and shape, different needle: menus must be identical.
    if (k >= 1) {
      HardInstance other = build_hard_instance(d, s, 0, eps, cap, 5000 + trial, horizon);
      CHECK(other.a2_patterns == inst.a2_patterns);
      CHECK(other.a3_patterns == inst.a3_patterns);
    }
  }
}

TEST_CASE("hard instance serialization carries the sidecar block") {
  HardInstance inst = build_hard_instance(8, 3, 2, 1.0 / 24.0, 16, 33, 3);
  std::string path = "/tmp/sparse_rl_hard_test.json";
  save_hard_instance(inst, path);
  SparseLinearMdp loaded = load_instance(path);
  CHECK(validate_mdp(loaded).ok());
  CHECK(loaded.feature_dim() == 19);
  std::ifstream in(path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(text.find("\"hard\"") != std::string::npos);
  CHECK(text.find("\"action_cap\"") != std::string::npos);
  std::remove(path.c_str());
}
