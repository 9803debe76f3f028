#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "sparse_rl/agents.hpp"

namespace sparse_rl {

struct RandomInstanceSpec {
  int num_states = 0;
  int num_actions = 0;
  int d = 0;
  int s = 0;
  int horizon = 0;
};

struct HardInstanceSpec {
  int d = 0;
  int s = 0;
  int k = 0;
  double epsilon = 0.0;
  int cap = 0;
  int horizon = 0;
};

struct FileInstanceSpec {
  std::string path;
};

using InstanceSpec = std::variant<RandomInstanceSpec, HardInstanceSpec, FileInstanceSpec>;

enum class AgentKind { lasso_fqi, uniform_random, ridge_fqi_etc, oracle_optimal };

struct ExperimentConfig {
  InstanceSpec instance;
  AgentKind agent = AgentKind::lasso_fqi;
  std::vector<long> n_grid;
  int replicates = 1;
  std::uint64_t master_seed = 0;
  BudgetMode budget_mode = BudgetMode::conservative;
  long fixed_n1 = 0;            // fixed budget mode: absolute episode count ...
  double n23_coefficient = 0.0; // ... or, when positive, N1 = coeff * N^(2/3)
  double c_min = 0.0;           // oracle budget mode; 0 means compute from the instance
  double delta = 0.1;
  LassoConfig lasso;            // lambda1 == 0 means derive from lambda_rule
  LambdaRule lambda_rule = LambdaRule::fold_size;
  double ridge_lambda2 = 0.0;
  std::string out_dir;
  bool write_runs = false;
  int threads = 0;  // 0 means hardware concurrency
};

struct RegretCurve {
  std::vector<long> n;
  std::vector<double> mean;
  std::vector<double> se;
  std::vector<std::vector<double>> replicates;  // replicates[i][r]
};

ExperimentConfig config_from_json_text(const std::string& text);
ExperimentConfig config_from_file(const std::string& path);
std::string config_to_json_text(const ExperimentConfig& config);
std::uint64_t config_hash(const ExperimentConfig& config);

SparseLinearMdp build_instance(const InstanceSpec& spec, std::uint64_t master_seed);

// Runs the full (N grid x replicates) sweep. Every cell draws its randomness
// from a stream keyed by (master seed, N, replicate), so any cell is
// reproducible in isolation and identical configs give bitwise-identical
// outputs. Replicates run concurrently; aggregation order is fixed.
RegretCurve run_experiment(const ExperimentConfig& config);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double half_width = 0.0;  // 95% two-sided normal
  int used_points = 0;
  std::vector<std::string> warnings;
};

// Ordinary least squares on (log N, log mean regret). Points with
// nonpositive mean regret are excluded with a warning; fewer than three
// usable points is an error.
SlopeFit fit_regret_slope(const RegretCurve& curve);

void write_curve_csv(const RegretCurve& curve, const std::string& path);
void write_summary_csv(const RegretCurve& curve, const std::string& path);
RegretCurve load_curve_csv(const std::string& path);

}  // namespace sparse_rl
