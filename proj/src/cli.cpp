#include "sparse_rl/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sparse_rl/harness.hpp"
#include "sparse_rl/hardbench.hpp"

namespace sparse_rl {

namespace {

struct GlobalFlags {
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool quiet = false;
};

void info(const GlobalFlags& g, const std::string& line) {
  if (!g.quiet) std::cout << line << "\n";
}

int cmd_validate(const GlobalFlags& g, const std::string& path) {
  SparseLinearMdp mdp = load_instance(path);
  ValidationReport report = validate_mdp(mdp);
  if (report.ok()) {
    std::cout << "OK\n";
    return 0;
  }
  std::cout << report.to_string();
  (void)g;
  return 1;
}

int cmd_simulate(const GlobalFlags& g, const std::string& config_path) {
  ExperimentConfig config = config_from_file(config_path);
  if (g.seed) config.master_seed = *g.seed;
  if (!g.out_dir.empty()) config.out_dir = g.out_dir;
  RegretCurve curve = run_experiment(config);
  for (std::size_t i = 0; i < curve.n.size(); ++i)
    info(g, "N=" + std::to_string(curve.n[i]) + " mean_regret=" + format_g17(curve.mean[i]) +
                " stderr=" + format_g17(curve.se[i]));
  if (!config.out_dir.empty()) info(g, "results written to " + config.out_dir);
  return 0;
}

int cmd_hardbench(const GlobalFlags& g, int d, int s, int k, double epsilon, int cap,
                  std::uint64_t seed, int horizon, bool diagnose, long episodes) {
  if (g.seed) seed = *g.seed;
  HardInstance inst = build_hard_instance(d, s, k, epsilon, cap, seed, horizon);
  std::cout << "feature dimension " << inst.mdp.feature_dim() << "\n";
  double se = static_cast<double>(s - 1) * epsilon;
  std::cout << "KL bound " << format_g17(8.0 * se * se) << "\n";
  info(g, "uninformative menu " + std::to_string(inst.a2_patterns.size()) +
              ", informative menu " + std::to_string(inst.a3_patterns.size()));
  if (!g.out_dir.empty()) {
    std::filesystem::create_directories(g.out_dir);
    std::string path = g.out_dir + "/hard_instance.json";
    save_hard_instance(inst, path);
    info(g, "instance written to " + path);
  }
  if (diagnose) {
    if (k < 1) throw std::invalid_argument("diagnostics need k >= 1");
    long n_eps = episodes > 0 ? episodes : d;
    RngStream rng = RngStream::keyed({seed, 0x646961ULL});
    StationaryPolicy uniform = uniform_policy(inst.mdp);
    std::vector<Trajectory> runs;
    runs.reserve(n_eps);
    for (long n = 0; n < n_eps; ++n)
      runs.push_back(sample_episode(inst.mdp, uniform, rng, n, Phase::baseline));
    HardDiagnostics diag = hard_run_diagnostics(runs, inst, n_eps);
    std::cout << "tau " << diag.tau << "\n";
    std::cout << "event_d " << (diag.event_d ? "true" : "false") << "\n";
    std::vector<signed char> z = select_z_tilde(inst, diag.a2_visit_counts);
    HardInstance alt = build_alternative_instance(inst, z);
    KlReport kl = stepwise_kl(inst, alt, diag.a2_visit_counts);
    std::cout << "kl_total " << format_g17(kl.total) << "\n";
    std::cout << "kl_within_bound " << (kl.within_bound() ? "true" : "false") << "\n";
    ConditioningReport cond = exploratory_conditioning(inst);
    std::cout << "theta_block_sigma_min " << format_g17(cond.theta_block_sigma_min) << "\n";
  }
  return 0;
}

int cmd_lasso(const GlobalFlags& g, const std::string& data_path, double lambda) {
  RegressionDataset data = load_dataset_csv(data_path);
  LassoConfig cfg;
  cfg.lambda1 = lambda;
  LassoResult fit = lasso_fit(data, cfg);
  for (std::size_t j = 0; j < fit.w.size(); ++j)
    std::cout << "w_" << j + 1 << " " << format_g17(fit.w[j]) << "\n";
  info(g, std::string("converged ") + (fit.converged ? "true" : "false") + " in " +
              std::to_string(fit.sweeps) + " sweeps");
  return fit.converged ? 0 : 1;
}

int cmd_slope(const GlobalFlags& g, const std::string& curve_path) {
  RegretCurve curve = load_curve_csv(curve_path);
  SlopeFit fit = fit_regret_slope(curve);
  for (const std::string& w : fit.warnings) info(g, "warning: " + w);
  std::printf("slope %.4f ± %.4f\n", fit.slope, fit.half_width);
  info(g, "slope_full " + format_g17(fit.slope) + " intercept " + format_g17(fit.intercept) +
              " points " + std::to_string(fit.used_points));
  return 0;
}

int cmd_re(const GlobalFlags& g, const std::string& matrix_path, int s, int budget) {
  std::ifstream in(matrix_path);
  if (!in) throw std::runtime_error("cannot read " + matrix_path);
  std::vector<Vec> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    Vec row;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  const int d = static_cast<int>(rows.size());
  Matrix m(d, d);
  for (int i = 0; i < d; ++i) {
    if (static_cast<int>(rows[i].size()) != d)
      throw std::invalid_argument("matrix file is not square");
    for (int j = 0; j < d; ++j) m(i, j) = rows[i][j];
  }
  RngStream rng = RngStream::keyed({g.seed.value_or(1), 0x7265ULL});
  ReInterval interval = restricted_eigenvalue_estimate(m, s, budget, rng);
  std::cout << "lower " << format_g17(interval.lower) << "\n";
  std::cout << "upper " << format_g17(interval.upper) << "\n";
  return 0;
}

}  // namespace

int dispatch(int argc, const char* const* argv) {
  CLI::App app{"sparse linear MDP simulator and regret benchmark"};
  app.require_subcommand(1);

  GlobalFlags g;
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "override run seed")
                       ->envname("SPARSE_RL_SEED");
  app.add_option("--out", g.out_dir, "output directory");
  app.add_flag("--quiet", g.quiet, "suppress informational output");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "check an instance file");
  validate->add_option("instance", validate_path, "instance file")->required();

  std::string config_path;
  auto* simulate = app.add_subcommand("simulate", "run a seeded experiment sweep");
  simulate->add_option("--config", config_path, "experiment config file")->required();

  int hb_d = 8, hb_s = 3, hb_k = 1, hb_cap = 64, hb_h = 3;
  double hb_eps = 0.0;
  long hb_episodes = 0;
  bool hb_diag = false;
  std::uint64_t hb_seed = 1;
  auto* hardb = app.add_subcommand("hardbench", "build a needle-in-a-haystack instance");
  hardb->add_option("--d", hb_d, "ambient dimension")->required();
  hardb->add_option("--s", hb_s, "sparsity level")->required();
  hardb->add_option("--k", hb_k, "needle index (0 for the null variant)")->required();
  hardb->add_option("--epsilon", hb_eps, "gap parameter (default 1/(8s))");
  hardb->add_option("--cap", hb_cap, "action menu cap");
  hardb->add_option("--horizon", hb_h, "episode length");
  hardb->add_option("--instance-seed,--menu-seed", hb_seed,
                    "menu sampling seed (the global --seed overrides it)");
  hardb->add_option("--episodes", hb_episodes, "episodes for diagnostics");
  hardb->add_flag("--diagnose", hb_diag, "run stopping-time and divergence diagnostics");

  std::string lasso_data;
  double lasso_lambda = 0.0;
  auto* lasso = app.add_subcommand("lasso", "fit a standalone l1 regression");
  lasso->add_option("--data", lasso_data, "csv with columns y,phi_1..phi_d")->required();
  lasso->add_option("--lambda", lasso_lambda, "regularization level")->required();

  std::string slope_curve;
  auto* slope = app.add_subcommand("slope", "fit a log-log regret slope");
  slope->add_option("--curve", slope_curve, "curve csv")->required();

  std::string re_matrix;
  int re_s = 1, re_budget = 2000;
  auto* re = app.add_subcommand("re", "restricted eigenvalue interval");
  re->add_option("--matrix", re_matrix, "square csv matrix")->required();
  re->add_option("--s", re_s, "support size")->required();
  re->add_option("--budget", re_budget, "random support probes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  if (*seed_opt) g.seed = seed_value;

  try {
    if (*validate) return cmd_validate(g, validate_path);
    if (*simulate) return cmd_simulate(g, config_path);
    if (*hardb) {
      if (hb_eps <= 0.0) hb_eps = 1.0 / (8.0 * hb_s);
      return cmd_hardbench(g, hb_d, hb_s, hb_k, hb_eps, hb_cap, hb_seed, hb_h, hb_diag,
                           hb_episodes);
    }
    if (*lasso) return cmd_lasso(g, lasso_data, lasso_lambda);
    if (*slope) return cmd_slope(g, slope_curve);
    if (*re) return cmd_re(g, re_matrix, re_s, re_budget);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace sparse_rl
