#include "sparse_rl/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "sparse_rl/hardbench.hpp"

namespace sparse_rl {

namespace {

using nlohmann::json;

AgentKind agent_from_name(const std::string& name) {
  if (name == "lasso-fqi") return AgentKind::lasso_fqi;
  if (name == "uniform-random") return AgentKind::uniform_random;
  if (name == "ridge-fqi-etc") return AgentKind::ridge_fqi_etc;
  if (name == "oracle-optimal") return AgentKind::oracle_optimal;
  throw std::invalid_argument("unknown agent kind: " + name);
}

std::string agent_name(AgentKind kind) {
  switch (kind) {
    case AgentKind::lasso_fqi: return "lasso-fqi";
    case AgentKind::uniform_random: return "uniform-random";
    case AgentKind::ridge_fqi_etc: return "ridge-fqi-etc";
    case AgentKind::oracle_optimal: return "oracle-optimal";
  }
  return "?";
}

BudgetMode budget_from_name(const std::string& name) {
  if (name == "oracle") return BudgetMode::oracle;
  if (name == "conservative") return BudgetMode::conservative;
  if (name == "fixed") return BudgetMode::fixed;
  throw std::invalid_argument("unknown budget mode: " + name);
}

std::string budget_name(BudgetMode mode) {
  switch (mode) {
    case BudgetMode::oracle: return "oracle";
    case BudgetMode::conservative: return "conservative";
    case BudgetMode::fixed: return "fixed";
  }
  return "?";
}

}  // namespace

ExperimentConfig config_from_json_text(const std::string& text) {
  json j = json::parse(text);
  ExperimentConfig config;
  const json& inst = j.at("instance");
  std::string type = inst.at("type").get<std::string>();
  if (type == "random-sparse") {
    RandomInstanceSpec spec;
    spec.num_states = inst.at("num_states").get<int>();
    spec.num_actions = inst.at("num_actions").get<int>();
    spec.d = inst.at("d").get<int>();
    spec.s = inst.at("s").get<int>();
    spec.horizon = inst.at("horizon").get<int>();
    config.instance = spec;
  } else if (type == "hard") {
    HardInstanceSpec spec;
    spec.d = inst.at("d").get<int>();
    spec.s = inst.at("s").get<int>();
    spec.k = inst.at("k").get<int>();
    spec.epsilon = inst.at("epsilon").get<double>();
    spec.cap = inst.at("cap").get<int>();
    spec.horizon = inst.at("horizon").get<int>();
    config.instance = spec;
  } else if (type == "file") {
    config.instance = FileInstanceSpec{inst.at("path").get<std::string>()};
  } else {
    throw std::invalid_argument("unknown instance type: " + type);
  }
  config.agent = agent_from_name(j.at("agent").get<std::string>());
  config.n_grid = j.at("n_grid").get<std::vector<long>>();
  config.replicates = j.at("replicates").get<int>();
  config.master_seed = j.at("master_seed").get<std::uint64_t>();
  if (j.contains("budget")) {
    const json& b = j.at("budget");
    config.budget_mode = budget_from_name(b.value("mode", "conservative"));
    config.fixed_n1 = b.value("fixed_n1", 0L);
    config.n23_coefficient = b.value("n23_coefficient", 0.0);
    config.c_min = b.value("c_min", 0.0);
  }
  config.delta = j.value("delta", 0.1);
  if (j.contains("lasso")) {
    const json& l = j.at("lasso");
    config.lasso.lambda1 = l.value("lambda1", 0.0);
    config.lasso.tol = l.value("tol", 1e-8);
    config.lasso.max_sweeps = l.value("max_sweeps", 10000);
  }
  config.lasso.delta = config.delta;
  std::string rule = j.value("lambda_rule", "fold-size");
  if (rule == "fold-size")
    config.lambda_rule = LambdaRule::fold_size;
  else if (rule == "episode-count")
    config.lambda_rule = LambdaRule::episode_count;
  else
    throw std::invalid_argument("unknown lambda rule: " + rule);
  config.ridge_lambda2 = j.value("ridge_lambda2", 0.0);
  config.out_dir = j.value("out_dir", std::string());
  config.write_runs = j.value("write_runs", false);
  config.threads = j.value("threads", 0);
  if (config.n_grid.empty()) throw std::invalid_argument("n_grid must be nonempty");
  if (config.replicates < 1) throw std::invalid_argument("replicates must be >= 1");
  return config;
}

ExperimentConfig config_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return config_from_json_text(buf.str());
}

std::string config_to_json_text(const ExperimentConfig& config) {
  json j;
  json inst;
  if (const auto* r = std::get_if<RandomInstanceSpec>(&config.instance)) {
    inst = {{"type", "random-sparse"}, {"num_states", r->num_states},
            {"num_actions", r->num_actions}, {"d", r->d}, {"s", r->s}, {"horizon", r->horizon}};
  } else if (const auto* h = std::get_if<HardInstanceSpec>(&config.instance)) {
    inst = {{"type", "hard"}, {"d", h->d}, {"s", h->s}, {"k", h->k},
            {"epsilon", h->epsilon}, {"cap", h->cap}, {"horizon", h->horizon}};
  } else {
    inst = {{"type", "file"}, {"path", std::get<FileInstanceSpec>(config.instance).path}};
  }
  j["instance"] = inst;
  j["agent"] = agent_name(config.agent);
  j["n_grid"] = config.n_grid;
  j["replicates"] = config.replicates;
  j["master_seed"] = config.master_seed;
  j["budget"] = {{"mode", budget_name(config.budget_mode)},
                 {"fixed_n1", config.fixed_n1},
                 {"n23_coefficient", config.n23_coefficient},
                 {"c_min", config.c_min}};
  j["delta"] = config.delta;
  j["lasso"] = {{"lambda1", config.lasso.lambda1},
                {"tol", config.lasso.tol},
                {"max_sweeps", config.lasso.max_sweeps}};
  j["lambda_rule"] = config.lambda_rule == LambdaRule::fold_size ? "fold-size" : "episode-count";
  j["ridge_lambda2"] = config.ridge_lambda2;
  j["out_dir"] = config.out_dir;
  j["write_runs"] = config.write_runs;
  j["threads"] = config.threads;
  return j.dump(2);
}

std::uint64_t config_hash(const ExperimentConfig& config) {
  ExperimentConfig canonical = config;
  canonical.out_dir.clear();  // hashes identify settings, not destinations
  canonical.threads = 0;
  std::string text = config_to_json_text(canonical);
  return fnv1a64({text.data(), text.size()});
}

SparseLinearMdp build_instance(const InstanceSpec& spec, std::uint64_t master_seed) {
  if (const auto* r = std::get_if<RandomInstanceSpec>(&spec))
    return random_sparse_mdp(r->num_states, r->num_actions, r->d, r->s, r->horizon, master_seed);
  if (const auto* h = std::get_if<HardInstanceSpec>(&spec))
    return build_hard_instance(h->d, h->s, h->k, h->epsilon, h->cap, master_seed, h->horizon).mdp;
  return load_instance(std::get<FileInstanceSpec>(spec).path);
}

namespace {

ExplorationBudget schedule_budget(const ExperimentConfig& config, const SparseLinearMdp& mdp,
                                  long n, double c_min_value) {
  if (config.budget_mode == BudgetMode::fixed) {
    long fixed = config.fixed_n1;
    if (config.n23_coefficient > 0.0)
      fixed = static_cast<long>(
          std::ceil(config.n23_coefficient * std::cbrt(static_cast<double>(n) * n)));
    return choose_exploration_length(n, mdp.horizon, mdp.feature_dim(),
                                     std::max(1, mdp.sparsity), 1.0, config.delta,
                                     BudgetMode::fixed, std::max(1L, fixed));
  }
  return choose_exploration_length(n, mdp.horizon, mdp.feature_dim(), std::max(1, mdp.sparsity),
                                   c_min_value, config.delta, config.budget_mode, 0);
}

}  // namespace

RegretCurve run_experiment(const ExperimentConfig& config) {
  if (config.n_grid.empty()) throw std::invalid_argument("run_experiment: empty grid");
  if (config.replicates < 1) throw std::invalid_argument("run_experiment: need replicates >= 1");
  for (std::size_t i = 0; i < config.n_grid.size(); ++i)
    for (std::size_t j = i + 1; j < config.n_grid.size(); ++j)
      if (config.n_grid[i] == config.n_grid[j])
        throw std::invalid_argument("run_experiment: duplicate grid point");

  const SparseLinearMdp mdp = build_instance(config.instance, config.master_seed);
  const StationaryPolicy explore = uniform_policy(mdp);

  double c_min_value = config.c_min;
  if (config.budget_mode == BudgetMode::oracle && c_min_value <= 0.0)
    c_min_value = std::max(1e-6, expected_covariance(mdp, explore).sigma_min);

  struct Cell {
    long n = 0;
    int replicate = 0;
    double regret = 0.0;
  };
  std::vector<Cell> cells;
  for (long n : config.n_grid)
    for (int r = 0; r < config.replicates; ++r) cells.push_back({n, r, 0.0});

  const bool write_outputs = !config.out_dir.empty();
  if (write_outputs) std::filesystem::create_directories(config.out_dir);

  auto run_cell = [&](Cell& cell) {
    std::uint64_t seed =
        RngStream::keyed({config.master_seed, static_cast<std::uint64_t>(cell.n),
                          static_cast<std::uint64_t>(cell.replicate)})
            .next_u64();
    RunRecord record;
    switch (config.agent) {
      case AgentKind::lasso_fqi: {
        ExplorationBudget budget = schedule_budget(config, mdp, cell.n, c_min_value);
        record = run_online_lasso_fqi(mdp, explore, cell.n, budget, config.lasso,
                                      config.lambda_rule, seed);
        break;
      }
      case AgentKind::uniform_random:
        record = run_baseline(mdp, BaselineKind::uniform_random, cell.n, {}, seed);
        break;
      case AgentKind::oracle_optimal:
        record = run_baseline(mdp, BaselineKind::oracle_optimal, cell.n, {}, seed);
        break;
      case AgentKind::ridge_fqi_etc: {
        BaselineParams params;
        params.n1 = schedule_budget(config, mdp, cell.n, c_min_value).n1;
        params.lambda2 = config.ridge_lambda2;
        params.explore_policy = &explore;
        record = run_baseline(mdp, BaselineKind::ridge_fqi_etc, cell.n, params, seed);
        break;
      }
    }
    cell.regret = record.cumulative_regret();
    if (write_outputs && config.write_runs) {
      std::string stem = config.out_dir + "/run_N" + std::to_string(cell.n) + "_r" +
                         std::to_string(cell.replicate);
      write_run_csv(record, stem + ".csv");
      write_run_manifest(record, stem + ".json");
    }
  };

  int n_threads = config.threads > 0 ? config.threads
                                     : static_cast<int>(std::thread::hardware_concurrency());
  if (n_threads < 1) n_threads = 1;
  n_threads = std::min<int>(n_threads, static_cast<int>(cells.size()));
  if (n_threads <= 1 || (write_outputs && config.write_runs)) {
    for (Cell& cell : cells) run_cell(cell);
  } else {
    std::vector<std::thread> pool;
    std::size_t next = 0;
    std::mutex mu;
    for (int t = 0; t < n_threads; ++t) {
      pool.emplace_back([&]() {
        for (;;) {
          std::size_t idx;
          {
            std::lock_guard<std::mutex> lock(mu);
            if (next >= cells.size()) return;
            idx = next++;
          }
          run_cell(cells[idx]);
        }
      });
    }
    for (std::thread& t : pool) t.join();
  }

  RegretCurve curve;
  curve.n = config.n_grid;
  curve.replicates.assign(config.n_grid.size(), Vec(config.replicates, 0.0));
  for (const Cell& cell : cells) {
    std::size_t gi =
        std::find(config.n_grid.begin(), config.n_grid.end(), cell.n) - config.n_grid.begin();
    curve.replicates[gi][cell.replicate] = cell.regret;
  }
  curve.mean.resize(curve.n.size());
  curve.se.resize(curve.n.size());
  for (std::size_t i = 0; i < curve.n.size(); ++i) {
    double mean = 0.0;
    for (double v : curve.replicates[i]) mean += v;
    mean /= config.replicates;
    double var = 0.0;
    for (double v : curve.replicates[i]) var += (v - mean) * (v - mean);
    var = config.replicates > 1 ? var / (config.replicates - 1) : 0.0;
    curve.mean[i] = mean;
    curve.se[i] = std::sqrt(var / config.replicates);
  }

  if (write_outputs) {
    write_curve_csv(curve, config.out_dir + "/curve.csv");
    write_summary_csv(curve, config.out_dir + "/summary.csv");
    json manifest = json::parse(config_to_json_text(config));
    manifest["config_hash"] = config_hash(config);
    std::ofstream out(config.out_dir + "/manifest.json");
    if (!out) throw std::runtime_error("cannot write manifest in " + config.out_dir);
    out << manifest.dump(2) << "\n";
  }
  return curve;
}

SlopeFit fit_regret_slope(const RegretCurve& curve) {
  SlopeFit fit;
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < curve.n.size(); ++i) {
    if (!(curve.mean[i] > 0.0)) {
      fit.warnings.push_back("excluded N=" + std::to_string(curve.n[i]) +
                             " (nonpositive mean regret)");
      continue;
    }
    xs.push_back(std::log(static_cast<double>(curve.n[i])));
    ys.push_back(std::log(curve.mean[i]));
  }
  const int m = static_cast<int>(xs.size());
  if (m < 3) throw std::invalid_argument("fit_regret_slope: fewer than 3 usable points");
  fit.used_points = m;
  double mx = 0.0, my = 0.0;
  for (int i = 0; i < m; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= m;
  my /= m;
  double sxx = 0.0, sxy = 0.0;
  for (int i = 0; i < m; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ssr = 0.0;
  for (int i = 0; i < m; ++i) {
    double resid = ys[i] - (fit.intercept + fit.slope * xs[i]);
    ssr += resid * resid;
  }
  double se = m > 2 ? std::sqrt(ssr / (m - 2) / sxx) : 0.0;
  fit.half_width = 1.959963984540054 * se;
  return fit;
}

void write_curve_csv(const RegretCurve& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "N,replicate,cumulative_regret\n";
  for (std::size_t i = 0; i < curve.n.size(); ++i)
    for (std::size_t r = 0; r < curve.replicates[i].size(); ++r)
      out << curve.n[i] << "," << r << "," << format_g17(curve.replicates[i][r]) << "\n";
}

void write_summary_csv(const RegretCurve& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "N,mean,stderr\n";
  for (std::size_t i = 0; i < curve.n.size(); ++i)
    out << curve.n[i] << "," << format_g17(curve.mean[i]) << "," << format_g17(curve.se[i])
        << "\n";
}

RegretCurve load_curve_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty curve file " + path);
  bool summary = line.rfind("N,mean", 0) == 0;
  std::map<long, std::vector<double>> by_n;
  std::vector<long> order;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::getline(ls, cell, ',');
    long n = std::stol(cell);
    std::getline(ls, cell, ',');
    double second = std::stod(cell);
    double value = second;
    if (!summary) {
      std::getline(ls, cell, ',');
      value = std::stod(cell);
    }
    if (!by_n.count(n)) order.push_back(n);
    by_n[n].push_back(value);
  }
  RegretCurve curve;
  for (long n : order) {
    curve.n.push_back(n);
    const std::vector<double>& vals = by_n[n];
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= vals.size();
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    var = vals.size() > 1 ? var / (vals.size() - 1) : 0.0;
    curve.replicates.push_back(vals);
    curve.mean.push_back(mean);
    curve.se.push_back(std::sqrt(var / vals.size()));
  }
  return curve;
}

}  // namespace sparse_rl
