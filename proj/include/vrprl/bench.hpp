#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "vrprl/env.hpp"
#include "vrprl/instances.hpp"
#include "vrprl/policy.hpp"
#include "vrprl/svrp.hpp"
#include "vrprl/training.hpp"

namespace vrprl {

enum class SolverKind { cw, sweep, exact, rl };

struct SolverSpec {
  SolverKind kind = SolverKind::cw;
  int cw_r = 1;
  int cw_m = 1;
  int sweep_r = 0;  // 0 = basic sweep, otherwise R random start angles
  DecodeMode mode = DecodeMode::greedy;
  int beam_width = 1;
  std::string checkpoint;
  bool split_mode = false;
  std::uint64_t seed = 0;

  // cw-greedy, cw-rnd(R,M), sw-basic, sw-rnd(R), exact, rl-greedy,
  // rl-sample, rl-bs(W); "-sd" marks split delivery.
  std::string tag() const;
  void validate() const;
};

// Accepts "cw", "sweep", "exact", "rl" or any tag produced by tag().
SolverSpec parse_solver(const std::string& text);
SolverSpec solver_from_json(const nlohmann::json& j);

// Loaded checkpoints, shared by every RL solver that names the same path.
class PolicyCache {
 public:
  const LoadedPolicy& get(const std::string& path);

 private:
  std::map<std::string, std::unique_ptr<LoadedPolicy>> cache_;
};

// Solves one instance; `ordinal` selects the rollout stream for sampling.
Solution run_solver(const SolverSpec& spec, const ProblemInstance& instance, PolicyCache& policies,
                    std::size_t ordinal = 0);

struct BenchConfig {
  std::string instances_path;                // used when set
  std::optional<GeneratorConfig> generator;  // otherwise generate `count`
  int count = 1000;
  std::vector<SolverSpec> solvers;
  std::string out_dir;
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
  static BenchConfig from_json(const nlohmann::json& j);
  std::vector<ProblemInstance> load_instances() const;
};

struct BenchRow {
  std::string instance_id;
  std::string solver;
  double length = 0.0;
  double wall_s = 0.0;
  bool feasible = false;
  std::string error;  // non-empty when the solver failed on this instance
  Solution solution;
};

struct SolverSummary {
  std::string solver;
  int instances = 0;
  int failed = 0;
  int infeasible = 0;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation
  double mean_wall_s = 0.0;
};

struct BenchResult {
  std::vector<BenchRow> rows;  // sorted by (instance_id, solver)
  std::vector<SolverSummary> summary;
};

BenchResult run_bench(const BenchConfig& cfg, const std::vector<ProblemInstance>& instances);
// Loads instances per the config, runs, and writes results.csv and
// summary.csv under out_dir.
BenchResult run_bench(const BenchConfig& cfg);

std::vector<SolverSummary> summarize(const std::vector<BenchRow>& rows);
void write_results_csv(const std::filesystem::path& path, const std::vector<BenchRow>& rows);
void write_summary_csv(const std::filesystem::path& path, const std::vector<SolverSummary>& summary);

// Lengths within this relative tolerance count as ties.
inline constexpr double kTieTolerance = 1e-9;

struct WinRateMatrix {
  std::vector<std::string> solvers;
  // Percentages; wins[a][b] = share of instances where a is strictly shorter
  // than b. Diagonal entries are NaN.
  std::vector<std::vector<double>> wins;
  std::vector<std::vector<double>> ties;
};

WinRateMatrix win_rate(const std::vector<BenchRow>& rows);
void write_win_rate_csv(const std::filesystem::path& path, const WinRateMatrix& m);

struct GapStats {
  std::string solver;
  std::vector<std::string> instance_ids;
  std::vector<double> gaps;  // (length - ref) / ref
  double mean = 0.0;
  double min = 0.0;
  double q25 = 0.0;
  double median = 0.0;
  double q75 = 0.0;
  double max = 0.0;
};

std::vector<GapStats> gap_stats(const std::vector<BenchRow>& rows, const std::string& reference_solver);
void write_gap_csv(const std::filesystem::path& path, const std::vector<GapStats>& gaps);

// ---- stochastic VRP ------------------------------------------------------

struct SvrpBenchRow {
  std::string strategy;
  std::vector<int> satisfied;  // per episode
  std::vector<int> arrived;
  double mean_satisfied = 0.0;
  double stddev = 0.0;
  double std_error = 0.0;
  double percent_of_arrived = 0.0;
};

// Strategies: random, largest_demand, max_reachable, or "policy" (actions
// sampled from `policy`, required in that case; argmax tends to lock onto
// "stay"). Episode e of every strategy uses arrival seed derive_seed(seed, e)
// and a per-episode decision stream shared by the random strategies.
std::vector<SvrpBenchRow> svrp_bench(const SvrpConfig& cfg, const std::vector<std::string>& strategies,
                                     int episodes = 100, std::uint64_t seed = 0,
                                     const LoadedPolicy* policy = nullptr);
void write_svrp_csv(const std::filesystem::path& path, const std::vector<SvrpBenchRow>& rows);

// Linear-interpolated quantile of an ascending-sorted vector.
double quantile_sorted(const std::vector<double>& sorted, double q);

}  // namespace vrprl
