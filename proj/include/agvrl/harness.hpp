#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "agvrl/trainers.hpp"

namespace agvrl::harness {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MissingRun : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunSpec {
  train::Algorithm algorithm = train::Algorithm::DDQN;
  std::filesystem::path map_path;
  train::TrainConfig train;
  pf::PFConfig pf;
  ekf::EKFConfig ekf;
  std::vector<std::uint64_t> seeds = {0};
  std::filesystem::path out_dir = "runs";
  bool save_checkpoint = false;
};

/// Builds a RunSpec from `train` subcommand arguments (without the program
/// or subcommand tokens). Precedence: flag > config file > default. Unknown
/// flags or config keys raise UsageError naming the offending token.
RunSpec parse_run_spec(const std::vector<std::string>& args);

/// Trains every seed and writes metrics.csv, curve.csv, summary.json and
/// paths.json into <out>/seed_<S>/ (plus checkpoint.json when requested).
/// Returns the per-seed output directories.
std::vector<std::filesystem::path> run_experiment(const RunSpec& spec);

struct RunRecord {  // one seed of one run, as loaded from summary.json
  std::string algorithm;
  std::uint64_t seed = 0;
  std::string map_path;
  std::optional<int> solution_episode;
  int episodes = 0;
  int target_hit = 0, obstacle_hit = 0, agent_collision = 0, timeout = 0;
  std::vector<int> final_path_moves;
  bool final_success = false;
  double wall_ms_total = 0.0;
};

struct AlgorithmStats {
  std::string algorithm;
  int runs = 0;
  int solved = 0;  // runs with a solution episode
  std::optional<int> solution_median, solution_min, solution_max;
  double mean_target_hit = 0.0, mean_obstacle_hit = 0.0, mean_timeout = 0.0;
  double mean_path_to_bfs_ratio = 0.0;  // successful finals only
  double mean_wall_ms = 0.0;
  /// Paired-seed win rate on solution_episode versus ddqn (ties count 0.5);
  /// absent for ddqn itself or when no seeds pair up.
  std::optional<double> win_rate_vs_ddqn;
};

struct ComparisonReport {
  std::vector<AlgorithmStats> algorithms;
  nlohmann::json to_json() const;
};

/// Aggregates completed runs (directories containing seed_*/summary.json).
ComparisonReport compare(const std::vector<std::filesystem::path>& run_dirs);

std::string format_table(const ComparisonReport& report);

/// Trailing mean of the previous `window` values (truncated at the front).
std::vector<double> trailing_mean(const std::vector<double>& values, int window);

}  // namespace agvrl::harness
