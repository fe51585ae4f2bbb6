#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "agvrl/ddqn.hpp"
#include "agvrl/ekf.hpp"
#include "agvrl/gridworld.hpp"
#include "agvrl/pathmetrics.hpp"
#include "agvrl/pf.hpp"

namespace agvrl::train {

enum class Algorithm { DDQN, PFDDQN, EKFDDQN };

std::string_view algorithm_name(Algorithm a);
std::optional<Algorithm> algorithm_from_name(std::string_view name);

struct TrainConfig {
  std::size_t memory_size = 10000;
  std::size_t batch_size = 500;
  double gamma = 0.95;
  double learning_rate = 1e-4;
  int target_sync_every = 50;  // train steps between target syncs
  double eps_initial = 1.0;
  double eps_decay = 0.9995;  // per episode
  double eps_floor = 0.001;
  int episodes = 1000;
  int max_steps = 0;           // 0: derive from map size
  int train_every = 1;         // env steps between train steps
  int filter_every = 1;        // train steps between filter corrections
  std::size_t learn_start = 0; // 0: batch_size
  std::uint64_t seed = 0;
  std::vector<int> hidden = {32, 32};
  ddqn::TargetRule target_rule = ddqn::TargetRule::Double;
  bool inject_sgd_particle = true;  // PF re-centering after each correction
  bool measure_time = true;         // false: wall_ms recorded as 0
};

void validate(const TrainConfig& cfg);

struct EpisodeRecord {
  int episode = 0;
  double total_reward = 0.0;
  int steps = 0;
  grid::Cause outcome = grid::Cause::Running;
  std::vector<bool> reached;
  double epsilon = 0.0;
  double wall_ms = 0.0;
};

struct RunSummary {
  int episodes = 0;
  int target_hit = 0;
  int obstacle_hit = 0;
  int agent_collision = 0;
  int timeout = 0;
  std::optional<int> solution_episode;
  std::vector<int> final_path_moves;      // greedy move count per agent
  std::vector<double> final_path_lengths; // greedy Euclidean length per agent
  bool final_success = false;
  double wall_ms_total = 0.0;
};

struct RunResult {
  RunSummary summary;
  std::vector<EpisodeRecord> records;
  ddqn::AgentNets nets;
  std::vector<paths::Path> final_paths;
};

/// Optional per-train-step observer (used by tests to capture weight
/// trajectories). Called after the full update, filters included.
struct TrainHooks {
  std::function<void(int train_step, const ddqn::AgentNets& nets)> on_train_step;
  /// When set, training stops early once it returns true (checked per
  /// episode, fed the records so far).
  std::function<bool(std::span<const EpisodeRecord>)> stop_early;
};

RunResult run_ddqn(const grid::GridMap& map, const TrainConfig& cfg,
                   const TrainHooks* hooks = nullptr);

RunResult run_pf_ddqn(const grid::GridMap& map, const TrainConfig& cfg, const pf::PFConfig& pf_cfg,
                      const TrainHooks* hooks = nullptr);

RunResult run_ekf_ddqn(const grid::GridMap& map, const TrainConfig& cfg,
                       const ekf::EKFConfig& ekf_cfg, const TrainHooks* hooks = nullptr);

struct GreedyEval {
  std::vector<paths::Path> paths;  // one waypoint per tick, start included
  bool success = false;
};

/// Deterministic epsilon = 0 rollout.
GreedyEval evaluate_greedy(const ddqn::AgentNets& nets, const grid::GridMap& map, int max_steps);

/// First episode e (>= window - 1) whose trailing `window` episodes end
/// AllReached at rate >= threshold.
std::optional<int> solution_episode(std::span<const EpisodeRecord> records, int window = 500,
                                    double threshold = 0.9);

}  // namespace agvrl::train
