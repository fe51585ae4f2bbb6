#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace agvrl::grid {

struct Position {
  int x = 0;  // column index
  int y = 0;  // row index
  friend bool operator==(const Position&, const Position&) = default;
};

enum class Cell : std::uint8_t { Free, Obstacle };

/// The nine moves, encoding fixed to 0..8. Row 0 is the top map row, so
/// North decreases y.
enum class Action : int {
  North = 0,
  South = 1,
  East = 2,
  West = 3,
  NorthEast = 4,
  SouthEast = 5,
  NorthWest = 6,
  SouthWest = 7,
  Stay = 8,
};

inline constexpr int kActionCount = 9;
inline constexpr int kMoveActionCount = 8;  // all but Stay

/// Unit displacement of an action as (dx, dy).
std::pair<int, int> action_offset(Action a);

struct MalformedMap : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GridMap {
  int width = 0;
  int height = 0;
  std::vector<Cell> cells;  // row-major, cells[y * width + x]
  std::vector<Position> starts;
  std::vector<Position> targets;  // one per agent, same length as starts
  double cell_size_m = 2.0;

  bool in_bounds(Position p) const {
    return p.x >= 0 && p.x < width && p.y >= 0 && p.y < height;
  }
  Cell at(Position p) const { return cells[static_cast<std::size_t>(p.y) * width + p.x]; }
  bool is_free(Position p) const { return in_bounds(p) && at(p) == Cell::Free; }
  int agent_count() const { return static_cast<int>(starts.size()); }
};

/// Parses the text map format: '.' free, '#' obstacle, 'S' agent start,
/// 'T' target. Agent order is the reading order of 'S' glyphs; a single 'T'
/// with multiple starts is shared by every agent. Digits are reserved and
/// rejected. Throws MalformedMap.
GridMap parse_map(std::string_view text);

/// Reads a map file and parses it.
GridMap load_map(const std::filesystem::path& file);

/// Validates map invariants (used by parse_map and for hand-built maps).
void validate(const GridMap& map);

struct WorldState {
  std::vector<Position> positions;
  std::vector<bool> reached;
  int step = 0;
};

enum class Cause { Running, AllReached, ObstacleCollision, AgentCollision, Timeout };

std::string_view cause_name(Cause c);

struct AgentEvents {
  bool moved = false;
  bool closer = false;   // shared distance-sum signal, decrease
  bool farther = false;  // shared distance-sum signal, increase
  bool hit_obstacle = false;
  bool hit_agent = false;
  bool reached_target = false;
  int collision_pairs = 0;  // pair collisions involving this agent
};

struct StepOutcome {
  std::vector<double> rewards;
  bool terminal = false;
  Cause cause = Cause::Running;
  std::vector<AgentEvents> events;
};

struct SteppedTerminalState : std::logic_error {
  using std::logic_error::logic_error;
};

// Reward components.
inline constexpr double kMovePenalty = -4.0;
inline constexpr double kDistanceReward = 5.0;
inline constexpr double kTargetReward = 200.0;
inline constexpr double kCollisionPenalty = -20.0;

/// Initial state: agents at their starts, nothing reached, step 0.
WorldState reset(const GridMap& map);

/// Sum of Euclidean distances from each active (not reached) agent to its
/// target, in cell units.
double distance_sum(const GridMap& map, const WorldState& state);

/// Advances the world one tick. Collisions terminate the episode; reached
/// agents freeze and are invisible to collision checks.
std::pair<WorldState, StepOutcome> step(const GridMap& map, const WorldState& state,
                                        const std::vector<Action>& actions, int max_steps);

inline constexpr int kObservationDim = 14;

/// Fixed 14-dimensional observation for one agent: normalized own position,
/// normalized offset to target, the 8 neighbor occupancy flags in action
/// order, and the normalized offset to the nearest other active agent.
Eigen::VectorXd observe(const GridMap& map, const WorldState& state, int agent);

/// 100 steps for maps up to 12x12, 300 otherwise.
int default_max_steps(const GridMap& map);

}  // namespace agvrl::grid
