#pragma once

#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "agvrl/gridworld.hpp"

namespace agvrl::paths {

using grid::GridMap;
using grid::Position;

/// Waypoints, one per tick (index = time). Consecutive entries differ by at
/// most one king move.
using Path = std::vector<Position>;

struct PathConstraints {
  double length_min = 0.0;
  double length_max = std::numeric_limits<double>::infinity();
  double yaw_min = 0.0;    // degrees
  double yaw_max = 180.0;  // degrees
};

/// Sum of Euclidean segment lengths in cell units; stays contribute 0.
double path_length(const Path& path);

/// Sum of path lengths over all agents.
double total_objective(std::span<const Path> paths);

/// Number of position-changing transitions.
int move_count(const Path& path);

/// Turn angles in degrees between consecutive segments, zero-length segments
/// (stays) removed first. Empty when fewer than two segments remain.
std::vector<double> yaw_angles(const Path& path);

enum class ViolationKind { LengthBound, YawBound, Obstacle, MutualCollision, ArrivalSpread };

std::string_view violation_kind_name(ViolationKind k);

struct Violation {
  int path_index = 0;
  ViolationKind kind = ViolationKind::LengthBound;
  int tick = -1;  // -1 when not tied to a specific tick
  std::string detail;
};

struct ViolationReport {
  std::vector<Violation> violations;
  int max_arrival_spread = 0;  // ticks between earliest and latest arrival

  bool feasible() const { return violations.empty(); }
  nlohmann::json to_json() const;
};

struct MisalignedPaths : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Checks length bounds, yaw bounds, obstacle contact, mutual collisions
/// (shared cell at a tick, or a swap between ticks) and simultaneous arrival.
/// Paths shorter than the common horizon must already sit on their target so
/// arrival-padding is well defined; otherwise MisalignedPaths is thrown.
ViolationReport check_constraints(std::span<const Path> paths, const GridMap& map,
                                  const PathConstraints& constraints);

/// Minimum number of 8-connected moves from start to goal avoiding
/// obstacles; empty when unreachable.
std::optional<int> bfs_shortest(const GridMap& map, Position start, Position goal);

}  // namespace agvrl::paths
