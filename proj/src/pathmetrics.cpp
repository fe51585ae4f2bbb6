#include "agvrl/pathmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace agvrl::paths {

namespace {

constexpr double kPi = 3.14159265358979323846;

double euclid(Position a, Position b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

double path_length(const Path& path) {
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < path.size(); ++k) total += euclid(path[k], path[k + 1]);
  return total;
}

double total_objective(std::span<const Path> paths) {
  double total = 0.0;
  for (const Path& p : paths) total += path_length(p);
  return total;
}

int move_count(const Path& path) {
  int moves = 0;
  for (std::size_t k = 0; k + 1 < path.size(); ++k)
    if (!(path[k] == path[k + 1])) ++moves;
  return moves;
}

std::vector<double> yaw_angles(const Path& path) {
  // Strip stays; the angle between a zero-length segment and anything is
  // undefined.
  std::vector<Position> pts;
  for (const Position& p : path)
    if (pts.empty() || !(pts.back() == p)) pts.push_back(p);

  std::vector<double> angles;
  for (std::size_t k = 0; k + 2 < pts.size(); ++k) {
    const double ax = pts[k + 1].x - pts[k].x;
    const double ay = pts[k + 1].y - pts[k].y;
    const double bx = pts[k + 2].x - pts[k + 1].x;
    const double by = pts[k + 2].y - pts[k + 1].y;
    const double dot = ax * bx + ay * by;
    const double norms = std::sqrt(ax * ax + ay * ay) * std::sqrt(bx * bx + by * by);
    const double c = std::clamp(dot / norms, -1.0, 1.0);
    angles.push_back(std::acos(c) * 180.0 / kPi);
  }
  return angles;
}

std::string_view violation_kind_name(ViolationKind k) {
  switch (k) {
    case ViolationKind::LengthBound: return "length_bound";
    case ViolationKind::YawBound: return "yaw_bound";
    case ViolationKind::Obstacle: return "obstacle";
    case ViolationKind::MutualCollision: return "mutual_collision";
    case ViolationKind::ArrivalSpread: return "arrival_spread";
  }
  return "?";
}

nlohmann::json ViolationReport::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const Violation& v : violations) {
    arr.push_back({{"path_index", v.path_index},
                   {"kind", std::string(violation_kind_name(v.kind))},
                   {"tick", v.tick},
                   {"detail", v.detail}});
  }
  return {{"violations", arr},
          {"max_arrival_spread", max_arrival_spread},
          {"feasible", feasible()}};
}

ViolationReport check_constraints(std::span<const Path> paths, const GridMap& map,
                                  const PathConstraints& constraints) {
  const int m = static_cast<int>(paths.size());
  std::size_t horizon = 0;
  for (const Path& p : paths) horizon = std::max(horizon, p.size());
  for (int i = 0; i < m; ++i) {
    if (paths[i].empty()) throw MisalignedPaths("path " + std::to_string(i) + " is empty");
    if (paths[i].size() < horizon && !(paths[i].back() == map.targets[static_cast<std::size_t>(i)]))
      throw MisalignedPaths("path " + std::to_string(i) +
                            " ends off-target before the common horizon");
  }
  const auto at_tick = [&](int i, std::size_t t) {
    const Path& p = paths[static_cast<std::size_t>(i)];
    return t < p.size() ? p[t] : p.back();  // arrival padding
  };

  ViolationReport report;

  for (int i = 0; i < m; ++i) {
    const Path& p = paths[static_cast<std::size_t>(i)];

    const double len = path_length(p);
    if (len < constraints.length_min || len > constraints.length_max)
      report.violations.push_back({i, ViolationKind::LengthBound, -1,
                                   "length " + std::to_string(len) + " outside bounds"});

    const std::vector<double> yaws = yaw_angles(p);
    for (std::size_t k = 0; k < yaws.size(); ++k) {
      if (yaws[k] < constraints.yaw_min || yaws[k] > constraints.yaw_max)
        report.violations.push_back({i, ViolationKind::YawBound, static_cast<int>(k),
                                     "yaw " + std::to_string(yaws[k]) + " deg at segment pair " +
                                         std::to_string(k)});
    }

    for (std::size_t t = 0; t < p.size(); ++t) {
      if (!map.in_bounds(p[t]) || map.at(p[t]) == grid::Cell::Obstacle)
        report.violations.push_back(
            {i, ViolationKind::Obstacle, static_cast<int>(t), "waypoint on obstacle"});
    }
  }

  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      for (std::size_t t = 0; t < horizon; ++t) {
        if (at_tick(i, t) == at_tick(j, t))
          report.violations.push_back({i, ViolationKind::MutualCollision, static_cast<int>(t),
                                       "shares cell with path " + std::to_string(j)});
        if (t + 1 < horizon && at_tick(i, t + 1) == at_tick(j, t) &&
            at_tick(j, t + 1) == at_tick(i, t) && !(at_tick(i, t) == at_tick(j, t)))
          report.violations.push_back({i, ViolationKind::MutualCollision,
                                       static_cast<int>(t + 1),
                                       "swaps cells with path " + std::to_string(j)});
      }
    }
  }

  // Arrival tick: first index at the target with the path holding there
  // until the end; simultaneous arrival requires all ticks equal.
  std::vector<std::optional<int>> arrivals(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    const Position target = map.targets[static_cast<std::size_t>(i)];
    std::optional<int> arrival;
    for (std::size_t t = 0; t < horizon; ++t) {
      if (at_tick(i, t) == target) {
        bool holds = true;
        for (std::size_t u = t + 1; u < horizon && holds; ++u)
          if (!(at_tick(i, u) == target)) holds = false;
        if (holds) {
          arrival = static_cast<int>(t);
          break;
        }
      }
    }
    arrivals[static_cast<std::size_t>(i)] = arrival;
  }
  int lo = std::numeric_limits<int>::max(), hi = -1;
  bool all_arrived = true;
  for (const auto& a : arrivals) {
    if (!a) {
      all_arrived = false;
      continue;
    }
    lo = std::min(lo, *a);
    hi = std::max(hi, *a);
  }
  if (hi >= 0 && lo <= hi) report.max_arrival_spread = hi - lo;
  const bool simultaneous = all_arrived && (hi < 0 || lo == hi);
  if (!simultaneous) {
    for (int i = 0; i < m; ++i) {
      const auto& a = arrivals[static_cast<std::size_t>(i)];
      report.violations.push_back({i, ViolationKind::ArrivalSpread, a ? *a : -1,
                                   a ? "arrival tick " + std::to_string(*a)
                                     : "never arrives"});
    }
  }
  return report;
}

std::optional<int> bfs_shortest(const GridMap& map, Position start, Position goal) {
  if (!map.is_free(start) || !map.is_free(goal)) return std::nullopt;
  if (start == goal) return 0;
  std::vector<int> dist(static_cast<std::size_t>(map.width) * map.height, -1);
  const auto idx = [&](Position p) { return static_cast<std::size_t>(p.y) * map.width + p.x; };
  std::deque<Position> queue{start};
  dist[idx(start)] = 0;
  while (!queue.empty()) {
    const Position p = queue.front();
    queue.pop_front();
    for (int a = 0; a < grid::kMoveActionCount; ++a) {
      auto [dx, dy] = grid::action_offset(static_cast<grid::Action>(a));
      const Position n{p.x + dx, p.y + dy};
      if (!map.is_free(n) || dist[idx(n)] >= 0) continue;
      dist[idx(n)] = dist[idx(p)] + 1;
      if (n == goal) return dist[idx(n)];
      queue.push_back(n);
    }
  }
  return std::nullopt;
}

}  // namespace agvrl::paths
