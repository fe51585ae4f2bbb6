#include "agvrl/gridworld.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace agvrl::grid {

std::pair<int, int> action_offset(Action a) {
  switch (a) {
    case Action::North: return {0, -1};
    case Action::South: return {0, 1};
    case Action::East: return {1, 0};
    case Action::West: return {-1, 0};
    case Action::NorthEast: return {1, -1};
    case Action::SouthEast: return {1, 1};
    case Action::NorthWest: return {-1, -1};
    case Action::SouthWest: return {-1, 1};
    case Action::Stay: return {0, 0};
  }
  throw std::invalid_argument("unknown action id");
}

std::string_view cause_name(Cause c) {
  switch (c) {
    case Cause::Running: return "Running";
    case Cause::AllReached: return "AllReached";
    case Cause::ObstacleCollision: return "ObstacleCollision";
    case Cause::AgentCollision: return "AgentCollision";
    case Cause::Timeout: return "Timeout";
  }
  return "?";
}

GridMap parse_map(std::string_view text) {
  std::vector<std::string> rows;
  std::string row;
  for (char c : text) {
    if (c == '\n') {
      rows.push_back(row);
      row.clear();
    } else {
      row.push_back(c);
    }
  }
  if (!row.empty()) rows.push_back(row);  // trailing newline optional
  if (rows.empty()) throw MalformedMap("empty map");

  GridMap map;
  map.height = static_cast<int>(rows.size());
  map.width = static_cast<int>(rows[0].size());
  if (map.width == 0) throw MalformedMap("empty map row");
  map.cells.assign(static_cast<std::size_t>(map.width) * map.height, Cell::Free);

  for (int y = 0; y < map.height; ++y) {
    if (static_cast<int>(rows[y].size()) != map.width)
      throw MalformedMap("ragged rows: row " + std::to_string(y));
    for (int x = 0; x < map.width; ++x) {
      const char g = rows[y][static_cast<std::size_t>(x)];
      const Position p{x, y};
      switch (g) {
        case '.': break;
        case '#': map.cells[static_cast<std::size_t>(y) * map.width + x] = Cell::Obstacle; break;
        case 'S': map.starts.push_back(p); break;
        case 'T': map.targets.push_back(p); break;
        default:
          if (g >= '0' && g <= '9')
            throw MalformedMap(std::string("reserved digit glyph '") + g + "'");
          throw MalformedMap(std::string("unknown glyph '") + g + "'");
      }
    }
  }

  if (map.starts.empty()) throw MalformedMap("map declares no start");
  if (map.targets.size() == 1 && map.starts.size() > 1) {
    map.targets.assign(map.starts.size(), map.targets.front());  // shared target
  }
  if (map.targets.size() != map.starts.size())
    throw MalformedMap("start/target count mismatch: " + std::to_string(map.starts.size()) +
                       " starts, " + std::to_string(map.targets.size()) + " targets");
  validate(map);
  return map;
}

GridMap load_map(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw MalformedMap("cannot open map file: " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_map(buf.str());
}

void validate(const GridMap& map) {
  if (map.width < 1 || map.height < 1) throw MalformedMap("degenerate dimensions");
  if (map.cells.size() != static_cast<std::size_t>(map.width) * map.height)
    throw MalformedMap("cell buffer does not match dimensions");
  if (map.starts.empty() || map.starts.size() != map.targets.size())
    throw MalformedMap("start/target pairing broken");
  for (const auto& list : {map.starts, map.targets}) {
    for (Position p : list) {
      if (!map.in_bounds(p)) throw MalformedMap("start or target out of bounds");
      if (map.at(p) == Cell::Obstacle) throw MalformedMap("start or target on obstacle");
    }
  }
  for (std::size_t i = 0; i < map.starts.size(); ++i)
    for (std::size_t j = i + 1; j < map.starts.size(); ++j)
      if (map.starts[i] == map.starts[j]) throw MalformedMap("coinciding starts");
}

WorldState reset(const GridMap& map) {
  WorldState s;
  s.positions = map.starts;
  s.reached.assign(map.starts.size(), false);
  s.step = 0;
  return s;
}

namespace {

double euclid(Position a, Position b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

double distance_sum(const GridMap& map, const WorldState& state) {
  double sum = 0.0;
  for (std::size_t i = 0; i < state.positions.size(); ++i)
    if (!state.reached[i]) sum += euclid(state.positions[i], map.targets[i]);
  return sum;
}

std::pair<WorldState, StepOutcome> step(const GridMap& map, const WorldState& state,
                                        const std::vector<Action>& actions, int max_steps) {
  const int m = map.agent_count();
  if (static_cast<int>(actions.size()) != m)
    throw std::invalid_argument("actions length does not match agent count");
  if (std::all_of(state.reached.begin(), state.reached.end(), [](bool r) { return r; }))
    throw SteppedTerminalState("all agents already reached");
  if (state.step >= max_steps) throw SteppedTerminalState("episode already timed out");

  StepOutcome out;
  out.rewards.assign(m, 0.0);
  out.events.assign(m, AgentEvents{});

  const std::vector<Position>& pre = state.positions;
  std::vector<bool> active(m);
  for (int i = 0; i < m; ++i) active[i] = !state.reached[i];

  // Raw proposals; reached agents hold.
  std::vector<Position> proposal(pre);
  for (int i = 0; i < m; ++i) {
    if (!active[i]) continue;
    auto [dx, dy] = action_offset(actions[i]);
    proposal[i] = Position{pre[i].x + dx, pre[i].y + dy};
  }

  // Obstacle and out-of-bounds hits revert the move without the -4 penalty.
  std::vector<Position> dest(proposal);
  for (int i = 0; i < m; ++i) {
    if (!active[i]) continue;
    if (!map.in_bounds(proposal[i]) || map.at(proposal[i]) == Cell::Obstacle) {
      out.events[i].hit_obstacle = true;
      dest[i] = pre[i];
    }
  }

  // Pair collisions on raw proposals: coincidence or swap. Both agents of a
  // pair are penalized and reverted.
  for (int i = 0; i < m; ++i) {
    if (!active[i]) continue;
    for (int j = i + 1; j < m; ++j) {
      if (!active[j]) continue;
      const bool coincide = proposal[i] == proposal[j];
      const bool swapped = proposal[i] == pre[j] && proposal[j] == pre[i] && !coincide;
      if (coincide || swapped) {
        out.events[i].hit_agent = true;
        out.events[j].hit_agent = true;
        ++out.events[i].collision_pairs;
        ++out.events[j].collision_pairs;
        dest[i] = pre[i];
        dest[j] = pre[j];
      }
    }
  }

  // Reverted agents reoccupy their cells; anyone moving into such a cell is
  // reverted too (no extra penalty). Iterate to a fixpoint.
  for (bool changed = true; changed;) {
    changed = false;
    for (int i = 0; i < m; ++i) {
      if (!active[i] || dest[i] == pre[i]) continue;
      for (int j = 0; j < m; ++j) {
        if (j == i || !active[j]) continue;
        if (dest[i] == dest[j]) {
          dest[i] = pre[i];
          changed = true;
          break;
        }
      }
    }
  }

  WorldState next;
  next.positions = dest;
  next.reached = state.reached;
  next.step = state.step + 1;

  for (int i = 0; i < m; ++i) {
    if (!active[i]) continue;
    out.events[i].moved = !(dest[i] == pre[i]);
    if (dest[i] == map.targets[i]) {
      out.events[i].reached_target = true;
      next.reached[i] = true;
    }
  }

  // One shared distance-sum signal over the agents that were active at the
  // start of the tick (a newly reached agent contributes zero post-move).
  double pre_sum = 0.0, post_sum = 0.0;
  for (int i = 0; i < m; ++i) {
    if (!active[i]) continue;
    pre_sum += euclid(pre[i], map.targets[i]);
    post_sum += euclid(dest[i], map.targets[i]);
  }
  const bool closer = post_sum < pre_sum;
  const bool farther = post_sum > pre_sum;

  for (int i = 0; i < m; ++i) {
    if (!active[i]) continue;
    AgentEvents& ev = out.events[i];
    ev.closer = closer;
    ev.farther = farther;
    double r = 0.0;
    if (ev.moved) r += kMovePenalty;
    if (ev.closer) r += kDistanceReward;
    if (ev.farther) r -= kDistanceReward;
    if (ev.reached_target) r += kTargetReward;
    if (ev.hit_obstacle) r += kCollisionPenalty;
    r += kCollisionPenalty * ev.collision_pairs;
    out.rewards[i] = r;
  }

  const bool any_obstacle = std::any_of(out.events.begin(), out.events.end(),
                                        [](const AgentEvents& e) { return e.hit_obstacle; });
  const bool any_agent_hit = std::any_of(out.events.begin(), out.events.end(),
                                         [](const AgentEvents& e) { return e.hit_agent; });
  const bool all_reached =
      std::all_of(next.reached.begin(), next.reached.end(), [](bool r) { return r; });

  if (any_obstacle)
    out.cause = Cause::ObstacleCollision;
  else if (any_agent_hit)
    out.cause = Cause::AgentCollision;
  else if (all_reached)
    out.cause = Cause::AllReached;
  else if (next.step >= max_steps)
    out.cause = Cause::Timeout;
  else
    out.cause = Cause::Running;
  out.terminal = out.cause != Cause::Running;

  return {std::move(next), std::move(out)};
}

Eigen::VectorXd observe(const GridMap& map, const WorldState& state, int agent) {
  const int m = map.agent_count();
  if (agent < 0 || agent >= m) throw std::invalid_argument("agent index out of range");
  const Position own = state.positions[static_cast<std::size_t>(agent)];
  const Position target = map.targets[static_cast<std::size_t>(agent)];
  const double w = map.width, h = map.height;

  Eigen::VectorXd v(kObservationDim);
  v[0] = own.x / w;
  v[1] = own.y / h;
  v[2] = (target.x - own.x) / w;
  v[3] = (target.y - own.y) / h;

  // Neighbor flags in action-encoding order (N,S,E,W,NE,SE,NW,SW):
  // obstacle, out-of-bounds, or another active agent.
  for (int a = 0; a < kMoveActionCount; ++a) {
    auto [dx, dy] = action_offset(static_cast<Action>(a));
    const Position n{own.x + dx, own.y + dy};
    bool occupied = !map.is_free(n);
    if (!occupied) {
      for (int j = 0; j < m && !occupied; ++j)
        if (j != agent && !state.reached[j] && state.positions[j] == n) occupied = true;
    }
    v[4 + a] = occupied ? 1.0 : 0.0;
  }

  // Offset to nearest other active agent (ties broken by lowest index).
  int nearest = -1;
  double best = std::numeric_limits<double>::infinity();
  for (int j = 0; j < m; ++j) {
    if (j == agent || state.reached[j]) continue;
    const double d = euclid(own, state.positions[j]);
    if (d < best) {
      best = d;
      nearest = j;
    }
  }
  if (nearest >= 0) {
    v[12] = (state.positions[nearest].x - own.x) / w;
    v[13] = (state.positions[nearest].y - own.y) / h;
  } else {
    v[12] = 0.0;
    v[13] = 0.0;
  }
  return v;
}

int default_max_steps(const GridMap& map) {
  return std::max(map.width, map.height) <= 12 ? 100 : 300;
}

}  // namespace agvrl::grid
