#include "aoc/env.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <sstream>

#include "aoc/errors.hpp"

namespace aoc {

namespace {

constexpr std::array<Cell, 4> kMoves{{{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};

constexpr const char* kFourRooms =
    "#############\n"
    "#.....#.....#\n"
    "#.....#.....#\n"
    "#.....H.....#\n"
    "#.....#.....#\n"
    "#.....#.....#\n"
    "##H####.....#\n"
    "#.....###H###\n"
    "#.....#.....#\n"
    "#.....#.....#\n"
    "#.....H.....#\n"
    "#.....#.....#\n"
    "#############\n";

Cell shifted(Cell c, Action a) {
  const Cell d = kMoves[static_cast<std::size_t>(a)];
  return {c.row + d.row, c.col + d.col};
}

}  // namespace

bool GridLayout::in_bounds(Cell c) const {
  return c.row >= 0 && c.col >= 0 && c.row < height_ && c.col < width_;
}

bool GridLayout::is_wall(Cell c) const {
  return !in_bounds(c) || wall_[static_cast<std::size_t>(c.row * width_ + c.col)] != 0;
}

int GridLayout::state_index(Cell c) const {
  if (!in_bounds(c)) return -1;
  return index_[static_cast<std::size_t>(c.row * width_ + c.col)];
}

std::vector<int> GridLayout::distances(Cell from, const std::vector<Cell>& blocked) const {
  std::vector<int> dist(cells_.size(), -1);
  auto open = [&](Cell c) {
    return !is_wall(c) && std::find(blocked.begin(), blocked.end(), c) == blocked.end();
  };
  if (!open(from)) return dist;
  std::deque<Cell> queue{from};
  dist[static_cast<std::size_t>(state_index(from))] = 0;
  while (!queue.empty()) {
    const Cell c = queue.front();
    queue.pop_front();
    const int d = dist[static_cast<std::size_t>(state_index(c))];
    for (int a = 0; a < kNumActions; ++a) {
      const Cell n = shifted(c, static_cast<Action>(a));
      if (!open(n)) continue;
      auto& slot = dist[static_cast<std::size_t>(state_index(n))];
      if (slot >= 0) continue;
      slot = d + 1;
      queue.push_back(n);
    }
  }
  return dist;
}

bool GridLayout::connected(const std::vector<Cell>& blocked) const {
  const auto open = [&](const Cell& c) {
    return std::find(blocked.begin(), blocked.end(), c) == blocked.end();
  };
  auto start = std::find_if(cells_.begin(), cells_.end(), open);
  if (start == cells_.end()) return false;
  const auto dist = distances(*start, blocked);
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    if (open(cells_[i]) && dist[i] < 0) return false;
  }
  return true;
}

GridLayout GridLayout::parse(std::string_view text) {
  std::vector<std::string> rows;
  std::string line;
  std::istringstream in{std::string(text)};
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(line);
  }
  if (rows.empty()) throw ConfigError("layout: empty grid");

  GridLayout g;
  g.height_ = static_cast<int>(rows.size());
  for (const auto& r : rows) g.width_ = std::max(g.width_, static_cast<int>(r.size()));
  g.wall_.assign(static_cast<std::size_t>(g.width_ * g.height_), 1);
  g.index_.assign(g.wall_.size(), -1);

  std::vector<char> hallway_flag(g.wall_.size(), 0);
  for (int r = 0; r < g.height_; ++r) {
    for (int c = 0; c < static_cast<int>(rows[static_cast<std::size_t>(r)].size()); ++c) {
      const char ch = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
      const auto at = static_cast<std::size_t>(r * g.width_ + c);
      switch (ch) {
        case '#':
          break;
        case '.':
        case ' ':
          g.wall_[at] = 0;
          break;
        case 'H':
        case 'h':
          g.wall_[at] = 0;
          hallway_flag[at] = 1;
          break;
        default:
          throw ConfigError("layout: unexpected character '" + std::string(1, ch) + "' at row " +
                            std::to_string(r));
      }
    }
  }
  for (int r = 0; r < g.height_; ++r) {
    for (int c = 0; c < g.width_; ++c) {
      const auto at = static_cast<std::size_t>(r * g.width_ + c);
      if (g.wall_[at]) continue;
      g.index_[at] = static_cast<int>(g.cells_.size());
      g.cells_.push_back({r, c});
      if (hallway_flag[at]) g.hallways_.push_back({r, c});
    }
  }
  if (g.cells_.size() < 2) throw ConfigError("layout: needs at least two walkable cells");

  for (const Cell& c : g.cells_) {
    bool has_neighbor = false;
    for (int a = 0; a < kNumActions; ++a) has_neighbor |= !g.is_wall(shifted(c, static_cast<Action>(a)));
    if (!has_neighbor) {
      throw ConfigError("layout: isolated cell at (" + std::to_string(c.row) + "," +
                        std::to_string(c.col) + ")");
    }
  }
  if (!g.connected()) throw ConfigError("layout: walkable cells are disconnected");
  for (std::size_t h = 0; h < g.hallways_.size(); ++h) {
    if (!g.connected({g.hallways_[h]})) {
      throw ConfigError("layout: blocking hallway " + std::to_string(h) + " disconnects the grid");
    }
  }

  // Canonical order for four connectors: north, south, west, east.
  if (g.hallways_.size() == 4) {
    auto hs = g.hallways_;
    std::sort(hs.begin(), hs.end());
    const Cell north = hs.front();
    const Cell south = hs.back();
    Cell a = hs[1];
    Cell b = hs[2];
    if (a.col > b.col) std::swap(a, b);
    g.hallways_ = {north, south, a, b};
  }

  // Rooms: components of floor cells once hallways are removed.
  g.room_.assign(g.cells_.size(), -1);
  std::vector<int> label(g.cells_.size(), -1);
  for (std::size_t i = 0; i < g.cells_.size(); ++i) {
    if (label[i] >= 0 || g.hallway_of(g.cells_[i])) continue;
    const int id = g.num_rooms_++;
    std::deque<Cell> queue{g.cells_[i]};
    label[i] = id;
    while (!queue.empty()) {
      const Cell c = queue.front();
      queue.pop_front();
      for (int a = 0; a < kNumActions; ++a) {
        const Cell n = shifted(c, static_cast<Action>(a));
        if (g.is_wall(n) || g.hallway_of(n)) continue;
        auto& l = label[static_cast<std::size_t>(g.state_index(n))];
        if (l >= 0) continue;
        l = id;
        queue.push_back(n);
      }
    }
  }
  g.room_ = label;
  return g;
}

GridLayout GridLayout::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("layout: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

GridLayout GridLayout::four_rooms() { return parse(kFourRooms); }

GridLayout GridLayout::named(const std::string& name) {
  if (name == "four_rooms" || name == "fourrooms") return four_rooms();
  throw ConfigError("layout: unknown built-in layout '" + name + "'");
}

int GridLayout::hallway_by_name(std::string_view name) const {
  if (hallways_.size() == 4) {
    if (name == "north") return 0;
    if (name == "south") return 1;
    if (name == "west") return 2;
    if (name == "east") return 3;
  }
  try {
    const int id = std::stoi(std::string(name));
    if (id >= 0 && id < static_cast<int>(hallways_.size())) return id;
  } catch (const std::exception&) {
  }
  throw ConfigError("layout: unknown hallway '" + std::string(name) + "'");
}

std::optional<int> GridLayout::hallway_of(Cell c) const {
  for (std::size_t i = 0; i < hallways_.size(); ++i) {
    if (hallways_[i] == c) return static_cast<int>(i);
  }
  return std::nullopt;
}

std::vector<int> GridLayout::hallway_rooms(int hallway) const {
  const Cell h = hallways_.at(static_cast<std::size_t>(hallway));
  std::vector<int> rooms;
  for (int a = 0; a < kNumActions; ++a) {
    const Cell n = shifted(h, static_cast<Action>(a));
    if (is_wall(n)) continue;
    const int r = room_of(state_index(n));
    if (r >= 0 && std::find(rooms.begin(), rooms.end(), r) == rooms.end()) rooms.push_back(r);
  }
  std::sort(rooms.begin(), rooms.end());
  return rooms;
}

std::string GridLayout::to_text() const {
  std::string out;
  for (int r = 0; r < height_; ++r) {
    for (int c = 0; c < width_; ++c) {
      const Cell cell{r, c};
      out += is_wall(cell) ? '#' : (hallway_of(cell) ? 'H' : '.');
    }
    out += '\n';
  }
  return out;
}

Eigen::VectorXd one_hot(int index, int size) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(size);
  v[index] = 1.0;
  return v;
}

std::string_view action_name(Action a) {
  switch (a) {
    case Action::Up: return "up";
    case Action::Down: return "down";
    case Action::Left: return "left";
    case Action::Right: return "right";
  }
  return "?";
}

FourRooms::FourRooms(GridLayout layout, EnvParams params)
    : layout_(std::move(layout)), params_(params) {
  if (params_.slip_prob < 0.0 || params_.slip_prob > 1.0) throw ConfigError("env: slip_prob outside [0,1]");
  if (params_.step_cap <= 0) throw ConfigError("env: step_cap must be positive");
}

bool FourRooms::passable(Cell c) const {
  if (layout_.is_wall(c)) return false;
  return !(blocked_ && layout_.hallways()[static_cast<std::size_t>(*blocked_)] == c);
}

Cell FourRooms::move(Cell from, Action action) const {
  const Cell to = shifted(from, action);
  return passable(to) ? to : from;
}

void FourRooms::set_goal(Cell goal) {
  if (!passable(goal)) throw ConfigError("env: goal is not a walkable cell");
  goal_ = goal;
  goal_set_ = true;
  over_ = true;
}

void FourRooms::block_hallway(int hallway) {
  if (hallway < 0 || hallway >= static_cast<int>(layout_.hallways().size())) {
    throw ConfigError("env: invalid hallway id " + std::to_string(hallway));
  }
  const Cell cell = layout_.hallways()[static_cast<std::size_t>(hallway)];
  if (goal_set_ && cell == goal_) throw ConfigError("env: cannot block the hallway holding the goal");
  blocked_ = hallway;
  if (agent_ == cell) over_ = true;
}

StepResult FourRooms::observe(double reward, bool done, bool truncated) const {
  StepResult r;
  r.state = state();
  r.observation = one_hot(r.state, layout_.num_states());
  r.reward = reward;
  r.done = done;
  r.truncated = truncated;
  return r;
}

StepResult FourRooms::reset(std::optional<Cell> goal, std::uint64_t seed) {
  rng_.seed(seed);
  if (goal) {
    if (blocked_ && layout_.hallways()[static_cast<std::size_t>(*blocked_)] == *goal) {
      throw ConfigError("env: goal lies in the blocked hallway");
    }
    set_goal(*goal);
  } else {
    Cell g;
    do {
      g = layout_.cell_of(uniform_int(rng_, layout_.num_states()));
    } while (!passable(g));
    set_goal(g);
  }
  return reset();
}

StepResult FourRooms::reset() {
  if (!goal_set_) throw UsageError("env: reset() before a goal was set");
  const int n = layout_.num_states();
  Cell start;
  do {
    start = layout_.cell_of(uniform_int(rng_, n));
  } while (start == goal_ || !passable(start));
  agent_ = start;
  steps_ = 0;
  over_ = false;
  return observe(0.0, false, false);
}

void FourRooms::place_agent(Cell c) {
  if (!passable(c)) throw UsageError("env: cannot place agent on a wall");
  agent_ = c;
  over_ = (c == goal_);
}

StepResult FourRooms::step(Action action) {
  if (over_) throw UsageError("env: step() called on a finished episode; call reset()");
  Action applied = action;
  if (slip_enabled_ && uniform01(rng_) < params_.slip_prob) {
    applied = static_cast<Action>(uniform_int(rng_, kNumActions));
  }
  agent_ = move(agent_, applied);
  ++steps_;
  const bool done = agent_ == goal_;
  const bool truncated = !done && steps_ >= params_.step_cap;
  over_ = done || truncated;
  return observe(done ? params_.goal_reward : params_.step_reward, done, truncated);
}

std::vector<int> FourRooms::distances_to_goal() const {
  std::vector<Cell> blocked;
  if (blocked_) blocked.push_back(layout_.hallways()[static_cast<std::size_t>(*blocked_)]);
  return layout_.distances(goal_, blocked);
}

}  // namespace aoc
