#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "aoc/rng.hpp"

namespace aoc {

struct Cell {
  int row = 0;
  int col = 0;
  auto operator<=>(const Cell&) const = default;
};

enum class Action : int { Up = 0, Down = 1, Left = 2, Right = 3 };
inline constexpr int kNumActions = 4;

// Walls, floor and hallway connectors of a gridworld. Walkable cells are
// indexed row-major; that index is the observation coordinate.
class GridLayout {
 public:
  // Text grid: '#' wall, '.' or ' ' floor, 'H' hallway. Throws ConfigError
  // when the walkable area is disconnected, a cell is isolated, or blocking
  // one hallway would disconnect it.
  static GridLayout parse(std::string_view text);
  static GridLayout load(const std::string& path);
  static GridLayout four_rooms();
  static GridLayout named(const std::string& name);  // "four_rooms"

  int width() const { return width_; }
  int height() const { return height_; }
  int num_states() const { return static_cast<int>(cells_.size()); }
  bool in_bounds(Cell c) const;
  bool is_wall(Cell c) const;
  // -1 for walls and out-of-bounds cells.
  int state_index(Cell c) const;
  Cell cell_of(int state) const { return cells_.at(static_cast<std::size_t>(state)); }

  // Hallway ids are positions in this list. With exactly four hallways the
  // order is north, south, west, east (see hallway_by_name).
  const std::vector<Cell>& hallways() const { return hallways_; }
  int hallway_by_name(std::string_view name) const;
  std::optional<int> hallway_of(Cell c) const;

  // Rooms are the connected components of walkable non-hallway cells,
  // numbered in row-major order of their first cell. room_of returns -1
  // for hallway cells.
  int num_rooms() const { return num_rooms_; }
  int room_of(int state) const { return room_.at(static_cast<std::size_t>(state)); }
  std::vector<int> hallway_rooms(int hallway) const;

  // BFS distances from `from` to every state; unreachable states get -1.
  // `blocked` cells are treated as walls.
  std::vector<int> distances(Cell from, const std::vector<Cell>& blocked = {}) const;
  bool connected(const std::vector<Cell>& blocked = {}) const;

  std::string to_text() const;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<char> wall_;
  std::vector<int> index_;
  std::vector<Cell> cells_;
  std::vector<Cell> hallways_;
  std::vector<int> room_;
  int num_rooms_ = 0;
};

struct EnvParams {
  double slip_prob = 0.02;
  double goal_reward = 20.0;
  double step_reward = -1.0;
  int step_cap = 2000;
};

struct StepResult {
  Eigen::VectorXd observation;  // one-hot over walkable states
  int state = -1;
  double reward = 0.0;
  bool done = false;       // goal reached
  bool truncated = false;  // step cap hit without reaching the goal
};

// Four-rooms navigation task. Single owner; copies are independent.
class FourRooms {
 public:
  explicit FourRooms(GridLayout layout, EnvParams params = {});

  // Starts a new run: reseeds, places the goal (random walkable cell when
  // `goal` is empty) and draws a start cell.
  StepResult reset(std::optional<Cell> goal, std::uint64_t seed);
  // New episode with the current goal and generator stream.
  StepResult reset();
  StepResult step(Action action);

  void block_hallway(int hallway);
  void unblock_hallway() { blocked_.reset(); }
  void set_goal(Cell goal);

  const GridLayout& layout() const { return layout_; }
  const EnvParams& params() const { return params_; }
  Cell agent() const { return agent_; }
  Cell goal() const { return goal_; }
  int state() const { return layout_.state_index(agent_); }
  std::optional<int> blocked_hallway() const { return blocked_; }
  bool episode_over() const { return over_; }
  int episode_steps() const { return steps_; }
  int num_states() const { return layout_.num_states(); }

  // Movement ignoring slip: walls and the blocked hallway stop the agent.
  Cell move(Cell from, Action action) const;
  bool passable(Cell c) const;
  // Distance-to-goal map under the current blocking, indexed by state.
  std::vector<int> distances_to_goal() const;

  // Test hook: bypass the slip draw.
  void set_slip_enabled(bool enabled) { slip_enabled_ = enabled; }
  // Test hook: place the agent directly.
  void place_agent(Cell c);

  StepResult observe(double reward, bool done, bool truncated) const;

 private:
  GridLayout layout_;
  EnvParams params_;
  Rng rng_;
  Cell agent_;
  Cell goal_;
  std::optional<int> blocked_;
  bool goal_set_ = false;
  bool over_ = true;
  bool slip_enabled_ = true;
  int steps_ = 0;
};

Eigen::VectorXd one_hot(int index, int size);
std::string_view action_name(Action a);

}  // namespace aoc
