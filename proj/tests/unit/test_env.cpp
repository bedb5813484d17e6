#include <doctest.h>

#include <deque>
#include <set>
#include <string>

#include "aoc/env.hpp"
#include "aoc/errors.hpp"

using namespace aoc;

namespace {

// Independent copy of the canonical map for oracle counts.
const char* kMap =
    "#############\n"
    "#     #     #\n"
    "#     #     #\n"
    "#           #\n"
    "#     #     #\n"
    "#     #     #\n"
    "## ####     #\n"
    "#     ### ###\n"
    "#     #     #\n"
    "#     #     #\n"
    "#           #\n"
    "#     #     #\n"
    "#############\n";

int count_open(const std::string& text) {
  int n = 0;
  for (char c : text)
    if (c == ' ' || c == '.' || c == 'H') ++n;
  return n;
}

// Plain BFS over a character grid; '#' and `blocked` are impassable.
std::vector<std::vector<int>> bfs(const std::vector<std::string>& g, Cell from, std::optional<Cell> blocked) {
  std::vector<std::vector<int>> d(g.size(), std::vector<int>(g[0].size(), -1));
  std::deque<Cell> q{from};
  d[from.row][from.col] = 0;
  while (!q.empty()) {
    Cell c = q.front();
    q.pop_front();
    const int dr[] = {-1, 1, 0, 0};
    const int dc[] = {0, 0, -1, 1};
    for (int k = 0; k < 4; ++k) {
      Cell n{c.row + dr[k], c.col + dc[k]};
      if (g[n.row][n.col] == '#' || (blocked && n == *blocked) || d[n.row][n.col] >= 0) continue;
      d[n.row][n.col] = d[c.row][c.col] + 1;
      q.push_back(n);
    }
  }
  return d;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == '\n') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  return out;
}

FourRooms env_with_goal(Cell goal, std::uint64_t seed = 1) {
  FourRooms e(GridLayout::four_rooms());
  e.reset(goal, seed);
  return e;
}

}  // namespace

TEST_SUITE("env") {
  TEST_CASE("canonical layout has the scanned number of walkable cells") {
    const auto layout = GridLayout::four_rooms();
    CHECK(layout.num_states() == count_open(kMap));
    CHECK(layout.num_states() == 104);
    CHECK(layout.width() == 13);
    CHECK(layout.height() == 13);
    CHECK(layout.num_rooms() == 4);
  }

  TEST_CASE("hallways are ordered north, south, west, east") {
    const auto layout = GridLayout::four_rooms();
    REQUIRE(layout.hallways().size() == 4);
    CHECK(layout.hallways()[0] == Cell{3, 6});
    CHECK(layout.hallways()[1] == Cell{10, 6});
    CHECK(layout.hallways()[2] == Cell{6, 2});
    CHECK(layout.hallways()[3] == Cell{7, 9});
    CHECK(layout.hallway_by_name("east") == 3);
    CHECK(layout.hallway_by_name("1") == 1);
    CHECK_THROWS_AS(layout.hallway_by_name("up"), ConfigError);
  }

  TEST_CASE("state indices are row-major and stable") {
    const auto a = GridLayout::four_rooms();
    const auto b = GridLayout::parse(kMap);
    int expected = 0;
    for (int r = 0; r < a.height(); ++r) {
      for (int c = 0; c < a.width(); ++c) {
        if (a.is_wall({r, c})) {
          CHECK(a.state_index({r, c}) == -1);
          continue;
        }
        CHECK(a.state_index({r, c}) == expected);
        CHECK(b.state_index({r, c}) == expected);
        CHECK(a.cell_of(expected) == Cell{r, c});
        ++expected;
      }
    }
  }

  TEST_CASE("hallway cells sit between two rooms") {
    const auto layout = GridLayout::four_rooms();
    for (int h = 0; h < 4; ++h) {
      const int s = layout.state_index(layout.hallways()[static_cast<std::size_t>(h)]);
      CHECK(layout.room_of(s) == -1);
      const auto rooms = layout.hallway_rooms(h);
      CHECK(rooms.size() == 2);
    }
    // NW 0, NE 1, SW 2, SE 3.
    CHECK(layout.room_of(layout.state_index({1, 1})) == 0);
    CHECK(layout.room_of(layout.state_index({1, 11})) == 1);
    CHECK(layout.room_of(layout.state_index({11, 1})) == 2);
    CHECK(layout.room_of(layout.state_index({11, 11})) == 3);
  }

  TEST_CASE("a wall ring alone is a valid single room") {
    const auto layout = GridLayout::parse("#####\n#...#\n#...#\n#####\n");
    CHECK(layout.num_states() == 6);
    CHECK(layout.hallways().empty());
    CHECK(layout.num_rooms() == 1);
  }

  TEST_CASE("malformed grids are configuration errors") {
    // The only connection between the rooms is the hallway.
    CHECK_THROWS_AS(GridLayout::parse("#######\n#..#..#\n#..H..#\n#..#..#\n#######\n"), ConfigError);
    CHECK_THROWS_AS(GridLayout::parse("#####\n#.#.#\n#####\n"), ConfigError);  // isolated cells
    CHECK_THROWS_AS(GridLayout::parse("######\n#..#.#\n#..#.#\n######\n"), ConfigError);  // disconnected
    CHECK_THROWS_AS(GridLayout::parse("#x#\n"), ConfigError);
    CHECK_THROWS_AS(GridLayout::parse(""), ConfigError);
    CHECK_THROWS_AS(GridLayout::named("maze"), ConfigError);
  }

  TEST_CASE("text round trip") {
    const auto layout = GridLayout::four_rooms();
    const auto again = GridLayout::parse(layout.to_text());
    CHECK(again.to_text() == layout.to_text());
    CHECK(again.hallways() == layout.hallways());
  }

  TEST_CASE("reset is deterministic under a fixed seed") {
    FourRooms a(GridLayout::four_rooms());
    FourRooms b(GridLayout::four_rooms());
    const Cell north{3, 6};
    const auto ra = a.reset(north, 42);
    const auto rb = b.reset(north, 42);
    CHECK(ra.state == rb.state);
    CHECK(a.agent() == b.agent());
    CHECK(a.agent() != north);
    CHECK(ra.reward == 0.0);
    CHECK_FALSE(ra.done);
  }

  TEST_CASE("random goals land on walkable cells") {
    std::set<Cell> goals;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      FourRooms e(GridLayout::four_rooms());
      e.reset(std::nullopt, seed);
      CHECK(e.layout().state_index(e.goal()) >= 0);
      CHECK(e.agent() != e.goal());
      goals.insert(e.goal());
    }
    CHECK(goals.size() > 1);
  }

  TEST_CASE("goal on a wall is rejected") {
    FourRooms e(GridLayout::four_rooms());
    CHECK_THROWS_AS(e.reset(Cell{0, 0}, 1), ConfigError);
  }

  TEST_CASE("goal in the blocked hallway is rejected") {
    FourRooms e(GridLayout::four_rooms());
    e.block_hallway(3);
    CHECK_THROWS_AS(e.reset(Cell{7, 9}, 1), ConfigError);

    auto f = env_with_goal({3, 6});
    CHECK_THROWS_AS(f.block_hallway(0), ConfigError);
    CHECK_THROWS_AS(f.block_hallway(4), ConfigError);
  }

  TEST_CASE("stepping onto the goal pays +20 and ends the episode") {
    auto e = env_with_goal({3, 6});
    e.set_slip_enabled(false);
    e.place_agent({3, 5});
    const auto r = e.step(Action::Right);
    CHECK(r.reward == 20.0);
    CHECK(r.done);
    CHECK_FALSE(r.truncated);
    CHECK(e.agent() == Cell{3, 6});
    CHECK_THROWS_AS(e.step(Action::Left), UsageError);
  }

  TEST_CASE("walking into a wall stays put at a cost of one") {
    auto e = env_with_goal({3, 6});
    e.set_slip_enabled(false);
    e.place_agent({1, 1});
    const auto r = e.step(Action::Up);
    CHECK(e.agent() == Cell{1, 1});
    CHECK(r.reward == -1.0);
    CHECK_FALSE(r.done);
  }

  TEST_CASE("observations are one-hot at the agent's index") {
    auto e = env_with_goal({3, 6}, 7);
    for (int t = 0; t < 200 && !e.episode_over(); ++t) {
      const auto r = e.step(static_cast<Action>(t % 4));
      CHECK(r.observation.size() == 104);
      CHECK(r.observation.sum() == 1.0);
      CHECK(r.observation[r.state] == 1.0);
      CHECK((r.reward == -1.0 || r.reward == 20.0));
      CHECK(r.done == (r.reward == 20.0));
    }
  }

  TEST_CASE("step cap truncates without reaching the goal") {
    EnvParams p;
    p.step_cap = 5;
    FourRooms e(GridLayout::four_rooms(), p);
    e.reset(Cell{3, 6}, 1);
    e.set_slip_enabled(false);
    e.place_agent({11, 1});
    StepResult r;
    for (int t = 0; t < 5; ++t) r = e.step(Action::Left);
    CHECK(r.truncated);
    CHECK_FALSE(r.done);
    CHECK(e.episode_over());
  }

  TEST_CASE("identical seed and actions give identical trajectories") {
    auto a = env_with_goal({10, 6}, 99);
    auto b = env_with_goal({10, 6}, 99);
    for (int t = 0; t < 500 && !a.episode_over(); ++t) {
      const auto action = static_cast<Action>((t * 7) % 4);
      const auto ra = a.step(action);
      const auto rb = b.step(action);
      REQUIRE(ra.state == rb.state);
      REQUIRE(ra.reward == rb.reward);
    }
  }

  TEST_CASE("blocking the east hallway keeps the grid connected") {
    auto e = env_with_goal({3, 6});
    e.block_hallway(e.layout().hallway_by_name("east"));
    CHECK_FALSE(e.passable({7, 9}));
    CHECK(e.layout().connected({{7, 9}}));
    const auto d = e.distances_to_goal();
    for (int s = 0; s < e.num_states(); ++s) {
      if (e.layout().cell_of(s) == Cell{7, 9}) continue;
      CHECK(d[static_cast<std::size_t>(s)] >= 0);
    }
    // Observation indices are unchanged by blocking.
    CHECK(e.num_states() == 104);
    e.set_slip_enabled(false);
    e.place_agent({6, 9});
    e.step(Action::Down);
    CHECK(e.agent() == Cell{6, 9});
  }

  TEST_CASE("shortest paths never shrink after blocking") {
    const auto g = lines(kMap);
    const auto layout = GridLayout::four_rooms();
    for (int h = 0; h < 4; ++h) {
      const Cell hall = layout.hallways()[static_cast<std::size_t>(h)];
      for (Cell goal : {Cell{1, 1}, Cell{11, 11}, Cell{3, 6}, Cell{5, 9}}) {
        if (goal == hall) continue;
        const auto before = bfs(g, goal, std::nullopt);
        const auto after = bfs(g, goal, hall);
        FourRooms e(layout);
        e.reset(goal, 1);
        e.block_hallway(h);
        const auto d = e.distances_to_goal();
        for (int s = 0; s < layout.num_states(); ++s) {
          const Cell c = layout.cell_of(s);
          if (c == hall) continue;
          REQUIRE(after[c.row][c.col] >= before[c.row][c.col]);
          CHECK(d[static_cast<std::size_t>(s)] == after[c.row][c.col]);
        }
      }
    }
  }
}
