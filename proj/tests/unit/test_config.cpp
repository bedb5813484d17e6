#include <doctest.h>

#include <set>
#include <string>

#include "aoc/config.hpp"
#include "aoc/errors.hpp"

using namespace aoc;

namespace {

std::string error_of(std::string_view text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("defaults round trip through text") {
    const RunConfig c;
    const auto text = to_text(c);
    const auto again = parse_config(text);
    CHECK(to_text(again) == text);
    CHECK(config_hash(again) == config_hash(c));
  }

  TEST_CASE("every emitted key is documented") {
    RunConfig c;
    c.transfer = TransferSettings{};
    c.sweep.w1 = {0, 4};
    c.sweep.w2 = {2};
    c.sweep.num_options = {2, 4, 8};
    std::set<std::string> documented;
    for (const auto& k : config_keys()) {
      CHECK_FALSE(k.doc.empty());
      documented.insert(std::string(k.key));
    }
    const auto text = to_text(c);
    std::size_t pos = 0;
    int lines = 0;
    while (pos < text.size()) {
      const auto end = text.find('\n', pos);
      const auto line = text.substr(pos, end - pos);
      CHECK(documented.count(line.substr(0, line.find(" = "))) == 1);
      pos = end + 1;
      ++lines;
    }
    CHECK(lines == static_cast<int>(documented.size()));
    CHECK(to_text(parse_config(text)) == text);
  }

  TEST_CASE("duplicate and unknown keys name the offending line") {
    const auto dup = error_of("name = a\nw1 = 1\n\nw1 = 2\n");
    CHECK(dup.find("line 4") != std::string::npos);
    CHECK(dup.find("w1") != std::string::npos);
    const auto unknown = error_of("name = a\nlearning_rate = 1\n");
    CHECK(unknown.find("line 2") != std::string::npos);
    CHECK(unknown.find("learning_rate") != std::string::npos);
    CHECK(error_of("gamma\n").find("line 1") != std::string::npos);
    CHECK(error_of("gamma = fast\n").find("gamma") != std::string::npos);
    CHECK(error_of("gamma = 1.0\n") != "");
    CHECK(error_of("seeds = \n") != "");
    CHECK(error_of("seeds = 1,1\n") != "");
    CHECK(error_of("checkpoint_every = 0\n") != "");
    CHECK(error_of("mode = sac\n") != "");
    CHECK(error_of("episodes = -5\n") != "");
  }

  TEST_CASE("field values") {
    const auto c = parse_config(
        "name = ablation   # trailing comment\n"
        "mode = oc\n"
        "num_options = 4\n"
        "w1 = 0.25\n"
        "lr_policy = 3e-4\n"
        "epsilon_horizon = 50000\n"
        "seeds = 1-3,9\n"
        "goal = north\n"
        "blocked_hallway = east\n"
        "policy_baseline = false\n"
        "hardcoded_rooms = 0,1;2;3;0\n");
    CHECK(c.name == "ablation");
    CHECK(c.agent.mode == Mode::OC);
    CHECK(c.agent.w1 == 0.25);
    CHECK(c.agent.lr_policy == 3e-4);
    CHECK(c.agent.epsilon.horizon == 50000.0);
    CHECK(c.seeds == std::vector<std::uint64_t>{1, 2, 3, 9});
    CHECK(c.goal == "north");
    CHECK_FALSE(c.agent.policy_baseline);
    CHECK(c.agent.hardcoded_rooms == std::vector<std::vector<int>>{{0, 1}, {2}, {3}, {0}});
    const auto layout = resolve_layout(c);
    CHECK(resolve_cell(layout, c.goal) == Cell{3, 6});
    CHECK(resolve_cell(layout, "7,9") == Cell{7, 9});
    CHECK_FALSE(resolve_cell(layout, "random").has_value());
    CHECK_THROWS_AS(resolve_cell(layout, "0,0"), ConfigError);
    CHECK(resolve_hallway(layout, c.blocked_hallway) == 3);
    CHECK_FALSE(resolve_hallway(layout, "none").has_value());
    CHECK(to_text(parse_config(to_text(c))) == to_text(c));
  }

  TEST_CASE("set_key applies one override") {
    RunConfig c;
    set_key(c, "w2", "0.5");
    CHECK(c.agent.w2 == 0.5);
    set_key(c, " episodes ", "200");
    CHECK(c.episodes == 200);
    CHECK_THROWS_AS(set_key(c, "nope", "1"), ConfigError);
    CHECK_THROWS_AS(set_key(c, "episodes", "many"), ConfigError);
  }

  TEST_CASE("hash tracks content") {
    RunConfig a, b;
    CHECK(config_hash(a).size() == 16);
    CHECK(config_hash(a) == config_hash(b));
    b.agent.w1 = 3.75;
    CHECK(config_hash(a) != config_hash(b));
    CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  }

  TEST_CASE("doubles print in shortest round-trip form") {
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(4.0) == "4");
    for (double v : {0.1, 1.0 / 3.0, 6.02e23, -2.5e-300}) CHECK(std::stod(format_double(v)) == v);
  }
}
