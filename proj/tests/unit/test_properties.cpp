#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "aoc/checkpoint.hpp"
#include "aoc/env.hpp"
#include "aoc/metrics.hpp"
#include "aoc/network.hpp"

using namespace aoc;

TEST_SUITE("properties") {
  TEST_CASE("slip frequency over a million steps") {
    EnvParams p;
    p.step_cap = 2000000;
    FourRooms env(GridLayout::four_rooms(), p);
    env.reset(Cell{11, 11}, 12345);
    const Cell start{2, 2};  // all four moves lead to distinct cells
    const Cell intended = env.move(start, Action::Right);
    const int n = 1000000;
    int deviated = 0;
    for (int i = 0; i < n; ++i) {
      env.place_agent(start);
      env.step(Action::Right);
      if (env.agent() != intended) ++deviated;
    }
    // A slip redraws uniformly over four actions, so 3/4 of slips are visible.
    const double slip = deviated / (0.75 * n);
    CHECK(std::abs(slip - 0.02) < 0.002);
  }

  TEST_CASE("random walks keep the observation and reward contract") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      FourRooms env(GridLayout::four_rooms());
      auto r = env.reset(std::nullopt, seed);
      Rng rng(seed);
      for (int t = 0; t < 3000; ++t) {
        if (env.episode_over()) r = env.reset();
        r = env.step(static_cast<Action>(uniform_int(rng, 4)));
        REQUIRE(r.observation.sum() == 1.0);
        REQUIRE(r.observation[r.state] == 1.0);
        REQUIRE((r.reward == -1.0 || r.reward == 20.0));
        REQUIRE(r.done == (env.agent() == env.goal()));
        REQUIRE(env.layout().state_index(env.agent()) == r.state);
      }
    }
  }

  TEST_CASE("policy rows stay on the simplex for arbitrary inputs") {
    NetworkShape s;
    s.input_dim = 104;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(seed);
      Network net(s, rng);
      Eigen::VectorXd x = Eigen::VectorXd::NullaryExpr(104, [&] { return 10.0 * uniform01(rng) - 5.0; });
      const auto h = net.forward(x);
      for (int o = 0; o < 4; ++o) {
        REQUIRE(std::abs(h.pi.row(o).sum() - 1.0) < 1e-12);
        REQUIRE((h.pi.row(o).array() >= 0.0).all());
        REQUIRE(h.beta[o] >= 0.0);
        REQUIRE(h.beta[o] <= 1.0);
      }
    }
  }

  TEST_CASE("attention metrics stay in range on random banks") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      Rng rng(seed);
      const int O = 2 + uniform_int(rng, 7);
      const double sharp = 1.0 + 8.0 * uniform01(rng);
      Eigen::MatrixXd h = Eigen::MatrixXd::NullaryExpr(O, 104, [&] { return std::pow(uniform01(rng), sharp); });

      const auto c = attentive_coverage(h);
      REQUIRE(std::accumulate(c.per_option.begin(), c.per_option.end(), 0.0) == doctest::Approx(100.0));
      REQUIRE(c.least <= c.most);

      const double ov = attention_overlap(h);
      REQUIRE(ov >= 0.0);
      REQUIRE(ov <= 100.0);
      Eigen::MatrixXd rev = h.colwise().reverse();
      REQUIRE(attention_overlap(rev) == ov);

      UsageMap u = UsageMap::zeros(104, O);
      for (int i = 0; i < 500; ++i) u.counts(uniform_int(rng, 104), uniform_int(rng, O)) += 1.0;
      const double p = *usage_attention_consistency(u, h);
      REQUIRE(p >= 0.0);
      REQUIRE(p <= 1.0);

      // Restrict execution to attended pairs: probability becomes zero.
      UsageMap attended = UsageMap::zeros(104, O);
      for (int s = 0; s < 104; ++s)
        for (int o = 0; o < O; ++o)
          if (h(o, s) >= 0.01) attended.counts(s, o) = u.counts(s, o) + 1.0;
      if (attended.total() > 0) REQUIRE(*usage_attention_consistency(attended, h) == 0.0);
    }
  }

  TEST_CASE("checkpoints round-trip for learners at any point") {
    AgentConfig c;
    c.hidden1 = 7;
    c.hidden2 = 5;
    c.num_workers = 1;
    for (int iters : {0, 1, 17}) {
      for (Mode mode : {Mode::AOC, Mode::OC}) {
        c.mode = mode;
        Trainer t(c, GridLayout::four_rooms(), {}, {}, static_cast<std::uint64_t>(iters));
        for (int i = 0; i < iters; ++i) t.iterate();
        const auto path = (std::filesystem::temp_directory_path() / "aoc_prop_ckpt.bin").string();
        save_checkpoint(t, path);
        REQUIRE(identical(load_checkpoint(path), capture(t)));
      }
    }
  }
}
