#include <doctest.h>

#include <cmath>
#include <set>

#include "aoc/errors.hpp"
#include "aoc/metrics.hpp"
#include "aoc/transfer.hpp"

using namespace aoc;

namespace {

AgentConfig small(Mode mode) {
  AgentConfig c;
  c.mode = mode;
  c.hidden1 = 8;
  c.hidden2 = 9;
  c.num_workers = 2;
  return c;
}

Trainer warm(Mode mode, Cell goal, std::uint64_t seed = 1) {
  Trainer t(small(mode), GridLayout::four_rooms(), {}, {goal, std::nullopt}, seed);
  for (int i = 0; i < 20; ++i) t.iterate();
  return t;
}

TransferSpec spec(TransferKind kind, TransferVariant variant) {
  TransferSpec s;
  s.kind = kind;
  s.variant = variant;
  return s;
}

}  // namespace

TEST_SUITE("transfer") {
  TEST_CASE("names round trip") {
    for (auto k : {TransferKind::GoalTransfer, TransferKind::BlockedHallway})
      CHECK(parse_transfer_kind(transfer_kind_name(k)) == k);
    for (auto v : {TransferVariant::OC, TransferVariant::AOC_I, TransferVariant::AOC_II})
      CHECK(parse_transfer_variant(transfer_variant_name(v)) == v);
    CHECK_THROWS_AS(parse_transfer_kind("teleport"), ConfigError);
    CHECK_THROWS_AS(parse_transfer_variant("aoc_iii"), ConfigError);
  }

  TEST_CASE("the frozen set must be the trunk") {
    TransferSpec s;
    CHECK_NOTHROW(s.validate());
    s.frozen = {"trunk", "value_head"};
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s.frozen = {};
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = {};
    s.post_train_episodes = 0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
  }

  TEST_CASE("goal transfer from the north hallway to the top-left cell") {
    auto t = warm(Mode::AOC, {3, 6});
    auto s = spec(TransferKind::GoalTransfer, TransferVariant::AOC_I);
    s.new_goal = Cell{1, 1};
    const auto plan = apply_transfer(t, s, 1);
    CHECK(plan.old_goal == Cell{3, 6});
    CHECK(t.env().goal() == Cell{1, 1});
    CHECK(t.freeze().is_frozen(Tensor::W1));
    CHECK_FALSE(t.freeze().is_frozen(Tensor::Wq));
    CHECK_FALSE(t.freeze().attention);
    CHECK(t.config().w1 == 4.0);
    CHECK(t.config().w2 == 2.0);
    CHECK(t.epsilon() == doctest::Approx(0.1));
    CHECK(t.entropy_coef() == doctest::Approx(0.1));
  }

  TEST_CASE("random new goals differ from the old one") {
    std::set<Cell> seen;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      auto t = warm(Mode::OC, {3, 6}, 2);
      const auto plan = plan_transfer(t, spec(TransferKind::GoalTransfer, TransferVariant::OC), seed);
      CHECK(plan.goal != Cell{3, 6});
      CHECK(t.layout().state_index(plan.goal) >= 0);
      seen.insert(plan.goal);
    }
    CHECK(seen.size() > 5);
  }

  TEST_CASE("blocked hallway never holds the goal") {
    std::set<int> seen;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      auto t = warm(Mode::AOC, {3, 6}, 3);
      const auto plan = plan_transfer(t, spec(TransferKind::BlockedHallway, TransferVariant::AOC_I), seed);
      REQUIRE(plan.blocked_hallway.has_value());
      CHECK(*plan.blocked_hallway != 0);
      seen.insert(*plan.blocked_hallway);
    }
    CHECK(seen == std::set<int>{1, 2, 3});

    auto t = warm(Mode::AOC, {3, 6}, 3);
    auto s = spec(TransferKind::BlockedHallway, TransferVariant::AOC_I);
    s.hallway = t.layout().hallway_by_name("east");
    apply_transfer(t, s, 0);
    CHECK(t.env().blocked_hallway() == 3);
    CHECK(t.env().goal() == Cell{3, 6});
    s.hallway = 0;
    CHECK_THROWS_AS(plan_transfer(t, s, 0), ConfigError);
  }

  TEST_CASE("variant II zeroes the attention weights but keeps attention learnable") {
    auto t = warm(Mode::AOC, {3, 6});
    apply_transfer(t, spec(TransferKind::GoalTransfer, TransferVariant::AOC_II), 4);
    CHECK(t.config().w1 == 0.0);
    CHECK(t.config().w2 == 0.0);
    const Eigen::MatrixXd before = t.attention().logits();
    for (int i = 0; i < 20; ++i) t.iterate();
    CHECK(t.attention().logits() != before);
  }

  TEST_CASE("variant must match the learner") {
    auto oc = warm(Mode::OC, {3, 6});
    CHECK_THROWS_AS(apply_transfer(oc, spec(TransferKind::GoalTransfer, TransferVariant::AOC_I), 0), ConfigError);
    auto aoc = warm(Mode::AOC, {3, 6});
    CHECK_THROWS_AS(apply_transfer(aoc, spec(TransferKind::GoalTransfer, TransferVariant::OC), 0), ConfigError);
  }

  TEST_CASE("frozen trunk is bitwise unchanged over 100 updates") {
    for (Mode mode : {Mode::AOC, Mode::OC}) {
      auto t = warm(mode, {3, 6});
      const auto variant = mode == Mode::OC ? TransferVariant::OC : TransferVariant::AOC_I;
      const auto plan = apply_transfer(t, spec(TransferKind::GoalTransfer, variant), 5);
      const auto snap = snapshot_frozen(t.network(), plan.mask);
      const Eigen::MatrixXd heads_before = t.network()[Tensor::Wpi];
      for (int i = 0; i < 100; ++i) t.iterate();
      CHECK(frozen_unchanged(snap, t.network()));
      CHECK(t.network()[Tensor::Wpi] != heads_before);
    }
  }

  TEST_CASE("a changed frozen tensor is detected") {
    auto t = warm(Mode::AOC, {3, 6});
    const auto snap = snapshot_frozen(t.network(), freeze_mask({"trunk"}));
    auto& x = t.network()[Tensor::b1](0, 0);
    x = std::nextafter(x, 1e9);
    CHECK_FALSE(frozen_unchanged(snap, t.network()));
  }

  TEST_CASE("freezing nothing matches ordinary training") {
    auto a = warm(Mode::AOC, {3, 6}, 8);
    auto b = warm(Mode::AOC, {3, 6}, 8);
    b.set_freeze(freeze_mask({}));
    for (int i = 0; i < 30; ++i) {
      a.iterate();
      b.iterate();
    }
    for (int k = 0; k < kNumTensors; ++k)
      CHECK(a.network()[static_cast<Tensor>(k)] == b.network()[static_cast<Tensor>(k)]);
  }

  TEST_CASE("freezing everything holds every parameter") {
    auto t = warm(Mode::AOC, {3, 6}, 9);
    t.set_freeze(freeze_mask({"all"}));
    const Network before = t.network();
    const Eigen::MatrixXd logits = t.attention().logits();
    for (int i = 0; i < 50; ++i) t.iterate();
    for (int k = 0; k < kNumTensors; ++k)
      CHECK(t.network()[static_cast<Tensor>(k)] == before[static_cast<Tensor>(k)]);
    CHECK(t.attention().logits() == logits);
  }
}
