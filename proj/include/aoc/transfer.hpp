#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aoc/agent.hpp"

namespace aoc {

enum class TransferKind { GoalTransfer, BlockedHallway };
enum class TransferVariant { OC, AOC_I, AOC_II };

std::string_view transfer_kind_name(TransferKind k);
TransferKind parse_transfer_kind(std::string_view s);
std::string_view transfer_variant_name(TransferVariant v);
TransferVariant parse_transfer_variant(std::string_view s);

struct TransferSpec {
  TransferKind kind = TransferKind::GoalTransfer;
  TransferVariant variant = TransferVariant::AOC_I;
  std::uint64_t pre_train_episodes = 30000;
  std::uint64_t post_train_episodes = 10000;
  // Must freeze exactly the trunk.
  std::vector<std::string> frozen{"trunk"};
  // Fixed targets; drawn from the seed when empty.
  std::optional<Cell> new_goal;
  std::optional<int> hallway;

  void validate() const;
};

// What apply_transfer changed.
struct TransferPlan {
  Cell old_goal;
  Cell goal;
  std::optional<int> blocked_hallway;
  AgentConfig config;
  FreezeMask mask;
};

// Picks the new task: a random cell other than the current goal, or a
// random hallway that does not hold the goal.
TransferPlan plan_transfer(const Trainer& trainer, const TransferSpec& spec, std::uint64_t seed);

// Moves the goal or blocks a hallway, freezes the trunk, pins the
// schedules at their end values and (AOC_II) zeroes w1 and w2. Throws
// ConfigError when the variant does not match the trainer's mode.
TransferPlan apply_transfer(Trainer& trainer, const TransferSpec& spec, std::uint64_t seed);

// Post-transfer agent configuration for a trained config.
AgentConfig transfer_config(const AgentConfig& trained, TransferVariant variant);

// Copies of the tensors a mask freezes, for bitwise invariance checks.
struct FrozenSnapshot {
  FreezeMask mask;
  std::vector<Eigen::MatrixXd> tensors;  // indexed by Tensor; empty when not frozen
};
FrozenSnapshot snapshot_frozen(const Network& net, const FreezeMask& mask);
bool frozen_unchanged(const FrozenSnapshot& before, const Network& net);

}  // namespace aoc
