#include "aoc/transfer.hpp"

#include <cstring>

#include "aoc/errors.hpp"

namespace aoc {

std::string_view transfer_kind_name(TransferKind k) {
  return k == TransferKind::GoalTransfer ? "goal_transfer" : "blocked_hallway";
}

TransferKind parse_transfer_kind(std::string_view s) {
  if (s == "goal_transfer" || s == "goal") return TransferKind::GoalTransfer;
  if (s == "blocked_hallway" || s == "hallway") return TransferKind::BlockedHallway;
  throw ConfigError("unknown transfer kind '" + std::string(s) + "' (expected goal_transfer or blocked_hallway)");
}

std::string_view transfer_variant_name(TransferVariant v) {
  switch (v) {
    case TransferVariant::OC: return "oc";
    case TransferVariant::AOC_I: return "aoc_i";
    case TransferVariant::AOC_II: return "aoc_ii";
  }
  return "?";
}

TransferVariant parse_transfer_variant(std::string_view s) {
  if (s == "oc" || s == "OC") return TransferVariant::OC;
  if (s == "aoc_i" || s == "AOC_I") return TransferVariant::AOC_I;
  if (s == "aoc_ii" || s == "AOC_II") return TransferVariant::AOC_II;
  throw ConfigError("unknown transfer variant '" + std::string(s) + "' (expected oc, aoc_i or aoc_ii)");
}

void TransferSpec::validate() const {
  FreezeMask expected;
  expected.frozen[static_cast<std::size_t>(ParamGroup::Trunk)] = true;
  if (!(freeze_mask(frozen) == expected)) {
    throw ConfigError("transfer: the frozen groups must be exactly the trunk");
  }
  if (post_train_episodes == 0) throw ConfigError("transfer: post_train_episodes must be > 0");
}

AgentConfig transfer_config(const AgentConfig& trained, TransferVariant variant) {
  AgentConfig c = trained;
  c.epsilon = LinearSchedule::constant(trained.epsilon.end);
  c.entropy = LinearSchedule::constant(trained.entropy.end);
  if (variant == TransferVariant::AOC_II) c.w1 = c.w2 = 0.0;
  return c;
}

TransferPlan plan_transfer(const Trainer& trainer, const TransferSpec& spec, std::uint64_t seed) {
  spec.validate();
  const bool is_oc = trainer.config().mode == Mode::OC;
  if (is_oc != (spec.variant == TransferVariant::OC)) {
    throw ConfigError("transfer: variant " + std::string(transfer_variant_name(spec.variant)) +
                      " does not match a " + std::string(mode_name(trainer.config().mode)) + " learner");
  }
  const GridLayout& layout = trainer.layout();
  const FourRooms& env = trainer.env();

  TransferPlan plan;
  plan.old_goal = env.goal();
  plan.goal = env.goal();
  plan.blocked_hallway = env.blocked_hallway();
  plan.config = transfer_config(trainer.config(), spec.variant);
  plan.mask = freeze_mask(spec.frozen);

  Rng rng(derive_seed(seed, 3));
  if (spec.kind == TransferKind::GoalTransfer) {
    if (spec.new_goal) {
      if (layout.state_index(*spec.new_goal) < 0) throw ConfigError("transfer: new goal is not walkable");
      if (*spec.new_goal == plan.old_goal) throw ConfigError("transfer: new goal equals the old goal");
      plan.goal = *spec.new_goal;
    } else {
      if (layout.num_states() < 2) throw ConfigError("transfer: layout has no second cell for the goal");
      do {
        plan.goal = layout.cell_of(uniform_int(rng, layout.num_states()));
      } while (plan.goal == plan.old_goal ||
               (plan.blocked_hallway && layout.hallways()[static_cast<std::size_t>(*plan.blocked_hallway)] == plan.goal));
    }
  } else {
    std::vector<int> candidates;
    for (int k = 0; k < static_cast<int>(layout.hallways().size()); ++k) {
      if (layout.hallways()[static_cast<std::size_t>(k)] != plan.goal) candidates.push_back(k);
    }
    if (spec.hallway) {
      if (*spec.hallway < 0 || *spec.hallway >= static_cast<int>(layout.hallways().size())) {
        throw ConfigError("transfer: invalid hallway id");
      }
      if (layout.hallways()[static_cast<std::size_t>(*spec.hallway)] == plan.goal) {
        throw ConfigError("transfer: cannot block the hallway holding the goal");
      }
      plan.blocked_hallway = *spec.hallway;
    } else {
      if (candidates.empty()) throw ConfigError("transfer: no hallway can be blocked");
      plan.blocked_hallway = candidates[static_cast<std::size_t>(uniform_int(rng, static_cast<int>(candidates.size())))];
    }
  }
  return plan;
}

TransferPlan apply_transfer(Trainer& trainer, const TransferSpec& spec, std::uint64_t seed) {
  TransferPlan plan = plan_transfer(trainer, spec, seed);
  trainer.set_config(plan.config);
  trainer.set_freeze(plan.mask);
  trainer.set_task(plan.goal, plan.blocked_hallway);
  return plan;
}

FrozenSnapshot snapshot_frozen(const Network& net, const FreezeMask& mask) {
  FrozenSnapshot s;
  s.mask = mask;
  s.tensors.resize(kNumTensors);
  for (int k = 0; k < kNumTensors; ++k) {
    const auto t = static_cast<Tensor>(k);
    if (mask.is_frozen(t)) s.tensors[static_cast<std::size_t>(k)] = net[t];
  }
  return s;
}

bool frozen_unchanged(const FrozenSnapshot& before, const Network& net) {
  for (int k = 0; k < kNumTensors; ++k) {
    const auto t = static_cast<Tensor>(k);
    if (!before.mask.is_frozen(t)) continue;
    const auto& a = before.tensors[static_cast<std::size_t>(k)];
    const auto& b = net[t];
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    if (std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) != 0) return false;
  }
  return true;
}

}  // namespace aoc
