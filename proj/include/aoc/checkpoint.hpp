#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "aoc/agent.hpp"

namespace aoc {

// Self-describing binary snapshot of a learner: network tensors, RMSprop
// accumulators, attention logits/values/accumulators, task and counters.
//
// Layout (little-endian):
//   "AOCCKPT\0"  u32 version  u64 meta_len  meta (JSON text)
//   u32 tensor_count, then per tensor:
//   u32 name_len  name  u32 rows  u32 cols  rows*cols f64 (column-major)
struct NamedTensor {
  std::string name;
  Eigen::MatrixXd value;
};

struct CheckpointMeta {
  NetworkShape shape;
  std::string mode = "aoc";
  std::uint64_t seed = 0;
  Cell goal;
  std::optional<int> blocked_hallway;
  std::uint64_t frames = 0;
  std::uint64_t episodes = 0;
  std::uint64_t updates = 0;
  std::string layout;  // GridLayout::to_text()
  RmsPropConfig rmsprop;
  bool attention_learnable = true;
};

struct Checkpoint {
  CheckpointMeta meta;
  std::vector<NamedTensor> tensors;

  const Eigen::MatrixXd& tensor(const std::string& name) const;
  bool has(const std::string& name) const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

Checkpoint capture(const Trainer& trainer);
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
void save_checkpoint(const Trainer& trainer, const std::string& path);
// Throws ConfigError on a malformed or truncated file.
Checkpoint load_checkpoint(const std::string& path);

// Copies parameters, accumulators, attention, goal, blocking and counters
// into `trainer`. Throws ConfigError when the network shape, option count
// or layout disagree.
void restore(Trainer& trainer, const Checkpoint& ckpt);

// Bitwise comparison of every tensor and meta field.
bool identical(const Checkpoint& a, const Checkpoint& b);

}  // namespace aoc
