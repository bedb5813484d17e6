#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aoc/agent.hpp"
#include "aoc/metrics.hpp"
#include "aoc/transfer.hpp"

namespace aoc {

struct SweepGrid {
  std::vector<double> w1;
  std::vector<double> w2;
  std::vector<int> num_options;

  bool empty() const { return w1.empty() && w2.empty() && num_options.empty(); }
};

struct TransferSettings {
  TransferKind kind = TransferKind::GoalTransfer;
  TransferVariant variant = TransferVariant::AOC_I;
  std::uint64_t pre_episodes = 30000;
  std::uint64_t post_episodes = 10000;
  std::string goal = "random";     // new goal: random, a hallway name or row,col
  std::string hallway = "random";  // blocked hallway: random or a hallway name/id
};

// Everything a run needs. Serialized as flat `key = value` text; see
// config_keys() for the schema.
struct RunConfig {
  std::string name = "run";
  AgentConfig agent;
  std::string layout = "four_rooms";  // built-in name or a grid file path
  EnvParams env;
  std::string goal = "random";          // random, a hallway name or row,col
  std::string blocked_hallway = "none";  // none or a hallway name/id
  std::vector<std::uint64_t> seeds{1};
  std::uint64_t episodes = 30000;
  std::uint64_t checkpoint_every = 100000;  // environment frames
  std::string output_dir = "runs/run";

  EvalOptions eval;
  OverlapThresholds overlap;
  double consistency_threshold = 0.01;
  int curve_window = 100;
  double recovery_length = 30.0;

  std::optional<TransferSettings> transfer;
  SweepGrid sweep;

  // Throws ConfigError on inconsistent values.
  void validate() const;
};

struct ConfigKey {
  std::string_view key;
  std::string_view doc;
};
const std::vector<ConfigKey>& config_keys();

// Parses `key = value` lines; '#' starts a comment. Unknown keys, repeated
// keys and malformed values throw ConfigError naming the line.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::string& path);
// Applies one `key = value` assignment without validating the whole config.
void set_key(RunConfig& c, std::string_view key, std::string_view value);

// Canonical text: every key in schema order. parse_config(to_text(c))
// reproduces c.
std::string to_text(const RunConfig& c);

std::uint64_t fnv1a(std::string_view bytes);
// 16 hex digits of fnv1a(to_text(c)).
std::string config_hash(const RunConfig& c);

GridLayout resolve_layout(const RunConfig& c);
// Empty for "random"; otherwise a hallway name or "row,col".
std::optional<Cell> resolve_cell(const GridLayout& layout, std::string_view text);
// Empty for "none"/"random"; otherwise a hallway name or id.
std::optional<int> resolve_hallway(const GridLayout& layout, std::string_view text);

// Shortest round-trip decimal form.
std::string format_double(double v);

}  // namespace aoc
