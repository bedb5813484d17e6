#pragma once

#include <stdexcept>
#include <string>

namespace aoc {

// Bad layout, bad config file, inconsistent checkpoint/layout pairing.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// API misuse: stepping a finished episode, shape mismatches, stale tapes.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Numerical failure during training (non-finite loss or gradient).
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace aoc
