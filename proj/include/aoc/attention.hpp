#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "aoc/env.hpp"
#include "aoc/network.hpp"
#include "aoc/rng.hpp"

namespace aoc {

struct MaskedObservation {
  Eigen::VectorXd o_omega;
  int source_option = 0;
  int source_state_index = -1;  // -1 when the source observation is not one-hot
};

// Scalar loss with its gradient w.r.t. the attention logits (options x dim).
struct LossWithGrad {
  double value = 0.0;
  Eigen::MatrixXd grad;
};

// Per-option, state-independent attention vectors h = sigmoid(logits).
// Hardcoded banks hold exact 0/1 values and never learn.
class AttentionBank {
 public:
  AttentionBank() = default;
  // Logits drawn uniformly from init_mean + [-init_scale, init_scale].
  static AttentionBank random(int num_options, int dim, Rng& rng, double init_scale = 1.0, double init_mean = 0.0);
  static AttentionBank from_logits(Eigen::MatrixXd logits);
  // Fixed values, each entry in [0, 1]; non-learnable.
  static AttentionBank fixed(Eigen::MatrixXd values);
  static AttentionBank identity(int num_options, int dim);

  int num_options() const { return static_cast<int>(h_.rows()); }
  int dim() const { return static_cast<int>(h_.cols()); }
  bool learnable() const { return learnable_; }

  const Eigen::MatrixXd& h() const { return h_; }
  double h(int option, int state) const { return h_(option, state); }
  const Eigen::MatrixXd& logits() const { return logits_; }
  Eigen::MatrixXd& accumulator() { return accum_; }
  const Eigen::MatrixXd& accumulator() const { return accum_; }

  MaskedObservation mask(const Eigen::VectorXd& s, int option) const;
  std::vector<MaskedObservation> mask_all(const Eigen::VectorXd& s) const;
  // Fast path for one-hot s: o_omega has h[option, state] at `state`.
  MaskedObservation mask_state(int state, int option) const;

  // Chain rule through the mask: dL/dlogits from dL/do_omega for each
  // (option, observation) pair, accumulated into `grad`.
  void accumulate_mask_grad(int option, const Eigen::VectorXd& s, const Eigen::VectorXd& d_o,
                            Eigen::MatrixXd& grad) const;
  // dL/dlogits given dL/dh.
  Eigen::MatrixXd logits_grad_from_h_grad(const Eigen::MatrixXd& dh) const;

  // Gradient descent on the logits; no-op for a fixed bank.
  void rmsprop_step(const RmsProp& rule, const Eigen::MatrixXd& grad, double lr);
  // Replaces logits (learnable) and refreshes h; used by checkpoint loading.
  void set_logits(Eigen::MatrixXd logits);

 private:
  void refresh();

  Eigen::MatrixXd logits_;
  Eigen::MatrixXd h_;
  Eigen::MatrixXd accum_;
  bool learnable_ = true;
};

inline constexpr double kCosineEps = 1e-8;

// L1 = sum over option pairs i < j of cos(h_i, h_j).
LossWithGrad cosine_diversity_loss(const AttentionBank& bank, double eps = kCosineEps);

// L2 = sum over options and adjacent trajectory pairs of
// |h[o, s_t] - h[o, s_{t+1}]|; zero subgradient at equality.
LossWithGrad temporal_reg_loss(const AttentionBank& bank, std::span<const int> trajectory);

// Option o gets 1 on every state of its assigned rooms and 0 elsewhere.
// Hallway cells count as part of both rooms they join.
AttentionBank hardcode_rooms(const GridLayout& layout, const std::vector<std::vector<int>>& assignment);
// num_options / num_rooms options per room, in room order (4 -> one room
// each, 8 -> two per room).
std::vector<std::vector<int>> rooms_round_robin(const GridLayout& layout, int num_options);

}  // namespace aoc
