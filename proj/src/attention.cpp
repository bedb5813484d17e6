#include "aoc/attention.hpp"

#include <cmath>

#include "aoc/errors.hpp"

namespace aoc {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

AttentionBank AttentionBank::random(int num_options, int dim, Rng& rng, double init_scale, double init_mean) {
  Eigen::MatrixXd logits(num_options, dim);
  for (int o = 0; o < num_options; ++o)
    for (int s = 0; s < dim; ++s) logits(o, s) = init_mean + (2.0 * uniform01(rng) - 1.0) * init_scale;
  return from_logits(std::move(logits));
}

AttentionBank AttentionBank::from_logits(Eigen::MatrixXd logits) {
  if (logits.rows() < 1 || logits.cols() < 1) throw ConfigError("attention: empty bank");
  AttentionBank b;
  b.logits_ = std::move(logits);
  b.accum_ = Eigen::MatrixXd::Zero(b.logits_.rows(), b.logits_.cols());
  b.learnable_ = true;
  b.refresh();
  return b;
}

AttentionBank AttentionBank::fixed(Eigen::MatrixXd values) {
  if (values.rows() < 1 || values.cols() < 1) throw ConfigError("attention: empty bank");
  if ((values.array() < 0.0).any() || (values.array() > 1.0).any()) {
    throw ConfigError("attention: fixed values must lie in [0, 1]");
  }
  AttentionBank b;
  b.h_ = std::move(values);
  b.logits_ = Eigen::MatrixXd::Zero(b.h_.rows(), b.h_.cols());
  b.accum_ = Eigen::MatrixXd::Zero(b.h_.rows(), b.h_.cols());
  b.learnable_ = false;
  return b;
}

AttentionBank AttentionBank::identity(int num_options, int dim) {
  return fixed(Eigen::MatrixXd::Ones(num_options, dim));
}

void AttentionBank::refresh() {
  h_.resize(logits_.rows(), logits_.cols());
  for (Eigen::Index i = 0; i < logits_.size(); ++i) h_.data()[i] = sigmoid(logits_.data()[i]);
}

void AttentionBank::set_logits(Eigen::MatrixXd logits) {
  if (logits.rows() != logits_.rows() || logits.cols() != logits_.cols()) {
    throw ConfigError("attention: logits shape mismatch");
  }
  logits_ = std::move(logits);
  if (learnable_) refresh();
}

MaskedObservation AttentionBank::mask(const Eigen::VectorXd& s, int option) const {
  if (s.size() != dim()) {
    throw UsageError("attention: observation has " + std::to_string(s.size()) + " entries, bank expects " +
                     std::to_string(dim()));
  }
  if (option < 0 || option >= num_options()) throw UsageError("attention: option id out of range");
  MaskedObservation m;
  m.o_omega = h_.row(option).transpose().cwiseProduct(s);
  m.source_option = option;
  int hot = -1;
  int nonzero = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s[i] != 0.0) {
      ++nonzero;
      hot = static_cast<int>(i);
    }
  }
  m.source_state_index = (nonzero == 1 && s[hot] == 1.0) ? hot : -1;
  return m;
}

std::vector<MaskedObservation> AttentionBank::mask_all(const Eigen::VectorXd& s) const {
  std::vector<MaskedObservation> out;
  out.reserve(static_cast<std::size_t>(num_options()));
  for (int o = 0; o < num_options(); ++o) out.push_back(mask(s, o));
  return out;
}

MaskedObservation AttentionBank::mask_state(int state, int option) const {
  if (state < 0 || state >= dim()) throw UsageError("attention: state index out of range");
  if (option < 0 || option >= num_options()) throw UsageError("attention: option id out of range");
  MaskedObservation m;
  m.o_omega = Eigen::VectorXd::Zero(dim());
  m.o_omega[state] = h_(option, state);
  m.source_option = option;
  m.source_state_index = state;
  return m;
}

void AttentionBank::accumulate_mask_grad(int option, const Eigen::VectorXd& s, const Eigen::VectorXd& d_o,
                                         Eigen::MatrixXd& grad) const {
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s[i] == 0.0) continue;
    const double h = h_(option, i);
    grad(option, i) += d_o[i] * s[i] * h * (1.0 - h);
  }
}

Eigen::MatrixXd AttentionBank::logits_grad_from_h_grad(const Eigen::MatrixXd& dh) const {
  return dh.cwiseProduct(h_.cwiseProduct((1.0 - h_.array()).matrix()));
}

void AttentionBank::rmsprop_step(const RmsProp& rule, const Eigen::MatrixXd& grad, double lr) {
  if (!learnable_) return;
  rule.step(logits_, grad, accum_, lr);
  refresh();
}

LossWithGrad cosine_diversity_loss(const AttentionBank& bank, double eps) {
  const int O = bank.num_options();
  if (O < 2) throw UsageError("attention: diversity loss needs at least two options");
  const auto& h = bank.h();
  Eigen::VectorXd norms(O);
  for (int o = 0; o < O; ++o) norms[o] = h.row(o).norm();

  LossWithGrad out;
  Eigen::MatrixXd dh = Eigen::MatrixXd::Zero(O, bank.dim());
  for (int i = 0; i < O; ++i) {
    for (int j = i + 1; j < O; ++j) {
      const double dot = h.row(i).dot(h.row(j));
      const double denom = norms[i] * norms[j] + eps;
      out.value += dot / denom;
      // d/dh_i of dot/denom = h_j/denom - dot * (|h_j| h_i / |h_i|) / denom^2
      const double ci = norms[i] > 0.0 ? dot * norms[j] / (norms[i] * denom * denom) : 0.0;
      const double cj = norms[j] > 0.0 ? dot * norms[i] / (norms[j] * denom * denom) : 0.0;
      dh.row(i) += h.row(j) / denom - ci * h.row(i);
      dh.row(j) += h.row(i) / denom - cj * h.row(j);
    }
  }
  out.grad = bank.logits_grad_from_h_grad(dh);
  return out;
}

LossWithGrad temporal_reg_loss(const AttentionBank& bank, std::span<const int> trajectory) {
  LossWithGrad out;
  Eigen::MatrixXd dh = Eigen::MatrixXd::Zero(bank.num_options(), bank.dim());
  if (trajectory.size() >= 2) {
    const auto& h = bank.h();
    for (std::size_t t = 0; t + 1 < trajectory.size(); ++t) {
      const int a = trajectory[t];
      const int b = trajectory[t + 1];
      if (a < 0 || b < 0 || a >= bank.dim() || b >= bank.dim()) {
        throw UsageError("attention: trajectory state out of range");
      }
      if (a == b) continue;
      for (int o = 0; o < bank.num_options(); ++o) {
        const double d = h(o, a) - h(o, b);
        out.value += std::abs(d);
        const double sign = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
        dh(o, a) += sign;
        dh(o, b) -= sign;
      }
    }
  }
  out.grad = bank.logits_grad_from_h_grad(dh);
  return out;
}

AttentionBank hardcode_rooms(const GridLayout& layout, const std::vector<std::vector<int>>& assignment) {
  if (assignment.empty()) throw ConfigError("hardcoded attention: no options assigned");
  Eigen::MatrixXd values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(assignment.size()), layout.num_states());
  for (std::size_t o = 0; o < assignment.size(); ++o) {
    if (assignment[o].empty()) {
      throw ConfigError("hardcoded attention: option " + std::to_string(o) + " has no room");
    }
    for (int room : assignment[o]) {
      if (room < 0 || room >= layout.num_rooms()) {
        throw ConfigError("hardcoded attention: invalid room " + std::to_string(room));
      }
    }
    auto covers = [&](int room) {
      for (int r : assignment[o])
        if (r == room) return true;
      return false;
    };
    for (int s = 0; s < layout.num_states(); ++s) {
      const int room = layout.room_of(s);
      if (room >= 0) {
        if (covers(room)) values(static_cast<Eigen::Index>(o), s) = 1.0;
        continue;
      }
      const auto hallway = layout.hallway_of(layout.cell_of(s));
      if (!hallway) continue;
      for (int r : layout.hallway_rooms(*hallway)) {
        if (covers(r)) values(static_cast<Eigen::Index>(o), s) = 1.0;
      }
    }
  }
  return AttentionBank::fixed(std::move(values));
}

std::vector<std::vector<int>> rooms_round_robin(const GridLayout& layout, int num_options) {
  const int rooms = layout.num_rooms();
  if (rooms < 1) throw ConfigError("hardcoded attention: layout has no rooms");
  if (num_options < rooms) {
    throw ConfigError("hardcoded attention: need at least one option per room (" + std::to_string(rooms) + ")");
  }
  std::vector<std::vector<int>> a(static_cast<std::size_t>(num_options));
  for (int o = 0; o < num_options; ++o) a[static_cast<std::size_t>(o)] = {o * rooms / num_options};
  return a;
}

}  // namespace aoc
