#include "aoc/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "aoc/errors.hpp"

namespace aoc {

UsageMap UsageMap::zeros(int num_states, int num_options) {
  UsageMap u;
  u.counts = Eigen::MatrixXd::Zero(num_states, num_options);
  return u;
}

std::vector<double> UsageMap::fractions() const {
  std::vector<double> f(static_cast<std::size_t>(counts.cols()), 0.0);
  const double tot = total();
  if (tot <= 0.0) return f;
  for (Eigen::Index o = 0; o < counts.cols(); ++o) f[static_cast<std::size_t>(o)] = counts.col(o).sum() / tot;
  return f;
}

double UsageMap::dominant() const {
  const auto f = fractions();
  return f.empty() ? 0.0 : *std::max_element(f.begin(), f.end());
}

EvalResult evaluate(const Network& net, const AttentionBank& bank, const FourRooms& env, const EvalOptions& opts) {
  if (opts.episodes < 1) throw UsageError("evaluate: need at least one episode");
  const int O = bank.num_options();
  FourRooms e = env;
  Rng rng(derive_seed(opts.seed, 300));
  e.reset(env.goal(), derive_seed(opts.seed, 301));

  EvalResult r;
  r.usage = UsageMap::zeros(e.num_states(), O);
  r.usage.episodes = opts.episodes;
  double ret_sum = 0.0;
  double len_sum = 0.0;
  for (int ep = 0; ep < opts.episodes; ++ep) {
    StepResult s = e.reset();
    StateEval ev = evaluate_state(net, bank, s.state, false);
    int option = select_option(ev.own_q(), opts.epsilon, rng);
    double ret = 0.0;
    int len = 0;
    while (true) {
      r.usage.counts(s.state, option) += 1.0;
      const Action a = act(ev.heads[static_cast<std::size_t>(option)].pi.row(option), rng);
      s = e.step(a);
      ret += s.reward;
      ++len;
      if (s.done || s.truncated) {
        if (s.done) ++r.reached_goal;
        break;
      }
      ev = evaluate_state(net, bank, s.state, false);
      if (uniform01(rng) < ev.beta(option)) option = select_option(ev.own_q(), opts.epsilon, rng);
    }
    ret_sum += ret;
    len_sum += len;
  }
  r.mean_return = ret_sum / opts.episodes;
  r.mean_length = len_sum / opts.episodes;
  r.dominant_usage = r.usage.dominant();
  return r;
}

EvalResult evaluate(const Trainer& trainer, const EvalOptions& opts) {
  return evaluate(trainer.network(), trainer.attention(), trainer.env(), opts);
}

Coverage attentive_coverage(const Eigen::MatrixXd& h) {
  if (h.rows() < 1 || h.cols() < 1) throw UsageError("attentive_coverage: empty attention matrix");
  Coverage c;
  c.per_option.assign(static_cast<std::size_t>(h.rows()), 0.0);
  for (Eigen::Index s = 0; s < h.cols(); ++s) {
    Eigen::Index best = 0;
    for (Eigen::Index o = 1; o < h.rows(); ++o)
      if (h(o, s) > h(best, s)) best = o;
    c.per_option[static_cast<std::size_t>(best)] += 1.0;
  }
  for (auto& v : c.per_option) v = 100.0 * v / static_cast<double>(h.cols());
  c.least = *std::min_element(c.per_option.begin(), c.per_option.end());
  c.most = *std::max_element(c.per_option.begin(), c.per_option.end());
  return c;
}

double attention_overlap(const Eigen::MatrixXd& h, const OverlapThresholds& th) {
  if (h.rows() < 2) throw UsageError("attention_overlap: needs at least two options");
  if (h.cols() < 1) throw UsageError("attention_overlap: empty attention matrix");
  int hits = 0;
  for (Eigen::Index s = 0; s < h.cols(); ++s) {
    double first = -1.0;
    double second = -1.0;
    for (Eigen::Index o = 0; o < h.rows(); ++o) {
      const double v = h(o, s);
      if (v > first) {
        second = first;
        first = v;
      } else if (v > second) {
        second = v;
      }
    }
    if (first - second > th.min_gap && second < th.max_second) ++hits;
  }
  return 100.0 * hits / static_cast<double>(h.cols());
}

std::optional<double> usage_attention_consistency(const UsageMap& usage, const Eigen::MatrixXd& h, double threshold) {
  if (usage.counts.rows() != h.cols() || usage.counts.cols() != h.rows()) {
    throw UsageError("usage_attention_consistency: usage map and attention shapes disagree");
  }
  const double tot = usage.total();
  if (tot <= 0.0) return std::nullopt;
  double low = 0.0;
  for (Eigen::Index s = 0; s < usage.counts.rows(); ++s)
    for (Eigen::Index o = 0; o < usage.counts.cols(); ++o)
      if (h(o, s) < threshold) low += usage.counts(s, o);
  return low / tot;
}

std::vector<double> usage_std(const std::vector<std::vector<double>>& runs) {
  if (runs.size() < 2) throw UsageError("usage_std: needs at least two runs");
  const std::size_t O = runs.front().size();
  for (const auto& r : runs)
    if (r.size() != O) throw UsageError("usage_std: runs disagree on the option count");
  std::vector<double> out(O, 0.0);
  const double n = static_cast<double>(runs.size());
  for (std::size_t o = 0; o < O; ++o) {
    double mean = 0.0;
    for (const auto& r : runs) mean += r[o];
    mean /= n;
    double ss = 0.0;
    for (const auto& r : runs) ss += (r[o] - mean) * (r[o] - mean);
    out[o] = std::sqrt(ss / (n - 1.0));
  }
  return out;
}

double mean_abs_change(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw UsageError("mean_abs_change: shape mismatch");
  if (a.size() == 0) return 0.0;
  return (a - b).cwiseAbs().mean();
}

}  // namespace aoc
