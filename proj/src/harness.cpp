#include "aoc/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "aoc/checkpoint.hpp"
#include "aoc/errors.hpp"
#include "aoc/transfer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace aoc {

namespace {

std::string fmt(double v) { return format_double(v); }

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json cell_json(Cell c) { return json::array({c.row, c.col}); }

json metrics_json(const SnapshotMetrics& m) {
  json j;
  j["frames"] = m.frames;
  j["episodes"] = m.episodes;
  j["eval"] = {{"episodes", m.eval.usage.episodes},
               {"mean_return", m.eval.mean_return},
               {"mean_length", m.eval.mean_length},
               {"reached_goal", m.eval.reached_goal},
               {"dominant_usage", m.eval.dominant_usage},
               {"usage_fractions", m.eval.usage.fractions()}};
  j["coverage"] = {{"least", m.coverage.least}, {"most", m.coverage.most}, {"per_option", m.coverage.per_option}};
  j["overlap"] = opt_json(m.overlap);
  j["consistency"] = opt_json(m.consistency);
  return j;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + p.string());
  out << text;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

void write_attention_csv(const fs::path& p, const AttentionBank& bank, const GridLayout& layout) {
  std::ostringstream out;
  out << "option,state,row,col,h\n";
  for (int o = 0; o < bank.num_options(); ++o) {
    for (int s = 0; s < bank.dim(); ++s) {
      const Cell c = layout.cell_of(s);
      out << o << ',' << s << ',' << c.row << ',' << c.col << ',' << fmt(bank.h(o, s)) << '\n';
    }
  }
  write_text(p, out.str());
}

void write_usage_csv(const fs::path& p, const UsageMap& usage, const GridLayout& layout) {
  std::ostringstream out;
  out << "state,row,col,option,count\n";
  for (Eigen::Index s = 0; s < usage.counts.rows(); ++s) {
    const Cell c = layout.cell_of(static_cast<int>(s));
    for (Eigen::Index o = 0; o < usage.counts.cols(); ++o) {
      out << s << ',' << c.row << ',' << c.col << ',' << o << ',' << fmt(usage.counts(s, o)) << '\n';
    }
  }
  write_text(p, out.str());
}

std::string seed_dir_name(std::uint64_t seed) { return "seed_" + std::to_string(seed); }

// Appends episode rows and writes per-checkpoint snapshots for one seed.
class SeedWriter : public TrainSink {
 public:
  SeedWriter(const RunConfig& cfg, fs::path dir, std::uint64_t seed, int num_options, std::ostream& log)
      : cfg_(cfg), dir_(std::move(dir)), seed_(seed), log_(log) {
    fs::create_directories(dir_ / "checkpoints");
    fs::create_directories(dir_ / "snapshots");
    episodes_.open(dir_ / "episodes.csv", std::ios::binary | std::ios::trunc);
    if (!episodes_) throw ConfigError("cannot write " + (dir_ / "episodes.csv").string());
    episodes_ << "phase,seed,episode,worker,frames,return,length,reached_goal";
    for (int o = 0; o < num_options; ++o) episodes_ << ",usage_" << o;
    episodes_ << '\n';
  }

  void begin_phase(const std::string& phase, std::uint64_t episode_offset) {
    phase_ = phase;
    offset_ = episode_offset;
    lengths_.clear();
  }

  void on_episode(const EpisodeRecord& r) override {
    episodes_ << phase_ << ',' << seed_ << ',' << (r.episode - offset_) << ',' << r.worker << ',' << r.frames << ','
              << fmt(r.ret) << ',' << r.length << ',' << (r.reached_goal ? 1 : 0);
    for (int steps : r.option_steps) episodes_ << ',' << fmt(static_cast<double>(steps) / r.length);
    episodes_ << '\n';
    lengths_.push_back(r.length);
  }

  void on_checkpoint(const Trainer& t) override {
    const std::string tag = phase_ + "_" + std::to_string(t.frames());
    save_checkpoint(t, (dir_ / "checkpoints" / (tag + ".bin")).string());
    const SnapshotMetrics m = measure(t, cfg_, derive_seed(seed_, 1000 + t.frames()));
    write_attention_csv(dir_ / "snapshots" / ("attention_" + tag + ".csv"), t.attention(), t.layout());
    write_usage_csv(dir_ / "snapshots" / ("usage_" + tag + ".csv"), m.eval.usage, t.layout());
    json j = metrics_json(m);
    j["phase"] = phase_;
    write_json(dir_ / "snapshots" / ("metrics_" + tag + ".json"), j);
    const std::size_t n = std::min<std::size_t>(lengths_.size(), static_cast<std::size_t>(cfg_.curve_window));
    double recent = 0.0;
    for (std::size_t i = lengths_.size() - n; i < lengths_.size(); ++i) recent += lengths_[i];
    log_ << "seed " << seed_ << " [" << phase_ << "] frames " << t.frames() << " episodes " << t.episodes()
         << " mean length " << (n ? recent / static_cast<double>(n) : 0.0) << " dominant " << m.eval.dominant_usage
         << '\n';
  }

  const std::vector<double>& lengths() const { return lengths_; }
  void flush() { episodes_.flush(); }

 private:
  const RunConfig& cfg_;
  fs::path dir_;
  std::uint64_t seed_;
  std::ostream& log_;
  std::ofstream episodes_;
  std::string phase_ = "train";
  std::uint64_t offset_ = 0;
  std::vector<double> lengths_;
};

void write_diagnostics(const fs::path& dir, const Trainer& t, const std::string& what) {
  const auto& l = t.last_loss();
  std::ostringstream out;
  out << "error: " << what << '\n'
      << "frames: " << t.frames() << '\n'
      << "episodes: " << t.episodes() << '\n'
      << "updates: " << t.updates() << '\n'
      << "epsilon: " << fmt(t.epsilon()) << '\n'
      << "entropy_coef: " << fmt(t.entropy_coef()) << '\n'
      << "last_loss.value: " << fmt(l.value) << '\n'
      << "last_loss.policy: " << fmt(l.policy) << '\n'
      << "last_loss.entropy: " << fmt(l.entropy) << '\n'
      << "last_loss.termination: " << fmt(l.termination) << '\n'
      << "last_loss.attention_q: " << fmt(l.attention_q) << '\n'
      << "last_loss.diversity: " << fmt(l.diversity) << '\n'
      << "last_loss.temporal: " << fmt(l.temporal) << '\n';
  for (int k = 0; k < kNumTensors; ++k) {
    const auto tensor = static_cast<Tensor>(k);
    out << "finite." << tensor_name(tensor) << ": " << (t.network()[tensor].allFinite() ? "yes" : "no") << '\n';
  }
  out << "finite.attention: " << (t.attention().logits().allFinite() ? "yes" : "no") << '\n';
  write_text(dir / "diagnostics.txt", out.str());
}

struct SeedReport {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  SnapshotMetrics final_metrics;
};

void write_final(const fs::path& dir, const Trainer& t, const SnapshotMetrics& m, json extra) {
  save_checkpoint(t, (dir / "final.bin").string());
  write_attention_csv(dir / "attention.csv", t.attention(), t.layout());
  write_usage_csv(dir / "usage.csv", m.eval.usage, t.layout());
  json j = metrics_json(m);
  j["goal"] = cell_json(t.env().goal());
  j["blocked_hallway"] = t.env().blocked_hallway() ? json(*t.env().blocked_hallway()) : json(nullptr);
  for (auto& [k, v] : extra.items()) j[k] = v;
  write_json(dir / "metrics.json", j);
}

void write_manifest(const RunConfig& cfg, const fs::path& root, const std::string& verb,
                    const std::vector<SeedReport>& seeds, const GridLayout& layout, json extra = json::object()) {
  write_text(root / "config.txt", to_text(cfg));
  write_text(root / "layout.txt", layout.to_text());
  json j;
  j["name"] = cfg.name;
  j["verb"] = verb;
  j["config_hash"] = config_hash(cfg);
  j["config_file"] = "config.txt";
  j["layout_file"] = "layout.txt";
  j["mode"] = std::string(mode_name(cfg.agent.mode));
  j["num_options"] = cfg.agent.num_options;
  j["seeds"] = json::array();
  for (const auto& s : seeds) {
    json e = {{"seed", s.seed}, {"dir", seed_dir_name(s.seed)}, {"status", s.ok ? "complete" : "failed"}};
    if (!s.ok) e["error"] = s.error;
    j["seeds"].push_back(e);
  }
  for (auto& [k, v] : extra.items()) j[k] = v;
  write_json(root / "manifest.json", j);
}

SeedReport train_seed(const RunConfig& cfg, const GridLayout& layout, const fs::path& root, std::uint64_t seed,
                      std::ostream& log) {
  SeedReport rep;
  rep.seed = seed;
  const fs::path dir = root / seed_dir_name(seed);
  Trainer t = make_trainer(cfg, layout, seed);
  SeedWriter writer(cfg, dir, seed, cfg.agent.num_options, log);
  writer.begin_phase("train", 0);
  try {
    t.run_until(cfg.episodes, &writer, cfg.checkpoint_every);
  } catch (const TrainingError& e) {
    writer.flush();
    write_diagnostics(dir, t, e.what());
    rep.error = e.what();
    log << "seed " << seed << ": training failed: " << e.what() << '\n';
    return rep;
  }
  writer.flush();
  rep.final_metrics = measure(t, cfg, derive_seed(seed, 999));
  write_final(dir, t, rep.final_metrics, json::object());
  rep.ok = true;
  return rep;
}

int finish_code(const std::vector<SeedReport>& reps) {
  for (const auto& r : reps)
    if (!r.ok) return kExitTraining;
  return kExitOk;
}

// CSV rows split on commas; no quoting is ever emitted by the harness.
std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(read_text(p));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace

SnapshotMetrics measure(const Trainer& trainer, const RunConfig& cfg, std::uint64_t eval_seed) {
  SnapshotMetrics m;
  m.frames = trainer.frames();
  m.episodes = trainer.episodes();
  EvalOptions opts = cfg.eval;
  opts.seed = eval_seed;
  m.eval = evaluate(trainer, opts);
  const auto& h = trainer.attention().h();
  m.coverage = attentive_coverage(h);
  if (h.rows() >= 2) m.overlap = attention_overlap(h, cfg.overlap);
  m.consistency = usage_attention_consistency(m.eval.usage, h, cfg.consistency_threshold);
  return m;
}

std::vector<double> trailing_mean(std::span<const double> values, int window) {
  if (window < 1) throw UsageError("trailing_mean: window must be >= 1");
  std::vector<double> out(values.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    sum += values[i];
    if (i >= static_cast<std::size_t>(window)) sum -= values[i - static_cast<std::size_t>(window)];
    const std::size_t n = std::min<std::size_t>(i + 1, static_cast<std::size_t>(window));
    out[i] = sum / static_cast<double>(n);
  }
  return out;
}

CurveStats aggregate_runs(const std::vector<std::vector<double>>& runs) {
  CurveStats c;
  std::size_t len = 0;
  for (const auto& r : runs) len = std::max(len, r.size());
  c.mean.assign(len, 0.0);
  c.std.assign(len, 0.0);
  c.n.assign(len, 0);
  for (std::size_t i = 0; i < len; ++i) {
    double sum = 0.0;
    int n = 0;
    for (const auto& r : runs)
      if (i < r.size()) sum += r[i], ++n;
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& r : runs)
      if (i < r.size()) ss += (r[i] - mean) * (r[i] - mean);
    c.mean[i] = mean;
    c.std[i] = std::sqrt(ss / n);
    c.n[i] = n;
  }
  return c;
}

std::optional<std::size_t> first_below(std::span<const double> trailing, double threshold, std::size_t from) {
  for (std::size_t i = from; i < trailing.size(); ++i)
    if (trailing[i] < threshold) return i;
  return std::nullopt;
}

Trainer make_trainer(const RunConfig& cfg, std::uint64_t seed) { return make_trainer(cfg, resolve_layout(cfg), seed); }

Trainer make_trainer(const RunConfig& cfg, const GridLayout& layout, std::uint64_t seed) {
  TaskSpec task;
  task.goal = resolve_cell(layout, cfg.goal);
  task.blocked_hallway = resolve_hallway(layout, cfg.blocked_hallway);
  return Trainer(cfg.agent, layout, cfg.env, task, seed);
}

int cmd_train(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const GridLayout layout = resolve_layout(cfg);
  const fs::path root(cfg.output_dir);
  fs::create_directories(root);
  std::vector<SeedReport> reps;
  for (auto seed : cfg.seeds) {
    reps.push_back(train_seed(cfg, layout, root, seed, log));
    write_manifest(cfg, root, "train", reps, layout);
  }
  write_manifest(cfg, root, "train", reps, layout);
  return finish_code(reps);
}

int cmd_transfer(const RunConfig& cfg, const std::string& from, std::ostream& log) {
  cfg.validate();
  if (!cfg.transfer) throw ConfigError("transfer: config has no transfer_* keys");
  const TransferSettings& ts = *cfg.transfer;
  const GridLayout layout = resolve_layout(cfg);
  const fs::path root(cfg.output_dir);
  fs::create_directories(root);

  TransferSpec spec;
  spec.kind = ts.kind;
  spec.variant = ts.variant;
  spec.pre_train_episodes = ts.pre_episodes;
  spec.post_train_episodes = ts.post_episodes;
  if (ts.kind == TransferKind::GoalTransfer) spec.new_goal = resolve_cell(layout, ts.goal);
  else spec.hallway = resolve_hallway(layout, ts.hallway);
  spec.validate();

  std::vector<SeedReport> reps;
  for (auto seed : cfg.seeds) {
    SeedReport rep;
    rep.seed = seed;
    const fs::path dir = root / seed_dir_name(seed);
    Trainer t = make_trainer(cfg, layout, seed);
    SeedWriter writer(cfg, dir, seed, cfg.agent.num_options, log);
    try {
      if (from.empty()) {
        writer.begin_phase("pre", 0);
        t.run_until(ts.pre_episodes, &writer, cfg.checkpoint_every);
      } else {
        fs::path src(from);
        if (fs::is_directory(src)) src = src / seed_dir_name(seed) / "final.bin";
        restore(t, load_checkpoint(src.string()));
      }
      const FrozenSnapshot before = snapshot_frozen(t.network(), freeze_mask(spec.frozen));
      const TransferPlan plan = apply_transfer(t, spec, seed);
      writer.begin_phase("post", t.episodes());
      t.run_until(t.episodes() + ts.post_episodes, &writer, cfg.checkpoint_every);
      writer.flush();

      const bool frozen_ok = frozen_unchanged(before, t.network());
      const auto trailing = trailing_mean(writer.lengths(), cfg.curve_window);
      const auto recovered =
          first_below(trailing, cfg.recovery_length, static_cast<std::size_t>(std::max(cfg.curve_window - 1, 0)));
      rep.final_metrics = measure(t, cfg, derive_seed(seed, 999));
      json extra;
      extra["transfer"] = {{"kind", std::string(transfer_kind_name(spec.kind))},
                           {"variant", std::string(transfer_variant_name(spec.variant))},
                           {"old_goal", cell_json(plan.old_goal)},
                           {"goal", cell_json(plan.goal)},
                           {"blocked_hallway", plan.blocked_hallway ? json(*plan.blocked_hallway) : json(nullptr)},
                           {"post_episodes", writer.lengths().size()},
                           {"recovered_at", recovered ? json(*recovered) : json(nullptr)},
                           {"frozen_trunk_unchanged", frozen_ok}};
      write_final(dir, t, rep.final_metrics, extra);
      log << "seed " << seed << ": " << (recovered ? "recovered after " + std::to_string(*recovered) + " episodes"
                                                   : std::string("did not recover"))
          << (frozen_ok ? "" : " (frozen trunk changed)") << '\n';
      rep.ok = frozen_ok;
      if (!frozen_ok) rep.error = "frozen trunk tensors changed";
    } catch (const TrainingError& e) {
      writer.flush();
      write_diagnostics(dir, t, e.what());
      rep.error = e.what();
      log << "seed " << seed << ": training failed: " << e.what() << '\n';
    }
    reps.push_back(rep);
    write_manifest(cfg, root, "transfer", reps, layout);
  }
  write_manifest(cfg, root, "transfer", reps, layout, {{"from", from}});
  return finish_code(reps);
}

int cmd_sweep(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  if (cfg.sweep.empty()) throw ConfigError("sweep: the grid is empty (set sweep_w1, sweep_w2 or sweep_num_options)");
  const GridLayout layout = resolve_layout(cfg);
  const fs::path root(cfg.output_dir);
  fs::create_directories(root);

  const auto w1s = cfg.sweep.w1.empty() ? std::vector<double>{cfg.agent.w1} : cfg.sweep.w1;
  const auto w2s = cfg.sweep.w2.empty() ? std::vector<double>{cfg.agent.w2} : cfg.sweep.w2;
  const auto opts = cfg.sweep.num_options.empty() ? std::vector<int>{cfg.agent.num_options} : cfg.sweep.num_options;

  struct Row {
    int cell;
    double w1, w2;
    int options;
    int seeds_ok;
    double least, most, overlap, consistency, dominant, length;
    bool has_overlap, has_consistency;
  };
  std::vector<Row> rows;
  json cells = json::array();
  int code = kExitOk;
  int idx = 0;
  for (int o : opts) {
    for (double w1 : w1s) {
      for (double w2 : w2s) {
        RunConfig c = cfg;
        c.sweep = {};
        c.agent.num_options = o;
        c.agent.w1 = w1;
        c.agent.w2 = w2;
        const std::string name = "cell_" + std::to_string(idx);
        c.output_dir = (root / name).string();
        c.validate();
        log << "sweep " << name << ": num_options " << o << " w1 " << fmt(w1) << " w2 " << fmt(w2) << '\n';
        fs::create_directories(c.output_dir);
        std::vector<SeedReport> reps;
        for (auto seed : c.seeds) {
          reps.push_back(train_seed(c, layout, c.output_dir, seed, log));
          write_manifest(c, c.output_dir, "train", reps, layout);
        }
        if (finish_code(reps) != kExitOk) code = kExitTraining;

        Row r{idx, w1, w2, o, 0, 0, 0, 0, 0, 0, 0, true, true};
        int n_overlap = 0, n_cons = 0;
        for (const auto& rep : reps) {
          if (!rep.ok) continue;
          const auto& m = rep.final_metrics;
          ++r.seeds_ok;
          r.least += m.coverage.least;
          r.most += m.coverage.most;
          r.dominant += m.eval.dominant_usage;
          r.length += m.eval.mean_length;
          if (m.overlap) r.overlap += *m.overlap, ++n_overlap;
          if (m.consistency) r.consistency += *m.consistency, ++n_cons;
        }
        if (r.seeds_ok > 0) {
          r.least /= r.seeds_ok;
          r.most /= r.seeds_ok;
          r.dominant /= r.seeds_ok;
          r.length /= r.seeds_ok;
        }
        r.has_overlap = n_overlap > 0;
        r.has_consistency = n_cons > 0;
        if (n_overlap) r.overlap /= n_overlap;
        if (n_cons) r.consistency /= n_cons;
        rows.push_back(r);
        cells.push_back({{"cell", idx}, {"dir", name}, {"num_options", o}, {"w1", w1}, {"w2", w2}});
        ++idx;
      }
    }
  }

  // Best attention separation first; cells without an overlap value last.
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.has_overlap != b.has_overlap) return a.has_overlap;
    return a.overlap > b.overlap;
  });
  std::ostringstream out;
  out << "rank,cell,num_options,w1,w2,seeds,least_coverage,most_coverage,overlap,consistency,dominant_usage,"
         "eval_mean_length\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    out << (i + 1) << ',' << r.cell << ',' << r.options << ',' << fmt(r.w1) << ',' << fmt(r.w2) << ',' << r.seeds_ok
        << ',' << fmt(r.least) << ',' << fmt(r.most) << ',' << (r.has_overlap ? fmt(r.overlap) : "") << ','
        << (r.has_consistency ? fmt(r.consistency) : "") << ',' << fmt(r.dominant) << ',' << fmt(r.length) << '\n';
  }
  write_text(root / "sweep.csv", out.str());
  write_text(root / "config.txt", to_text(cfg));
  write_json(root / "manifest.json", {{"name", cfg.name},
                                      {"verb", "sweep"},
                                      {"config_hash", config_hash(cfg)},
                                      {"config_file", "config.txt"},
                                      {"summary", "sweep.csv"},
                                      {"cells", cells}});
  return code;
}

int cmd_report(const std::string& run_dir, std::ostream& log) {
  const fs::path root(run_dir);
  if (!fs::exists(root / "manifest.json")) throw ConfigError("report: " + run_dir + " has no manifest.json");
  json manifest;
  try {
    manifest = json::parse(read_text(root / "manifest.json"));
  } catch (const json::exception& e) {
    throw ConfigError("report: unreadable manifest: " + std::string(e.what()));
  }
  if (manifest.value("verb", "") == "sweep") {
    throw ConfigError("report: " + run_dir + " is a sweep; report on one of its cell directories");
  }
  if (!manifest.contains("seeds") || manifest["seeds"].empty()) throw ConfigError("report: manifest lists no seeds");
  const int O = manifest.at("num_options").get<int>();
  const int window = [&] {
    try {
      return load_config((root / "config.txt").string()).curve_window;
    } catch (const ConfigError&) {
      return 100;
    }
  }();
  const GridLayout layout = GridLayout::parse(read_text(root / manifest.value("layout_file", "layout.txt")));

  const fs::path out_dir = root / "report";
  fs::create_directories(out_dir);
  json warnings = json::array();
  auto warn = [&](const std::string& w) {
    warnings.push_back(w);
    log << "warning: " << w << '\n';
  };

  // phase -> per-seed trailing curves
  std::map<std::string, std::vector<std::vector<double>>> len_curves, ret_curves;
  std::vector<std::string> phase_order;
  // (phase, frames) -> dominant usage per seed
  std::map<std::pair<std::string, std::uint64_t>, std::vector<double>> dominance;
  json per_seed = json::array();
  std::vector<std::vector<double>> final_usage;
  std::ostringstream summary_csv;
  summary_csv << "seed,eval_mean_return,eval_mean_length,dominant_usage,least_coverage,most_coverage,overlap,"
                 "consistency";
  for (int o = 0; o < O; ++o) summary_csv << ",usage_" << o;
  summary_csv << '\n';
  int usable = 0;

  for (const auto& entry : manifest["seeds"]) {
    const auto seed = entry.at("seed").get<std::uint64_t>();
    const fs::path dir = root / entry.at("dir").get<std::string>();
    if (entry.value("status", "") != "complete") warn("seed " + std::to_string(seed) + " did not complete");
    if (!fs::exists(dir / "episodes.csv")) {
      warn("seed " + std::to_string(seed) + " has no episodes.csv");
      continue;
    }
    const auto rows = read_csv(dir / "episodes.csv");
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_phase;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const auto& r = rows[i];
      if (r.size() < 8) {
        warn("seed " + std::to_string(seed) + ": malformed episodes.csv row " + std::to_string(i + 1));
        break;
      }
      if (std::find(phase_order.begin(), phase_order.end(), r[0]) == phase_order.end()) phase_order.push_back(r[0]);
      by_phase[r[0]].first.push_back(std::stod(r[6]));
      by_phase[r[0]].second.push_back(std::stod(r[5]));
    }
    for (auto& [phase, v] : by_phase) {
      len_curves[phase].push_back(trailing_mean(v.first, window));
      ret_curves[phase].push_back(trailing_mean(v.second, window));
    }
    if (fs::exists(dir / "snapshots")) {
      std::vector<fs::path> snaps;
      for (const auto& f : fs::directory_iterator(dir / "snapshots")) {
        const auto name = f.path().filename().string();
        if (name.rfind("metrics_", 0) == 0 && f.path().extension() == ".json") snaps.push_back(f.path());
      }
      std::sort(snaps.begin(), snaps.end());
      for (const auto& p : snaps) {
        const json m = json::parse(read_text(p));
        dominance[{m.value("phase", "train"), m.at("frames").get<std::uint64_t>()}].push_back(
            m.at("eval").at("dominant_usage").get<double>());
      }
    }
    if (!fs::exists(dir / "metrics.json")) {
      warn("seed " + std::to_string(seed) + " has no final metrics");
      continue;
    }
    ++usable;
    json m = json::parse(read_text(dir / "metrics.json"));
    m["seed"] = seed;
    per_seed.push_back(m);
    const auto usage = m.at("eval").at("usage_fractions").get<std::vector<double>>();
    final_usage.push_back(usage);
    auto num_or_empty = [](const json& v) { return v.is_null() ? std::string() : format_double(v.get<double>()); };
    summary_csv << seed << ',' << fmt(m["eval"]["mean_return"].get<double>()) << ','
                << fmt(m["eval"]["mean_length"].get<double>()) << ',' << fmt(m["eval"]["dominant_usage"].get<double>())
                << ',' << fmt(m["coverage"]["least"].get<double>()) << ',' << fmt(m["coverage"]["most"].get<double>())
                << ',' << num_or_empty(m["overlap"]) << ',' << num_or_empty(m["consistency"]);
    for (double u : usage) summary_csv << ',' << fmt(u);
    summary_csv << '\n';
    fs::copy_file(dir / "attention.csv", out_dir / ("attention_seed" + std::to_string(seed) + ".csv"),
                  fs::copy_options::overwrite_existing);
    fs::copy_file(dir / "usage.csv", out_dir / ("usage_seed" + std::to_string(seed) + ".csv"),
                  fs::copy_options::overwrite_existing);
  }
  if (len_curves.empty()) throw ConfigError("report: no seed in " + run_dir + " has episode data");

  std::ostringstream curve;
  curve << "phase,episode,seeds,mean_length,std_length,mean_return,std_return\n";
  for (const auto& phase : phase_order) {
    const auto L = aggregate_runs(len_curves[phase]);
    const auto R = aggregate_runs(ret_curves[phase]);
    for (std::size_t i = 0; i < L.mean.size(); ++i) {
      curve << phase << ',' << i << ',' << L.n[i] << ',' << fmt(L.mean[i]) << ',' << fmt(L.std[i]) << ','
            << fmt(R.mean[i]) << ',' << fmt(R.std[i]) << '\n';
    }
  }
  write_text(out_dir / "curve.csv", curve.str());

  std::ostringstream dom;
  dom << "phase,frames,seeds,mean_dominant,std_dominant\n";
  for (const auto& phase : phase_order) {
    for (const auto& [key, vals] : dominance) {
      if (key.first != phase) continue;
      double mean = 0.0;
      for (double v : vals) mean += v;
      mean /= static_cast<double>(vals.size());
      double ss = 0.0;
      for (double v : vals) ss += (v - mean) * (v - mean);
      dom << phase << ',' << key.second << ',' << vals.size() << ',' << fmt(mean) << ','
          << fmt(std::sqrt(ss / static_cast<double>(vals.size()))) << '\n';
    }
  }
  write_text(out_dir / "dominance.csv", dom.str());
  write_text(out_dir / "summary.csv", summary_csv.str());
  write_text(out_dir / "layout.txt", layout.to_text());

  json summary;
  summary["name"] = manifest.value("name", "");
  summary["config_hash"] = manifest.value("config_hash", "");
  summary["seeds_reported"] = usable;
  summary["per_seed"] = per_seed;
  if (final_usage.size() >= 2) summary["usage_std"] = usage_std(final_usage);
  else summary["usage_std"] = nullptr;
  summary["warnings"] = warnings;
  write_json(out_dir / "summary.json", summary);
  log << "report written to " << out_dir.string() << '\n';
  return kExitOk;
}

}  // namespace aoc
