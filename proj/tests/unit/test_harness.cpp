#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "aoc/checkpoint.hpp"
#include "aoc/errors.hpp"
#include "aoc/harness.hpp"

using namespace aoc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "aoc_unit_harness" / name;
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

RunConfig tiny(const fs::path& out) {
  RunConfig c;
  c.agent.hidden1 = 8;
  c.agent.hidden2 = 8;
  c.agent.num_workers = 2;
  c.seeds = {1, 2};
  c.episodes = 12;
  c.checkpoint_every = 1500;
  c.eval.episodes = 3;
  c.curve_window = 5;
  c.output_dir = out.string();
  return c;
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("trailing mean") {
    const std::vector<double> v{4, 2, 6, 8};
    const auto t = trailing_mean(v, 2);
    CHECK(t == std::vector<double>{4, 3, 4, 7});
    CHECK_THROWS_AS(trailing_mean(v, 0), UsageError);
  }

  TEST_CASE("cross-run aggregation") {
    const auto one = aggregate_runs({{1.0, 2.0, 3.0}});
    CHECK(one.std == std::vector<double>{0, 0, 0});
    CHECK(one.mean == std::vector<double>{1, 2, 3});
    const auto two = aggregate_runs({{1.0, 5.0}, {3.0}});
    CHECK(two.mean == std::vector<double>{2.0, 5.0});
    CHECK(two.std == std::vector<double>{1.0, 0.0});
    CHECK(two.n == std::vector<int>{2, 1});
  }

  TEST_CASE("first index below a threshold") {
    const std::vector<double> v{50, 40, 29.9, 35};
    CHECK(first_below(v, 30.0) == 2u);
    CHECK_FALSE(first_below(v, 10.0).has_value());
    CHECK(first_below(v, 45.0) == 1u);
    CHECK(first_below(v, 45.0, 3) == 3u);
    CHECK_FALSE(first_below(v, 30.0, 3).has_value());
  }

  TEST_CASE("train writes a complete run and is byte-deterministic") {
    const auto a = scratch("det_a");
    const auto b = scratch("det_b");
    std::ostringstream log;
    REQUIRE(cmd_train(tiny(a), log) == kExitOk);
    fs::rename(a, b);
    REQUIRE(cmd_train(tiny(a), log) == kExitOk);
    for (const char* f : {"manifest.json", "config.txt", "layout.txt"}) CHECK(slurp(a / f) == slurp(b / f));
    for (const char* seed : {"seed_1", "seed_2"}) {
      for (const char* f : {"episodes.csv", "metrics.json", "attention.csv", "usage.csv", "final.bin"}) {
        REQUIRE(fs::exists(a / seed / f));
        CHECK(slurp(a / seed / f) == slurp(b / seed / f));
      }
    }
    CHECK(slurp(a / "seed_1" / "episodes.csv") != slurp(a / "seed_2" / "episodes.csv"));
    CHECK(first_line(a / "seed_1" / "episodes.csv") ==
          "phase,seed,episode,worker,frames,return,length,reached_goal,usage_0,usage_1,usage_2,usage_3");
    CHECK(first_line(a / "seed_1" / "attention.csv") == "option,state,row,col,h");
    CHECK(first_line(a / "seed_1" / "usage.csv") == "state,row,col,option,count");

    const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
    CHECK(manifest["config_hash"] == config_hash(tiny(a)));
    CHECK(manifest["seeds"].size() == 2);
    CHECK(manifest["seeds"][0]["status"] == "complete");
    CHECK(config_hash(load_config((a / "config.txt").string())) == manifest["config_hash"].get<std::string>());
  }

  TEST_CASE("every checkpoint written during training loads bit-exactly") {
    const auto dir = scratch("ckpts");
    auto cfg = tiny(dir);
    cfg.seeds = {3};
    cfg.checkpoint_every = 500;
    std::ostringstream log;
    REQUIRE(cmd_train(cfg, log) == kExitOk);
    int n = 0;
    for (const auto& f : fs::directory_iterator(dir / "seed_3" / "checkpoints")) {
      const auto c = load_checkpoint(f.path().string());
      const auto tmp = dir / "resave.bin";
      save_checkpoint(c, tmp.string());
      CHECK(slurp(tmp) == slurp(f.path()));
      CHECK(identical(load_checkpoint(tmp.string()), c));
      ++n;
    }
    CHECK(n >= 1);
    CHECK(fs::exists(dir / "seed_3" / "snapshots"));
  }

  TEST_CASE("non-finite training aborts with diagnostics") {
    const auto dir = scratch("nan");
    auto cfg = tiny(dir);
    cfg.seeds = {1};
    cfg.env.step_reward = -1e308;
    std::ostringstream log;
    CHECK(cmd_train(cfg, log) == kExitTraining);
    REQUIRE(fs::exists(dir / "seed_1" / "diagnostics.txt"));
    CHECK(slurp(dir / "seed_1" / "diagnostics.txt").find("non-finite") != std::string::npos);
    const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
    CHECK(manifest["seeds"][0]["status"] == "failed");
  }

  TEST_CASE("report emits plot-ready tables") {
    const auto dir = scratch("report");
    std::ostringstream log;
    REQUIRE(cmd_train(tiny(dir), log) == kExitOk);
    REQUIRE(cmd_report(dir.string(), log) == kExitOk);
    const auto r = dir / "report";
    CHECK(first_line(r / "curve.csv") == "phase,episode,seeds,mean_length,std_length,mean_return,std_return");
    CHECK(first_line(r / "dominance.csv") == "phase,frames,seeds,mean_dominant,std_dominant");
    CHECK(first_line(r / "summary.csv").rfind("seed,eval_mean_return,eval_mean_length,dominant_usage", 0) == 0);
    CHECK(fs::exists(r / "attention_seed1.csv"));
    CHECK(fs::exists(r / "usage_seed2.csv"));
    CHECK(fs::exists(r / "layout.txt"));
    const auto summary = nlohmann::json::parse(slurp(r / "summary.json"));
    CHECK(summary["seeds_reported"] == 2);
    CHECK(summary["usage_std"].size() == 4);
    CHECK(summary["warnings"].empty());
  }

  TEST_CASE("single-seed report has zero spread") {
    const auto dir = scratch("single");
    auto cfg = tiny(dir);
    cfg.seeds = {4};
    std::ostringstream log;
    REQUIRE(cmd_train(cfg, log) == kExitOk);
    REQUIRE(cmd_report(dir.string(), log) == kExitOk);
    std::ifstream in(dir / "report" / "curve.csv");
    std::string line;
    std::getline(in, line);
    int rows = 0;
    while (std::getline(in, line)) {
      std::stringstream ls(line);
      std::string cell;
      std::vector<std::string> cells;
      while (std::getline(ls, cell, ',')) cells.push_back(cell);
      REQUIRE(cells.size() == 7);
      CHECK(cells[2] == "1");
      CHECK(std::stod(cells[4]) == 0.0);
      CHECK(std::stod(cells[6]) == 0.0);
      ++rows;
    }
    CHECK(rows >= 12);
  }

  TEST_CASE("partial runs report with warnings") {
    const auto dir = scratch("partial");
    std::ostringstream log;
    REQUIRE(cmd_train(tiny(dir), log) == kExitOk);
    fs::remove(dir / "seed_2" / "metrics.json");
    REQUIRE(cmd_report(dir.string(), log) == kExitOk);
    const auto summary = nlohmann::json::parse(slurp(dir / "report" / "summary.json"));
    CHECK(summary["seeds_reported"] == 1);
    CHECK_FALSE(summary["warnings"].empty());
    CHECK(summary["usage_std"].is_null());
  }

  TEST_CASE("report on an empty directory is an error") {
    const auto dir = scratch("empty");
    fs::create_directories(dir);
    std::ostringstream log;
    CHECK_THROWS_AS(cmd_report(dir.string(), log), ConfigError);
  }

  TEST_CASE("transfer runs record recovery and frozen-trunk invariance") {
    const auto dir = scratch("transfer");
    auto cfg = tiny(dir);
    cfg.seeds = {1};
    TransferSettings ts;
    ts.kind = TransferKind::BlockedHallway;
    ts.variant = TransferVariant::AOC_II;
    ts.pre_episodes = 10;
    ts.post_episodes = 10;
    cfg.transfer = ts;
    cfg.goal = "north";
    std::ostringstream log;
    REQUIRE(cmd_transfer(cfg, "", log) == kExitOk);
    const auto m = nlohmann::json::parse(slurp(dir / "seed_1" / "metrics.json"));
    const auto& t = m["transfer"];
    CHECK(t["frozen_trunk_unchanged"] == true);
    CHECK(t["variant"] == "aoc_ii");
    CHECK(t["blocked_hallway"].get<int>() != 0);
    CHECK(t["post_episodes"].get<int>() >= 10);
    CHECK(t.contains("recovered_at"));

    // Resume from the pre-trained checkpoints of a train run.
    const auto pre = scratch("transfer_pre");
    auto train = tiny(pre);
    train.seeds = {1};
    train.goal = "north";
    REQUIRE(cmd_train(train, log) == kExitOk);
    auto post = cfg;
    post.output_dir = scratch("transfer_post").string();
    REQUIRE(cmd_transfer(post, pre.string(), log) == kExitOk);
    REQUIRE(cmd_report(post.output_dir, log) == kExitOk);
    CHECK(slurp(fs::path(post.output_dir) / "report" / "curve.csv").find("\npost,") != std::string::npos);

    auto oc = cfg;
    oc.agent.mode = Mode::OC;
    oc.output_dir = scratch("transfer_bad").string();
    CHECK_THROWS_AS(cmd_transfer(oc, "", log), ConfigError);
  }

  TEST_CASE("sweep enumerates the grid and ranks by overlap") {
    const auto dir = scratch("sweep");
    auto cfg = tiny(dir);
    cfg.seeds = {1};
    cfg.episodes = 4;
    cfg.sweep.w1 = {0, 2, 4};
    cfg.sweep.w2 = {0, 2};
    std::ostringstream log;
    REQUIRE(cmd_sweep(cfg, log) == kExitOk);
    std::ifstream in(dir / "sweep.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line ==
          "rank,cell,num_options,w1,w2,seeds,least_coverage,most_coverage,overlap,consistency,dominant_usage,"
          "eval_mean_length");
    int rows = 0;
    double prev = 1e9;
    while (std::getline(in, line)) {
      std::vector<std::string> cells;
      std::stringstream ls(line);
      std::string cell;
      while (std::getline(ls, cell, ',')) cells.push_back(cell);
      const double overlap = std::stod(cells[8]);
      CHECK(overlap <= prev);
      prev = overlap;
      ++rows;
    }
    CHECK(rows == 6);
    for (int i = 0; i < 6; ++i) CHECK(fs::exists(dir / ("cell_" + std::to_string(i)) / "manifest.json"));

    auto empty = tiny(scratch("sweep_empty"));
    CHECK_THROWS_AS(cmd_sweep(empty, log), ConfigError);
  }
}
