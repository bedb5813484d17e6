// aoc: train, transfer, sweep and report runs of the option learners.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "aoc/config.hpp"
#include "aoc/errors.hpp"
#include "aoc/harness.hpp"

namespace {

aoc::RunConfig load_with_overrides(const std::string& path, const std::vector<std::string>& sets,
                                   const std::string& output) {
  aoc::RunConfig cfg = aoc::load_config(path);
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw aoc::ConfigError("--set expects key=value, got '" + s + "'");
    aoc::set_key(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
  if (!output.empty()) cfg.output_dir = output;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attention option-critic and option-critic on the four-rooms domain"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output;
  std::vector<std::string> sets;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("-c,--config", config_path, "run configuration file")->required()->check(CLI::ExistingFile);
    cmd->add_option("-o,--output", output, "run directory (overrides output_dir)");
    cmd->add_option("-s,--set", sets, "override a config key: key=value (repeatable)");
  };

  auto* train = app.add_subcommand("train", "train every seed of a configuration");
  add_common(train);

  std::string from;
  auto* transfer = app.add_subcommand("transfer", "change the task after training and keep learning");
  add_common(transfer);
  transfer->add_option("--from", from, "train run directory or checkpoint file (default: pre-train inline)");

  auto* sweep = app.add_subcommand("sweep", "train every cell of the sweep grid and rank them");
  add_common(sweep);

  std::string run_dir;
  auto* report = app.add_subcommand("report", "aggregate a run directory into plot-ready CSVs");
  report->add_option("run_dir", run_dir, "run directory")->required();

  auto* keys = app.add_subcommand("keys", "list the configuration keys");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*keys) {
      for (const auto& k : aoc::config_keys()) std::cout << k.key << "\t" << k.doc << '\n';
      return aoc::kExitOk;
    }
    if (*report) return aoc::cmd_report(run_dir, std::cerr);
    const aoc::RunConfig cfg = load_with_overrides(config_path, sets, output);
    if (*train) return aoc::cmd_train(cfg, std::cerr);
    if (*transfer) return aoc::cmd_transfer(cfg, from, std::cerr);
    if (*sweep) return aoc::cmd_sweep(cfg, std::cerr);
  } catch (const aoc::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return aoc::kExitConfig;
  } catch (const aoc::UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return aoc::kExitConfig;
  } catch (const aoc::TrainingError& e) {
    std::cerr << "training failed: " << e.what() << '\n';
    return aoc::kExitTraining;
  }
  return aoc::kExitOk;
}
