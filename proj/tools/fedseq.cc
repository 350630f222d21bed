/*
 * Copyright 2026 The fedseq Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
// fedseq run|sweep|check
//
// Exit codes: 0 success, 1 config error, 2 runtime failure, 3 self-test
// failure.
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedseq/config.h"
#include "fedseq/experiment.h"
#include "fedseq/selfcheck.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitSelfTest = 3;

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string output_dir;
  bool quiet = false;
};

fedseq::ExperimentConfig resolve_config(const CommonArgs& args) {
  fedseq::ExperimentConfig cfg =
      args.config_path.empty() ? fedseq::ExperimentConfig{} : fedseq::load_config(args.config_path);
  for (const auto& o : args.overrides) fedseq::apply_override(cfg, o);
  fedseq::apply_environment(cfg);
  if (!args.output_dir.empty()) cfg.output.dir = args.output_dir;
  fedseq::validate_config(cfg);
  return cfg;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
  // A missing file is reported by load_config as a config error (exit 1).
  cmd->add_option("-c,--config", args.config_path, "YAML experiment config");
  cmd->add_option("-s,--set", args.overrides, "Override, e.g. attack.method=dv-fsr")
      ->take_all();
  cmd->add_option("-o,--output-dir", args.output_dir,
                  "Output directory (wins over FEDSEQ_OUTPUT_DIR and output.dir)");
  cmd->add_flag("-q,--quiet", args.quiet, "Only print the final summary");
}

void print_round(const fedseq::RoundLog& log) {
  if (!log.metrics.has_value()) return;
  std::printf("round %4d  loss %.4f  HR@10 %.4f  NDCG@10 %.4f  ER@5 %.4f  ER@10 %.4f\n",
              log.round, log.loss, log.metrics->hr, log.metrics->ndcg, log.metrics->er(5),
              log.metrics->er(10));
  std::fflush(stdout);
}

std::vector<std::string> split_values(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated sequential recommendation poisoning simulator"};
  app.require_subcommand(1);

  CommonArgs run_args;
  CLI::App* run = app.add_subcommand("run", "Run one experiment");
  add_common(run, run_args);

  CommonArgs sweep_args;
  std::string axis;
  std::string values;
  bool per_value_seeds = false;
  CLI::App* sweep = app.add_subcommand("sweep", "Run one experiment per value of a config key");
  add_common(sweep, sweep_args);
  sweep->add_option("--axis", axis, "Config key, e.g. attack.malicious_percent")->required();
  sweep->add_option("--values", values, "Comma-separated values")->required();
  sweep->add_flag("--per-value-seeds", per_value_seeds,
                  "Use federation.seed + i for the i-th value");

  bool check_quick = false;
  CLI::App* check = app.add_subcommand("check", "Run the oracle and gradient self-tests");
  check->add_flag("--quick", check_quick, "Fewer random instances per check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help and friends exit 0; malformed command lines count as config errors.
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (run->parsed()) {
      const fedseq::ExperimentConfig cfg = resolve_config(run_args);
      fedseq::RunOptions opt;
      if (!run_args.quiet) opt.on_round = print_round;
      const fedseq::RunSummary s = fedseq::run_experiment(cfg, opt);
      std::printf("%s\n%s\n", fedseq::summary_header().c_str(),
                  fedseq::summary_row(cfg, s.final_metrics).c_str());
      std::printf("outputs in %s\n", s.output_dir.c_str());
      return kExitOk;
    }
    if (sweep->parsed()) {
      const fedseq::ExperimentConfig cfg = resolve_config(sweep_args);
      fedseq::RunOptions opt;
      if (!sweep_args.quiet) opt.on_round = print_round;
      const auto runs = fedseq::sweep(cfg, axis, split_values(values), per_value_seeds, opt);
      std::printf("%s\t%s\n", axis.c_str(), fedseq::summary_header().c_str());
      for (const auto& r : runs) {
        fedseq::ExperimentConfig run_cfg = cfg;
        fedseq::set_config_value(run_cfg, axis, r.value);
        std::printf("%s\t%s\n", r.value.c_str(),
                    fedseq::summary_row(run_cfg, r.summary.final_metrics).c_str());
      }
      std::printf("outputs in %s\n", cfg.output.dir.c_str());
      return kExitOk;
    }
    if (check->parsed()) {
      std::vector<fedseq::CheckResult> results;
      if (check_quick) {
        results = {fedseq::check_gradients(20), fedseq::check_geometric_median(),
                   fedseq::check_aggregation_identities(),
                   fedseq::check_substitution(100), fedseq::check_metrics(20),
                   fedseq::check_determinism(fedseq::determinism_probe_config())};
      } else {
        results = fedseq::run_self_checks();
      }
      bool ok = true;
      for (const auto& r : results) {
        std::printf("%s %-24s %6.2fs  %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                    r.seconds, r.detail.c_str());
        ok = ok && r.passed;
      }
      return ok ? kExitOk : kExitSelfTest;
    }
  } catch (const fedseq::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
