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
// End-to-end experiment driver. Output directory layout:
//
//   rounds.jsonl   one JSON object per round, metrics on evaluation rounds
//   summary.tsv    final metrics, one row
//   config.yaml    effective configuration
//   model.ckpt     final parameters (output.checkpoint)
//   traces.jsonl   poisoned uploads (output.traces)
#ifndef FEDSEQ_EXPERIMENT_H_
#define FEDSEQ_EXPERIMENT_H_

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fedseq/config.h"
#include "fedseq/data.h"
#include "fedseq/federation.h"

namespace fedseq {

inline constexpr const char* kOutputDirEnv = "FEDSEQ_OUTPUT_DIR";

// Replaces output.dir with $FEDSEQ_OUTPUT_DIR when it is set and non-empty.
void apply_environment(ExperimentConfig& cfg);

Dataset load_dataset(const ExperimentConfig& cfg);

// ceil(percent / 100 * population) distinct indices, ascending, drawn from
// the "malicious-designation" stream of `seed`.
std::vector<std::size_t> designate_malicious(std::size_t population, double percent,
                                             std::uint64_t seed);

std::vector<ItemId> resolve_targets(const ExperimentConfig& cfg, const Dataset& dataset);

struct RunOptions {
  bool write_outputs = true;
  std::optional<ModelParams> initial_params;  // replaces the seeded init
  std::function<void(const RoundLog&)> on_round;
};

struct RunSummary {
  std::string output_dir;
  std::vector<ItemId> targets;
  std::vector<std::size_t> malicious;
  std::vector<RoundLog> evaluations;  // rounds that carried metrics
  EvalMetrics final_metrics;
  ModelParams params;
};

// Throws ConfigError before any compute when the configuration is invalid.
// Runtime failures propagate after the rounds completed so far are flushed.
RunSummary run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});

// Tab-separated header and row of summary.tsv.
std::string summary_header();
std::string summary_row(const ExperimentConfig& cfg, const EvalMetrics& metrics);

struct SweepRun {
  std::string value;
  RunSummary summary;
};

// One run per value of `axis` (a config key) in output.dir/<axis>=<value>,
// plus output.dir/sweep.csv with one row per evaluation point per run. With
// per_value_seeds the i-th run uses federation.seed + i.
std::vector<SweepRun> sweep(const ExperimentConfig& cfg, const std::string& axis,
                            const std::vector<std::string>& values,
                            bool per_value_seeds = false,
                            const RunOptions& options = {});

}  // namespace fedseq

#endif  // FEDSEQ_EXPERIMENT_H_
