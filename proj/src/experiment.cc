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
#include "fedseq/experiment.h"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fedseq/checkpoint.h"

namespace fedseq {
namespace {

namespace fs = std::filesystem;

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string display_name(AttackMethod m) {
  switch (m) {
    case AttackMethod::kNone: return "None";
    case AttackMethod::kRandom: return "RA";
    case AttackMethod::kExplicitBoost: return "EB";
    case AttackMethod::kAra: return "A-ra";
    case AttackMethod::kDvFsr: return "DV-FSR";
    case AttackMethod::kCFsr: return "C-FSR";
    case AttackMethod::kSFsr: return "S-FSR";
  }
  return "?";
}

std::string er_cell(const EvalMetrics& m, int k) {
  for (const auto& r : m.exposure) {
    if (r.k == k) return r.defined ? fixed4(r.value) : "-";
  }
  return "-";
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

std::string poison_json(int round, const PoisonRecord& rec, AttackMethod method) {
  nlohmann::ordered_json j;
  j["round"] = round;
  j["client"] = rec.client;
  j["method"] = std::string(to_string(method));
  j["sequence"] = rec.details.poisoned_sequence.items;
  if (rec.details.trace.has_value()) {
    const SubstitutionTrace& t = *rec.details.trace;
    j["position"] = t.position;
    j["original_item"] = t.original_item;
    j["replacement_item"] = t.replacement_item;
    j["no_candidate"] = t.no_candidate;
    j["original_score"] = t.original_score;
    j["best_target_score"] = t.best_target_score;
  }
  if (!rec.details.bce_negatives.empty()) j["bce_negatives"] = rec.details.bce_negatives;
  if (!rec.details.contrastive_negatives.empty()) {
    j["contrastive_negatives"] = rec.details.contrastive_negatives;
  }
  j["attack_loss"] = rec.details.attack_loss;
  j["contrastive_loss"] = rec.details.contrastive_loss;
  return j.dump();
}

}  // namespace

void apply_environment(ExperimentConfig& cfg) {
  const char* dir = std::getenv(kOutputDirEnv);
  if (dir != nullptr && *dir != '\0') cfg.output.dir = dir;
}

Dataset load_dataset(const ExperimentConfig& cfg) {
  if (cfg.dataset.source == "file") {
    return load_interactions(cfg.dataset.path, cfg.dataset.format);
  }
  return synthesize(cfg.dataset.synth);
}

std::vector<std::size_t> designate_malicious(std::size_t population, double percent,
                                             std::uint64_t seed) {
  if (!(percent >= 0.0 && percent < 100.0)) {
    throw std::invalid_argument("malicious percent must be in [0, 100)");
  }
  // The epsilon keeps e.g. 1% of 300 at 3 despite rounding in percent / 100.
  const double exact = percent / 100.0 * static_cast<double>(population);
  const auto count = static_cast<std::size_t>(std::ceil(exact - 1e-9));
  SeededRng rng(seed, "malicious-designation");
  auto picks = rng.sample_without_replacement(population, std::min(count, population));
  std::vector<std::size_t> out(picks.begin(), picks.end());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<ItemId> resolve_targets(const ExperimentConfig& cfg, const Dataset& dataset) {
  std::vector<ItemId> targets;
  if (!cfg.attack.cold_targets) {
    targets = cfg.attack.target_items;
  } else {
    const auto want = static_cast<std::size_t>(cfg.attack.target_count);
    targets.assign(dataset.cold_items.begin(),
                   dataset.cold_items.begin() +
                       static_cast<std::ptrdiff_t>(std::min(want, dataset.cold_items.size())));
    if (targets.size() < want) {
      // Logs without reserved cold items: fall back to the least popular ones.
      for (ItemId j : least_popular_items(dataset, dataset.item_count)) {
        if (targets.size() == want) break;
        if (std::find(targets.begin(), targets.end(), j) == targets.end()) targets.push_back(j);
      }
    }
  }
  for (ItemId t : targets) {
    if (t < 1 || t > dataset.item_count) {
      throw ConfigError("target item " + std::to_string(t) + " outside 1.." +
                        std::to_string(dataset.item_count));
    }
  }
  return targets;
}

std::string summary_header() {
  return "Attack\tMal. Client\tHR@10\tNDCG@10\tER@5\tER@10\tER@20\tER@30";
}

std::string summary_row(const ExperimentConfig& cfg, const EvalMetrics& m) {
  std::string row = display_name(cfg.attack.params.method);
  row += "\t" + shortest(cfg.attack.malicious_percent) + "%";
  row += "\t" + fixed4(m.hr) + "\t" + fixed4(m.ndcg);
  for (int k : kExposureCutoffs) row += "\t" + er_cell(m, k);
  return row;
}

RunSummary run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
  validate_config(cfg);
  Dataset dataset;
  try {
    dataset = load_dataset(cfg);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("dataset: ") + e.what());
  }
  const SplitDataset split = leave_one_out(dataset);
  const std::size_t population = split.train.sequences.size();
  try {
    cfg.federation.validate(population);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("federation: ") + e.what());
  }

  RunSummary summary;
  summary.output_dir = cfg.output.dir;
  summary.targets = resolve_targets(cfg, dataset);
  summary.malicious = designate_malicious(population, cfg.attack.malicious_percent,
                                          cfg.federation.seed);

  AttackConfig attack = cfg.attack.params;
  attack.targets = summary.targets;
  if (attack.method != AttackMethod::kNone) {
    try {
      attack.validate(dataset.item_count);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("attack: ") + e.what());
    }
  }

  std::vector<ClientState> clients(population);
  for (std::size_t u = 0; u < population; ++u) {
    clients[u].user_id = split.train.sequences[u].user;
    clients[u].sequence = split.train.sequences[u];
  }
  for (std::size_t u : summary.malicious) clients[u].role = ClientRole::kMalicious;

  const ModelDims dims{dataset.item_count, cfg.model.dim, cfg.model.ff_dim,
                       cfg.model.max_len};
  if (options.initial_params.has_value()) {
    if (!(options.initial_params->dims == dims)) {
      throw ConfigError("initial parameters do not match the configured model");
    }
    summary.params = *options.initial_params;
  } else {
    SeededRng init(cfg.federation.seed, "model-init");
    summary.params = ModelParams::initialize(dims, init, cfg.model.init_scale);
  }
  const Aggregator aggregator = make_aggregator(cfg.defense);

  std::ofstream rounds_out;
  std::ofstream traces_out;
  const fs::path dir(cfg.output.dir);
  if (options.write_outputs) {
    fs::create_directories(dir);
    write_file(dir / "config.yaml", dump_config(cfg));
    rounds_out.open(dir / "rounds.jsonl", std::ios::binary);
    if (!rounds_out) throw std::runtime_error("cannot write rounds.jsonl in " + dir.string());
    if (cfg.output.traces) traces_out.open(dir / "traces.jsonl", std::ios::binary);
  }

  const auto evaluate_now = [&](const ModelParams& p) {
    return evaluate(p, split.train.sequences, split.test_items, summary.targets);
  };

  const int rounds = cfg.federation.rounds;
  for (int round = 1; round <= rounds; ++round) {
    const auto start = std::chrono::steady_clock::now();
    RoundResult result = run_round(summary.params, clients, attack, aggregator,
                                   cfg.federation, round, cfg.output.traces);
    summary.params = std::move(result.params);
    RoundLog& log = result.log;
    if (round % cfg.federation.eval_every == 0 || round == rounds) {
      log.metrics = evaluate_now(summary.params);
      summary.evaluations.push_back(log);
    }
    if (cfg.output.wall_time) {
      log.wall_time_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    if (rounds_out.is_open()) rounds_out << round_log_json(log) << '\n' << std::flush;
    if (traces_out.is_open()) {
      for (const auto& rec : result.poison) {
        traces_out << poison_json(round, rec, attack.method) << '\n';
      }
      traces_out.flush();
    }
    if (options.on_round) options.on_round(log);
  }

  summary.final_metrics = summary.evaluations.empty() ? evaluate_now(summary.params)
                                                      : *summary.evaluations.back().metrics;
  if (options.write_outputs) {
    write_file(dir / "summary.tsv",
               summary_header() + "\n" + summary_row(cfg, summary.final_metrics) + "\n");
    if (cfg.output.checkpoint) save_checkpoint(summary.params, (dir / "model.ckpt").string());
  }
  return summary;
}

std::vector<SweepRun> sweep(const ExperimentConfig& cfg, const std::string& axis,
                            const std::vector<std::string>& values, bool per_value_seeds,
                            const RunOptions& options) {
  if (!is_config_key(axis)) throw ConfigError("unknown sweep axis '" + axis + "'");
  if (axis == "output.dir") throw ConfigError("output.dir cannot be swept");
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (std::find(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(i),
                  values[i]) != values.begin() + static_cast<std::ptrdiff_t>(i)) {
      // Each value names its own output directory.
      throw ConfigError("duplicate sweep value '" + values[i] + "'");
    }
  }

  // Every value is applied and validated before the first run starts.
  std::vector<ExperimentConfig> configs;
  for (std::size_t i = 0; i < values.size(); ++i) {
    ExperimentConfig run_cfg = cfg;
    set_config_value(run_cfg, axis, values[i]);
    if (per_value_seeds) run_cfg.federation.seed = cfg.federation.seed + i;
    run_cfg.output.dir = (fs::path(cfg.output.dir) / (axis + "=" + values[i])).string();
    validate_config(run_cfg);
    configs.push_back(std::move(run_cfg));
  }

  std::ofstream csv;
  if (options.write_outputs) {
    fs::create_directories(cfg.output.dir);
    csv.open(fs::path(cfg.output.dir) / "sweep.csv", std::ios::binary);
    if (!csv) throw std::runtime_error("cannot write sweep.csv in " + cfg.output.dir);
    csv << "axis,value,round,HR@10,NDCG@10,ER@5,ER@10,ER@20,ER@30\n";
  }

  std::vector<SweepRun> runs;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    SweepRun run{values[i], run_experiment(configs[i], options)};
    if (csv.is_open()) {
      for (const RoundLog& log : run.summary.evaluations) {
        const EvalMetrics& m = *log.metrics;
        csv << axis << ',' << values[i] << ',' << log.round << ',' << shortest(m.hr) << ','
            << shortest(m.ndcg);
        for (int k : kExposureCutoffs) {
          const std::string cell = er_cell(m, k);
          csv << ',' << (cell == "-" ? std::string() : shortest(m.er(k)));
        }
        csv << '\n';
      }
      csv.flush();
    }
    runs.push_back(std::move(run));
  }
  return runs;
}

}  // namespace fedseq
