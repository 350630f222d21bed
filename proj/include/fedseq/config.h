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
// Experiment configuration: a YAML document with the sections dataset,
// model, federation, attack, defense and output. Every key has a default;
// unknown sections or keys are rejected. Single values can be overridden
// with "section.key=value" strings (value parsed as YAML).
#ifndef FEDSEQ_CONFIG_H_
#define FEDSEQ_CONFIG_H_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedseq/attacks.h"
#include "fedseq/data.h"
#include "fedseq/defense.h"
#include "fedseq/federation.h"

namespace fedseq {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  struct DatasetSection {
    std::string source = "synthetic";  // synthetic | file
    std::string path;
    LogFormat format;
    SynthConfig synth;
  } dataset;

  struct ModelSection {
    int dim = 16;
    int ff_dim = 32;
    int max_len = 30;
    double init_scale = 0.1;
  } model;

  RoundConfig federation;

  struct AttackSection {
    AttackConfig params;            // targets filled in at run time
    double malicious_percent = 0.0;  // m in [0, 100)
    bool cold_targets = true;       // targets: cold
    std::vector<ItemId> target_items;
    int target_count = 1;
  } attack;

  DefenseConfig defense;

  struct OutputSection {
    std::string dir = "fedseq-out";
    bool wall_time = false;  // adds wall_time_s to each log line
    bool checkpoint = true;
    bool traces = false;     // poisoned-update audit log
  } output;
};

ExperimentConfig parse_config(const std::string& yaml_text);
ExperimentConfig load_config(const std::string& path);

// "section.key=value"
void apply_override(ExperimentConfig& cfg, const std::string& assignment);
void set_config_value(ExperimentConfig& cfg, const std::string& key,
                      const std::string& value);
bool is_config_key(const std::string& key);
std::vector<std::string> config_keys();

// Effective configuration with every field spelled out; parse_config() of the
// result reproduces `cfg`.
std::string dump_config(const ExperimentConfig& cfg);

// Checks value ranges that do not depend on the dataset.
void validate_config(const ExperimentConfig& cfg);

}  // namespace fedseq

#endif  // FEDSEQ_CONFIG_H_
