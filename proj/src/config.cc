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
#include "fedseq/config.h"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

namespace fedseq {
namespace {

using Setter = std::function<void(ExperimentConfig&, const YAML::Node&)>;
using Shower = std::function<std::string(const ExperimentConfig&)>;

struct Field {
  std::string key;  // section.name
  Setter set;
  Shower show;
};

template <typename T>
T scalar(const YAML::Node& node, const std::string& key) {
  if (!node.IsScalar()) throw ConfigError(key + ": expected a scalar value");
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(key + ": cannot parse '" + node.Scalar() + "'");
  }
}

std::string show_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".en") == std::string::npos) s += ".0";
  return s;
}

std::string show_string(const std::string& s) { return nlohmann::json(s).dump(); }
std::string show_bool(bool b) { return b ? "true" : "false"; }

#define FEDSEQ_INT_FIELD(KEY, EXPR)                                                     \
  Field {                                                                                \
    KEY, [](ExperimentConfig& c, const YAML::Node& n) { EXPR = scalar<int>(n, KEY); },   \
        [](const ExperimentConfig& c) { return std::to_string(EXPR); }                   \
  }
#define FEDSEQ_DOUBLE_FIELD(KEY, EXPR)                                                      \
  Field {                                                                                   \
    KEY, [](ExperimentConfig& c, const YAML::Node& n) { EXPR = scalar<double>(n, KEY); },   \
        [](const ExperimentConfig& c) { return show_double(EXPR); }                         \
  }
#define FEDSEQ_BOOL_FIELD(KEY, EXPR)                                                     \
  Field {                                                                                 \
    KEY, [](ExperimentConfig& c, const YAML::Node& n) { EXPR = scalar<bool>(n, KEY); },   \
        [](const ExperimentConfig& c) { return show_bool(EXPR); }                         \
  }
#define FEDSEQ_SEED_FIELD(KEY, EXPR)                                                   \
  Field {                                                                               \
    KEY,                                                                                \
        [](ExperimentConfig& c, const YAML::Node& n) {                                  \
          EXPR = scalar<std::uint64_t>(n, KEY);                                         \
        },                                                                              \
        [](const ExperimentConfig& c) { return std::to_string(EXPR); }                  \
  }

char parse_delimiter(const std::string& s) {
  if (s == "tab" || s == "\t") return '\t';
  if (s == "comma" || s == ",") return ',';
  if (s.size() == 1) return s[0];
  throw ConfigError("dataset.delimiter: expected a single character, 'tab' or 'comma'");
}

const std::vector<Field>& fields() {
  static const std::vector<Field> kFields = {
      {"dataset.source",
       [](ExperimentConfig& c, const YAML::Node& n) {
         const auto s = scalar<std::string>(n, "dataset.source");
         if (s != "synthetic" && s != "file") {
           throw ConfigError("dataset.source: expected 'synthetic' or 'file'");
         }
         c.dataset.source = s;
       },
       [](const ExperimentConfig& c) { return show_string(c.dataset.source); }},
      {"dataset.path",
       [](ExperimentConfig& c, const YAML::Node& n) {
         c.dataset.path = scalar<std::string>(n, "dataset.path");
       },
       [](const ExperimentConfig& c) { return show_string(c.dataset.path); }},
      {"dataset.delimiter",
       [](ExperimentConfig& c, const YAML::Node& n) {
         c.dataset.format.delimiter =
             parse_delimiter(scalar<std::string>(n, "dataset.delimiter"));
       },
       [](const ExperimentConfig& c) {
         return show_string(std::string(1, c.dataset.format.delimiter));
       }},
      FEDSEQ_INT_FIELD("dataset.user_column", c.dataset.format.user_column),
      FEDSEQ_INT_FIELD("dataset.item_column", c.dataset.format.item_column),
      FEDSEQ_INT_FIELD("dataset.timestamp_column", c.dataset.format.timestamp_column),
      FEDSEQ_BOOL_FIELD("dataset.has_header", c.dataset.format.has_header),
      FEDSEQ_INT_FIELD("dataset.users", c.dataset.synth.users),
      FEDSEQ_INT_FIELD("dataset.items", c.dataset.synth.items),
      FEDSEQ_INT_FIELD("dataset.clusters", c.dataset.synth.clusters),
      FEDSEQ_INT_FIELD("dataset.min_length", c.dataset.synth.min_length),
      FEDSEQ_INT_FIELD("dataset.max_length", c.dataset.synth.max_length),
      FEDSEQ_INT_FIELD("dataset.cold_items", c.dataset.synth.cold_items),
      FEDSEQ_DOUBLE_FIELD("dataset.in_cluster_probability",
                          c.dataset.synth.in_cluster_probability),
      FEDSEQ_SEED_FIELD("dataset.seed", c.dataset.synth.seed),

      FEDSEQ_INT_FIELD("model.dim", c.model.dim),
      FEDSEQ_INT_FIELD("model.ff_dim", c.model.ff_dim),
      FEDSEQ_INT_FIELD("model.max_len", c.model.max_len),
      FEDSEQ_DOUBLE_FIELD("model.init_scale", c.model.init_scale),

      FEDSEQ_INT_FIELD("federation.rounds", c.federation.rounds),
      FEDSEQ_INT_FIELD("federation.clients_per_round", c.federation.clients_per_round),
      FEDSEQ_DOUBLE_FIELD("federation.learning_rate", c.federation.learning_rate),
      FEDSEQ_INT_FIELD("federation.eval_every", c.federation.eval_every),
      FEDSEQ_SEED_FIELD("federation.seed", c.federation.seed),
      FEDSEQ_INT_FIELD("federation.local_steps", c.federation.local_steps),
      {"federation.negatives_per_positive",
       [](ExperimentConfig& c, const YAML::Node& n) {
         if (n.IsScalar() && n.Scalar() == "all") {
           c.federation.negatives_per_positive = kAllNegatives;
         } else {
           c.federation.negatives_per_positive =
               scalar<int>(n, "federation.negatives_per_positive");
         }
       },
       [](const ExperimentConfig& c) {
         return c.federation.negatives_per_positive == kAllNegatives
                    ? std::string("all")
                    : std::to_string(c.federation.negatives_per_positive);
       }},
      FEDSEQ_BOOL_FIELD("federation.always_participate",
                        c.federation.always_participate_mode),

      {"attack.method",
       [](ExperimentConfig& c, const YAML::Node& n) {
         try {
           c.attack.params.method =
               parse_attack_method(scalar<std::string>(n, "attack.method"));
         } catch (const std::invalid_argument& e) {
           throw ConfigError(std::string("attack.method: ") + e.what());
         }
       },
       [](const ExperimentConfig& c) {
         return show_string(std::string(to_string(c.attack.params.method)));
       }},
      FEDSEQ_DOUBLE_FIELD("attack.malicious_percent", c.attack.malicious_percent),
      {"attack.targets",
       [](ExperimentConfig& c, const YAML::Node& n) {
         if (n.IsScalar() && n.Scalar() == "cold") {
           c.attack.cold_targets = true;
           c.attack.target_items.clear();
           return;
         }
         if (!n.IsSequence()) {
           throw ConfigError("attack.targets: expected 'cold' or a list of item ids");
         }
         c.attack.cold_targets = false;
         c.attack.target_items.clear();
         for (const auto& item : n) {
           c.attack.target_items.push_back(scalar<ItemId>(item, "attack.targets"));
         }
       },
       [](const ExperimentConfig& c) {
         if (c.attack.cold_targets) return std::string("\"cold\"");
         std::string s = "[";
         for (std::size_t i = 0; i < c.attack.target_items.size(); ++i) {
           if (i > 0) s += ", ";
           s += std::to_string(c.attack.target_items[i]);
         }
         return s + "]";
       }},
      FEDSEQ_INT_FIELD("attack.target_count", c.attack.target_count),
      FEDSEQ_DOUBLE_FIELD("attack.alpha", c.attack.params.alpha),
      FEDSEQ_DOUBLE_FIELD("attack.tau", c.attack.params.tau),
      FEDSEQ_INT_FIELD("attack.search_time", c.attack.params.search_time),
      FEDSEQ_INT_FIELD("attack.negatives", c.attack.params.negatives),
      FEDSEQ_DOUBLE_FIELD("attack.fgsm_step", c.attack.params.fgsm_step),
      FEDSEQ_BOOL_FIELD("attack.exclude_target_candidates",
                        c.attack.params.exclude_target_candidates),
      FEDSEQ_INT_FIELD("attack.ra_length", c.attack.params.ra_length),
      FEDSEQ_INT_FIELD("attack.ara_negatives", c.attack.params.ara_negatives),

      {"defense.rule",
       [](ExperimentConfig& c, const YAML::Node& n) {
         try {
           c.defense.rule = parse_aggregation_rule(scalar<std::string>(n, "defense.rule"));
         } catch (const std::invalid_argument& e) {
           throw ConfigError(std::string("defense.rule: ") + e.what());
         }
       },
       [](const ExperimentConfig& c) {
         return show_string(std::string(to_string(c.defense.rule)));
       }},
      FEDSEQ_DOUBLE_FIELD("defense.lambda", c.defense.lambda),
      FEDSEQ_DOUBLE_FIELD("defense.tolerance", c.defense.tolerance),
      FEDSEQ_INT_FIELD("defense.max_iterations", c.defense.max_iterations),
      FEDSEQ_DOUBLE_FIELD("defense.smoothing", c.defense.smoothing),

      {"output.dir",
       [](ExperimentConfig& c, const YAML::Node& n) {
         c.output.dir = scalar<std::string>(n, "output.dir");
       },
       [](const ExperimentConfig& c) { return show_string(c.output.dir); }},
      FEDSEQ_BOOL_FIELD("output.wall_time", c.output.wall_time),
      FEDSEQ_BOOL_FIELD("output.checkpoint", c.output.checkpoint),
      FEDSEQ_BOOL_FIELD("output.traces", c.output.traces),
  };
  return kFields;
}

#undef FEDSEQ_INT_FIELD
#undef FEDSEQ_DOUBLE_FIELD
#undef FEDSEQ_BOOL_FIELD
#undef FEDSEQ_SEED_FIELD

const Field* find_field(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.key == key) return &f;
  }
  return nullptr;
}

}  // namespace

ExperimentConfig parse_config(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config is not valid YAML: ") + e.what());
  }
  ExperimentConfig cfg;
  if (root.IsNull()) return cfg;
  if (!root.IsMap()) throw ConfigError("config root must be a mapping of sections");
  for (const auto& section : root) {
    const auto name = section.first.as<std::string>();
    if (!section.second.IsMap()) {
      throw ConfigError("section '" + name + "' must be a mapping");
    }
    for (const auto& entry : section.second) {
      const std::string key = name + "." + entry.first.as<std::string>();
      const Field* f = find_field(key);
      if (f == nullptr) throw ConfigError("unknown config key '" + key + "'");
      f->set(cfg, entry.second);
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void set_config_value(ExperimentConfig& cfg, const std::string& key,
                      const std::string& value) {
  const Field* f = find_field(key);
  if (f == nullptr) throw ConfigError("unknown config key '" + key + "'");
  YAML::Node node;
  try {
    node = YAML::Load(value);
  } catch (const YAML::Exception& e) {
    throw ConfigError(key + ": cannot parse value '" + value + "'");
  }
  if (node.IsNull()) node = YAML::Node(value);
  f->set(cfg, node);
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' must look like section.key=value");
  }
  set_config_value(cfg, assignment.substr(0, eq), assignment.substr(eq + 1));
}

bool is_config_key(const std::string& key) { return find_field(key) != nullptr; }

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.push_back(f.key);
  return keys;
}

std::string dump_config(const ExperimentConfig& cfg) {
  std::string out;
  std::string section;
  for (const auto& f : fields()) {
    const auto dot = f.key.find('.');
    const std::string sec = f.key.substr(0, dot);
    if (sec != section) {
      out += sec + ":\n";
      section = sec;
    }
    out += "  " + f.key.substr(dot + 1) + ": " + f.show(cfg) + "\n";
  }
  return out;
}

void validate_config(const ExperimentConfig& cfg) {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (cfg.dataset.source == "file") {
    if (cfg.dataset.path.empty()) fail("dataset.path is required when source is 'file'");
    if (!std::filesystem::exists(cfg.dataset.path)) {
      fail("dataset.path '" + cfg.dataset.path + "' does not exist");
    }
  }
  const auto& fmt = cfg.dataset.format;
  if (fmt.user_column < 0 || fmt.item_column < 0 || fmt.timestamp_column < 0) {
    fail("dataset columns must be >= 0");
  }
  if (cfg.model.dim < 1 || cfg.model.ff_dim < 1 || cfg.model.max_len < 1) {
    fail("model sizes must be >= 1");
  }
  if (!(cfg.model.init_scale > 0.0)) fail("model.init_scale must be > 0");
  if (!(cfg.attack.malicious_percent >= 0.0 && cfg.attack.malicious_percent < 100.0)) {
    fail("attack.malicious_percent must be in [0, 100)");
  }
  if (cfg.attack.target_count < 1) fail("attack.target_count must be >= 1");
  if (!cfg.attack.cold_targets && cfg.attack.target_items.empty()) {
    fail("attack.targets list is empty");
  }
  for (ItemId t : cfg.attack.target_items) {
    if (t < 1) fail("attack.targets must be item ids >= 1 (0 is padding)");
  }
  try {
    AttackConfig probe = cfg.attack.params;
    // validate() skips everything for "none"; attack knobs are checked anyway.
    if (probe.method == AttackMethod::kNone) probe.method = AttackMethod::kDvFsr;
    probe.targets = {1};
    probe.validate(1);
    cfg.defense.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const auto& fed = cfg.federation;
  if (fed.clients_per_round < 1) fail("federation.clients_per_round must be >= 1");
  if (!(fed.learning_rate > 0.0)) fail("federation.learning_rate must be > 0");
  if (fed.rounds < 0) fail("federation.rounds must be >= 0");
  if (fed.eval_every < 1) fail("federation.eval_every must be >= 1");
  if (fed.local_steps < 1) fail("federation.local_steps must be >= 1");
  if (fed.negatives_per_positive < 0 && fed.negatives_per_positive != kAllNegatives) {
    fail("federation.negatives_per_positive must be >= 0 or 'all'");
  }
  if (cfg.output.dir.empty()) fail("output.dir must not be empty");
}

}  // namespace fedseq
