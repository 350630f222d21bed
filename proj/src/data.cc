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
#include "fedseq/data.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace fedseq {
namespace {

std::vector<std::string_view> split_line(std::string_view line, char delimiter) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t end = line.find(delimiter, start);
    if (end == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, end - start));
    start = end + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

struct Row {
  std::size_t item_slot;  // index into first-appearance item list
  double timestamp;
  std::size_t line;
};

}  // namespace

Dataset parse_interactions(std::istream& in, const LogFormat& format,
                           LoadReport* report, std::string name) {
  const int needed =
      std::max({format.user_column, format.item_column, format.timestamp_column}) + 1;
  std::unordered_map<std::string, std::size_t> user_index;
  std::unordered_map<std::string, std::size_t> item_index;
  std::vector<std::vector<Row>> per_user;

  LoadReport rep;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (format.has_header && line_no == 1) continue;
    const std::string_view view = trim(line);
    if (view.empty()) continue;
    ++rep.lines;
    const auto fields = split_line(view, format.delimiter);
    if (static_cast<int>(fields.size()) < needed) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": expected at least " +
                               std::to_string(needed) + " fields");
    }
    const std::string user(trim(fields[static_cast<std::size_t>(format.user_column)]));
    const std::string item(trim(fields[static_cast<std::size_t>(format.item_column)]));
    const std::string_view ts = trim(fields[static_cast<std::size_t>(format.timestamp_column)]);
    if (user.empty() || item.empty()) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": empty user or item");
    }
    double timestamp = 0.0;
    const auto [ptr, ec] = std::from_chars(ts.data(), ts.data() + ts.size(), timestamp);
    if (ec != std::errc() || ptr != ts.data() + ts.size()) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": bad timestamp '" +
                               std::string(ts) + "'");
    }
    auto [uit, u_new] = user_index.try_emplace(user, per_user.size());
    if (u_new) per_user.emplace_back();
    auto [iit, i_new] = item_index.try_emplace(item, item_index.size());
    per_user[uit->second].push_back({iit->second, timestamp, line_no});
    ++rep.interactions;
  }

  // Kept users in first-appearance order; items remapped by their first
  // occurrence in the file among kept rows.
  std::vector<std::size_t> first_line(item_index.size(), SIZE_MAX);
  Dataset ds;
  ds.name = std::move(name);
  std::vector<std::vector<Row>> kept;
  for (auto& rows : per_user) {
    if (rows.size() < kMinInteractions) {
      ++rep.dropped_users;
      continue;
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const Row& a, const Row& b) { return a.timestamp < b.timestamp; });
    for (const Row& r : rows) first_line[r.item_slot] = std::min(first_line[r.item_slot], r.line);
    kept.push_back(std::move(rows));
  }
  if (kept.empty()) throw std::runtime_error("no users with >= 3 interactions");

  std::vector<std::size_t> slots;
  for (std::size_t s = 0; s < first_line.size(); ++s) {
    if (first_line[s] != SIZE_MAX) slots.push_back(s);
  }
  std::sort(slots.begin(), slots.end(),
            [&](std::size_t a, std::size_t b) { return first_line[a] < first_line[b]; });
  std::vector<ItemId> remap(first_line.size(), kPaddingItem);
  for (std::size_t i = 0; i < slots.size(); ++i) remap[slots[i]] = static_cast<ItemId>(i + 1);

  for (std::size_t u = 0; u < kept.size(); ++u) {
    InteractionSequence seq;
    seq.user = static_cast<std::int64_t>(u);
    for (const Row& r : kept[u]) seq.items.push_back(remap[r.item_slot]);
    ds.sequences.push_back(std::move(seq));
  }
  ds.user_count = static_cast<int>(ds.sequences.size());
  ds.item_count = static_cast<int>(slots.size());
  rep.kept_users = ds.sequences.size();
  if (report != nullptr) *report = rep;
  return ds;
}

Dataset load_interactions(const std::string& path, const LogFormat& format,
                          LoadReport* report) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open interaction log '" + path + "'");
  return parse_interactions(in, format, report, path);
}

void write_interactions(const Dataset& dataset, std::ostream& out, char delimiter) {
  for (const auto& seq : dataset.sequences) {
    for (std::size_t i = 0; i < seq.items.size(); ++i) {
      out << seq.user << delimiter << seq.items[i] << delimiter << i << '\n';
    }
  }
}

SplitDataset leave_one_out(const Dataset& dataset) {
  if (dataset.split_applied) {
    throw std::logic_error("leave_one_out: dataset is already a training split");
  }
  SplitDataset out;
  out.train = dataset;
  out.train.split_applied = true;
  for (auto& seq : out.train.sequences) {
    if (seq.items.size() < kMinInteractions) {
      throw std::invalid_argument("leave_one_out: user " + std::to_string(seq.user) +
                                  " has fewer than 3 interactions");
    }
    out.test_items.push_back(seq.items.back());
    seq.items.pop_back();
  }
  return out;
}

int synthetic_item_cluster(const SynthConfig& cfg, ItemId item) {
  const int warm = cfg.items - cfg.cold_items;
  if (item < 1 || item > warm) return -1;
  return (item - 1) % cfg.clusters;
}

Dataset synthesize(const SynthConfig& cfg) {
  if (cfg.clusters < 1 || cfg.users < cfg.clusters || cfg.items < cfg.clusters) {
    throw std::invalid_argument("synthesize: need users, items >= clusters >= 1");
  }
  if (cfg.cold_items < 0 || cfg.items - cfg.cold_items < cfg.clusters) {
    throw std::invalid_argument("synthesize: every cluster needs a warm item");
  }
  if (cfg.min_length < static_cast<int>(kMinInteractions) ||
      cfg.max_length < cfg.min_length) {
    throw std::invalid_argument("synthesize: length range must satisfy 3 <= min <= max");
  }
  const int warm = cfg.items - cfg.cold_items;
  if (cfg.max_length > warm) {
    throw std::invalid_argument("synthesize: max_length exceeds the warm item count");
  }
  if (!(cfg.in_cluster_probability >= 0.0 && cfg.in_cluster_probability <= 1.0)) {
    throw std::invalid_argument("synthesize: in_cluster_probability must be in [0, 1]");
  }

  std::vector<std::vector<ItemId>> by_cluster(static_cast<std::size_t>(cfg.clusters));
  for (ItemId j = 1; j <= warm; ++j) {
    by_cluster[static_cast<std::size_t>(synthetic_item_cluster(cfg, j))].push_back(j);
  }

  SeededRng rng(cfg.seed, "data-synthesis");
  Dataset ds;
  ds.name = "synthetic";
  ds.user_count = cfg.users;
  ds.item_count = cfg.items;
  for (ItemId j = warm + 1; j <= cfg.items; ++j) ds.cold_items.push_back(j);

  const auto span = static_cast<std::uint64_t>(cfg.max_length - cfg.min_length + 1);
  for (int u = 0; u < cfg.users; ++u) {
    const auto cluster = static_cast<std::size_t>(
        rng.uniform_index(static_cast<std::uint64_t>(cfg.clusters)));
    const int length = cfg.min_length + static_cast<int>(rng.uniform_index(span));
    std::vector<char> used(static_cast<std::size_t>(cfg.items) + 1, 0);
    const auto& own = by_cluster[cluster];
    std::size_t own_used = 0;

    InteractionSequence seq;
    seq.user = u;
    while (static_cast<int>(seq.items.size()) < length) {
      const bool in_cluster =
          own_used < own.size() && rng.uniform01() < cfg.in_cluster_probability;
      ItemId pick;
      do {
        pick = in_cluster
                   ? own[rng.uniform_index(own.size())]
                   : static_cast<ItemId>(1 + rng.uniform_index(static_cast<std::uint64_t>(warm)));
      } while (used[static_cast<std::size_t>(pick)]);
      used[static_cast<std::size_t>(pick)] = 1;
      if (synthetic_item_cluster(cfg, pick) == static_cast<int>(cluster)) ++own_used;
      seq.items.push_back(pick);
    }
    ds.sequences.push_back(std::move(seq));
  }
  return ds;
}

std::vector<ItemId> least_popular_items(const Dataset& dataset, std::size_t count) {
  std::vector<std::size_t> freq(static_cast<std::size_t>(dataset.item_count) + 1, 0);
  for (const auto& seq : dataset.sequences) {
    for (ItemId x : seq.items) ++freq[static_cast<std::size_t>(x)];
  }
  std::vector<ItemId> ids(static_cast<std::size_t>(dataset.item_count));
  std::iota(ids.begin(), ids.end(), ItemId{1});
  std::stable_sort(ids.begin(), ids.end(), [&](ItemId a, ItemId b) {
    return freq[static_cast<std::size_t>(a)] < freq[static_cast<std::size_t>(b)];
  });
  ids.resize(std::min(count, ids.size()));
  return ids;
}

}  // namespace fedseq
