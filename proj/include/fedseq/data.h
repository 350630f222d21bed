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
// Interaction logs, leave-one-out splitting and a clustered synthetic
// generator.
#ifndef FEDSEQ_DATA_H_
#define FEDSEQ_DATA_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "fedseq/seqrec.h"

namespace fedseq {

inline constexpr std::size_t kMinInteractions = 3;

struct Dataset {
  std::string name;
  int user_count = 0;
  int item_count = 0;
  std::vector<InteractionSequence> sequences;  // index == user id
  std::vector<ItemId> cold_items;  // items reserved with zero interactions
  bool split_applied = false;
};

// Column positions are zero-based. Extra columns (ratings, playtime) are
// ignored.
struct LogFormat {
  char delimiter = '\t';
  int user_column = 0;
  int item_column = 1;
  int timestamp_column = 2;
  bool has_header = false;
};

struct LoadReport {
  std::size_t lines = 0;
  std::size_t interactions = 0;
  std::size_t kept_users = 0;
  std::size_t dropped_users = 0;
};

// Parses (user, item, timestamp) rows, sorts each user's rows by timestamp
// (stable), drops users with fewer than 3 interactions and remaps items to
// 1..M and users to 0..N-1 in order of first appearance. Throws
// std::runtime_error with the line number on malformed input.
Dataset parse_interactions(std::istream& in, const LogFormat& format,
                           LoadReport* report = nullptr, std::string name = "log");
Dataset load_interactions(const std::string& path, const LogFormat& format,
                          LoadReport* report = nullptr);

// Normalized dump: user, item, position (as timestamp), remapped ids.
void write_interactions(const Dataset& dataset, std::ostream& out, char delimiter = '\t');

struct SplitDataset {
  Dataset train;                  // sequences without their last item
  std::vector<ItemId> test_items;  // held-out last item per user
};

SplitDataset leave_one_out(const Dataset& dataset);

struct SynthConfig {
  int users = 300;
  int items = 100;
  int clusters = 4;
  int min_length = 5;
  int max_length = 20;
  int cold_items = 1;
  double in_cluster_probability = 0.8;
  std::uint64_t seed = 7;
};

// Items 1..M-cold are assigned round-robin to clusters; the last `cold_items`
// ids never occur. Each user belongs to a random cluster and draws distinct
// items, from its own cluster with in_cluster_probability, otherwise
// uniformly among warm items.
Dataset synthesize(const SynthConfig& cfg);

// Cluster of a warm item under synthesize(); -1 for cold items.
int synthetic_item_cluster(const SynthConfig& cfg, ItemId item);

// Items with the fewest interactions (ties by ascending id).
std::vector<ItemId> least_popular_items(const Dataset& dataset, std::size_t count);

}  // namespace fedseq

#endif  // FEDSEQ_DATA_H_
