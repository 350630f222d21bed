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
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "fedseq/config.h"
#include "fedseq/experiment.h"

namespace fedseq {
namespace {

Dataset parse(const std::string& text, LogFormat fmt = {}, LoadReport* rep = nullptr) {
  std::istringstream in(text);
  return parse_interactions(in, fmt, rep);
}

TEST(ParseInteractions, TwoUserToyFile) {
  // Rows out of chronological order; item "b" appears first in the file.
  const std::string text =
      "u1\tb\t30\n"
      "u1\ta\t10\n"
      "u2\tc\t5\n"
      "u1\tc\t20\n"
      "u2\ta\t6\n"
      "u2\tb\t7\n";
  LoadReport rep;
  const Dataset ds = parse(text, {}, &rep);
  EXPECT_EQ(ds.user_count, 2);
  EXPECT_EQ(ds.item_count, 3);
  // b -> 1, a -> 2, c -> 3
  EXPECT_EQ(ds.sequences[0].items, (std::vector<ItemId>{2, 3, 1}));
  EXPECT_EQ(ds.sequences[1].items, (std::vector<ItemId>{3, 2, 1}));
  EXPECT_EQ(ds.sequences[1].user, 1);
  EXPECT_EQ(rep.lines, 6u);
  EXPECT_EQ(rep.interactions, 6u);
  EXPECT_EQ(rep.kept_users, 2u);
  EXPECT_EQ(rep.dropped_users, 0u);
}

TEST(ParseInteractions, DuplicatesKeptInFileOrder) {
  const Dataset ds = parse("1,9,5,4.0\n1,8,5,3.5\n1,9,5,1.0\n1,7,1,2.0\n",
                           {',', 0, 1, 2, false});
  // Ties at timestamp 5 keep their file order; the rating column is ignored.
  EXPECT_EQ(ds.sequences[0].items, (std::vector<ItemId>{3, 1, 2, 1}));
}

TEST(ParseInteractions, ShortUsersDropped) {
  LoadReport rep;
  const Dataset ds = parse("a 1 1\na 2 2\nb 1 1\nb 2 2\nb 3 3\n", {' ', 0, 1, 2, false}, &rep);
  EXPECT_EQ(ds.user_count, 1);
  EXPECT_EQ(rep.dropped_users, 1u);
  EXPECT_EQ(ds.sequences[0].items, (std::vector<ItemId>{1, 2, 3}));
}

TEST(ParseInteractions, HeaderAndColumnOrder) {
  const Dataset ds = parse("ts\titem\tuser\n3\tx\tu\n1\ty\tu\n2\tz\tu\n", {'\t', 2, 1, 0, true});
  EXPECT_EQ(ds.sequences[0].items, (std::vector<ItemId>{2, 3, 1}));
}

TEST(ParseInteractions, ErrorsNameTheLine) {
  try {
    parse("u\ti\t1\nu\ti\n");
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  try {
    parse("u\ti\t1\nu\ti\tnot-a-time\n");
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_THROW(parse("u\ti\t1\nu\tj\t2\n"), std::runtime_error);
  EXPECT_THROW(load_interactions("/nonexistent/log.tsv", {}), std::runtime_error);
}

TEST(ParseInteractions, RemapPreservesMultisetPerUser) {
  SeededRng rng(51, "test");
  for (int n = 0; n < 20; ++n) {
    std::ostringstream text;
    std::map<int, std::vector<std::pair<int, int>>> rows;  // user -> (ts, raw item)
    for (int i = 0; i < 60; ++i) {
      const int u = static_cast<int>(rng.uniform_index(6));
      const int item = 100 + static_cast<int>(rng.uniform_index(15));
      const int ts = static_cast<int>(rng.uniform_index(1000));
      text << "user" << u << '\t' << item << '\t' << ts << '\n';
      rows[u].push_back({ts, item});
    }
    const Dataset ds = parse(text.str());
    // Recover the raw-id mapping from the normalized dump and compare.
    std::ostringstream dump;
    write_interactions(ds, dump);
    EXPECT_FALSE(dump.str().empty());
    std::size_t kept = 0;
    for (auto& [u, r] : rows) kept += r.size() >= 3;
    EXPECT_EQ(static_cast<std::size_t>(ds.user_count), kept);
    std::size_t total = 0;
    for (const auto& s : ds.sequences) {
      total += s.items.size();
      for (ItemId x : s.items) {
        EXPECT_GE(x, 1);
        EXPECT_LE(x, ds.item_count);
      }
    }
    std::size_t want = 0;
    for (auto& [u, r] : rows) want += r.size() >= 3 ? r.size() : 0;
    EXPECT_EQ(total, want);
    // Sequence lengths per kept user, in first-appearance order, match.
    std::vector<std::size_t> lens;
    for (const auto& s : ds.sequences) lens.push_back(s.items.size());
    std::vector<std::size_t> want_lens;
    for (auto& [u, r] : rows) if (r.size() >= 3) want_lens.push_back(r.size());
    std::sort(lens.begin(), lens.end());
    std::sort(want_lens.begin(), want_lens.end());
    EXPECT_EQ(lens, want_lens);
  }
}

TEST(LeaveOneOut, SplitsLastItem) {
  Dataset ds;
  ds.user_count = 1;
  ds.item_count = 9;
  ds.sequences = {{0, {3, 7, 9}}};
  const SplitDataset s = leave_one_out(ds);
  EXPECT_EQ(s.train.sequences[0].items, (std::vector<ItemId>{3, 7}));
  EXPECT_EQ(s.test_items, (std::vector<ItemId>{9}));
  EXPECT_THROW(leave_one_out(s.train), std::logic_error);
}

TEST(LeaveOneOut, PartitionAndPrefix) {
  const Dataset ds = synthesize({});
  const SplitDataset s = leave_one_out(ds);
  ASSERT_EQ(s.test_items.size(), ds.sequences.size());
  for (std::size_t u = 0; u < ds.sequences.size(); ++u) {
    std::vector<ItemId> joined = s.train.sequences[u].items;
    joined.push_back(s.test_items[u]);
    EXPECT_EQ(joined, ds.sequences[u].items);
    EXPECT_GE(s.train.sequences[u].items.size(), 2u);
  }
}

TEST(Synthesize, DeterministicWithColdItems) {
  SynthConfig cfg;
  const Dataset a = synthesize(cfg), b = synthesize(cfg);
  ASSERT_EQ(a.sequences.size(), b.sequences.size());
  for (std::size_t u = 0; u < a.sequences.size(); ++u) EXPECT_EQ(a.sequences[u], b.sequences[u]);
  EXPECT_EQ(a.user_count, 300);
  EXPECT_EQ(a.item_count, 100);
  EXPECT_EQ(a.cold_items, (std::vector<ItemId>{100}));
  for (const auto& s : a.sequences) {
    EXPECT_GE(s.items.size(), 5u);
    EXPECT_LE(s.items.size(), 20u);
    EXPECT_EQ(std::count(s.items.begin(), s.items.end(), 100), 0);
  }
  cfg.seed = 8;
  EXPECT_NE(synthesize(cfg).sequences[0], a.sequences[0]);
  EXPECT_EQ(least_popular_items(a, 1), (std::vector<ItemId>{100}));
}

TEST(Synthesize, RejectsInfeasibleSizes) {
  SynthConfig cfg;
  cfg.items = 3;
  EXPECT_ANY_THROW(synthesize(cfg));
  cfg = {};
  cfg.min_length = 30;
  cfg.max_length = 20;
  EXPECT_ANY_THROW(synthesize(cfg));
  cfg = {};
  cfg.users = 2;
  EXPECT_ANY_THROW(synthesize(cfg));
}

TEST(Synthesize, WithinClusterCooccurrenceDominates) {
  for (std::uint64_t seed : {1, 2, 3}) {
    for (int clusters : {2, 4, 8}) {
      SynthConfig cfg;
      cfg.seed = seed;
      cfg.clusters = clusters;
      const Dataset ds = synthesize(cfg);
      double within = 0, across = 0, pairs_within = 0, pairs_across = 0;
      const int warm = cfg.items - cfg.cold_items;
      for (ItemId a = 1; a <= warm; ++a) {
        for (ItemId b = a + 1; b <= warm; ++b) {
          const bool same = synthetic_item_cluster(cfg, a) == synthetic_item_cluster(cfg, b);
          (same ? pairs_within : pairs_across) += 1;
        }
      }
      for (const auto& s : ds.sequences) {
        for (std::size_t i = 0; i < s.items.size(); ++i) {
          for (std::size_t j = i + 1; j < s.items.size(); ++j) {
            const bool same = synthetic_item_cluster(cfg, s.items[i]) ==
                              synthetic_item_cluster(cfg, s.items[j]);
            (same ? within : across) += 1;
          }
        }
      }
      // Mean co-occurrence per item pair.
      EXPECT_GT(within / pairs_within, across / pairs_across) << seed << " " << clusters;
    }
  }
}

TEST(Synthesize, TrainedModelBeatsRandomRanking) {
  ExperimentConfig cfg;
  cfg.federation.rounds = 400;
  cfg.federation.eval_every = 400;
  const RunSummary s = run_experiment(cfg, {.write_outputs = false});
  // K / M with K = 10, M = 100
  EXPECT_GE(s.final_metrics.hr, 3.0 * 10.0 / 100.0);
}

}  // namespace
}  // namespace fedseq
