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
#ifndef FEDSEQ_EVALMETRICS_H_
#define FEDSEQ_EVALMETRICS_H_

#include <cstdint>
#include <span>
#include <vector>

#include "fedseq/seqrec.h"

namespace fedseq {

// Ranked recommendations for one user. Never contains a history item.
struct TopKList {
  std::int64_t user = 0;
  std::vector<ItemId> items;  // best first
  std::size_t candidate_count = 0;
};

// Ranks 1..M minus `history` by score descending, ties by ascending id.
// Returns fewer than k items when the candidate set is smaller.
TopKList topk_from_scores(const ItemScores& scores,
                          const InteractionSequence& history, int k);

// Scores the most recent max_len items of `history`.
TopKList topk_recommend(const ModelParams& params,
                        const InteractionSequence& history, int k);

// Leave-one-out metrics; lists[i] pairs with test_items[i]. Only the first k
// entries of each list count.
double hit_ratio_at_k(std::span<const TopKList> lists,
                      std::span<const ItemId> test_items, int k);
double ndcg_at_k(std::span<const TopKList> lists,
                 std::span<const ItemId> test_items, int k);

struct TargetExposure {
  ItemId target = kPaddingItem;
  std::size_t eligible = 0;  // users whose history excludes the target
  std::size_t exposed = 0;
  bool empty_denominator = false;
  double ratio = 0.0;
};

struct ExposureReport {
  int k = 0;
  double value = 0.0;     // mean over targets with eligible users
  bool defined = false;   // false when no target had eligible users
  std::vector<TargetExposure> per_target;
};

// From precomputed lists; histories[i] is the history behind lists[i].
ExposureReport exposure_from_lists(std::span<const TopKList> lists,
                                   std::span<const InteractionSequence> histories,
                                   std::span<const ItemId> targets, int k);

ExposureReport exposure_ratio_at_k(const ModelParams& params,
                                   std::span<const InteractionSequence> users,
                                   std::span<const ItemId> targets, int k);

// One ranking pass per user shared by every k.
std::vector<ExposureReport> exposure_ratios(const ModelParams& params,
                                            std::span<const InteractionSequence> users,
                                            std::span<const ItemId> targets,
                                            std::span<const int> ks);

inline constexpr int kEvalCutoff = 10;
inline constexpr int kExposureCutoffs[] = {5, 10, 20, 30};

struct EvalMetrics {
  double hr = 0.0;    // HR@10
  double ndcg = 0.0;  // NDCG@10
  std::vector<ExposureReport> exposure;  // ER@{5,10,20,30}

  // ER@k value, or 0 when k was not evaluated or undefined.
  double er(int k) const;
};

EvalMetrics evaluate(const ModelParams& params,
                     std::span<const InteractionSequence> train,
                     std::span<const ItemId> test_items,
                     std::span<const ItemId> targets);

}  // namespace fedseq

#endif  // FEDSEQ_EVALMETRICS_H_
