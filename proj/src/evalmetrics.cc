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
#include "fedseq/evalmetrics.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fedseq/attacks.h"

namespace fedseq {
namespace {

std::vector<char> history_mask(std::size_t item_count,
                               const InteractionSequence& history) {
  std::vector<char> seen(item_count + 1, 0);
  for (ItemId x : history.items) {
    if (x >= 1 && static_cast<std::size_t>(x) <= item_count) {
      seen[static_cast<std::size_t>(x)] = 1;
    }
  }
  return seen;
}

bool contains(std::span<const ItemId> list, ItemId item) {
  return std::find(list.begin(), list.end(), item) != list.end();
}

std::span<const ItemId> head(const TopKList& list, int k) {
  const auto n = std::min(list.items.size(), static_cast<std::size_t>(std::max(k, 0)));
  return {list.items.data(), n};
}

void check_pairing(std::size_t lists, std::size_t tests, int k) {
  if (lists != tests) throw std::invalid_argument("metrics: list/test count mismatch");
  if (k < 1) throw std::invalid_argument("metrics: k must be >= 1");
}

}  // namespace

TopKList topk_from_scores(const ItemScores& scores,
                          const InteractionSequence& history, int k) {
  if (k < 1) throw std::invalid_argument("topk: k must be >= 1");
  const std::size_t m = scores.item_count();
  const std::vector<char> seen = history_mask(m, history);
  std::vector<ItemId> candidates;
  for (std::size_t j = 1; j <= m; ++j) {
    if (!seen[j]) candidates.push_back(static_cast<ItemId>(j));
  }
  auto better = [&](ItemId a, ItemId b) {
    const double sa = scores[a];
    const double sb = scores[b];
    if (sa != sb) return sa > sb;
    return a < b;
  };
  const std::size_t keep = std::min(candidates.size(), static_cast<std::size_t>(k));
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                    candidates.end(), better);

  TopKList out;
  out.user = history.user;
  out.candidate_count = candidates.size();
  out.items.assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep));
  return out;
}

TopKList topk_recommend(const ModelParams& params,
                        const InteractionSequence& history, int k) {
  const ItemScores scores = score_sequence(params, model_window(params.dims, history));
  return topk_from_scores(scores, history, k);
}

double hit_ratio_at_k(std::span<const TopKList> lists,
                      std::span<const ItemId> test_items, int k) {
  check_pairing(lists.size(), test_items.size(), k);
  if (lists.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t u = 0; u < lists.size(); ++u) {
    if (contains(head(lists[u], k), test_items[u])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(lists.size());
}

double ndcg_at_k(std::span<const TopKList> lists,
                 std::span<const ItemId> test_items, int k) {
  check_pairing(lists.size(), test_items.size(), k);
  if (lists.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t u = 0; u < lists.size(); ++u) {
    const auto top = head(lists[u], k);
    const auto it = std::find(top.begin(), top.end(), test_items[u]);
    if (it != top.end()) {
      const double rank = static_cast<double>(it - top.begin()) + 1.0;
      total += 1.0 / std::log2(rank + 1.0);
    }
  }
  return total / static_cast<double>(lists.size());
}

ExposureReport exposure_from_lists(std::span<const TopKList> lists,
                                   std::span<const InteractionSequence> histories,
                                   std::span<const ItemId> targets, int k) {
  if (targets.empty()) throw std::invalid_argument("exposure: empty target set");
  if (lists.size() != histories.size()) {
    throw std::invalid_argument("exposure: list/history count mismatch");
  }
  if (k < 1) throw std::invalid_argument("exposure: k must be >= 1");
  ExposureReport report;
  report.k = k;
  double sum = 0.0;
  std::size_t counted = 0;
  for (ItemId t : targets) {
    TargetExposure te;
    te.target = t;
    for (std::size_t u = 0; u < lists.size(); ++u) {
      if (contains(histories[u].items, t)) continue;
      ++te.eligible;
      if (contains(head(lists[u], k), t)) ++te.exposed;
    }
    te.empty_denominator = te.eligible == 0;
    if (!te.empty_denominator) {
      te.ratio = static_cast<double>(te.exposed) / static_cast<double>(te.eligible);
      sum += te.ratio;
      ++counted;
    }
    report.per_target.push_back(te);
  }
  report.defined = counted > 0;
  report.value = counted > 0 ? sum / static_cast<double>(counted) : 0.0;
  return report;
}

std::vector<ExposureReport> exposure_ratios(const ModelParams& params,
                                            std::span<const InteractionSequence> users,
                                            std::span<const ItemId> targets,
                                            std::span<const int> ks) {
  if (ks.empty()) return {};
  const int max_k = *std::max_element(ks.begin(), ks.end());
  std::vector<TopKList> lists;
  lists.reserve(users.size());
  for (const auto& u : users) lists.push_back(topk_recommend(params, u, max_k));
  std::vector<ExposureReport> out;
  for (int k : ks) out.push_back(exposure_from_lists(lists, users, targets, k));
  return out;
}

ExposureReport exposure_ratio_at_k(const ModelParams& params,
                                   std::span<const InteractionSequence> users,
                                   std::span<const ItemId> targets, int k) {
  const int ks[] = {k};
  return exposure_ratios(params, users, targets, ks).front();
}

double EvalMetrics::er(int k) const {
  for (const auto& r : exposure) {
    if (r.k == k) return r.value;
  }
  return 0.0;
}

EvalMetrics evaluate(const ModelParams& params,
                     std::span<const InteractionSequence> train,
                     std::span<const ItemId> test_items,
                     std::span<const ItemId> targets) {
  const int max_k = std::max(kEvalCutoff, *std::max_element(std::begin(kExposureCutoffs),
                                                            std::end(kExposureCutoffs)));
  std::vector<TopKList> lists;
  lists.reserve(train.size());
  for (const auto& u : train) lists.push_back(topk_recommend(params, u, max_k));

  EvalMetrics m;
  m.hr = hit_ratio_at_k(lists, test_items, kEvalCutoff);
  m.ndcg = ndcg_at_k(lists, test_items, kEvalCutoff);
  if (!targets.empty()) {
    for (int k : kExposureCutoffs) {
      m.exposure.push_back(exposure_from_lists(lists, train, targets, k));
    }
  }
  return m;
}

}  // namespace fedseq
