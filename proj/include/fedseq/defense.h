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
// Server-side aggregation rules over flattened client updates: weighted mean,
// Weiszfeld geometric median and the mean/median interpolation (mixed-RFA).
//
// All rules first put their inputs in a canonical (lexicographic) order, so
// any permutation of the same updates produces a bit-identical aggregate.
#ifndef FEDSEQ_DEFENSE_H_
#define FEDSEQ_DEFENSE_H_

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fedseq {

enum class AggregationRule { kMean, kGeometricMedian, kMixedRfa };

std::string_view to_string(AggregationRule rule);
AggregationRule parse_aggregation_rule(std::string_view name);

struct DefenseConfig {
  AggregationRule rule = AggregationRule::kMean;
  double lambda = 0.3;
  double tolerance = 1e-8;
  int max_iterations = 100;
  double smoothing = 1e-10;  // floor on distances inside Weiszfeld weights

  void validate() const;
};

struct GeometricMedianResult {
  std::vector<double> median;
  int iterations = 0;
  bool converged = false;
  // False if some iteration increased the objective.
  bool monotone = true;
  double objective = 0.0;
  // Norm of the subgradient residual with normalized weights; points within
  // `smoothing` of the median absorb up to their weight.
  double certificate = 0.0;
};

// Weights may be empty (uniform). Throws std::invalid_argument on an empty
// update list, length mismatch or invalid weights.
std::vector<double> weighted_mean(std::span<const std::vector<double>> updates,
                                  std::span<const double> weights);

GeometricMedianResult geometric_median(std::span<const std::vector<double>> updates,
                                       std::span<const double> weights,
                                       const DefenseConfig& cfg);

// g(v) = sum_i a_i ||v - w_i|| with weights normalized to sum 1.
double geometric_median_objective(std::span<const std::vector<double>> updates,
                                  std::span<const double> weights,
                                  std::span<const double> v);

struct AggregationResult {
  std::vector<double> aggregate;
  std::optional<GeometricMedianResult> median;  // set for gm and mixed_rfa
};

AggregationResult mixed_rfa(std::span<const std::vector<double>> updates,
                            std::span<const double> weights, double lambda,
                            const DefenseConfig& cfg);

AggregationResult aggregate(std::span<const std::vector<double>> updates,
                            std::span<const double> weights,
                            const DefenseConfig& cfg);

// What the server sees: anonymous vectors and their weights.
using Aggregator = std::function<AggregationResult(
    std::span<const std::vector<double>>, std::span<const double>)>;

Aggregator make_aggregator(const DefenseConfig& cfg);

}  // namespace fedseq

#endif  // FEDSEQ_DEFENSE_H_
