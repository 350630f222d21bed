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
#include "fedseq/defense.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "fedseq/numerics.h"

namespace fedseq {
namespace {

using Points = std::vector<std::vector<double>>;

const Points kFourPoints{{0, 0}, {1, 0}, {0, 1}, {5, 5}};

// Dense grid over [-1, 6]^2, then a finer grid around the best cell.
double grid_min_objective(const Points& pts) {
  auto g = [&](double x, double y) {
    const std::vector<double> v{x, y};
    return geometric_median_objective(pts, {}, v);
  };
  double best = 1e300, bx = 0, by = 0;
  for (int i = 0; i <= 1400; ++i) {
    for (int j = 0; j <= 1400; ++j) {
      const double x = -1.0 + i * 0.005, y = -1.0 + j * 0.005;
      const double v = g(x, y);
      if (v < best) best = v, bx = x, by = y;
    }
  }
  const double cx = bx, cy = by;
  for (int i = -100; i <= 100; ++i) {
    for (int j = -100; j <= 100; ++j) {
      best = std::min(best, g(cx + i * 5e-5, cy + j * 5e-5));
    }
  }
  return best;
}

TEST(WeightedMean, Examples) {
  const Points one{{1.5, -2.0, 3.0}};
  EXPECT_EQ(weighted_mean(one, {}), one[0]);
  EXPECT_EQ(weighted_mean(Points{{0, 0}, {2, 2}}, {}), (std::vector<double>{1, 1}));
  const std::vector<double> w{1, 3};
  EXPECT_DOUBLE_EQ(weighted_mean(Points{{0}, {4}}, w)[0], 3.0);
}

TEST(WeightedMean, Errors) {
  EXPECT_THROW(weighted_mean(Points{}, {}), std::invalid_argument);
  EXPECT_THROW(weighted_mean(Points{{1, 2}, {1}}, {}), std::invalid_argument);
  const std::vector<double> neg{-1, 2}, zero{0, 0}, short_w{1};
  EXPECT_THROW(weighted_mean(Points{{1}, {2}}, neg), std::invalid_argument);
  EXPECT_THROW(weighted_mean(Points{{1}, {2}}, zero), std::invalid_argument);
  EXPECT_THROW(weighted_mean(Points{{1}, {2}}, short_w), std::invalid_argument);
}

TEST(GeometricMedian, Examples) {
  const DefenseConfig cfg;
  const auto same = geometric_median(Points{{2, -1}, {2, -1}, {2, -1}}, {}, cfg);
  EXPECT_EQ(same.median, (std::vector<double>{2, -1}));
  EXPECT_TRUE(same.converged);

  const auto line = geometric_median(Points{{0}, {1}, {10}}, {}, cfg);
  EXPECT_NEAR(line.median[0], 1.0, cfg.tolerance);

  const double h = std::sqrt(3.0) / 2.0;
  const auto tri = geometric_median(Points{{0, 0}, {1, 0}, {0.5, h}}, {}, cfg);
  EXPECT_NEAR(tri.median[0], 0.5, 1e-7);
  EXPECT_NEAR(tri.median[1], h / 3.0, 1e-7);

  EXPECT_THROW(geometric_median(Points{}, {}, cfg), std::invalid_argument);
}

TEST(GeometricMedian, FourPointsMatchGridOracle) {
  const auto r = geometric_median(kFourPoints, {}, DefenseConfig{});
  const double oracle = grid_min_objective(kFourPoints);
  EXPECT_LE(std::abs(r.objective - oracle), 1e-4);
  EXPECT_LE(r.objective, oracle + 1e-9);
  EXPECT_TRUE(r.converged);
  EXPECT_TRUE(r.monotone);
  EXPECT_LE(r.certificate, 1e-6);
}

TEST(GeometricMedian, ObjectiveNotAboveInputsOrMean) {
  SeededRng rng(21, "test");
  const DefenseConfig cfg;
  for (int n = 0; n < 100; ++n) {
    const std::size_t m = 1 + rng.uniform_index(8), d = 1 + rng.uniform_index(5);
    Points pts(m, std::vector<double>(d));
    for (auto& p : pts) for (double& x : p) x = rng.uniform(-3, 3);
    std::vector<double> w(m);
    for (double& x : w) x = rng.uniform(0.1, 2.0);
    const auto r = geometric_median(pts, w, cfg);
    EXPECT_TRUE(r.monotone);
    EXPECT_NEAR(r.objective, geometric_median_objective(pts, w, r.median), 1e-12);
    for (const auto& p : pts) {
      EXPECT_LE(r.objective, geometric_median_objective(pts, w, p) + 1e-12);
    }
    EXPECT_LE(r.objective,
              geometric_median_objective(pts, w, weighted_mean(pts, w)) + cfg.tolerance);
  }
}

TEST(GeometricMedian, TranslationEquivariant) {
  SeededRng rng(22, "test");
  const DefenseConfig cfg;
  for (int n = 0; n < 50; ++n) {
    const std::size_t m = 2 + rng.uniform_index(6), d = 1 + rng.uniform_index(4);
    Points pts(m, std::vector<double>(d)), moved = pts;
    std::vector<double> c(d);
    for (double& x : c) x = rng.uniform(-10, 10);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t k = 0; k < d; ++k) {
        pts[i][k] = rng.uniform(-2, 2);
        moved[i].resize(d);
        moved[i][k] = pts[i][k] + c[k];
      }
    }
    const auto a = geometric_median(pts, {}, cfg);
    const auto b = geometric_median(moved, {}, cfg);
    for (std::size_t k = 0; k < d; ++k) EXPECT_NEAR(b.median[k], a.median[k] + c[k], 1e-6);
  }
}

TEST(Aggregation, PermutationInvariantBitExact) {
  SeededRng rng(23, "test");
  for (int n = 0; n < 50; ++n) {
    const std::size_t m = 2 + rng.uniform_index(7), d = 1 + rng.uniform_index(6);
    Points pts(m, std::vector<double>(d));
    for (auto& p : pts) for (double& x : p) x = rng.uniform(-1, 1);
    std::vector<std::size_t> order(m);
    for (std::size_t i = 0; i < m; ++i) order[i] = i;
    for (std::size_t i = m - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_index(i + 1)]);
    Points shuffled;
    for (std::size_t i : order) shuffled.push_back(pts[i]);
    for (AggregationRule rule :
         {AggregationRule::kMean, AggregationRule::kGeometricMedian, AggregationRule::kMixedRfa}) {
      DefenseConfig cfg;
      cfg.rule = rule;
      EXPECT_EQ(aggregate(pts, {}, cfg).aggregate, aggregate(shuffled, {}, cfg).aggregate);
    }
  }
}

TEST(GeometricMedian, OutlierBreakdownSanity) {
  Points pts{{0, 0}, {1, 0}, {0, 1}, {1, 1}, {0.5, 0.5}};
  const DefenseConfig cfg;
  const auto gm0 = geometric_median(pts, {}, cfg).median;
  const auto mean0 = weighted_mean(pts, {});
  pts[4] = {1e6, 1e6};
  const auto gm1 = geometric_median(pts, {}, cfg).median;
  const auto mean1 = weighted_mean(pts, {});
  std::vector<double> dg{gm1[0] - gm0[0], gm1[1] - gm0[1]};
  std::vector<double> dm{mean1[0] - mean0[0], mean1[1] - mean0[1]};
  EXPECT_LT(norm2(dg), 1.0);
  EXPECT_GT(norm2(dm), 100.0 * norm2(dg));
}

TEST(GeometricMedian, NonConvergenceIsFlagged) {
  DefenseConfig cfg;
  cfg.max_iterations = 1;
  cfg.tolerance = 1e-15;
  const auto r = geometric_median(kFourPoints, {}, cfg);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 1);
  EXPECT_EQ(r.median.size(), 2u);
}

TEST(MixedRfa, Endpoints) {
  const DefenseConfig cfg;
  const auto mean = weighted_mean(kFourPoints, {});
  const auto gm = geometric_median(kFourPoints, {}, cfg);
  EXPECT_EQ(mixed_rfa(kFourPoints, {}, 1.0, cfg).aggregate, mean);
  EXPECT_EQ(mixed_rfa(kFourPoints, {}, 0.0, cfg).aggregate, gm.median);
}

TEST(MixedRfa, InterpolatesIndependentlyVerifiedFactors) {
  const DefenseConfig cfg;
  // mean of the four points, by hand
  const std::vector<double> mean{1.5, 1.5};
  const double oracle = grid_min_objective(kFourPoints);
  const auto gm = geometric_median(kFourPoints, {}, cfg);
  EXPECT_LE(std::abs(gm.objective - oracle), 1e-4);
  const auto r = mixed_rfa(kFourPoints, {}, 0.3, cfg);
  ASSERT_TRUE(r.median.has_value());
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_NEAR(r.aggregate[k], 0.3 * mean[k] + 0.7 * gm.median[k], 1e-15);
  }
}

TEST(DefenseConfig, ValidationAndNames) {
  DefenseConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.lambda = 1.5;
  EXPECT_ANY_THROW(cfg.validate());
  cfg.lambda = 0.3;
  cfg.tolerance = 0.0;
  EXPECT_ANY_THROW(cfg.validate());
  EXPECT_EQ(parse_aggregation_rule("mixed_rfa"), AggregationRule::kMixedRfa);
  EXPECT_EQ(to_string(AggregationRule::kGeometricMedian), "gm");
  EXPECT_ANY_THROW(parse_aggregation_rule("krum"));
  EXPECT_ANY_THROW(mixed_rfa(kFourPoints, {}, -0.1, DefenseConfig{}));
}

}  // namespace
}  // namespace fedseq
