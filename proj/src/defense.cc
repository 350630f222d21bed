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
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace fedseq {

std::string_view to_string(AggregationRule rule) {
  switch (rule) {
    case AggregationRule::kMean:
      return "mean";
    case AggregationRule::kGeometricMedian:
      return "gm";
    case AggregationRule::kMixedRfa:
      return "mixed_rfa";
  }
  return "unknown";
}

AggregationRule parse_aggregation_rule(std::string_view name) {
  if (name == "mean") return AggregationRule::kMean;
  if (name == "gm") return AggregationRule::kGeometricMedian;
  if (name == "mixed_rfa" || name == "mixed-rfa") return AggregationRule::kMixedRfa;
  throw std::invalid_argument("unknown aggregation rule '" + std::string(name) + "'");
}

void DefenseConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw std::invalid_argument("defense lambda must be in [0, 1]");
  }
  if (!(tolerance > 0.0)) throw std::invalid_argument("defense tolerance must be > 0");
  if (!(smoothing > 0.0)) throw std::invalid_argument("defense smoothing must be > 0");
  if (max_iterations < 1) {
    throw std::invalid_argument("defense max_iterations must be >= 1");
  }
}

namespace {

struct Canonical {
  std::vector<const std::vector<double>*> points;
  std::vector<double> weights;  // normalized to sum 1
};

// Validates inputs and sorts (point, weight) pairs lexicographically.
Canonical canonicalize(std::span<const std::vector<double>> updates,
                       std::span<const double> weights) {
  if (updates.empty()) throw std::invalid_argument("aggregation: no updates");
  if (!weights.empty() && weights.size() != updates.size()) {
    throw std::invalid_argument("aggregation: weight count mismatch");
  }
  const std::size_t dim = updates.front().size();
  for (const auto& u : updates) {
    if (u.size() != dim) throw std::invalid_argument("aggregation: length mismatch");
  }
  std::vector<std::size_t> order(updates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto weight_of = [&](std::size_t i) { return weights.empty() ? 1.0 : weights[i]; };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (updates[a] != updates[b]) return updates[a] < updates[b];
    return weight_of(a) < weight_of(b);
  });

  Canonical c;
  double total = 0.0;
  for (std::size_t i : order) {
    const double w = weight_of(i);
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("aggregation: weights must be finite and >= 0");
    }
    c.points.push_back(&updates[i]);
    c.weights.push_back(w);
    total += w;
  }
  if (!(total > 0.0)) throw std::invalid_argument("aggregation: weights sum to 0");
  for (double& w : c.weights) w /= total;
  return c;
}

std::vector<double> mean_of(const Canonical& c) {
  std::vector<double> out(c.points.front()->size(), 0.0);
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    const auto& p = *c.points[i];
    const double w = c.weights[i];
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += w * p[j];
  }
  return out;
}

double distance(const std::vector<double>& a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return std::sqrt(s);
}

double objective_of(const Canonical& c, std::span<const double> v) {
  double g = 0.0;
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    g += c.weights[i] * distance(*c.points[i], v);
  }
  return g;
}

double certificate_of(const Canonical& c, std::span<const double> v,
                      double smoothing) {
  std::vector<double> residual(v.size(), 0.0);
  double absorbed = 0.0;
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    const auto& p = *c.points[i];
    const double d = distance(p, v);
    if (d <= smoothing) {
      absorbed += c.weights[i];
      continue;
    }
    const double scale = c.weights[i] / d;
    for (std::size_t j = 0; j < v.size(); ++j) residual[j] += scale * (v[j] - p[j]);
  }
  double norm = 0.0;
  for (double r : residual) norm += r * r;
  return std::max(0.0, std::sqrt(norm) - absorbed);
}

GeometricMedianResult weiszfeld(const Canonical& c, const DefenseConfig& cfg) {
  GeometricMedianResult r;
  r.median = mean_of(c);
  double g = objective_of(c, r.median);
  const std::size_t dim = r.median.size();
  std::vector<double> next(dim);
  for (int it = 0; it < cfg.max_iterations; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    double denom = 0.0;
    for (std::size_t i = 0; i < c.points.size(); ++i) {
      const auto& p = *c.points[i];
      const double beta = c.weights[i] / std::max(distance(p, r.median), cfg.smoothing);
      denom += beta;
      for (std::size_t j = 0; j < dim; ++j) next[j] += beta * p[j];
    }
    double step = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      next[j] /= denom;
      const double d = next[j] - r.median[j];
      step += d * d;
    }
    step = std::sqrt(step);
    const double g_next = objective_of(c, next);
    if (g_next > g + 1e-12 * (1.0 + std::abs(g))) r.monotone = false;
    r.median.swap(next);
    g = g_next;
    r.iterations = it + 1;
    if (step <= cfg.tolerance) {
      r.converged = true;
      break;
    }
  }
  // Weiszfeld only approaches a median that sits on a data point. If the
  // nearest point satisfies the optimality condition itself, it is the
  // minimizer; return it exactly.
  std::size_t nearest = 0;
  double nearest_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    const double d = distance(*c.points[i], r.median);
    if (d < nearest_d) {
      nearest_d = d;
      nearest = i;
    }
  }
  if (nearest_d > 0.0 && certificate_of(c, *c.points[nearest], cfg.smoothing) == 0.0) {
    r.median = *c.points[nearest];
    g = objective_of(c, r.median);
  }
  r.objective = g;
  r.certificate = certificate_of(c, r.median, cfg.smoothing);
  return r;
}

}  // namespace

std::vector<double> weighted_mean(std::span<const std::vector<double>> updates,
                                  std::span<const double> weights) {
  return mean_of(canonicalize(updates, weights));
}

GeometricMedianResult geometric_median(std::span<const std::vector<double>> updates,
                                       std::span<const double> weights,
                                       const DefenseConfig& cfg) {
  cfg.validate();
  return weiszfeld(canonicalize(updates, weights), cfg);
}

double geometric_median_objective(std::span<const std::vector<double>> updates,
                                  std::span<const double> weights,
                                  std::span<const double> v) {
  const Canonical c = canonicalize(updates, weights);
  if (v.size() != c.points.front()->size()) {
    throw std::invalid_argument("objective: length mismatch");
  }
  return objective_of(c, v);
}

AggregationResult mixed_rfa(std::span<const std::vector<double>> updates,
                            std::span<const double> weights, double lambda,
                            const DefenseConfig& cfg) {
  DefenseConfig local = cfg;
  local.lambda = lambda;
  local.validate();
  const Canonical c = canonicalize(updates, weights);
  const std::vector<double> mean = mean_of(c);
  GeometricMedianResult gm = weiszfeld(c, local);

  AggregationResult out;
  if (lambda == 1.0) {
    out.aggregate = mean;  // exact endpoints, no -0.0 + 0.0 surprises
  } else if (lambda == 0.0) {
    out.aggregate = gm.median;
  } else {
    out.aggregate.resize(mean.size());
    for (std::size_t j = 0; j < mean.size(); ++j) {
      out.aggregate[j] = lambda * mean[j] + (1.0 - lambda) * gm.median[j];
    }
  }
  out.median = std::move(gm);
  return out;
}

AggregationResult aggregate(std::span<const std::vector<double>> updates,
                            std::span<const double> weights,
                            const DefenseConfig& cfg) {
  switch (cfg.rule) {
    case AggregationRule::kMean:
      return {weighted_mean(updates, weights), std::nullopt};
    case AggregationRule::kGeometricMedian: {
      GeometricMedianResult gm = geometric_median(updates, weights, cfg);
      std::vector<double> v = gm.median;
      return {std::move(v), std::move(gm)};
    }
    case AggregationRule::kMixedRfa:
      return mixed_rfa(updates, weights, cfg.lambda, cfg);
  }
  throw std::logic_error("aggregate: unhandled rule");
}

Aggregator make_aggregator(const DefenseConfig& cfg) {
  cfg.validate();
  return [cfg](std::span<const std::vector<double>> updates,
               std::span<const double> weights) {
    return aggregate(updates, weights, cfg);
  };
}

}  // namespace fedseq
