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
#include "fedseq/selfcheck.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "fedseq/attacks.h"
#include "fedseq/defense.h"
#include "fedseq/evalmetrics.h"
#include "fedseq/experiment.h"
#include "fedseq/federation.h"

namespace fedseq {
namespace {

using Clock = std::chrono::steady_clock;

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

int draw(SeededRng& rng, int lo, int hi) {  // inclusive
  return lo + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(hi - lo + 1)));
}

std::vector<ItemId> distinct_items(SeededRng& rng, int item_count, int count) {
  std::vector<ItemId> out;
  for (auto v : rng.sample_without_replacement(static_cast<std::uint64_t>(item_count),
                                               static_cast<std::uint64_t>(count))) {
    out.push_back(static_cast<ItemId>(v + 1));
  }
  return out;
}

ModelParams random_model(SeededRng& rng, const ModelDims& dims, double scale) {
  ModelParams p = ModelParams::initialize(dims, rng, scale);
  for (double& b : p.model.b_1.values()) b = rng.uniform(-0.1, 0.1);
  for (double& b : p.model.b_2.values()) b = rng.uniform(-0.1, 0.1);
  return p;
}

// --- geometric median oracle -------------------------------------------------

using Points = std::vector<std::vector<double>>;

double oracle_objective(const Points& pts, const std::vector<double>& w, double x,
                        double y) {
  double total_w = 0.0;
  for (double a : w) total_w += a;
  double g = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    g += w[i] / total_w * std::hypot(x - pts[i][0], y - pts[i][1]);
  }
  return g;
}

// Dense grid over the bounding box, then repeated finer grids centred on the
// best cell. The objective is convex, so the refinement cannot lose the basin.
double grid_search(const Points& pts, const std::vector<double>& w) {
  double lo_x = pts[0][0], hi_x = lo_x, lo_y = pts[0][1], hi_y = lo_y;
  for (const auto& p : pts) {
    lo_x = std::min(lo_x, p[0]);
    hi_x = std::max(hi_x, p[0]);
    lo_y = std::min(lo_y, p[1]);
    hi_y = std::max(hi_y, p[1]);
  }
  double cx = 0.5 * (lo_x + hi_x), cy = 0.5 * (lo_y + hi_y);
  double half = 0.5 * std::max({hi_x - lo_x, hi_y - lo_y, 1e-3}) + 1e-3;
  double best = std::numeric_limits<double>::infinity();
  int n = 201;
  for (int level = 0; level < 14; ++level) {
    const double step = 2.0 * half / (n - 1);
    double bx = cx, by = cy;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double x = cx - half + i * step;
        const double y = cy - half + j * step;
        const double g = oracle_objective(pts, w, x, y);
        if (g < best) {
          best = g;
          bx = x;
          by = y;
        }
      }
    }
    cx = bx;
    cy = by;
    half = 2.0 * step;
    n = 41;
  }
  // Data points are candidate minimizers the grid may straddle.
  for (const auto& p : pts) best = std::min(best, oracle_objective(pts, w, p[0], p[1]));
  return best;
}

struct GmInstance {
  Points points;
  std::vector<double> weights;
};

std::vector<GmInstance> gm_instances(std::uint64_t seed) {
  std::vector<GmInstance> out;
  out.push_back({{{0, 0}, {0, 0}, {1, 0}, {0, 1}, {3, 3}}, {1, 1, 1, 1, 1}});  // duplicate
  out.push_back({{{-2, -1}, {0, 0}, {2, 1}, {4, 2}}, {1, 2, 1, 1}});           // collinear
  out.push_back({{{1, 1}, {-3, 2}, {4, -1}, {0, 5}}, {7, 1, 1, 1}});            // heavy point
  out.push_back({{{1, 1}, {-1, 1}, {-1, -1}, {1, -1}}, {1, 1, 1, 1}});          // symmetric
  out.push_back({{{0, 0}, {10, 0}, {5, 8}}, {1, 1, 1}});                        // triangle
  SeededRng rng(seed, "gm-instances");
  while (out.size() < 20) {
    GmInstance inst;
    const int m = draw(rng, 2, 8);
    for (int i = 0; i < m; ++i) {
      inst.points.push_back({rng.uniform(-5, 5), rng.uniform(-5, 5)});
      inst.weights.push_back(rng.uniform(0.1, 1.0));
    }
    out.push_back(std::move(inst));
  }
  return out;
}

double weighted_median_1d(std::vector<std::pair<double, double>> pw) {
  std::sort(pw.begin(), pw.end());
  double total = 0.0;
  for (const auto& [p, w] : pw) total += w;
  double acc = 0.0;
  for (const auto& [p, w] : pw) {
    acc += w;
    if (acc >= 0.5 * total) return p;
  }
  return pw.back().first;
}

// --- metric oracle -------------------------------------------------------------

struct Ranked {
  // rank (0-based) of each item among candidates, -1 for history items
  std::vector<long> rank;
};

Ranked brute_rank(const std::vector<double>& scores, const std::vector<char>& seen) {
  const std::size_t m = scores.size();
  Ranked r;
  r.rank.assign(m + 1, -1);
  for (std::size_t a = 1; a <= m; ++a) {
    if (seen[a]) continue;
    long above = 0;
    for (std::size_t b = 1; b <= m; ++b) {
      if (b == a || seen[b]) continue;
      const double sa = scores[a - 1], sb = scores[b - 1];
      if (sb > sa || (sb == sa && b < a)) ++above;
    }
    r.rank[a] = above;
  }
  return r;
}

}  // namespace

std::vector<double> pack_params(const ModelParams& params) {
  std::vector<double> theta;
  theta.reserve(params.parameter_count());
  for (const auto& [name, t] : params.tensors()) {
    theta.insert(theta.end(), t->values().begin(), t->values().end());
  }
  return theta;
}

void unpack_params(std::span<const double> theta, ModelParams& params) {
  std::size_t at = 0;
  for (auto& [name, t] : params.tensors()) {
    auto dst = t->values();
    if (at + dst.size() > theta.size()) throw std::invalid_argument("unpack: too short");
    std::copy_n(theta.begin() + static_cast<std::ptrdiff_t>(at), dst.size(), dst.begin());
    at += dst.size();
  }
  if (at != theta.size()) throw std::invalid_argument("unpack: too long");
}

CheckResult check_gradients(int instances, std::uint64_t seed, double tolerance) {
  const auto start = Clock::now();
  CheckResult res{"gradients", true, "", 0.0};
  SeededRng rng(seed, "gradient-instances");
  double worst[5] = {0, 0, 0, 0, 0};
  const char* names[5] = {"train", "attack", "contrastive", "total", "input"};

  for (int n = 0; n < instances; ++n) {
    ModelDims dims;
    dims.dim = draw(rng, 2, 8);
    dims.ff_dim = draw(rng, 2, 8);
    dims.max_len = draw(rng, 2, 6);
    const int hist_len = draw(rng, 2, dims.max_len + 1);
    dims.item_count = draw(rng, hist_len + 6, 30);
    const ModelParams params = random_model(rng, dims, 0.5);
    const std::vector<double> theta = pack_params(params);

    InteractionSequence history{n, distinct_items(rng, dims.item_count, hist_len)};
    const InteractionSequence x = model_window(dims, history);
    const std::vector<ItemId> targets =
        sample_non_interacted(dims.item_count, history, {}, draw(rng, 1, 2), rng);

    ModelParams probe = params;
    auto at = [&](std::span<const double> t) -> const ModelParams& {
      unpack_params(t, probe);
      return probe;
    };
    auto record = [&](int which, const std::vector<double>& analytic,
                      const std::vector<double>& numeric) {
      const double e = max_relative_error(analytic, numeric);
      worst[which] = std::max(worst[which], e);
    };

    // training loss
    const LocalBatch batch = make_local_batch(dims, history, draw(rng, 1, 3), rng);
    record(0, flatten(local_gradient(params, batch)),
           numeric_gradient([&](std::span<const double> t) { return local_loss(at(t), batch); },
                            theta));

    // attack loss
    {
      GradientUpdate g = GradientUpdate::zeros(dims);
      attack_loss(params, x, targets, &g);
      record(1, flatten(g), numeric_gradient([&](std::span<const double> t) {
               return attack_loss(at(t), x, targets);
             }, theta));
    }

    // contrastive loss
    const std::vector<ItemId> negatives =
        sample_non_interacted(dims.item_count, history, targets, draw(rng, 1, 5), rng);
    {
      GradientUpdate g = GradientUpdate::zeros(dims);
      embedding_contrastive_loss(params, x, targets, negatives, &g);
      record(2, flatten(g), numeric_gradient([&](std::span<const double> t) {
               return embedding_contrastive_loss(at(t), x, targets, negatives);
             }, theta));
    }

    // total poison loss at the substituted sequence
    {
      AttackConfig cfg;
      cfg.method = AttackMethod::kDvFsr;
      cfg.targets = targets;
      cfg.tau = rng.uniform(-1.0, 0.9);
      cfg.search_time = draw(rng, 1, dims.item_count);
      cfg.negatives = draw(rng, 1, 5);
      PoisonDetails det;
      const GradientUpdate g = poison_gradient(params, history, cfg, PoisonRecipe{}, rng, &det);
      record(3, flatten(g), numeric_gradient([&](std::span<const double> t) {
               const ModelParams& p = at(t);
               return attack_loss(p, det.poisoned_sequence, targets) +
                      embedding_contrastive_loss(p, x, targets, det.contrastive_negatives);
             }, theta));
    }

    // input-embedding gradient of the softmax cross-entropy
    {
      const DenseMatrix embedded = embed(params, x);
      const DenseMatrix g = grad_wrt_input_embeddings(params, embedded, targets.front());
      const std::vector<double> e0(embedded.values().begin(), embedded.values().end());
      const auto numeric = numeric_gradient(
          [&](std::span<const double> t) {
            DenseMatrix e(embedded.rows(), embedded.cols(), std::vector<double>(t.begin(), t.end()));
            return softmax_ce_loss(params, e, targets.front());
          },
          e0);
      record(4, std::vector<double>(g.values().begin(), g.values().end()), numeric);
    }
  }

  std::ostringstream detail;
  for (int i = 0; i < 5; ++i) {
    if (worst[i] > tolerance) res.passed = false;
    detail << (i ? " " : "") << names[i] << "=" << sci(worst[i]);
  }
  res.detail = std::to_string(instances) + " instances, max rel err " + detail.str();
  res.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return res;
}

CheckResult check_geometric_median(std::uint64_t seed) {
  const auto start = Clock::now();
  CheckResult res{"geometric_median", true, "", 0.0};
  DefenseConfig cfg;
  cfg.rule = AggregationRule::kGeometricMedian;
  double worst_gap = 0.0, worst_cert = 0.0, worst_1d = 0.0;
  int converged = 0;
  const auto instances = gm_instances(seed);
  for (const auto& inst : instances) {
    const GeometricMedianResult gm = geometric_median(inst.points, inst.weights, cfg);
    const double g = oracle_objective(inst.points, inst.weights, gm.median[0], gm.median[1]);
    worst_gap = std::max(worst_gap, std::abs(g - grid_search(inst.points, inst.weights)));
    if (gm.converged) {
      ++converged;
      worst_cert = std::max(worst_cert, gm.certificate);
    }
  }
  SeededRng rng(seed, "gm-1d");
  for (int n = 0; n < 10; ++n) {
    const int m = draw(rng, 1, 4) * 2 + 1;
    Points pts;
    std::vector<double> w;
    std::vector<std::pair<double, double>> pw;
    for (int i = 0; i < m; ++i) {
      pts.push_back({rng.uniform(-10, 10)});
      w.push_back(static_cast<double>(draw(rng, 1, 3)) * 2.0 - 1.0 + 0.01 * i);
      pw.emplace_back(pts.back()[0], w.back());
    }
    const GeometricMedianResult gm = geometric_median(pts, w, cfg);
    worst_1d = std::max(worst_1d, std::abs(gm.median[0] - weighted_median_1d(pw)));
  }
  res.passed = worst_gap <= 1e-4 && worst_cert <= 1e-6 && worst_1d <= 1e-6;
  res.detail = std::to_string(instances.size()) + " 2-D instances (" +
               std::to_string(converged) + " converged), objective gap " + sci(worst_gap) +
               ", certificate " + sci(worst_cert) + ", 1-D error " + sci(worst_1d);
  res.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return res;
}

CheckResult check_aggregation_identities(int instances, std::uint64_t seed) {
  const auto start = Clock::now();
  CheckResult res{"aggregation_identities", true, "", 0.0};
  SeededRng rng(seed, "aggregation-instances");
  DefenseConfig cfg;
  bool mean_equal = true, gm_equal = true;
  double worst_mix = 0.0;
  for (int n = 0; n < instances; ++n) {
    const int m = draw(rng, 1, 12);
    const int dim = draw(rng, 1, 20);
    Points pts(static_cast<std::size_t>(m));
    std::vector<double> w;
    for (auto& p : pts) {
      for (int j = 0; j < dim; ++j) p.push_back(rng.uniform(-3, 3));
      w.push_back(rng.uniform(0.1, 2.0));
    }
    if (n % 3 == 0) w.clear();  // uniform weights
    const auto mean = weighted_mean(pts, w);
    const auto gm = geometric_median(pts, w, cfg);
    mean_equal = mean_equal && mixed_rfa(pts, w, 1.0, cfg).aggregate == mean;
    gm_equal = gm_equal && mixed_rfa(pts, w, 0.0, cfg).aggregate == gm.median;
    const auto mix = mixed_rfa(pts, w, 0.3, cfg).aggregate;
    for (std::size_t j = 0; j < mix.size(); ++j) {
      worst_mix = std::max(worst_mix, std::abs(mix[j] - (0.3 * mean[j] + 0.7 * gm.median[j])));
    }
  }
  res.passed = mean_equal && gm_equal && worst_mix <= 1e-12;
  res.detail = std::string("lambda=1 ") + (mean_equal ? "bit-equal" : "DIFFERS") +
               ", lambda=0 " + (gm_equal ? "bit-equal" : "DIFFERS") +
               ", lambda=0.3 max dev " + sci(worst_mix);
  res.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return res;
}

CheckResult check_substitution(int instances, std::uint64_t seed) {
  const auto start = Clock::now();
  CheckResult res{"substitution", true, "", 0.0};
  SeededRng rng(seed, "substitution-instances");
  int multi_edit = 0, tau_violations = 0, brute_mismatch = 0, changed = 0;
  for (int n = 0; n < instances; ++n) {
    ModelDims dims;
    dims.dim = draw(rng, 2, 8);
    dims.ff_dim = draw(rng, 2, 8);
    dims.max_len = draw(rng, 2, 8);
    dims.item_count = draw(rng, dims.max_len + 2, 30);
    const ModelParams params = random_model(rng, dims, rng.uniform(0.05, 1.0));
    const int len = draw(rng, 1, dims.max_len);
    InteractionSequence seq{n, {}};
    for (int i = 0; i < len; ++i) {
      seq.items.push_back(static_cast<ItemId>(draw(rng, 1, dims.item_count)));
    }
    const ItemId target = static_cast<ItemId>(draw(rng, 1, dims.item_count));

    SubstitutionOptions opt;
    opt.tau = rng.uniform(-1.0, 1.0);
    opt.search_time = draw(rng, 1, dims.item_count);
    opt.fgsm_step = rng.uniform(0.01, 2.0);
    const SubstitutionResult r = substitution(params, seq, target, opt);
    int diffs = 0;
    for (std::size_t i = 0; i < seq.items.size(); ++i) {
      if (r.sequence.items[i] != seq.items[i]) {
        ++diffs;
        const double c = cosine_sim(params.embedding.items.row(static_cast<std::size_t>(seq.items[i])),
                                    params.embedding.items.row(static_cast<std::size_t>(r.sequence.items[i])));
        if (c < opt.tau) ++tau_violations;
      }
    }
    if (diffs > 1) ++multi_edit;
    if (diffs == 1) ++changed;

    // tau = -1, T = M: the pick must be the exhaustive argmax at the position.
    opt.tau = -1.0;
    opt.search_time = dims.item_count;
    const SubstitutionResult full = substitution(params, seq, target, opt);
    const auto pos = static_cast<std::size_t>(full.trace.position);
    ItemId best_item = kPaddingItem;
    double best = -std::numeric_limits<double>::infinity();
    InteractionSequence probe = seq;
    for (ItemId c = 1; c <= dims.item_count; ++c) {
      if (c == target) continue;
      probe.items[pos] = c;
      const double s = score_sequence(params, probe)[target];
      if (s > best) {
        best = s;
        best_item = c;
      }
    }
    if (full.sequence.items[pos] != best_item) ++brute_mismatch;
  }
  res.passed = multi_edit == 0 && tau_violations == 0 && brute_mismatch == 0;
  res.detail = std::to_string(instances) + " instances, " + std::to_string(changed) +
               " edited, multi-edits " + std::to_string(multi_edit) + ", tau violations " +
               std::to_string(tau_violations) + ", brute-force mismatches " +
               std::to_string(brute_mismatch);
  res.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return res;
}

CheckResult check_metrics(int instances, std::uint64_t seed) {
  const auto start = Clock::now();
  CheckResult res{"metrics", true, "", 0.0};
  SeededRng rng(seed, "metric-instances");
  int mismatches = 0, monotone_breaks = 0;
  for (int n = 0; n < instances; ++n) {
    const int m = draw(rng, 3, 30);
    const int users = draw(rng, 1, 12);
    const int levels = draw(rng, 2, 6);  // few levels force score ties
    std::vector<TopKList> lists;
    std::vector<InteractionSequence> histories;
    std::vector<ItemId> tests;
    std::vector<Ranked> ranks;
    std::vector<std::vector<double>> all_scores;
    for (int u = 0; u < users; ++u) {
      std::vector<double> scores;
      for (int j = 0; j < m; ++j) scores.push_back(static_cast<double>(draw(rng, 0, levels)));
      InteractionSequence h{u, distinct_items(rng, m, draw(rng, 0, m - 1))};
      std::vector<char> seen(static_cast<std::size_t>(m) + 1, 0);
      for (ItemId x : h.items) seen[static_cast<std::size_t>(x)] = 1;
      tests.push_back(static_cast<ItemId>(draw(rng, 1, m)));
      ranks.push_back(brute_rank(scores, seen));
      lists.push_back(topk_from_scores(ItemScores(scores), h, m));
      all_scores.push_back(std::move(scores));
      histories.push_back(std::move(h));
    }
    const std::vector<ItemId> targets = distinct_items(rng, m, draw(rng, 1, 3));

    double prev_hr = 0.0, prev_ndcg = 0.0, prev_er = 0.0;
    for (int k = 1; k <= m; ++k) {
      std::size_t hits = 0;
      double dcg = 0.0;
      for (int u = 0; u < users; ++u) {
        const long r = ranks[static_cast<std::size_t>(u)].rank[static_cast<std::size_t>(tests[static_cast<std::size_t>(u)])];
        if (r >= 0 && r < k) {
          ++hits;
          dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
        }
      }
      const double hr = static_cast<double>(hits) / users;
      const double ndcg = dcg / users;
      double er_sum = 0.0;
      int er_count = 0;
      for (ItemId t : targets) {
        std::size_t eligible = 0, exposed = 0;
        for (int u = 0; u < users; ++u) {
          const long r = ranks[static_cast<std::size_t>(u)].rank[static_cast<std::size_t>(t)];
          if (r < 0) continue;
          ++eligible;
          if (r < k) ++exposed;
        }
        if (eligible > 0) {
          er_sum += static_cast<double>(exposed) / static_cast<double>(eligible);
          ++er_count;
        }
      }
      const double er = er_count > 0 ? er_sum / er_count : 0.0;
      const ExposureReport rep = exposure_from_lists(lists, histories, targets, k);
      if (hit_ratio_at_k(lists, tests, k) != hr || ndcg_at_k(lists, tests, k) != ndcg ||
          rep.value != er || rep.defined != (er_count > 0)) {
        ++mismatches;
      }
      // Truncated lists must be prefixes of the full ranking.
      for (int u = 0; u < users; ++u) {
        const auto& full = lists[static_cast<std::size_t>(u)].items;
        const TopKList cut = topk_from_scores(ItemScores(all_scores[static_cast<std::size_t>(u)]),
                                              histories[static_cast<std::size_t>(u)], k);
        const auto keep = std::min(full.size(), static_cast<std::size_t>(k));
        if (!std::equal(cut.items.begin(), cut.items.end(), full.begin(), full.begin() + static_cast<std::ptrdiff_t>(keep))) {
          ++mismatches;
        }
      }
      if (hr < prev_hr || ndcg < prev_ndcg || er < prev_er) ++monotone_breaks;
      prev_hr = hr;
      prev_ndcg = ndcg;
      prev_er = er;
    }
  }
  res.passed = mismatches == 0 && monotone_breaks == 0;
  res.detail = std::to_string(instances) + " instances, mismatches " +
               std::to_string(mismatches) + ", monotonicity breaks " +
               std::to_string(monotone_breaks);
  res.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return res;
}

ExperimentConfig determinism_probe_config() {
  ExperimentConfig cfg;
  cfg.dataset.synth.users = 60;
  cfg.dataset.synth.items = 40;
  cfg.federation.rounds = 6;
  cfg.federation.eval_every = 3;
  cfg.federation.clients_per_round = 10;
  cfg.attack.params.method = AttackMethod::kDvFsr;
  cfg.attack.malicious_percent = 5.0;
  cfg.defense.rule = AggregationRule::kMixedRfa;
  return cfg;
}

CheckResult check_determinism(const ExperimentConfig& cfg) {
  const auto start = Clock::now();
  CheckResult res{"determinism", true, "", 0.0};
  auto stream = [&] {
    std::string out;
    RunOptions opt;
    opt.write_outputs = false;
    opt.on_round = [&](const RoundLog& log) { out += round_log_json(log) + "\n"; };
    run_experiment(cfg, opt);
    return out;
  };
  const std::string a = stream();
  const std::string b = stream();
  res.passed = a == b && !a.empty();
  res.detail = std::to_string(a.size()) + " bytes of log, " +
               (a == b ? "identical" : "DIFFERENT");
  res.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return res;
}

std::vector<CheckResult> run_self_checks() {
  return {check_gradients(),          check_geometric_median(),
          check_aggregation_identities(), check_substitution(),
          check_metrics(),            check_determinism(determinism_probe_config())};
}

}  // namespace fedseq
