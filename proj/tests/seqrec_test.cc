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
#include "fedseq/seqrec.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "fedseq/evalmetrics.h"
#include "fedseq/selfcheck.h"

namespace fedseq {
namespace {

ModelParams random_params(const ModelDims& dims, std::uint64_t seed, double scale = 0.5) {
  SeededRng rng(seed, "test-model");
  ModelParams p = ModelParams::initialize(dims, rng, scale);
  for (double& b : p.model.b_1.values()) b = rng.uniform(-0.3, 0.3);
  for (double& b : p.model.b_2.values()) b = rng.uniform(-0.3, 0.3);
  return p;
}

InteractionSequence random_sequence(const ModelDims& dims, std::size_t len, SeededRng& rng) {
  InteractionSequence s;
  for (std::size_t i = 0; i < len; ++i) {
    s.items.push_back(static_cast<ItemId>(1 + rng.uniform_index(dims.item_count)));
  }
  return s;
}

double gelu_ref(double z) { return 0.5 * z * (1.0 + std::erf(z / std::sqrt(2.0))); }

// Straight-line forward pass on nested vectors, written without the library's
// matrix helpers.
std::vector<double> naive_last_hidden(const ModelParams& p,
                                      const std::vector<std::vector<double>>& x) {
  const std::size_t n = x.size();
  const std::size_t d = x[0].size();
  const std::size_t f = p.model.w_1.cols();
  auto proj = [&](const DenseMatrix& w, const std::vector<double>& row) {
    std::vector<double> out(w.cols(), 0.0);
    for (std::size_t c = 0; c < w.cols(); ++c) {
      for (std::size_t r = 0; r < row.size(); ++r) out[c] += row[r] * w(r, c);
    }
    return out;
  };
  std::vector<std::vector<double>> k(n), v(n);
  for (std::size_t i = 0; i < n; ++i) {
    k[i] = proj(p.model.w_k, x[i]);
    v[i] = proj(p.model.w_v, x[i]);
  }
  const std::vector<double> q = proj(p.model.w_q, x[n - 1]);
  std::vector<double> logit(n);
  double mx = -1e300;
  for (std::size_t j = 0; j < n; ++j) {
    logit[j] = 0.0;
    for (std::size_t c = 0; c < d; ++c) logit[j] += q[c] * k[j][c];
    logit[j] /= std::sqrt(static_cast<double>(d));
    mx = std::max(mx, logit[j]);
  }
  double z = 0.0;
  for (double& l : logit) z += (l = std::exp(l - mx));
  std::vector<double> r = x[n - 1];
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t c = 0; c < d; ++c) r[c] += logit[j] / z * v[j][c];
  }
  std::vector<double> a = proj(p.model.w_1, r);
  for (std::size_t c = 0; c < f; ++c) a[c] = gelu_ref(a[c] + p.model.b_1(0, c));
  std::vector<double> h = proj(p.model.w_2, a);
  for (std::size_t c = 0; c < d; ++c) h[c] += p.model.b_2(0, c) + r[c];
  return h;
}

TEST(Embed, ZeroParamsGiveZeroMatrix) {
  const ModelDims dims{5, 3, 4, 4};
  const ModelParams p = ModelParams::zeros(dims);
  const DenseMatrix e = embed(p, {0, {1, 2, 3}});
  EXPECT_EQ(e.rows(), 3u);
  EXPECT_EQ(e.cols(), 3u);
  for (double x : e.values()) EXPECT_EQ(x, 0.0);
}

TEST(Embed, LengthOneUsesLastPositionRow) {
  const ModelDims dims{5, 3, 4, 4};
  const ModelParams p = random_params(dims, 1);
  const DenseMatrix e = embed(p, {0, {4}});
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_DOUBLE_EQ(e(0, c), p.embedding.items(4, c) + p.embedding.positions(3, c));
  }
}

TEST(Embed, MatchesManualLookup) {
  SeededRng rng(2, "test");
  for (int n = 0; n < 50; ++n) {
    const ModelDims dims{7, 1 + static_cast<int>(rng.uniform_index(5)), 3,
                         2 + static_cast<int>(rng.uniform_index(6))};
    const ModelParams p = random_params(dims, 100 + n);
    const auto seq = random_sequence(dims, 1 + rng.uniform_index(dims.max_len), rng);
    const DenseMatrix e = embed(p, seq);
    const std::size_t len = seq.items.size();
    for (std::size_t i = 0; i < len; ++i) {
      const std::size_t pos = dims.max_len - len + i;
      for (std::size_t c = 0; c < static_cast<std::size_t>(dims.dim); ++c) {
        EXPECT_EQ(e(i, c), p.embedding.items(seq.items[i], c) + p.embedding.positions(pos, c));
      }
    }
  }
}

TEST(Embed, RejectsBadSequences) {
  const ModelDims dims{5, 2, 2, 3};
  const ModelParams p = ModelParams::zeros(dims);
  EXPECT_THROW(embed(p, {0, {}}), std::invalid_argument);
  EXPECT_THROW(embed(p, {0, {1, 2, 3, 4}}), std::invalid_argument);
  EXPECT_THROW(embed(p, {0, {0}}), std::out_of_range);
  EXPECT_THROW(embed(p, {0, {6}}), std::out_of_range);
}

TEST(Initialize, PaddingRowZeroAndFinite) {
  const ModelDims dims{20, 8, 16, 10};
  SeededRng rng(3, "model-init");
  const ModelParams p = ModelParams::initialize(dims, rng);
  for (double x : p.embedding.items.row(0)) EXPECT_EQ(x, 0.0);
  EXPECT_TRUE(p.all_finite());
  EXPECT_EQ(p.parameter_count(),
            21u * 8 + 10u * 8 + 3u * 64 + 8u * 16 + 16 + 16u * 8 + 8);
}

TEST(Forward, TwoDimHandUnrolled) {
  // d = 2, len = 2, every weight spelled out.
  const ModelDims dims{3, 2, 2, 2};
  ModelParams p = ModelParams::zeros(dims);
  p.embedding.items = DenseMatrix(4, 2, {0, 0, 0.5, -0.2, 0.1, 0.3, -0.4, 0.6});
  p.embedding.positions = DenseMatrix(2, 2, {0.05, 0.0, 0.0, -0.1});
  p.model.w_q = DenseMatrix(2, 2, {1.0, 0.2, -0.3, 0.8});
  p.model.w_k = DenseMatrix(2, 2, {0.5, -0.1, 0.4, 0.9});
  p.model.w_v = DenseMatrix(2, 2, {0.7, 0.3, -0.2, 0.6});
  p.model.w_1 = DenseMatrix(2, 2, {0.9, -0.5, 0.3, 0.2});
  p.model.b_1 = DenseMatrix(1, 2, {0.1, -0.1});
  p.model.w_2 = DenseMatrix(2, 2, {0.4, 0.1, -0.6, 0.5});
  p.model.b_2 = DenseMatrix(1, 2, {0.0, 0.2});

  // x0 = E[1] + P[0], x1 = E[2] + P[1]
  const double x0[2] = {0.55, -0.2}, x1[2] = {0.1, 0.2};
  const double q1[2] = {x1[0] * 1.0 + x1[1] * -0.3, x1[0] * 0.2 + x1[1] * 0.8};
  const double k0[2] = {x0[0] * 0.5 + x0[1] * 0.4, x0[0] * -0.1 + x0[1] * 0.9};
  const double k1[2] = {x1[0] * 0.5 + x1[1] * 0.4, x1[0] * -0.1 + x1[1] * 0.9};
  const double v0[2] = {x0[0] * 0.7 + x0[1] * -0.2, x0[0] * 0.3 + x0[1] * 0.6};
  const double v1[2] = {x1[0] * 0.7 + x1[1] * -0.2, x1[0] * 0.3 + x1[1] * 0.6};
  const double s0 = (q1[0] * k0[0] + q1[1] * k0[1]) / std::sqrt(2.0);
  const double s1 = (q1[0] * k1[0] + q1[1] * k1[1]) / std::sqrt(2.0);
  const double a0 = 1.0 / (1.0 + std::exp(s1 - s0)), a1 = 1.0 - a0;
  const double r[2] = {x1[0] + a0 * v0[0] + a1 * v1[0], x1[1] + a0 * v0[1] + a1 * v1[1]};
  const double g0 = gelu_ref(r[0] * 0.9 + r[1] * 0.3 + 0.1);
  const double g1 = gelu_ref(r[0] * -0.5 + r[1] * 0.2 - 0.1);
  const double h[2] = {r[0] + g0 * 0.4 + g1 * -0.6, r[1] + g0 * 0.1 + g1 * 0.5 + 0.2};

  const ItemScores s = score_sequence(p, {0, {1, 2}});
  ASSERT_EQ(s.item_count(), 3u);
  for (ItemId j = 1; j <= 3; ++j) {
    const double want = h[0] * p.embedding.items(j, 0) + h[1] * p.embedding.items(j, 1);
    EXPECT_NEAR(s[j], want, 1e-14);
  }
}

TEST(Forward, MatchesNaiveImplementation) {
  SeededRng rng(4, "test");
  for (int n = 0; n < 40; ++n) {
    const ModelDims dims{9, 1 + static_cast<int>(rng.uniform_index(6)),
                         1 + static_cast<int>(rng.uniform_index(6)),
                         1 + static_cast<int>(rng.uniform_index(7))};
    const ModelParams p = random_params(dims, 200 + n);
    const auto seq = random_sequence(dims, 1 + rng.uniform_index(dims.max_len), rng);
    const DenseMatrix e = embed(p, seq);
    std::vector<std::vector<double>> x;
    for (std::size_t i = 0; i < e.rows(); ++i) x.emplace_back(e.row(i).begin(), e.row(i).end());
    const auto h = naive_last_hidden(p, x);
    const ItemScores s = forward(p, e);
    for (ItemId j = 1; j <= dims.item_count; ++j) {
      EXPECT_NEAR(s[j], dot(h, p.embedding.items.row(j)), 1e-12);
    }
  }
}

TEST(Forward, IdenticalRowsGiveEqualAttention) {
  const ModelDims dims{4, 3, 5, 4};
  const ModelParams p = random_params(dims, 5);
  DenseMatrix e(4, 3);
  for (std::size_t i = 0; i < 4; ++i) {
    e(i, 0) = 0.3;
    e(i, 1) = -0.7;
    e(i, 2) = 0.2;
  }
  const ForwardCache c = encode(p, e);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j <= i; ++j) EXPECT_NEAR(c.attention(i, j), 1.0 / (i + 1), 1e-15);
    for (std::size_t j = i + 1; j < 4; ++j) EXPECT_EQ(c.attention(i, j), 0.0);
  }
}

TEST(Forward, AttentionRowStochastic) {
  SeededRng rng(6, "test");
  const ModelDims dims{9, 4, 6, 8};
  const ModelParams p = random_params(dims, 6, 1.0);
  for (int n = 0; n < 30; ++n) {
    const auto seq = random_sequence(dims, 1 + rng.uniform_index(8), rng);
    const ForwardCache c = encode(p, embed(p, seq));
    for (std::size_t i = 0; i < c.attention.rows(); ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < c.attention.cols(); ++j) {
        EXPECT_GE(c.attention(i, j), 0.0);
        if (j > i) EXPECT_EQ(c.attention(i, j), 0.0);
        sum += c.attention(i, j);
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
}

TEST(Forward, CausalPerturbationLeavesEarlierRows) {
  SeededRng rng(7, "test");
  for (int n = 0; n < 30; ++n) {
    const ModelDims dims{9, 4, 6, 6};
    const ModelParams p = random_params(dims, 300 + n);
    const auto seq = random_sequence(dims, 2 + rng.uniform_index(5), rng);
    DenseMatrix e = embed(p, seq);
    const ForwardCache before = encode(p, e);
    const std::size_t j = 1 + rng.uniform_index(e.rows() - 1);
    for (double& x : e.row(j)) x += rng.uniform(-1, 1);
    const ForwardCache after = encode(p, e);
    for (std::size_t i = 0; i < j; ++i) {
      for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(before.hidden(i, c), after.hidden(i, c));
    }
  }
}

TEST(Forward, ScoresLinearInItemEmbedding) {
  const ModelDims dims{6, 3, 4, 5};
  const ModelParams p = random_params(dims, 8);
  const InteractionSequence seq{0, {1, 2, 3}};
  const ForwardCache c = encode(p, embed(p, seq));
  const auto h = c.hidden.row(c.hidden.rows() - 1);
  // Item 5 is not in the input, so h does not depend on E[5].
  ModelParams q = p;
  const double a = 2.5, b = -0.75;
  std::vector<double> u{0.1, -0.4, 0.9}, w{-0.3, 0.2, 0.6};
  for (std::size_t k = 0; k < 3; ++k) q.embedding.items(5, k) = a * u[k] + b * w[k];
  const ItemScores s = forward(q, embed(q, seq));
  EXPECT_NEAR(s[5], a * dot(h, u) + b * dot(h, w), 1e-14);
  const ItemScores from_h = scores_from_hidden(p, h);
  const ItemScores direct = forward(p, embed(p, seq));
  for (ItemId j = 1; j <= 6; ++j) EXPECT_EQ(from_h[j], direct[j]);
  EXPECT_THROW(direct.at(0), std::out_of_range);
  EXPECT_THROW(direct.at(7), std::out_of_range);
}

TEST(Forward, TopkInvariantUnderSigmoid) {
  SeededRng rng(9, "test");
  const ModelDims dims{40, 6, 8, 10};
  const ModelParams p = random_params(dims, 9, 1.0);
  for (int n = 0; n < 20; ++n) {
    const auto seq = random_sequence(dims, 1 + rng.uniform_index(10), rng);
    const ItemScores s = score_sequence(p, seq);
    std::vector<double> probs;
    for (double x : s.values()) probs.push_back(sigmoid(x));
    const TopKList raw = topk_from_scores(s, seq, 10);
    const TopKList squashed = topk_from_scores(ItemScores(probs), seq, 10);
    EXPECT_EQ(raw.items, squashed.items);
  }
}

TEST(LocalLoss, SinglePositiveAtHalfIsLn2) {
  const ModelDims dims{3, 2, 2, 2};
  const ModelParams p = ModelParams::zeros(dims);  // every score is 0
  const std::vector<BceTerm> terms{{0, 2, 1.0}};
  EXPECT_NEAR(bce_loss(p, {0, {1}}, terms), std::log(2.0), 1e-15);
  const std::vector<BceTerm> neg{{0, 3, 0.0}};
  EXPECT_NEAR(bce_loss(p, {0, {1}}, neg), std::log(2.0), 1e-15);
}

TEST(LocalLoss, PositiveNegativeSymmetry) {
  // A positive at probability p costs what a negative at 1 - p costs: flip E[j].
  const ModelDims dims{4, 3, 4, 4};
  ModelParams p = random_params(dims, 10);
  const InteractionSequence in{0, {1, 2}};
  const std::vector<BceTerm> pos{{1, 4, 1.0}};
  const std::vector<BceTerm> neg{{1, 4, 0.0}};
  const double lp = bce_loss(p, in, pos);
  for (double& x : p.embedding.items.row(4)) x = -x;
  EXPECT_NEAR(bce_loss(p, in, neg), lp, 1e-13);
}

TEST(LocalLoss, PerfectPredictionsHitClampFloor) {
  const ModelDims dims{3, 1, 1, 1};
  ModelParams p = ModelParams::zeros(dims);
  p.embedding.items(1, 0) = 1.0;
  p.embedding.items(2, 0) = 1e6;
  p.embedding.items(3, 0) = -1e6;
  const std::vector<BceTerm> terms{{0, 2, 1.0}, {0, 3, 0.0}};
  const double loss = bce_loss(p, {0, {1}}, terms);
  EXPECT_TRUE(std::isfinite(loss));
  EXPECT_NEAR(loss, -std::log(1.0 - kProbFloor), 1e-15);
  // The other extreme is bounded by -log(kProbFloor).
  const std::vector<BceTerm> wrong{{0, 3, 1.0}};
  EXPECT_NEAR(bce_loss(p, {0, {1}}, wrong), -std::log(kProbFloor), 1e-9);
}

TEST(LocalGradient, MatchesFiniteDifferences) {
  SeededRng rng(11, "test");
  for (int n = 0; n < 15; ++n) {
    const ModelDims dims{6, 2 + static_cast<int>(rng.uniform_index(3)),
                         2 + static_cast<int>(rng.uniform_index(3)),
                         3 + static_cast<int>(rng.uniform_index(3))};
    const ModelParams p = random_params(dims, 400 + n);
    InteractionSequence hist = random_sequence(dims, 2 + rng.uniform_index(4), rng);
    SeededRng neg(n, "negative-sampling");
    const LocalBatch batch = make_local_batch(dims, hist, 2, neg);
    double loss = 0.0;
    const GradientUpdate g = local_gradient(p, batch, &loss);
    EXPECT_NEAR(loss, local_loss(p, batch), 1e-14);
    ModelParams probe = p;
    const auto fd = numeric_gradient(
        [&](std::span<const double> theta) {
          unpack_params(theta, probe);
          return local_loss(probe, batch);
        },
        pack_params(p));
    std::vector<double> analytic;
    for (const auto& [name, t] : g.tensors()) {
      analytic.insert(analytic.end(), t->values().begin(), t->values().end());
    }
    EXPECT_LT(max_relative_error(analytic, fd), 1e-5);
    // Padding never feeds the model, so its gradient row is zero.
    for (double x : g.g_embedding.items.row(0)) EXPECT_EQ(x, 0.0);
  }
}

TEST(InputGradient, MatchesFiniteDifferences) {
  SeededRng rng(12, "test");
  for (int n = 0; n < 20; ++n) {
    const ModelDims dims{7, 3, 4, 5};
    const ModelParams p = random_params(dims, 500 + n);
    const auto seq = random_sequence(dims, 1 + rng.uniform_index(5), rng);
    const DenseMatrix e = embed(p, seq);
    const ItemId t = static_cast<ItemId>(1 + rng.uniform_index(7));
    const DenseMatrix g = grad_wrt_input_embeddings(p, e, t);
    const auto fd = numeric_gradient(
        [&](std::span<const double> x) {
          return softmax_ce_loss(p, DenseMatrix(e.rows(), e.cols(),
                                                std::vector<double>(x.begin(), x.end())),
                                 t);
        },
        e.values());
    EXPECT_LT(max_relative_error(g.values(), fd), 1e-5);
  }
}

TEST(InputGradient, ConstantScoresGiveEqualRows) {
  const ModelDims dims{4, 2, 2, 3};
  const ModelParams p = ModelParams::zeros(dims);
  DenseMatrix e(3, 2, {0.1, -0.2, 0.3, 0.4, -0.5, 0.6});
  const DenseMatrix g = grad_wrt_input_embeddings(p, e, 2);
  for (std::size_t i = 1; i < 3; ++i) {
    for (std::size_t c = 0; c < 2; ++c) EXPECT_EQ(g(i, c), g(0, c));
  }
  EXPECT_NEAR(softmax_ce_loss(p, e, 2), std::log(4.0), 1e-15);
}

TEST(InputGradient, ZeroBlockWeightsOnlyReachLastRow) {
  // With zero block weights the last hidden state is the last input row.
  const ModelDims dims{4, 2, 2, 3};
  ModelParams p = ModelParams::zeros(dims);
  p.embedding.items = DenseMatrix(5, 2, {0, 0, 0.3, 0.1, -0.2, 0.4, 0.5, -0.5, 0.1, 0.2});
  DenseMatrix e(3, 2);
  const DenseMatrix g = grad_wrt_input_embeddings(p, e, 2);
  for (std::size_t i = 0; i + 1 < 3; ++i) {
    for (std::size_t c = 0; c < 2; ++c) EXPECT_EQ(g(i, c), 0.0);
  }
  // d/dh of -log softmax(E h)[t] at h = 0 is mean(E) - E[t].
  for (std::size_t c = 0; c < 2; ++c) {
    double mean = 0.0;
    for (std::size_t j = 1; j <= 4; ++j) mean += p.embedding.items(j, c) / 4.0;
    EXPECT_NEAR(g(2, c), mean - p.embedding.items(2, c), 1e-15);
  }
}

TEST(InputGradient, StepDecreasesCrossEntropy) {
  SeededRng rng(13, "test");
  for (int n = 0; n < 20; ++n) {
    const ModelDims dims{8, 4, 6, 5};
    const ModelParams p = random_params(dims, 600 + n);
    const auto seq = random_sequence(dims, 2 + rng.uniform_index(4), rng);
    const DenseMatrix e = embed(p, seq);
    const ItemId t = static_cast<ItemId>(1 + rng.uniform_index(8));
    const DenseMatrix g = grad_wrt_input_embeddings(p, e, t);
    DenseMatrix stepped = e;
    for (std::size_t i = 0; i < e.size(); ++i) stepped.values()[i] -= 1e-3 * g.values()[i];
    EXPECT_LT(softmax_ce_loss(p, stepped, t), softmax_ce_loss(p, e, t));
  }
}

TEST(LocalBatch, PositivesAreNextItemsAndNegativesUnseen) {
  SeededRng rng(14, "test");
  const ModelDims dims{30, 4, 4, 6};
  for (int n = 0; n < 50; ++n) {
    const auto hist = random_sequence(dims, 2 + rng.uniform_index(12), rng);
    SeededRng neg(n, "negative-sampling");
    const int k = static_cast<int>(rng.uniform_index(4));
    const LocalBatch b = make_local_batch(dims, hist, k, neg);
    const std::size_t window = std::min<std::size_t>(hist.items.size(), 7);
    const std::size_t off = hist.items.size() - window;
    ASSERT_EQ(b.input.items.size(), window - 1);
    for (std::size_t i = 0; i + 1 < window; ++i) EXPECT_EQ(b.input.items[i], hist.items[off + i]);
    EXPECT_EQ(b.positive_count(), window - 1);
    const std::set<ItemId> seen(hist.items.begin(), hist.items.end());
    for (const BceTerm& t : b.terms) {
      if (t.label == 1.0) {
        EXPECT_EQ(t.item, hist.items[off + t.position + 1]);
      } else {
        EXPECT_EQ(seen.count(t.item), 0u);
      }
    }
    const std::size_t pool = 30 - seen.size();
    EXPECT_EQ(b.negative_count(), (window - 1) * std::min<std::size_t>(k, pool));
  }
  EXPECT_THROW(make_local_batch(dims, {0, {3}}, 1, rng), std::invalid_argument);
}

TEST(LocalBatch, AllNegativesUsesComplement) {
  const ModelDims dims{6, 2, 2, 4};
  SeededRng rng(15, "test");
  const LocalBatch b = make_local_batch(dims, {0, {1, 2, 3}}, kAllNegatives, rng);
  EXPECT_EQ(b.positive_count(), 2u);
  EXPECT_EQ(b.negative_count(), 6u);
}

TEST(GradientUpdate, ScaleAndAdd) {
  const ModelDims dims{3, 2, 2, 2};
  GradientUpdate a = GradientUpdate::zeros(dims), b = GradientUpdate::zeros(dims);
  a.g_model.w_q(0, 1) = 2.0;
  b.g_model.w_q(0, 1) = 1.0;
  b.g_embedding.items(2, 0) = -1.0;
  a.add(b, 3.0);
  a.scale(0.5);
  EXPECT_DOUBLE_EQ(a.g_model.w_q(0, 1), 2.5);
  EXPECT_DOUBLE_EQ(a.g_embedding.items(2, 0), -1.5);
}

}  // namespace
}  // namespace fedseq
