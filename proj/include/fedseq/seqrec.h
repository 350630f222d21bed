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
// Reference sequential recommender: item + position embeddings followed by a
// single causal self-attention block (one head) with a GELU feed-forward and
// residual connections. Output scores are tied to the item embeddings.
#ifndef FEDSEQ_SEQREC_H_
#define FEDSEQ_SEQREC_H_

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "fedseq/numerics.h"

namespace fedseq {

using ItemId = std::int32_t;
inline constexpr ItemId kPaddingItem = 0;

// Probabilities inside log() are clamped to [kProbFloor, 1 - kProbFloor].
inline constexpr double kProbFloor = 1e-12;

struct InteractionSequence {
  std::int64_t user = 0;
  std::vector<ItemId> items;  // oldest first

  friend bool operator==(const InteractionSequence&,
                         const InteractionSequence&) = default;
};

struct ModelDims {
  int item_count = 0;  // M; valid ids are 1..M
  int dim = 16;
  int ff_dim = 32;
  int max_len = 30;

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

struct EmbeddingTensors {
  DenseMatrix items;      // (M + 1) x d, row 0 is padding
  DenseMatrix positions;  // max_len x d
};

struct BlockTensors {
  DenseMatrix w_q, w_k, w_v;  // d x d
  DenseMatrix w_1;            // d x d_ff
  DenseMatrix b_1;            // 1 x d_ff
  DenseMatrix w_2;            // d_ff x d
  DenseMatrix b_2;            // 1 x d
};

inline constexpr std::size_t kTensorCount = 9;
using TensorRefs = std::array<std::pair<std::string_view, DenseMatrix*>, kTensorCount>;
using ConstTensorRefs =
    std::array<std::pair<std::string_view, const DenseMatrix*>, kTensorCount>;

// Canonical tensor order used by flatten, checkpoints and gradient checks.
TensorRefs tensor_refs(EmbeddingTensors& e, BlockTensors& m);
ConstTensorRefs tensor_refs(const EmbeddingTensors& e, const BlockTensors& m);

struct ModelParams {
  ModelDims dims;
  EmbeddingTensors embedding;
  BlockTensors model;

  static ModelParams zeros(const ModelDims& dims);
  // Embeddings uniform in [-embedding_scale, embedding_scale]; weight
  // matrices Glorot-uniform; biases zero. Padding row zero.
  static ModelParams initialize(const ModelDims& dims, SeededRng& rng,
                                double embedding_scale = 0.1);

  TensorRefs tensors() { return tensor_refs(embedding, model); }
  ConstTensorRefs tensors() const { return tensor_refs(embedding, model); }
  std::size_t parameter_count() const;
  bool all_finite() const;
};

// A client's upload: [g_embedding; g_model], same shapes as ModelParams.
struct GradientUpdate {
  ModelDims dims;
  EmbeddingTensors g_embedding;
  BlockTensors g_model;

  static GradientUpdate zeros(const ModelDims& dims);

  TensorRefs tensors() { return tensor_refs(g_embedding, g_model); }
  ConstTensorRefs tensors() const { return tensor_refs(g_embedding, g_model); }

  void scale(double factor);
  // this += factor * other
  void add(const GradientUpdate& other, double factor = 1.0);
};

void validate_sequence(const ModelDims& dims, const InteractionSequence& seq);

// Position row used by element i of a length-n sequence (right aligned).
inline int position_row(const ModelDims& dims, std::size_t n, std::size_t i) {
  return dims.max_len - static_cast<int>(n) + static_cast<int>(i);
}

// f_e: row i = E[seq_i] + P[position_row(i)].
DenseMatrix embed(const ModelParams& params, const InteractionSequence& seq);

// Intermediate activations of f_m for one embedded sequence.
struct ForwardCache {
  DenseMatrix input;      // len x d
  DenseMatrix q, k, v;    // len x d
  DenseMatrix attention;  // len x len, row-stochastic, zero above diagonal
  DenseMatrix residual;   // input + attention * v
  DenseMatrix pre_act;    // len x d_ff
  DenseMatrix act;        // gelu(pre_act)
  DenseMatrix hidden;     // len x d, final states
};

ForwardCache encode(const ModelParams& params, const DenseMatrix& embedded);

// Scores s_j = h_last . E[j] for j in 1..M. Padding is never scored.
class ItemScores {
 public:
  explicit ItemScores(std::vector<double> by_item) : scores_(std::move(by_item)) {}
  std::size_t item_count() const { return scores_.size(); }
  double operator[](ItemId item) const { return scores_[item - 1]; }
  double at(ItemId item) const;
  double probability(ItemId item) const { return sigmoid(at(item)); }
  // Index j holds the score of item j + 1.
  std::span<const double> values() const { return scores_; }

 private:
  std::vector<double> scores_;
};

ItemScores forward(const ModelParams& params, const DenseMatrix& embedded);
ItemScores score_sequence(const ModelParams& params,
                          const InteractionSequence& seq);
ItemScores scores_from_hidden(const ModelParams& params,
                              std::span<const double> hidden_row);

// Backprop through f_m. Accumulates block gradients into `grad` and returns
// dL/d(embedded input).
DenseMatrix backprop_block(const ModelParams& params, const ForwardCache& cache,
                           const DenseMatrix& d_hidden, BlockTensors& grad);

// Adds d_embedded rows into the E and P rows that produced them.
void scatter_embedding_grad(const ModelParams& params,
                            const InteractionSequence& seq,
                            const DenseMatrix& d_embedded,
                            EmbeddingTensors& grad);

// One BCE term: the score of `item` read from the hidden state at `position`
// of the input sequence, against `label` (1 positive, 0 negative).
struct BceTerm {
  int position = 0;
  ItemId item = kPaddingItem;
  double label = 1.0;
};

// Mean clamped binary cross-entropy over `terms`. When `grad` is non-null the
// exact gradient is accumulated into it.
double bce_loss(const ModelParams& params, const InteractionSequence& input,
                std::span<const BceTerm> terms, GradientUpdate* grad = nullptr);

struct LocalBatch {
  InteractionSequence input;  // model input, length <= max_len
  std::vector<BceTerm> terms;

  std::size_t positive_count() const;
  std::size_t negative_count() const { return terms.size() - positive_count(); }
};

// negatives_per_positive == kAllNegatives uses every non-interacted item.
inline constexpr int kAllNegatives = -1;

// Next-item pairs over every prefix of the (most recent max_len + 1 items of
// the) history, plus sampled negatives absent from the full history.
LocalBatch make_local_batch(const ModelDims& dims,
                            const InteractionSequence& history,
                            int negatives_per_positive, SeededRng& rng);

double local_loss(const ModelParams& params, const LocalBatch& batch);
GradientUpdate local_gradient(const ModelParams& params, const LocalBatch& batch,
                              double* loss = nullptr);

// Softmax cross-entropy of the last-position scores with class `target`.
double softmax_ce_loss(const ModelParams& params, const DenseMatrix& embedded,
                       ItemId target);
DenseMatrix grad_wrt_input_embeddings(const ModelParams& params,
                                      const DenseMatrix& embedded,
                                      ItemId target);

// Re-applies the padding invariant (row 0 of E is zero).
void zero_padding_row(ModelParams& params);

}  // namespace fedseq

#endif  // FEDSEQ_SEQREC_H_
