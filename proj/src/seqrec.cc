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
#include <numbers>
#include <stdexcept>
#include <string>

namespace fedseq {
namespace {

double gelu(double z) { return 0.5 * z * (1.0 + std::erf(z / std::numbers::sqrt2)); }

double gelu_grad(double z) {
  const double cdf = 0.5 * (1.0 + std::erf(z / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + z * pdf;
}

void add_row_vector(DenseMatrix& m, const DenseMatrix& bias) {
  for (std::size_t r = 0; r < m.rows(); ++r) axpy(1.0, bias.row(0), m.row(r));
}

void accumulate(DenseMatrix& dst, const DenseMatrix& src) {
  axpy(1.0, src.values(), dst.values());
}

void fill_uniform(DenseMatrix& m, double bound, SeededRng& rng) {
  for (double& v : m.values()) v = rng.uniform(-bound, bound);
}

}  // namespace

TensorRefs tensor_refs(EmbeddingTensors& e, BlockTensors& m) {
  return {{{"item_embeddings", &e.items},
           {"position_embeddings", &e.positions},
           {"attn_query", &m.w_q},
           {"attn_key", &m.w_k},
           {"attn_value", &m.w_v},
           {"ffn_w1", &m.w_1},
           {"ffn_b1", &m.b_1},
           {"ffn_w2", &m.w_2},
           {"ffn_b2", &m.b_2}}};
}

ConstTensorRefs tensor_refs(const EmbeddingTensors& e, const BlockTensors& m) {
  return {{{"item_embeddings", &e.items},
           {"position_embeddings", &e.positions},
           {"attn_query", &m.w_q},
           {"attn_key", &m.w_k},
           {"attn_value", &m.w_v},
           {"ffn_w1", &m.w_1},
           {"ffn_b1", &m.b_1},
           {"ffn_w2", &m.w_2},
           {"ffn_b2", &m.b_2}}};
}

namespace {

void allocate(const ModelDims& dims, EmbeddingTensors& e, BlockTensors& m) {
  if (dims.item_count < 1 || dims.dim < 1 || dims.ff_dim < 1 || dims.max_len < 1) {
    throw std::invalid_argument("ModelDims: all sizes must be positive");
  }
  const auto d = static_cast<std::size_t>(dims.dim);
  const auto ff = static_cast<std::size_t>(dims.ff_dim);
  e.items = DenseMatrix(static_cast<std::size_t>(dims.item_count) + 1, d);
  e.positions = DenseMatrix(static_cast<std::size_t>(dims.max_len), d);
  m.w_q = DenseMatrix(d, d);
  m.w_k = DenseMatrix(d, d);
  m.w_v = DenseMatrix(d, d);
  m.w_1 = DenseMatrix(d, ff);
  m.b_1 = DenseMatrix(1, ff);
  m.w_2 = DenseMatrix(ff, d);
  m.b_2 = DenseMatrix(1, d);
}

}  // namespace

ModelParams ModelParams::zeros(const ModelDims& dims) {
  ModelParams p;
  p.dims = dims;
  allocate(dims, p.embedding, p.model);
  return p;
}

ModelParams ModelParams::initialize(const ModelDims& dims, SeededRng& rng,
                                    double embedding_scale) {
  ModelParams p = zeros(dims);
  fill_uniform(p.embedding.items, embedding_scale, rng);
  fill_uniform(p.embedding.positions, embedding_scale, rng);
  const double d = dims.dim;
  const double ff = dims.ff_dim;
  const double square = std::sqrt(6.0 / (d + d));
  fill_uniform(p.model.w_q, square, rng);
  fill_uniform(p.model.w_k, square, rng);
  fill_uniform(p.model.w_v, square, rng);
  fill_uniform(p.model.w_1, std::sqrt(6.0 / (d + ff)), rng);
  fill_uniform(p.model.w_2, std::sqrt(6.0 / (d + ff)), rng);
  zero_padding_row(p);
  return p;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors()) n += t->size();
  return n;
}

bool ModelParams::all_finite() const {
  for (const auto& [name, t] : tensors()) {
    if (!t->all_finite()) return false;
  }
  return true;
}

GradientUpdate GradientUpdate::zeros(const ModelDims& dims) {
  GradientUpdate g;
  g.dims = dims;
  allocate(dims, g.g_embedding, g.g_model);
  return g;
}

void GradientUpdate::scale(double factor) {
  for (auto& [name, t] : tensors()) {
    for (double& v : t->values()) v *= factor;
  }
}

void GradientUpdate::add(const GradientUpdate& other, double factor) {
  auto mine = tensors();
  auto theirs = other.tensors();
  for (std::size_t i = 0; i < mine.size(); ++i) {
    if (mine[i].second->size() != theirs[i].second->size()) {
      throw std::invalid_argument("GradientUpdate::add: shape mismatch");
    }
    axpy(factor, theirs[i].second->values(), mine[i].second->values());
  }
}

void validate_sequence(const ModelDims& dims, const InteractionSequence& seq) {
  if (seq.items.empty()) throw std::invalid_argument("empty interaction sequence");
  if (seq.items.size() > static_cast<std::size_t>(dims.max_len)) {
    throw std::invalid_argument("sequence length " +
                                std::to_string(seq.items.size()) +
                                " exceeds max_len " + std::to_string(dims.max_len));
  }
  for (ItemId item : seq.items) {
    if (item < 1 || item > dims.item_count) {
      throw std::out_of_range("item id " + std::to_string(item) +
                              " outside vocabulary 1.." +
                              std::to_string(dims.item_count));
    }
  }
}

DenseMatrix embed(const ModelParams& params, const InteractionSequence& seq) {
  validate_sequence(params.dims, seq);
  const std::size_t n = seq.items.size();
  DenseMatrix out(n, static_cast<std::size_t>(params.dims.dim));
  for (std::size_t i = 0; i < n; ++i) {
    auto row = out.row(i);
    axpy(1.0, params.embedding.items.row(static_cast<std::size_t>(seq.items[i])), row);
    axpy(1.0,
         params.embedding.positions.row(
             static_cast<std::size_t>(position_row(params.dims, n, i))),
         row);
  }
  return out;
}

ForwardCache encode(const ModelParams& params, const DenseMatrix& embedded) {
  const auto d = static_cast<std::size_t>(params.dims.dim);
  if (embedded.cols() != d || embedded.rows() == 0) {
    throw std::invalid_argument("encode: embedded input must be len x d");
  }
  const std::size_t n = embedded.rows();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  const BlockTensors& w = params.model;

  ForwardCache c;
  c.input = embedded;
  c.q = matmul(embedded, w.w_q);
  c.k = matmul(embedded, w.w_k);
  c.v = matmul(embedded, w.w_v);

  c.attention = DenseMatrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> logits(i + 1);
    for (std::size_t j = 0; j <= i; ++j) {
      logits[j] = dot(c.q.row(i), c.k.row(j)) * inv_sqrt_d;
    }
    const std::vector<double> probs = softmax(logits);
    for (std::size_t j = 0; j <= i; ++j) c.attention(i, j) = probs[j];
  }

  c.residual = matmul(c.attention, c.v);
  accumulate(c.residual, embedded);

  c.pre_act = matmul(c.residual, w.w_1);
  add_row_vector(c.pre_act, w.b_1);
  c.act = c.pre_act;
  for (double& z : c.act.values()) z = gelu(z);

  c.hidden = matmul(c.act, w.w_2);
  add_row_vector(c.hidden, w.b_2);
  accumulate(c.hidden, c.residual);
  return c;
}

double ItemScores::at(ItemId item) const {
  if (item < 1 || static_cast<std::size_t>(item) > scores_.size()) {
    throw std::out_of_range("ItemScores: item " + std::to_string(item) +
                            " not scored");
  }
  return scores_[static_cast<std::size_t>(item) - 1];
}

ItemScores scores_from_hidden(const ModelParams& params,
                              std::span<const double> hidden_row) {
  const auto m = static_cast<std::size_t>(params.dims.item_count);
  std::vector<double> s(m);
  for (std::size_t j = 0; j < m; ++j) {
    s[j] = dot(hidden_row, params.embedding.items.row(j + 1));
  }
  return ItemScores(std::move(s));
}

ItemScores forward(const ModelParams& params, const DenseMatrix& embedded) {
  const ForwardCache c = encode(params, embedded);
  return scores_from_hidden(params, c.hidden.row(c.hidden.rows() - 1));
}

ItemScores score_sequence(const ModelParams& params,
                          const InteractionSequence& seq) {
  return forward(params, embed(params, seq));
}

DenseMatrix backprop_block(const ModelParams& params, const ForwardCache& c,
                           const DenseMatrix& d_hidden, BlockTensors& grad) {
  const BlockTensors& w = params.model;
  const std::size_t n = c.input.rows();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(params.dims.dim));

  // hidden = residual + act * W2 + b2
  DenseMatrix d_residual = d_hidden;
  accumulate(grad.w_2, matmul_tn(c.act, d_hidden));
  for (std::size_t r = 0; r < n; ++r) axpy(1.0, d_hidden.row(r), grad.b_2.row(0));

  DenseMatrix d_pre = matmul_nt(d_hidden, w.w_2);
  for (std::size_t i = 0; i < d_pre.size(); ++i) {
    d_pre.values()[i] *= gelu_grad(c.pre_act.values()[i]);
  }
  accumulate(grad.w_1, matmul_tn(c.residual, d_pre));
  for (std::size_t r = 0; r < n; ++r) axpy(1.0, d_pre.row(r), grad.b_1.row(0));
  accumulate(d_residual, matmul_nt(d_pre, w.w_1));

  // residual = input + A * V
  DenseMatrix d_input = d_residual;
  const DenseMatrix d_attn = matmul_nt(d_residual, c.v);
  const DenseMatrix d_v = matmul_tn(c.attention, d_residual);

  DenseMatrix d_logits(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double weighted = 0.0;
    for (std::size_t j = 0; j <= i; ++j) weighted += c.attention(i, j) * d_attn(i, j);
    for (std::size_t j = 0; j <= i; ++j) {
      d_logits(i, j) = c.attention(i, j) * (d_attn(i, j) - weighted) * inv_sqrt_d;
    }
  }
  const DenseMatrix d_q = matmul(d_logits, c.k);
  const DenseMatrix d_k = matmul_tn(d_logits, c.q);

  accumulate(grad.w_q, matmul_tn(c.input, d_q));
  accumulate(grad.w_k, matmul_tn(c.input, d_k));
  accumulate(grad.w_v, matmul_tn(c.input, d_v));
  accumulate(d_input, matmul_nt(d_q, w.w_q));
  accumulate(d_input, matmul_nt(d_k, w.w_k));
  accumulate(d_input, matmul_nt(d_v, w.w_v));
  return d_input;
}

void scatter_embedding_grad(const ModelParams& params,
                            const InteractionSequence& seq,
                            const DenseMatrix& d_embedded,
                            EmbeddingTensors& grad) {
  const std::size_t n = seq.items.size();
  for (std::size_t i = 0; i < n; ++i) {
    axpy(1.0, d_embedded.row(i),
         grad.items.row(static_cast<std::size_t>(seq.items[i])));
    axpy(1.0, d_embedded.row(i),
         grad.positions.row(
             static_cast<std::size_t>(position_row(params.dims, n, i))));
  }
}

double bce_loss(const ModelParams& params, const InteractionSequence& input,
                std::span<const BceTerm> terms, GradientUpdate* grad) {
  if (terms.empty()) throw std::invalid_argument("bce_loss: empty batch");
  const DenseMatrix embedded = embed(params, input);
  const ForwardCache c = encode(params, embedded);
  const auto n = static_cast<int>(input.items.size());
  const double inv_count = 1.0 / static_cast<double>(terms.size());

  DenseMatrix d_hidden(c.hidden.rows(), c.hidden.cols());
  double total = 0.0;
  for (const BceTerm& t : terms) {
    if (t.position < 0 || t.position >= n) {
      throw std::out_of_range("bce_loss: term position out of range");
    }
    if (t.item < 1 || t.item > params.dims.item_count) {
      throw std::out_of_range("bce_loss: term item out of range");
    }
    const auto pos = static_cast<std::size_t>(t.position);
    const auto item = static_cast<std::size_t>(t.item);
    const double s = dot(c.hidden.row(pos), params.embedding.items.row(item));
    const double p = sigmoid(s);
    const double p_pos = std::clamp(p, kProbFloor, 1.0 - kProbFloor);
    total -= t.label * std::log(p_pos) + (1.0 - t.label) * std::log(1.0 - p_pos);
    if (grad != nullptr) {
      // d/ds of the clamped loss; zero where the clamp is active.
      const bool clamped = p < kProbFloor || p > 1.0 - kProbFloor;
      const double g = clamped ? 0.0 : (p - t.label) * inv_count;
      if (g != 0.0) {
        axpy(g, params.embedding.items.row(item), d_hidden.row(pos));
        axpy(g, c.hidden.row(pos), grad->g_embedding.items.row(item));
      }
    }
  }
  if (grad != nullptr) {
    const DenseMatrix d_input = backprop_block(params, c, d_hidden, grad->g_model);
    scatter_embedding_grad(params, input, d_input, grad->g_embedding);
  }
  return total * inv_count;
}

std::size_t LocalBatch::positive_count() const {
  return static_cast<std::size_t>(
      std::count_if(terms.begin(), terms.end(),
                    [](const BceTerm& t) { return t.label == 1.0; }));
}

LocalBatch make_local_batch(const ModelDims& dims,
                            const InteractionSequence& history,
                            int negatives_per_positive, SeededRng& rng) {
  if (history.items.size() < 2) {
    throw std::invalid_argument("make_local_batch: need at least 2 items");
  }
  const std::size_t window = std::min(history.items.size(),
                                      static_cast<std::size_t>(dims.max_len) + 1);
  const auto first = history.items.end() - static_cast<std::ptrdiff_t>(window);

  LocalBatch batch;
  batch.input.user = history.user;
  batch.input.items.assign(first, history.items.end() - 1);
  validate_sequence(dims, batch.input);

  std::vector<char> seen(static_cast<std::size_t>(dims.item_count) + 1, 0);
  for (ItemId item : history.items) {
    if (item >= 1 && item <= dims.item_count) seen[static_cast<std::size_t>(item)] = 1;
  }
  std::vector<ItemId> pool;
  for (ItemId j = 1; j <= dims.item_count; ++j) {
    if (!seen[static_cast<std::size_t>(j)]) pool.push_back(j);
  }

  const std::size_t n = batch.input.items.size();
  for (std::size_t i = 0; i < n; ++i) {
    const ItemId next = *(first + static_cast<std::ptrdiff_t>(i) + 1);
    batch.terms.push_back({static_cast<int>(i), next, 1.0});
    if (negatives_per_positive == kAllNegatives) {
      for (ItemId neg : pool) batch.terms.push_back({static_cast<int>(i), neg, 0.0});
    } else if (negatives_per_positive > 0 && !pool.empty()) {
      const auto k = std::min<std::uint64_t>(
          static_cast<std::uint64_t>(negatives_per_positive), pool.size());
      for (std::uint64_t idx : rng.sample_without_replacement(pool.size(), k)) {
        batch.terms.push_back({static_cast<int>(i), pool[idx], 0.0});
      }
    }
  }
  return batch;
}

double local_loss(const ModelParams& params, const LocalBatch& batch) {
  return bce_loss(params, batch.input, batch.terms, nullptr);
}

GradientUpdate local_gradient(const ModelParams& params, const LocalBatch& batch,
                              double* loss) {
  GradientUpdate g = GradientUpdate::zeros(params.dims);
  const double value = bce_loss(params, batch.input, batch.terms, &g);
  if (loss != nullptr) *loss = value;
  return g;
}

double softmax_ce_loss(const ModelParams& params, const DenseMatrix& embedded,
                       ItemId target) {
  if (target < 1 || target > params.dims.item_count) {
    throw std::out_of_range("softmax_ce_loss: invalid target");
  }
  const ItemScores scores = forward(params, embedded);
  const std::vector<double> p = softmax(scores.values());
  return -std::log(std::max(p[static_cast<std::size_t>(target) - 1], 1e-300));
}

DenseMatrix grad_wrt_input_embeddings(const ModelParams& params,
                                      const DenseMatrix& embedded,
                                      ItemId target) {
  if (target < 1 || target > params.dims.item_count) {
    throw std::out_of_range("grad_wrt_input_embeddings: invalid target " +
                            std::to_string(target));
  }
  const ForwardCache c = encode(params, embedded);
  const std::size_t last = c.hidden.rows() - 1;
  const ItemScores scores = scores_from_hidden(params, c.hidden.row(last));
  std::vector<double> g = softmax(scores.values());
  g[static_cast<std::size_t>(target) - 1] -= 1.0;

  DenseMatrix d_hidden(c.hidden.rows(), c.hidden.cols());
  for (std::size_t j = 0; j < g.size(); ++j) {
    axpy(g[j], params.embedding.items.row(j + 1), d_hidden.row(last));
  }
  BlockTensors scratch = GradientUpdate::zeros(params.dims).g_model;
  return backprop_block(params, c, d_hidden, scratch);
}

void zero_padding_row(ModelParams& params) {
  for (double& v : params.embedding.items.row(0)) v = 0.0;
}

}  // namespace fedseq
