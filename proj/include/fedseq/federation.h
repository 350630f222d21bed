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
// FedAvg-style round loop over simulated clients.
#ifndef FEDSEQ_FEDERATION_H_
#define FEDSEQ_FEDERATION_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedseq/attacks.h"
#include "fedseq/defense.h"
#include "fedseq/evalmetrics.h"
#include "fedseq/numerics.h"
#include "fedseq/seqrec.h"

namespace fedseq {

// Canonical order is that of tensor_refs(): item_embeddings,
// position_embeddings, attn_query, attn_key, attn_value, ffn_w1, ffn_b1,
// ffn_w2, ffn_b2; each tensor row-major.
std::vector<double> flatten(const GradientUpdate& update);
GradientUpdate unflatten(std::span<const double> values, const ModelDims& dims);
std::size_t flat_size(const ModelDims& dims);

enum class ClientRole { kBenign, kMalicious };

struct ClientState {
  std::int64_t user_id = 0;
  ClientRole role = ClientRole::kBenign;
  InteractionSequence sequence;  // local training history
  bool always_participate = false;
};

struct RoundConfig {
  int clients_per_round = 30;
  double learning_rate = 1.0;
  int rounds = 200;
  int eval_every = 10;
  std::uint64_t seed = 42;
  int local_steps = 1;
  int negatives_per_positive = 1;  // kAllNegatives for the full complement
  // Appends clients flagged always_participate when they were not sampled.
  bool always_participate_mode = false;

  void validate(std::size_t population) const;
};

// Uniform sample without replacement, returned as ascending population
// indices.
std::vector<std::size_t> sample_clients(std::span<const ClientState> population,
                                        int n, SeededRng& rng,
                                        bool always_participate_mode = false);

struct RoundLog {
  int round = 0;
  double loss = 0.0;  // mean local loss of the sampled benign clients
  int participants = 0;
  int malicious_participants = 0;
  bool aggregator_converged = true;
  std::optional<EvalMetrics> metrics;
  std::optional<double> wall_time_s;
};

struct PoisonRecord {
  std::size_t client = 0;  // population index
  PoisonDetails details;
};

struct RoundResult {
  ModelParams params;
  RoundLog log;
  std::vector<PoisonRecord> poison;  // filled when record_poison is set
};

// Named RNG streams used by run_round, all derived from RoundConfig::seed.
inline constexpr std::string_view kSamplingStream = "client-sampling";
inline constexpr std::string_view kNegativeStream = "negative-sampling";
inline constexpr std::string_view kAttackStream = "attack-negatives";

// One benign client's upload: local_steps SGD steps on its batch, uploaded
// as (theta_0 - theta_k) / learning_rate (the plain gradient when k == 1).
GradientUpdate benign_update(const ModelParams& params, const ClientState& client,
                             const RoundConfig& cfg, SeededRng& rng,
                             double* loss = nullptr);

// `round` is 1-based. Aggregator failures are rethrown with the round index.
RoundResult run_round(const ModelParams& params,
                      std::span<const ClientState> clients,
                      const AttackConfig& attack, const Aggregator& aggregator,
                      const RoundConfig& cfg, int round,
                      bool record_poison = false);

// theta <- theta - lr * g, then re-zero the padding row.
void apply_update(ModelParams& params, const GradientUpdate& g, double learning_rate);

std::string round_log_json(const RoundLog& log);

}  // namespace fedseq

#endif  // FEDSEQ_FEDERATION_H_
