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
#include "fedseq/federation.h"

#include <algorithm>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

namespace fedseq {

std::size_t flat_size(const ModelDims& dims) {
  const auto m = static_cast<std::size_t>(dims.item_count) + 1;
  const auto d = static_cast<std::size_t>(dims.dim);
  const auto ff = static_cast<std::size_t>(dims.ff_dim);
  const auto l = static_cast<std::size_t>(dims.max_len);
  return m * d + l * d + 3 * d * d + d * ff + ff + ff * d + d;
}

std::vector<double> flatten(const GradientUpdate& update) {
  std::vector<double> out;
  out.reserve(flat_size(update.dims));
  for (const auto& [name, t] : update.tensors()) {
    out.insert(out.end(), t->values().begin(), t->values().end());
  }
  return out;
}

GradientUpdate unflatten(std::span<const double> values, const ModelDims& dims) {
  if (values.size() != flat_size(dims)) {
    throw std::invalid_argument("unflatten: expected " + std::to_string(flat_size(dims)) +
                                " values, got " + std::to_string(values.size()));
  }
  GradientUpdate g = GradientUpdate::zeros(dims);
  std::size_t offset = 0;
  for (auto& [name, t] : g.tensors()) {
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(offset), t->size(),
                t->values().begin());
    offset += t->size();
  }
  return g;
}

void RoundConfig::validate(std::size_t population) const {
  if (clients_per_round < 1) throw std::invalid_argument("clients_per_round must be >= 1");
  if (static_cast<std::size_t>(clients_per_round) > population) {
    throw std::invalid_argument("clients_per_round exceeds the client population");
  }
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (rounds < 0) throw std::invalid_argument("rounds must be >= 0");
  if (eval_every < 1) throw std::invalid_argument("eval_every must be >= 1");
  if (local_steps < 1) throw std::invalid_argument("local_steps must be >= 1");
  if (negatives_per_positive < 0 && negatives_per_positive != kAllNegatives) {
    throw std::invalid_argument("negatives_per_positive must be >= 0 or 'all'");
  }
}

std::vector<std::size_t> sample_clients(std::span<const ClientState> population,
                                        int n, SeededRng& rng,
                                        bool always_participate_mode) {
  if (n < 0 || static_cast<std::size_t>(n) > population.size()) {
    throw std::invalid_argument("sample_clients: n = " + std::to_string(n) +
                                " exceeds population " +
                                std::to_string(population.size()));
  }
  std::vector<std::size_t> picked;
  for (std::uint64_t idx : rng.sample_without_replacement(
           population.size(), static_cast<std::uint64_t>(n))) {
    picked.push_back(static_cast<std::size_t>(idx));
  }
  std::sort(picked.begin(), picked.end());
  if (always_participate_mode) {
    for (std::size_t i = 0; i < population.size(); ++i) {
      if (population[i].always_participate &&
          !std::binary_search(picked.begin(), picked.end(), i)) {
        picked.push_back(i);
      }
    }
    std::sort(picked.begin(), picked.end());
  }
  return picked;
}

void apply_update(ModelParams& params, const GradientUpdate& g, double learning_rate) {
  auto dst = params.tensors();
  auto src = g.tensors();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    axpy(-learning_rate, src[i].second->values(), dst[i].second->values());
  }
  zero_padding_row(params);
}

GradientUpdate benign_update(const ModelParams& params, const ClientState& client,
                             const RoundConfig& cfg, SeededRng& rng, double* loss) {
  if (client.sequence.items.size() < 2) {
    if (loss != nullptr) *loss = 0.0;
    return GradientUpdate::zeros(params.dims);
  }
  const LocalBatch batch =
      make_local_batch(params.dims, client.sequence, cfg.negatives_per_positive, rng);
  if (cfg.local_steps == 1) return local_gradient(params, batch, loss);

  ModelParams local = params;
  for (int step = 0; step < cfg.local_steps; ++step) {
    double step_loss = 0.0;
    const GradientUpdate g = local_gradient(local, batch, &step_loss);
    if (step == 0 && loss != nullptr) *loss = step_loss;
    apply_update(local, g, cfg.learning_rate);
  }
  GradientUpdate delta = GradientUpdate::zeros(params.dims);
  auto out = delta.tensors();
  auto before = params.tensors();
  auto after = local.tensors();
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto o = out[i].second->values();
    auto b = before[i].second->values();
    auto a = after[i].second->values();
    for (std::size_t j = 0; j < o.size(); ++j) o[j] = (b[j] - a[j]) / cfg.learning_rate;
  }
  return delta;
}

RoundResult run_round(const ModelParams& params,
                      std::span<const ClientState> clients,
                      const AttackConfig& attack, const Aggregator& aggregator,
                      const RoundConfig& cfg, int round,
                      bool record_poison) {
  cfg.validate(clients.size());
  const auto r = static_cast<std::uint64_t>(round);
  SeededRng sampler = SeededRng(cfg.seed, kSamplingStream).fork(r);
  const std::vector<std::size_t> selected =
      sample_clients(clients, cfg.clients_per_round, sampler, cfg.always_participate_mode);

  RoundResult result{params, {}};
  RoundLog& log = result.log;
  log.round = round;
  log.participants = static_cast<int>(selected.size());

  // Collected in ascending client order; the aggregator sees vectors only.
  std::vector<std::vector<double>> uploads;
  uploads.reserve(selected.size());
  double loss_sum = 0.0;
  int benign = 0;
  for (std::size_t idx : selected) {
    const ClientState& client = clients[idx];
    const auto id = static_cast<std::uint64_t>(idx);
    if (client.role == ClientRole::kMalicious && attack.method != AttackMethod::kNone) {
      SeededRng rng = SeededRng(cfg.seed, kAttackStream).fork(r).fork(id);
      PoisonDetails details;
      uploads.push_back(flatten(poisoned_update(params, client.sequence, attack, rng,
                                                cfg.negatives_per_positive,
                                                record_poison ? &details : nullptr)));
      if (record_poison) result.poison.push_back({idx, std::move(details)});
      ++log.malicious_participants;
    } else {
      SeededRng rng = SeededRng(cfg.seed, kNegativeStream).fork(r).fork(id);
      double loss = 0.0;
      uploads.push_back(flatten(benign_update(params, client, cfg, rng, &loss)));
      loss_sum += loss;
      ++benign;
    }
  }
  log.loss = benign > 0 ? loss_sum / benign : 0.0;

  const std::vector<double> weights(uploads.size(), 1.0);
  AggregationResult agg;
  try {
    agg = aggregator(uploads, weights);
  } catch (const std::exception& e) {
    throw std::runtime_error("round " + std::to_string(round) +
                             ": aggregation failed: " + e.what());
  }
  if (agg.median.has_value()) log.aggregator_converged = agg.median->converged;
  apply_update(result.params, unflatten(agg.aggregate, params.dims), cfg.learning_rate);
  return result;
}

std::string round_log_json(const RoundLog& log) {
  nlohmann::ordered_json j;
  j["round"] = log.round;
  j["loss"] = log.loss;
  j["participants"] = log.participants;
  j["malicious_participants"] = log.malicious_participants;
  j["aggregator_converged"] = log.aggregator_converged;
  if (log.metrics.has_value()) {
    j["HR@10"] = log.metrics->hr;
    j["NDCG@10"] = log.metrics->ndcg;
    for (const auto& er : log.metrics->exposure) {
      const std::string key = "ER@" + std::to_string(er.k);
      if (er.defined) {
        j[key] = er.value;
      } else {
        j[key] = nullptr;
      }
    }
  }
  if (log.wall_time_s.has_value()) j["wall_time_s"] = *log.wall_time_s;
  return j.dump();
}

}  // namespace fedseq
