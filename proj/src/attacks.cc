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
#include "fedseq/attacks.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace fedseq {

std::string_view to_string(AttackMethod method) {
  switch (method) {
    case AttackMethod::kNone:
      return "none";
    case AttackMethod::kRandom:
      return "ra";
    case AttackMethod::kExplicitBoost:
      return "eb";
    case AttackMethod::kAra:
      return "a-ra";
    case AttackMethod::kDvFsr:
      return "dv-fsr";
    case AttackMethod::kCFsr:
      return "c-fsr";
    case AttackMethod::kSFsr:
      return "s-fsr";
  }
  return "unknown";
}

AttackMethod parse_attack_method(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  std::replace(lower.begin(), lower.end(), '_', '-');
  if (lower == "none") return AttackMethod::kNone;
  if (lower == "ra") return AttackMethod::kRandom;
  if (lower == "eb") return AttackMethod::kExplicitBoost;
  if (lower == "a-ra" || lower == "ara") return AttackMethod::kAra;
  if (lower == "dv-fsr" || lower == "dvfsr") return AttackMethod::kDvFsr;
  if (lower == "c-fsr" || lower == "cfsr") return AttackMethod::kCFsr;
  if (lower == "s-fsr" || lower == "sfsr") return AttackMethod::kSFsr;
  throw std::invalid_argument("unknown attack method '" + std::string(name) + "'");
}

void AttackConfig::validate(int item_count) const {
  if (method == AttackMethod::kNone) return;
  if (targets.empty()) throw std::invalid_argument("attack: target set is empty");
  for (ItemId t : targets) {
    if (t < 1 || t > item_count) {
      throw std::invalid_argument("attack: target " + std::to_string(t) +
                                  " outside 1.." + std::to_string(item_count));
    }
  }
  if (!(alpha >= 0.0)) throw std::invalid_argument("attack: alpha must be >= 0");
  if (!(tau >= -1.0 && tau <= 1.0)) {
    throw std::invalid_argument("attack: tau must be in [-1, 1]");
  }
  if (search_time < 1) throw std::invalid_argument("attack: search_time must be >= 1");
  if (negatives < 1) throw std::invalid_argument("attack: negatives must be >= 1");
  if (ra_length < 1) throw std::invalid_argument("attack: ra_length must be >= 1");
  if (ara_negatives < 0) throw std::invalid_argument("attack: ara_negatives must be >= 0");
}

InteractionSequence model_window(const ModelDims& dims,
                                 const InteractionSequence& history) {
  InteractionSequence out;
  out.user = history.user;
  const std::size_t keep =
      std::min(history.items.size(), static_cast<std::size_t>(dims.max_len));
  out.items.assign(history.items.end() - static_cast<std::ptrdiff_t>(keep),
                   history.items.end());
  return out;
}

namespace {

// Cosine similarity that reports zero-norm inputs instead of throwing.
std::optional<double> safe_cosine(std::span<const double> a,
                                  std::span<const double> b) {
  const double na = norm2(a);
  const double nb = norm2(b);
  if (na == 0.0 || nb == 0.0) return std::nullopt;
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

SubstitutionResult substitution(const ModelParams& params,
                                const InteractionSequence& seq, ItemId target,
                                const SubstitutionOptions& options) {
  if (seq.items.empty()) throw std::invalid_argument("substitution: empty sequence");
  if (target < 1 || target > params.dims.item_count) {
    throw std::out_of_range("substitution: invalid target");
  }
  if (options.search_time < 1) {
    throw std::invalid_argument("substitution: search_time must be >= 1");
  }
  const auto m = static_cast<std::size_t>(params.dims.item_count);
  const DenseMatrix& items = params.embedding.items;

  SubstitutionResult result{seq, {}};
  SubstitutionTrace& tr = result.trace;

  const DenseMatrix embedded = embed(params, seq);
  tr.gradient = grad_wrt_input_embeddings(params, embedded, target);
  const std::size_t n = seq.items.size();
  tr.row_norms.resize(n);
  for (std::size_t i = 0; i < n; ++i) tr.row_norms[i] = norm2(tr.gradient.row(i));
  tr.importance_ranking.resize(n);
  std::iota(tr.importance_ranking.begin(), tr.importance_ranking.end(), 0);
  std::stable_sort(tr.importance_ranking.begin(), tr.importance_ranking.end(),
                   [&](int a, int b) {
                     return tr.row_norms[static_cast<std::size_t>(a)] >
                            tr.row_norms[static_cast<std::size_t>(b)];
                   });
  tr.position = tr.importance_ranking.front();
  const auto pos = static_cast<std::size_t>(tr.position);
  tr.original_item = seq.items[pos];
  tr.replacement_item = tr.original_item;
  tr.original_score = forward(params, embedded)[target];
  tr.best_target_score = tr.original_score;

  // Sign step on the selected row, expressed in item-embedding space (the
  // position row is shared by every candidate at this slot).
  const auto original_row = items.row(static_cast<std::size_t>(tr.original_item));
  std::vector<double> perturbed(original_row.begin(), original_row.end());
  for (std::size_t j = 0; j < perturbed.size(); ++j) {
    perturbed[j] -= options.fgsm_step * sign(tr.gradient(pos, j));
  }

  tr.similarity.assign(m, 0.0);
  tr.constraint_mask.assign(m, 0);
  for (std::size_t j = 0; j < m; ++j) {
    const auto c = static_cast<ItemId>(j + 1);
    const auto row = items.row(j + 1);
    const auto sim = safe_cosine(perturbed, row);
    tr.similarity[j] = sim.value_or(0.0);
    if (options.exclude_target && c == target) continue;
    if (c == tr.original_item) {
      tr.constraint_mask[j] = 1;  // self-similarity is 1 by definition
      continue;
    }
    const auto to_original = safe_cosine(original_row, row);
    if (sim.has_value() && to_original.has_value() && *to_original >= options.tau) {
      tr.constraint_mask[j] = 1;
    }
  }

  for (std::size_t j = 0; j < m; ++j) {
    if (tr.constraint_mask[j]) tr.ranked_candidates.push_back(static_cast<ItemId>(j + 1));
  }
  std::stable_sort(tr.ranked_candidates.begin(), tr.ranked_candidates.end(),
                   [&](ItemId a, ItemId b) {
                     return tr.similarity[static_cast<std::size_t>(a) - 1] >
                            tr.similarity[static_cast<std::size_t>(b) - 1];
                   });
  if (tr.ranked_candidates.empty()) {
    tr.no_candidate = true;
    return result;
  }

  const std::size_t budget =
      std::min(tr.ranked_candidates.size(), static_cast<std::size_t>(options.search_time));
  double best = -std::numeric_limits<double>::infinity();
  InteractionSequence probe = seq;
  for (std::size_t r = 0; r < budget; ++r) {
    const ItemId c = tr.ranked_candidates[r];
    probe.items[pos] = c;
    const double score = score_sequence(params, probe)[target];
    tr.evaluated_scores.push_back(score);
    if (score > best) {
      best = score;
      result.sequence.items[pos] = c;
      tr.replacement_item = c;
    }
  }
  tr.best_target_score = best;
  return result;
}

double attack_loss(const ModelParams& params, const InteractionSequence& seq,
                   std::span<const ItemId> targets, GradientUpdate* grad) {
  if (targets.empty()) throw std::invalid_argument("attack_loss: empty target set");
  if (seq.items.empty()) throw std::invalid_argument("attack_loss: empty sequence");
  const int last = static_cast<int>(seq.items.size()) - 1;
  std::vector<BceTerm> terms;
  for (ItemId t : targets) terms.push_back({last, t, 1.0});
  return bce_loss(params, seq, terms, grad);
}

double contrastive_loss(std::span<const double> anchor,
                        std::span<const double> positive,
                        std::span<const std::vector<double>> negatives) {
  const double s_pos = cosine_sim(anchor, positive);
  std::vector<double> logits{s_pos};
  for (const auto& n : negatives) logits.push_back(cosine_sim(anchor, n));
  // -log softmax(logits)[0], via log-sum-exp
  const double mx = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double l : logits) total += std::exp(l - mx);
  return (mx + std::log(total)) - s_pos;
}

namespace {

// d cos(a, b) / d a
std::vector<double> cosine_grad(std::span<const double> a, std::span<const double> b,
                                double cos_ab) {
  const double na = norm2(a);
  const double nb = norm2(b);
  std::vector<double> g(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) {
    g[j] = b[j] / (na * nb) - cos_ab * a[j] / (na * na);
  }
  return g;
}

}  // namespace

ContrastiveGradient contrastive_loss_grad(
    std::span<const double> anchor, std::span<const double> positive,
    std::span<const std::vector<double>> negatives) {
  ContrastiveGradient out;
  out.loss = contrastive_loss(anchor, positive, negatives);
  std::vector<double> logits{cosine_sim(anchor, positive)};
  for (const auto& n : negatives) logits.push_back(cosine_sim(anchor, n));
  const std::vector<double> p = softmax(logits);

  out.d_anchor.assign(anchor.size(), 0.0);
  // dL/ds_pos = p_0 - 1, dL/ds_neg_i = p_i
  const double w_pos = p[0] - 1.0;
  axpy(w_pos, cosine_grad(anchor, positive, logits[0]), out.d_anchor);
  out.d_positive = cosine_grad(positive, anchor, logits[0]);
  for (double& v : out.d_positive) v *= w_pos;
  for (std::size_t i = 0; i < negatives.size(); ++i) {
    const double w = p[i + 1];
    axpy(w, cosine_grad(anchor, negatives[i], logits[i + 1]), out.d_anchor);
    std::vector<double> dn = cosine_grad(negatives[i], anchor, logits[i + 1]);
    for (double& v : dn) v *= w;
    out.d_negatives.push_back(std::move(dn));
  }
  return out;
}

double embedding_contrastive_loss(const ModelParams& params,
                                  const InteractionSequence& seq,
                                  std::span<const ItemId> targets,
                                  std::span<const ItemId> negatives,
                                  GradientUpdate* grad) {
  if (targets.empty()) throw std::invalid_argument("contrastive: empty target set");
  validate_sequence(params.dims, seq);
  const DenseMatrix& items = params.embedding.items;
  const auto d = static_cast<std::size_t>(params.dims.dim);
  const double inv_len = 1.0 / static_cast<double>(seq.items.size());

  std::vector<double> positive(d, 0.0);
  for (ItemId x : seq.items) axpy(inv_len, items.row(static_cast<std::size_t>(x)), positive);
  std::vector<std::vector<double>> neg_vectors;
  for (ItemId n : negatives) {
    if (n < 1 || n > params.dims.item_count) {
      throw std::out_of_range("contrastive: negative item out of range");
    }
    const auto row = items.row(static_cast<std::size_t>(n));
    neg_vectors.emplace_back(row.begin(), row.end());
  }

  const double inv_targets = 1.0 / static_cast<double>(targets.size());
  double total = 0.0;
  for (ItemId t : targets) {
    if (t < 1 || t > params.dims.item_count) {
      throw std::out_of_range("contrastive: target out of range");
    }
    const auto anchor = items.row(static_cast<std::size_t>(t));
    if (grad == nullptr) {
      total += contrastive_loss(anchor, positive, neg_vectors);
      continue;
    }
    const ContrastiveGradient g = contrastive_loss_grad(anchor, positive, neg_vectors);
    total += g.loss;
    DenseMatrix& gi = grad->g_embedding.items;
    axpy(inv_targets, g.d_anchor, gi.row(static_cast<std::size_t>(t)));
    for (ItemId x : seq.items) {
      axpy(inv_targets * inv_len, g.d_positive, gi.row(static_cast<std::size_t>(x)));
    }
    for (std::size_t i = 0; i < negatives.size(); ++i) {
      axpy(inv_targets, g.d_negatives[i], gi.row(static_cast<std::size_t>(negatives[i])));
    }
  }
  return total * inv_targets;
}

std::vector<ItemId> sample_non_interacted(int item_count,
                                          const InteractionSequence& history,
                                          std::span<const ItemId> targets,
                                          int count, SeededRng& rng) {
  std::vector<char> blocked(static_cast<std::size_t>(item_count) + 1, 0);
  for (ItemId x : history.items) {
    if (x >= 1 && x <= item_count) blocked[static_cast<std::size_t>(x)] = 1;
  }
  for (ItemId t : targets) {
    if (t >= 1 && t <= item_count) blocked[static_cast<std::size_t>(t)] = 1;
  }
  std::vector<ItemId> pool;
  for (ItemId j = 1; j <= item_count; ++j) {
    if (!blocked[static_cast<std::size_t>(j)]) pool.push_back(j);
  }
  const auto k = std::min<std::uint64_t>(static_cast<std::uint64_t>(std::max(count, 0)),
                                         pool.size());
  std::vector<ItemId> out;
  for (std::uint64_t idx : rng.sample_without_replacement(pool.size(), k)) {
    out.push_back(pool[idx]);
  }
  return out;
}

GradientUpdate poison_gradient(const ModelParams& params,
                               const InteractionSequence& history,
                               const AttackConfig& cfg, const PoisonRecipe& recipe,
                               SeededRng& rng, PoisonDetails* details) {
  if (cfg.targets.empty()) throw std::invalid_argument("poison: empty target set");
  const InteractionSequence x = model_window(params.dims, history);
  validate_sequence(params.dims, x);

  PoisonDetails local;
  PoisonDetails& info = details != nullptr ? *details : local;
  info = PoisonDetails{};
  info.poisoned_sequence = x;

  GradientUpdate total = GradientUpdate::zeros(params.dims);
  if (recipe.attack_term) {
    if (recipe.substitute) {
      // Multi-target sets substitute against the first target.
      SubstitutionResult sub = substitution(
          params, x, cfg.targets.front(),
          {cfg.tau, cfg.search_time, cfg.fgsm_step, cfg.exclude_target_candidates});
      info.poisoned_sequence = std::move(sub.sequence);
      info.trace = std::move(sub.trace);
    }
    if (recipe.bce_negatives > 0) {
      info.bce_negatives = sample_non_interacted(params.dims.item_count, history,
                                                 cfg.targets, recipe.bce_negatives, rng);
    }
    const int last = static_cast<int>(info.poisoned_sequence.items.size()) - 1;
    std::vector<BceTerm> terms;
    for (ItemId t : cfg.targets) terms.push_back({last, t, 1.0});
    for (ItemId n : info.bce_negatives) terms.push_back({last, n, 0.0});
    info.attack_loss = bce_loss(params, info.poisoned_sequence, terms, &total);
  }
  if (recipe.contrastive_term) {
    info.contrastive_negatives = sample_non_interacted(
        params.dims.item_count, history, cfg.targets, cfg.negatives, rng);
    GradientUpdate con = GradientUpdate::zeros(params.dims);
    info.contrastive_loss = embedding_contrastive_loss(
        params, x, cfg.targets, info.contrastive_negatives, &con);
    total.add(con);
  }
  info.total_loss = info.attack_loss + info.contrastive_loss;
  total.scale(cfg.alpha);
  return total;
}

GradientUpdate dvfsr_update(const ModelParams& params,
                            const InteractionSequence& history,
                            const AttackConfig& cfg, SeededRng& rng,
                            PoisonDetails* details) {
  PoisonRecipe recipe;
  switch (cfg.method) {
    case AttackMethod::kDvFsr:
      break;
    case AttackMethod::kSFsr:
      recipe.contrastive_term = false;
      break;
    case AttackMethod::kCFsr:
      recipe.substitute = false;
      recipe.attack_term = false;
      break;
    default:
      throw std::invalid_argument("dvfsr_update: method must be dv-fsr, s-fsr or c-fsr");
  }
  return poison_gradient(params, history, cfg, recipe, rng, details);
}

InteractionSequence ra_profile(int item_count, const AttackConfig& cfg,
                               SeededRng& rng) {
  if (cfg.targets.empty()) throw std::invalid_argument("ra: empty target set");
  const int fillers = cfg.ra_length / 2;
  std::vector<char> is_target(static_cast<std::size_t>(item_count) + 1, 0);
  for (ItemId t : cfg.targets) is_target[static_cast<std::size_t>(t)] = 1;
  std::vector<ItemId> pool;
  for (ItemId j = 1; j <= item_count; ++j) {
    if (!is_target[static_cast<std::size_t>(j)]) pool.push_back(j);
  }
  if (pool.size() < static_cast<std::size_t>(fillers)) {
    throw std::invalid_argument("ra: vocabulary too small for the filler count");
  }
  const auto picks = rng.sample_without_replacement(pool.size(),
                                                    static_cast<std::uint64_t>(fillers));
  InteractionSequence profile;
  profile.user = -1;
  std::size_t next_target = 0;
  std::size_t next_filler = 0;
  for (int i = 0; i < cfg.ra_length; ++i) {
    if (i % 2 == 0 || next_filler >= picks.size()) {
      profile.items.push_back(cfg.targets[next_target++ % cfg.targets.size()]);
    } else {
      profile.items.push_back(pool[picks[next_filler++]]);
    }
  }
  return profile;
}

GradientUpdate ra_update(const ModelParams& params, const AttackConfig& cfg,
                         SeededRng& rng, int negatives_per_positive,
                         InteractionSequence* profile) {
  InteractionSequence fake = ra_profile(params.dims.item_count, cfg, rng);
  if (fake.items.size() < 2) {
    if (profile != nullptr) *profile = fake;
    return GradientUpdate::zeros(params.dims);
  }
  const LocalBatch batch = make_local_batch(params.dims, fake, negatives_per_positive, rng);
  if (profile != nullptr) *profile = std::move(fake);
  return local_gradient(params, batch);
}

GradientUpdate eb_update(const ModelParams& params,
                         const InteractionSequence& history,
                         const AttackConfig& cfg) {
  SeededRng unused(0, "eb");
  return poison_gradient(params, history, cfg,
                         {.substitute = false, .attack_term = true,
                          .contrastive_term = false, .bce_negatives = 0},
                         unused);
}

GradientUpdate a_ra_update(const ModelParams& params,
                           const InteractionSequence& history,
                           const AttackConfig& cfg, SeededRng& rng) {
  const int negatives = cfg.ara_negatives * static_cast<int>(cfg.targets.size());
  return poison_gradient(params, history, cfg,
                         {.substitute = false, .attack_term = true,
                          .contrastive_term = false, .bce_negatives = negatives},
                         rng);
}

GradientUpdate poisoned_update(const ModelParams& params,
                               const InteractionSequence& history,
                               const AttackConfig& cfg, SeededRng& rng,
                               int negatives_per_positive, PoisonDetails* details) {
  switch (cfg.method) {
    case AttackMethod::kNone:
      throw std::invalid_argument("poisoned_update: no attack configured");
    case AttackMethod::kRandom: {
      InteractionSequence profile;
      GradientUpdate g = ra_update(params, cfg, rng, negatives_per_positive, &profile);
      if (details != nullptr) {
        *details = PoisonDetails{};
        details->poisoned_sequence = std::move(profile);
      }
      return g;
    }
    case AttackMethod::kExplicitBoost:
      return poison_gradient(params, history, cfg,
                             {.substitute = false, .attack_term = true,
                              .contrastive_term = false, .bce_negatives = 0},
                             rng, details);
    case AttackMethod::kAra:
      return poison_gradient(
          params, history, cfg,
          {.substitute = false, .attack_term = true, .contrastive_term = false,
           .bce_negatives = cfg.ara_negatives * static_cast<int>(cfg.targets.size())},
          rng, details);
    case AttackMethod::kDvFsr:
    case AttackMethod::kCFsr:
    case AttackMethod::kSFsr:
      return dvfsr_update(params, history, cfg, rng, details);
  }
  throw std::logic_error("poisoned_update: unhandled method");
}

}  // namespace fedseq
