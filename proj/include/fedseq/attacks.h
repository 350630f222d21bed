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
// Poisoned-update generators for malicious clients.
//
//   ra      fake profile mixing targets and random fillers, honest gradient
//   eb      boosts target probabilities on the client's own sequence
//   a-ra    eb plus sampled non-interacted negatives (BCE shape)
//   dv-fsr  one-item substitution + target BCE + embedding contrastive loss
//   s-fsr   dv-fsr without the contrastive term
//   c-fsr   contrastive term only
//
// Every generator returns a GradientUpdate with the benign layout.
#ifndef FEDSEQ_ATTACKS_H_
#define FEDSEQ_ATTACKS_H_

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedseq/numerics.h"
#include "fedseq/seqrec.h"

namespace fedseq {

enum class AttackMethod { kNone, kRandom, kExplicitBoost, kAra, kDvFsr, kCFsr, kSFsr };

std::string_view to_string(AttackMethod method);
AttackMethod parse_attack_method(std::string_view name);

struct AttackConfig {
  AttackMethod method = AttackMethod::kNone;
  std::vector<ItemId> targets;
  double alpha = 1.0;       // scale of the uploaded poisoned gradient
  double tau = 0.5;         // min cosine similarity original -> replacement
  int search_time = 9;      // T: candidates scored during substitution
  int negatives = 10;       // n: contrastive negatives
  double fgsm_step = 1.0;   // epsilon of the sign step
  bool exclude_target_candidates = true;
  int ra_length = 20;       // fake profile length for ra
  int ara_negatives = 1;    // sampled negatives per target for a-ra

  void validate(int item_count) const;
};

struct SubstitutionOptions {
  double tau = 0.5;
  int search_time = 9;
  double fgsm_step = 1.0;
  bool exclude_target = true;
};

struct SubstitutionTrace {
  DenseMatrix gradient;                 // dL_ce / d(embedded input)
  std::vector<double> row_norms;
  std::vector<int> importance_ranking;  // positions, most important first
  int position = -1;                    // replaced (or inspected) position
  ItemId original_item = kPaddingItem;
  ItemId replacement_item = kPaddingItem;
  std::vector<double> similarity;       // by item-1: cos(perturbed, E[c])
  std::vector<char> constraint_mask;    // by item-1: passes tau (and filters)
  std::vector<ItemId> ranked_candidates;  // surviving, best similarity first
  std::vector<double> evaluated_scores;   // f(x'')[t] of the top-T ranked
  double original_score = 0.0;          // f(x)[t]
  double best_target_score = 0.0;       // f(x')[t]
  bool no_candidate = false;

  bool changed() const { return replacement_item != original_item; }
};

struct SubstitutionResult {
  InteractionSequence sequence;
  SubstitutionTrace trace;
};

SubstitutionResult substitution(const ModelParams& params,
                                const InteractionSequence& seq, ItemId target,
                                const SubstitutionOptions& options);

// Mean over targets of -log(clamped sigmoid(f(x')[t])).
double attack_loss(const ModelParams& params, const InteractionSequence& seq,
                   std::span<const ItemId> targets, GradientUpdate* grad = nullptr);

struct ContrastiveGradient {
  double loss = 0.0;
  std::vector<double> d_anchor;
  std::vector<double> d_positive;
  std::vector<std::vector<double>> d_negatives;
};

// -log(e^{s_pos} / (e^{s_pos} + sum_i e^{s_neg_i})) over cosine similarities.
double contrastive_loss(std::span<const double> anchor,
                        std::span<const double> positive,
                        std::span<const std::vector<double>> negatives);
ContrastiveGradient contrastive_loss_grad(
    std::span<const double> anchor, std::span<const double> positive,
    std::span<const std::vector<double>> negatives);

// Contrastive term on item embeddings: anchor E[t], positive the mean of
// E[x_k] over `seq`, negatives E[n_i]. Averaged over targets.
double embedding_contrastive_loss(const ModelParams& params,
                                  const InteractionSequence& seq,
                                  std::span<const ItemId> targets,
                                  std::span<const ItemId> negatives,
                                  GradientUpdate* grad = nullptr);

// Items in 1..M absent from `history` and `targets`, sampled without
// replacement (fewer if the pool is smaller).
std::vector<ItemId> sample_non_interacted(int item_count,
                                          const InteractionSequence& history,
                                          std::span<const ItemId> targets,
                                          int count, SeededRng& rng);

// Composition switches for the dv-fsr family.
struct PoisonRecipe {
  bool substitute = true;
  bool attack_term = true;
  bool contrastive_term = true;
  int bce_negatives = 0;  // sampled negatives added to the target BCE
};

struct PoisonDetails {
  InteractionSequence poisoned_sequence;
  std::optional<SubstitutionTrace> trace;
  std::vector<ItemId> contrastive_negatives;
  std::vector<ItemId> bce_negatives;
  double attack_loss = 0.0;
  double contrastive_loss = 0.0;
  double total_loss = 0.0;
};

// alpha * grad of the recipe's loss on `history` (already truncated to the
// model window by the caller or here).
GradientUpdate poison_gradient(const ModelParams& params,
                               const InteractionSequence& history,
                               const AttackConfig& cfg, const PoisonRecipe& recipe,
                               SeededRng& rng, PoisonDetails* details = nullptr);

GradientUpdate dvfsr_update(const ModelParams& params,
                            const InteractionSequence& history,
                            const AttackConfig& cfg, SeededRng& rng,
                            PoisonDetails* details = nullptr);

InteractionSequence ra_profile(int item_count, const AttackConfig& cfg,
                               SeededRng& rng);
GradientUpdate ra_update(const ModelParams& params, const AttackConfig& cfg,
                         SeededRng& rng, int negatives_per_positive = 1,
                         InteractionSequence* profile = nullptr);
GradientUpdate eb_update(const ModelParams& params,
                         const InteractionSequence& history,
                         const AttackConfig& cfg);
GradientUpdate a_ra_update(const ModelParams& params,
                           const InteractionSequence& history,
                           const AttackConfig& cfg, SeededRng& rng);

// Dispatch on cfg.method. Throws for kNone.
GradientUpdate poisoned_update(const ModelParams& params,
                               const InteractionSequence& history,
                               const AttackConfig& cfg, SeededRng& rng,
                               int negatives_per_positive = 1,
                               PoisonDetails* details = nullptr);

// Most recent max_len items.
InteractionSequence model_window(const ModelDims& dims,
                                 const InteractionSequence& history);

}  // namespace fedseq

#endif  // FEDSEQ_ATTACKS_H_
