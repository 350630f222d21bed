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
// Oracle checks runnable from the command line (`fedseq check`) and from the
// acceptance suite. Each check compares the library against a brute-force or
// numerical reference and reports the worst deviation it saw.
#ifndef FEDSEQ_SELFCHECK_H_
#define FEDSEQ_SELFCHECK_H_

#include <cstdint>
#include <string>
#include <vector>

#include "fedseq/config.h"
#include "fedseq/seqrec.h"

namespace fedseq {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

// Flat parameter vector in tensor_refs() order, and back.
std::vector<double> pack_params(const ModelParams& params);
void unpack_params(std::span<const double> theta, ModelParams& params);

// Analytic gradients of the training, attack, contrastive and total poison
// losses plus the input-embedding gradient against central differences.
CheckResult check_gradients(int instances = 100, std::uint64_t seed = 1,
                            double tolerance = 1e-5);

// Weiszfeld against a refining grid search on 2-D instances, the subgradient
// certificate on converged runs, and the weighted median on 1-D instances.
CheckResult check_geometric_median(std::uint64_t seed = 2);

// mixed_rfa at lambda 1, 0 and 0.3 against its two ingredients.
CheckResult check_aggregation_identities(int instances = 20, std::uint64_t seed = 3);

// One-position edits, the tau constraint and, with tau = -1 and T = M,
// agreement with exhaustive enumeration at the chosen position.
CheckResult check_substitution(int instances = 1000, std::uint64_t seed = 4);

// HR/NDCG/ER against brute-force ranks, and monotonicity in K.
CheckResult check_metrics(int instances = 100, std::uint64_t seed = 5);

// Runs `cfg` twice without writing outputs and compares the JSON-lines
// streams byte for byte.
CheckResult check_determinism(const ExperimentConfig& cfg);

// Small configuration used by `fedseq check` for the determinism probe.
ExperimentConfig determinism_probe_config();

std::vector<CheckResult> run_self_checks();

}  // namespace fedseq

#endif  // FEDSEQ_SELFCHECK_H_
