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
// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any failed. argv[1] is a scratch directory for run outputs.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fedseq/config.h"
#include "fedseq/experiment.h"
#include "fedseq/selfcheck.h"

namespace fs = std::filesystem;
using fedseq::AttackMethod;
using fedseq::CheckResult;
using fedseq::ExperimentConfig;

namespace {

int failures = 0;

void report(int id, const std::string& title, bool ok, const std::string& detail) {
  std::printf("AC%d %s  %s: %s\n", id, ok ? "PASS" : "FAIL", title.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void from_check(int id, const std::string& title, const CheckResult& r, double budget_s) {
  const bool in_time = r.seconds < budget_s;
  report(id, title, r.passed && in_time,
         r.detail + " (" + fmt(r.seconds, 2) + " s, budget " + fmt(budget_s, 0) + " s)");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Shared setup: synthetic N=300, M=100, 4 clusters, d=16, 200 rounds,
// 30 clients per round, 1% malicious, cold target.
ExperimentConfig base_config() {
  ExperimentConfig cfg;
  cfg.attack.malicious_percent = 1.0;
  cfg.federation.eval_every = cfg.federation.rounds;
  return cfg;
}

struct Outcome {
  fedseq::EvalMetrics metrics;
  double seconds = 0.0;
};

Outcome run(AttackMethod method, fedseq::AggregationRule rule = fedseq::AggregationRule::kMean) {
  ExperimentConfig cfg = base_config();
  cfg.attack.params.method = method;
  cfg.defense.rule = rule;
  const auto t0 = std::chrono::steady_clock::now();
  const fedseq::RunSummary s = fedseq::run_experiment(cfg, {.write_outputs = false});
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {s.final_metrics, dt};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path scratch = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "fedseq-acceptance";

  from_check(1, "gradient fidelity", fedseq::check_gradients(100, 1, 1e-5), 60.0);
  from_check(2, "geometric-median oracle", fedseq::check_geometric_median(2), 10.0);
  {
    const CheckResult r = fedseq::check_aggregation_identities(20, 3);
    report(3, "aggregation identities", r.passed, r.detail);
  }
  from_check(4, "substitution contract", fedseq::check_substitution(1000, 4), 120.0);

  std::map<std::string, Outcome> out;
  const std::pair<const char*, AttackMethod> methods[] = {
      {"None", AttackMethod::kNone},      {"RA", AttackMethod::kRandom},
      {"EB", AttackMethod::kExplicitBoost}, {"A-ra", AttackMethod::kAra},
      {"DV-FSR", AttackMethod::kDvFsr},   {"S-FSR", AttackMethod::kSFsr},
      {"C-FSR", AttackMethod::kCFsr}};
  for (const auto& [name, m] : methods) out[name] = run(m);
  auto er10 = [&](const char* name) { return out[name].metrics.er(10); };

  {
    const double none = er10("None"), ra = er10("RA"), eb = er10("EB"), ara = er10("A-ra"),
                 dv = er10("DV-FSR");
    double secs = 0.0;
    for (const char* n : {"None", "RA", "EB", "A-ra", "DV-FSR"}) secs += out[n].seconds;
    const bool ok = none < 0.05 && ra < 0.10 && dv >= 0.50 && dv >= eb && dv >= ara && secs < 300.0;
    report(5, "attack ordering", ok,
           "ER@10 None " + fmt(none) + " < 0.05, RA " + fmt(ra) + " < 0.10, DV-FSR " + fmt(dv) +
               " >= 0.50, >= EB " + fmt(eb) + ", >= A-ra " + fmt(ara) + " (" + fmt(secs, 1) +
               " s for five runs)");
  }
  {
    const double dv = er10("DV-FSR"), s = er10("S-FSR"), c = er10("C-FSR");
    report(6, "ablation ordering", dv >= s && s >= c && c < 0.10,
           "ER@10 DV-FSR " + fmt(dv) + " >= S-FSR " + fmt(s) + " >= C-FSR " + fmt(c) +
               ", C-FSR < 0.10");
  }
  {
    const Outcome dv_rfa = run(AttackMethod::kDvFsr, fedseq::AggregationRule::kMixedRfa);
    const Outcome none_rfa = run(AttackMethod::kNone, fedseq::AggregationRule::kMixedRfa);
    const double undefended = out["DV-FSR"].metrics.er(5);
    const double defended = dv_rfa.metrics.er(5);
    const double reduction = undefended > 0.0 ? 1.0 - defended / undefended : 0.0;
    const double hr_mean = out["None"].metrics.hr, hr_rfa = none_rfa.metrics.hr;
    const double hr_change = hr_mean > 0.0 ? std::abs(hr_rfa - hr_mean) / hr_mean : 1.0;
    report(7, "defense mitigation", reduction >= 0.5 && hr_change <= 0.2,
           "DV-FSR ER@5 " + fmt(undefended) + " -> " + fmt(defended) + " under mixed-RFA (" +
               fmt(100 * reduction, 1) + "% reduction, need >= 50%); no-attack HR@10 " +
               fmt(hr_mean) + " -> " + fmt(hr_rfa) + " (" + fmt(100 * hr_change, 1) +
               "% change, need <= 20%)");
  }

  {
    const CheckResult r = fedseq::check_metrics(100, 5);
    report(8, "metric oracles", r.passed, r.detail);
  }

  {
    ExperimentConfig cfg = base_config();
    cfg.attack.params.method = AttackMethod::kDvFsr;
    cfg.defense.rule = fedseq::AggregationRule::kMixedRfa;
    cfg.federation.eval_every = 10;
    cfg.output.dir = (scratch / "run-a").string();
    fedseq::run_experiment(cfg);
    cfg.output.dir = (scratch / "run-b").string();
    fedseq::run_experiment(cfg);
    const std::string a = slurp(scratch / "run-a" / "rounds.jsonl");
    const std::string b = slurp(scratch / "run-b" / "rounds.jsonl");
    report(9, "determinism", !a.empty() && a == b,
           "two runs of dv-fsr + mixed_rfa wrote " + std::to_string(a.size()) + " and " +
               std::to_string(b.size()) + " bytes of rounds.jsonl, " +
               (a == b ? "identical" : "different"));
  }

  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
