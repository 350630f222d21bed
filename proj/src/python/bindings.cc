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
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fedseq/attacks.h"
#include "fedseq/checkpoint.h"
#include "fedseq/config.h"
#include "fedseq/data.h"
#include "fedseq/defense.h"
#include "fedseq/evalmetrics.h"
#include "fedseq/experiment.h"
#include "fedseq/federation.h"
#include "fedseq/selfcheck.h"
#include "fedseq/seqrec.h"

namespace py = pybind11;

namespace {

using namespace fedseq;

InteractionSequence as_sequence(const std::vector<ItemId>& items, std::int64_t user = 0) {
  return InteractionSequence{user, items};
}

py::dict metrics_dict(const EvalMetrics& m) {
  py::dict d;
  d["HR@10"] = m.hr;
  d["NDCG@10"] = m.ndcg;
  for (const auto& r : m.exposure) {
    d[py::str("ER@" + std::to_string(r.k))] = r.defined ? py::object(py::float_(r.value))
                                                       : py::object(py::none());
  }
  return d;
}

py::dict gm_dict(const GeometricMedianResult& r) {
  py::dict d;
  d["median"] = r.median;
  d["iterations"] = r.iterations;
  d["converged"] = r.converged;
  d["monotone"] = r.monotone;
  d["objective"] = r.objective;
  d["certificate"] = r.certificate;
  return d;
}

DefenseConfig defense(double tolerance, int max_iterations, double smoothing) {
  DefenseConfig cfg;
  cfg.tolerance = tolerance;
  cfg.max_iterations = max_iterations;
  cfg.smoothing = smoothing;
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_fedseq, m) {
  m.doc() = "Federated sequential recommendation poisoning simulator.";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<ExperimentConfig>(m, "Config")
      .def(py::init<>())
      .def_static("from_yaml", &parse_config, py::arg("text"))
      .def_static("load", &load_config, py::arg("path"))
      .def("set", [](ExperimentConfig& c, const std::string& key, const std::string& value) {
        set_config_value(c, key, value);
      }, py::arg("key"), py::arg("value"))
      .def("override", &apply_override, py::arg("assignment"))
      .def("validate", &validate_config)
      .def("dump", &dump_config)
      .def_static("keys", &config_keys)
      .def("__copy__", [](const ExperimentConfig& c) { return ExperimentConfig(c); });

  py::class_<ModelParams>(m, "Model")
      .def_static("initialize", [](int item_count, int dim, int ff_dim, int max_len,
                                   std::uint64_t seed, double scale) {
        SeededRng rng(seed, "model-init");
        return ModelParams::initialize(ModelDims{item_count, dim, ff_dim, max_len}, rng, scale);
      }, py::arg("item_count"), py::arg("dim") = 16, py::arg("ff_dim") = 32,
         py::arg("max_len") = 30, py::arg("seed") = 42, py::arg("scale") = 0.1)
      .def_static("load", &load_checkpoint, py::arg("path"))
      .def("save", [](const ModelParams& p, const std::string& path) { save_checkpoint(p, path); },
           py::arg("path"))
      .def_property_readonly("item_count", [](const ModelParams& p) { return p.dims.item_count; })
      .def_property_readonly("dim", [](const ModelParams& p) { return p.dims.dim; })
      .def_property_readonly("max_len", [](const ModelParams& p) { return p.dims.max_len; })
      .def("parameter_count", &ModelParams::parameter_count)
      .def("scores", [](const ModelParams& p, const std::vector<ItemId>& items) {
        const ItemScores s = score_sequence(p, as_sequence(items));
        return std::vector<double>(s.values().begin(), s.values().end());
      }, py::arg("items"))
      .def("topk", [](const ModelParams& p, const std::vector<ItemId>& history, int k) {
        return topk_recommend(p, as_sequence(history), k).items;
      }, py::arg("history"), py::arg("k") = 10)
      .def("evaluate", [](const ModelParams& p, const std::vector<std::vector<ItemId>>& train,
                          const std::vector<ItemId>& test, const std::vector<ItemId>& targets) {
        std::vector<InteractionSequence> seqs;
        for (std::size_t u = 0; u < train.size(); ++u) {
          seqs.push_back(as_sequence(train[u], static_cast<std::int64_t>(u)));
        }
        return metrics_dict(evaluate(p, seqs, test, targets));
      }, py::arg("train"), py::arg("test_items"), py::arg("targets"));

  m.def("synthesize", [](int users, int items, int clusters, std::uint64_t seed) {
    SynthConfig cfg;
    cfg.users = users;
    cfg.items = items;
    cfg.clusters = clusters;
    cfg.seed = seed;
    const Dataset ds = synthesize(cfg);
    std::vector<std::vector<ItemId>> out;
    for (const auto& s : ds.sequences) out.push_back(s.items);
    return py::make_tuple(out, ds.cold_items);
  }, py::arg("users") = 300, py::arg("items") = 100, py::arg("clusters") = 4,
     py::arg("seed") = 7, "Synthetic sequences and the reserved cold items.");

  m.def("substitute", [](const ModelParams& p, const std::vector<ItemId>& items, ItemId target,
                         double tau, int search_time, double fgsm_step) {
    const SubstitutionResult r =
        substitution(p, as_sequence(items), target, {tau, search_time, fgsm_step, true});
    py::dict d;
    d["sequence"] = r.sequence.items;
    d["position"] = r.trace.position;
    d["original_item"] = r.trace.original_item;
    d["replacement_item"] = r.trace.replacement_item;
    d["original_score"] = r.trace.original_score;
    d["best_target_score"] = r.trace.best_target_score;
    d["no_candidate"] = r.trace.no_candidate;
    return d;
  }, py::arg("model"), py::arg("items"), py::arg("target"), py::arg("tau") = 0.5,
     py::arg("search_time") = 9, py::arg("fgsm_step") = 1.0);

  m.def("weighted_mean", [](const std::vector<std::vector<double>>& updates,
                            const std::vector<double>& weights) {
    return weighted_mean(updates, weights);
  }, py::arg("updates"), py::arg("weights") = std::vector<double>{});
  m.def("geometric_median", [](const std::vector<std::vector<double>>& updates,
                               const std::vector<double>& weights, double tolerance,
                               int max_iterations, double smoothing) {
    return gm_dict(geometric_median(updates, weights,
                                    defense(tolerance, max_iterations, smoothing)));
  }, py::arg("updates"), py::arg("weights") = std::vector<double>{},
     py::arg("tolerance") = 1e-8, py::arg("max_iterations") = 100,
     py::arg("smoothing") = 1e-10);
  m.def("mixed_rfa", [](const std::vector<std::vector<double>>& updates,
                        const std::vector<double>& weights, double lambda) {
    return mixed_rfa(updates, weights, lambda, DefenseConfig{}).aggregate;
  }, py::arg("updates"), py::arg("weights") = std::vector<double>{}, py::arg("lam") = 0.3);

  m.def("run_experiment", [](const ExperimentConfig& cfg, bool write_outputs,
                             std::function<void(std::string)> on_round) {
    RunOptions opt;
    opt.write_outputs = write_outputs;
    if (on_round) {
      opt.on_round = [&](const RoundLog& log) {
        py::gil_scoped_acquire acquire;
        on_round(round_log_json(log));
      };
    }
    RunSummary s;
    {
      py::gil_scoped_release release;
      s = run_experiment(cfg, opt);
    }
    py::list evals;
    for (const auto& log : s.evaluations) evals.append(round_log_json(log));
    py::dict d;
    d["output_dir"] = s.output_dir;
    d["targets"] = s.targets;
    d["malicious"] = s.malicious;
    d["final"] = metrics_dict(s.final_metrics);
    d["evaluations"] = evals;
    d["model"] = s.params;
    return d;
  }, py::arg("config"), py::arg("write_outputs") = true, py::arg("on_round") = nullptr,
     "Runs one experiment; evaluations are JSON strings.");

  m.def("self_checks", [](bool quick) {
    std::vector<CheckResult> rs;
    {
      py::gil_scoped_release release;
      rs = quick ? std::vector<CheckResult>{check_gradients(10), check_geometric_median(),
                                            check_aggregation_identities(),
                                            check_substitution(50), check_metrics(10)}
                 : run_self_checks();
    }
    py::list out;
    for (const auto& r : rs) {
      py::dict d;
      d["name"] = r.name;
      d["passed"] = r.passed;
      d["detail"] = r.detail;
      out.append(d);
    }
    return out;
  }, py::arg("quick") = true);
}
