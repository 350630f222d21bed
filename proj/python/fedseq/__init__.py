# Copyright 2026 The fedseq Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Python bindings for the fedseq simulator.

The heavy lifting happens in the C++ extension ``_fedseq``. This module adds
a few conveniences for reading run outputs.
"""

import json
import pathlib

from ._fedseq import (
    Config,
    ConfigError,
    Model,
    geometric_median,
    mixed_rfa,
    run_experiment,
    self_checks,
    substitute,
    synthesize,
    weighted_mean,
)

__all__ = [
    "Config",
    "ConfigError",
    "Model",
    "geometric_median",
    "mixed_rfa",
    "read_rounds",
    "run",
    "run_experiment",
    "self_checks",
    "substitute",
    "synthesize",
    "weighted_mean",
]


def run(config=None, write_outputs=True, on_round=None, **overrides):
    """Runs one experiment.

    ``config`` is a Config, a path to a YAML file or None for the defaults.
    Keyword overrides use double underscores for the section separator, e.g.
    ``attack__method="dv-fsr"``. Evaluation rows come back as dicts.
    """
    if config is None:
        cfg = Config()
    elif isinstance(config, Config):
        cfg = Config.from_yaml(config.dump())
    else:
        cfg = Config.load(str(config))
    for key, value in overrides.items():
        cfg.set(key.replace("__", "."), _yaml_scalar(value))
    callback = None
    if on_round is not None:
        callback = lambda line: on_round(json.loads(line))  # noqa: E731
    result = run_experiment(cfg, write_outputs, callback)
    result["evaluations"] = [json.loads(e) for e in result["evaluations"]]
    return result


def read_rounds(output_dir):
    """Parses ``rounds.jsonl`` of a finished run into a list of dicts."""
    path = pathlib.Path(output_dir) / "rounds.jsonl"
    with path.open() as f:
        return [json.loads(line) for line in f if line.strip()]


def _yaml_scalar(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(str(v) for v in value) + "]"
    return str(value)
