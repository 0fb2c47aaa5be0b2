# Copyright 2026 The UPAT Authors
# SPDX-License-Identifier: Apache-2.0
"""Universal pyramid adversarial training.

Thin wrappers over the C++ core. Structured results come back as dicts.
"""

import json

from ._core import (
    ConfigError,
    DataError,
    NumericError,
    Pyramid,
    PyramidSpec,
    config_hash,
    normalize_config,
    radius_at_epoch,
)
from . import _core

__all__ = [
    "ConfigError",
    "DataError",
    "NumericError",
    "Pyramid",
    "PyramidSpec",
    "analyze",
    "checkpoint_info",
    "config_hash",
    "cost_report",
    "ingest",
    "normalize_config",
    "radius_at_epoch",
    "train",
]


def cost_report(method, attack_steps=0):
    """Per-step pass units of a training method."""
    return json.loads(_core.cost_report_json(method, attack_steps))


def train(config_yaml="", overrides=None, stop_after=-1):
    """Train (or resume) the run described by a YAML config."""
    return json.loads(_core.train_json(config_yaml, _strings(overrides), stop_after))


def analyze(checkpoint, mode, adversary="auto", seed=0):
    return json.loads(_core.analyze_json(str(checkpoint), mode, adversary, seed))


def ingest(config_yaml="", overrides=None):
    return json.loads(_core.ingest_json(config_yaml, _strings(overrides)))


def checkpoint_info(path):
    return json.loads(_core.checkpoint_json(str(path)))


def _strings(overrides):
    return {str(k): str(v) for k, v in (overrides or {}).items()}
