"""JSON configuration files with strict schema checking (unknown keys error)."""

from __future__ import annotations

import json

from .network import ModelConfig, apply_ablation
from .tensor import ConfigError
from .training import PRESETS, TrainConfig

_TOP_KEYS = {"model", "train", "preset", "ablation"}


def parse_config(doc: dict):
    """Validate a parsed config document -> (ModelConfig, TrainConfig | None)."""
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    model = ModelConfig.from_dict(doc.get("model", {}))
    for flag in doc.get("ablation", []):
        model = apply_ablation(model, flag)
    preset = doc.get("preset")
    if preset is not None and preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; known: {sorted(PRESETS)}")
    train = None
    if "train" in doc or preset is not None:
        train = TrainConfig.from_dict(doc.get("train", {}), preset=preset)
    return model, train


def load_config(path):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return parse_config(doc)
