"""Run configuration: one YAML file, flags override individual keys."""

from __future__ import annotations

from pathlib import Path

import yaml

from .errors import ConfigError

DEFAULTS: dict = {
    "seed": 42,
    "out_dir": "out",
    "sources": [],
    "prompts": None,
    "genqa": {
        "quotas": None,
        "max_answer_words": 200,
        "max_turns": 10,
    },
    "evalqa": {
        "sizes": {"train": 100, "val": 10, "test": 10},
        "by_source_split": False,
        "max_feedback_words": 50,
        "auto_approve": True,
        "data_dir": None,
        "yes_feedback": True,
    },
    "client": {
        "mode": "mock",
        "error_rate": 0.0,
        "endpoint": None,
        "api_key_env": "VQAKIT_API_KEY",
        "negative_model": "negative-model",
        "feedback_model": "feedback-model",
        "eval_model": "eval-model",
        "temperature": 0.7,
        "cache_dir": None,
        "max_attempts": 4,
        "supports_images": True,
        "concurrency": 4,
    },
    "mix": {"inputs": [], "out": None, "manifest": None},
    "evaluate": {"testset": None, "policy": "error", "out": None},
}


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path: str | Path | None) -> dict:
    if path is None:
        return _merge(DEFAULTS, {})
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid config YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    unknown = set(raw) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return _merge(DEFAULTS, raw)
