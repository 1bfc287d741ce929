"""Run configuration: the evolvex.json file merged under command-line flags.

The config file carries endpoint settings only; everything else is a flag.
Unknown keys are rejected before any work starts. The EVOLVEX_CONFIG
environment variable overrides the config file path.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

ENV_VAR = "EVOLVEX_CONFIG"
DEFAULT_PATH = "evolvex.json"

# key -> (expected type, default)
KNOWN_KEYS = {
    "embed.external.url": (str, None),
    "embed.external.timeout_ms": (int, 5000),
    "llm.url": (str, None),
    "llm.model": (str, "default"),
    "llm.timeout_ms": (int, 10000),
    "llm.concurrency": (int, 4),
}


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    external_url: str | None
    external_timeout_ms: int
    llm_url: str | None
    llm_model: str
    llm_timeout_ms: int
    llm_concurrency: int


def _flatten(doc: dict, prefix: str = "") -> dict:
    flat = {}
    for key, value in doc.items():
        dotted = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, f"{dotted}."))
        else:
            flat[dotted] = value
    return flat


def load_config_file(path: str | None = None, env: dict | None = None) -> dict:
    """Read and validate the config file; missing default file means empty config."""
    env = os.environ if env is None else env
    explicit = env.get(ENV_VAR) or path
    effective = explicit or DEFAULT_PATH
    if not os.path.exists(effective):
        if explicit:
            raise ConfigError(f"config file not found: {effective}")
        return {}
    try:
        with open(effective, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {effective} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config file {effective} must hold a JSON object")
    flat = _flatten(doc)
    for key, value in flat.items():
        if key not in KNOWN_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        expected, _ = KNOWN_KEYS[key]
        if value is not None and not isinstance(value, expected):
            raise ConfigError(
                f"config key {key!r} expects {expected.__name__}, got {value!r}")
    return flat


def resolve_config(path: str | None = None, overrides: dict | None = None,
                   env: dict | None = None) -> RunConfig:
    """File values merged under overrides (flags win)."""
    merged = {key: default for key, (_, default) in KNOWN_KEYS.items()}
    merged.update(load_config_file(path, env))
    for key, value in (overrides or {}).items():
        if key not in KNOWN_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        if value is not None:
            merged[key] = value
    return RunConfig(
        external_url=merged["embed.external.url"],
        external_timeout_ms=merged["embed.external.timeout_ms"],
        llm_url=merged["llm.url"],
        llm_model=merged["llm.model"],
        llm_timeout_ms=merged["llm.timeout_ms"],
        llm_concurrency=merged["llm.concurrency"],
    )
