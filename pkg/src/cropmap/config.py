"""JSON pipeline configs: schema validation by known-key sets, CLI overrides.

Precedence, lowest to highest: built-in defaults, config file values, flags
given explicitly on the command line.  Unknown config keys are rejected so a
typo cannot silently fall back to a default.
"""

from __future__ import annotations

import json

from .errors import ConfigError

CONFIG_VERSION = 1


def load_json_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    version = raw.pop("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError(f"{path}: unsupported config version {version}")
    return raw


def _check_type(key, value, default):
    if default is None or value is None:
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"config key {key!r}: expected boolean, got {value!r}")
        return value
    if isinstance(default, (int, float)) and isinstance(value, (int, float)) and not isinstance(value, bool):
        return type(default)(value)
    if isinstance(default, str) and isinstance(value, str):
        return value
    if isinstance(default, (list, tuple)) and isinstance(value, (list, tuple)):
        return list(value)
    raise ConfigError(f"config key {key!r}: expected {type(default).__name__}, got {type(value).__name__}")


def resolve(defaults: dict, config: dict | None, overrides: dict) -> dict:
    """Merge defaults, file config, and explicit CLI flags (None = not given)."""
    merged = dict(defaults)
    if config:
        unknown = set(config) - set(defaults)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key, value in config.items():
            merged[key] = _check_type(key, value, defaults[key])
    for key, value in overrides.items():
        if key not in defaults:
            raise ConfigError(f"internal: override {key!r} missing from defaults")
        if value is not None:
            merged[key] = value
    return merged


def dump_resolved(command: str, resolved: dict) -> str:
    payload = {"command": command, "version": CONFIG_VERSION, **resolved}
    return json.dumps(payload, sort_keys=True, default=str)
