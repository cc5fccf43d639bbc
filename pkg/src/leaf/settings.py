"""Service configuration: defaults, YAML key-value file, environment overrides.

Environment variables use the ``LEAF_`` prefix (``LEAF_PORT``,
``LEAF_QG_MODEL_DIR``, ...) and take precedence over the config file.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields

import yaml

from .errors import ConfigurationError

_ENV_PREFIX = "LEAF_"


def _to_bool(raw: str) -> bool:
    return raw.strip().lower() in ("1", "true", "yes", "on")


_COERCERS = {
    "port": int,
    "stub_models": _to_bool,
    "request_timeout_s": float,
}


@dataclass
class Settings:
    host: str = "127.0.0.1"
    port: int = 8000
    qg_model_dir: str | None = None
    distractor_model_dir: str | None = None
    semantic_index_path: str | None = None
    cors_origin: str | None = None
    stub_models: bool = False
    request_timeout_s: float = 120.0


def load_settings(config_file=None, env: dict | None = None, **overrides) -> Settings:
    """Merge defaults < config file < environment < explicit overrides."""
    env = os.environ if env is None else env
    known = {f.name for f in fields(Settings)}
    values: dict = {}

    if config_file:
        try:
            with open(config_file, encoding="utf-8") as fh:
                doc = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigurationError(f"cannot read config file {config_file}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigurationError(f"config file {config_file} must hold key-value pairs")
        unknown = set(doc) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys in {config_file}: {sorted(unknown)}")
        values.update(doc)

    for f in fields(Settings):
        env_key = _ENV_PREFIX + f.name.upper()
        if env_key in env:
            raw = str(env[env_key])
            coerce = _COERCERS.get(f.name, str)
            try:
                values[f.name] = coerce(raw)
            except ValueError as exc:
                raise ConfigurationError(f"bad value for {env_key}: {raw!r}") from exc

    for key, value in overrides.items():
        if key not in known:
            raise ConfigurationError(f"unknown setting {key!r}")
        if value is not None:
            values[key] = value

    return Settings(**values)
