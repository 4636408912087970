"""
Flat `key = value` configuration files for SystemConfig.

Keys are the SystemConfig field names. Angles are written in degrees, `f0 = inf`
is a collimated beam and `c0 = auto` picks the detection default. Keys that
are absent take the reference values.
"""

import dataclasses
import logging
import math
import os
from typing import Any, Dict, Optional

from models.scenario import SystemConfig
from utils.errors import ConfigError

ANGLE_KEYS = ("theta_i", "theta_r", "phi_r", "theta_rl", "zeta_1")
INT_KEYS = ("n_k", "r1", "r2")
STRING_KEYS = ("beam_model",)
OPTIONAL_KEYS = {"f0": ("inf", "none", "collimated"), "c0": ("auto", "none")}

_FIELDS = {f.name for f in dataclasses.fields(SystemConfig)}


def _parse_value(key: str, raw: str) -> Any:
    text = raw.strip()
    if key in STRING_KEYS:
        return text.lower()
    if key in OPTIONAL_KEYS and text.lower() in OPTIONAL_KEYS[key]:
        return None
    try:
        if key in INT_KEYS:
            number = float(text)
            if number != int(number):
                raise ValueError(text)
            return int(number)
        value = float(text)
    except ValueError:
        raise ConfigError(f"cannot parse value {raw!r} for key '{key}'") from None
    if not math.isfinite(value):
        raise ConfigError(f"non-finite value {raw!r} for key '{key}'")
    if key in ANGLE_KEYS:
        return math.radians(value)
    return value


def parse_config_text(text: str, source: str = "<string>") -> Dict[str, Any]:
    """Parse config text into SystemConfig keyword arguments (SI units, radians)."""
    values: Dict[str, Any] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{number}: expected 'key = value', got {line.strip()!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"{source}:{number}: unknown configuration key '{key}'")
        if key in values:
            logging.warning(f"[Config] {source}:{number}: key '{key}' repeated, last value wins")
        values[key] = _parse_value(key, raw)
    return values


def build_config(values: Dict[str, Any], overrides: Optional[Dict[str, Any]] = None) -> SystemConfig:
    merged = dict(values)
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value
    try:
        cfg = SystemConfig.from_dict(merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()


def load_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> SystemConfig:
    """Read a config file (or only the defaults when path is None) and apply CLI overrides."""
    values: Dict[str, Any] = {}
    if path:
        if not os.path.isfile(path):
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(path, "r", encoding="utf-8") as handle:
                text = handle.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        values = parse_config_text(text, path)
        logging.info(f"[Config] loaded {len(values)} keys from {path}")
    return build_config(values, overrides)


def config_to_text(cfg: SystemConfig) -> str:
    """Inverse of parse_config_text; every key is written."""
    lines = []
    for name, value in cfg.to_dict().items():
        if name in ANGLE_KEYS:
            text = format(math.degrees(value), ".12g")
        elif name in OPTIONAL_KEYS and value is None:
            text = OPTIONAL_KEYS[name][0]
        elif isinstance(value, float):
            text = format(value, ".12g")
        else:
            text = str(value)
        lines.append(f"{name} = {text}")
    return "\n".join(lines) + "\n"
