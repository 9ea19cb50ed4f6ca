"""Plain-text key/value configuration with typed, validated keys."""
from __future__ import annotations

from fractions import Fraction
from typing import Any


class ConfigError(ValueError):
    """Invalid configuration; carries the offending key."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class NumericalFailure(RuntimeError):
    pass


def parse_number(text: str) -> float:
    """Floats, integers and fractions such as 1/64."""
    return float(Fraction(text.strip())) if "/" in text else float(text)


def read_kv(text: str) -> dict:
    """Parse 'key = value' lines; '#' starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected key = value, got {raw!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        if not k:
            raise ConfigError(f"line {lineno}", "empty key")
        out[k] = v
    return out


def coerce(key: str, value: Any, kind):
    """Convert a raw value to kind (float, int, bool, str, or 'floats' for a comma list)."""
    try:
        if kind is bool:
            if isinstance(value, bool):
                return value
            s = str(value).strip().lower()
            if s in ("1", "true", "yes", "on"):
                return True
            if s in ("0", "false", "no", "off"):
                return False
            raise ValueError(s)
        if kind is float:
            return value if isinstance(value, float) else parse_number(str(value))
        if kind is int:
            f = value if isinstance(value, (int, float)) else parse_number(str(value))
            if int(f) != f:
                raise ValueError(value)
            return int(f)
        if kind == "floats":
            if isinstance(value, (list, tuple)):
                return [float(v) for v in value]
            return [parse_number(s) for s in str(value).split(",") if s.strip()]
        return str(value)
    except (ValueError, ZeroDivisionError):
        raise ConfigError(key, f"cannot read {value!r} as {getattr(kind, '__name__', kind)}") from None


def resolve(raw: dict, schema: dict) -> dict:
    """Apply defaults and types from schema {key: (kind, default)}; unknown keys are errors."""
    for k in raw:
        if k not in schema:
            raise ConfigError(k, "unknown configuration key")
    out = {}
    for k, (kind, default) in schema.items():
        out[k] = coerce(k, raw[k], kind) if k in raw else default
    return out
