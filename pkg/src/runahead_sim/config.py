"""Plain key-value configuration files.

One ``key = value`` (or ``key: value``) pair per line, ``#`` starts a comment.
Values are parsed as Python literals when possible (ints, floats, lists) and
kept as strings otherwise.
"""

from __future__ import annotations

import ast
import dataclasses
from pathlib import Path
from typing import Any


class ConfigError(ValueError):
    """Raised for malformed or inconsistent configuration."""


def parse_kv(text: str, source: str = "<string>") -> dict[str, Any]:
    out: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        for sep in ("=", ":"):
            if sep in line:
                key, value = line.split(sep, 1)
                break
        else:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key = key.strip()
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        out[key] = _literal(value.strip())
    return out


def read_kv(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_kv(text, source=str(path))


def _literal(value: str) -> Any:
    try:
        return ast.literal_eval(value)
    except (ValueError, SyntaxError):
        return value


def from_mapping(cls, mapping: dict[str, Any], *, strict: bool = True):
    """Build dataclass ``cls`` from ``mapping``; unknown keys are an error when strict."""
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(mapping) - names
    if strict and unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return cls(**{k: v for k, v in mapping.items() if k in names})
