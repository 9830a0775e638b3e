from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Any

from .config import ConfigError, from_mapping


class Policy(enum.Enum):
    NONE = "none"
    BS = "bs"
    BS_S = "bss"
    ADAPTIVE = "adaptive"

    @classmethod
    def parse(cls, text: str) -> "Policy":
        key = text.strip().lower().replace("|", "").replace("_", "")
        for p in cls:
            if p.value == key or p.name.lower().replace("_", "") == key:
                return p
        raise ConfigError(f"unknown policy {text!r}; expected one of none, bs, bss, adaptive")


@dataclass(frozen=True)
class RunaheadConfig:
    """Runahead-control knobs that are not part of the cache geometry."""

    # idle MSHRs (besides the stall-load's own) needed to enter runahead
    entry_idle_mshr: int = 2
    # episodes shorter than this are SHORT; None means 2 * runahead_overhead
    short_threshold: int | None = None

    def __post_init__(self):
        if self.entry_idle_mshr < 0:
            raise ConfigError("entry_idle_mshr must be >= 0")
        if self.short_threshold is not None and self.short_threshold < 0:
            raise ConfigError("short_threshold must be >= 0")

    def short_cutoff(self, runahead_overhead: int) -> int:
        if self.short_threshold is None:
            return 2 * runahead_overhead
        return self.short_threshold

    @classmethod
    def from_dict(cls, mapping: dict[str, Any], strict: bool = True) -> "RunaheadConfig":
        return from_mapping(cls, mapping, strict=strict)
