"""Two-level inclusive set-associative LRU cache.

The model is timeless: it answers "where does this line live right now" and
tracks lines that a runahead prefetch installed but no demand access has used
yet.  Timing (when a fill actually arrives) is the caller's business; callers
may attach an arbitrary record to a prefetched line and read it back later.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .config import ConfigError, from_mapping, read_kv


class MissClass(enum.IntEnum):
    L1_HIT = 0
    L2_HIT = 1
    L2_MISS = 2


def _pow2(x: int) -> bool:
    return x >= 1 and (x & (x - 1)) == 0


@dataclass(frozen=True)
class CacheConfig:
    w1: int = 4
    s1: int = 16
    w2: int = 16
    s2: int = 128
    # 64 *bits*: the synthetic experiments only produce steady-state L2
    # misses when the 16 KB-equivalent L2 is smaller than the data set.
    line_size: int = 8
    mshr_count: int = 4
    lat_l1: int = 2
    lat_l2: int = 25
    lat_mem: int = 180
    runahead_overhead: int = 5

    def __post_init__(self):
        for name in ("w1", "s1", "w2", "s2", "line_size", "mshr_count"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ConfigError(f"{name} must be an integer >= 1, got {v!r}")
        for name in ("s1", "s2", "line_size"):
            if not _pow2(getattr(self, name)):
                raise ConfigError(f"{name} must be a power of two, got {getattr(self, name)}")
        if not (0 <= self.lat_l1 < self.lat_l2 < self.lat_mem):
            raise ConfigError("latencies must satisfy lat_l1 < lat_l2 < lat_mem")
        if self.runahead_overhead < 0:
            raise ConfigError("runahead_overhead must be >= 0")

    @property
    def latencies(self) -> tuple[int, int, int]:
        """Latency indexed by MissClass."""
        return (self.lat_l1, self.lat_l2, self.lat_mem)

    def replace(self, **changes) -> "CacheConfig":
        from dataclasses import replace

        return replace(self, **changes)

    @classmethod
    def from_dict(cls, mapping: dict[str, Any], strict: bool = True) -> "CacheConfig":
        return from_mapping(cls, mapping, strict=strict)

    @classmethod
    def from_file(cls, path: str | Path) -> "CacheConfig":
        return cls.from_dict(read_kv(path))


@dataclass(frozen=True)
class CacheStateImage:
    config: CacheConfig
    l1: tuple[tuple[int, ...], ...]
    l2: tuple[tuple[int, ...], ...]
    unused: tuple[tuple[int, Any], ...]
    unused_evictions: int
    prefetch_evictions: int = 0


class CacheModel:
    """Inclusive L1/L2 with strict LRU at both levels.

    Sets are lists of line numbers ordered LRU first, MRU last.  Lines
    installed by a prefetch and not yet demanded live in ``_unused``
    (L1-resident lines only), mapped to the caller's record.
    """

    def __init__(self, config: CacheConfig | None = None):
        self.config = config or CacheConfig()
        c = self.config
        self._shift = c.line_size.bit_length() - 1
        self._m1 = c.s1 - 1
        self._m2 = c.s2 - 1
        self._w1 = c.w1
        self._w2 = c.w2
        self.l1: list[list[int]] = [[] for _ in range(c.s1)]
        self.l2: list[list[int]] = [[] for _ in range(c.s2)]
        self._unused: dict[int, Any] = {}
        # prefetched-unused lines lost to any load / to a prefetch load
        self.unused_evictions = 0
        self.prefetch_evictions = 0

    # -- queries ---------------------------------------------------------

    def line_of(self, addr: int) -> int:
        return addr >> self._shift

    def classify(self, addr: int) -> MissClass:
        line = addr >> self._shift
        if line in self.l1[line & self._m1]:
            return MissClass.L1_HIT
        if line in self.l2[line & self._m2]:
            return MissClass.L2_HIT
        return MissClass.L2_MISS

    def latency(self, addr: int) -> int:
        return self.config.latencies[self.classify(addr)]

    def would_evict_useful(self, addr: int) -> bool:
        """True iff load(addr) would displace a prefetched-but-unused line."""
        line = addr >> self._shift
        set1 = self.l1[line & self._m1]
        if line in set1:
            return False
        unused = self._unused
        l1_room = len(set1) < self._w1
        set2 = self.l2[line & self._m2]
        if line not in set2 and len(set2) >= self._w2:
            victim2 = set2[0]
            if victim2 in unused:
                return True
            if victim2 in set1:
                # back-invalidation frees an L1 way before the L1 install
                l1_room = True
        if not l1_room and set1[0] in unused:
            return True
        return False

    def is_prefetched_unused(self, addr: int) -> bool:
        return (addr >> self._shift) in self._unused

    def prefetch_record(self, addr: int) -> Any:
        """Record attached by the prefetch that installed this line, or None."""
        return self._unused.get(addr >> self._shift)

    def l1_lines(self) -> set[int]:
        return {ln for s in self.l1 for ln in s}

    def l2_lines(self) -> set[int]:
        return {ln for s in self.l2 for ln in s}

    # -- mutation --------------------------------------------------------

    def load(self, addr: int, is_prefetch: bool = False, record: Any = True) -> MissClass:
        """Access ``addr``; returns the MissClass it had before the access.

        A prefetch that misses L1 marks the line prefetched-unused with
        ``record``; a demand access clears the mark.
        """
        line = addr >> self._shift
        set1 = self.l1[line & self._m1]
        set2 = self.l2[line & self._m2]
        unused = self._unused
        if line in set1:
            set1.remove(line)
            set1.append(line)
            set2.remove(line)
            set2.append(line)
            if not is_prefetch and line in unused:
                del unused[line]
            return MissClass.L1_HIT
        if line in set2:
            set2.remove(line)
            set2.append(line)
            cls = MissClass.L2_HIT
        else:
            if len(set2) >= self._w2:
                victim = set2.pop(0)
                vset = self.l1[victim & self._m1]
                if victim in vset:
                    vset.remove(victim)
                    if victim in unused:
                        del unused[victim]
                        self.unused_evictions += 1
                        self.prefetch_evictions += is_prefetch
            set2.append(line)
            cls = MissClass.L2_MISS
        if len(set1) >= self._w1:
            victim = set1.pop(0)
            if victim in unused:
                del unused[victim]
                self.unused_evictions += 1
                self.prefetch_evictions += is_prefetch
        set1.append(line)
        if is_prefetch:
            unused[line] = record
        return cls

    # -- checkpointing ---------------------------------------------------

    def snapshot(self) -> CacheStateImage:
        return CacheStateImage(
            config=self.config,
            l1=tuple(tuple(s) for s in self.l1),
            l2=tuple(tuple(s) for s in self.l2),
            unused=tuple(self._unused.items()),
            unused_evictions=self.unused_evictions,
            prefetch_evictions=self.prefetch_evictions,
        )

    def restore(self, img: CacheStateImage) -> None:
        if img.config != self.config:
            raise ConfigError("snapshot was taken with a different CacheConfig")
        self.l1 = [list(s) for s in img.l1]
        self.l2 = [list(s) for s in img.l2]
        self._unused = dict(img.unused)
        self.unused_evictions = img.unused_evictions
        self.prefetch_evictions = img.prefetch_evictions

    def copy(self) -> "CacheModel":
        other = CacheModel(self.config)
        other.restore(self.snapshot())
        return other
