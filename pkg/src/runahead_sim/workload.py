"""Memory-access traces: model, synthetic generator, timing skeleton, file I/O.

Timing skeleton shared by every consumer in the package.  An access issues in
one cycle; its data arrives ``latency`` cycles after that issue cycle ends.
The core runs ``gap_cycles`` of independent work, then uses the data,
stalling for ``max(latency - gap_cycles, 0)`` cycles if it is not there yet,
and runs ``post_cycles`` of work before issuing the next access.  During
runahead nothing stalls, so the issue-to-issue distance of consecutive
accesses is ``1 + gap + post``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator, Sequence

import numpy as np

from .cache import CacheModel
from .config import ConfigError, from_mapping, read_kv


class TraceFormatError(ValueError):
    """Malformed trace record or inconsistent trace contents."""


@dataclass(frozen=True)
class MemoryAccess:
    index: int
    addr: int
    indirect: bool
    gap_cycles: int
    post_cycles: int


class Trace:
    """Ordered access sequence, stored column-wise for the simulators' hot loops."""

    __slots__ = ("addrs", "indirect", "gaps", "posts", "meta")

    def __init__(
        self,
        addrs: Sequence[int] = (),
        indirect: Sequence[bool] | None = None,
        gaps: Sequence[int] | None = None,
        posts: Sequence[int] | None = None,
        meta: dict[str, Any] | None = None,
    ):
        n = len(addrs)
        self.addrs = tuple(int(a) for a in addrs)
        self.indirect = tuple(bool(x) for x in indirect) if indirect is not None else (True,) * n
        self.gaps = tuple(int(x) for x in gaps) if gaps is not None else (0,) * n
        self.posts = tuple(int(x) for x in posts) if posts is not None else (0,) * n
        self.meta = dict(meta or {})
        if not (len(self.indirect) == len(self.gaps) == len(self.posts) == n):
            raise TraceFormatError("trace columns have different lengths")
        if any(a < 0 for a in self.addrs):
            raise TraceFormatError("negative address")
        if any(g < 0 for g in self.gaps) or any(p < 0 for p in self.posts):
            raise TraceFormatError("gap_cycles and post_cycles must be >= 0")

    @classmethod
    def from_accesses(cls, accesses: Sequence[MemoryAccess], meta=None) -> "Trace":
        for expect, acc in enumerate(accesses, start=1):
            if acc.index != expect:
                raise TraceFormatError(
                    f"access index {acc.index} out of order (expected {expect})"
                )
        return cls(
            [a.addr for a in accesses],
            [a.indirect for a in accesses],
            [a.gap_cycles for a in accesses],
            [a.post_cycles for a in accesses],
            meta,
        )

    @property
    def accesses(self) -> list[MemoryAccess]:
        return list(self)

    def __len__(self) -> int:
        return len(self.addrs)

    def __getitem__(self, k: int) -> MemoryAccess:
        """0-based positional access; the returned record carries its 1-based index."""
        if k < 0:
            k += len(self)
        return MemoryAccess(k + 1, self.addrs[k], self.indirect[k], self.gaps[k], self.posts[k])

    def __iter__(self) -> Iterator[MemoryAccess]:
        for k in range(len(self)):
            yield self[k]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trace):
            return NotImplemented
        return (
            self.addrs == other.addrs
            and self.indirect == other.indirect
            and self.gaps == other.gaps
            and self.posts == other.posts
            and self.meta == other.meta
        )

    def __repr__(self) -> str:
        return f"Trace(n={len(self)}, meta={self.meta})"


# -- generation -------------------------------------------------------------

DEFAULT_INSN_WEIGHTS: tuple[tuple[tuple[int, int], float], ...] = (
    ((1, 20), 0.8),
    ((21, 180), 0.2),
)


@dataclass(frozen=True)
class GenParams:
    data_size_kb: int = 32
    max_gap_insns: int = 6
    n_accesses: int = 100_000
    seed: int = 0
    insn_time_weights: tuple = DEFAULT_INSN_WEIGHTS
    indirect_fraction: float = 1.0

    def __post_init__(self):
        if self.data_size_kb <= 0:
            raise ConfigError("data_size_kb must be positive")
        if self.max_gap_insns < 0 or self.n_accesses < 0:
            raise ConfigError("max_gap_insns and n_accesses must be >= 0")
        if not 0.0 <= self.indirect_fraction <= 1.0:
            raise ConfigError("indirect_fraction must be within [0, 1]")
        bands = tuple((tuple(int(x) for x in rng), float(w)) for rng, w in self.insn_time_weights)
        object.__setattr__(self, "insn_time_weights", bands)
        for (lo, hi), w in bands:
            if lo < 1 or hi < lo:
                raise ConfigError(f"bad instruction-time band [{lo}, {hi}]")
            if w < 0:
                raise ConfigError("negative band weight")
        if not bands or sum(w for _, w in bands) <= 0:
            raise ConfigError("instruction-time weights must have a positive total")

    @classmethod
    def from_dict(cls, mapping: dict[str, Any], strict: bool = True) -> "GenParams":
        return from_mapping(cls, mapping, strict=strict)

    @classmethod
    def from_file(cls, path: str | Path) -> "GenParams":
        return cls.from_dict(read_kv(path))


def _insn_time_sums(rng: np.random.Generator, counts: np.ndarray, bands) -> np.ndarray:
    """Per-slot sum of ``counts[k]`` instruction times from the weighted bands."""
    total = int(counts.sum())
    if total == 0:
        return np.zeros(len(counts), dtype=np.int64)
    weights = np.array([w for _, w in bands], dtype=float)
    lo = np.array([b[0] for b, _ in bands], dtype=np.int64)
    hi = np.array([b[1] for b, _ in bands], dtype=np.int64)
    band = rng.choice(len(bands), size=total, p=weights / weights.sum())
    times = rng.integers(lo[band], hi[band] + 1)
    owner = np.repeat(np.arange(len(counts)), counts)
    return np.bincount(owner, weights=times, minlength=len(counts)).astype(np.int64)


def generate_arrays(params: GenParams):
    """Columns (addrs, indirect, gaps, posts) of :func:`generate` as numpy arrays."""
    rng = np.random.default_rng(params.seed)
    n = params.n_accesses
    span = params.data_size_kb * 1024
    addrs = rng.integers(0, span, size=n)
    k_gap = rng.integers(0, params.max_gap_insns + 1, size=n)
    k_post = rng.integers(0, params.max_gap_insns + 1, size=n)
    gaps = _insn_time_sums(rng, k_gap, params.insn_time_weights)
    posts = _insn_time_sums(rng, k_post, params.insn_time_weights)
    indirect = rng.random(n) < params.indirect_fraction
    return addrs, indirect, gaps, posts


def generate(params: GenParams) -> Trace:
    """Synthetic workload: uniform addresses in [0, D), gaps of up to I instructions."""
    addrs, indirect, gaps, posts = generate_arrays(params)
    meta = {"D": params.data_size_kb, "I": params.max_gap_insns, "seed": params.seed}
    return Trace(addrs.tolist(), indirect.tolist(), gaps.tolist(), posts.tolist(), meta)


# -- timing skeleton ----------------------------------------------------------


def runahead_interval(trace: Trace, i: int, j: int) -> int:
    """Issue(τi) to issue(τj) in cycles when no access stalls (1-based, i < j)."""
    if i >= j:
        raise ValueError(f"interval needs i < j, got i={i}, j={j}")
    if j > len(trace):
        raise IndexError(f"access {j} out of range")
    g, p = trace.gaps, trace.posts
    return sum(1 + g[k] + p[k] for k in range(i - 1, j - 1))


def interval(trace: Trace, i: int, j: int, cache: CacheModel) -> int:
    """Normal-mode issue(τi) to issue(τj), 1-based, stalls included.

    Accesses τi..τ(j-1) are replayed on a private copy of ``cache``; the
    caller's cache is not modified.
    """
    if i >= j:
        raise ValueError(f"interval needs i < j, got i={i}, j={j}")
    if j > len(trace):
        raise IndexError(f"access {j} out of range")
    view = cache.copy()
    lat = cache.config.latencies
    total = 0
    for k in range(i - 1, j - 1):
        cls = view.load(trace.addrs[k])
        gap = trace.gaps[k]
        total += 1 + gap + max(lat[cls] - gap, 0) + trace.posts[k]
    return total


# -- file I/O ------------------------------------------------------------------


def write_trace(trace: Trace, path: str | Path) -> None:
    path = Path(path)
    with path.open("w") as fh:
        fh.write("# index addr indirect gap_cycles post_cycles\n")
        if trace.meta:
            items = " ".join(f"{k}={v}" for k, v in sorted(trace.meta.items()))
            fh.write(f"# meta {items}\n")
        for a in trace:
            fh.write(f"{a.index} {a.addr} {int(a.indirect)} {a.gap_cycles} {a.post_cycles}\n")


def _meta_value(v: str):
    try:
        return int(v)
    except ValueError:
        return v


def read_trace(path: str | Path) -> Trace:
    path = Path(path)
    addrs, ind, gaps, posts = [], [], [], []
    meta: dict[str, Any] = {}
    with path.open() as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if line.startswith("# meta"):
                for item in line[len("# meta"):].split():
                    k, _, v = item.partition("=")
                    meta[k] = _meta_value(v)
                continue
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) != 5:
                raise TraceFormatError(f"{path}:{lineno}: expected 5 fields, got {len(fields)}")
            try:
                idx, addr, indirect, gap, post = (int(f) for f in fields)
            except ValueError:
                raise TraceFormatError(f"{path}:{lineno}: non-integer field in {line!r}") from None
            if idx != len(addrs) + 1:
                raise TraceFormatError(
                    f"{path}:{lineno}: index {idx} is duplicate or non-monotone "
                    f"(expected {len(addrs) + 1})"
                )
            if indirect not in (0, 1):
                raise TraceFormatError(f"{path}:{lineno}: indirect must be 0 or 1")
            if gap < 0 or post < 0 or addr < 0:
                raise TraceFormatError(f"{path}:{lineno}: negative value in {line!r}")
            addrs.append(addr)
            ind.append(bool(indirect))
            gaps.append(gap)
            posts.append(post)
    return Trace(addrs, ind, gaps, posts, meta)
