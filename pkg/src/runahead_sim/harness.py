"""Synthetic-workload sweeps: generate, run every policy, aggregate, emit.

A sweep varies one of D (data size, KB), I (max instructions per gap) or S1
(L1 sets) around the fixed point D=32, I=6, S1=16.  Each grid point runs
``workloads_per_point`` traces; a workload's seed depends only on
``base_seed``, the point and the workload's position, so a point shared by
several sweeps is simulated once and results do not depend on run order.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

from .cache import CacheConfig
from .config import ConfigError, read_kv
from .executor import CSV_COLUMNS
from .fastpath import RunSummary, line_arrays, simulate_arrays, summarize
from .policy import Policy, RunaheadConfig
from .workload import DEFAULT_INSN_WEIGHTS, GenParams, generate, generate_arrays

VARIABLES = ("D", "I", "S1")
FIXED_POINT = {"D": 32, "I": 6, "S1": 16}
DEFAULT_VALUES = {
    "D": (24, 32, 48, 64, 80, 96, 112),
    "I": (3, 4, 5, 6, 7, 8),
    "S1": (8, 16, 32, 64),
}
ALL_POLICIES = (Policy.NONE, Policy.BS, Policy.BS_S, Policy.ADAPTIVE)

POINT_COLUMNS = ("D", "I", "S1", "mshr_count", "workload")
EXTRA_COLUMNS = ("prefetch_evicted_unused", "prefetch_conflicts", "prefetch_dropped", "stall_cycles")
ROW_COLUMNS = POINT_COLUMNS + CSV_COLUMNS + EXTRA_COLUMNS

Point = tuple[int, int, int]  # (D, I, S1)


def workload_seed(base_seed: int, point: Point, index: int) -> int:
    digest = hashlib.blake2b(
        f"{point[0]}:{point[1]}:{point[2]}:{index}".encode(), digest_size=8
    ).digest()
    return (base_seed ^ int.from_bytes(digest, "little")) & (2**64 - 1)


@dataclass(frozen=True)
class SweepSpec:
    variable: str = "D"
    values: tuple = DEFAULT_VALUES["D"]
    fixed: dict = field(default_factory=lambda: dict(FIXED_POINT))
    workloads_per_point: int = 500
    base_seed: int = 0
    n_accesses: int = 100_000
    policies: tuple = ALL_POLICIES
    cache: CacheConfig = CacheConfig()
    runahead: RunaheadConfig = RunaheadConfig()
    insn_time_weights: tuple = DEFAULT_INSN_WEIGHTS
    indirect_fraction: float = 1.0

    def __post_init__(self):
        if self.variable not in VARIABLES:
            raise ConfigError(f"variable must be one of {VARIABLES}, got {self.variable!r}")
        if not self.values:
            raise ConfigError("sweep values must be nonempty")
        missing = set(VARIABLES) - {self.variable} - set(self.fixed)
        if missing:
            raise ConfigError(f"fixed values missing for {sorted(missing)}")
        if self.workloads_per_point < 1:
            raise ConfigError("workloads_per_point must be >= 1")
        object.__setattr__(self, "values", tuple(int(v) for v in self.values))
        object.__setattr__(
            self, "policies", tuple(Policy.parse(p) if isinstance(p, str) else p for p in self.policies)
        )

    def points(self) -> list[Point]:
        out = []
        for v in self.values:
            p = dict(self.fixed, **{self.variable: v})
            out.append((int(p["D"]), int(p["I"]), int(p["S1"])))
        return out

    def replace(self, **changes) -> "SweepSpec":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_dict(cls, mapping: dict[str, Any]) -> "SweepSpec":
        """Flat mapping: sweep keys, fixed D/I/S1, plus any cache or runahead key."""
        mapping = dict(mapping)
        cache_keys = {f.name for f in dataclasses.fields(CacheConfig)}
        ra_keys = {f.name for f in dataclasses.fields(RunaheadConfig)}
        cache = {k: mapping.pop(k) for k in list(mapping) if k in cache_keys}
        ra = {k: mapping.pop(k) for k in list(mapping) if k in ra_keys}
        fixed = dict(FIXED_POINT)
        for k in VARIABLES:
            if k in mapping:
                fixed[k] = int(mapping.pop(k))
        kw = {}
        for k in ("variable", "values", "workloads_per_point", "base_seed", "n_accesses",
                  "policies", "insn_time_weights", "indirect_fraction"):
            if k in mapping:
                kw[k] = mapping.pop(k)
        if mapping:
            raise ConfigError(f"unknown sweep keys: {sorted(mapping)}")
        if "variable" in kw and "values" not in kw:
            kw["values"] = DEFAULT_VALUES.get(kw["variable"], ())
        return cls(fixed=fixed, cache=CacheConfig(**cache), runahead=RunaheadConfig(**ra), **kw)

    @classmethod
    def from_file(cls, path: str | Path) -> "SweepSpec":
        return cls.from_dict(read_kv(path))


def default_grid(**overrides) -> list[SweepSpec]:
    return [SweepSpec(variable=v, values=DEFAULT_VALUES[v], **overrides) for v in VARIABLES]


# -- running -------------------------------------------------------------------------


@dataclass(frozen=True)
class _Job:
    point: Point
    index: int
    seed: int
    n_accesses: int
    runahead: RunaheadConfig
    variants: tuple  # (CacheConfig, policies) pairs run on the same trace
    insn_time_weights: tuple
    indirect_fraction: float
    engine: str


def _run_job(job: _Job) -> list[dict]:
    d, i, s1 = job.point
    params = GenParams(
        data_size_kb=d, max_gap_insns=i, n_accesses=job.n_accesses, seed=job.seed,
        insn_time_weights=job.insn_time_weights, indirect_fraction=job.indirect_fraction,
    )
    rows = []
    if job.engine == "fast":
        lines = None
        raw = generate_arrays(params)
    elif job.engine == "reference":
        from .executor import run

        trace = generate(params)
    else:
        raise ConfigError(f"unknown engine {job.engine!r}")
    for cache, policies in job.variants:
        cfg = cache.replace(s1=s1)
        if job.engine == "fast":
            if lines is None or cfg.line_size != lines[0]:
                lines = (cfg.line_size, line_arrays(*raw, cfg))
            results = [simulate_arrays(lines[1], cfg, p, job.runahead, job.seed) for p in policies]
        else:
            results = [summarize(run(trace, cfg, p, rconf=job.runahead)) for p in policies]
        for r in results:
            rows.append(_row(job.point, cfg.mshr_count, job.index, r))
    return rows


def _row(point: Point, mshr: int, index: int, r: RunSummary) -> dict:
    row = {"D": point[0], "I": point[1], "S1": point[2], "mshr_count": mshr, "workload": index}
    row.update(r.to_row())
    for k in EXTRA_COLUMNS:
        row[k] = getattr(r, k)
    return row


def run_points(
    points: Iterable[Point],
    spec: SweepSpec,
    jobs: int = 1,
    engine: str = "fast",
    variants: Sequence[tuple[CacheConfig, Sequence[Policy]]] | None = None,
) -> dict[Point, list[dict]]:
    """Rows per point, in (workload, variant, policy) order.

    ``variants`` runs each generated trace under several cache configurations
    (S1 still comes from the point); default is the spec's cache and policies.
    """
    points = list(dict.fromkeys(points))
    if variants is None:
        variants = [(spec.cache, spec.policies)]
    variants = tuple((c, tuple(ps)) for c, ps in variants)
    work = [
        _Job(p, w, workload_seed(spec.base_seed, p, w), spec.n_accesses, spec.runahead,
             variants, spec.insn_time_weights, spec.indirect_fraction, engine)
        for p in points
        for w in range(spec.workloads_per_point)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_job, work, chunksize=max(1, len(work) // (4 * jobs))))
    else:
        chunks = [_run_job(j) for j in work]
    out: dict[Point, list[dict]] = {p: [] for p in points}
    for job, rows in zip(work, chunks):
        out[job.point].extend(rows)
    return out


@dataclass
class SweepTable:
    variable: str
    rows: list[dict]

    def value_of(self, row: dict) -> int:
        return row[self.variable]

    def aggregate(self) -> list[dict]:
        """Mean/median makespan and mean episode counts per (value, policy)."""
        groups: dict[tuple, list[dict]] = {}
        for r in self.rows:
            groups.setdefault((self.value_of(r), r["policy"]), []).append(r)
        out = []
        for (value, policy), rs in groups.items():
            spans = [r["makespan"] for r in rs]
            agg = {
                "variable": self.variable,
                "value": value,
                "policy": policy,
                "workloads": len(rs),
                "mean_makespan": statistics.fmean(spans),
                "median_makespan": statistics.median(spans),
            }
            for k in ("episodes", "useless", "short", "overlap", "prefetch_issued",
                      "prefetch_used", "skipped", "prefetch_conflicts"):
                agg[f"mean_{k}"] = statistics.fmean(r[k] for r in rs)
            out.append(agg)
        return out

    def mean_makespan(self) -> dict[tuple[int, str], float]:
        return {(a["value"], a["policy"]): a["mean_makespan"] for a in self.aggregate()}


def run_sweep(spec: SweepSpec, jobs: int = 1, engine: str = "fast", _cache=None) -> SweepTable:
    points = spec.points()
    if _cache is None:
        by_point = run_points(points, spec, jobs, engine)
    else:
        todo = [p for p in points if p not in _cache]
        _cache.update(run_points(todo, spec, jobs, engine))
        by_point = _cache
    rows = [r for p in points for r in by_point[p]]
    return SweepTable(spec.variable, rows)


def run_grid(specs: Sequence[SweepSpec], jobs: int = 1, engine: str = "fast") -> list[SweepTable]:
    """Several sweeps sharing one result cache (specs must agree on everything but the axis)."""
    cache: dict[Point, list[dict]] = {}
    return [run_sweep(s, jobs, engine, _cache=cache) for s in specs]


# -- output ------------------------------------------------------------------------------

FORMATS = ("csv", "json", "plotdata")


def to_csv(rows: Sequence[dict], columns: Sequence[str] = ROW_COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def from_csv(text: str) -> list[dict]:
    out = []
    for r in csv.DictReader(io.StringIO(text)):
        out.append({k: (v if k == "policy" else _num(v)) for k, v in r.items()})
    return out


def _num(v: str):
    if v in ("", "None"):
        return None
    try:
        return int(v)
    except ValueError:
        return float(v)


def plotdata(table: SweepTable) -> dict:
    """Per-policy (x, y) series: x the swept value, y the mean makespan."""
    series: dict[str, dict[str, list]] = {}
    for a in sorted(table.aggregate(), key=lambda a: (a["policy"], a["value"])):
        s = series.setdefault(a["policy"], {"x": [], "y": []})
        s["x"].append(a["value"])
        s["y"].append(a["mean_makespan"])
    return {"variable": table.variable, "series": series}


def render(tables: Sequence[SweepTable], fmt: str) -> str:
    if fmt == "csv":
        rows = []
        for t in tables:
            rows.extend(t.rows)
        return to_csv(rows)
    if fmt == "json":
        return json.dumps(
            [{"variable": t.variable, "aggregate": t.aggregate(), "rows": t.rows} for t in tables],
            indent=1, sort_keys=True,
        ) + "\n"
    if fmt == "plotdata":
        return json.dumps([plotdata(t) for t in tables], indent=1, sort_keys=True) + "\n"
    raise ConfigError(f"unknown format {fmt!r}; expected one of {', '.join(FORMATS)}")


def emit(tables: SweepTable | Sequence[SweepTable], fmt: str, path: str | Path | None = None) -> str:
    if isinstance(tables, SweepTable):
        tables = [tables]
    text = render(tables, fmt)
    if path is not None:
        path = Path(path)
        try:
            path.write_text(text)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc
    return text


# -- headline numbers ----------------------------------------------------------------


def improvement(tables: Sequence[SweepTable], better: Policy, base: Policy) -> dict[Point, float]:
    """1 - mean(better)/mean(base) per distinct grid point."""
    spans: dict[tuple[Point, str], list[int]] = {}
    for t in tables:
        for r in t.rows:
            key = ((r["D"], r["I"], r["S1"]), r["policy"])
            spans.setdefault(key, [])
    seen = set()
    for t in tables:
        for r in t.rows:
            tag = (r["D"], r["I"], r["S1"], r["workload"], r["policy"])
            if tag in seen:
                continue
            seen.add(tag)
            spans[((r["D"], r["I"], r["S1"]), r["policy"])].append(r["makespan"])
    out = {}
    for (pt, pol), v in spans.items():
        if pol != better.value:
            continue
        b = spans.get((pt, base.value))
        if b:
            out[pt] = 1.0 - statistics.fmean(v) / statistics.fmean(b)
    return out
