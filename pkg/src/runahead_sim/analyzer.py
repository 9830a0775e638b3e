"""Offline analysis of a trace with runahead enabled.

For every access the analysis derives, in one forward pass:

* its miss class at the moment its data was fetched (a line still marked
  prefetched-unused reports the class of the prefetch that brought it in);
* ``lead``: cycles between that prefetch and the access's own normal-mode
  issue, summed from the delays of the accesses in between;
* ``duration``: how long the core waits on the data, i.e. the runahead
  duration ``max(lat_mem - lead - gap, 0)`` for an L2 miss, 0 otherwise;
* ``window``: the later accesses whose runahead-mode issue time falls in
  ``(gap, gap + duration]`` after the trigger's issue.

:func:`analyze` additionally drops window prefetches that would evict a
prefetched-but-unused line and stretches each runahead for as long as the
next access's load latency exceeds the time needed to reach it, producing the
skip set and step counter values consumed by the ADAPTIVE policy.

Entry gating (indirect flag, idle MSHRs) and MSHR exhaustion inside a
runahead are tracked with the same rules the executor applies, so the plan
describes the run that will actually happen.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .cache import CacheConfig, CacheModel, MissClass
from .config import ConfigError
from .fsm import MAX_RETRY
from .policy import RunaheadConfig
from .workload import Trace, runahead_interval


@dataclass(frozen=True)
class AccessAnalysis:
    """Per-access analysis result; indices are 1-based.

    ``delay`` is the number of cycles between the access's data-use point and
    the resumption of normal execution: the stall, or the runahead plus its
    exit overhead when an episode was entered.
    """

    index: int
    miss_class: MissClass
    duration: int
    window: tuple[int, ...] = ()
    prefetched_by: int | None = None
    lead: int = 0
    entered: bool = False
    delay: int = 0


@dataclass
class RunaheadPlan:
    per_access: list[AccessAnalysis] = field(default_factory=list)
    skip: set[tuple[int, int]] = field(default_factory=set)
    steps: dict[int, int] = field(default_factory=dict)
    n_accesses: int = 0
    seed: int | None = None

    def matches(self, trace: Trace) -> bool:
        return self.n_accesses == len(trace) and self.seed == trace.meta.get("seed")

    def __eq__(self, other) -> bool:
        if not isinstance(other, RunaheadPlan):
            return NotImplemented
        return (
            self.skip == other.skip
            and self.steps == other.steps
            and self.n_accesses == other.n_accesses
            and self.seed == other.seed
        )


# -- the three per-access quantities ---------------------------------------------


def runahead_duration(miss_class: MissClass, lead: int, gap: int, lat_mem: int) -> int:
    """Cycles the core waits on an access's data; 0 unless it came from memory."""
    if miss_class != MissClass.L2_MISS:
        return 0
    return max(lat_mem - lead - gap, 0)


def runahead_window(trace: Trace, i: int, duration: int) -> list[int]:
    """1-based indices j > i whose stall-free issue offset T(i, j) is in (gap_i, gap_i + duration]."""
    if duration <= 0:
        return []
    gaps, posts = trace.gaps, trace.posts
    lo = gaps[i - 1]
    hi = lo + duration
    out = []
    t = 0
    for j in range(i + 1, len(trace) + 1):
        t += 1 + gaps[j - 2] + posts[j - 2]
        if t > hi:
            break
        if t > lo:
            out.append(j)
    return out


def prefetch_lead(
    i: int,
    prefetched_by: int | None,
    analyses: list[AccessAnalysis],
    trace: Trace | None = None,
    prefetched_at: int | None = None,
) -> int:
    """Cycles between the prefetch of access ``i``'s line and ``i``'s normal-mode issue.

    The runahead of ``prefetched_by`` replays exactly the stall-free work that
    normal mode later repeats up to ``i``, so the lead is what normal mode
    adds on top: the delay at every access from the trigger to ``i - 1``.
    For L2 misses that is the runahead duration plus exit overhead; for other
    accesses it is the residual stall ``max(latency - lead - gap, 0)``.

    When the line was brought in while pre-executing a different access
    ``prefetched_at`` (two accesses sharing a line), the stall-free distance
    between the two positions is added (``prefetched_at < i``) or subtracted.
    """
    if prefetched_by is None:
        return 0
    lead = sum(a.delay for a in analyses[prefetched_by - 1 : i - 1])
    if prefetched_at is not None and prefetched_at != i:
        if trace is None:
            raise ValueError("trace is needed when prefetched_at differs from i")
        lo, hi = sorted((prefetched_at, i))
        gap = runahead_interval(trace, lo, hi)
        lead += gap if prefetched_at < i else -gap
    return lead


# -- the forward pass -------------------------------------------------------------


class _Pass:
    def __init__(self, trace: Trace, config: CacheConfig, rconf: RunaheadConfig, adaptive: bool):
        self.trace = trace
        self.config = config
        self.rconf = rconf
        self.adaptive = adaptive
        self.cache = CacheModel(config)
        self.lat = config.latencies
        self.inflight: list[int] = []
        self.analyses: list[AccessAnalysis] = []
        self.skip: set[tuple[int, int]] = set()
        self.steps: dict[int, int] = {}

    def _busy(self, when: int) -> int:
        return sum(1 for a in self.inflight if a > when)

    def _prune(self, now: int) -> None:
        self.inflight = [a for a in self.inflight if a > now]

    def _prefetch(self, trigger: int, j: int, when: int, retry: list[int]) -> bool:
        """Runahead execution of access j (0-based) at ``when``; False aborts the episode."""
        addr = self.trace.addrs[j]
        cache = self.cache
        cls = cache.classify(addr)
        if cls == MissClass.L1_HIT:
            cache.load(addr, is_prefetch=True)
            return True
        if self._busy(when) >= self.config.mshr_count:
            if retry[0] >= MAX_RETRY:
                return False
            retry[0] += 1
            return True
        cache.load(addr, is_prefetch=True, record=(trigger, j, cls))
        self.inflight.append(when + 1 + self.lat[cls])
        return True

    def run(self) -> None:
        tr = self.trace
        addrs, gaps, posts, indirect = tr.addrs, tr.gaps, tr.posts, tr.indirect
        n = len(tr)
        cache = self.cache
        lat = self.lat
        lat_mem = self.config.lat_mem
        ovh = self.config.runahead_overhead
        mshr = self.config.mshr_count
        need_idle = self.rconf.entry_idle_mshr
        clock = 0
        for i in range(n):
            t = clock
            self._prune(t)
            addr, gap, post = addrs[i], gaps[i], posts[i]
            rec = cache.prefetch_record(addr)
            if rec is not None:
                trigger, at, cls = rec
                lead = prefetch_lead(i + 1, trigger + 1, self.analyses, tr, at + 1)
                cache.load(addr)
            else:
                trigger, lead = None, 0
                cls = cache.load(addr)
                if cls != MissClass.L1_HIT:
                    self.inflight.append(t + 1 + lat[cls])
            duration = runahead_duration(cls, lead, gap, lat_mem)
            wait = duration if cls == MissClass.L2_MISS else max(lat[cls] - lead - gap, 0)
            use = t + 1 + gap
            entered = (
                duration > 0
                and indirect[i]
                and mshr - (self._busy(use) - 1) >= need_idle
            )
            window: tuple[int, ...] = ()
            delay = wait
            if entered:
                window, duration, exit_at = self._episode(i, t, use, duration)
                delay = max(exit_at + ovh, use + wait) - use
            self.analyses.append(
                AccessAnalysis(
                    index=i + 1,
                    miss_class=cls,
                    duration=duration,
                    window=window,
                    prefetched_by=None if trigger is None else trigger + 1,
                    lead=lead,
                    entered=entered,
                    delay=delay,
                )
            )
            clock = use + delay + post

    def _episode(self, i: int, t: int, use: int, duration: int):
        """Run one runahead; returns (window, final duration, exit time)."""
        tr = self.trace
        gaps, posts, addrs = tr.gaps, tr.posts, tr.addrs
        n = len(tr)
        cache = self.cache
        retry = [0]
        candidates = [j - 1 for j in runahead_window(tr, i + 1, duration)]
        window: list[int] = []
        when = use + posts[i]
        steps_to = {}
        for j in candidates:
            steps_to[j] = when
            when += 1 + gaps[j] + posts[j]
        if self.adaptive and not candidates:
            # nothing to prefetch: exit at once, the overhead hides in the stall
            self.steps[i + 1] = 0
            return (), 0, use
        if self.adaptive:
            # accesses issued before the runahead starts; empty under this skeleton
            for j in range(i + 1, candidates[0]):
                cache.load(addrs[j])
        for j in candidates:
            window.append(j + 1)
            if self.adaptive and cache.would_evict_useful(addrs[j]):
                self.skip.add((i + 1, j + 1))
                continue
            if not self._prefetch(i, j, steps_to[j], retry):
                # rolled back: no extension, episode ends here
                if self.adaptive:
                    self.steps[i + 1] = duration
                return tuple(window), duration, steps_to[j]
        if self.adaptive:
            j = candidates[-1]
            at = steps_to[j]
            while j + 1 < n:
                nxt = j + 1
                hop = 1 + gaps[j] + posts[j]
                nxt_addr = addrs[nxt]
                if not hop < cache.latency(nxt_addr):
                    break
                if cache.would_evict_useful(nxt_addr):
                    break
                at += hop
                if (
                    cache.classify(nxt_addr) != MissClass.L1_HIT
                    and self._busy(at) >= self.config.mshr_count
                ):
                    break
                self._prefetch(i, nxt, at, retry)
                # window now closes right after nxt issues
                duration = at + 1 - use
                window.append(nxt + 1)
                j = nxt
        if self.adaptive:
            self.steps[i + 1] = duration
        return tuple(window), duration, use + duration


def analyze_basic(
    trace: Trace, config: CacheConfig | None = None, rconf: RunaheadConfig | None = None
) -> list[AccessAnalysis]:
    """Per-access analysis of plain runahead: every window access is prefetched."""
    p = _Pass(trace, config or CacheConfig(), rconf or RunaheadConfig(), adaptive=False)
    p.run()
    return p.analyses


def analyze(
    trace: Trace, config: CacheConfig | None = None, rconf: RunaheadConfig | None = None
) -> RunaheadPlan:
    """Adaptive plan: skip pairs and per-trigger step counter values."""
    p = _Pass(trace, config or CacheConfig(), rconf or RunaheadConfig(), adaptive=True)
    p.run()
    return RunaheadPlan(
        per_access=p.analyses,
        skip=p.skip,
        steps=p.steps,
        n_accesses=len(trace),
        seed=trace.meta.get("seed"),
    )


# -- plan files -------------------------------------------------------------------


class PlanFormatError(ValueError):
    pass


def write_plan(plan: RunaheadPlan, path: str | Path) -> None:
    with Path(path).open("w") as fh:
        fh.write(f"# n={plan.n_accesses} seed={plan.seed}\n")
        for i in sorted(plan.steps):
            fh.write(f"STEP {i} {plan.steps[i]}\n")
        for i, j in sorted(plan.skip):
            fh.write(f"SKIP {i} {j}\n")


def read_plan(path: str | Path) -> RunaheadPlan:
    path = Path(path)
    plan = RunaheadPlan()
    with path.open() as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if line.startswith("#"):
                for item in line[1:].split():
                    k, _, v = item.partition("=")
                    if k == "n":
                        plan.n_accesses = int(v)
                    elif k == "seed":
                        plan.seed = None if v == "None" else int(v)
                continue
            if not line:
                continue
            parts = line.split()
            try:
                if parts[0] == "STEP" and len(parts) == 3:
                    plan.steps[int(parts[1])] = int(parts[2])
                elif parts[0] == "SKIP" and len(parts) == 3:
                    plan.skip.add((int(parts[1]), int(parts[2])))
                else:
                    raise ValueError
            except ValueError:
                raise PlanFormatError(f"{path}:{lineno}: bad plan record {line!r}") from None
    return plan


def check_plan(plan: RunaheadPlan, trace: Trace) -> None:
    if not plan.matches(trace):
        raise ConfigError(
            f"plan (n={plan.n_accesses}, seed={plan.seed}) does not match trace "
            f"(n={len(trace)}, seed={trace.meta.get('seed')})"
        )
