"""Cycle-level execution of a trace on a scalar in-order core.

Normal mode follows the timing skeleton in :mod:`runahead_sim.workload`.  When
an indirect access misses L2 and has to stall, the runahead control unit may
enter runahead: the core keeps issuing the following accesses without
stalling, turning each one into a prefetch, until the stalled data returns (or
the armed step counter expires), then pays ``runahead_overhead`` cycles to
restore the checkpoint and resumes at the stalled access's use point.

Only runahead prefetches are limited by the MSHR count; normal-mode demand
fetches always issue.
"""

from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Iterable

from .analyzer import RunaheadPlan, analyze, check_plan
from .cache import CacheConfig, CacheModel, MissClass
from .config import ConfigError
from .fsm import MAX_RETRY, Event, RcuMode, RcuState, step_fsm
from .policy import Policy, RunaheadConfig
from .shim import RunaheadShim, adaptive_runahead
from .workload import Trace


class EpisodeKind(enum.Enum):
    USELESS = "useless"
    OVERLAP = "overlap"
    SHORT = "short"
    USEFUL = "useful"


@dataclass(frozen=True)
class Episode:
    trigger: int  # 1-based index of the stalled access
    start: int  # cycle runahead begins (trigger's data-use point)
    end: int  # cycle runahead mode is left, before the exit overhead
    resume: int  # cycle normal execution resumes
    stall_cycles: int  # cycles until the trigger's data returns
    executed: tuple[int, ...] = ()
    prefetched: tuple[int, ...] = ()
    skipped: tuple[int, ...] = ()
    aborted: bool = False
    kind: EpisodeKind = EpisodeKind.USEFUL

    @property
    def duration(self) -> int:
        return self.end - self.start

    @property
    def prefetch_count(self) -> int:
        return len(self.prefetched)


def classify_episode(
    episode: Episode, prior: Iterable[Episode] = (), short_cutoff: int = 10
) -> EpisodeKind:
    """USELESS > OVERLAP > SHORT > USEFUL, first match wins.

    OVERLAP means every access this episode pre-executed was already covered
    by one earlier episode.
    """
    if episode.prefetch_count == 0:
        return EpisodeKind.USELESS
    mine = set(episode.executed)
    for other in prior:
        if mine <= set(other.executed):
            return EpisodeKind.OVERLAP
    if episode.duration < short_cutoff:
        return EpisodeKind.SHORT
    return EpisodeKind.USEFUL


@dataclass
class SimReport:
    policy: Policy
    seed: int | None
    n_accesses: int
    makespan: int
    episodes: list[Episode] = field(default_factory=list)
    prefetch_issued: int = 0
    prefetch_used: int = 0
    prefetch_evicted_unused: int = 0  # by any load
    prefetch_conflicts: int = 0  # by a runahead prefetch
    prefetch_dropped: int = 0
    skipped: int = 0
    stall_cycles: int = 0
    # (miss class, wait cycles) per access, when requested
    access_log: list[tuple[int, int]] | None = None

    def kind_counts(self) -> dict[EpisodeKind, int]:
        out = {k: 0 for k in EpisodeKind}
        for ep in self.episodes:
            out[ep.kind] += 1
        return out

    def to_row(self) -> dict:
        c = self.kind_counts()
        return {
            "seed": self.seed,
            "policy": self.policy.value,
            "makespan": self.makespan,
            "episodes": len(self.episodes),
            "useless": c[EpisodeKind.USELESS],
            "short": c[EpisodeKind.SHORT],
            "overlap": c[EpisodeKind.OVERLAP],
            "prefetch_issued": self.prefetch_issued,
            "prefetch_used": self.prefetch_used,
            "skipped": self.skipped,
        }

    def to_dict(self) -> dict:
        d = asdict(self)
        d["policy"] = self.policy.value
        for ep in d["episodes"]:
            ep["kind"] = ep["kind"].value
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


CSV_COLUMNS = (
    "seed", "policy", "makespan", "episodes", "useless", "short", "overlap",
    "prefetch_issued", "prefetch_used", "skipped",
)

FaultHook = Callable[[int, int], "Event | None"]


class _Machine:
    """One execution; the shim reads and arms ``rcu`` / ``staged`` through it."""

    def __init__(self, trace, config, policy, plan, rconf, driver, faults, log):
        self.trace = trace
        self.config = config
        self.policy = policy
        self.plan = plan
        self.rconf = rconf
        self.faults = faults
        self.cache = CacheModel(config)
        self.rcu = RcuState()
        self.staged: int | None = None  # 1-based index of the access being pre-executed
        self.skip_staged = False
        self.inflight: list[int] = []
        self.shim: RunaheadShim | None = None
        if driver == "shim":
            self.shim = RunaheadShim(plan)
            self.shim.attach(self)
        self.report = SimReport(policy, trace.meta.get("seed"), len(trace), 0)
        if log:
            self.report.access_log = []
        self._last: Episode | None = None  # prior episode reaching furthest

    @property
    def trigger(self) -> int | None:
        return self.rcu.trigger_index

    def _busy(self, when: int) -> int:
        return sum(1 for a in self.inflight if a > when)

    def _fire(self, event: Event) -> None:
        self.rcu = step_fsm(self.rcu, event, self.rcu.trigger_index)

    # -- policy hooks -------------------------------------------------------------

    def _on_entry(self, i: int) -> None:
        if self.policy is not Policy.ADAPTIVE:
            return
        if self.shim is not None:
            adaptive_runahead(self.shim)
        else:
            self.rcu = replace(self.rcu, step_counter=self.plan.steps.get(i))

    def _on_stage(self, i: int, j: int) -> bool:
        self.staged = j
        self.skip_staged = False
        if self.policy is Policy.ADAPTIVE:
            if self.shim is not None:
                adaptive_runahead(self.shim)
            else:
                self.skip_staged = (i, j) in self.plan.skip
        skip = self.skip_staged
        self.staged = None
        self.skip_staged = False
        return skip

    def _on_exit(self) -> None:
        if self.shim is not None:
            adaptive_runahead(self.shim)

    # -- main loop ------------------------------------------------------------------

    def run(self) -> SimReport:
        tr = self.trace
        addrs, gaps, posts, indirect = tr.addrs, tr.gaps, tr.posts, tr.indirect
        cache = self.cache
        lat = self.config.latencies
        mshr = self.config.mshr_count
        need_idle = self.rconf.entry_idle_mshr
        runahead_on = self.policy is not Policy.NONE
        rep = self.report
        log = rep.access_log
        clock = 0
        for i in range(len(tr)):
            t = clock
            self.inflight = [a for a in self.inflight if a > t]
            addr, gap, post = addrs[i], gaps[i], posts[i]
            rec = cache.prefetch_record(addr)
            if rec is not None:
                issued_at, cls = rec
                arrival = issued_at + 1 + lat[cls]
                cache.load(addr)
                rep.prefetch_used += 1
            else:
                cls = cache.load(addr)
                arrival = t + 1 + lat[cls]
                if cls != MissClass.L1_HIT:
                    self.inflight.append(arrival)
            use = t + 1 + gap
            wait = max(arrival - use, 0)
            if log is not None:
                log.append((int(cls), wait))
            delay = wait
            if runahead_on and cls == MissClass.L2_MISS and wait > 0:
                self.rcu = step_fsm(self.rcu, Event.MISS_DETECTED, i + 1)
                idle = mshr - (self._busy(use) - 1)
                if indirect[i] and idle >= need_idle:
                    resume = self._episode(i, use, use + wait)
                    delay = resume - use
                else:
                    self._fire(Event.ENTRY_REJECTED)
            rep.stall_cycles += wait
            clock = use + delay + post
        rep.makespan = clock
        rep.prefetch_evicted_unused = cache.unused_evictions
        rep.prefetch_conflicts = cache.prefetch_evictions
        return rep

    def _episode(self, i: int, use: int, data_return: int) -> int:
        """Run the runahead triggered by access i (0-based); returns the resume cycle."""
        tr = self.trace
        addrs, gaps, posts = tr.addrs, tr.gaps, tr.posts
        n = len(tr)
        cache = self.cache
        lat = self.config.latencies
        mshr = self.config.mshr_count
        rep = self.report
        trig = i + 1
        self._fire(Event.ENTRY_OK)  # -> MERE_ENTER
        self._fire(Event.ENTRY_OK)  # -> MERE_EXECUTE
        self._on_entry(trig)
        executed, prefetched, skipped = [], [], []
        aborted = False
        exit_at = None
        p = use + posts[i]
        j = i + 1
        while j < n:
            step = self.rcu.step_counter
            end = use + step if step is not None else data_return
            if p >= end:
                break
            if self.policy is Policy.BS_S and cache.would_evict_useful(addrs[j]):
                exit_at = p
                break
            skip = self._on_stage(trig, j + 1)
            executed.append(j + 1)
            if skip:
                skipped.append(j + 1)
            else:
                addr = addrs[j]
                cls = cache.classify(addr)
                err = self.faults(trig, j + 1) if self.faults is not None else None
                if err is None and cls != MissClass.L1_HIT and self._busy(p) >= mshr:
                    err = Event.MSHR_EXHAUSTED
                if err is not None:
                    self._fire(err)
                    rep.prefetch_dropped += 1
                    if self.rcu.retry < MAX_RETRY:
                        self._fire(Event.RETRY_OK)
                    else:
                        self._fire(Event.RETRY_FAIL)  # -> NORMAL_EXIT
                        aborted = True
                        exit_at = p
                        break
                else:
                    if cls == MissClass.L1_HIT:
                        cache.load(addr, is_prefetch=True)
                    else:
                        cache.load(addr, is_prefetch=True, record=(p, cls))
                        self.inflight.append(p + 1 + lat[cls])
                        prefetched.append(j + 1)
            p += 1 + gaps[j] + posts[j]
            j += 1
        step = self.rcu.step_counter
        if exit_at is None:
            exit_at = use + step if step is not None else data_return
        if not aborted:
            early = self.policy is Policy.BS_S and exit_at < data_return
            self._fire(Event.STEP_HIT if step is not None or early else Event.STALL_DATA_RETURNED)
            self._fire(Event.EXIT_DONE)  # -> PSEUDO_EXIT
            self._fire(Event.EXIT_DONE)  # -> NORMAL_EXIT
        self._fire(Event.EXIT_DONE)  # -> NORMAL
        assert self.rcu.state is RcuMode.NORMAL
        self._on_exit()
        resume = max(exit_at + self.config.runahead_overhead, data_return)
        ep = Episode(
            trigger=trig,
            start=use,
            end=exit_at,
            resume=resume,
            stall_cycles=data_return - use,
            executed=tuple(executed),
            prefetched=tuple(prefetched),
            skipped=tuple(skipped),
            aborted=aborted,
        )
        prior = (self._last,) if self._last is not None else ()
        kind = classify_episode(ep, prior, self.rconf.short_cutoff(self.config.runahead_overhead))
        ep = replace(ep, kind=kind)
        rep.episodes.append(ep)
        rep.prefetch_issued += len(prefetched)
        rep.skipped += len(skipped)
        if executed and (self._last is None or executed[-1] >= self._last.executed[-1]):
            self._last = ep
        return resume


def run(
    trace: Trace,
    config: CacheConfig | None = None,
    policy: Policy | str = Policy.BS,
    plan: RunaheadPlan | None = None,
    rconf: RunaheadConfig | None = None,
    driver: str = "builtin",
    faults: FaultHook | None = None,
    log_accesses: bool = False,
) -> SimReport:
    """Execute ``trace`` under ``policy``.

    ADAPTIVE needs a plan; one is computed with :func:`analyze` when not given.
    ``driver="shim"`` routes the ADAPTIVE decisions through the software shim
    instead of reading the plan directly.  ``faults(trigger, j)`` may return
    DATA_MISMATCH or PREFETCH_FAILURE to fail the pre-execution of access j.
    """
    config = config or CacheConfig()
    rconf = rconf or RunaheadConfig()
    if isinstance(policy, str):
        policy = Policy.parse(policy)
    if driver not in ("builtin", "shim"):
        raise ConfigError(f"unknown driver {driver!r}; expected builtin or shim")
    if driver == "shim" and policy is not Policy.ADAPTIVE:
        raise ConfigError("the shim driver only applies to the adaptive policy")
    if policy is Policy.ADAPTIVE:
        if plan is None:
            plan = analyze(trace, config, rconf)
        else:
            check_plan(plan, trace)
    return _Machine(trace, config, policy, plan, rconf, driver, faults, log_accesses).run()
