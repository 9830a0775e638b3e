"""Compiled engine for sweeps.

Re-expresses :class:`~runahead_sim.cache.CacheModel`, the executor's episode
walk and the adaptive planning pass over flat integer arrays so numba can
compile them.  ADAPTIVE decisions are made online in the same pass; because
the offline plan describes exactly the run that follows it, the outcome is
identical to ``analyze`` + ``run``.  The test-suite checks reports from both
engines field by field.

Shim-driven runs, fault injection and per-episode records are only available
from the reference executor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .cache import CacheConfig
from .policy import Policy, RunaheadConfig
from .workload import Trace

_POLICY_CODE = {Policy.NONE: 0, Policy.BS: 1, Policy.BS_S: 2, Policy.ADAPTIVE: 3}


@dataclass(frozen=True)
class RunSummary:
    seed: int | None
    policy: Policy
    makespan: int
    episodes: int
    useless: int
    short: int
    overlap: int
    prefetch_issued: int
    prefetch_used: int
    skipped: int
    prefetch_evicted_unused: int
    prefetch_conflicts: int
    prefetch_dropped: int
    stall_cycles: int

    def to_row(self) -> dict:
        return {
            "seed": self.seed,
            "policy": self.policy.value,
            "makespan": self.makespan,
            "episodes": self.episodes,
            "useless": self.useless,
            "short": self.short,
            "overlap": self.overlap,
            "prefetch_issued": self.prefetch_issued,
            "prefetch_used": self.prefetch_used,
            "skipped": self.skipped,
        }

    @property
    def prefetch_accuracy(self) -> float:
        """Share of issued prefetches later consumed by a demand access."""
        return self.prefetch_used / self.prefetch_issued if self.prefetch_issued else 0.0


def summarize(report) -> RunSummary:
    """RunSummary of a reference :class:`~runahead_sim.executor.SimReport`."""
    from .executor import EpisodeKind

    c = report.kind_counts()
    return RunSummary(
        seed=report.seed,
        policy=report.policy,
        makespan=report.makespan,
        episodes=len(report.episodes),
        useless=c[EpisodeKind.USELESS],
        short=c[EpisodeKind.SHORT],
        overlap=c[EpisodeKind.OVERLAP],
        prefetch_issued=report.prefetch_issued,
        prefetch_used=report.prefetch_used,
        skipped=report.skipped,
        prefetch_evicted_unused=report.prefetch_evicted_unused,
        prefetch_conflicts=report.prefetch_conflicts,
        prefetch_dropped=report.prefetch_dropped,
        stall_cycles=report.stall_cycles,
    )


# -- cache over arrays ------------------------------------------------------------
# L1: t1[set, way] line, f1 prefetched-unused flag, ra/rc the prefetch record
# (issue cycle, miss class).  Ways are ordered LRU first.  ctr[0] counts
# unused lines evicted by any load, ctr[1] those evicted by a prefetch.


@njit(cache=True)
def _find(row, n, line):
    for k in range(n):
        if row[k] == line:
            return k
    return -1


@njit(cache=True)
def _l1_drop(t1, f1, ra, rc, n1, s, k):
    for q in range(k, n1[s] - 1):
        t1[s, q] = t1[s, q + 1]
        f1[s, q] = f1[s, q + 1]
        ra[s, q] = ra[s, q + 1]
        rc[s, q] = rc[s, q + 1]
    n1[s] -= 1


@njit(cache=True)
def _l1_push(t1, f1, ra, rc, n1, s, line, flag, a, c):
    q = n1[s]
    t1[s, q] = line
    f1[s, q] = flag
    ra[s, q] = a
    rc[s, q] = c
    n1[s] += 1


@njit(cache=True)
def _l2_drop(t2, n2, s, k):
    for q in range(k, n2[s] - 1):
        t2[s, q] = t2[s, q + 1]
    n2[s] -= 1


@njit(cache=True)
def _classify(t1, n1, t2, n2, m1, m2, line):
    if _find(t1[line & m1], n1[line & m1], line) >= 0:
        return 0
    if _find(t2[line & m2], n2[line & m2], line) >= 0:
        return 1
    return 2


@njit(cache=True)
def _load(t1, f1, ra, rc, n1, t2, n2, ctr, m1, m2, w1, w2, line, pf, a, c):
    s1 = line & m1
    s2 = line & m2
    k = _find(t1[s1], n1[s1], line)
    k2 = _find(t2[s2], n2[s2], line)
    if k >= 0:
        flag, aa, cc = f1[s1, k], ra[s1, k], rc[s1, k]
        _l1_drop(t1, f1, ra, rc, n1, s1, k)
        if not pf:
            flag = 0
        _l1_push(t1, f1, ra, rc, n1, s1, line, flag, aa, cc)
        _l2_drop(t2, n2, s2, k2)
        t2[s2, n2[s2]] = line
        n2[s2] += 1
        return 0
    if k2 >= 0:
        _l2_drop(t2, n2, s2, k2)
        cls = 1
    else:
        if n2[s2] >= w2:
            victim = t2[s2, 0]
            _l2_drop(t2, n2, s2, 0)
            vs = victim & m1
            kv = _find(t1[vs], n1[vs], victim)
            if kv >= 0:
                if f1[vs, kv]:
                    ctr[0] += 1
                    ctr[1] += pf
                _l1_drop(t1, f1, ra, rc, n1, vs, kv)
        cls = 2
    t2[s2, n2[s2]] = line
    n2[s2] += 1
    if n1[s1] >= w1:
        if f1[s1, 0]:
            ctr[0] += 1
            ctr[1] += pf
        _l1_drop(t1, f1, ra, rc, n1, s1, 0)
    _l1_push(t1, f1, ra, rc, n1, s1, line, 1 if pf else 0, a, c)
    return cls


@njit(cache=True)
def _would_evict(t1, f1, n1, t2, n2, m1, m2, w1, w2, line):
    s1 = line & m1
    if _find(t1[s1], n1[s1], line) >= 0:
        return False
    room = n1[s1] < w1
    s2 = line & m2
    if _find(t2[s2], n2[s2], line) < 0 and n2[s2] >= w2:
        victim = t2[s2, 0]
        vs = victim & m1
        kv = _find(t1[vs], n1[vs], victim)
        if kv >= 0:
            if f1[vs, kv]:
                return True
            if vs == s1:
                # back-invalidation frees an L1 way before the L1 install
                room = True
    if not room and f1[s1, 0]:
        return True
    return False


@njit(cache=True)
def _busy(infl, nin, when):
    b = 0
    for k in range(nin):
        if infl[k] > when:
            b += 1
    return b


# -- the run ----------------------------------------------------------------------


@njit(cache=True)
def _simulate(lines, gaps, posts, indirect, geo, lat, mshr, ovh, need, short_cut, policy):
    w1, s1n, w2, s2n = geo[0], geo[1], geo[2], geo[3]
    m1, m2 = s1n - 1, s2n - 1
    t1 = np.zeros((s1n, w1), np.int64)
    f1 = np.zeros((s1n, w1), np.int64)
    ra = np.zeros((s1n, w1), np.int64)
    rc = np.zeros((s1n, w1), np.int64)
    n1 = np.zeros(s1n, np.int64)
    t2 = np.zeros((s2n, w2), np.int64)
    n2 = np.zeros(s2n, np.int64)
    ctr = np.zeros(2, np.int64)
    n = lines.shape[0]
    infl = np.zeros(n + 16, np.int64)
    nin = 0
    # makespan episodes useless short overlap issued used skipped dropped stall
    out = np.zeros(12, np.int64)
    prior_first, prior_last = -1, -1
    clock = 0
    for i in range(n):
        t = clock
        q = 0
        for k in range(nin):
            if infl[k] > t:
                infl[q] = infl[k]
                q += 1
        nin = q
        line = lines[i]
        gap = gaps[i]
        post = posts[i]
        sa = line & m1
        k = _find(t1[sa], n1[sa], line)
        if k >= 0 and f1[sa, k]:
            cls = rc[sa, k]
            arrival = ra[sa, k] + 1 + lat[cls]
            _load(t1, f1, ra, rc, n1, t2, n2, ctr, m1, m2, w1, w2, line, False, 0, 0)
            out[6] += 1
        else:
            cls = _load(t1, f1, ra, rc, n1, t2, n2, ctr, m1, m2, w1, w2, line, False, 0, 0)
            arrival = t + 1 + lat[cls]
            if cls != 0:
                infl[nin] = arrival
                nin += 1
        use = t + 1 + gap
        wait = arrival - use
        if wait < 0:
            wait = 0
        delay = wait
        if (
            policy != 0
            and cls == 2
            and wait > 0
            and indirect[i]
            and mshr - (_busy(infl, nin, use) - 1) >= need
        ):
            data_return = use + wait
            p = use + post
            j = i + 1
            retry = 0
            aborted = False
            exit_at = data_return
            first, last = -1, -1
            npf = 0
            while j < n and p < data_return:
                ln = lines[j]
                if policy == 2 and _would_evict(t1, f1, n1, t2, n2, m1, m2, w1, w2, ln):
                    exit_at = p
                    break
                if first < 0:
                    first = j
                last = j
                if policy == 3 and _would_evict(t1, f1, n1, t2, n2, m1, m2, w1, w2, ln):
                    out[7] += 1
                else:
                    c = _classify(t1, n1, t2, n2, m1, m2, ln)
                    if c != 0 and _busy(infl, nin, p) >= mshr:
                        out[8] += 1
                        if retry < 3:
                            retry += 1
                        else:
                            aborted = True
                            exit_at = p
                            break
                    elif c == 0:
                        _load(t1, f1, ra, rc, n1, t2, n2, ctr, m1, m2, w1, w2, ln, True, 0, 0)
                    else:
                        _load(t1, f1, ra, rc, n1, t2, n2, ctr, m1, m2, w1, w2, ln, True, p, c)
                        infl[nin] = p + 1 + lat[c]
                        nin += 1
                        npf += 1
                p += 1 + gaps[j] + posts[j]
                j += 1
            if policy == 3 and not aborted:
                if first < 0:
                    exit_at = use
                else:
                    jl = last
                    at = p - 1 - gaps[jl] - posts[jl]
                    while jl + 1 < n:
                        nxt = jl + 1
                        hop = 1 + gaps[jl] + posts[jl]
                        ln = lines[nxt]
                        c = _classify(t1, n1, t2, n2, m1, m2, ln)
                        if not hop < lat[c]:
                            break
                        if _would_evict(t1, f1, n1, t2, n2, m1, m2, w1, w2, ln):
                            break
                        if c != 0 and _busy(infl, nin, at + hop) >= mshr:
                            break
                        at += hop
                        if c == 0:
                            _load(t1, f1, ra, rc, n1, t2, n2, ctr, m1, m2, w1, w2, ln, True, 0, 0)
                        else:
                            _load(t1, f1, ra, rc, n1, t2, n2, ctr, m1, m2, w1, w2, ln, True, at, c)
                            infl[nin] = at + 1 + lat[c]
                            nin += 1
                            npf += 1
                        exit_at = at + 1
                        last = nxt
                        jl = nxt
            resume = exit_at + ovh
            if resume < data_return:
                resume = data_return
            delay = resume - use
            out[1] += 1
            out[5] += npf
            if npf == 0:
                out[2] += 1
            elif prior_first >= 0 and first >= prior_first and last <= prior_last:
                out[4] += 1
            elif exit_at - use < short_cut:
                out[3] += 1
            if first >= 0 and (prior_first < 0 or last >= prior_last):
                prior_first, prior_last = first, last
        out[9] += wait
        clock = use + delay + post
    out[0] = clock
    out[10] = ctr[0]
    out[11] = ctr[1]
    return out


def trace_arrays(trace: Trace, config: CacheConfig):
    return line_arrays(trace.addrs, trace.indirect, trace.gaps, trace.posts, config)


def line_arrays(addrs, indirect, gaps, posts, config: CacheConfig):
    shift = config.line_size.bit_length() - 1
    return (
        np.asarray(addrs, dtype=np.int64) >> shift,
        np.asarray(gaps, dtype=np.int64),
        np.asarray(posts, dtype=np.int64),
        np.asarray(indirect, dtype=np.bool_),
    )


def simulate_arrays(
    arrays,
    config: CacheConfig,
    policy: Policy,
    rconf: RunaheadConfig,
    seed: int | None = None,
) -> RunSummary:
    """Run on ``(lines, gaps, posts, indirect)`` from :func:`line_arrays`."""
    lines, gaps, posts, indirect = arrays
    geo = np.array([config.w1, config.s1, config.w2, config.s2], dtype=np.int64)
    lat = np.array(config.latencies, dtype=np.int64)
    out = _simulate(
        lines, gaps, posts, indirect, geo, lat,
        config.mshr_count, config.runahead_overhead, rconf.entry_idle_mshr,
        rconf.short_cutoff(config.runahead_overhead), _POLICY_CODE[policy],
    )
    return RunSummary(
        seed=seed,
        policy=policy,
        makespan=int(out[0]),
        episodes=int(out[1]),
        useless=int(out[2]),
        short=int(out[3]),
        overlap=int(out[4]),
        prefetch_issued=int(out[5]),
        prefetch_used=int(out[6]),
        skipped=int(out[7]),
        prefetch_dropped=int(out[8]),
        stall_cycles=int(out[9]),
        prefetch_evicted_unused=int(out[10]),
        prefetch_conflicts=int(out[11]),
    )


def simulate(
    trace: Trace,
    config: CacheConfig | None = None,
    policy: Policy | str = Policy.BS,
    rconf: RunaheadConfig | None = None,
) -> RunSummary:
    """Same result as the reference executor (ADAPTIVE: with the analyzer's plan)."""
    config = config or CacheConfig()
    if isinstance(policy, str):
        policy = Policy.parse(policy)
    return simulate_arrays(
        trace_arrays(trace, config), config, policy, rconf or RunaheadConfig(), trace.meta.get("seed")
    )
