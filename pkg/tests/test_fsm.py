import itertools
from dataclasses import replace

import pytest

from runahead_sim.fsm import MAX_RETRY, TRANSITIONS, Event, ProtocolError, RcuMode, RcuState, step_fsm

E = Event
ENTER = [E.MISS_DETECTED, E.ENTRY_OK, E.ENTRY_OK]
LEAVE = [E.EXIT_DONE, E.EXIT_DONE, E.EXIT_DONE]

# each script starts and ends in NORMAL
SCRIPTS = {
    "reject": [E.MISS_DETECTED, E.ENTRY_REJECTED],
    "data_return": ENTER + [E.STALL_DATA_RETURNED] + LEAVE,
    "step_hit": ENTER + [E.STEP_HIT] + LEAVE,
    "mismatch_retry": ENTER + [E.DATA_MISMATCH, E.RETRY_OK, E.STALL_DATA_RETURNED] + LEAVE,
    "prefetch_failure_abort": ENTER + [E.PREFETCH_FAILURE, E.RETRY_FAIL, E.EXIT_DONE],
    "mshr_then_data": ENTER + [E.MSHR_EXHAUSTED, E.STALL_DATA_RETURNED, E.RETRY_OK,
                               E.STEP_HIT, E.RETRY_FAIL, E.EXIT_DONE],
    "error_then_step": ENTER + [E.DATA_MISMATCH, E.STEP_HIT] + LEAVE,
    "retry_limit": ENTER + [E.DATA_MISMATCH, E.RETRY_OK, E.PREFETCH_FAILURE, E.RETRY_OK,
                            E.MSHR_EXHAUSTED, E.RETRY_OK, E.DATA_MISMATCH, E.RETRY_FAIL,
                            E.EXIT_DONE],
}


def walk(events, seen=None):
    rcu = RcuState()
    for ev in events:
        if seen is not None:
            seen.add((rcu.state, ev))
        rcu = step_fsm(rcu, ev, 7)
    return rcu


def edge_coverage():
    seen = set()
    for events in SCRIPTS.values():
        assert walk(events, seen) == RcuState()
    return seen & set(TRANSITIONS), set(TRANSITIONS)


def test_every_edge_covered():
    covered, edges = edge_coverage()
    assert covered == edges, sorted((s.name, e.name) for s, e in edges - covered)


@pytest.mark.parametrize("name", sorted(SCRIPTS))
def test_script_returns_to_normal(name):
    assert walk(SCRIPTS[name]).state is RcuMode.NORMAL


def test_undefined_pairs_rejected():
    n = 0
    for state, event in itertools.product(RcuMode, Event):
        if (state, event) in TRANSITIONS:
            continue
        n += 1
        with pytest.raises(ProtocolError, match=state.name):
            step_fsm(RcuState(state=state), event)
    assert n == len(RcuMode) * len(Event) - len(TRANSITIONS)


def test_examples():
    assert step_fsm(RcuState(), E.MISS_DETECTED, 3) == RcuState(RcuMode.PSEUDO_ENTRY, trigger_index=3)
    ex = RcuState(RcuMode.MERE_EXECUTE)
    assert step_fsm(ex, E.STALL_DATA_RETURNED).state is RcuMode.MERE_PASS
    for err in (E.DATA_MISMATCH, E.PREFETCH_FAILURE, E.MSHR_EXHAUSTED):
        assert step_fsm(ex, err).state is RcuMode.MERE_EXECUTE_ERROR


def test_retry_counter_limit():
    rcu = RcuState(RcuMode.MERE_PASS, retry=2)
    rcu = step_fsm(rcu, E.RETRY_OK)
    assert (rcu.state, rcu.retry) == (RcuMode.MERE_EXECUTE, 3)
    rcu = step_fsm(rcu, E.STEP_HIT)
    with pytest.raises(ProtocolError, match="retry"):
        step_fsm(rcu, E.RETRY_OK)
    # giving up is still allowed
    assert step_fsm(rcu, E.RETRY_FAIL).state is RcuMode.NORMAL_EXIT
    assert MAX_RETRY == 3


def test_retry_resets_per_episode():
    rcu = walk(SCRIPTS["retry_limit"][:-2])
    assert rcu.retry == 3
    rcu = walk(SCRIPTS["retry_limit"])
    assert rcu.retry == 0 and rcu.trigger_index is None


def test_step_counter_cleared_on_return_to_normal():
    rcu = walk(ENTER)
    rcu = replace(rcu, step_counter=40)
    for ev in [E.STEP_HIT] + LEAVE:
        rcu = step_fsm(rcu, ev)
    assert rcu == RcuState()
