"""Runahead control unit state machine.

The transition table below is the complete set of legal edges; anything else
raises :class:`ProtocolError`.  Retries out of MERE_EXECUTE_ERROR / MERE_PASS
are capped so that a transition back to MERE_EXECUTE is only taken while
``retry < MAX_RETRY``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace


class RcuMode(enum.Enum):
    NORMAL = "NORMAL"
    PSEUDO_ENTRY = "PSEUDO_ENTRY"
    MERE_ENTER = "MERE_ENTER"
    MERE_EXECUTE = "MERE_EXECUTE"
    MERE_EXECUTE_ERROR = "MERE_EXECUTE_ERROR"
    MERE_PASS = "MERE_PASS"
    PSEUDO_EXIT = "PSEUDO_EXIT"
    NORMAL_EXIT = "NORMAL_EXIT"


class Event(enum.Enum):
    MISS_DETECTED = "MISS_DETECTED"
    ENTRY_OK = "ENTRY_OK"
    ENTRY_REJECTED = "ENTRY_REJECTED"
    DATA_MISMATCH = "DATA_MISMATCH"
    PREFETCH_FAILURE = "PREFETCH_FAILURE"
    MSHR_EXHAUSTED = "MSHR_EXHAUSTED"
    STALL_DATA_RETURNED = "STALL_DATA_RETURNED"
    STEP_HIT = "STEP_HIT"
    RETRY_OK = "RETRY_OK"
    RETRY_FAIL = "RETRY_FAIL"
    EXIT_DONE = "EXIT_DONE"


class ProtocolError(RuntimeError):
    """Undefined (state, event) pair, or an API call in the wrong mode."""


MAX_RETRY = 3

S, E = RcuMode, Event

TRANSITIONS: dict[tuple[RcuMode, Event], RcuMode] = {
    (S.NORMAL, E.MISS_DETECTED): S.PSEUDO_ENTRY,
    # efficiency detector verdict
    (S.PSEUDO_ENTRY, E.ENTRY_OK): S.MERE_ENTER,
    (S.PSEUDO_ENTRY, E.ENTRY_REJECTED): S.NORMAL,
    # checkpoint taken
    (S.MERE_ENTER, E.ENTRY_OK): S.MERE_EXECUTE,
    (S.MERE_EXECUTE, E.DATA_MISMATCH): S.MERE_EXECUTE_ERROR,
    (S.MERE_EXECUTE, E.PREFETCH_FAILURE): S.MERE_EXECUTE_ERROR,
    (S.MERE_EXECUTE, E.MSHR_EXHAUSTED): S.MERE_EXECUTE_ERROR,
    (S.MERE_EXECUTE, E.STALL_DATA_RETURNED): S.MERE_PASS,
    (S.MERE_EXECUTE, E.STEP_HIT): S.MERE_PASS,
    (S.MERE_EXECUTE_ERROR, E.RETRY_OK): S.MERE_EXECUTE,
    (S.MERE_EXECUTE_ERROR, E.RETRY_FAIL): S.NORMAL_EXIT,
    (S.MERE_EXECUTE_ERROR, E.STALL_DATA_RETURNED): S.MERE_PASS,
    (S.MERE_EXECUTE_ERROR, E.STEP_HIT): S.MERE_PASS,
    (S.MERE_PASS, E.RETRY_OK): S.MERE_EXECUTE,
    (S.MERE_PASS, E.RETRY_FAIL): S.NORMAL_EXIT,
    (S.MERE_PASS, E.EXIT_DONE): S.PSEUDO_EXIT,
    (S.PSEUDO_EXIT, E.EXIT_DONE): S.NORMAL_EXIT,
    (S.NORMAL_EXIT, E.EXIT_DONE): S.NORMAL,
}

del S, E


@dataclass(frozen=True)
class RcuState:
    state: RcuMode = RcuMode.NORMAL
    step_counter: int | None = None
    retry: int = 0
    trigger_index: int | None = None


def step_fsm(rcu: RcuState, event: Event, trigger_index: int | None = None) -> RcuState:
    """Apply one event.  ``trigger_index`` is recorded on MISS_DETECTED."""
    nxt = TRANSITIONS.get((rcu.state, event))
    if nxt is None:
        raise ProtocolError(f"no transition from {rcu.state.name} on {event.name}")
    if nxt is RcuMode.MERE_EXECUTE and event is Event.RETRY_OK:
        if rcu.retry >= MAX_RETRY:
            raise ProtocolError(
                f"retry limit reached in {rcu.state.name} (retry={rcu.retry}, limit {MAX_RETRY})"
            )
        return replace(rcu, state=nxt, retry=rcu.retry + 1)
    if event is Event.MISS_DETECTED:
        return RcuState(RcuMode.PSEUDO_ENTRY, None, 0, trigger_index)
    if nxt is RcuMode.NORMAL:
        return RcuState()
    return replace(rcu, state=nxt)
