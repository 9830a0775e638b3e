"""Software interface to the runahead control unit.

The five primitives mirror what a compiler-inserted helper would execute on
real hardware.  :func:`adaptive_runahead` is that helper: the executor calls
it when runahead starts, before each pre-executed access, and after exit.

The shim talks to whatever object it is attached to through three attributes:
``rcu`` (an :class:`~runahead_sim.fsm.RcuState`), ``staged`` (1-based index
of the access being pre-executed, or None) and ``skip_staged``; ``cache`` and
``trace`` are needed only when no plan is given.
"""

from __future__ import annotations

from dataclasses import replace

from .fsm import ProtocolError, RcuMode


class RunaheadShim:
    def __init__(self, plan=None):
        # plan: RunaheadPlan or None.  Without one, skips are decided from the
        # live cache state and no step counter is armed.
        self.plan = plan
        self._m = None

    def attach(self, machine) -> "RunaheadShim":
        self._m = machine
        return self

    def _machine(self):
        if self._m is None:
            raise ProtocolError("shim is not attached to a core")
        return self._m

    def check_mode(self) -> bool:
        """True while the core is pre-executing in runahead mode."""
        return self._machine().rcu.state is RcuMode.MERE_EXECUTE

    def planned_step(self) -> int | None:
        m = self._machine()
        if self.plan is None:
            return None
        return self.plan.steps.get(m.rcu.trigger_index)

    def set_step(self, cycles: int | None) -> None:
        """Arm the step counter: runahead lasts ``cycles`` from its start.

        None leaves the counter unarmed (exit on data return).  Re-arming
        with the same value is a no-op.
        """
        m = self._machine()
        if not self.check_mode():
            raise ProtocolError(f"set_step outside runahead (state {m.rcu.state.name})")
        if cycles is not None and cycles < 0:
            raise ValueError(f"step must be >= 0, got {cycles}")
        m.rcu = replace(m.rcu, step_counter=cycles)

    def clear_step(self) -> None:
        """Disarm the step counter; harmless when nothing is armed."""
        m = self._machine()
        m.rcu = replace(m.rcu, step_counter=None)

    def check_skip(self) -> bool:
        """Should the staged access's prefetch be suppressed?"""
        m = self._machine()
        j = m.staged
        if j is None:
            return False
        if self.plan is not None:
            return (m.rcu.trigger_index, j) in self.plan.skip
        return m.cache.would_evict_useful(m.trace.addrs[j - 1])

    def skip_prefetch(self, addr: int | None = None) -> None:
        """Suppress the staged prefetch (``addr``, if given, must be its address)."""
        m = self._machine()
        if not self.check_mode():
            raise ProtocolError(f"skip_prefetch outside runahead (state {m.rcu.state.name})")
        if m.staged is None:
            raise ProtocolError("skip_prefetch with no access staged")
        if addr is not None and addr != m.trace.addrs[m.staged - 1]:
            raise ProtocolError(f"skip_prefetch({addr:#x}) does not name the staged access")
        m.skip_staged = True


def adaptive_runahead(m: RunaheadShim) -> None:
    if m.check_mode():
        m.set_step(m.planned_step())
        if m.check_skip():
            m.skip_prefetch()
    else:
        m.clear_step()
