"""Functional models of the prefetch-management structures used in runahead.

``InvFile`` tracks which registers and memory blocks hold invalid (poisoned)
values while running ahead, and decides per instruction whether its memory
request must be blocked and whether the pipeline may be released instead of
waiting.  ``RunaheadCache`` is the small store buffer that keeps speculative
stores away from the real hierarchy.  Values are opaque tokens; only their
validity and routing are modeled.

Mini-trace format, one instruction per line::

    LOAD  rd rs...  @addr [SG]     rs are the address registers
    STORE rs_data rs_addr... @addr
    ALU   rd rs...
    EXIT                           leave runahead (R$ and invfile cleared)

``SG`` marks a stall- or gain-load: its data is a runahead miss.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

N_REGS = 32
WORD_BYTES = 4
BLOCK_BYTES = 2 * WORD_BYTES
RC_SETS = 8
RC_WAYS = 2


class Kind(enum.Enum):
    LOAD = "LOAD"
    STORE = "STORE"
    ALU = "ALU"
    EXIT = "EXIT"


class MiniTraceError(ValueError):
    pass


@dataclass(frozen=True)
class MiniInsn:
    kind: Kind
    rd: int | None = None
    rs: tuple[int, ...] = ()
    addr: int | None = None
    sg: bool = False  # stall- or gain-load

    def __post_init__(self):
        for r in self.rs + ((self.rd,) if self.rd is not None else ()):
            if not 0 <= r < N_REGS:
                raise MiniTraceError(f"register r{r} out of range")
        if self.kind is Kind.LOAD and (self.rd is None or self.addr is None):
            raise MiniTraceError("LOAD needs rd and an address")
        if self.kind is Kind.STORE and (self.addr is None or not self.rs):
            raise MiniTraceError("STORE needs a data register and an address")
        if self.sg and self.kind is not Kind.LOAD:
            raise MiniTraceError("only loads can be stall/gain loads")

    @property
    def addr_regs(self) -> tuple[int, ...]:
        if self.kind is Kind.STORE:
            return self.rs[1:]
        if self.kind is Kind.LOAD:
            return self.rs
        return ()

    def __str__(self) -> str:
        parts = [self.kind.value]
        if self.rd is not None:
            parts.append(f"r{self.rd}")
        parts += [f"r{r}" for r in self.rs]
        if self.addr is not None:
            parts.append(f"@{self.addr:#x}")
        if self.sg:
            parts.append("SG")
        return " ".join(parts)


def block_of(addr: int) -> int:
    return addr // BLOCK_BYTES


# -- invfile --------------------------------------------------------------------


@dataclass
class InvFile:
    reg_invalid: list[bool] = field(default_factory=lambda: [False] * N_REGS)
    addr_invalid: set[int] = field(default_factory=set)  # block numbers

    def copy(self) -> "InvFile":
        return InvFile(list(self.reg_invalid), set(self.addr_invalid))

    def invalid_regs(self) -> set[int]:
        return {r for r, bad in enumerate(self.reg_invalid) if bad}

    def clear(self) -> None:
        self.reg_invalid = [False] * N_REGS
        self.addr_invalid.clear()


@dataclass(frozen=True)
class Signals:
    block_prefetch: bool = False
    release: bool = False


def _write(inv: InvFile, rd: int | None, bad: bool) -> None:
    if rd is not None and rd != 0:
        inv.reg_invalid[rd] = bad


def invfile_step(inv: InvFile, insn: MiniInsn, reset_rule: str = "or") -> tuple[InvFile, Signals]:
    """Apply one instruction; returns the new invfile and its MA-stage signals.

    A load's destination is reset to valid when its address is valid *or* all
    its sources are valid (``reset_rule="or"``); ``"and"`` requires both.
    """
    out = inv.copy()
    if insn.kind is Kind.EXIT:
        out.clear()
        return out, Signals()
    regs = out.reg_invalid
    src_bad = any(regs[r] for r in insn.rs)
    addr_from_bad = any(regs[r] for r in insn.addr_regs)
    marked = insn.addr is not None and not addr_from_bad and block_of(insn.addr) in out.addr_invalid
    block = addr_from_bad or marked
    if insn.kind is Kind.ALU:
        _write(out, insn.rd, src_bad)
        return out, Signals(release=src_bad and bool(insn.rd))
    if insn.kind is Kind.LOAD:
        if insn.sg:
            bad = True
        elif src_bad:
            bad = True  # propagation
        else:
            addr_ok = not marked
            reset = (addr_ok or not src_bad) if reset_rule == "or" else (addr_ok and not src_bad)
            bad = not reset
        _write(out, insn.rd, bad)
        return out, Signals(block_prefetch=block, release=bad and insn.rd != 0)
    # STORE
    if not addr_from_bad:
        b = block_of(insn.addr)
        if regs[insn.rs[0]]:
            out.addr_invalid.add(b)
        else:
            out.addr_invalid.discard(b)
    return out, Signals(block_prefetch=block)


def run_invfile(insns: Iterable[MiniInsn], reset_rule: str = "or"):
    inv = InvFile()
    signals = []
    for insn in insns:
        inv, sig = invfile_step(inv, insn, reset_rule)
        signals.append(sig)
    return inv, signals


# -- runahead cache ---------------------------------------------------------------


class RunaheadCache:
    """8-set, 2-way store buffer with one pseudo-LRU bit per set.

    The bit names the way to replace next; touching a way points it at the
    other one.  Invalid ways are filled before the bit is consulted.
    """

    def __init__(self, sets: int = RC_SETS, ways: int = RC_WAYS):
        if ways != 2:
            raise ValueError("the one-bit pLRU models a 2-way cache")
        self.sets = sets
        self.ways = ways
        self.tag = [[0] * ways for _ in range(sets)]
        self.valid = [[False] * ways for _ in range(sets)]
        self.data: list[list[object]] = [[None] * ways for _ in range(sets)]
        self.plru = [0] * sets

    def _index(self, addr: int) -> tuple[int, int]:
        blk = block_of(addr)
        return blk % self.sets, blk // self.sets

    def _touch(self, s: int, w: int) -> None:
        self.plru[s] = 1 - w

    def _way(self, s: int, tag: int) -> int:
        for w in range(self.ways):
            if self.valid[s][w] and self.tag[s][w] == tag:
                return w
        return -1

    def victim(self, addr: int) -> int:
        s, _ = self._index(addr)
        for w in range(self.ways):
            if not self.valid[s][w]:
                return w
        return self.plru[s]

    def store(self, addr: int, token) -> int:
        """Write ``token`` for ``addr``'s block; returns the way used."""
        s, tag = self._index(addr)
        w = self._way(s, tag)
        if w < 0:
            w = self.victim(addr)
            self.tag[s][w] = tag
            self.valid[s][w] = True
        self.data[s][w] = token
        self._touch(s, w)
        return w

    def load(self, addr: int) -> tuple[bool, object]:
        s, tag = self._index(addr)
        w = self._way(s, tag)
        if w < 0:
            return False, None
        self._touch(s, w)
        return True, self.data[s][w]

    def exit_runahead(self) -> None:
        for s in range(self.sets):
            for w in range(self.ways):
                self.valid[s][w] = False
                self.data[s][w] = None

    def resident(self) -> list[tuple[int, int]]:
        """(set, tag) of every valid block."""
        return [
            (s, self.tag[s][w])
            for s in range(self.sets)
            for w in range(self.ways)
            if self.valid[s][w]
        ]


# -- mini-trace files and transcripts ---------------------------------------------


def parse_insn(text: str) -> MiniInsn:
    toks = text.split()
    if not toks:
        raise MiniTraceError("empty instruction")
    try:
        kind = Kind(toks[0].upper())
    except ValueError:
        raise MiniTraceError(f"unknown instruction kind {toks[0]!r}") from None
    regs: list[int] = []
    addr = None
    sg = False
    for tok in toks[1:]:
        if tok.upper() == "SG":
            sg = True
        elif tok.startswith("@"):
            try:
                addr = int(tok[1:], 0)
            except ValueError:
                raise MiniTraceError(f"bad address {tok!r}") from None
        elif tok.lower().startswith("r") and tok[1:].isdigit():
            regs.append(int(tok[1:]))
        else:
            raise MiniTraceError(f"bad operand {tok!r}")
    if kind in (Kind.LOAD, Kind.ALU):
        if not regs:
            raise MiniTraceError(f"{kind.value} needs a destination register")
        rd, rs = regs[0], tuple(regs[1:])
    else:
        rd, rs = None, tuple(regs)
    return MiniInsn(kind, rd, rs, addr, sg)


def read_minitrace(path: str | Path) -> list[MiniInsn]:
    path = Path(path)
    out = []
    with path.open() as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                out.append(parse_insn(line))
            except MiniTraceError as exc:
                raise MiniTraceError(f"{path}:{lineno}: {exc}") from None
    return out


def transcript(insns: Sequence[MiniInsn], reset_rule: str = "or") -> list[str]:
    """One line per instruction: invalid registers, signals and R$ outcome."""
    inv = InvFile()
    rc = RunaheadCache()
    lines = []
    for k, insn in enumerate(insns, start=1):
        inv, sig = invfile_step(inv, insn, reset_rule)
        rc_note = "-"
        if insn.kind is Kind.EXIT:
            rc.exit_runahead()
            rc_note = "flush"
        elif insn.kind is Kind.STORE and not sig.block_prefetch:
            rc.store(insn.addr, f"st{k}")
            rc_note = "store"
        elif insn.kind is Kind.LOAD and not sig.block_prefetch:
            hit, tok = rc.load(insn.addr)
            rc_note = f"hit:{tok}" if hit else "miss"
        bad = ",".join(f"r{r}" for r in sorted(inv.invalid_regs())) or "-"
        lines.append(
            f"{k:>3} {str(insn):<28} invalid={bad} block={int(sig.block_prefetch)} "
            f"release={int(sig.release)} rc={rc_note}"
        )
    return lines
