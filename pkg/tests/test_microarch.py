import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from runahead_sim.microarch import (
    BLOCK_BYTES, RC_SETS, Kind, MiniInsn, MiniTraceError, RunaheadCache, block_of,
    invfile_step, parse_insn, read_minitrace, run_invfile, transcript,
)


def L(rd, *rs, addr=0, sg=False):
    return MiniInsn(Kind.LOAD, rd, tuple(rs), addr, sg)


def S(rdata, *raddr, addr=0):
    return MiniInsn(Kind.STORE, None, (rdata,) + tuple(raddr), addr)


def A(rd, *rs):
    return MiniInsn(Kind.ALU, rd, tuple(rs))


EXIT = MiniInsn(Kind.EXIT)


# -- brute-force dataflow oracle ------------------------------------------------


class Dataflow:
    """Validity by walking back to each value's definition; no forward state."""

    def __init__(self, insns, reset_rule="or"):
        self.insns = insns
        self.rule = reset_rule

    def _segment_start(self, k):
        for d in range(k - 1, -1, -1):
            if self.insns[d].kind is Kind.EXIT:
                return d + 1
        return 0

    def reg_bad(self, r, k):
        """Is register r invalid just before instruction k?"""
        if r == 0:
            return False
        for d in range(k - 1, self._segment_start(k) - 1, -1):
            x = self.insns[d]
            if x.kind in (Kind.LOAD, Kind.ALU) and x.rd == r:
                return self.def_bad(d)
        return False

    def src_bad(self, k):
        return any(self.reg_bad(r, k) for r in self.insns[k].rs)

    def addr_bad(self, k):
        return any(self.reg_bad(r, k) for r in self.insns[k].addr_regs)

    def marked(self, block, k):
        for d in range(k - 1, self._segment_start(k) - 1, -1):
            x = self.insns[d]
            if x.kind is Kind.STORE and block_of(x.addr) == block and not self.addr_bad(d):
                return self.reg_bad(x.rs[0], d)
        return False

    def def_bad(self, d):
        x = self.insns[d]
        if x.kind is Kind.ALU:
            return self.src_bad(d)
        if x.sg or self.src_bad(d):
            return True
        return self.rule == "and" and self.marked(block_of(x.addr), d)

    def block(self, k):
        x = self.insns[k]
        if x.kind not in (Kind.LOAD, Kind.STORE):
            return False
        return self.addr_bad(k) or self.marked(block_of(x.addr), k)

    def release(self, k):
        x = self.insns[k]
        if x.kind not in (Kind.LOAD, Kind.ALU) or x.rd == 0:
            return False
        return self.def_bad(k)


def random_minitrace(rng, n):
    regs = range(8)  # few registers so that chains form
    out = []
    for _ in range(n):
        kind = rng.choices(["LOAD", "STORE", "ALU", "EXIT"], [4, 3, 4, 0.3])[0]
        addr = rng.randrange(8) * 4
        if kind == "LOAD":
            out.append(L(rng.choice(regs), *rng.sample(regs, rng.randint(0, 2)), addr=addr,
                         sg=rng.random() < 0.2))
        elif kind == "STORE":
            out.append(S(rng.choice(regs), *rng.sample(regs, rng.randint(0, 2)), addr=addr))
        elif kind == "ALU":
            out.append(A(rng.choice(regs), *rng.sample(regs, rng.randint(0, 3))))
        else:
            out.append(EXIT)
    return out


def check_against_oracle(insns, rule):
    inv, signals = run_invfile(insns, rule)
    df = Dataflow(insns, rule)
    n = len(insns)
    for k, sig in enumerate(signals):
        assert sig.block_prefetch == df.block(k), (k, insns[k])
        assert sig.release == df.release(k), (k, insns[k])
    assert inv.invalid_regs() == {r for r in range(32) if df.reg_bad(r, n)}


def test_invfile_matches_dataflow_oracle():
    rng = random.Random(2024)
    for _ in range(10_000):
        check_against_oracle(random_minitrace(rng, rng.randint(1, 50)), "or")


def test_invfile_and_rule_matches_oracle():
    rng = random.Random(5)
    for _ in range(2000):
        check_against_oracle(random_minitrace(rng, rng.randint(1, 50)), "and")


def test_propagation_example():
    inv, _ = run_invfile([L(5, sg=True), A(7, 5)])
    assert inv.reg_invalid[7]


def test_reset_example():
    inv, sigs = run_invfile([L(7, sg=True), L(7, 2, addr=16)])
    assert not inv.reg_invalid[7] and not sigs[1].block_prefetch


def test_chain_blocks_prefetch():
    inv, sigs = run_invfile([L(1, sg=True), A(2, 1), L(3, 2, addr=8)])
    assert inv.reg_invalid[3]
    assert sigs[2].block_prefetch and sigs[2].release


def test_store_marks_and_clears_block():
    insns = [L(1, sg=True), S(1, addr=16), L(4, addr=20)]
    _, sigs = run_invfile(insns)
    assert sigs[2].block_prefetch  # same 8-byte block
    _, sigs = run_invfile(insns[:2] + [S(2, addr=16), L(4, addr=20)])
    assert not sigs[3].block_prefetch
    # the literal disjunction resets the load, the conjunction does not
    assert not run_invfile(insns, "or")[0].reg_invalid[4]
    assert run_invfile(insns, "and")[0].reg_invalid[4]


def test_store_with_bad_address_leaves_marks():
    inv, sigs = run_invfile([L(1, sg=True), S(2, 1, addr=0)])
    assert sigs[1].block_prefetch and inv.addr_invalid == set()


def test_r0_never_invalid():
    inv, sigs = run_invfile([L(0, sg=True), A(3, 0)])
    assert not inv.reg_invalid[0] and not inv.reg_invalid[3]
    assert not sigs[0].release


def test_exit_clears_everything():
    inv, _ = run_invfile([L(1, sg=True), S(1, addr=0), EXIT])
    assert inv.invalid_regs() == set() and inv.addr_invalid == set()


def test_step_is_pure():
    inv, _ = run_invfile([L(1, sg=True)])
    before = inv.copy()
    invfile_step(inv, A(1, 2))
    assert inv == before


# -- runahead cache (R$) ------------------------------------------------------------


class TouchModel:
    """2-way sets where the victim is the free way, else the one not touched last."""

    def __init__(self):
        self.ways = [[None, None] for _ in range(RC_SETS)]  # (tag, token) per way
        self.last = [None] * RC_SETS

    def _loc(self, addr):
        b = addr // BLOCK_BYTES
        return b % RC_SETS, b // RC_SETS

    def store(self, addr, tok):
        s, tag = self._loc(addr)
        ways = self.ways[s]
        hit = [w for w in (0, 1) if ways[w] and ways[w][0] == tag]
        if hit:
            w = hit[0]
        elif None in ways:
            w = ways.index(None)
        else:
            w = 1 - self.last[s]
        ways[w] = (tag, tok)
        self.last[s] = w
        return w

    def load(self, addr):
        s, tag = self._loc(addr)
        for w in (0, 1):
            e = self.ways[s][w]
            if e and e[0] == tag:
                self.last[s] = w
                return True, e[1]
        return False, None

    def flush(self):
        self.ways = [[None, None] for _ in range(RC_SETS)]

    def resident(self):
        return sorted((s, e[0]) for s in range(RC_SETS) for e in self.ways[s] if e)


rc_ops = st.lists(
    st.tuples(st.sampled_from(["st", "ld", "exit"]), st.integers(0, 47)),
    max_size=150,
)


@settings(max_examples=400, deadline=None)
@given(rc_ops)
def test_rcache_matches_touch_model(ops):
    rc, ref = RunaheadCache(), TouchModel()
    for k, (op, blk) in enumerate(ops):
        addr = blk * BLOCK_BYTES + (k % 2) * 4
        if op == "st":
            assert rc.store(addr, k) == ref.store(addr, k)
        elif op == "ld":
            assert rc.load(addr) == ref.load(addr)
        else:
            rc.exit_runahead()
            ref.flush()
        res = rc.resident()
        assert sorted(res) == ref.resident()
        assert len(res) <= 16
        assert all(sum(1 for s, _ in res if s == x) <= 2 for x in range(RC_SETS))


@settings(max_examples=200, deadline=None)
@given(rc_ops, st.integers(0, 47))
def test_rcache_invalidate_on_exit(ops, probe):
    rc = RunaheadCache()
    for k, (op, blk) in enumerate(ops):
        if op == "st":
            rc.store(blk * BLOCK_BYTES, k)
    rc.exit_runahead()
    assert rc.resident() == []
    assert rc.load(probe * BLOCK_BYTES) == (False, None)


def test_rcache_store_then_load():
    rc = RunaheadCache()
    rc.store(0x40, "tok")
    assert rc.load(0x44) == (True, "tok")  # same block


def test_rcache_plru_eviction_order():
    rc = RunaheadCache()
    a, b, c = (k * RC_SETS * BLOCK_BYTES for k in (1, 2, 3))  # same set, distinct tags
    assert rc.store(a, "a") == 0
    assert rc.store(b, "b") == 1
    assert rc.store(c, "c") == 0  # a was touched first
    assert rc.load(a) == (False, None)
    rc.load(b)
    assert rc.store(a, "a2") == 0  # b just touched, so c goes
    assert rc.load(c) == (False, None) and rc.load(b) == (True, "b")


def test_rcache_keeps_plru_bits_across_exit():
    rc = RunaheadCache()
    rc.store(0, 1)
    bits = list(rc.plru)
    rc.exit_runahead()
    assert rc.plru == bits


# -- text formats ---------------------------------------------------------------------


def test_parse_and_print_roundtrip():
    for text in ["LOAD r3 r2 @0x10 SG", "STORE r1 r2 @0x8", "ALU r7 r5 r6", "EXIT"]:
        assert str(parse_insn(text)) == text


@pytest.mark.parametrize("text", ["", "JUMP r1", "LOAD r1", "STORE @0x0", "ALU r1 r2 SG", "LOAD r40 @0"])
def test_parse_errors(text):
    with pytest.raises(MiniTraceError):
        parse_insn(text)


def test_transcript_from_file(tmp_path):
    path = tmp_path / "m.trace"
    path.write_text("# chain\nLOAD r1 @0x0 SG\nSTORE r2 @0x10\nLOAD r3 @0x10\nALU r4 r1\nEXIT\n")
    lines = transcript(read_minitrace(path))
    assert len(lines) == 5
    assert "rc=hit:st2" in lines[2]
    assert "release=1" in lines[3] and "invalid=r1,r4" in lines[3]
    assert "rc=flush" in lines[4]
    path.write_text("LOAD r1 @zz\n")
    with pytest.raises(MiniTraceError, match="m.trace:1"):
        read_minitrace(path)
