import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_trace, random_trace
from runahead_sim.cache import CacheConfig, CacheModel
from runahead_sim.config import ConfigError
from runahead_sim.workload import (
    GenParams, MemoryAccess, Trace, TraceFormatError, generate, interval,
    read_trace, runahead_interval, write_trace,
)


def test_generate_is_deterministic():
    p = GenParams(n_accesses=2000, seed=7)
    assert generate(p) == generate(p)
    assert generate(p) != generate(GenParams(n_accesses=2000, seed=8))


def test_generated_ranges():
    p = GenParams(data_size_kb=8, max_gap_insns=4, n_accesses=5000, seed=1)
    tr = generate(p)
    assert len(tr) == 5000
    assert all(0 <= a < 8 * 1024 for a in tr.addrs)
    # at most I instructions of at most 180 cycles each
    assert max(tr.gaps) <= 4 * 180 and max(tr.posts) <= 4 * 180
    assert min(tr.gaps) == 0
    assert tr.meta == {"D": 8, "I": 4, "seed": 1}


def test_zero_gap_instructions():
    tr = generate(GenParams(max_gap_insns=0, n_accesses=100, seed=3))
    assert set(tr.gaps) == {0} and set(tr.posts) == {0}


def test_addresses_uniform_chi_square():
    tr = generate(GenParams(data_size_kb=32, n_accesses=100_000, seed=11))
    counts = np.bincount(np.asarray(tr.addrs) * 64 // (32 * 1024), minlength=64)
    expected = len(tr) / 64
    chi2 = ((counts - expected) ** 2 / expected).sum()
    assert chi2 < 103.4  # 63 dof, p = 0.001


def test_instruction_time_bands():
    # one instruction per gap exposes the band mixture directly
    p = GenParams(max_gap_insns=1, n_accesses=40_000, seed=5,
                  insn_time_weights=(((1, 20), 0.8), ((21, 180), 0.2)))
    g = np.asarray(generate(p).gaps)
    g = g[g > 0]
    assert g.max() <= 180
    assert abs((g <= 20).mean() - 0.8) < 0.02


def test_indirect_fraction():
    tr = generate(GenParams(n_accesses=20_000, seed=2, indirect_fraction=0.25))
    assert abs(np.mean(tr.indirect) - 0.25) < 0.02
    assert all(generate(GenParams(n_accesses=50, seed=2)).indirect)


@pytest.mark.parametrize("bad", [
    {"data_size_kb": 0}, {"max_gap_insns": -1}, {"indirect_fraction": 1.5},
    {"insn_time_weights": (((0, 5), 1.0),)}, {"insn_time_weights": (((1, 5), 0.0),)},
])
def test_genparams_validation(bad):
    with pytest.raises(ConfigError):
        GenParams(**bad)


def test_roundtrip(tmp_path):
    tr = generate(GenParams(n_accesses=300, seed=9))
    path = tmp_path / "t.trace"
    write_trace(tr, path)
    assert read_trace(path) == tr


def test_empty_trace_roundtrip(tmp_path):
    path = tmp_path / "e.trace"
    write_trace(Trace(), path)
    assert len(read_trace(path)) == 0


@pytest.mark.parametrize("body", [
    "1 0 1 0\n",  # four fields
    "1 0 1 0 0\n1 8 1 0 0\n",  # duplicate index
    "2 0 1 0 0\n",  # does not start at 1
    "1 0 2 0 0\n",  # indirect not 0/1
    "1 0 1 -3 0\n",  # negative gap
    "1 x 1 0 0\n",
])
def test_malformed_records(tmp_path, body):
    path = tmp_path / "bad.trace"
    path.write_text(body)
    with pytest.raises(TraceFormatError):
        read_trace(path)


def test_from_accesses_checks_order():
    ok = [MemoryAccess(1, 0, True, 0, 0), MemoryAccess(2, 8, True, 1, 1)]
    assert len(Trace.from_accesses(ok)) == 2
    with pytest.raises(TraceFormatError):
        Trace.from_accesses([ok[1], ok[0]])


def test_runahead_interval_by_hand():
    tr = make_trace([0, 8, 16], gaps=[3, 4, 5], posts=[1, 2, 0])
    assert runahead_interval(tr, 1, 2) == 1 + 3 + 1
    assert runahead_interval(tr, 1, 3) == 5 + 1 + 4 + 2
    with pytest.raises(ValueError):
        runahead_interval(tr, 2, 2)


def test_interval_includes_stalls():
    c = CacheConfig()
    tr = make_trace([0, 8, 0], gaps=[30, 0, 0], posts=[2, 0, 0])
    cache = CacheModel(c)
    # cold miss: 1 + 30 + (180 - 30) + 2
    assert interval(tr, 1, 2, cache) == 183
    assert interval(tr, 1, 3, cache) == 183 + 1 + 180
    assert cache.l1_lines() == set()  # caller's cache untouched


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.data())
def test_interval_additive_and_positive(seed, data):
    tr = random_trace(seed, n=40)
    i = data.draw(st.integers(1, 38))
    k = data.draw(st.integers(i + 1, 39))
    j = data.draw(st.integers(k + 1, 40))
    assert runahead_interval(tr, i, j) == runahead_interval(tr, i, k) + runahead_interval(tr, k, j)
    assert runahead_interval(tr, i, j) >= j - i
    # stalls only add time
    assert interval(tr, i, j, CacheModel()) >= runahead_interval(tr, i, j)
