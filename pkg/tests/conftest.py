import random

import pytest

from runahead_sim import GenParams, Trace, generate

# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_trace(addrs, gaps=None, posts=None, indirect=None, seed=None):
    meta = {"seed": seed} if seed is not None else {}
    return Trace(addrs, indirect, gaps, posts, meta)


def random_trace(seed, n=None, rng=None):
    """Small generated trace with varied D and I."""
    rng = rng or random.Random(seed)
    params = GenParams(
        data_size_kb=rng.choice([2, 8, 24, 32, 64]),
        max_gap_insns=rng.randint(0, 8),
        n_accesses=n if n is not None else rng.randint(1, 200),
        seed=seed,
        insn_time_weights=rng.choice([
            (((1, 20), 0.8), ((21, 180), 0.2)),
            (((1, 3), 1.0),),
            (((1, 10), 0.5), ((11, 60), 0.5)),
        ]),
        indirect_fraction=rng.choice([1.0, 1.0, 0.5]),
    )
    return generate(params)


@pytest.fixture
def rng():
    return random.Random(1234)
