import itertools
from fractions import Fraction

import numpy as np
import pytest


def brute_signs(m):
    """Sign vectors in canonical order, built without numpy bit tricks."""
    out = []
    for r in range(2 ** m):
        out.append(tuple(-1 if (r // 2 ** i) % 2 else 1 for i in range(m)))
    return out


def random_fractions(rng, shape, bound=5, den=4):
    nums = rng.integers(-bound, bound + 1, size=shape)
    dens = rng.integers(1, den + 1, size=shape)
    out = np.empty(shape, dtype=object)
    for idx in np.ndindex(*shape):
        out[idx] = Fraction(int(nums[idx]), int(dens[idx]))
    return out


def all_subsets(m):
    for k in range(m + 1):
        yield from itertools.combinations(range(1, m + 1), k)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
