import math

import numpy as np
import pytest

from swtree.model import PottsParams, SpinBoundary
from swtree.tree import build_tree

LN2 = math.log(2)


@pytest.fixture
def t21():
    return build_tree(2, 1)


@pytest.fixture
def t22():
    return build_tree(2, 2)


@pytest.fixture
def ising_ln2():
    return PottsParams(2, LN2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def mono(tree, k=0):
    return SpinBoundary.mono(tree, k)


def brute_potts(tree, tau, params):
    """Independent Potts oracle: loop over configurations, count bichromatic edges."""
    q, n = params.q, tree.n
    spins = [] if tau.is_free else list(tau.spins)
    weights = []
    for code in range(q ** n):
        sigma = [(code // q ** v) % q for v in range(n)]
        full = sigma + spins
        bad = 0
        for u, v in tree.edges.tolist():
            if v >= n and tau.is_free:
                continue
            bad += full[u] != full[v]
        weights.append(math.exp(-params.beta * bad))
    w = np.array(weights)
    return w / w.sum()


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: dict = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES[criterion] = f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(ACCEPTANCE_LINES[criterion])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
