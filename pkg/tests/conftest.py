"""Shared oracles for the test-suite."""
from fractions import Fraction
from itertools import product

import pytest

from conewalk import catalog


def enumerate_paths(model, x, n):
    """Exhaustive path enumeration: {y: P(x+S(n)=y, tau_x>n)} and P(tau_x <= n), exact."""
    atoms = model.atoms
    slice_, killed = {}, Fraction(0)
    for seq in product(range(len(atoms)), repeat=n):
        pos, prob, alive = tuple(x), Fraction(1), True
        for i in seq:
            step, p = atoms[i]
            pos = tuple(a + b for a, b in zip(pos, step))
            prob *= p
            alive = alive and bool(model.contains(pos))
        if alive:
            slice_[pos] = slice_.get(pos, Fraction(0)) + prob
        else:
            killed += prob
    return slice_, killed


def enumerate_green(model, x, y, horizon):
    return sum((enumerate_paths(model, x, n)[0].get(tuple(y), Fraction(0)) for n in range(horizon)), Fraction(0))


@pytest.fixture(scope="session")
def corpus():
    return catalog.corpus()


@pytest.fixture
def halfline():
    return catalog.srw_halfline()


@pytest.fixture
def quadrant():
    return catalog.srw_quadrant()


@pytest.fixture
def halfplane():
    return catalog.srw_halfplane()


@pytest.fixture
def asym():
    return catalog.asym_halfline()


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
