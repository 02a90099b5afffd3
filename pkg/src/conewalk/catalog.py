"""Test-corpus walk models."""
from fractions import Fraction

from .geometry import halfspace, orthant
from .model import IncrementDistribution, WalkModel

Q = Fraction(1, 4)
H = Fraction(1, 2)


def srw_halfline() -> WalkModel:
    inc = IncrementDistribution((((1,), H), ((-1,), H)))
    return WalkModel(inc, halfspace([1]), name="srw-halfline")


def srw_quadrant() -> WalkModel:
    inc = IncrementDistribution((((1, 0), Q), ((-1, 0), Q), ((0, 1), Q), ((0, -1), Q)))
    return WalkModel(inc, orthant(2), name="srw-quadrant")


def srw_halfplane() -> WalkModel:
    inc = IncrementDistribution((((1, 0), Q), ((-1, 0), Q), ((0, 1), Q), ((0, -1), Q)))
    return WalkModel(inc, halfspace([0, 1]), name="srw-halfplane")


def asym_halfline() -> WalkModel:
    """Zero-drift law: -1 w.p. 2/3, +2 w.p. 1/3, killed on (-inf, 0]."""
    inc = IncrementDistribution((((-1,), Fraction(2, 3)), ((2,), Fraction(1, 3))))
    return WalkModel(inc, halfspace([1]), name="asym-halfline")


CORPUS = {
    "srw-halfline": srw_halfline,
    "srw-quadrant": srw_quadrant,
    "srw-halfplane": srw_halfplane,
    "asym-halfline": asym_halfline,
}


def corpus() -> dict[str, WalkModel]:
    return {k: f() for k, f in CORPUS.items()}
