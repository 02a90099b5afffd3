"""The positive harmonic function V of the killed walk, estimated from its limit definition.

V(x) = lim_n E[u(x + S(n)); tau_x > n], with u the reduite of the cone.  The
sequence is reported raw; the limit is the last value, accepted when the last
two entries agree within ``tol``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from . import kernel
from .errors import HarmonicError
from .model import WalkModel

FLAGS = ("converged", "oscillating", "diverging")


@dataclass
class HarmonicEstimate:
    x: tuple[int, ...]
    sequence: list[tuple[int, float]]
    limit: float
    convergence_flag: str
    tol: float = 1e-9

    def to_json(self) -> dict:
        return {
            "x": list(self.x),
            "sequence": [[n, v] for n, v in self.sequence],
            "limit": self.limit,
            "convergence_flag": self.convergence_flag,
            "tol": self.tol,
        }


def _classify(values: list[float], tol: float) -> str:
    if max(values) > 10.0 * float(np.median(values)):
        return "diverging"
    if len(values) >= 2 and abs(values[-1] - values[-2]) < tol:
        return "converged"
    return "oscillating"


def estimate_V(
    model: WalkModel,
    x,
    u: Callable | None = None,
    schedule: Sequence[int] = (16, 32, 64, 128),
    tol: float = 1e-9,
    **kw,
) -> HarmonicEstimate:
    """E[u(x + S(n)); tau_x > n] at every n of ``schedule`` from a single evolution."""
    schedule = [int(n) for n in schedule]
    if not schedule or any(b <= a for a, b in zip(schedule, schedule[1:])) or schedule[0] < 0:
        raise HarmonicError("schedule must be a non-empty increasing list of non-negative integers")
    u = u or model.reduite()
    wanted = set(schedule)
    seq = []
    for table in kernel.evolve(model, x, schedule[-1], **kw):
        if table.step in wanted:
            seq.append((table.step, float(table.expect(u))))
    values = [v for _, v in seq]
    if any(v < 0 for v in values):
        raise HarmonicError(f"negative expectation in sequence {values}: u is not positive on the cone")
    flag = _classify(values, tol)
    return HarmonicEstimate(tuple(int(v) for v in np.atleast_1d(x)), seq, values[-1], flag, tol)


def estimate_V_prime(model: WalkModel, y, u: Callable | None = None, schedule=(16, 32, 64, 128), tol=1e-9, **kw):
    """V' at ``y``: the same limit for the reversed walk S' = -S."""
    return estimate_V(model.reverse(), y, u or model.reduite(), schedule, tol, **kw)


def harmonic_residual(model: WalkModel, f: Callable, x) -> float:
    """E[f(x + X); x + X in K] - f(x), accumulated in exact rational arithmetic."""
    x = tuple(int(v) for v in np.atleast_1d(x))

    def val(z):
        v = f(np.array(z))
        v = v.item() if isinstance(v, np.ndarray) else v
        # binary floats convert to Fraction exactly, so the sum below is exact
        return Fraction(int(v)) if isinstance(v, np.integer) else Fraction(v)

    acc = Fraction(0)
    for step, p in model.atoms:
        z = tuple(a + b for a, b in zip(x, step))
        if model.contains(z):
            acc += p * val(z)
    return float(acc - val(x))


def doob_defect(model: WalkModel, V: Callable, x) -> float:
    """|E[V(x + X); x + X in K] - V(x)| for an arbitrary evaluator V."""
    return abs(harmonic_residual(model, V, x))

