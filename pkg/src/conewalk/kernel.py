"""Sparse-window dynamic programming for the killed walk.

Slice ``n`` of the evolution holds ``P(x + S(n) = y, tau_x > n)`` on a dense
box that tracks the support.  Each step convolves with the increment law,
then removes (kills) every cell outside the open cone.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Callable, Iterator, Sequence

import numpy as np
from scipy import integrate

from . import _kernels
from ._accel import HAVE_NUMBA
from .errors import KernelError, NonSummableTailFit, OutsideCone, WindowOverflow
from .geometry import _EPS
from .model import WalkModel

DEFAULT_TRIM = 1e-25


class Neumaier:
    """Compensated running sum."""

    __slots__ = ("s", "c")

    def __init__(self, start: float = 0.0):
        self.s = float(start)
        self.c = 0.0

    def add(self, v: float) -> None:
        t = self.s + v
        if abs(self.s) >= abs(v):
            self.c += (self.s - t) + v
        else:
            self.c += (v - t) + self.s
        self.s = t

    @property
    def value(self) -> float:
        return self.s + self.c


@dataclass(frozen=True)
class WindowPolicy:
    """How the dense box follows the support.

    ``trim_tol``: an edge hyperplane whose total mass is <= trim_tol is dropped
    (0 drops only exactly-empty edges, i.e. the unbounded window).
    ``max_extent``: optional cap on the box length per axis.
    Dropped mass is booked as ``clipped_mass``; exceeding ``budget`` raises
    :class:`WindowOverflow`.
    """

    trim_tol: float = 0.0
    max_extent: int | None = None
    budget: float = 1e-12

    @classmethod
    def unbounded(cls) -> "WindowPolicy":
        return cls()

    @classmethod
    def trimmed(cls, tol: float = DEFAULT_TRIM, budget: float = 1e-12) -> "WindowPolicy":
        return cls(trim_tol=tol, budget=budget)

    def to_json(self) -> dict:
        return {"trim_tol": self.trim_tol, "max_extent": self.max_extent, "budget": self.budget}


@dataclass
class MassTable:
    step: int
    origin: tuple[int, ...]
    lo: np.ndarray
    values: np.ndarray
    killed_mass: float | Fraction
    clipped_mass: float = 0.0

    @property
    def exact(self) -> bool:
        return self.values.dtype == object

    @property
    def d(self) -> int:
        return self.values.ndim

    def get(self, y) -> float | Fraction:
        idx = np.asarray(y, dtype=np.int64) - self.lo
        if np.any(idx < 0) or np.any(idx >= self.values.shape):
            return Fraction(0) if self.exact else 0.0
        v = self.values[tuple(idx)]
        return Fraction(v) if self.exact else float(v)

    def total(self) -> float | Fraction:
        if self.exact:
            return sum(self.values.ravel().tolist(), Fraction(0))
        return float(np.sum(self.values))

    def points(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates (m, d) and values (m,) of the nonzero cells."""
        nz = np.nonzero(self.values != 0) if self.exact else np.nonzero(self.values)
        coords = np.stack(nz, axis=-1) + self.lo
        return coords, self.values[nz]

    def to_dict(self) -> dict[tuple[int, ...], float | Fraction]:
        coords, vals = self.points()
        conv = Fraction if self.exact else float
        return {tuple(int(c) for c in p): conv(v) for p, v in zip(coords.tolist(), vals.tolist())}

    def expect(self, f: Callable) -> float:
        """sum_y f(y) * mass(y) over the live slice."""
        coords, vals = self.points()
        if len(vals) == 0:
            return 0.0
        fv = np.asarray(f(coords), dtype=float)
        return math.fsum((fv * vals.astype(float)).tolist())


class _Stepper:
    def __init__(self, model: WalkModel, exact: bool, parallel: bool, use_numba: bool | None):
        self.model = model
        self.exact = exact
        self.parallel = parallel
        self.use_numba = HAVE_NUMBA if use_numba is None else use_numba
        self.steps = model.steps
        self.probs = np.array(model.exact_probs, dtype=object) if exact else model.probs
        self.M = np.eye(model.d) if model.transform is None else np.ascontiguousarray(model.transform)
        self.U = np.ascontiguousarray(model.cone.unit_normals)

    def __call__(self, values, lo):
        if self.exact:
            return _kernels.step_numpy(values, lo, self.steps, self.probs, self.M, self.U, _EPS)
        return _kernels.step(
            values, lo, self.steps, self.probs, self.M, self.U, _EPS, self.parallel, self.use_numba
        )


def _edge_mass(values: np.ndarray, axis: int, side: int):
    idx = 0 if side == 0 else values.shape[axis] - 1
    edge = np.take(values, [idx], axis=axis)
    if values.dtype == object:
        return sum(edge.ravel().tolist(), Fraction(0))
    return float(np.sum(edge))


def _trim(values: np.ndarray, lo: np.ndarray, policy: WindowPolicy):
    """Drop light edges; returns (values, lo, clipped mass)."""
    clipped = 0.0
    lo = lo.copy()
    for axis in range(values.ndim):
        for side in (0, 1):
            while values.shape[axis] > 1:
                m = _edge_mass(values, axis, side)
                if m != 0 and not (values.dtype != object and m <= policy.trim_tol):
                    break
                clipped += float(m)
                sl = [slice(None)] * values.ndim
                sl[axis] = slice(1, None) if side == 0 else slice(0, -1)
                values = values[tuple(sl)]
                if side == 0:
                    lo[axis] += 1
    if policy.max_extent is not None:
        for axis in range(values.ndim):
            while values.shape[axis] > policy.max_extent:
                m0 = _edge_mass(values, axis, 0)
                m1 = _edge_mass(values, axis, 1)
                side = 0 if m0 <= m1 else 1
                clipped += float(min(m0, m1))
                sl = [slice(None)] * values.ndim
                sl[axis] = slice(1, None) if side == 0 else slice(0, -1)
                values = values[tuple(sl)]
                if side == 0:
                    lo[axis] += 1
    return values, lo, clipped


def _check_start(model: WalkModel, x) -> tuple[int, ...]:
    x = tuple(int(v) for v in np.atleast_1d(x))
    if len(x) != model.d:
        raise KernelError(f"start point {list(x)} has dimension {len(x)}, model has {model.d}")
    if not model.contains(x):
        raise OutsideCone(f"start point {list(x)} is not in the open cone")
    return x


def evolve(
    model: WalkModel,
    x,
    n_max: int,
    window: WindowPolicy | None = None,
    exact: bool = False,
    parallel: bool = False,
    use_numba: bool | None = None,
) -> Iterator[MassTable]:
    """Yield slices n = 0, 1, ..., n_max of the killed evolution started at ``x``."""
    x = _check_start(model, x)
    window = window or WindowPolicy()
    stepper = _Stepper(model, exact, parallel, use_numba)
    shape = (1,) * model.d
    if exact:
        values = np.empty(shape, dtype=object)
        values[...] = Fraction(1)
        killed: Fraction | Neumaier = Fraction(0)
    else:
        values = np.ones(shape)
        killed = Neumaier()
    lo = np.array(x, dtype=np.int64)
    clipped = 0.0
    yield MassTable(0, x, lo, values, Fraction(0) if exact else 0.0, 0.0)
    for n in range(1, n_max + 1):
        values, lo, k = stepper(values, lo)
        if exact:
            killed += k
        else:
            killed.add(k)
        values, lo, c = _trim(values, lo, window)
        clipped += c
        if clipped > window.budget:
            raise WindowOverflow(
                f"clipped mass {clipped:.3e} exceeds budget {window.budget:.1e} at step {n}"
            )
        yield MassTable(n, x, lo, values, killed if exact else killed.value, clipped)


@dataclass
class RunRecord:
    """Records of one evolution over n = 0..n_steps.

    ``series[i, k]`` is P_n(x, y_k) at step ``n = steps[i]`` (every step unless
    a subset was requested); ``sums[k]`` is the sum of P_n(x, y_k) over all
    n = 0..n_steps; ``totals`` and ``killed`` are per step.
    """

    series: np.ndarray
    totals: np.ndarray
    final: MassTable
    killed: np.ndarray | None = None
    steps: np.ndarray | None = None
    sums: np.ndarray | None = None


def run(
    model: WalkModel,
    x,
    n_steps: int,
    targets: Sequence = (),
    window: WindowPolicy | None = None,
    exact: bool = False,
    parallel: bool = False,
    use_numba: bool | None = None,
    record: Sequence[int] | None = None,
) -> RunRecord:
    """Evolve ``n_steps`` recording ``P_n(x, y)`` for each target and ``P(tau_x > n)``.

    ``record`` restricts the stored target values to the given step numbers
    (their sums still run over every step).  Uses the fused jitted driver when
    available (float, d <= 2, serial).
    """
    x = _check_start(model, x)
    window = window or WindowPolicy()
    targets = np.array([tuple(int(v) for v in np.atleast_1d(y)) for y in targets], dtype=np.int64)
    targets = targets.reshape(-1, model.d)
    if record is None:
        rec = np.arange(n_steps + 1, dtype=np.int64)
    else:
        rec = np.unique(np.asarray(record, dtype=np.int64))
        if len(rec) and (rec[0] < 0 or rec[-1] > n_steps):
            raise KernelError(f"recorded steps must lie in [0, {n_steps}]")
    fused = (
        (HAVE_NUMBA if use_numba is None else use_numba)
        and not exact
        and not parallel
        and model.d in (1, 2)
        and window.max_extent is None
    )
    if not fused:
        keep = set(rec.tolist())
        zero = Fraction(0) if exact else 0.0
        series, totals, killed, final = [], [], [], None
        sums = [zero if exact else Neumaier() for _ in range(len(targets))]
        for t in evolve(model, x, n_steps, window=window, exact=exact, parallel=parallel, use_numba=use_numba):
            vals = [t.get(y) for y in targets.tolist()]
            for k, v in enumerate(vals):
                if exact:
                    sums[k] += v
                else:
                    sums[k].add(v)
            if t.step in keep:
                series.append(vals)
            totals.append(t.total())
            killed.append(t.killed_mass)
            final = t
        dtype = object if exact else float
        return RunRecord(
            np.array(series, dtype=dtype).reshape(len(rec), len(targets)),
            np.array(totals, dtype=dtype),
            final,
            np.array(killed, dtype=dtype),
            rec,
            np.array(sums if exact else [s.value for s in sums], dtype=dtype),
        )
    st = _Stepper(model, False, False, True)
    at0 = np.all(targets == np.array(x), axis=1).astype(float)
    rec_pos = rec[rec > 0]
    args = (
        st.steps, st.probs, st.M, st.U, _EPS, n_steps, float(window.trim_tol), targets, float(window.budget), rec_pos,
    )
    if model.d == 1:
        V, l0, killed, clipped, ser, sums, tot, kil, failed = _kernels.run1d(np.ones(1), x[0], *args)
        lo = np.array([l0])
    else:
        V, l0, l1, killed, clipped, ser, sums, tot, kil, failed = _kernels.run2d(np.ones((1, 1)), x[0], x[1], *args)
        lo = np.array([l0, l1])
    if failed >= 0:
        raise WindowOverflow(f"clipped mass {clipped:.3e} exceeds budget {window.budget:.1e} at step {failed}")
    series = np.vstack([at0[None, :], ser]) if len(rec) and rec[0] == 0 else ser
    sums = np.array([math.fsum([a, b]) for a, b in zip(at0, sums)])
    totals = np.concatenate([[1.0], tot])
    killed_steps = np.concatenate([[0.0], kil])
    return RunRecord(series, totals, MassTable(n_steps, x, lo, V, killed, clipped), killed_steps, rec, sums)


def _last(model, x, n, **kw) -> MassTable:
    table = None
    for table in evolve(model, x, n, **kw):
        pass
    return table


def survival(model: WalkModel, x, n: int, **kw) -> float | Fraction:
    """P(tau_x > n)."""
    return _last(model, x, n, **kw).total()


def survival_curve(model: WalkModel, x, n_max: int, **kw) -> np.ndarray:
    """P(tau_x > n) for n = 0..n_max from a single run."""
    return run(model, x, n_max, **kw).totals


def local_prob(model: WalkModel, x, y, n: int, **kw) -> float | Fraction:
    """P(x + S(n) = y, tau_x > n)."""
    return _last(model, x, n, **kw).get(y)


def time_reversal_check(model: WalkModel, x, y, n: int, **kw):
    """(P(x+S(n)=y, tau_x>n), P(y+S'(n)=x, tau'_y>n)); equal for every law."""
    return local_prob(model, x, y, n, **kw), local_prob(model.reverse(), y, x, n, **kw)


# ----------------------------------------------------------------- Green


TAIL_METHODS = ("power-law-extrapolation", "none")
FLAGS = ("converged", "tail-dominated", "horizon-too-small")


@dataclass
class GreenResult:
    truncated_sum: float
    horizon: int
    tail_estimate: float = 0.0
    tail_method: str = "none"
    fitted_decay_exponent: float = float("nan")
    error_flag: str = "horizon-too-small"
    fit: dict = field(default_factory=dict)

    @property
    def value(self) -> float:
        return float(self.truncated_sum) + self.tail_estimate

    def to_json(self) -> dict:
        return {
            "truncated_sum": float(self.truncated_sum),
            "horizon": self.horizon,
            "tail_estimate": self.tail_estimate,
            "tail_method": self.tail_method,
            "fitted_decay_exponent": self.fitted_decay_exponent,
            "error_flag": self.error_flag,
            "value": self.value,
            "fit": self.fit,
        }


def fit_tail(terms: np.ndarray, horizon: int, n: np.ndarray | None = None) -> tuple[float, float, str, dict]:
    """Extrapolate sum_{m >= horizon} P_m from the last decade of nonzero terms.

    ``terms[i]`` is P at step ``n[i]`` (default ``n = 0, 1, 2, ...``); the
    steps may be a thinned subset made of runs of consecutive steps.
    Model: log P_m = c - a log m - b / m, i.e. a power law m^{-a} with its
    Gaussian onset factor exp(-b/m).  Returns (tail, -a, flag, fit info).
    Raises NonSummableTailFit when the fitted decay exponent is > -1.
    """
    terms = np.asarray(terms, dtype=float)
    n = np.arange(len(terms)) if n is None else np.asarray(n, dtype=np.int64)
    lo = max(1, horizon // 10)
    sel = (n >= lo) & (n < horizon) & (terms > 0)
    # period of the nonzero pattern, from gaps inside runs of recorded steps
    run_id = np.concatenate([[0], np.cumsum(np.diff(n) != 1)])[: len(n)]
    n, p, run_id = n[sel], terms[sel], run_id[sel]
    if len(n) < 8:
        return 0.0, float("nan"), "horizon-too-small", {"points": int(len(n))}
    gaps = np.diff(n)[np.diff(run_id) == 0]
    stride = reduce(math.gcd, gaps.tolist()) if len(gaps) else 1
    # the decay has to be under way inside the window
    if np.argmax(p) > len(p) // 2:
        return 0.0, float("nan"), "horizon-too-small", {"points": int(len(n)), "stride": stride}
    A = np.column_stack([np.ones(len(n)), -np.log(n), -1.0 / n])
    coef, *_ = np.linalg.lstsq(A, np.log(p), rcond=None)
    c, a, b = (float(v) for v in coef)
    if -a > -1.0:
        raise NonSummableTailFit(f"fitted decay exponent {-a:.4f} > -1: tail not summable")
    # first index >= horizon in the residue class of the nonzero terms
    first = int(n[-1]) + stride * math.ceil((horizon - int(n[-1])) / stride)
    # int_A^inf t^-a e^{-b/t} dt = int_0^{1/A} s^(a-2) e^{-b s} ds
    start = first - stride / 2.0
    val, _ = integrate.quad(
        lambda s: math.exp(c - b * s), 0.0, 1.0 / start, weight="alg", wvar=(a - 2.0, 0.0)
    )
    tail = val / stride
    info = {"a": a, "b": b, "log_c": c, "stride": stride, "points": int(len(n)), "window": [lo, horizon]}
    return tail, -a, "", info


def tail_record(horizon: int, n_targets: int, budget: int = 4_000_000, block: int = 12) -> np.ndarray:
    """Step numbers to store for the tail fit over [horizon/10, horizon).

    The whole window when it fits in ``budget`` cells, otherwise blocks of
    ``block`` consecutive steps on a uniform grid (consecutive steps keep the
    period of bipartite or cyclic laws visible), always ending at horizon - 1.
    """
    lo = max(1, horizon // 10)
    hi = horizon - 1
    if hi < lo:
        return np.arange(0, dtype=np.int64)
    width = hi - lo + 1
    n_blocks = max(1, budget // (block * max(1, n_targets)))
    if width <= n_blocks * block:
        return np.arange(lo, hi + 1, dtype=np.int64)
    starts = np.linspace(lo, hi - block + 1, n_blocks).astype(np.int64)
    return np.unique((starts[:, None] + np.arange(block)[None, :]).ravel())


def green_many(
    model: WalkModel,
    x,
    ys: Sequence,
    horizon: int,
    tail: bool = True,
    window: WindowPolicy | None = None,
    exact: bool = False,
    parallel: bool = False,
    use_numba: bool | None = None,
    tail_share: float = 0.05,
) -> list[GreenResult]:
    """Green function G(x, y) for several targets from one evolution run."""
    ys = [tuple(int(v) for v in np.atleast_1d(y)) for y in ys]
    inside = [bool(model.contains(y)) for y in ys]
    record = tail_record(horizon, len(ys)) if tail and not exact else ()
    rec = run(
        model, x, horizon - 1, ys, window=window, exact=exact, parallel=parallel, use_numba=use_numba, record=record
    )
    dead = rec.totals[-1] == 0
    out = []
    for k, y in enumerate(ys):
        if not inside[k]:
            out.append(GreenResult(Fraction(0) if exact else 0.0, horizon, error_flag="converged"))
            continue
        trunc = rec.sums[k] if exact else float(rec.sums[k])
        res = GreenResult(trunc, horizon)
        if dead:
            res.error_flag = "converged"
        elif tail and not exact:
            est, expo, flag, info = fit_tail(rec.series[:, k], horizon, n=rec.steps)
            res.tail_estimate = est
            res.fitted_decay_exponent = expo
            res.fit = info
            if flag:
                res.error_flag = flag
            else:
                res.tail_method = "power-law-extrapolation"
                res.error_flag = "tail-dominated" if est > tail_share * float(trunc) else "converged"
        out.append(res)
    return out


def green(model: WalkModel, x, y, horizon: int, tail: bool = True, **kw) -> GreenResult:
    return green_many(model, x, [y], horizon, tail=tail, **kw)[0]


def green_series(model: WalkModel, x, ys: Sequence, horizon: int, **kw) -> np.ndarray:
    """Raw P_n(x, y) for n < horizon, one row per target."""
    return run(model, x, horizon - 1, ys, **kw).series.T


def green_table(model: WalkModel, x, horizon: int, **kw) -> MassTable:
    """Truncated Green function G_N(x, .) on the whole visited window."""
    acc = None
    acc_lo = None
    killed = 0.0
    for t in evolve(model, x, horizon - 1, **kw):
        if acc is None:
            acc, acc_lo = t.values.astype(float).copy(), t.lo.copy()
        else:
            new_lo = np.minimum(acc_lo, t.lo)
            new_hi = np.maximum(acc_lo + acc.shape, t.lo + t.values.shape)
            if np.any(new_lo != acc_lo) or np.any(new_hi != acc_lo + acc.shape):
                grown = np.zeros(tuple(new_hi - new_lo))
                grown[tuple(slice(int(a), int(a) + s) for a, s in zip(acc_lo - new_lo, acc.shape))] = acc
                acc, acc_lo = grown, new_lo
            sl = tuple(slice(int(a), int(a) + s) for a, s in zip(t.lo - acc_lo, t.values.shape))
            acc[sl] += t.values.astype(float)
        killed = t.killed_mass
    return MassTable(horizon, tuple(int(v) for v in np.atleast_1d(x)), acc_lo, acc, killed)


# ----------------------------------------------------- stopped functional


@dataclass
class StoppedFunctionalResult:
    value: float
    unstopped_mass: float
    horizon: int
    stopped_mass: float = 0.0
    killed_mass: float = 0.0

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "unstopped_mass": self.unstopped_mass,
            "stopped_mass": self.stopped_mass,
            "killed_mass": self.killed_mass,
            "horizon": self.horizon,
        }


def stopped_functional(
    model: WalkModel,
    y,
    R: float,
    rho: float,
    u: Callable,
    horizon: int,
    window: WindowPolicy | None = None,
    use_numba: bool | None = None,
) -> StoppedFunctionalResult:
    """E[u(y_rho); tau'_y > theta_y, theta_y <= H] for the walk ``model`` started at ``y``.

    ``model`` is the walk that is run (pass ``m.reverse()`` for S').  Mass that
    enters K_rho = {dist(., dK) >= R |.|^(1 - rho)} at a step n >= 1 is frozen
    there and contributes u(entry point).
    """
    y = _check_start(model, y)
    window = window or WindowPolicy.trimmed()
    stepper = _Stepper(model, False, False, use_numba)
    values = np.ones((1,) * model.d)
    lo = np.array(y, dtype=np.int64)
    value = Neumaier()
    stopped = Neumaier()
    killed = Neumaier()
    clipped = 0.0
    for n in range(1, horizon + 1):
        values, lo, k = stepper(values, lo)
        killed.add(k)
        coords = np.stack(np.nonzero(values), axis=-1)
        if len(coords):
            pts = coords + lo
            g = model.geometric(pts)
            dist = model.signed_distance(pts)
            hit = dist >= R * np.linalg.norm(g, axis=-1) ** (1.0 - rho)
            if np.any(hit):
                idx = tuple(coords[hit].T)
                mass = values[idx]
                uv = np.asarray(u(pts[hit]), dtype=float)
                value.add(math.fsum((uv * mass).tolist()))
                stopped.add(math.fsum(mass.tolist()))
                values[idx] = 0.0
        values, lo, c = _trim(values, lo, window)
        clipped += c
        if clipped > window.budget:
            raise WindowOverflow(f"clipped mass {clipped:.3e} exceeds budget at step {n}")
        if not values.any():
            break
    return StoppedFunctionalResult(
        value.value, float(np.sum(values)), horizon, stopped.value, killed.value
    )
