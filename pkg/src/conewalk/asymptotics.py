"""Normalized Green-function ratios along paths to infinity, and their plateau fits.

Each harness returns a :class:`RatioSeries`: the scales |y_k|, the normalized
ratios, and the plateau statistics computed by :func:`fit_plateau`.  No
numerical value is asserted for the limiting constants; what is checked is that
the ratio levels off.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import geometry, kernel
from .errors import (
    PathLeavesRegime,
    TooFewPoints,
    UnstoppedMassTooLarge,
    WrongConeVariant,
    ZeroDenominator,
)
from .harmonic import estimate_V, estimate_V_prime
from .model import WalkModel

SCHEMA = "# cone-walk v1"
RATE_FLOOR = 1e-10


def fit_plateau(scales: Sequence[float], values: Sequence[float], k_last: int = 4) -> tuple[float, float, float]:
    """(limit, rate, spread) of a series expected to level off.

    limit  -- mean of the last ``k_last`` values
    rate   -- slope of log|value - limit| against log scale over the earlier
              points; residuals are floored at 1e-10 (relative), so a constant
              series gives rate 0
    spread -- (max - min) / mean over the last ``k_last`` values
    """
    s = np.asarray(scales, dtype=float)
    v = np.asarray(values, dtype=float)
    if len(v) < k_last + 2:
        raise TooFewPoints(f"need at least {k_last + 2} points, got {len(v)}")
    tail = v[-k_last:]
    limit = float(tail.mean())
    spread = float((tail.max() - tail.min()) / abs(limit)) if limit != 0 else math.inf
    floor = RATE_FLOOR * max(1.0, abs(limit))
    head_s, head_v = s[:-k_last], v[:-k_last]
    resid = np.maximum(np.abs(head_v - limit), floor)
    if np.all(resid == floor):
        return limit, 0.0, spread
    rate = float(np.polyfit(np.log(head_s), np.log(resid), 1)[0])
    return limit, rate, spread


@dataclass
class RatioSeries:
    scales: list[float]
    ratios: list[float]
    fitted_limit: float
    fitted_rate: float
    plateau_spread: float
    points: list[tuple[int, ...]] = field(default_factory=list)
    aux: dict[str, list] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    k_last: int = 4

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.scales, self.scales[1:])):
            raise ValueError("scales must be strictly increasing")
        if self.plateau_spread < 0:
            raise ValueError("plateau_spread must be non-negative")

    @classmethod
    def build(cls, scales, ratios, k_last=4, **kw) -> "RatioSeries":
        limit, rate, spread = fit_plateau(scales, ratios, k_last)
        return cls([float(s) for s in scales], [float(r) for r in ratios], limit, rate, spread, k_last=k_last, **kw)

    def plateau(self, threshold: float) -> bool:
        return bool(np.isfinite(self.plateau_spread) and self.plateau_spread < threshold)

    def rescaled(self, c: float) -> "RatioSeries":
        """Series with every ratio multiplied by ``c``."""
        return RatioSeries.build(
            self.scales, [c * r for r in self.ratios], self.k_last,
            points=self.points, aux=self.aux, meta=self.meta,
        )

    def summary(self, threshold: float | None = None) -> dict:
        out = {
            "fitted_limit": self.fitted_limit,
            "fitted_rate": self.fitted_rate,
            "plateau_spread": self.plateau_spread,
            "k_last": self.k_last,
            "n_points": len(self.scales),
        }
        if threshold is not None:
            out["threshold"] = threshold
            out["verdict"] = "plateau" if self.plateau(threshold) else "no-plateau"
        out.update(self.meta)
        return out

    def to_json(self, threshold: float | None = None) -> dict:
        doc = self.summary(threshold)
        doc["scales"] = self.scales
        doc["ratios"] = self.ratios
        doc["points"] = [list(p) for p in self.points]
        doc["aux"] = self.aux
        return doc

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(SCHEMA + "\n")
        d = len(self.points[0]) if self.points else 0
        cols = ["scale", "ratio"] + [f"y{i}" for i in range(d)] + list(self.aux)
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for k in range(len(self.scales)):
            row = [repr(self.scales[k]), repr(self.ratios[k])]
            row += [str(v) for v in (self.points[k] if self.points else ())]
            row += [_cell(self.aux[c][k]) for c in self.aux]
            w.writerow(row)
        return buf.getvalue()


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return json.dumps(v)
    return str(v)


# -------------------------------------------------------------- path helpers


def interior_offset(model: WalkModel) -> tuple[int, ...]:
    """The shortest small integer vector inside the cone (ties broken lexicographically)."""
    for r in range(1, 6):
        cands = [c for c in itertools.product(range(-r, r + 1), repeat=model.d) if any(c)]
        cands.sort(key=lambda c: (sum(v * v for v in c), [-v for v in c]))
        for c in cands:
            if model.contains(c):
                return tuple(c)
    raise PathLeavesRegime("no integer point of norm <= 5 inside the cone")


def lattice_path(model: WalkModel, direction, scales, offset=None) -> tuple[list[tuple[int, ...]], list[bool]]:
    """Round ``t * direction`` to the lattice; add ``offset`` when the rounded point is outside K."""
    direction = np.asarray(direction, dtype=float)
    offset = np.array(offset if offset is not None else interior_offset(model), dtype=np.int64)
    pts, shifted = [], []
    for t in scales:
        y = np.rint(float(t) * direction).astype(np.int64)
        moved = not model.contains(y)
        if moved:
            y = y + offset
            if not model.contains(y):
                raise PathLeavesRegime(f"rounded point {y.tolist()} stays outside K after the offset")
        pts.append(tuple(int(v) for v in y))
        shifted.append(moved)
    return pts, shifted


def _green_values(model, x, pts, horizon, window, **kw) -> list[kernel.GreenResult]:
    return kernel.green_many(model, x, pts, horizon, window=window or kernel.WindowPolicy.trimmed(), **kw)


def _green_aux(res: list[kernel.GreenResult]) -> dict[str, list]:
    return {
        "green": [r.value for r in res],
        "green_tail": [r.tail_estimate for r in res],
        "green_flag": [r.error_flag for r in res],
    }


def _V(model, x, V, u, schedule) -> float:
    if V is not None:
        return float(V(x) if callable(V) else V)
    return estimate_V(model, x, u, schedule).limit


# ------------------------------------------------------------- ratio harnesses


def verify_interior(
    model: WalkModel,
    x,
    direction,
    scales: Sequence[float],
    alpha: float | None = None,
    horizon: int = 10_000,
    u: Callable | None = None,
    V=None,
    schedule=(16, 32, 64, 128),
    window: kernel.WindowPolicy | None = None,
    k_last: int = 4,
    offset=None,
    **kw,
) -> RatioSeries:
    """G(x, y_k) |y_k|^(2p+d-2) / (V(x) u(y_k)) along an interior ray."""
    entry = model.reduite()
    u = u or entry
    pts, shifted = lattice_path(model, direction, scales, offset)
    norms = [float(model.norm(y)) for y in pts]
    if alpha is not None:
        for y, r in zip(pts, norms):
            if model.signed_distance(y) < alpha * r:
                raise PathLeavesRegime(f"{list(y)}: dist to boundary < {alpha} |y|")
    expo = 2 * entry.p + model.d - 2
    res = _green_values(model, x, pts, horizon, window, **kw)
    vx = _V(model, x, V, u, schedule)
    uy = [float(u(np.array(y))) for y in pts]
    ratios = [r.value * n**expo / (vx * uu) for r, n, uu in zip(res, norms, uy)]
    aux = {"u": uy, **_green_aux(res), "offset_applied": shifted}
    meta = {"harness": "interior", "exponent": expo, "V_x": vx, "horizon": horizon}
    return RatioSeries.build(norms, ratios, k_last, points=pts, aux=aux, meta=meta)


def halfspace_path(model: WalkModel, scales: Sequence[int], height: Callable | None = None, axis: int | None = None):
    """y_k = k e_axis + height(k) n for a half-space with lattice normal n; y_k = k for d = 1."""
    if model.cone.variant != "halfspace":
        raise WrongConeVariant(f"expected a half-space cone, got {model.cone.variant}")
    if model.d == 1:
        return [(int(k),) for k in scales]
    n = model.cone.unit_normals[0]
    j = int(np.argmax(np.abs(n)))
    if not np.isclose(abs(n[j]), 1.0) or model.transform is not None:
        raise WrongConeVariant("boundary-hugging paths need an axis-aligned half-space")
    height = height or (lambda k: math.ceil(math.sqrt(k)))
    axis = axis if axis is not None else next(i for i in range(model.d) if i != j)
    pts = []
    for k in scales:
        y = [0] * model.d
        y[axis] = int(k)
        y[j] = int(np.sign(n[j])) * int(height(k))
        pts.append(tuple(y))
    return pts


def verify_halfspace(
    model: WalkModel,
    x,
    scales: Sequence[int],
    horizon: int = 10_000,
    height: Callable | None = None,
    V=None,
    V_prime=None,
    schedule=(16, 32, 64, 128),
    window: kernel.WindowPolicy | None = None,
    k_last: int = 4,
    **kw,
) -> RatioSeries:
    """G(x, y) |y|^d / (V(x) V'(y)) along a path with y_d growing slower than |y|."""
    pts = halfspace_path(model, scales, height)
    u = model.reduite()
    res = _green_values(model, x, pts, horizon, window, **kw)
    vx = _V(model, x, V, u, schedule)
    if V_prime is None:
        vp = [estimate_V_prime(model, y, u, schedule).limit for y in pts]
    else:
        vp = [float(V_prime(np.array(y))) for y in pts]
    norms = [float(model.norm(y)) for y in pts]
    ratios = [r.value * n**model.d / (vx * v) for r, n, v in zip(res, norms, vp)]
    aux = {"V_prime": vp, **_green_aux(res)}
    meta = {"harness": "halfspace", "exponent": model.d, "V_x": vx, "horizon": horizon}
    return RatioSeries.build(norms, ratios, k_last, points=pts, aux=aux, meta=meta)


def verify_boundary(
    model: WalkModel,
    x,
    sigma,
    scales: Sequence[float],
    R: float = 1.0,
    rho: float = 0.25,
    horizon: int = 10_000,
    sf_horizon: int | None = None,
    offset=None,
    exponent: float | None = None,
    max_unstopped: float = 0.05,
    V=None,
    schedule=(16, 32, 64, 128),
    window: kernel.WindowPolicy | None = None,
    k_last: int = 4,
    **kw,
) -> RatioSeries:
    """G(x, y) |y|^e / (V(x) E[u(y_rho); tau'_y > theta_y]) along y_k = round(k sigma) + offset.

    The default exponent is e = p + q_sigma + d - 2.  ``unstopped_share`` is
    the alive-but-unstopped mass at ``sf_horizon`` relative to all surviving
    mass (stopped + unstopped); above ``max_unstopped`` the functional is
    untrusted and UnstoppedMassTooLarge is raised.
    """
    sigma = np.asarray(sigma, dtype=float)
    sigma = sigma / np.linalg.norm(sigma)
    tc = geometry.tangent_cone(model.cone, sigma)
    entry = model.reduite()
    expo = entry.p + tc.q + model.d - 2 if exponent is None else float(exponent)
    pts = [tuple(int(v) for v in np.rint(float(k) * sigma).astype(np.int64) + np.array(offset if offset is not None else interior_offset(model))) for k in scales]
    for y in pts:
        if not model.contains(y):
            raise PathLeavesRegime(f"{list(y)} is outside the cone")
    res = _green_values(model, x, pts, horizon, window, **kw)
    vx = _V(model, x, V, entry, schedule)
    rev = model.reverse()
    sfs = []
    for y in pts:
        h = sf_horizon or int(math.ceil(5 * (R * float(model.norm(y)) ** (1 - rho)) ** 2)) + 100
        sf = kernel.stopped_functional(rev, y, R, rho, entry, h)
        live = sf.stopped_mass + sf.unstopped_mass
        share = sf.unstopped_mass / live if live > 0 else 0.0
        if share > max_unstopped:
            raise UnstoppedMassTooLarge(
                f"{list(y)}: unstopped share {share:.3f} > {max_unstopped} after {h} steps"
            )
        sfs.append((sf, share, h))
    norms = [float(model.norm(y)) for y in pts]
    ratios = [r.value * n**expo / (vx * sf.value) for r, n, (sf, _, _) in zip(res, norms, sfs)]
    aux = {
        "stopped_functional": [s.value for s, _, _ in sfs],
        "unstopped_mass": [s.unstopped_mass for s, _, _ in sfs],
        "unstopped_share": [sh for _, sh, _ in sfs],
        "sf_horizon": [h for _, _, h in sfs],
        **_green_aux(res),
    }
    meta = {
        "harness": "boundary",
        "exponent": expo,
        "p": entry.p,
        "q_sigma": tc.q,
        "R": R,
        "rho": rho,
        "V_x": vx,
        "horizon": horizon,
    }
    return RatioSeries.build(norms, ratios, k_last, points=pts, aux=aux, meta=meta)


def boundary_profile(
    model: WalkModel,
    x,
    base,
    axis: int,
    dists: Sequence[int] = tuple(range(1, 11)),
    horizon: int = 10_000,
    window: kernel.WindowPolicy | None = None,
    **kw,
) -> dict:
    """G(x, base + t e_axis) for t in ``dists`` with the R^2 of a straight-line fit in t."""
    pts = []
    for t in dists:
        y = list(base)
        y[axis] += int(t)
        pts.append(tuple(y))
    res = _green_values(model, x, pts, horizon, window, **kw)
    g = np.array([r.value for r in res])
    t = np.asarray(dists, dtype=float)
    slope, icpt = np.polyfit(t, g, 1)
    fit = slope * t + icpt
    r2 = 1.0 - float(np.sum((g - fit) ** 2) / np.sum((g - g.mean()) ** 2))
    return {"dists": t.tolist(), "green": g.tolist(), "slope": float(slope), "intercept": float(icpt), "r2": r2}


def martin_kernel(
    model: WalkModel,
    x,
    x0,
    y_path: Sequence,
    horizon: int = 10_000,
    window: kernel.WindowPolicy | None = None,
    schedule=(16, 32, 64, 128),
    k_last: int = 4,
    **kw,
) -> RatioSeries:
    """G(x, y_n) / G(x0, y_n) along ``y_path``; compare the limit with V(x) / V(x0)."""
    pts = [tuple(int(v) for v in np.atleast_1d(y)) for y in y_path]
    gx = _green_values(model, x, pts, horizon, window, **kw)
    same = tuple(np.atleast_1d(x).tolist()) == tuple(np.atleast_1d(x0).tolist())
    g0 = gx if same else _green_values(model, x0, pts, horizon, window, **kw)
    ratios = []
    for y, a, b in zip(pts, gx, g0):
        if b.value == 0:
            raise ZeroDenominator(f"G(x0, {list(y)}) = 0: point unreachable from x0")
        ratios.append(a.value / b.value)
    u = model.reduite()
    v_ratio = estimate_V(model, x, u, schedule).limit / estimate_V(model, x0, u, schedule).limit
    norms = [float(model.norm(y)) for y in pts]
    aux = {"green_x": [r.value for r in gx], "green_x0": [r.value for r in g0]}
    meta = {"harness": "martin", "V_ratio": v_ratio, "horizon": horizon}
    return RatioSeries.build(norms, ratios, k_last, points=pts, aux=aux, meta=meta)


# ----------------------------------------------------------------- survival


def survival_exponent(model: WalkModel, x, n_lo: int = 1_000, n_hi: int = 10_000, window=None, **kw) -> dict:
    """Least-squares slope of log P(tau_x > n) against log n over n in [n_lo, n_hi]."""
    curve = kernel.run(model, x, n_hi, window=window or kernel.WindowPolicy.trimmed(), **kw).totals
    n = np.arange(n_lo, n_hi + 1)
    slope, icpt = np.polyfit(np.log(n), np.log(curve[n_lo : n_hi + 1]), 1)
    return {"slope": float(slope), "intercept": float(icpt), "n_lo": n_lo, "n_hi": n_hi, "curve": curve}


def survival_ratio(curve: np.ndarray, power: float, n_lo: int, n_hi: int, scale: float = 1.0) -> np.ndarray:
    """n^power * P(tau > n) / scale for n in [n_lo, n_hi]."""
    n = np.arange(n_lo, n_hi + 1)
    return n**power * np.asarray(curve[n_lo : n_hi + 1], dtype=float) / scale
