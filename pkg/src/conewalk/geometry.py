"""Convex polyhedral cones: membership, boundary distance, reduites, tangent cones.

Every supported variant (half-space, orthant, convex 2-D wedge, general
polyhedral) is stored as an intersection of open half-spaces
``{x : <x, n_j> > 0}``; the variant name only matters for serialization and
for the closed-form reduite lookup.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import GeometryError, NotCatalogued, NotOnBoundary, OutsideCone

# relative slack for sign tests; lattice points on a face give |<x,n>| ~ 1e-16 |x|
_EPS = 1e-12
VARIANTS = ("halfspace", "orthant", "wedge2d", "polyhedral")


@dataclass(frozen=True)
class ConeSpec:
    variant: str
    d: int
    normal: tuple[float, ...] | None = None
    beta: float | None = None
    normals: tuple[tuple[float, ...], ...] | None = None
    _raw: np.ndarray = field(init=False, repr=False, compare=False)
    _unit: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise GeometryError(f"unknown cone variant {self.variant!r}")
        if self.d < 1:
            raise GeometryError("cone dimension must be >= 1")
        if self.variant == "halfspace":
            raw = np.array([self.normal], dtype=float)
        elif self.variant == "orthant":
            raw = np.eye(self.d)
        elif self.variant == "wedge2d":
            b = float(self.beta)
            if self.d != 2:
                raise GeometryError("wedge2d lives in dimension 2")
            if not 0.0 < b < 2 * math.pi:
                raise GeometryError(f"wedge opening must lie in (0, 2pi), got {b}")
            if b > math.pi + 1e-15:
                raise GeometryError(f"wedge opening {b} > pi is not convex")
            raw = np.array([[0.0, 1.0], [math.sin(b), -math.cos(b)]])
        else:
            raw = np.array(self.normals, dtype=float)
        if raw.ndim != 2 or raw.shape[1] != self.d or raw.shape[0] == 0:
            raise GeometryError(f"normals must be a non-empty list of {self.d}-vectors")
        norms = np.linalg.norm(raw, axis=1)
        if np.any(norms == 0):
            raise GeometryError("zero normal vector")
        object.__setattr__(self, "_raw", raw)
        object.__setattr__(self, "_unit", _dedupe(raw / norms[:, None]))
        if self.variant == "polyhedral" and interior_witness(raw) is None:
            raise GeometryError("polyhedral cone has empty interior")

    @property
    def raw_normals(self) -> np.ndarray:
        """Inward normals as given (not normalized); used for sign tests."""
        return self._raw

    @property
    def unit_normals(self) -> np.ndarray:
        return self._unit

    def contains(self, x) -> bool | np.ndarray:
        return contains(self, x)

    def image(self, M) -> "ConeSpec":
        """The cone ``M K`` as a polyhedral cone."""
        M = np.asarray(M, dtype=float)
        # <x, n> > 0  <=>  <M x, M^{-T} n> > 0
        new = self._raw @ np.linalg.inv(M)
        return polyhedral(new.tolist())

    def to_json(self) -> dict:
        if self.variant == "halfspace":
            return {"variant": "halfspace", "normal": list(self.normal)}
        if self.variant == "orthant":
            return {"variant": "orthant", "d": self.d}
        if self.variant == "wedge2d":
            return {"variant": "wedge2d", "beta": self.beta}
        return {"variant": "polyhedral", "normals": [list(n) for n in self.normals]}

    @classmethod
    def from_json(cls, doc: dict) -> "ConeSpec":
        try:
            v = doc["variant"]
            if v == "halfspace":
                return halfspace(doc["normal"])
            if v == "orthant":
                return orthant(int(doc["d"]))
            if v == "wedge2d":
                return wedge2d(float(doc["beta"]))
            if v == "polyhedral":
                return polyhedral(doc["normals"])
        except KeyError as exc:
            raise GeometryError(f"cone JSON missing field {exc}") from None
        raise GeometryError(f"unknown cone variant {doc.get('variant')!r}")


def halfspace(normal: Sequence[float]) -> ConeSpec:
    normal = tuple(_num(v) for v in normal)
    return ConeSpec("halfspace", len(normal), normal=normal)


def orthant(d: int) -> ConeSpec:
    return ConeSpec("orthant", d)


def wedge2d(beta: float) -> ConeSpec:
    return ConeSpec("wedge2d", 2, beta=float(beta))


def polyhedral(normals: Sequence[Sequence[float]]) -> ConeSpec:
    normals = tuple(tuple(_num(v) for v in n) for n in normals)
    if not normals:
        raise GeometryError("polyhedral cone needs at least one normal")
    return ConeSpec("polyhedral", len(normals[0]), normals=normals)


def _num(v):
    return int(v) if isinstance(v, (int, np.integer)) else float(v)


def _dedupe(unit: np.ndarray) -> np.ndarray:
    keep: list[np.ndarray] = []
    for n in unit:
        if not any(np.allclose(n, m, atol=1e-12) for m in keep):
            keep.append(n)
    return np.array(keep)


def interior_witness(normals: np.ndarray) -> np.ndarray | None:
    """A point strictly inside ``{<x, n_j> > 0}``, or None if the interior is empty."""
    from scipy.optimize import linprog

    k, d = normals.shape
    unit = normals / np.linalg.norm(normals, axis=1)[:, None]
    # maximize t subject to <x, n_j> >= t, -1 <= x_i <= 1, t <= 1
    c = np.zeros(d + 1)
    c[-1] = -1.0
    A = np.hstack([-unit, np.ones((k, 1))])
    res = linprog(c, A_ub=A, b_ub=np.zeros(k), bounds=[(-1, 1)] * d + [(None, 1)], method="highs")
    if res.status != 0 or -res.fun <= 1e-12:
        return None
    return res.x[:d]


def _as_points(x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    return (arr[None, :], True) if arr.ndim == 1 else (arr, False)


def contains(cone: ConeSpec, x):
    """Membership in the open cone; boundary points are outside."""
    pts, single = _as_points(x)
    if pts.shape[-1] != cone.d:
        raise GeometryError(f"point of dimension {pts.shape[-1]} vs cone dimension {cone.d}")
    dots = pts @ cone.unit_normals.T
    scale = np.maximum(1.0, np.linalg.norm(pts, axis=-1))
    inside = np.all(dots > _EPS * scale[..., None], axis=-1)
    return bool(inside[0]) if single else inside


def signed_distance(cone: ConeSpec, x):
    """min_j <x, n_j/|n_j|>: the boundary distance inside the cone, <= 0 outside."""
    pts, single = _as_points(x)
    dist = np.min(pts @ cone.unit_normals.T, axis=-1)
    return float(dist[0]) if single else dist


def dist_boundary(cone: ConeSpec, x) -> float:
    if not contains(cone, x):
        raise OutsideCone(f"{list(np.asarray(x).tolist())} is not in the open cone")
    return signed_distance(cone, x)


def in_K_rho(cone: ConeSpec, y, R: float = 1.0, rho: float = 0.25) -> bool:
    """dist(y, dK) >= R |y|^(1 - rho), closed inequality."""
    y = np.asarray(y, dtype=float)
    if not contains(cone, y):
        return False
    return signed_distance(cone, y) >= R * float(np.linalg.norm(y)) ** (1.0 - rho)


# ---------------------------------------------------------------- reduites


@dataclass(frozen=True)
class ReduiteEntry:
    """Positive harmonic function of the cone vanishing on its boundary, homogeneous of degree p."""

    p: float
    u: Callable
    closed_form: bool = True
    kind: str = ""

    def __call__(self, x):
        return self.u(x)


class _Linear:
    def __init__(self, n):
        self.n = n

    def __call__(self, x):
        pts, single = _as_points(x)
        out = np.clip(pts @ self.n, 0.0, None)
        return float(out[0]) if single else out


class _Product:
    def __init__(self, normals, standard: bool):
        self.normals = normals
        self.standard = standard

    def __call__(self, x):
        if self.standard and np.ndim(x) == 1 and all(isinstance(v, (int, np.integer)) for v in x):
            # exact on integer lattice points
            return float(max(0, math.prod(int(v) for v in x)))
        pts, single = _as_points(x)
        dots = np.clip(pts @ self.normals.T, 0.0, None)
        out = np.prod(dots, axis=-1)
        return float(out[0]) if single else out


class _Wedge:
    def __init__(self, n1, n2):
        r1 = n2 - (n2 @ n1) * n1
        self.n1 = n1
        self.r1 = r1 / np.linalg.norm(r1)
        self.beta = math.pi - math.acos(float(np.clip(n1 @ n2, -1.0, 1.0)))
        self.p = math.pi / self.beta

    def __call__(self, x):
        pts, single = _as_points(x)
        a = pts @ self.n1
        b = pts @ self.r1
        theta = np.arctan2(a, b)
        r = np.hypot(a, b)
        out = r**self.p * np.sin(self.p * theta)
        inside = (theta > 0) & (theta < self.beta)
        out = np.where(inside, np.clip(out, 0.0, None), 0.0)
        return float(out[0]) if single else out


class _Composed:
    def __init__(self, inner, M):
        self.inner = inner
        self.M = M

    def __call__(self, x):
        pts, single = _as_points(x)
        out = self.inner(pts @ self.M.T)
        return float(out[0]) if single else out


def reduite(cone: ConeSpec) -> ReduiteEntry:
    """Closed-form reduite for cones isometric to (R^k x) half-space, orthant or wedge."""
    unit = cone.unit_normals
    k = len(unit)
    if k == 1:
        return ReduiteEntry(1.0, _Linear(unit[0]), kind="halfspace")
    gram = unit @ unit.T
    if np.allclose(gram, np.eye(k), atol=1e-12):
        standard = cone.variant == "orthant"
        return ReduiteEntry(float(k), _Product(unit, standard), kind="orthant")
    if k == 2:
        w = _Wedge(unit[0], unit[1])
        return ReduiteEntry(w.p, w, kind="wedge")
    raise NotCatalogued(f"no closed-form reduite for a cone with {k} non-orthogonal faces")


def composed_reduite(cone: ConeSpec, M) -> ReduiteEntry:
    """Reduite of ``cone`` evaluated at ``M x`` (lattice coordinates in, geometric out)."""
    base = reduite(cone)
    if M is None:
        return base
    return ReduiteEntry(base.p, _Composed(base.u, np.asarray(M, dtype=float)), base.closed_form, base.kind)


# ------------------------------------------------------------ tangent cones


@dataclass(frozen=True)
class TangentCone:
    sigma: tuple[float, ...]
    cone: ConeSpec
    q: float


def tangent_cone(cone: ConeSpec, sigma, tol: float = 1e-9) -> TangentCone:
    s = np.asarray(sigma, dtype=float)
    if abs(np.linalg.norm(s) - 1.0) > tol:
        raise NotOnBoundary("sigma must be a unit vector")
    dots = cone.unit_normals @ s
    if np.any(dots < -tol):
        raise NotOnBoundary("sigma lies outside the closed cone")
    active = cone.unit_normals[np.abs(dots) <= tol]
    if len(active) == 0:
        raise NotOnBoundary("sigma is an interior direction")
    tc = halfspace(active[0].tolist()) if len(active) == 1 else polyhedral(active.tolist())
    return TangentCone(tuple(s.tolist()), tc, reduite(tc).p)


def sup_tangent_exponent(cone: ConeSpec) -> float:
    """q = sup of q_sigma over boundary directions, by enumerating the faces of the cone."""
    from scipy.optimize import linprog

    unit = cone.unit_normals
    k, d = unit.shape
    best = 0.0
    for size in range(1, k + 1):
        for S in itertools.combinations(range(k), size):
            rest = [j for j in range(k) if j not in S]
            A_eq = unit[list(S)]
            if not rest:
                # the whole cone is its own tangent cone only along its lineality space
                if np.linalg.matrix_rank(A_eq) >= d:
                    continue
            else:
                c = np.zeros(d + 1)
                c[-1] = -1.0
                A_ub = np.hstack([-unit[rest], np.ones((len(rest), 1))])
                res = linprog(
                    c,
                    A_ub=A_ub,
                    b_ub=np.zeros(len(rest)),
                    A_eq=np.hstack([A_eq, np.zeros((size, 1))]),
                    b_eq=np.zeros(size),
                    bounds=[(-1, 1)] * d + [(None, 1)],
                    method="highs",
                )
                if res.status != 0 or -res.fun <= 1e-9:
                    continue
            face = halfspace(A_eq[0].tolist()) if size == 1 else polyhedral(A_eq.tolist())
            best = max(best, reduite(face).p)
    # a half-line has no boundary directions on S^0; the exponent bound q >= 1 still applies
    return max(best, 1.0)
