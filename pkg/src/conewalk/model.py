"""Walk models on Z^d and machine checks of the standing hypotheses.

Probabilities are kept as exact fractions; floats only appear through the
optional decorrelating transform and in the derived ``probs`` array used by
the numeric kernels.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from . import geometry
from .errors import (
    DimensionMismatch,
    EmptySupport,
    ModelError,
    SampleTooClose,
    SingularCovariance,
)
from .geometry import ConeSpec


def parse_prob(text, index: int | None = None) -> Fraction:
    """Parse ``"num/den"``, a decimal string or a number into an exact fraction."""
    where = f"atom {index}: " if index is not None else ""
    if isinstance(text, float):
        raise ModelError(f"{where}probability {text!r} must be a string or integer, not a float")
    try:
        value = Fraction(str(text).strip())
    except ZeroDivisionError:
        raise ModelError(f"{where}probability {text!r} has zero denominator") from None
    except ValueError:
        raise ModelError(f"{where}cannot parse probability {text!r}") from None
    return value


@dataclass(frozen=True)
class IncrementDistribution:
    atoms: tuple[tuple[tuple[int, ...], Fraction], ...]

    def __post_init__(self):
        if not self.atoms:
            raise EmptySupport("increment distribution has no atoms")
        d = len(self.atoms[0][0])
        seen = set()
        total = Fraction(0)
        for i, (step, prob) in enumerate(self.atoms):
            if len(step) != d:
                raise DimensionMismatch(f"atom {i} has dimension {len(step)}, expected {d}")
            if prob <= 0:
                raise ModelError(f"atom {i}: probability {prob} is not strictly positive")
            if step in seen:
                raise ModelError(f"atom {i}: duplicate step {list(step)}")
            seen.add(step)
            total += prob
        if total != 1:
            raise ModelError(f"probabilities sum to {total}, not 1")

    @classmethod
    def from_pairs(cls, pairs) -> "IncrementDistribution":
        atoms = []
        for i, (step, prob) in enumerate(pairs):
            prob = prob if isinstance(prob, Fraction) else parse_prob(prob, i)
            atoms.append((tuple(int(v) for v in step), prob))
        return cls(tuple(atoms))

    @property
    def d(self) -> int:
        return len(self.atoms[0][0])

    def negated(self) -> "IncrementDistribution":
        return IncrementDistribution(tuple((tuple(-v for v in s), p) for s, p in self.atoms))


@dataclass(frozen=True)
class WalkModel:
    """Increments, the cone they live in, and the optional decorrelating map.

    When ``transform`` is set the cone is given in transformed coordinates and a
    lattice point ``x`` belongs to it iff ``transform @ x`` does.
    """

    increments: IncrementDistribution
    cone: ConeSpec
    transform: np.ndarray | None = field(default=None, compare=False)
    reversed: bool = False
    name: str = ""

    def __post_init__(self):
        if self.cone.d != self.increments.d:
            raise DimensionMismatch(
                f"cone dimension {self.cone.d} vs increment dimension {self.increments.d}"
            )
        if self.transform is not None:
            M = np.asarray(self.transform, dtype=float)
            if M.shape != (self.d, self.d):
                raise DimensionMismatch(f"transform must be {self.d}x{self.d}")
            object.__setattr__(self, "transform", M)

    @property
    def d(self) -> int:
        return self.increments.d

    @property
    def atoms(self) -> tuple[tuple[tuple[int, ...], Fraction], ...]:
        """Effective atoms: negated when the model is the reversed walk."""
        if self.reversed:
            return self.increments.negated().atoms
        return self.increments.atoms

    @property
    def steps(self) -> np.ndarray:
        return np.array([s for s, _ in self.atoms], dtype=np.int64).reshape(-1, self.d)

    @property
    def probs(self) -> np.ndarray:
        return np.array([float(p) for _, p in self.atoms])

    @property
    def exact_probs(self) -> list[Fraction]:
        return [p for _, p in self.atoms]

    def reverse(self) -> "WalkModel":
        return replace(self, reversed=not self.reversed)

    def geometric(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x if self.transform is None else x @ self.transform.T

    def contains(self, x):
        return geometry.contains(self.cone, self.geometric(x))

    def signed_distance(self, x):
        return geometry.signed_distance(self.cone, self.geometric(x))

    def norm(self, x):
        return np.linalg.norm(self.geometric(x), axis=-1)

    def reduite(self) -> geometry.ReduiteEntry:
        return geometry.composed_reduite(self.cone, self.transform)

    def to_json(self) -> dict:
        doc = {
            "dimension": self.d,
            "atoms": [
                {"step": list(s), "prob": f"{p.numerator}/{p.denominator}"}
                for s, p in self.increments.atoms
            ],
            "cone": self.cone.to_json(),
            "reversed": self.reversed,
        }
        if self.transform is not None:
            doc["transform"] = self.transform.tolist()
        if self.name:
            doc["name"] = self.name
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "WalkModel":
        try:
            atoms_doc = doc["atoms"]
            cone_doc = doc["cone"]
        except KeyError as exc:
            raise ModelError(f"model JSON missing field {exc}") from None
        if not atoms_doc:
            raise EmptySupport("model JSON has an empty atom list")
        pairs = []
        for i, atom in enumerate(atoms_doc):
            if "step" not in atom or "prob" not in atom:
                raise ModelError(f"atom {i}: needs 'step' and 'prob'")
            pairs.append((atom["step"], parse_prob(atom["prob"], i)))
        inc = IncrementDistribution.from_pairs(pairs)
        if "dimension" in doc and int(doc["dimension"]) != inc.d:
            raise DimensionMismatch(f"declared dimension {doc['dimension']} vs atoms of dimension {inc.d}")
        return cls(
            inc,
            ConeSpec.from_json(cone_doc),
            transform=doc.get("transform"),
            reversed=bool(doc.get("reversed", False)),
            name=str(doc.get("name", "")),
        )

    @classmethod
    def load(cls, path: str | Path) -> "WalkModel":
        with open(path, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ModelError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        return cls.from_json(doc)


# ------------------------------------------------------------------ moments


def drift(model: WalkModel) -> tuple[Fraction, ...]:
    return tuple(sum((p * s[i] for s, p in model.atoms), Fraction(0)) for i in range(model.d))


def covariance(model: WalkModel) -> tuple[tuple[Fraction, ...], ...]:
    m = drift(model)
    d = model.d
    return tuple(
        tuple(sum((p * s[i] * s[j] for s, p in model.atoms), Fraction(0)) - m[i] * m[j] for j in range(d))
        for i in range(d)
    )


def moment_threshold(p: float, q: float, d: int) -> float:
    """p + q + d - 2 + (2 - p)^+ : moment order needed by the boundary asymptotics."""
    return p + q + d - 2 + max(2.0 - p, 0.0)


def decorrelate(model: WalkModel) -> WalkModel:
    """Attach ``M = cov^{-1/2}`` (symmetric root) and map the cone by it."""
    cov = np.array(covariance(model), dtype=float)
    w, V = np.linalg.eigh(cov)
    if w.min() <= 1e-14 * max(w.max(), 1e-300):
        raise SingularCovariance(f"covariance eigenvalues {w.tolist()} are not all positive")
    M = (V / np.sqrt(w)) @ V.T
    # the cone in lattice coordinates, then its image under M
    lattice_cone = model.cone if model.transform is None else model.cone.image(np.linalg.inv(model.transform))
    scalar = M[0, 0]
    if np.allclose(M, scalar * np.eye(model.d), rtol=0, atol=1e-12 * abs(scalar)):
        cone = lattice_cone  # cones are invariant under positive dilations
    else:
        cone = lattice_cone.image(M)
    return replace(model, cone=cone, transform=M)


# ------------------------------------------------------------ lattice tools


def hermite_basis(vectors: Sequence[Sequence[int]], d: int) -> list[list[int]]:
    """Row-echelon integer basis of the lattice spanned by ``vectors``."""
    rows = [list(map(int, v)) for v in vectors if any(v)]
    basis: list[list[int]] = []
    col = 0
    while rows and col < d:
        nz = [r for r in rows if r[col] != 0]
        zero = [r for r in rows if r[col] == 0]
        if not nz:
            col += 1
            continue
        # Euclid on column ``col`` until one row carries the gcd
        while len(nz) > 1:
            nz.sort(key=lambda r: abs(r[col]))
            pivot = nz[0]
            rest = []
            for r in nz[1:]:
                q = r[col] // pivot[col]
                r = [a - q * b for a, b in zip(r, pivot)]
                (rest if r[col] != 0 else zero).append(r)
            nz = [pivot] + rest
        pivot = nz[0]
        if pivot[col] < 0:
            pivot = [-a for a in pivot]
        basis.append(pivot)
        rows = [r for r in zero if any(r)]
        col += 1
    return basis


def lattice_index(basis: list[list[int]], d: int) -> int | None:
    """[Z^d : L] for an echelon basis, None when L has rank < d."""
    if len(basis) < d:
        return None
    return abs(math.prod(b[i] for i, b in enumerate(basis)))


# ---------------------------------------------------------------- hypotheses


@dataclass
class HypothesisReport:
    drift: tuple[Fraction, ...]
    covariance: tuple[tuple[Fraction, ...], ...]
    transformed_covariance: list[list[float]] | None
    aperiodic: bool
    aperiodic_witness: dict
    irreducible: bool
    irreducibility_radius: int
    irreducible_witnesses: list[dict]
    p: float | None
    q: float | None
    moment_threshold_r: float | None
    satisfied: dict[str, bool]

    def to_json(self) -> dict:
        frac = lambda v: f"{v.numerator}/{v.denominator}" if v.denominator != 1 else str(v.numerator)
        return {
            "drift": [frac(v) for v in self.drift],
            "covariance": [[frac(v) for v in row] for row in self.covariance],
            "transformed_covariance": self.transformed_covariance,
            "aperiodic": self.aperiodic,
            "aperiodic_witness": self.aperiodic_witness,
            "irreducible": self.irreducible,
            "irreducible_evidence": "sampled",
            "irreducibility_radius": self.irreducibility_radius,
            "irreducible_witnesses": self.irreducible_witnesses,
            "p": self.p,
            "q": self.q,
            "moment_threshold_r": self.moment_threshold_r,
            "satisfied": self.satisfied,
        }


def _aperiodicity(model: WalkModel) -> tuple[bool, dict]:
    # z + A generates Lambda for every z in Lambda  <=>  the differences A - A generate Lambda
    steps = [s for s, _ in model.atoms]
    d = model.d
    gen = hermite_basis(steps, d)
    a0 = steps[0]
    diffs = hermite_basis([[a - b for a, b in zip(s, a0)] for s in steps[1:]], d)
    gen_index = lattice_index(gen, d)
    diff_index = lattice_index(diffs, d)
    aperiodic = gen_index == 1 and diff_index == 1
    return aperiodic, {
        "support_lattice_basis": gen,
        "support_lattice_index": gen_index,
        "difference_lattice_basis": diffs,
        "difference_lattice_index": diff_index,
    }


def irreducibility_path(model: WalkModel, z, R: int) -> list[tuple[int, ...]] | None:
    """BFS inside K ∩ B(z, R) from (z + K) ∩ B(z, R) to z using positive-probability steps."""
    z = tuple(int(v) for v in z)
    d = model.d
    zz = np.array(z)
    offsets = np.array(np.meshgrid(*[np.arange(-R, R + 1)] * d, indexing="ij")).reshape(d, -1).T
    offsets = offsets[np.linalg.norm(offsets, axis=1) <= R]
    pts = zz + offsets
    in_k = model.contains(pts)
    # start set: w - z in the open cone (in lattice coordinates)
    starts = model.contains(offsets) & in_k
    allowed = {tuple(p) for p, ok in zip(pts.tolist(), in_k) if ok}
    parent: dict[tuple[int, ...], tuple[int, ...] | None] = {}
    queue = deque()
    for p, ok in zip(pts.tolist(), starts):
        if ok:
            parent[tuple(p)] = None
            queue.append(tuple(p))
    steps = [s for s, _ in model.atoms]
    while queue:
        cur = queue.popleft()
        for s in steps:
            nxt = tuple(a + b for a, b in zip(cur, s))
            if nxt not in allowed or nxt in parent:
                continue
            parent[nxt] = cur
            if nxt == z:
                path = [nxt]
                while parent[path[-1]] is not None:
                    path.append(parent[path[-1]])
                return path[::-1]
            queue.append(nxt)
    return None


def validate_hypotheses(
    model: WalkModel, irreducibility_radius: int = 3, sample_points: Sequence[Sequence[int]] = ()
) -> HypothesisReport:
    R = int(irreducibility_radius)
    if R < 1:
        raise ModelError("irreducibility radius must be a positive integer")
    for z in sample_points:
        if len(z) != model.d:
            raise DimensionMismatch(f"sample point {list(z)} has wrong dimension")
        if not model.contains(z):
            raise ModelError(f"sample point {list(z)} is not in the cone")
        if float(np.linalg.norm(np.asarray(z, dtype=float))) < R:
            raise SampleTooClose(f"sample point {list(z)} has norm < R = {R}")

    m = drift(model)
    cov = covariance(model)
    tcov = None
    if model.transform is None:
        h2 = all(cov[i][j] == (1 if i == j else 0) for i in range(model.d) for j in range(model.d))
    else:
        M = model.transform
        tc = M @ np.array(cov, dtype=float) @ M.T
        tcov = tc.tolist()
        h2 = bool(np.all(np.abs(tc - np.eye(model.d)) <= 1e-12))
    aperiodic, ap_witness = _aperiodicity(model)

    witnesses = []
    irreducible = True
    for z in sample_points:
        path = irreducibility_path(model, z, R)
        witnesses.append({"z": list(map(int, z)), "path": None if path is None else [list(p) for p in path]})
        irreducible &= path is not None

    try:
        p = model.reduite().p
        lattice_cone = model.cone
        q = geometry.sup_tangent_exponent(lattice_cone)
        r = moment_threshold(p, q, model.d)
    except geometry.NotCatalogued:
        p = q = r = None

    satisfied = {
        "H1": all(v == 0 for v in m),
        "H2": h2,
        "H3": aperiodic,
        "H4": True,  # every representable cone is convex
        "H5": irreducible if sample_points else False,
        "M1": True,  # finite support: all moments exist
    }
    return HypothesisReport(m, cov, tcov, aperiodic, ap_witness, irreducible, R, witnesses, p, q, r, satisfied)
