"""Monte Carlo oracle for exit statistics and visit-count Green estimates.

Independent of the dynamic-programming engine: paths are simulated directly
with numpy generators.  Samples are split into fixed-size blocks and each block
draws from its own child of ``SeedSequence(seed)``, so results depend only on
the seed, never on the number of worker threads.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .model import WalkModel

BLOCK = 8192


@dataclass
class McEstimate:
    mean: float
    std_error: float
    n_samples: int
    rng_seed: int
    horizon: int | None = None

    def to_json(self) -> dict:
        return asdict(self)

    def agrees(self, reference: float, n_se: float = 4.0) -> bool:
        """|mean - reference| <= n_se standard errors (exact match when se = 0)."""
        return abs(self.mean - reference) <= n_se * self.std_error + 1e-15


def _blocks(samples: int) -> list[int]:
    full, rest = divmod(samples, BLOCK)
    return [BLOCK] * full + ([rest] if rest else [])


def _generators(seed: int, n_blocks: int) -> list[np.random.Generator]:
    children = np.random.SeedSequence(int(seed)).spawn(n_blocks)
    return [np.random.Generator(np.random.PCG64(c)) for c in children]


class _Walker:
    def __init__(self, model: WalkModel):
        self.model = model
        self.steps = model.steps
        cdf = np.cumsum(model.probs)
        cdf[-1] = 1.0
        self.cdf = cdf

    def draw(self, rng: np.random.Generator, k: int) -> np.ndarray:
        idx = np.searchsorted(self.cdf, rng.random(k), side="right")
        return self.steps[np.minimum(idx, len(self.cdf) - 1)]


def _survive_block(walker: _Walker, x: np.ndarray, n: int, k: int, rng) -> int:
    pos = np.repeat(x[None, :], k, axis=0)
    for _ in range(n):
        if not len(pos):
            break
        pos = pos + walker.draw(rng, len(pos))
        pos = pos[walker.model.contains(pos)]
    return len(pos)


def _visits_block(walker: _Walker, x: np.ndarray, y: np.ndarray, horizon: int, k: int, rng) -> np.ndarray:
    counts = np.zeros(k, dtype=np.int64)
    ids = np.arange(k)
    pos = np.repeat(x[None, :], k, axis=0)
    for n in range(horizon):
        if n:
            pos = pos + walker.draw(rng, len(pos))
            alive = walker.model.contains(pos)
            pos, ids = pos[alive], ids[alive]
            if not len(pos):
                break
        np.add.at(counts, ids[np.all(pos == y, axis=1)], 1)
    return counts


def _map(fn, args: list, threads: int) -> list:
    if threads <= 1 or len(args) <= 1:
        return [fn(*a) for a in args]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda a: fn(*a), args))


def mc_survival(model: WalkModel, x, n: int, samples: int, seed: int = 0, threads: int = 1) -> McEstimate:
    """Fraction of sampled paths with x + S(1..n) all inside the cone."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    x = np.array(x, dtype=np.int64).reshape(model.d)
    sizes = _blocks(samples)
    walker = _Walker(model)
    args = [(walker, x, int(n), k, g) for k, g in zip(sizes, _generators(seed, len(sizes)))]
    alive = sum(_map(_survive_block, args, threads))
    p = alive / samples
    return McEstimate(p, math.sqrt(p * (1.0 - p) / samples), samples, int(seed), int(n))


def mc_green(
    model: WalkModel, x, y, horizon: int, samples: int, seed: int = 0, threads: int = 1
) -> McEstimate:
    """Mean number of visits to ``y`` at times 0 <= n < horizon before exit."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    x = np.array(x, dtype=np.int64).reshape(model.d)
    y = np.array(y, dtype=np.int64).reshape(model.d)
    if not model.contains(y):
        return McEstimate(0.0, 0.0, samples, int(seed), int(horizon))
    sizes = _blocks(samples)
    walker = _Walker(model)
    args = [(walker, x, y, int(horizon), k, g) for k, g in zip(sizes, _generators(seed, len(sizes)))]
    counts = np.concatenate(_map(_visits_block, args, threads)).astype(float)
    mean = float(counts.mean())
    se = float(counts.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    return McEstimate(mean, se, samples, int(seed), int(horizon))
