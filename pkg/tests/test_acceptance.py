"""Acceptance criteria 1-11, each at its stated tolerance and runtime budget.

Every test prints one ``CRITERION k: PASS|FAIL`` line; the lines are repeated
in the terminal summary (see conftest.py).
"""
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from conewalk import asymptotics as A
from conewalk import catalog, harmonic
from conewalk import kernel as K
from conewalk import sampler as S

from conftest import enumerate_paths

RESULTS: list[str] = []
CORPUS = ["srw-halfline", "srw-quadrant", "srw-halfplane", "asym-halfline"]


def report(k: int, ok: bool, seconds: float, limit: float, detail: str) -> None:
    ok = ok and seconds < limit
    line = f"CRITERION {k:>2}: {'PASS' if ok else 'FAIL'}  ({seconds:.1f}s / {limit:.0f}s)  {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0


def test_c01_oracle_equivalence():
    with Timer() as t:
        bad = []
        for name in CORPUS:
            model = catalog.CORPUS[name]()
            starts = [(1,), (2,)] if model.d == 1 else [(1, 1), (2, 1)]
            for x in starts:
                for n, table in enumerate(K.evolve(model, x, 6, exact=True)):
                    ref, killed = enumerate_paths(model, x, n)
                    if table.to_dict() != ref or table.killed_mass != killed:
                        bad.append((name, x, n))
    report(1, not bad, t.seconds, 10, f"exact slices == enumeration for n<=6; mismatches={bad}")


def test_c02_conservation():
    with Timer() as t:
        worst = {}
        for name in CORPUS:
            model = catalog.CORPUS[name]()
            rec = K.run(model, (1,) * model.d, 10_000, window=K.WindowPolicy.trimmed())
            dev = np.abs(rec.totals + rec.killed - 1.0)
            worst[name] = (float(dev.max()), rec.final.clipped_mass)
    ok = all(d <= 1e-12 for d, _ in worst.values())
    detail = ", ".join(f"{k}: max|stored+killed-1|={d:.1e} (clipped {c:.1e})" for k, (d, c) in worst.items())
    report(2, ok, t.seconds, 60, detail)


def test_c03_time_reversal():
    rng = np.random.Generator(np.random.PCG64(2024))
    with Timer() as t:
        worst = 0.0
        for name in CORPUS:
            model = catalog.CORPUS[name]()
            for _ in range(200):
                while True:
                    x = tuple(int(v) for v in rng.integers(1, 9, model.d))
                    y = tuple(int(v) for v in rng.integers(1, 9, model.d))
                    if model.d == 2 and name == "srw-halfplane":
                        x = (x[0] - 4, x[1])
                        y = (y[0] - 4, y[1])
                    if model.contains(x) and model.contains(y):
                        break
                n = int(rng.integers(1, 25))
                a, b = K.time_reversal_check(model, x, y, n)
                worst = max(worst, abs(a - b))
    report(3, worst <= 1e-12, t.seconds, 60, f"800 triples, max |P(x->y) - P'(y->x)| = {worst:.2e}")


def test_c04_closed_form_green():
    model = catalog.srw_halfline()
    ys = [(y,) for y in range(1, 51)]
    with Timer() as t:
        ref = K.green_many(model, (1,), ys, 1_000_000)
        ref_err = max(abs(r.value - 2.0) / 2.0 for r in ref)
        res = K.green_many(model, (1,), ys, 100_000)
        err = max(abs(r.value - 2.0 * min(1, y[0])) / (2.0 * min(1, y[0])) for r, y in zip(res, ys))
    ok = ref_err < 1e-4 and err < 5e-3
    report(4, ok, t.seconds, 120, f"reference check at 1e6: max rel err {ref_err:.1e}; horizon 1e5: {err:.1e} (< 5e-3)")


def test_c05_harmonicity():
    model = catalog.srw_quadrant()
    u = model.reduite()
    with Timer() as t:
        nonzero = [
            (a, b) for a in range(1, 51) for b in range(1, 51) if harmonic.harmonic_residual(model, u, (a, b)) != 0
        ]
        x0 = (1, 1)
        v0 = harmonic.estimate_V(model, x0).limit
        worst = 0.0
        for x in [(2, 3), (3, 3), (5, 2), (4, 7), (10, 10), (12, 3)]:
            v = harmonic.estimate_V(model, x).limit
            worst = max(worst, abs((v / v0) / (x[0] * x[1]) - 1.0))
    report(5, not nonzero and worst < 0.01, t.seconds, 60,
           f"nonzero residuals in 50x50: {len(nonzero)}; max rel dev of V ratios from x1x2: {worst:.1e}")


def test_c06_interior_plateau():
    model = catalog.srw_quadrant()
    with Timer() as t:
        s = A.verify_interior(model, (1, 1), (1, 1), range(10, 41, 5), alpha=0.5, horizon=10_000)
    report(6, s.plateau(0.10), t.seconds, 300,
           f"G|y|^4/(V u) limit {s.fitted_limit:.4f}, spread {s.plateau_spread:.2e} (< 0.10)")


def test_c07_halfspace_plateau():
    model = catalog.srw_halfplane()
    with Timer() as t:
        s = A.verify_halfspace(model, (0, 1), range(16, 65, 8), horizon=20_000)
    report(7, s.plateau(0.15), t.seconds, 300,
           f"G|y|^2/(V V') limit {s.fitted_limit:.4f}, spread {s.plateau_spread:.2e} (< 0.15)")


@pytest.fixture(scope="module")
def boundary_series():
    model = catalog.srw_quadrant()
    t0 = time.perf_counter()
    s = A.verify_boundary(model, (1, 1), (1, 0), range(8, 49, 8), R=1.0, rho=0.25, offset=(0, 1), horizon=10_000)
    return s, time.perf_counter() - t0


def test_c08_boundary_plateau(boundary_series):
    s, seconds = boundary_series
    worst_unstopped = max(s.aux["unstopped_share"])
    ok = s.plateau(0.20) and worst_unstopped < 0.05
    ratios = ", ".join(f"{r:.3f}" for r in s.ratios)
    report(8, ok, seconds, 600,
           f"G|y|^3/(V E[u(y_rho)]) = [{ratios}], spread {s.plateau_spread:.2f} (< 0.20), "
           f"max unstopped share {worst_unstopped:.1e}")


def test_c08_diagnostic_exponent_2p_plus_d_minus_2(boundary_series):
    """Same Green values and stopped functionals, normalized by |y|^(2p+d-2) = |y|^4 instead."""
    s, _ = boundary_series
    alt = A.RatioSeries.build(s.scales, [r * n for r, n in zip(s.ratios, s.scales)], s.k_last)
    print(f"diagnostic: |y|^4 normalization limit {alt.fitted_limit:.4f}, spread {alt.plateau_spread:.2e}")
    assert alt.plateau(0.20)


def test_c09_martin_limit():
    q = catalog.srw_quadrant()
    h = catalog.srw_halfline()
    with Timer() as t:
        sq = A.martin_kernel(q, (2, 3), (1, 1), [(k, k) for k in range(10, 41, 5)], horizon=10_000)
        sh = A.martin_kernel(h, (3,), (1,), [(y,) for y in range(10, 51, 5)], horizon=100_000)
    eq = abs(sq.ratios[-1] / 6.0 - 1.0)
    eh = abs(sh.ratios[-1] / 3.0 - 1.0)
    report(9, eq < 0.02 and eh < 0.01, t.seconds, 300,
           f"quadrant ratio at (40,40) {sq.ratios[-1]:.4f} (rel err {eq:.1e}); half-line at 50 {sh.ratios[-1]:.5f} ({eh:.1e})")


def test_c10_survival_exponents():
    with Timer() as t:
        out = {}
        for name, target in (("srw-halfline", -0.5), ("srw-quadrant", -1.0)):
            model = catalog.CORPUS[name]()
            fit = A.survival_exponent(model, (1,) * model.d, 1_000, 10_000)
            q = model.reduite().p
            lower = A.survival_ratio(fit["curve"], q / 2, 1_000, 10_000)
            out[name] = (fit["slope"], target, float(lower.min()), float(lower.max()))
    ok = all(abs(s / tg - 1) < 0.05 and lo > 0 and lo > 0.5 * hi for s, tg, lo, hi in out.values())
    detail = "; ".join(f"{k}: slope {s:.4f} vs {tg}, n^(q/2)P in [{lo:.4f}, {hi:.4f}]" for k, (s, tg, lo, hi) in out.items())
    report(10, ok, t.seconds, 300, detail)


def _mc_queries():
    qs = []
    for name in CORPUS:
        model = catalog.CORPUS[name]()
        x = (1,) * model.d
        far = (3,) * model.d if model.d == 1 else (2, 3)
        qs += [
            ("survival", model, x, 1),
            ("survival", model, x, 10),
            ("survival", model, far, 100),
            ("green", model, x, far, 500),
            ("green", model, far, far, 2000),
        ]
    return qs


def test_c11_monte_carlo_agreement():
    with Timer() as t:
        rows = []
        for i, q in enumerate(_mc_queries()):
            if q[0] == "survival":
                _, model, x, n = q
                est = S.mc_survival(model, x, n, 100_000, seed=1000 + i)
                ref = float(K.survival(model, x, n))
            else:
                _, model, x, y, horizon = q
                est = S.mc_green(model, x, y, horizon, 100_000, seed=1000 + i)
                ref = float(K.green(model, x, y, horizon, tail=False).truncated_sum)
            z = abs(est.mean - ref) / est.std_error if est.std_error > 0 else (0.0 if est.mean == ref else math.inf)
            rows.append((q[0], model.name, z))
    worst = max(rows, key=lambda r: r[2])
    report(11, len(rows) == 20 and all(z <= 4 for *_, z in rows), t.seconds, 300,
           f"{len(rows)} queries at 1e5 samples; worst |z| = {worst[2]:.2f} ({worst[0]} on {worst[1]})")
