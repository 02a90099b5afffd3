import csv
import io
import math

import numpy as np
import pytest

from conewalk import asymptotics as A
from conewalk.errors import PathLeavesRegime, TooFewPoints, WrongConeVariant, ZeroDenominator
from conewalk.geometry import halfspace
from conewalk.model import IncrementDistribution, WalkModel


def test_fit_plateau_power_correction():
    s = np.geomspace(10, 1e5, 24)
    limit, rate, spread = A.fit_plateau(s, 3.0 + 5.0 / s, k_last=4)
    assert limit == pytest.approx(3.0 + 5.0 * np.mean(1 / s[-4:]))
    assert rate == pytest.approx(-1.0, abs=0.15)


def test_fit_plateau_constant():
    limit, rate, spread = A.fit_plateau([1, 2, 3, 4, 5, 6], [2.0] * 6)
    assert (limit, rate, spread) == (2.0, 0.0, 0.0)


def test_fit_plateau_growing_series():
    s = np.geomspace(10, 1e4, 12)
    _, _, spread = A.fit_plateau(s, 2.0 * s**0.1)
    _, _, spread_long = A.fit_plateau(np.geomspace(10, 1e8, 12), 2.0 * np.geomspace(10, 1e8, 12) ** 0.1)
    assert spread > 0.1 and spread_long > spread


def test_fit_plateau_too_few():
    with pytest.raises(TooFewPoints):
        A.fit_plateau([1, 2, 3, 4, 5], [1, 1, 1, 1, 1], k_last=4)


def test_interior_halfline(halfline):
    s = A.verify_interior(halfline, (1,), (1,), range(10, 51, 5), horizon=20_000)
    assert s.fitted_limit == pytest.approx(2.0, rel=1e-3)
    assert s.plateau(0.01)


def test_normalization_invariance(halfline):
    u = halfline.reduite()
    a = A.verify_interior(halfline, (1,), (1,), range(5, 31, 5), horizon=5000, u=u, V=1.0)
    b = A.verify_interior(halfline, (1,), (1,), range(5, 31, 5), horizon=5000, u=lambda y: 2 * u(y), V=1.0)
    assert np.allclose(np.array(b.ratios) * 2, a.ratios, rtol=1e-12)
    assert b.fitted_limit == pytest.approx(a.fitted_limit / 2)
    assert b.plateau_spread == pytest.approx(a.plateau_spread)
    assert b.fitted_rate == pytest.approx(a.fitted_rate)
    r = a.rescaled(0.5)
    assert r.plateau_spread == pytest.approx(a.plateau_spread) and r.fitted_limit == pytest.approx(b.fitted_limit)


def test_alpha_condition(quadrant):
    with pytest.raises(PathLeavesRegime):
        A.verify_interior(quadrant, (1, 1), (1, 0.05), [10, 20, 30, 40, 50, 60], alpha=0.2, horizon=10)


def test_lattice_path_offset(quadrant):
    pts, moved = A.lattice_path(quadrant, (1, 0), [3, 4])
    assert pts == [(4, 1), (5, 1)] and moved == [True, True]
    assert A.interior_offset(WalkModel(quadrant.increments, halfspace([0, 1]))) == (0, 1)


def test_halfspace_harness_halfline(halfline):
    s = A.verify_halfspace(halfline, (1,), range(10, 51, 5), horizon=20_000)
    assert s.fitted_limit == pytest.approx(2.0, rel=1e-3)


def test_halfspace_requires_halfspace(quadrant):
    with pytest.raises(WrongConeVariant):
        A.verify_halfspace(quadrant, (1, 1), range(6))


def test_halfspace_vprime_symmetric(halfplane):
    kw = dict(horizon=1500, height=lambda k: 2)
    a = A.verify_halfspace(halfplane, (0, 1), range(4, 16, 2), **kw)
    b = A.verify_halfspace(halfplane, (0, 1), range(4, 16, 2), V_prime=halfplane.reduite(), **kw)
    assert np.allclose(a.ratios, b.ratios, rtol=1e-9)


def test_boundary_vs_halfspace_on_halfplane(halfplane):
    scales = range(4, 16, 2)
    h = A.verify_halfspace(halfplane, (0, 1), scales, horizon=2000, height=lambda k: 1)
    b = A.verify_boundary(halfplane, (0, 1), (1, 0), scales, offset=(0, 1), horizon=2000)
    assert b.meta["exponent"] == 2
    assert np.allclose(h.ratios, b.ratios, rtol=0.05)


def test_boundary_profile_linear(halfplane):
    prof = A.boundary_profile(halfplane, (0, 1), (24, 0), axis=1, dists=range(1, 11), horizon=4000)
    assert prof["r2"] > 0.99


def test_martin_trivial_and_halfline(halfline):
    s = A.martin_kernel(halfline, (2,), (2,), [(y,) for y in range(5, 35, 5)], horizon=500)
    assert all(r == 1.0 for r in s.ratios)
    s = A.martin_kernel(halfline, (3,), (1,), [(y,) for y in range(10, 51, 5)], horizon=50_000)
    assert s.fitted_limit == pytest.approx(3.0, rel=1e-3) and s.meta["V_ratio"] == pytest.approx(3.0)


def test_martin_zero_denominator():
    inc = IncrementDistribution.from_pairs([((2,), "1/2"), ((-2,), "1/2")])
    m = WalkModel(inc, halfspace([1]))
    with pytest.raises(ZeroDenominator):
        A.martin_kernel(m, (2,), (1,), [(4,), (6,), (8,), (10,), (12,), (14,)], horizon=100)


def test_csv_and_json(halfline):
    s = A.verify_interior(halfline, (1,), (1,), range(5, 31, 5), horizon=3000)
    text = s.to_csv()
    assert text.startswith("# cone-walk v1\n")
    rows = list(csv.reader(io.StringIO(text.split("\n", 1)[1])))
    assert rows[0][:3] == ["scale", "ratio", "y0"] and len(rows) == 7
    assert float(rows[1][1]) == s.ratios[0]
    doc = s.to_json(0.1)
    assert doc["verdict"] == "plateau" and doc["exponent"] == 1.0


def test_survival_helpers(halfline):
    fit = A.survival_exponent(halfline, (1,), 100, 2000)
    assert fit["slope"] == pytest.approx(-0.5, abs=0.01)
    r = A.survival_ratio(fit["curve"], 0.5, 100, 2000)
    assert r.min() > 0 and (r.max() - r.min()) / r.mean() < 0.01
