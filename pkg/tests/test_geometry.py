import math

import numpy as np
import pytest

from conewalk import geometry as G
from conewalk.errors import GeometryError, NotCatalogued, NotOnBoundary, OutsideCone


def test_membership_open():
    q = G.orthant(2)
    assert q.contains((1, 1)) and not q.contains((0, 3)) and not q.contains((-1, 2))
    assert list(q.contains(np.array([[1, 1], [0, 1], [2, 5]]))) == [True, False, True]
    h = G.halfspace([0, 1])
    assert h.contains((-100, 1)) and not h.contains((5, 0))


def test_wedge_membership_and_convexity():
    w = G.wedge2d(3 * math.pi / 4)
    assert w.contains((1, 1)) and w.contains((-1, 2)) and not w.contains((-2, 1)) and not w.contains((1, -1))
    with pytest.raises(GeometryError):
        G.wedge2d(3 * math.pi / 2)


def test_polyhedral_needs_interior():
    with pytest.raises(GeometryError):
        G.polyhedral([[1, 0], [-1, 0]])


def test_distance():
    q = G.orthant(2)
    assert G.dist_boundary(q, (3, 7)) == pytest.approx(3)
    with pytest.raises(OutsideCone):
        G.dist_boundary(q, (0, 7))
    assert G.in_K_rho(q, (16, 16), R=1, rho=0.5)  # 16 >= sqrt(|y|) ~ 4.76
    assert not G.in_K_rho(q, (100, 1), R=1, rho=0.25)


def test_reduite_catalog():
    assert G.reduite(G.halfspace([0, 2])).p == 1
    h = G.reduite(G.halfspace([0, 2]))
    assert h((5, 3)) == pytest.approx(3)
    o = G.reduite(G.orthant(3))
    assert o.p == 3 and o((2, 3, 4)) == 24
    w = G.reduite(G.wedge2d(math.pi / 2))
    assert w.p == pytest.approx(2)
    # a right-angle wedge is an orthant in disguise: u = x y
    assert w((2.0, 3.0)) == pytest.approx(6.0)
    w3 = G.reduite(G.wedge2d(math.pi / 3))
    assert w3.p == pytest.approx(3)


def test_reduite_vanishes_on_boundary_and_is_harmonic():
    for beta in (math.pi / 3, math.pi / 2, 2.5):
        cone = G.wedge2d(beta)
        u = G.reduite(cone)
        assert u((5.0, 0.0)) == pytest.approx(0, abs=1e-12)
        edge = (5 * math.cos(beta), 5 * math.sin(beta))
        assert u(edge) == pytest.approx(0, abs=1e-9)
        x, h = np.array([2.0 * math.cos(beta / 2), 2.0 * math.sin(beta / 2)]), 1e-3
        lap = sum(u(x + h * e) + u(x - h * e) - 2 * u(x) for e in np.eye(2)) / h**2
        assert abs(lap) < 1e-4 * u(x)
        # homogeneity of degree p
        assert u(3 * x) == pytest.approx(3**u.p * u(x))


def test_not_catalogued():
    cone = G.polyhedral([[1, 0, 0], [0, 1, 0], [1, 1, 1]])
    with pytest.raises(NotCatalogued):
        G.reduite(cone)


def test_tangent_cones():
    q = G.orthant(2)
    assert G.tangent_cone(q, (1, 0)).q == 1
    with pytest.raises(NotOnBoundary):
        G.tangent_cone(q, (math.sqrt(0.5), math.sqrt(0.5)))
    with pytest.raises(NotOnBoundary):
        G.tangent_cone(q, (1, 1))
    o3 = G.orthant(3)
    assert G.tangent_cone(o3, (1, 0, 0)).q == 2
    assert G.sup_tangent_exponent(o3) == 2
    assert G.sup_tangent_exponent(q) == 1
    assert G.sup_tangent_exponent(G.halfspace([1])) == 1


def test_json_roundtrip():
    for cone in (G.orthant(3), G.halfspace([0, 1]), G.wedge2d(1.0), G.polyhedral([[1, 0], [1, 1]])):
        assert G.ConeSpec.from_json(cone.to_json()) == cone
    with pytest.raises(GeometryError):
        G.ConeSpec.from_json({"variant": "sphere"})
