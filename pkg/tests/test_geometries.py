import numpy as np
import pytest

from carre.fields import bracket, hormander_depth
from carre.geometries import GeometryError, GeometrySpec, by_name, make
from carre.sampling import random_pairs, sobol_points
from carre.triple import operator_L, validate_axioms


def test_heisenberg_divergence_free():
    H = by_name("heisenberg")
    pts = sobol_points([(-2, 2)] * 3, 20)
    for j in (1, 2):
        np.testing.assert_array_equal(H.divergence(j)(pts), 0.0)
    assert hormander_depth(H.frame, pts).depth == 2
    assert H.carnot and "convention" in H.meta


def test_engel_brackets():
    E = by_name("engel")
    Z1, Z2 = E.frame
    pts = sobol_points([(-1, 1)] * 4, 30, seed=1)
    Z3 = bracket(Z1, Z2)
    np.testing.assert_allclose(Z3.values(pts), np.stack([0 * pts[:, 0], 0 * pts[:, 0], 1 + 0 * pts[:, 0], pts[:, 0]], 1),
                               atol=1e-14)
    np.testing.assert_allclose(bracket(Z1, Z3).values(pts), np.tile([0, 0, 0, 1.0], (30, 1)), atol=1e-14)
    np.testing.assert_allclose(bracket(Z2, Z3).values(pts), 0.0, atol=1e-14)


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_filiform_bracket_relations(n):
    T = by_name("filiform", dimension=n)
    Z = {1: T.frame[0], 2: T.frame[1]}
    for i in range(2, n):
        Z[i + 1] = bracket(Z[i], Z[1])
    pts = sobol_points([(-1, 1)] * n, 12, seed=n)
    # Z_i is triangular: leading coefficient (-1)^i in slot i, nothing before it
    for i in range(3, n + 1):
        v = Z[i].values(pts)
        np.testing.assert_allclose(v[:, i - 1], (-1.0) ** i, atol=1e-14)
        np.testing.assert_allclose(v[:, :i - 1], 0.0, atol=1e-14)
    for i in range(2, n + 1):
        for k in range(i + 1, n + 1):
            np.testing.assert_allclose(bracket(Z[i], Z[k]).values(pts), 0.0, atol=1e-12)
    assert hormander_depth(T.frame, pts).depth == n - 1


def test_grushin():
    G = by_name("grushin", alpha=2)
    pts = sobol_points([(-1, 1)] * 2, 20)
    np.testing.assert_allclose(bracket(*G.frame).values(pts)[:, 1], 2 * pts[:, 0], atol=1e-14)
    with pytest.raises(GeometryError):
        by_name("grushin", alpha=1.5)
    with pytest.raises(GeometryError):
        by_name("grushin", alpha=0)


def test_weighted_euclidean_is_laplacian_plus_drift():
    T = by_name("euclidean-weighted", dimension=2, eta="x1 - 2*x2")
    x = np.array([0.3, 0.9])
    # L f = Lap f + grad eta . grad f with f = x1^2 + x1*x2
    assert operator_L(T, "x1^2 + x1*x2", x) == pytest.approx(2 + (2 * 0.3 + 0.9) - 2 * 0.3, abs=1e-13)


@pytest.mark.parametrize("spec, msg", [
    (GeometrySpec("sphere"), "unknown"),
    (GeometrySpec("filiform", 1), "n >= 2"),
    (GeometrySpec("heisenberg", 4), "3-dimensional"),
    (GeometrySpec("custom"), "frame"),
    (GeometrySpec("custom", 2, frame=(("1",),)), "coefficients"),
])
def test_invalid_specs(spec, msg):
    with pytest.raises(GeometryError, match=msg):
        make(spec)


def test_custom_frame():
    T = make(GeometrySpec("custom", 2, frame=(("1", "0"), ("0", "x1^2"))))
    G = by_name("grushin", alpha=2)
    pts = sobol_points([(-1, 1)] * 2, 10)
    np.testing.assert_allclose(operator_L(T, "x1^2*x2^2", pts), operator_L(G, "x1^2*x2^2", pts), atol=1e-13)


@pytest.mark.parametrize("kind, params", [("euclidean-weighted", {"dimension": 2}),
                                          ("ornstein-uhlenbeck", {"dimension": 2}),
                                          ("heisenberg", {}), ("engel", {}), ("filiform", {"dimension": 5}),
                                          ("grushin", {"alpha": 1}), ("grushin", {"alpha": 2})])
def test_builtins_pass_axioms(kind, params):
    T = by_name(kind, **params)
    rep = validate_axioms(T, random_pairs(T.dimension, 4, seed=3), sobol_points([(-1, 1)] * T.dimension, 48), 1e-7)
    assert rep.passed, [(e.name, e.max_residual) for e in rep.entries if not e.passed]
