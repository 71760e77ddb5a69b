import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from carre.geometries import by_name
from carre.sampling import random_pairs, random_polynomial_text, sobol_points
from carre.smooth import as_function
from carre.triple import (GeneralOperator, MarkovTriple, gamma, gamma2, gamma_from_L, gamma_sqrt_reg,
                          operator_L, validate_axioms)

from conftest import fd_grad, scalar


def _frame_matrix(T, x):
    return np.stack([Z.values(x) for Z in T.frame])  # (m, n)


def fd_gamma(T, f, g, x):
    Zm = _frame_matrix(T, x)
    return float((Zm @ fd_grad(f, x)) @ (Zm @ fd_grad(g, x)))


def fd_L(T, f, x, eta=None, h=1e-3):
    """Divergence form e^-eta div(e^eta A grad f), A = sum_j Z_j Z_j^T."""
    w = (lambda p: np.exp(eta(p))) if eta else (lambda p: np.ones(len(np.atleast_2d(p))))

    def flux(p):
        Zm = _frame_matrix(T, p)
        return w(p)[0] * (Zm.T @ (Zm @ fd_grad(f, p, 1e-4)))

    n = len(x)
    div = 0.0
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        div += (flux(x + e)[i] - flux(x - e)[i]) / (2 * h)
    return div / w(x)[0]


def test_heisenberg_gamma_example():
    H = by_name("heisenberg")
    assert gamma(H, "x1^2 + x2^2", "x1^2 + x2^2", [1.0, 1.0, 0.0]) == pytest.approx(8.0, abs=1e-13)


def test_gamma_matches_fd_on_heisenberg():
    H = by_name("heisenberg")
    rng = np.random.default_rng(5)
    for _ in range(10):
        f, g = random_polynomial_text(3, rng), random_polynomial_text(3, rng)
        x = rng.uniform(-1, 1, 3)
        assert gamma(H, f, g, x) == pytest.approx(fd_gamma(H, scalar(f, 3), scalar(g, 3), x), rel=1e-6, abs=1e-7)


@pytest.mark.parametrize("kind, params", [("heisenberg", {}), ("engel", {}), ("grushin", {"alpha": 2}),
                                          ("ornstein-uhlenbeck", {"dimension": 2})])
def test_L_matches_divergence_form_fd(kind, params):
    T = by_name(kind, **params)
    n = T.dimension
    eta = scalar("-(x1^2 + x2^2)/2", 2) if kind == "ornstein-uhlenbeck" else None
    rng = np.random.default_rng(11)
    for _ in range(5):
        f = random_polynomial_text(n, rng)
        x = rng.uniform(-1, 1, n)
        got = operator_L(T, f, x)
        assert got == pytest.approx(fd_L(T, scalar(f, n), x, eta), rel=1e-5, abs=1e-5)


def test_L_examples():
    E = by_name("euclidean-weighted", dimension=2)
    pts = sobol_points([(-3, 3)] * 2, 16)
    np.testing.assert_allclose(operator_L(E, "x1^2 + x2^2", pts), 4.0, atol=1e-13)
    OU = by_name("ornstein-uhlenbeck", dimension=2)
    assert operator_L(OU, "x1", [0.7, -0.3]) == pytest.approx(-0.7, abs=1e-15)
    for T in (E, OU, by_name("heisenberg"), by_name("grushin", alpha=1)):
        x = np.full(T.dimension, 0.3)
        assert operator_L(T, "1", x) == 0.0
        assert gamma(T, "1", "x1*x2", x) == 0.0


def test_gamma2_examples():
    E = by_name("euclidean-weighted", dimension=2)
    OU = by_name("ornstein-uhlenbeck", dimension=2)
    assert gamma2(E, "x1*x2", "x1*x2", [0.4, -1.3]) == pytest.approx(2.0, abs=1e-12)
    assert gamma2(OU, "x1*x2", "x1*x2", [0.5, -1.0]) == pytest.approx(3.25, abs=1e-12)
    assert gamma2(by_name("heisenberg"), "7", "x1", [0.1, 0.2, 0.3]) == 0.0


def test_gamma2_flat_equals_hessian_norm_fd():
    E = by_name("euclidean-weighted", dimension=2)
    rng = np.random.default_rng(13)
    from conftest import fd_derivative
    for _ in range(5):
        f = random_polynomial_text(2, rng)
        x = rng.uniform(-1, 1, 2)
        fs = scalar(f, 2)
        hess = [fd_derivative(fs, x, a, 1e-3) for a in [(2, 0), (1, 1), (0, 2)]]
        want = hess[0] ** 2 + 2 * hess[1] ** 2 + hess[2] ** 2
        assert gamma2(E, f, f, x) == pytest.approx(want, rel=1e-5, abs=1e-6)


def test_gamma_of_squares():
    H = by_name("heisenberg")
    rng = np.random.default_rng(17)
    pts = rng.uniform(-1, 1, (50, 3))
    f, g = random_polynomial_text(3, rng), random_polynomial_text(3, rng)
    lhs = gamma(H, f"({f})^2", f"({g})^2", pts)
    rhs = 4 * as_function(f, 3)(pts) * as_function(g, 3)(pts) * gamma(H, f, g, pts)
    np.testing.assert_allclose(lhs, rhs, atol=1e-9 * (1 + np.abs(rhs).max()))


def test_counterexample_operators():
    D = GeneralOperator.dalembert()
    assert gamma_from_L(D, "x2", "x2", [0.3, 0.8]) == pytest.approx(-1.0, abs=1e-14)
    rng = np.random.default_rng(19)
    pts = rng.uniform(-1, 1, (20, 2))
    f = random_polynomial_text(2, rng)
    fs = scalar(f, 2)
    want = np.array([fd_grad(fs, p) @ np.array([[1, 0], [0, -1]]) @ fd_grad(fs, p) for p in pts])
    np.testing.assert_allclose(gamma_from_L(D, f, f, pts), want, rtol=1e-6, atol=1e-8)
    d1 = GeneralOperator.derivative()
    for src in ["x1^3", "sin(x1)", "exp(2*x1)"]:
        assert abs(gamma_from_L(d1, src, src, [0.4])) <= 1e-12


def test_divergence_and_nondivergence_share_gamma():
    a = [["2 + sin(x1*x2)", "x1/3"], ["x1/3", "1 + x2^2"]]
    LD, LN = GeneralOperator.divergence(a), GeneralOperator.nondivergence(a)
    rng = np.random.default_rng(23)
    pts = rng.uniform(-1, 1, (30, 2))
    f, g = random_polynomial_text(2, rng), random_polynomial_text(2, rng)
    np.testing.assert_allclose(gamma_from_L(LD, f, g, pts), gamma_from_L(LN, f, g, pts), atol=1e-10)
    # they differ as operators
    assert np.abs(LD.at(pts).L(LD.at(pts).fn(as_function(f, 2))).value
                  - LN.at(pts).L(LN.at(pts).fn(as_function(f, 2))).value).max() > 1e-3


def test_gamma_sqrt_reg():
    E = by_name("euclidean-weighted", dimension=1)
    x = np.array([[0.3], [1.2], [-2.0]])
    t = x[:, 0] / math.sqrt(2)
    up = (1 - np.tanh(t) ** 2) / math.sqrt(2)
    upp = -2 * np.tanh(t) * (1 - np.tanh(t) ** 2) / 2
    for eps in (1e-1, 1e-4):
        np.testing.assert_allclose(gamma_sqrt_reg(E, "tanh(x1/sqrt(2))", x, eps), upp ** 2 * up ** 2 / (up ** 2 + eps),
                                   rtol=1e-12)
    assert gamma_sqrt_reg(E, "5", x[0], 1e-3) == 0.0


def test_gamma_sqrt_reg_monotone_and_bounded():
    H = by_name("heisenberg")
    rng = np.random.default_rng(29)
    pts = rng.uniform(-1, 1, (40, 3))
    u = random_polynomial_text(3, rng)
    prev = None
    loc = H.at(pts, 4)
    U = loc.fn(as_function(u, 3))
    limit = (loc.gamma(loc.gamma(U)) .value) / (4 * loc.gamma(U).value)
    for eps in (1.0, 1e-2, 1e-4, 1e-8):
        v = gamma_sqrt_reg(H, u, pts, eps)
        assert np.all(v <= limit * (1 + 1e-12) + 1e-15)
        if prev is not None:
            assert np.all(v >= prev - 1e-15)
        prev = v


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 100_000), st.sampled_from(["heisenberg", "engel", "ornstein-uhlenbeck"]))
def test_pointwise_properties(seed, kind):
    T = by_name(kind, **({"dimension": 2} if kind == "ornstein-uhlenbeck" else {}))
    n = T.dimension
    rng = np.random.default_rng(seed)
    f, g = random_polynomial_text(n, rng), random_polynomial_text(n, rng)
    pts = rng.uniform(-1, 1, (8, n))
    gf, gg, gfg = gamma(T, f, f, pts), gamma(T, g, g, pts), gamma(T, f, g, pts)
    assert np.all(gf >= 0)
    assert np.all(np.abs(gfg) <= np.sqrt(gf * gg) + 1e-9 * (1 + np.abs(gfg)))
    a, b = gamma2(T, f, g, pts), gamma2(T, g, f, pts)
    np.testing.assert_allclose(a, b, atol=1e-9 * (1 + np.abs(a).max()))
    # the two evaluation paths of 4 Gamma (Gamma2 - Gamma(Gamma)/(4 Gamma))
    loc = T.at(pts, 4)
    U = loc.fn(as_function(f, n))
    G, G2, GG = loc.gamma(U).value, loc.gamma2(U).value, loc.gamma(loc.gamma(U)).value
    mask = G > 1e-6
    one = 4 * G[mask] * (G2[mask] - GG[mask] / (4 * G[mask]))
    two = 4 * G[mask] * G2[mask] - GG[mask]
    np.testing.assert_allclose(one, two, atol=1e-8 * (1 + np.abs(two).max(initial=0)))


def test_validate_axioms_heisenberg():
    H = by_name("heisenberg")
    pts = sobol_points([(-1, 1)] * 3, 64)
    rep = validate_axioms(H, random_pairs(3, 5, seed=1), pts, 1e-7)
    assert rep.passed, [(e.name, e.max_residual) for e in rep.entries if not e.passed]
    names = {e.name for e in rep.entries}
    assert {"positivity", "polarization", "integration-by-parts", "chain-rule[cube]"} <= names
    assert rep.entry("chain-rule[cube]").max_residual < 1e-9


def test_validate_axioms_dalembert_witness():
    D = GeneralOperator.dalembert()
    pts = sobol_points([(-1, 1)] * 2, 32)
    from carre.smooth import Expression
    pairs = [(Expression("x1", 2), Expression("x2", 2))]
    rep = validate_axioms(D, pairs, pts, 1e-7)
    pos = rep.entry("positivity")
    assert not pos.passed and pos.witness.function == "x2"
    assert rep.status == "violated"


def test_custom_weighted_triple_matches_builtin():
    custom = MarkovTriple([["1", "0"], ["0", "1"]], "-(x1^2 + x2^2)/2")
    OU = by_name("ornstein-uhlenbeck", dimension=2)
    pts = sobol_points([(-1, 1)] * 2, 10)
    np.testing.assert_allclose(operator_L(custom, "x1^3*x2", pts), operator_L(OU, "x1^3*x2", pts), atol=1e-13)
