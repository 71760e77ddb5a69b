import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from carre import jet as J
from carre.expr import eval_jet, parse


def _jet(coeffs, n=2, order=3, point=(0.3, -0.2)):
    t = J.index_table(n, order)
    pt = J.frozen(np.asarray(point, dtype=float))
    return J.Jet(np.asarray(coeffs, dtype=float).reshape(t.exponents.shape[0]), pt, order)


def test_coefficient_count():
    for n, r in [(1, 4), (3, 4), (5, 3)]:
        assert J.index_table(n, r).exponents.shape[0] == math.comb(n + r, r)


def test_variable():
    v = J.variable(1, [5.0, 7.0], order=2)
    assert float(v.value) == 5.0
    assert float(v.coefficient((1, 0))) == 1.0
    assert np.count_nonzero(v.coeffs) == 2
    w = J.variable(2, [0.0, 0.0], order=1)
    assert float(w.value) == 0.0 and float(w.coefficient((0, 1))) == 1.0
    with pytest.raises(J.JetError):
        J.variable(3, [0.0, 0.0])


def test_sum_of_variables():
    p = J.frozen(np.array([1.0, 2.0]))
    s = J.add(J.variable(1, p, order=2), J.variable(2, p, order=2))
    assert float(s.value) == 3.0
    np.testing.assert_array_equal(s.gradient, [1.0, 1.0])


def test_binomial_product():
    x, y = J.variables([0.0, 0.0], order=2)
    prod = (1 + x) * (1 + y)
    got = {tuple(int(a) for a in e): float(c) for e, c in zip(prod.table.exponents, prod.coeffs)}
    assert got == {(0, 0): 1, (1, 0): 1, (0, 1): 1, (2, 0): 0, (1, 1): 1, (0, 2): 0}


def test_truncation():
    (x,) = J.variables([0.0], order=4)
    p = (x * x) * (x * x * x)
    np.testing.assert_array_equal(p.coeffs, np.zeros(5))


def test_mul_matches_expression():
    rng = np.random.default_rng(3)
    for _ in range(20):
        a, b = rng.normal(size=(2, 6))
        mono = ["1", "x1", "x2", "x1^2", "x1*x2", "x2^2"]
        pa = " + ".join(f"({c})*{m}" for c, m in zip(a, mono))
        pb = " + ".join(f"({c})*{m}" for c, m in zip(b, mono))
        pt = rng.uniform(-1, 1, 2)
        ja, jb = eval_jet(parse(pa, 2), pt, 4), eval_jet(parse(pb, 2), pt, 4)
        jab = eval_jet(parse(f"({pa})*({pb})", 2), pt, 4)
        np.testing.assert_allclose((ja * jb).coeffs, jab.coeffs, atol=1e-12)


def test_sqrt_examples():
    four = J.Jet.constant(4.0, [0.0], 3)
    np.testing.assert_allclose(J.sqrt(four).coeffs, [2, 0, 0, 0])
    (x,) = J.variables([0.0], order=2)
    r = J.sqrt(4 + x)
    np.testing.assert_allclose(r.coeffs, [2.0, 0.25, -1 / 64], rtol=1e-15)
    with pytest.raises(J.DomainError):
        J.sqrt(J.Jet.constant(-1.0, [0.0], 2))


def test_exp_series():
    (x,) = J.variables([0.0], order=3)
    np.testing.assert_allclose(J.exp(x).coeffs, [1, 1, 0.5, 1 / 6], rtol=1e-15)


def test_partial_examples():
    x, y = J.variables([0.0, 0.0], order=3)
    d = J.partial(x * x * y, 1)
    assert d.order == 2
    ref = 2 * J.variables([0.0, 0.0], order=2)[0] * J.variables([0.0, 0.0], order=2)[1]
    np.testing.assert_array_equal(d.coeffs, ref.coeffs)
    c = J.Jet.constant(3.0, [0.0, 0.0], 2)
    assert not np.any(J.partial(c, 2).coeffs)
    with pytest.raises(J.JetError):
        J.partial(J.Jet.constant(1.0, [0.0], 0), 1)


def test_to_dict_keys():
    x, y = J.variables([0.0, 0.0], order=1)
    d = (x + 2 * y).to_dict()
    assert d["0,1"] == 2.0


def test_incompatible_base_points():
    a = J.variable(1, [0.0], order=2)
    b = J.variable(1, [1.0], order=2)
    with pytest.raises(J.JetError):
        _ = a + b


coeff = st.floats(-2, 2, allow_nan=False)
jets = st.lists(coeff, min_size=10, max_size=10).map(_jet)


@settings(max_examples=100, deadline=None)
@given(jets, jets, jets)
def test_ring_axioms(a, b, c):
    np.testing.assert_allclose(((a * b) * c).coeffs, (a * (b * c)).coeffs, atol=1e-12)
    np.testing.assert_allclose((a * (b + c)).coeffs, (a * b + a * c).coeffs, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(jets, jets, st.integers(1, 2))
def test_leibniz(a, b, i):
    lhs = J.partial(a * b, i)
    rhs = J.partial(a, i) * b.truncate(2) + a.truncate(2) * J.partial(b, i)
    np.testing.assert_allclose(lhs.coeffs, rhs.coeffs, atol=1e-10)


@settings(max_examples=100, deadline=None)
@given(jets)
def test_partials_commute(a):
    np.testing.assert_allclose(J.partial(J.partial(a, 1), 2).coeffs, J.partial(J.partial(a, 2), 1).coeffs, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(jets, st.sampled_from(["exp", "sin", "cos", "tanh"]), st.integers(1, 2))
def test_chain_rule(a, name, i):
    f = getattr(J, name)
    deriv = {"exp": J.exp, "sin": J.cos, "cos": lambda t: -1 * J.sin(t),
             "tanh": lambda t: 1 - J.tanh(t) * J.tanh(t)}[name]
    lhs = J.partial(f(a), i)
    rhs = deriv(a.truncate(2)) * J.partial(a, i)
    np.testing.assert_allclose(lhs.coeffs, rhs.coeffs, atol=1e-10)


def test_identity_composition():
    a = _jet(np.arange(10) / 7.0)
    ident = np.zeros((a.order + 1,) + a.batch_shape)
    ident[0] = a.value
    ident[1] = 1.0
    np.testing.assert_allclose(J.compose_univariate(ident, a).coeffs, a.coeffs, atol=1e-15)
