import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from carre.expr import Binary, Call, ParseError, Var, eval_jet, evaluate, parse, pretty
from carre.sampling import random_polynomial_text

from conftest import fd_derivative, scalar


def test_sum_of_squares_shape():
    ast = parse("x1^2 + x2^2", 3)
    assert isinstance(ast.root, Binary) and ast.root.op == "+"
    for side in (ast.root.left, ast.root.right):
        assert isinstance(side, Binary) and side.op == "^"
        assert isinstance(side.left, Var)


def test_call_over_division():
    ast = parse("tanh(x1 / sqrt(2))", 1)
    assert isinstance(ast.root, Call) and ast.root.name == "tanh"
    assert isinstance(ast.root.args[0], Binary) and ast.root.args[0].op == "/"


@pytest.mark.parametrize("src, n, needle", [
    ("x4", 3, "out of range"),
    ("foo(x1)", 1, "unknown"),
    ("pow(x1)", 1, "argument"),
    ("(x1 + 1", 1, "parenthes"),
    ("x1 + ", 1, "end of input"),
    ("2 x1", 1, ""),
])
def test_errors_carry_offsets(src, n, needle):
    with pytest.raises(ParseError) as exc:
        parse(src, n)
    d = exc.value.diagnostics[0]
    assert 0 <= d.offset <= len(src)
    assert needle in d.message.lower()


def test_precedence():
    pts = np.array([[2.0, 3.0]])
    assert evaluate(parse("-x1^2", 2), pts)[0] == -4.0
    assert evaluate(parse("2^3^2", 2), pts)[0] == 512.0
    assert evaluate(parse("x1 - x2 - 1", 2), pts)[0] == -2.0
    assert evaluate(parse("x1 / x2 * 3", 2), pts)[0] == pytest.approx(2.0)
    assert evaluate(parse("x1^-1", 2), pts)[0] == 0.5


def test_product_jet():
    j = eval_jet(parse("x1*x2", 2), [2.0, 3.0], 1)
    assert float(j.value) == 6.0
    np.testing.assert_allclose(j.gradient, [3.0, 2.0])


def test_tanh_profile_jet():
    j = eval_jet(parse("tanh(x1/sqrt(2))", 1), [0.0], 2)
    assert float(j.value) == 0.0
    assert float(j.derivative((1,))) == pytest.approx(1 / math.sqrt(2), abs=1e-15)
    assert float(j.derivative((2,))) == pytest.approx(0.0, abs=1e-15)


def test_exp_coefficients_match_fd():
    j = eval_jet(parse("exp(x1+x2)", 2), [0.0, 0.0], 3)
    f = scalar("exp(x1+x2)", 2)
    for alpha in j.table.exponents:
        alpha = tuple(int(a) for a in alpha)
        c = float(j.coefficient(alpha))
        assert c == pytest.approx(1 / math.prod(math.factorial(a) for a in alpha), rel=1e-14)
        fd = fd_derivative(f, [0.0, 0.0], alpha, h=1e-2) / math.prod(math.factorial(a) for a in alpha)
        assert c == pytest.approx(fd, rel=1e-3)


@pytest.mark.parametrize("src, pt", [("log(x1)", [0.0]), ("sqrt(x1)", [-1.0]), ("abs(x1)", [0.0])])
def test_domain_errors(src, pt):
    from carre.jet import DomainError
    with pytest.raises(DomainError):
        eval_jet(parse(src, 1), pt, 2)


def test_abs_at_zero_order_zero_ok():
    assert float(eval_jet(parse("abs(x1)", 1), [0.0], 0).value) == 0.0


def test_random_polynomials_match_divided_differences():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(200):
        src = random_polynomial_text(2, rng)
        pt = rng.uniform(-1, 1, 2)
        j = eval_jet(parse(src, 2), pt, 2)
        f = scalar(src, 2)
        for alpha in [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]:
            exact = float(j.derivative(alpha))
            fd = fd_derivative(f, pt, alpha, h=1e-3)
            worst = max(worst, abs(exact - fd) / (1 + abs(exact)))
    assert worst < 1e-6


_atoms = st.sampled_from(["x1", "x2", "1", "2.5", "0.001", "3e-2"])


@st.composite
def expressions(draw, depth=3):
    if depth == 0 or draw(st.booleans()):
        return draw(_atoms)
    kind = draw(st.sampled_from(["bin", "neg", "call", "pow"]))
    a = draw(expressions(depth=depth - 1))
    if kind == "neg":
        return f"-{a}" if not a.startswith("-") else f"-({a})"
    if kind == "call":
        return f"{draw(st.sampled_from(['sin', 'cos', 'exp', 'tanh']))}({a})"
    b = draw(expressions(depth=depth - 1))
    if kind == "pow":
        return f"pow({a}, {b})"
    return f"({a}) {draw(st.sampled_from(['+', '-', '*', '/', '^']))} ({b})"


@settings(max_examples=200, deadline=None)
@given(expressions())
def test_pretty_round_trip(src):
    ast = parse(src, 2)
    again = parse(pretty(ast), 2)
    assert again.root == ast.root


@settings(max_examples=300, deadline=None)
@given(st.binary(max_size=40))
def test_parsing_is_total(data):
    try:
        parse(data, 3)
    except ParseError as exc:
        assert exc.diagnostics
