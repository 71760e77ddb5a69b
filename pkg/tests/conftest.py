"""Independent finite-difference oracles.

These use only the scalar evaluator (ordinary float arithmetic), never jets.
"""
import itertools
import math

import numpy as np
import pytest

from carre import parallel
from carre.expr import evaluate, parse


def scalar(src, n):
    ast = parse(src, n)
    return lambda pts: evaluate(ast, np.atleast_2d(pts))


def fd_derivative(f, x, alpha, h=1e-3):
    """Central difference for d^alpha f at x (tensor product of 1D stencils)."""
    x = np.asarray(x, dtype=float)
    # second-order accurate stencils for derivative orders 0..4
    stencils = {
        0: ([0], [1.0]),
        1: ([-1, 1], [-0.5, 0.5]),
        2: ([-1, 0, 1], [1.0, -2.0, 1.0]),
        3: ([-2, -1, 1, 2], [-0.5, 1.0, -1.0, 0.5]),
        4: ([-2, -1, 0, 1, 2], [1.0, -4.0, 6.0, -4.0, 1.0]),
    }
    per_axis = [stencils[a] for a in alpha]
    pts, ws = [], []
    for combo in itertools.product(*[list(zip(*s)) for s in per_axis]):
        off = np.array([c[0] for c in combo], dtype=float)
        pts.append(x + h * off)
        ws.append(math.prod(c[1] for c in combo))
    vals = f(np.array(pts))
    return float(np.dot(ws, vals)) / h ** sum(alpha)


def fd_grad(f, x, h=1e-5):
    x = np.asarray(x, dtype=float)
    return np.array([fd_derivative(f, x, tuple(int(i == k) for i in range(len(x))), h) for k in range(len(x))])


@pytest.fixture(autouse=True)
def _single_thread():
    parallel.set_threads(1)
    yield
    parallel.set_threads(1)


ACCEPTANCE = []


def record(number, title, ok, detail=""):
    """Log one acceptance line (also shown in the terminal summary) and return ``ok``."""
    line = f"{'PASS' if ok else 'FAIL'}  criterion {number:>2}: {title}" + (f"  [{detail}]" if detail else "")
    ACCEPTANCE.append((number, line))
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE, key=lambda t: t[0]):
            terminalreporter.write_line(line)
