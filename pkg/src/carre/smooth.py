"""Smooth functions that can be expanded into jets at any point and order.

All functions share one protocol: ``f.jet(cols, order)`` returns a :class:`Jet`
whose base point is ``cols`` (layout ``(n, *batch)``), and ``f(points)``
evaluates plain values with ``points`` given as ``(n,)`` or ``(N, n)``.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from . import expr as E
from . import jet as J


class SmoothFunction:
    dimension: int
    label: str = "f"

    def jet(self, cols: np.ndarray, order: int) -> J.Jet:
        raise NotImplementedError

    @property
    def constant_value(self) -> float | None:
        """The value if the function is known to be constant, else ``None``."""
        return None

    def jet_at(self, points, order: int = J.DEFAULT_ORDER) -> J.Jet:
        return self.jet(J.frozen(E._as_columns(points, self.dimension)), order)

    def __call__(self, points) -> np.ndarray:
        return self.jet_at(points, 0).value.copy()

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.label!r}, n={self.dimension})"

    # -- algebra ------------------------------------------------------------
    def _combine(self, other, op: Callable, sym: str, swap: bool = False) -> "SmoothFunction":
        other = as_function(other, self.dimension)
        a, b = (other, self) if swap else (self, other)
        return JetMap(lambda cols, r: op(a.jet(cols, r), b.jet(cols, r)), self.dimension,
                      f"({a.label} {sym} {b.label})")

    def __add__(self, other):
        return self._combine(other, lambda x, y: x + y, "+")

    def __radd__(self, other):
        return self._combine(other, lambda x, y: x + y, "+", swap=True)

    def __sub__(self, other):
        return self._combine(other, lambda x, y: x - y, "-")

    def __rsub__(self, other):
        return self._combine(other, lambda x, y: x - y, "-", swap=True)

    def __mul__(self, other):
        return self._combine(other, lambda x, y: x * y, "*")

    def __rmul__(self, other):
        return self._combine(other, lambda x, y: x * y, "*", swap=True)

    def __truediv__(self, other):
        return self._combine(other, lambda x, y: x / y, "/")

    def __neg__(self):
        return JetMap(lambda cols, r: -self.jet(cols, r), self.dimension, f"(-{self.label})")

    def __pow__(self, k):
        return JetMap(lambda cols, r: self.jet(cols, r) ** k, self.dimension, f"({self.label}^{k})")


class Constant(SmoothFunction):
    def __init__(self, value: float, dimension: int):
        self.value = float(value)
        self.dimension = dimension
        self.label = repr(self.value)

    @property
    def constant_value(self) -> float:
        return self.value

    def jet(self, cols, order):
        return J.Jet.constant(self.value, cols, order)


class Expression(SmoothFunction):
    """A function given in the expression language of :mod:`carre.expr`."""

    def __init__(self, source, dimension: int | None = None, names: Sequence[str] | None = None):
        if isinstance(source, E.ExprAst):
            self.ast = source
        else:
            if dimension is None:
                dimension = len(names) if names else None
            if dimension is None:
                raise ValueError("dimension is required for a textual expression")
            self.ast = E.parse(source, dimension, names)
        self.dimension = self.ast.dimension
        self.source = source if isinstance(source, str) else E.pretty(self.ast)
        self.label = self.source
        self._const = None
        if not E.variables_used(self.ast.root):
            self._const = float(E.evaluate(self.ast, np.zeros(self.dimension)))

    @property
    def constant_value(self):
        return self._const

    def jet(self, cols, order):
        return E.eval_jet_columns(self.ast, cols, order)

    def evaluate(self, points) -> np.ndarray:
        """Values through plain float math (bypasses the jet engine)."""
        return E.evaluate(self.ast, points)


class JetMap(SmoothFunction):
    """Wrap ``fn(cols, order) -> Jet`` (or a function of the coordinate jets).

    With ``coordinates=True`` the callable receives the list of coordinate
    jets ``[x1, ..., xn]`` instead, which is the convenient way to write
    built-ins: ``JetMap(lambda x: x[0] * x[1], 2, coordinates=True)``.
    """

    def __init__(self, fn: Callable, dimension: int, label: str = "f", coordinates: bool = False):
        self.fn = fn
        self.dimension = dimension
        self.label = label
        self.coordinates = coordinates

    def jet(self, cols, order):
        if self.coordinates:
            out = self.fn(J.variables(cols, order))
        else:
            out = self.fn(cols, order)
        if not isinstance(out, J.Jet):
            out = J.Jet.constant(out, cols, order)
        return out


class Bump(SmoothFunction):
    """Compactly supported bump ``((1 - |x - c|^2 / rho^2)_+)^power``.

    For ``power = 4`` the bump is C^3, so jets up to order 3 are exact
    everywhere, including on the boundary sphere of the support.
    """

    def __init__(self, center, radius: float, power: int = 4):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.power = int(power)
        self.dimension = self.center.shape[0]
        self.label = f"bump(c={self.center.tolist()}, rho={self.radius:g})"

    def jet(self, cols, order):
        xs = J.variables(cols, order)
        q = 1.0 - sum((x - c) * (x - c) for x, c in zip(xs, self.center)) / self.radius**2
        return (q ** self.power).with_mask(q.value > 0)

    def support_box(self):
        return self.center - self.radius, self.center + self.radius


class TensorBump(SmoothFunction):
    """Product bump ``prod_i ((1 - ((x_i - c_i)/h_i)^2)_+)^power`` supported on a box."""

    def __init__(self, lower, upper, power: int = 4):
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        self.power = int(power)
        self.dimension = self.lower.shape[0]
        self.label = f"tensor-bump({self.lower.tolist()}, {self.upper.tolist()})"

    def jet(self, cols, order):
        xs = J.variables(cols, order)
        c = (self.lower + self.upper) / 2
        h = (self.upper - self.lower) / 2
        out = None
        keep = True
        for x, ci, hi in zip(xs, c, h):
            q = 1.0 - ((x - ci) / hi) * ((x - ci) / hi)
            keep = keep & (q.value > 0)
            out = q ** self.power if out is None else out * q ** self.power
        return out.with_mask(keep)


def as_function(obj, dimension: int, names: Sequence[str] | None = None) -> SmoothFunction:
    """Coerce a number, expression text or SmoothFunction into a SmoothFunction."""
    if isinstance(obj, SmoothFunction):
        if obj.dimension != dimension:
            raise ValueError(f"function {obj.label!r} has dimension {obj.dimension}, expected {dimension}")
        return obj
    if isinstance(obj, (int, float, np.floating, np.integer)):
        return Constant(float(obj), dimension)
    if isinstance(obj, (str, E.ExprAst)):
        return Expression(obj, dimension, names)
    raise TypeError(f"cannot interpret {obj!r} as a smooth function")


def univariate(source) -> SmoothFunction:
    """A nonlinearity ``F(s)``; text is parsed with the single variable ``s``."""
    if isinstance(source, SmoothFunction):
        if source.dimension != 1:
            raise ValueError("a nonlinearity must be univariate")
        return source
    if isinstance(source, (int, float)):
        return Constant(float(source), 1)
    return Expression(source, 1, names=("s",))


def compose(F: SmoothFunction, a: J.Jet) -> J.Jet:
    """``F(a)`` for a univariate ``F`` and any jet ``a``."""
    c = F.jet(J.frozen(a.value[None, ...]), a.order).coeffs
    return J.compose_univariate(c, a)


def derivative_values(F: SmoothFunction, values, k: int = 1) -> np.ndarray:
    """``F^(k)`` evaluated at the given values."""
    v = np.asarray(values, dtype=float)
    c = F.jet(J.frozen(v[None, ...]), k).coeffs
    return c[k] * float(np.prod(np.arange(1, k + 1)))
