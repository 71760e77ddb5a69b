"""Truncated multivariate Taylor arithmetic.

A :class:`Jet` stores the Taylor coefficients ``d^alpha f / alpha!`` of a smooth
function at a base point, for every multi-index of total degree ``<= order``.
Jets may be *batched*: the base point has shape ``(n, *batch)`` and every
coefficient carries the same trailing batch shape, so one jet describes the
expansions of a function at many points at once.

Multi-indices are enumerated in graded lexicographic order (degree first,
then lexicographically decreasing inside a degree).  Because of that order
the coefficient table of a lower-order jet is a prefix of the table of a
higher-order one, so truncation is a slice.
"""
from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass

import numpy as np

DEFAULT_ORDER = 4


class JetError(ValueError):
    """Incompatible jets or an operation the jet cannot support."""


class DomainError(ValueError):
    """A function was expanded at a point outside its smooth domain."""


def n_coefficients(n: int, order: int) -> int:
    return math.comb(n + order, order)


@dataclass(frozen=True)
class IndexTable:
    """Multi-index bookkeeping for jets in ``n`` variables up to ``order``."""

    n: int
    order: int
    exponents: np.ndarray  # (ncoef, n)
    lookup: dict
    degree: np.ndarray
    # truncated Cauchy product, pairs sorted by target index
    mul_left: np.ndarray
    mul_right: np.ndarray
    mul_starts: np.ndarray
    # partial derivative maps, one per variable
    partial_src: tuple
    partial_factor: tuple
    factorials: np.ndarray  # alpha! per coefficient


def _graded_exponents(n: int, order: int) -> list[tuple[int, ...]]:
    out = []
    for d in range(order + 1):
        block = [c for c in itertools.product(range(d + 1), repeat=n) if sum(c) == d]
        block.sort(reverse=True)
        out.extend(block)
    return out


@functools.lru_cache(maxsize=None)
def index_table(n: int, order: int) -> IndexTable:
    if n < 1 or order < 0:
        raise JetError(f"invalid jet shape n={n}, order={order}")
    exps = _graded_exponents(n, order)
    lookup = {e: k for k, e in enumerate(exps)}
    exparr = np.array(exps, dtype=np.int64).reshape(len(exps), n)
    degree = exparr.sum(axis=1)

    pairs = []
    for i, a in enumerate(exps):
        da = degree[i]
        for j, b in enumerate(exps):
            if da + degree[j] > order:
                continue
            pairs.append((lookup[tuple(x + y for x, y in zip(a, b))], i, j))
    pairs.sort()
    target = np.array([p[0] for p in pairs])
    left = np.array([p[1] for p in pairs])
    right = np.array([p[2] for p in pairs])
    starts = np.flatnonzero(np.r_[True, target[1:] != target[:-1]])

    src, fac = [], []
    if order >= 1:
        lower = _graded_exponents(n, order - 1)
        for i in range(n):
            s, f = [], []
            for e in lower:
                up = list(e)
                up[i] += 1
                s.append(lookup[tuple(up)])
                f.append(float(up[i]))
            src.append(np.array(s))
            fac.append(np.array(f))
    factorials = np.array([math.prod(math.factorial(k) for k in e) for e in exps], dtype=float)
    return IndexTable(n, order, exparr, lookup, degree, left, right, starts,
                      tuple(src), tuple(fac), factorials)


def _expand(arr: np.ndarray, ndim: int) -> np.ndarray:
    """Reshape a per-coefficient vector so it broadcasts against batched coefficients."""
    return arr.reshape(arr.shape + (1,) * ndim)


class Jet:
    """Truncated Taylor expansion of a smooth function at a (batch of) base point(s).

    ``coeffs[k]`` is ``d^alpha f / alpha!`` for the k-th multi-index of
    :func:`index_table`.  Jets are immutable; every operation returns a new jet.
    """

    __slots__ = ("coeffs", "point", "order")
    __array_ufunc__ = None  # numpy operands defer to the Jet operators

    def __init__(self, coeffs, point, order: int):
        point = np.asarray(point, dtype=float)
        coeffs = np.asarray(coeffs, dtype=float)
        n = point.shape[0]
        if coeffs.shape[0] != n_coefficients(n, order):
            raise JetError(
                f"coefficient table has {coeffs.shape[0]} entries, expected "
                f"C({n}+{order},{order}) = {n_coefficients(n, order)}"
            )
        if coeffs.shape[1:] != point.shape[1:]:
            raise JetError("coefficient batch shape does not match the base point")
        coeffs.flags.writeable = False
        if point.flags.writeable:
            point = point.view()
            point.flags.writeable = False
        self.coeffs = coeffs
        self.point = point
        self.order = order

    # -- construction -------------------------------------------------------
    @classmethod
    def constant(cls, value, point, order: int) -> "Jet":
        point = np.asarray(point, dtype=float)
        c = np.zeros((n_coefficients(point.shape[0], order),) + point.shape[1:])
        c[0] = value
        return cls(c, point, order)

    @property
    def n(self) -> int:
        return self.point.shape[0]

    @property
    def batch_shape(self) -> tuple:
        return self.point.shape[1:]

    @property
    def table(self) -> IndexTable:
        return index_table(self.n, self.order)

    @property
    def value(self) -> np.ndarray:
        return self.coeffs[0]

    @property
    def gradient(self) -> np.ndarray:
        if self.order < 1:
            raise JetError("order-0 jet carries no gradient")
        return self.coeffs[1:self.n + 1]

    def coefficient(self, alpha) -> np.ndarray:
        return self.coeffs[self.table.lookup[tuple(alpha)]]

    def derivative(self, alpha) -> np.ndarray:
        """Raw partial derivative ``d^alpha f`` at the base point."""
        k = self.table.lookup[tuple(alpha)]
        return self.coeffs[k] * self.table.factorials[k]

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise JetError(f"cannot raise jet order {self.order} to {order}")
        if order == self.order:
            return self
        return Jet(self.coeffs[:n_coefficients(self.n, order)], self.point, order)

    def with_mask(self, keep) -> "Jet":
        """Zero the whole expansion at batch entries where ``keep`` is false."""
        return Jet(np.where(keep, self.coeffs, 0.0), self.point, self.order)

    # -- compatibility ------------------------------------------------------
    def _check(self, other: "Jet") -> None:
        if other.n != self.n or other.order != self.order:
            raise JetError(
                f"incompatible jets: (n={self.n}, r={self.order}) vs (n={other.n}, r={other.order})"
            )
        if other.point is not self.point:
            if other.point.shape != self.point.shape or not np.array_equal(other.point, self.point):
                raise JetError("incompatible jets: different base points")

    def _lift(self, other):
        if isinstance(other, Jet):
            self._check(other)
            return other.coeffs
        return None

    # -- arithmetic ---------------------------------------------------------
    def __neg__(self) -> "Jet":
        return Jet(-self.coeffs, self.point, self.order)

    def __pos__(self) -> "Jet":
        return self

    def __add__(self, other) -> "Jet":
        oc = self._lift(other)
        if oc is not None:
            return Jet(self.coeffs + oc, self.point, self.order)
        c = self.coeffs.copy()
        c[0] = c[0] + other
        return Jet(c, self.point, self.order)

    __radd__ = __add__

    def __sub__(self, other) -> "Jet":
        return self + (-other)

    def __rsub__(self, other) -> "Jet":
        return (-self) + other

    def __mul__(self, other) -> "Jet":
        oc = self._lift(other)
        if oc is None:
            other = np.asarray(other, dtype=float)
            return Jet(self.coeffs * other, self.point, self.order)
        t = self.table
        prod = self.coeffs[t.mul_left] * oc[t.mul_right]
        return Jet(np.add.reduceat(prod, t.mul_starts, axis=0), self.point, self.order)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Jet":
        if isinstance(other, Jet):
            return self * reciprocal(other)
        return Jet(self.coeffs / np.asarray(other, dtype=float), self.point, self.order)

    def __rtruediv__(self, other) -> "Jet":
        return reciprocal(self) * other

    def __pow__(self, k) -> "Jet":
        if isinstance(k, (int, np.integer)) or (isinstance(k, float) and k.is_integer() and abs(k) < 2**31):
            k = int(k)
            if k < 0:
                return reciprocal(self) ** (-k)
            result = None
            base = self
            while k:
                if k & 1:
                    result = base if result is None else result * base
                k >>= 1
                if k:
                    base = base * base
            return result if result is not None else Jet.constant(1.0, self.point, self.order)
        return compose_univariate(power_taylor(self.value, self.order, float(k)), self)

    def __repr__(self) -> str:
        return f"Jet(n={self.n}, order={self.order}, batch={self.batch_shape})"

    # -- serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        """Debug form keyed by multi-index strings such as ``"2,0,1"``."""
        out = {}
        for k, e in enumerate(self.table.exponents):
            v = self.coeffs[k]
            out[",".join(str(int(x)) for x in e)] = float(v) if v.ndim == 0 else v.tolist()
        return out


# ---------------------------------------------------------------------------
# module-level operations

def variable(i: int, point, n: int | None = None, order: int = DEFAULT_ORDER) -> Jet:
    """Jet of the coordinate function ``x_i`` (``i`` is 1-based)."""
    point = np.asarray(point, dtype=float)
    if n is None:
        n = point.shape[0]
    if point.shape[0] != n:
        raise JetError(f"point has {point.shape[0]} coordinates, expected {n}")
    if not 1 <= i <= n:
        raise JetError(f"variable index {i} out of range 1..{n}")
    c = np.zeros((n_coefficients(n, order),) + point.shape[1:])
    c[0] = point[i - 1]
    if order >= 1:
        c[i] = 1.0
    return Jet(c, point, order)


def frozen(point) -> np.ndarray:
    """Read-only float view of ``point``; jets built on it share one base array."""
    point = np.asarray(point, dtype=float)
    if point.flags.writeable:
        point = point.view()
        point.flags.writeable = False
    return point


def variables(point, order: int = DEFAULT_ORDER) -> list[Jet]:
    point = frozen(point)
    return [variable(i + 1, point, point.shape[0], order) for i in range(point.shape[0])]


def add(a: Jet, b: Jet) -> Jet:
    return a + b


def mul(a: Jet, b: Jet) -> Jet:
    return a * b


def partial(a: Jet, i: int) -> Jet:
    """``d a / d x_i`` as a jet of order ``a.order - 1`` (``i`` is 1-based)."""
    if a.order < 1:
        raise JetError("cannot differentiate an order-0 jet")
    if not 1 <= i <= a.n:
        raise JetError(f"variable index {i} out of range 1..{a.n}")
    t = a.table
    fac = _expand(t.partial_factor[i - 1], len(a.batch_shape))
    return Jet(a.coeffs[t.partial_src[i - 1]] * fac, a.point, a.order - 1)


def compose_univariate(taylor, a: Jet) -> Jet:
    """Compose a univariate map with a jet.

    ``taylor[k]`` holds ``psi^(k)(a0) / k!`` at the value ``a0`` of ``a`` (with
    the same batch shape as ``a``), for ``k = 0..a.order``.  Horner evaluation
    of the series in the value-free part of ``a`` gives the Faa di Bruno
    truncation.
    """
    taylor = np.asarray(taylor, dtype=float)
    if taylor.shape[0] < a.order + 1:
        raise JetError("not enough Taylor coefficients for the jet order")
    c = np.zeros_like(a.coeffs)
    c[1:] = a.coeffs[1:]
    h = Jet(c, a.point, a.order)
    res = Jet.constant(taylor[a.order], a.point, a.order)
    for k in range(a.order - 1, -1, -1):
        res = h * res + taylor[k]
    return res


# ---------------------------------------------------------------------------
# Taylor coefficients psi^(k)(v)/k! of the elementary functions

def _factorials(r: int) -> np.ndarray:
    return np.array([math.factorial(k) for k in range(r + 1)], dtype=float)


def _stack(rows) -> np.ndarray:
    return np.stack([np.asarray(x, dtype=float) for x in rows])


def exp_taylor(v, r: int) -> np.ndarray:
    e = np.exp(v)
    return _stack([e / math.factorial(k) for k in range(r + 1)])


def log_taylor(v, r: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if np.any(v <= 0):
        raise DomainError("log of a non-positive value")
    rows = [np.log(v)] + [(-1.0) ** (k + 1) / (k * v ** k) for k in range(1, r + 1)]
    return _stack(rows)


def sin_taylor(v, r: int) -> np.ndarray:
    return _stack([np.sin(v + k * np.pi / 2) / math.factorial(k) for k in range(r + 1)])


def cos_taylor(v, r: int) -> np.ndarray:
    return _stack([np.cos(v + k * np.pi / 2) / math.factorial(k) for k in range(r + 1)])


@functools.lru_cache(maxsize=None)
def _tanh_polys(r: int) -> tuple:
    # d^k/dx^k tanh = P_k(tanh x) with P_{k+1} = P_k' (1 - t^2)
    P = np.polynomial.Polynomial
    polys = [P([0.0, 1.0])]
    one_minus = P([1.0, 0.0, -1.0])
    for _ in range(r):
        polys.append(polys[-1].deriv() * one_minus)
    return tuple(polys)


def tanh_taylor(v, r: int) -> np.ndarray:
    t = np.tanh(v)
    polys = _tanh_polys(r)
    return _stack([polys[k](t) / math.factorial(k) for k in range(r + 1)])


def power_taylor(v, r: int, c: float) -> np.ndarray:
    """Coefficients of ``s -> s**c`` at ``v > 0`` (any real ``c``)."""
    v = np.asarray(v, dtype=float)
    if np.any(v <= 0):
        raise DomainError(f"power {c} of a non-positive value")
    rows = []
    binom = 1.0
    for k in range(r + 1):
        rows.append(binom * v ** (c - k))
        binom *= (c - k) / (k + 1)
    return _stack(rows)


def sqrt_taylor(v, r: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if np.any(v <= 0) and r >= 1:
        raise DomainError("sqrt of a non-positive value")
    if r == 0:
        if np.any(v < 0):
            raise DomainError("sqrt of a negative value")
        return _stack([np.sqrt(v)])
    return power_taylor(v, r, 0.5)


def reciprocal_taylor(v, r: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if np.any(v == 0):
        raise DomainError("division by zero")
    return _stack([(-1.0) ** k / v ** (k + 1) for k in range(r + 1)])


def abs_taylor(v, r: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if r >= 1 and np.any(v == 0):
        raise DomainError("abs is not smooth at 0")
    s = np.sign(v)
    rows = [np.abs(v)] + ([s] if r >= 1 else []) + [np.zeros_like(v)] * max(r - 1, 0)
    return _stack(rows)


def reciprocal(a: Jet) -> Jet:
    return compose_univariate(reciprocal_taylor(a.value, a.order), a)


def exp(a: Jet) -> Jet:
    return compose_univariate(exp_taylor(a.value, a.order), a)


def log(a: Jet) -> Jet:
    return compose_univariate(log_taylor(a.value, a.order), a)


def sin(a: Jet) -> Jet:
    return compose_univariate(sin_taylor(a.value, a.order), a)


def cos(a: Jet) -> Jet:
    return compose_univariate(cos_taylor(a.value, a.order), a)


def tanh(a: Jet) -> Jet:
    return compose_univariate(tanh_taylor(a.value, a.order), a)


def sqrt(a: Jet) -> Jet:
    return compose_univariate(sqrt_taylor(a.value, a.order), a)


def absolute(a: Jet) -> Jet:
    return compose_univariate(abs_taylor(a.value, a.order), a)
