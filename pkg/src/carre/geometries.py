"""Built-in triples: weighted Euclidean, Ornstein-Uhlenbeck, Heisenberg, Engel, filiform, Grushin."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .fields import VectorField
from .quad import euclidean_distance, homogeneous_norm
from .smooth import as_function
from .triple import MarkovTriple

KINDS = ("euclidean-weighted", "ornstein-uhlenbeck", "heisenberg", "engel", "filiform", "grushin", "custom")
CARNOT = ("heisenberg", "engel", "filiform")


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class GeometrySpec:
    """``frame`` is only read for ``custom``: a list of coefficient lists (text or numbers)."""

    kind: str
    dimension: int | None = None
    alpha: int | None = None
    eta: str | None = None
    frame: tuple | None = None
    names: tuple | None = None
    extra: dict = field(default_factory=dict)


def _unit(i: int, n: int) -> list:
    return ["1" if k == i else "0" for k in range(n)]


def _euclidean(n: int, eta, name: str) -> MarkovTriple:
    frame = [VectorField(_unit(i, n), f"d{i + 1}") for i in range(n)]
    return MarkovTriple(frame, eta, name, distance=euclidean_distance(n), meta={"kind": name, "dimension": n})


def filiform_fields(n: int) -> list:
    """``Z_1 = d_1`` and ``Z_2 = d_2 + sum_{i>=3} x1^(i-2)/(i-2)! d_i``."""
    z1 = VectorField(_unit(0, n), "Z1")
    c = ["0", "1"] + [f"x1^{i - 2}/{math.factorial(i - 2)}" for i in range(3, n + 1)]
    return [z1, VectorField(c, "Z2")]


def make(spec: GeometrySpec) -> MarkovTriple:
    kind = spec.kind
    if kind not in KINDS:
        raise GeometryError(f"unknown geometry kind {kind!r}; expected one of {', '.join(KINDS)}")
    n = spec.dimension
    if kind in ("euclidean-weighted", "ornstein-uhlenbeck"):
        if n is None or n < 1:
            raise GeometryError(f"{kind} needs a positive dimension")
        if kind == "ornstein-uhlenbeck":
            if spec.eta is not None:
                raise GeometryError("ornstein-uhlenbeck fixes the weight; use euclidean-weighted instead")
            eta = "-(" + " + ".join(f"x{i + 1}^2" for i in range(n)) + ")/2"
            return _euclidean(n, eta, kind)
        return _euclidean(n, spec.eta, kind)

    if kind == "heisenberg":
        _expect_dim(spec, 3)
        frame = [VectorField(["1", "0", "-x2/2"], "X"), VectorField(["0", "1", "x1/2"], "Y")]
        return MarkovTriple(frame, None, kind, carnot=True, distance=homogeneous_norm((1, 1, 2)),
                            meta={"kind": kind, "dimension": 3, "convention": "X = d1 - (x2/2) d3, Y = d2 + (x1/2) d3"})

    if kind == "engel":
        _expect_dim(spec, 4)
        frame = [VectorField(_unit(0, 4), "Z1"), VectorField(["0", "1", "x1", "x1^2/2"], "Z2")]
        return MarkovTriple(frame, None, kind, carnot=True, distance=homogeneous_norm((1, 1, 2, 3)),
                            meta={"kind": kind, "dimension": 4,
                                  "convention": "Z1 = d1, Z2 = d2 + x1 d3 + (x1^2/2) d4"})

    if kind == "filiform":
        if n is None or n < 2:
            raise GeometryError("filiform needs dimension n >= 2")
        weights = (1, 1) + tuple(range(2, n))
        return MarkovTriple(filiform_fields(n), None, kind, carnot=True, distance=homogeneous_norm(weights),
                            meta={"kind": kind, "dimension": n, "step": n - 1,
                                  "convention": "Z_{i+1} := [Z_i, Z_1], sign included"})

    if kind == "grushin":
        _expect_dim(spec, 2)
        a = spec.alpha
        if a is None or int(a) != a or a < 1:
            raise GeometryError(f"grushin needs an integer alpha >= 1, got {a!r}")
        a = int(a)
        frame = [VectorField(["1", "0"], "Z1"), VectorField(["0", f"x1^{a}"], "Z2")]
        return MarkovTriple(frame, None, kind, distance=homogeneous_norm((1, a + 1)),
                            meta={"kind": kind, "dimension": 2, "alpha": a,
                                  "convention": f"Z2 = x1^{a} d2 (x^alpha, not |x|^alpha)"})

    # custom
    if not spec.frame:
        raise GeometryError("custom geometry needs a frame")
    n = n or len(spec.frame[0])
    names = spec.names
    frame = []
    for j, coeffs in enumerate(spec.frame):
        if len(coeffs) != n:
            raise GeometryError(f"frame field {j + 1} has {len(coeffs)} coefficients, expected {n}")
        frame.append(VectorField([_expr(c, n, names) for c in coeffs], f"Z{j + 1}"))
    eta = None if spec.eta is None else _expr(spec.eta, n, names)
    return MarkovTriple(frame, eta, "custom", distance=euclidean_distance(n), meta={"kind": kind, "dimension": n})


def _expr(src, n, names):
    return as_function(src, n, names)


def _expect_dim(spec: GeometrySpec, n: int) -> None:
    if spec.dimension not in (None, n):
        raise GeometryError(f"{spec.kind} is {n}-dimensional, got dimension {spec.dimension}")


def by_name(kind: str, **params) -> MarkovTriple:
    """Shorthand: ``by_name("filiform", dimension=5)``."""
    return make(GeometrySpec(kind, **params))
