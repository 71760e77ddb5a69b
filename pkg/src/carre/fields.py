"""Vector fields as first-order operators, Lie brackets and bracket-generation depth."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from . import jet as J
from .expr import _as_columns
from .smooth import JetMap, SmoothFunction, as_function


class VectorField:
    """``Z = sum_i Z^i d_i`` with smooth coefficient functions ``Z^i``."""

    def __init__(self, coefficients: Sequence, label: str = "Z", dimension: int | None = None):
        n = dimension or len(coefficients)
        if len(coefficients) != n:
            raise ValueError(f"{label}: {len(coefficients)} coefficients for dimension {n}")
        self.coefficients = [as_function(c, n) for c in coefficients]
        self.dimension = n
        self.label = label

    def __repr__(self) -> str:
        return f"VectorField({self.label!r}, [{', '.join(c.label for c in self.coefficients)}])"

    # -- evaluation ---------------------------------------------------------
    def _compute_jets(self, cols, order, cache):
        return [c.jet(cols, order) for c in self.coefficients]

    def coefficient_jets(self, cols, order: int, cache: dict | None = None) -> list:
        """Jets of the coefficients at ``cols``; ``cache`` is valid for one ``cols``."""
        if cache is None:
            return self._compute_jets(cols, order, None)
        slot = cache.setdefault(id(self), {})
        slot.setdefault("_keep", self)  # pin the object so its id stays unique
        have = [q for q in slot if isinstance(q, int) and q >= order]
        if have:
            q = min(have)
            return [j.truncate(order) for j in slot[q]]
        jets = self._compute_jets(cols, order, cache)
        slot[order] = jets
        return jets

    def constant_coefficients(self) -> list:
        return [c.constant_value for c in self.coefficients]

    def apply_jet(self, F: J.Jet, cache: dict | None = None) -> J.Jet:
        """Jet of ``x -> sum_i Z^i(x) d_i F(x)``, of order ``F.order - 1``."""
        if F.order < 1:
            raise J.JetError(f"{self.label}: cannot apply a vector field to an order-0 jet")
        q = F.order - 1
        consts = self.constant_coefficients()
        jets = None
        out = None
        for i, c in enumerate(consts):
            if c == 0.0:
                continue
            d = J.partial(F, i + 1)
            if c is not None:
                term = d * c if c != 1.0 else d
            else:
                if jets is None:
                    jets = self.coefficient_jets(F.point, q, cache)
                term = jets[i] * d
            out = term if out is None else out + term
        if out is None:
            out = J.Jet.constant(0.0, F.point, q)
        return out

    def apply(self, f: SmoothFunction, points, order: int = J.DEFAULT_ORDER) -> J.Jet:
        """``Z f`` expanded at ``points`` to order ``order - 1``."""
        f = as_function(f, self.dimension)
        if order < 1:
            raise J.JetError("order exhausted: applying a vector field needs order >= 1")
        cols = J.frozen(_as_columns(points, self.dimension))
        return self.apply_jet(f.jet(cols, order), {})

    def values(self, points) -> np.ndarray:
        """Coefficient vectors at ``points``: shape (n,) or (N, n)."""
        cols = J.frozen(_as_columns(points, self.dimension))
        vals = np.stack([j.value for j in self.coefficient_jets(cols, 0, {})])
        return vals.T if vals.ndim == 2 else vals

    # -- algebra ------------------------------------------------------------
    def __neg__(self) -> "VectorField":
        return LinearCombination([(-1.0, self)], f"-{self.label}")


class Bracket(VectorField):
    """``[A, B]`` with coefficients ``A(B^i) - B(A^i)``.

    Coefficients are evaluated from one-order-higher jets of the parent
    coefficients, so a bracket of depth d consumes d - 1 derivative orders.
    """

    def __init__(self, A: VectorField, B: VectorField, label: str | None = None):
        if A.dimension != B.dimension:
            raise ValueError("bracket of fields with different dimensions")
        self.A, self.B = A, B
        self.dimension = A.dimension
        self.label = label or f"[{A.label},{B.label}]"
        self.coefficients = [
            JetMap(lambda cols, r, i=i: self.coefficient_jets(cols, r, {})[i], self.dimension,
                   f"{self.label}^{i + 1}")
            for i in range(self.dimension)
        ]

    def constant_coefficients(self) -> list:
        return [None] * self.dimension

    def _compute_jets(self, cols, order, cache):
        cache = {} if cache is None else cache
        a_up = self.A.coefficient_jets(cols, order + 1, cache)
        b_up = self.B.coefficient_jets(cols, order + 1, cache)
        return [self.A.apply_jet(b, cache) - self.B.apply_jet(a, cache) for a, b in zip(a_up, b_up)]


class LinearCombination(VectorField):
    """``sum_k c_k V_k`` with smooth (or constant) coefficient functions ``c_k``."""

    def __init__(self, terms: Sequence, label: str = "V"):
        self.terms = [(as_function(c, v.dimension), v) for c, v in terms]
        self.dimension = self.terms[0][1].dimension
        self.label = label
        self.coefficients = [
            JetMap(lambda cols, r, i=i: self.coefficient_jets(cols, r, {})[i], self.dimension,
                   f"{label}^{i + 1}")
            for i in range(self.dimension)
        ]

    def constant_coefficients(self) -> list:
        out = [0.0] * self.dimension
        for c, v in self.terms:
            cv = c.constant_value
            if cv is None:
                return [None] * self.dimension
            for i, vc in enumerate(v.constant_coefficients()):
                if vc is None or out[i] is None:
                    out[i] = None
                else:
                    out[i] += cv * vc
        return out

    def _compute_jets(self, cols, order, cache):
        acc = None
        for c, v in self.terms:
            cj = c.jet(cols, order)
            vj = v.coefficient_jets(cols, order, cache)
            part = [cj * x for x in vj]
            acc = part if acc is None else [a + p for a, p in zip(acc, part)]
        return acc


def bracket(A: VectorField, B: VectorField) -> VectorField:
    return Bracket(A, B)


def apply(Z: VectorField, f, points, order: int = J.DEFAULT_ORDER) -> J.Jet:
    return Z.apply(f, points, order)


@dataclass(frozen=True)
class BracketTree:
    """A leaf (index into the frame, 0 for the drift) or a bracket of two subtrees."""

    leaf: int | None = None
    left: "BracketTree | None" = None
    right: "BracketTree | None" = None

    @property
    def depth(self) -> int:
        if self.leaf is not None:
            return 1
        return self.left.depth + self.right.depth

    def __str__(self) -> str:
        if self.leaf is not None:
            return str(self.leaf)
        return f"[{self.left},{self.right}]"

    def build(self, fields: dict, memo: dict | None = None) -> VectorField:
        """Materialize against ``fields`` (leaf index -> VectorField)."""
        memo = {} if memo is None else memo
        if self in memo:
            return memo[self]
        if self.leaf is not None:
            out = fields[self.leaf]
        else:
            out = Bracket(self.left.build(fields, memo), self.right.build(fields, memo), str(self))
        memo[self] = out
        return out


def right_normed_trees(generators: Sequence[int], depth: int) -> list:
    """All right-normed brackets ``[g1,[g2,[...,gd]]]`` of exactly ``depth``."""
    level = [BracketTree(leaf=g) for g in generators]
    for _ in range(depth - 1):
        nxt = []
        for g in generators:
            for t in level:
                if t.leaf == g:
                    continue  # [Z, Z] = 0
                nxt.append(BracketTree(left=BracketTree(leaf=g), right=t))
        level = nxt
    return level


def _pivoted_rank(vectors: np.ndarray, tol: float) -> int:
    """Numerical rank of the columns of ``vectors`` (n, K), relative tolerance."""
    if vectors.shape[1] == 0:
        return 0
    norms = np.linalg.norm(vectors, axis=0)
    scale = norms.max()
    if scale == 0.0:
        return 0
    R = scipy.linalg.qr(vectors, mode="r", pivoting=True)[0]
    diag = np.abs(np.diag(R))
    return int(np.sum(diag > tol * scale))


@dataclass
class HormanderReport:
    depth: int | None
    per_point_depth: np.ndarray  # 0 where max_depth was not enough
    rank_by_depth: np.ndarray  # (max_depth, N)
    worst_index: int | None
    worst_rank: int | None
    max_depth: int
    tol: float
    depth_with_drift: int | None = None
    per_point_depth_with_drift: np.ndarray | None = None
    note: str = "verified on samples"
    fields_per_depth: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.depth is not None

    def to_dict(self) -> dict:
        return {
            "depth": self.depth,
            "max_depth": self.max_depth,
            "tol": self.tol,
            "per_point_depth": self.per_point_depth.tolist(),
            "worst_index": self.worst_index,
            "worst_rank": self.worst_rank,
            "depth_with_drift": self.depth_with_drift,
            "fields_per_depth": self.fields_per_depth,
            "note": self.note,
        }


def _depth_scan(fields: dict, generators, first_level, cols, n, max_depth, tol):
    N = cols.shape[1]
    cache, memo = {}, {}
    collected = [[] for _ in range(N)]
    ranks = np.zeros((max_depth, N), dtype=int)
    counts = []
    for d in range(1, max_depth + 1):
        trees = [BracketTree(leaf=g) for g in first_level] if d == 1 else right_normed_trees(generators, d)
        counts.append(len(trees))
        for t in trees:
            V = t.build(fields, memo)
            vals = np.stack([j.value for j in V.coefficient_jets(cols, 0, cache)])  # (n, N)
            for p in range(N):
                collected[p].append(vals[:, p])
        for p in range(N):
            ranks[d - 1, p] = _pivoted_rank(np.stack(collected[p], axis=1), tol)
        if np.all(ranks[d - 1] == n):
            ranks[d:] = n
            break
    per_point = np.zeros(N, dtype=int)
    for p in range(N):
        hit = np.flatnonzero(ranks[:, p] == n)
        per_point[p] = hit[0] + 1 if hit.size else 0
    return ranks, per_point, counts


def hormander_depth(frame: Sequence[VectorField], points, max_depth: int = 6, tol: float = 1e-9,
                    drift: VectorField | None = None) -> HormanderReport:
    """Smallest ``d <= max_depth`` such that brackets of depth <= d span R^n at every point.

    Failure is reported (``depth is None``) together with the point of lowest
    rank at ``max_depth``; ties go to the lowest point index.  With a drift the
    scan is repeated with ``Z_0`` admitted as a bracket generator and both
    depths are reported.
    """
    if max_depth < 1:
        raise ValueError("max_depth must be at least 1")
    n = frame[0].dimension
    cols = J.frozen(_as_columns(np.atleast_2d(points), n))
    fields = {j + 1: Z for j, Z in enumerate(frame)}
    gens = list(fields)
    ranks, per_point, counts = _depth_scan(fields, gens, gens, cols, n, max_depth, tol)
    final = ranks[-1]
    if np.all(per_point > 0):
        depth, worst, worst_rank = int(per_point.max()), None, None
    else:
        depth = None
        worst = int(np.argmin(final))  # argmin returns the first minimum
        worst_rank = int(final[worst])
    report = HormanderReport(depth, per_point, ranks, worst, worst_rank, max_depth, tol,
                             fields_per_depth=counts)
    if drift is not None:
        fields0 = dict(fields)
        fields0[0] = drift
        _, pp0, _ = _depth_scan(fields0, [0] + gens, gens, cols, n, max_depth, tol)
        report.per_point_depth_with_drift = pp0
        report.depth_with_drift = int(pp0.max()) if np.all(pp0 > 0) else None
    return report
