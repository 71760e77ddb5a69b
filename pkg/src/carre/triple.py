"""Diffusion Markov triples built from a frame and a log-weight.

The measure is ``e^eta dx``; with ``w_j = div Z_j + Z_j eta`` the generator is

    L g = sum_j (Z_j Z_j g + w_j Z_j g),

which is the frame Laplacian plus the divergence and drift terms.  All
evaluation goes through :meth:`MarkovTriple.at`, which expands functions into
jets at a batch of points and then combines jets: Gamma consumes one
derivative order, L two, Gamma_2 three.

:class:`GeneralOperator` covers arbitrary second-order operators
``sum a_ij d_i d_j + sum b_i d_i``; its carre du champ is obtained by
polarization ``(L(fg) - f Lg - g Lf) / 2``, which consumes two orders.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from . import jet as J
from .expr import _as_columns
from .fields import LinearCombination, VectorField
from .parallel import map_points
from .quad import QuadratureGrid, build_grid, integrate
from .reports import Entry, IdentityReport, WorstTracker
from .smooth import Constant, JetMap, SmoothFunction, TensorBump, as_function


class _LocalBase:
    """Jets of functions and operators at a fixed batch of points."""

    def __init__(self, op, points, order: int):
        self.op = op
        self.n = op.dimension
        self.order = int(order)
        self.single = np.ndim(points) == 1
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        self.cols = J.frozen(_as_columns(points, self.n))
        self.cache: dict = {}
        self._fns: dict = {}

    def fn(self, f, order: int | None = None) -> J.Jet:
        """Jet of ``f`` (number, expression text or SmoothFunction) at the points."""
        r = self.order if order is None else order
        if isinstance(f, J.Jet):
            return f
        f = as_function(f, self.n)
        key = (id(f), r)
        hit = self._fns.get(key)
        if hit is None:
            hit = (f, f.jet(self.cols, r))
            self._fns[key] = hit
        return hit[1]

    def const(self, c: float, order: int | None = None) -> J.Jet:
        return J.Jet.constant(c, self.cols, self.order if order is None else order)

    def gamma_sqrt_reg(self, U: J.Jet, epsilon: float) -> J.Jet:
        """``Gamma(Gamma(u)) / (4 (Gamma(u) + epsilon))``."""
        if epsilon <= 0:
            raise ValueError("epsilon must be positive")
        G = self.gamma(U, U)
        GG = self.gamma(G, G)
        return GG / (4.0 * (G.truncate(GG.order) + epsilon))

    def gamma2(self, F: J.Jet, G: J.Jet | None = None) -> J.Jet:
        """``(L Gamma(f,g) - Gamma(f, Lg) - Gamma(g, Lf)) / 2``."""
        if G is None:
            G = F
        LG = self.L(G)
        LF = LG if G is F else self.L(F)
        out = self.L(self.gamma(F, G)) - self.gamma(F, LG) - self.gamma(G, LF)
        return _align(out * 0.5)


def _align(*jets):
    q = min(j.order for j in jets)
    out = [j.truncate(q) for j in jets]
    return out[0] if len(out) == 1 else out


def _sum(jets, like: J.Jet) -> J.Jet:
    out = None
    for j in jets:
        if j is None:
            continue
        out = j if out is None else out + j
    return out if out is not None else J.Jet.constant(0.0, like.point, like.order)


class MarkovTriple:
    """Frame ``Z_1..Z_m`` on R^n with measure ``e^eta dx``.

    Immutable after assembly.  ``carnot`` marks catalog groups (``eta = 0`` and
    divergence-free frame); ``distance`` is an optional smooth surrogate used
    by the cutoff construction.
    """

    gamma_order = 1
    L_order = 2
    gamma2_order = 3

    def __init__(self, frame: Sequence[VectorField], log_weight=None, name: str = "custom",
                 carnot: bool = False, distance: SmoothFunction | None = None, meta: dict | None = None):
        frame = [Z if isinstance(Z, VectorField) else VectorField(list(Z), f"Z{j + 1}")
                 for j, Z in enumerate(frame)]
        if not frame:
            raise ValueError("a frame needs at least one vector field")
        n = frame[0].dimension
        for Z in frame:
            if Z.dimension != n:
                raise ValueError(f"field {Z.label} has dimension {Z.dimension}, expected {n}")
        self.frame = tuple(frame)
        self.dimension = n
        self.name = name
        self.carnot = carnot
        self.distance = distance
        self.meta = dict(meta or {})
        lw = None if log_weight is None else as_function(log_weight, n)
        if lw is not None and lw.constant_value is not None:
            lw = None  # a constant weight only rescales the measure
        self.log_weight = lw
        self._divs = [self._divergence(Z) for Z in self.frame]
        self._drift_coeffs = [None if lw is None else self._derivative_of_weight(Z) for Z in self.frame]

    def __repr__(self) -> str:
        return f"MarkovTriple({self.name!r}, n={self.dimension}, m={len(self.frame)})"

    @property
    def m(self) -> int:
        return len(self.frame)

    # -- derived data -------------------------------------------------------
    def _divergence(self, Z: VectorField) -> SmoothFunction | None:
        consts = Z.constant_coefficients()
        if all(c is not None for c in consts):
            return None

        def div(cols, r):
            jets = Z.coefficient_jets(cols, r + 1, {})
            return _sum([J.partial(c, i + 1) for i, c in enumerate(jets)],
                        J.Jet.constant(0.0, cols, r))

        return JetMap(div, self.dimension, f"div {Z.label}")

    def _derivative_of_weight(self, Z: VectorField) -> SmoothFunction:
        eta = self.log_weight
        return JetMap(lambda cols, r: Z.apply_jet(eta.jet(cols, r + 1), {}), self.dimension,
                      f"{Z.label}({eta.label})")

    def divergence(self, j: int) -> SmoothFunction:
        """``div Z_j = sum_i d_i Z_j^i`` (``j`` is 1-based)."""
        d = self._divs[j - 1]
        return d if d is not None else Constant(0.0, self.dimension)

    @property
    def drift(self) -> VectorField | None:
        """``Z_0 = sum_j (Z_j eta) Z_j``; ``None`` when eta is constant."""
        if self.log_weight is None:
            return None
        return LinearCombination(list(zip(self._drift_coeffs, self.frame)), "Z0")

    def at(self, points, order: int = J.DEFAULT_ORDER) -> "Local":
        return Local(self, points, order)

    def operator(self) -> "GeneralOperator":
        """The same generator written as ``sum a_ij d_i d_j + sum b_i d_i``."""
        return GeneralOperator.from_triple(self)


class Local(_LocalBase):
    """A triple expanded at a batch of points; all methods take and return jets."""

    def __init__(self, op: MarkovTriple, points, order: int):
        super().__init__(op, points, order)
        self._w: dict = {}

    def Z(self, j: int, F: J.Jet) -> J.Jet:
        return self.op.frame[j - 1].apply_jet(F, self.cache)

    def apply(self, V: VectorField, F: J.Jet) -> J.Jet:
        return V.apply_jet(F, self.cache)

    def grad(self, F: J.Jet) -> list:
        return [Z.apply_jet(F, self.cache) for Z in self.op.frame]

    def gamma(self, F, G=None) -> J.Jet:
        F = self.fn(F)
        G = F if G is None else self.fn(G)
        F, G = _align(F, G)
        if F.order < 1:
            raise J.JetError("order exhausted: Gamma needs jets of order >= 1")
        zf = self.grad(F)
        zg = zf if G is F else self.grad(G)
        return _sum([a * b for a, b in zip(zf, zg)], zf[0])

    def weights(self, q: int) -> list:
        """Jets of ``div Z_j + Z_j eta`` at order ``q`` (``None`` where identically 0)."""
        if q in self._w:
            return self._w[q]
        out = []
        for div, deta in zip(self.op._divs, self.op._drift_coeffs):
            parts = [f.jet(self.cols, q) for f in (div, deta) if f is not None]
            out.append(None if not parts else (parts[0] if len(parts) == 1 else parts[0] + parts[1]))
        self._w[q] = out
        return out

    def delta_Z(self, F: J.Jet) -> J.Jet:
        F = self.fn(F)
        return _sum([Z.apply_jet(Z.apply_jet(F, self.cache), self.cache) for Z in self.op.frame],
                    J.Jet.constant(0.0, F.point, F.order - 2))

    def L(self, F) -> J.Jet:
        F = self.fn(F)
        if F.order < 2:
            raise J.JetError("order exhausted: L needs jets of order >= 2")
        q = F.order - 2
        zf = self.grad(F)
        terms = [Z.apply_jet(z, self.cache) for Z, z in zip(self.op.frame, zf)]
        for w, z in zip(self.weights(q), zf):
            if w is not None:
                terms.append(w * z.truncate(q))
        return _sum(terms, J.Jet.constant(0.0, F.point, q))


class GeneralOperator:
    """``L f = sum_ij a_ij d_i d_j f + sum_i b_i d_i f`` with ``a`` stored symmetrized."""

    gamma_order = 2
    L_order = 2
    gamma2_order = 4

    def __init__(self, a, b=None, name: str = "operator", log_weight=None):
        a = [list(row) for row in a]
        n = len(a)
        if any(len(row) != n for row in a):
            raise ValueError("second-order coefficients must form a square matrix")
        self.dimension = n
        self.name = name
        raw = [[as_function(a[i][j], n) for j in range(n)] for i in range(n)]
        self.a = [[raw[i][j] if (i == j or raw[i][j] is raw[j][i]) else _half_sum(raw[i][j], raw[j][i])
                   for j in range(n)] for i in range(n)]
        self.b = [as_function(0.0 if b is None else b[i], n) for i in range(n)]
        self.log_weight = None if log_weight is None else as_function(log_weight, n)

    def __repr__(self) -> str:
        return f"GeneralOperator({self.name!r}, n={self.dimension})"

    @classmethod
    def nondivergence(cls, a, name: str = "nondivergence") -> "GeneralOperator":
        return cls(a, None, name)

    @classmethod
    def divergence(cls, a, name: str = "divergence") -> "GeneralOperator":
        """``sum_ij d_j (a_ij d_i f)``, i.e. first-order part ``b_i = sum_j d_j a_ij``."""
        n = len(a)
        A = [[as_function(a[i][j], n) for j in range(n)] for i in range(n)]

        def b_i(i):
            def fn(cols, r):
                return _sum([J.partial(A[i][j].jet(cols, r + 1), j + 1) for j in range(n)],
                            J.Jet.constant(0.0, cols, r))
            return JetMap(fn, n, f"b{i + 1}")

        return cls(A, [b_i(i) for i in range(n)], name)

    @classmethod
    def dalembert(cls) -> "GeneralOperator":
        """``f_xx - f_yy`` on R^2."""
        return cls([[1.0, 0.0], [0.0, -1.0]], None, "dalembert")

    @classmethod
    def derivative(cls) -> "GeneralOperator":
        """``f_x`` on R."""
        return cls([[0.0]], [1.0], "derivative")

    @classmethod
    def from_triple(cls, T: MarkovTriple) -> "GeneralOperator":
        """Expand ``sum_j Z_j Z_j + w_j Z_j`` into coefficient form via raw partials."""
        n = T.dimension

        def coeff_jets(cols, r):
            return [Z.coefficient_jets(cols, r, {}) for Z in T.frame]

        def a_ik(i, k):
            def fn(cols, r):
                zs = coeff_jets(cols, r)
                return _sum([z[i] * z[k] for z in zs], J.Jet.constant(0.0, cols, r))
            return JetMap(fn, n, f"a{i + 1}{k + 1}")

        def b_k(k):
            def fn(cols, r):
                out = []
                for j, Z in enumerate(T.frame):
                    z = Z.coefficient_jets(cols, r + 1, {})
                    zr = [c.truncate(r) for c in z]
                    # Z_j(Z_j^k) = sum_i Z_j^i d_i Z_j^k
                    out += [zr[i] * J.partial(z[k], i + 1) for i in range(n)]
                    for f in (T._divs[j], T._drift_coeffs[j]):
                        if f is not None:
                            out.append(f.jet(cols, r) * zr[k])
                return _sum(out, J.Jet.constant(0.0, cols, r))
            return JetMap(fn, n, f"b{k + 1}")

        op = cls([[a_ik(i, k) for k in range(n)] for i in range(n)], [b_k(k) for k in range(n)],
                 f"{T.name} (coefficient form)", T.log_weight)
        return op

    def at(self, points, order: int = J.DEFAULT_ORDER) -> "OperatorLocal":
        return OperatorLocal(self, points, order)


def _half_sum(f: SmoothFunction, g: SmoothFunction) -> SmoothFunction:
    return JetMap(lambda cols, r: (f.jet(cols, r) + g.jet(cols, r)) * 0.5, f.dimension,
                  f"sym({f.label},{g.label})")


class OperatorLocal(_LocalBase):
    def L(self, F) -> J.Jet:
        F = self.fn(F)
        if F.order < 2:
            raise J.JetError("order exhausted: L needs jets of order >= 2")
        q = F.order - 2
        n = self.n
        first = [J.partial(F, i + 1) for i in range(n)]
        terms = []
        for i in range(n):
            for j in range(n):
                a = self.op.a[i][j]
                if a.constant_value == 0.0:
                    continue
                dij = J.partial(first[i], j + 1)
                c = a.constant_value
                terms.append(dij * c if c is not None else a.jet(self.cols, q) * dij)
        for i in range(n):
            b = self.op.b[i]
            if b.constant_value == 0.0:
                continue
            d = first[i].truncate(q)
            c = b.constant_value
            terms.append(d * c if c is not None else b.jet(self.cols, q) * d)
        return _sum(terms, J.Jet.constant(0.0, F.point, q))

    def gamma(self, F, G=None) -> J.Jet:
        F = self.fn(F)
        G = F if G is None else self.fn(G)
        F, G = _align(F, G)
        LF = self.L(F)
        LG = LF if G is F else self.L(G)
        q = LF.order
        return (self.L(F * G) - F.truncate(q) * LG - G.truncate(q) * LF) * 0.5


# ---------------------------------------------------------------------------
# pointwise entry points

def _values(jet: J.Jet, single: bool):
    v = jet.value
    return float(v) if single or v.ndim == 0 else v.copy()


def gamma(T, f, g, point):
    loc = T.at(point, T.gamma_order)
    return _values(loc.gamma(f, g), loc.single)


def operator_L(T, f, point):
    loc = T.at(point, T.L_order)
    return _values(loc.L(f), loc.single)


def gamma2(T, f, g, point):
    loc = T.at(point, T.gamma2_order)
    return _values(loc.gamma2(loc.fn(f), loc.fn(g)), loc.single)


def gamma_from_L(op, f, g, point):
    """Carre du champ of any operator exposing ``at(...).L`` by polarization."""
    loc = op.at(point, 2)
    F, G = loc.fn(f), loc.fn(g)
    out = (loc.L(F * G) - F.truncate(0) * loc.L(G) - G.truncate(0) * loc.L(F)) * 0.5
    return _values(out, loc.single)


def gamma_sqrt_reg(T, u, point, epsilon: float):
    loc = T.at(point, 2 * T.gamma_order)
    return _values(loc.gamma_sqrt_reg(loc.fn(u), epsilon), loc.single)


# ---------------------------------------------------------------------------
# structural validation

_PSI = {
    "cube": (lambda v, r: _poly_taylor(np.array([0.0, 0.0, 0.0, 1.0]), v, r), lambda v: 3 * v**2),
    "tanh": (J.tanh_taylor, lambda v: 1 - np.tanh(v) ** 2),
    "exp-1": (lambda v, r: _shift_first(J.exp_taylor(v, r), -1.0), np.exp),
}


def _poly_taylor(c: np.ndarray, v, r: int) -> np.ndarray:
    """Taylor coefficients of the polynomial ``sum c_k s^k`` at ``v``."""
    p = np.polynomial.Polynomial(c)
    v = np.asarray(v, dtype=float)
    out, fact = [], 1.0
    for k in range(r + 1):
        out.append(p(v) / fact)
        p = p.deriv()
        fact *= k + 1
    return np.stack(out)


def _shift_first(t: np.ndarray, c: float) -> np.ndarray:
    t = t.copy()
    t[0] = t[0] + c
    return t


def _scaled(diff, *terms):
    """Residual relative to ``1 + |terms|``."""
    mag = sum(np.abs(np.asarray(t)) for t in terms)
    return np.abs(np.asarray(diff)) / (1.0 + mag)


def _default_grid(points: np.ndarray, n: int, log_weight) -> QuadratureGrid:
    lo, hi = points.min(axis=0), points.max(axis=0)
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    box = np.stack([lo - 0.05 * span, hi + 0.05 * span], axis=1)
    if log_weight is None or log_weight.constant_value is not None:
        # polynomial integrands: one Gauss panel per axis is exact
        return build_grid(box, 10 if n <= 2 else (8 if n <= 4 else 6), log_weight=log_weight)
    # e^eta makes the integrands transcendental; keep panels about 1.5 wide
    if n <= 3:
        panels = max(1, math.ceil(float(np.max(box[:, 1] - box[:, 0])) / 1.5))
        return build_grid(box, 10 if n <= 2 else 8, log_weight=log_weight, panels=panels)
    # n >= 4: a full grid is too large, so shrink the bump box around the samples' centre
    mid = box.mean(axis=1)
    half = np.minimum((box[:, 1] - box[:, 0]) / 2, 1.0 if n == 4 else 0.3)
    return build_grid(np.stack([mid - half, mid + half], axis=1), 10 if n == 4 else 6, log_weight=log_weight)


def validate_axioms(T, pairs: Sequence, points, tol: float = 1e-7, grid: QuadratureGrid | None = None,
                    compact: SmoothFunction | None = None, ibp: bool = True) -> IdentityReport:
    """Check the structural identities of a triple (or general operator) on samples.

    ``pairs`` is a list of ``(f, g)``; every function appearing in a pair is
    also used for the one-function checks.  Residuals are measured relative to
    ``1 + |terms|`` and an entry passes when its largest residual is below
    ``tol``.  Integration by parts uses ``compact`` (default: a product bump on
    the grid box) as the compactly supported partner.
    """
    n = T.dimension
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    fs = []
    for f, g in pairs:
        for h in (f, g):
            h = as_function(h, n)
            if all(h is not k for k in fs):
                fs.append(h)
    pairs = [(as_function(f, n), as_function(g, n)) for f, g in pairs]
    is_triple = isinstance(T, MarkovTriple)
    coeff_op = T.operator() if is_triple else None
    order = max(T.gamma_order, T.L_order)

    def pointwise(chunk):
        loc = T.at(chunk, order)
        out = {}
        one = loc.const(1.0)
        out["gamma_one"] = np.abs(loc.gamma(one, loc.fn(pairs[0][1])).value) if pairs else np.zeros(len(chunk))
        out["L_one"] = np.abs(loc.L(one).value)
        for p, (f, g) in enumerate(pairs):
            F, G = loc.fn(f), loc.fn(g)
            gfg = loc.gamma(F, G).value
            ggf = loc.gamma(G, F).value
            gff = loc.gamma(F, F).value
            ggg = loc.gamma(G, G).value
            out[f"sym{p}"] = _scaled(gfg - ggf, gfg, ggf)
            lin = loc.gamma(F + 2.0 * G, G).value
            out[f"bilin{p}"] = _scaled(lin - gfg - 2 * ggg, lin, gfg, 2 * ggg)
            for name, (taylor, dpsi) in _PSI.items():
                PF = J.compose_univariate(taylor(F.value, F.order), F)
                lhs = loc.gamma(PF, G).value
                rhs = dpsi(F.value) * gfg
                out[f"chain-{name}{p}"] = _scaled(lhs - rhs, lhs, rhs)
            prod = loc.gamma(F * G, G).value
            out[f"prod{p}"] = _scaled(prod - F.value * ggg - G.value * gfg, prod, F.value * ggg, G.value * gfg)
            sq = loc.gamma(F * F, G * G).value
            out[f"sq{p}"] = _scaled(sq - 4 * F.value * G.value * gfg, sq, 4 * F.value * G.value * gfg)
            cs = np.abs(gfg) - np.sqrt(np.maximum(gff, 0) * np.maximum(ggg, 0))
            out[f"cs{p}"] = np.maximum(cs, 0.0) / (1.0 + np.abs(gfg))
            if coeff_op is not None:
                oloc = coeff_op.at(chunk, 2)
                pol = oloc.gamma(oloc.fn(f), oloc.fn(g)).value
                out[f"pol{p}"] = _scaled(pol - gfg, pol, gfg)
        for k, f in enumerate(fs):
            F = loc.fn(f)
            out[f"pos{k}"] = loc.gamma(F, F).value
            out[f"val{k}"] = F.value
        return out

    vals = map_points(pointwise, pts)

    def entry(name, keys, labels=None):
        tr = WorstTracker()
        for idx, key in enumerate(keys):
            tr.offer(vals[key], pts, labels[idx] if labels else None, idx)
        worst = tr.best.value if tr.best else 0.0
        return Entry(name, worst, bool(worst < tol), tr.best)

    P = range(len(pairs))
    plabels = [f"({f.label}, {g.label})" for f, g in pairs]
    entries = [
        entry("symmetry", [f"sym{p}" for p in P], plabels),
        entry("bilinearity", [f"bilin{p}" for p in P], plabels),
    ]
    for name in _PSI:
        entries.append(entry(f"chain-rule[{name}]", [f"chain-{name}{p}" for p in P], plabels))
    entries.append(entry("product-rule", [f"prod{p}" for p in P], plabels))
    entries.append(entry("square-product", [f"sq{p}" for p in P], plabels))
    entries.append(entry("gamma-of-constant", ["gamma_one"]))
    entries.append(entry("L-of-constant", ["L_one"]))

    # positivity: the witness is the most negative Gamma(f)
    tr = WorstTracker()
    for k, f in enumerate(fs):
        tr.offer(-vals[f"pos{k}"], pts, f.label, k)
    neg = tr.best.value if tr.best else -np.inf
    pos_ok = bool(neg <= tol)
    entries.append(Entry("positivity", max(neg, 0.0), pos_ok, tr.best if not pos_ok else None,
                         {"min_gamma": -neg}))

    cs = entry("cauchy-schwarz", [f"cs{p}" for p in P], plabels)
    if not pos_ok:
        cs.passed = True
        cs.detail["skipped"] = "positivity fails, the inequality has no content"
    entries.append(cs)

    if coeff_op is not None:
        entries.append(entry("polarization", [f"pol{p}" for p in P], plabels))

    # nondegeneracy, contrapositive form on samples
    bad = []
    for k, f in enumerate(fs):
        if np.max(vals[f"pos{k}"]) < tol:
            osc = float(np.ptp(vals[f"val{k}"]))
            if osc >= tol:
                bad.append((f.label, osc))
    entries.append(Entry("nondegeneracy", float(max((o for _, o in bad), default=0.0)), not bad,
                         None, {"degenerate_nonconstant": [b[0] for b in bad]}))

    if ibp:
        lw = getattr(T, "log_weight", None)
        if grid is None:
            grid = _default_grid(pts, n, lw)
        if compact is None:
            compact = TensorBump(grid.lower, grid.upper)
        def integrands(nodes):
            loc = T.at(nodes, 2)
            G = loc.fn(compact, T.gamma_order)
            out = {}
            for k, f in enumerate(fs):
                F = loc.fn(f)
                out[f"gamma{k}"] = loc.gamma(F, G).value
                out[f"gLf{k}"] = G.value * loc.L(F).value
            return out

        iv = map_points(integrands, grid.nodes)
        ibp_worst, ibp_label = 0.0, None
        for k, f in enumerate(fs):
            a = integrate(grid, iv[f"gamma{k}"])
            b = -integrate(grid, iv[f"gLf{k}"])
            scale = 1.0 + integrate(grid, np.abs(iv[f"gamma{k}"])) + integrate(grid, np.abs(iv[f"gLf{k}"]))
            res = abs(a - b) / scale
            if res > ibp_worst or ibp_label is None:
                ibp_worst, ibp_label = res, f.label
        entries.append(Entry("integration-by-parts", ibp_worst, bool(ibp_worst < tol),
                             None, {"function": ibp_label, "nodes": grid.size}))

    return IdentityReport(f"axioms[{T.name}]", entries, tol, meta={"points": len(pts), "pairs": len(pairs)})
