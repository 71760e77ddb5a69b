"""Tensor-product quadrature over boxes with density ``e^eta``, and cutoff sequences."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.special

from . import jet as J
from .expr import _as_columns
from .smooth import JetMap, SmoothFunction, as_function


class QuadratureError(ValueError):
    pass


@dataclass(frozen=True)
class QuadratureGrid:
    lower: np.ndarray
    upper: np.ndarray
    nodes_per_axis: tuple
    rule: str
    nodes: np.ndarray  # (N, n)
    weights: np.ndarray  # (N,)
    density: np.ndarray | None = None  # e^eta at the nodes; None means eta = 0

    @property
    def dimension(self) -> int:
        return self.lower.shape[0]

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    @property
    def measure_weights(self) -> np.ndarray:
        """Quadrature weights times ``e^eta``."""
        return self.weights if self.density is None else self.weights * self.density

    def with_log_weight(self, log_weight: SmoothFunction | None) -> "QuadratureGrid":
        if log_weight is None or log_weight.constant_value == 0.0:
            dens = None
        else:
            dens = np.exp(log_weight(self.nodes))
        return QuadratureGrid(self.lower, self.upper, self.nodes_per_axis, self.rule,
                              self.nodes, self.weights, dens)

    def contains(self, lo, hi) -> bool:
        return bool(np.all(np.asarray(lo) >= self.lower - 1e-12) and np.all(np.asarray(hi) <= self.upper + 1e-12))

    def integrate(self, integrand, weighted: bool = True) -> float:
        return integrate(self, integrand, weighted)

    def boundary_density_ratio(self) -> float:
        """Largest ``e^eta`` on the outermost node layer relative to the largest overall.

        Tail mass outside the box is the caller's responsibility; this number
        is the warning light for it.
        """
        if self.density is None:
            return 1.0
        lo = self.nodes.min(axis=0)
        hi = self.nodes.max(axis=0)
        edge = np.any((self.nodes == lo) | (self.nodes == hi), axis=1)
        return float(self.density[edge].max() / self.density.max())


def _axis_rule(lo: float, hi: float, m: int, rule: str, panels: int):
    if rule == "trapezoid":
        x = np.linspace(lo, hi, m)
        w = np.full(m, (hi - lo) / (m - 1))
        w[0] = w[-1] = w[0] / 2
        return x, w
    if rule == "gauss-legendre":
        t, wt = scipy.special.roots_legendre(m)
        edges = np.linspace(lo, hi, panels + 1)
        xs, ws = [], []
        for a, b in zip(edges[:-1], edges[1:]):
            xs.append((b - a) / 2 * t + (a + b) / 2)
            ws.append((b - a) / 2 * wt)
        return np.concatenate(xs), np.concatenate(ws)
    raise QuadratureError(f"unknown rule {rule!r}")


def build_grid(box: Sequence, nodes_per_axis, rule: str = "gauss-legendre", *,
               log_weight: SmoothFunction | None = None, panels: int = 1) -> QuadratureGrid:
    """Tensor grid on ``box = [(lo_1, hi_1), ..., (lo_n, hi_n)]``.

    ``panels > 1`` gives a composite Gauss rule (``nodes_per_axis`` nodes per panel).
    """
    box = np.asarray(box, dtype=float).reshape(-1, 2)
    n = box.shape[0]
    if np.isscalar(nodes_per_axis) or np.ndim(nodes_per_axis) == 0:
        nodes_per_axis = [int(nodes_per_axis)] * n
    nodes_per_axis = tuple(int(m) for m in nodes_per_axis)
    if len(nodes_per_axis) != n:
        raise QuadratureError("nodes_per_axis does not match the box dimension")
    if any(m < 2 for m in nodes_per_axis):
        raise QuadratureError("need at least 2 nodes per axis")
    if not np.all(np.isfinite(box)) or np.any(box[:, 1] <= box[:, 0]):
        raise QuadratureError(f"degenerate box {box.tolist()}")
    axes = [_axis_rule(lo, hi, m, rule, panels) for (lo, hi), m in zip(box, nodes_per_axis)]
    mesh = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    wmesh = np.meshgrid(*[a[1] for a in axes], indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=1)
    weights = np.prod(np.stack([w.ravel() for w in wmesh], axis=0), axis=0)
    grid = QuadratureGrid(box[:, 0].copy(), box[:, 1].copy(), nodes_per_axis, rule, nodes, weights)
    return grid.with_log_weight(log_weight) if log_weight is not None else grid


def integrate(grid: QuadratureGrid, integrand, weighted: bool = True) -> float:
    """Quadrature sum; ``integrand`` is a callable on (N, n) nodes or the node values."""
    vals = integrand(grid.nodes) if callable(integrand) else integrand
    vals = np.broadcast_to(np.asarray(vals, dtype=float), grid.weights.shape)
    bad = ~np.isfinite(vals)
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        raise QuadratureError(f"non-finite integrand value {vals[k]} at node {grid.nodes[k].tolist()}")
    w = grid.measure_weights if weighted else grid.weights
    return float(np.sum(w * vals))  # numpy sums contiguous float arrays pairwise


# ---------------------------------------------------------------------------
# cutoff profile and sequences

_P = np.polynomial.Polynomial
# C^3 smoothstep S(s) = 35 s^4 - 84 s^5 + 70 s^6 - 20 s^7 mapped onto [1/8, 1/4]
_SMOOTHSTEP = _P([0, 0, 0, 0, 35, -84, 70, -20])
_TRANSITION = 1.0 - _SMOOTHSTEP(_P([-1.0, 8.0]))
PLATEAU, SUPPORT = 1.0 / 8.0, 1.0 / 4.0


def _profile_taylor(t, r: int) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    a = np.abs(t)
    sign = np.where(t < 0, -1.0, 1.0)
    out = np.zeros((r + 1,) + t.shape)
    out[0] = np.where(a <= PLATEAU, 1.0, 0.0)
    mid = (a > PLATEAU) & (a < SUPPORT)
    poly = _TRANSITION
    for k in range(r + 1):
        vals = np.clip(poly(a), 0.0, 1.0) if k == 0 else poly(a)
        out[k] = np.where(mid, vals * sign**k / math.factorial(k), out[k] if k == 0 else 0.0)
        poly = poly.deriv()
    return out


class CutoffProfile(SmoothFunction):
    """``Phi``: 1 on ``|t| <= 1/8``, 0 on ``|t| >= 1/4``, degree-7 smoothstep in between."""

    dimension = 1
    label = "Phi"

    def jet(self, cols, order):
        return J.compose_univariate(_profile_taylor(cols[0], order), J.variable(1, cols, 1, order))


def profile_slope_constant(samples: int = 200001) -> float:
    """``sup_t 2 sqrt(t) |Phi'(t)|`` over the transition band.

    With ``t = d^2/s^2`` one has ``Gamma(Phi(t)) = (2 sqrt(t) Phi'(t))^2 Gamma(d) / s^2``.
    """
    t = np.linspace(PLATEAU, SUPPORT, samples)
    return float(np.max(2 * np.sqrt(t) * np.abs(_TRANSITION.deriv()(t)))) * (1 + 1e-6)


def euclidean_distance(n: int, delta: float = 1e-6) -> SmoothFunction:
    """``sqrt(|x|^2 + delta^2)``: a smooth surrogate of ``|x|`` with ``Gamma <= 1``."""
    return JetMap(lambda x: J.sqrt(sum(xi * xi for xi in x) + delta**2), n,
                  f"sqrt(|x|^2+{delta:g}^2)", coordinates=True)


def homogeneous_norm(weights: Sequence[int], delta: float = 1e-6) -> SmoothFunction:
    """``sum_i (x_i^2 + delta^2)^(1/(2 w_i))`` for coordinate weights ``w_i``."""
    w = [int(x) for x in weights]

    def fn(x):
        return sum(J.compose_univariate(J.power_taylor(xi.value * xi.value + delta**2, xi.order, 1 / (2 * wi)),
                                        xi * xi + delta**2)
                   for xi, wi in zip(x, w))

    return JetMap(fn, len(w), f"homogeneous-norm{tuple(w)}", coordinates=True)


@dataclass
class CutoffResult:
    k: int
    scale: float
    xi: SmoothFunction
    sup_gamma: float
    bound: float
    gamma_bound_distance: float
    fourth_power_margin: float  # min over samples of 16 xi^4/k - Gamma(xi^4)
    min_value: float
    max_value: float
    mode: str

    @property
    def ok(self) -> bool:
        return self.sup_gamma <= self.bound + 1e-9 and self.fourth_power_margin >= -1e-9

    def to_dict(self) -> dict:
        return {k: (v if not isinstance(v, SmoothFunction) else v.label) for k, v in self.__dict__.items()}


def cutoff_scale(k: int, gamma_bound: float, mode: str = "certified") -> float:
    if mode == "literal":
        return float(k)
    if mode != "certified":
        raise ValueError(f"unknown cutoff mode {mode!r}")
    return max(float(k), profile_slope_constant() * math.sqrt(gamma_bound * k))


def transition_samples(n: int, scale: float, count: int = 1024, seed: int = 0) -> np.ndarray:
    """Points covering the support of ``Phi(|x|^2 / scale^2)``, densest across the transition band."""
    from .sampling import sobol_points

    radius = 0.55 * scale
    ray = np.zeros((2001, n))
    ray[:, 0] = np.linspace(0.0, radius, 2001)
    cloud = sobol_points([(-radius, radius)] * n, count, seed)
    return np.vstack([ray, cloud])


def cutoff(k: int, distance: SmoothFunction, triple, sample_points=None, *,
           gamma_bound: float | None = None, mode: str = "certified") -> CutoffResult:
    """Build ``xi_k = Phi(d^2 / s_k^2)`` and certify ``Gamma(xi_k) <= 1/k`` on samples.

    ``mode="literal"`` uses ``s_k = k``.  No profile with the required plateau
    can then meet the bound for small ``k`` (its slope reaches 8 somewhere, so
    ``Gamma(xi_k) >= 32/k^2`` there).  ``mode="certified"`` widens the scale to
    ``s_k = max(k, C_Phi sqrt(C_0 k))``, where ``C_0`` bounds ``Gamma(d)``.
    That keeps the sequence increasing in ``k`` with limit 1 and makes the
    bound hold by construction.
    """
    if k < 1:
        raise ValueError("k must be a positive integer")
    n = distance.dimension
    if gamma_bound is None:
        probe = sample_points if sample_points is not None else transition_samples(n, float(k))
        ploc = triple.at(np.atleast_2d(probe), 1)
        D = ploc.fn(distance)
        C0 = float(ploc.gamma(D, D).value.max())
    else:
        C0 = float(gamma_bound)
    s = cutoff_scale(k, C0, mode)
    pts = np.atleast_2d(sample_points if sample_points is not None else transition_samples(n, s))
    loc = triple.at(pts, 1)

    def xi_jet(cols, order):
        d = distance.jet(cols, order)
        t = d * d / (s * s)
        return J.compose_univariate(_profile_taylor(t.value, order), t)

    xi = JetMap(xi_jet, n, f"xi_{k}")
    X = loc.fn(xi)
    g = loc.gamma(X, X).value
    X4 = X ** 4
    g4 = loc.gamma(X4, X4).value
    xv = X.value
    margin = float(np.min(16 * xv**4 / k - g4))
    return CutoffResult(k, s, xi, float(g.max()), 1.0 / k, C0, margin, float(xv.min()), float(xv.max()), mode)
