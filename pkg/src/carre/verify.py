"""Numerical certificates for stable solutions of ``L u + F(u) = 0`` and related identities.

Every check samples points (or quadrature nodes), expands the relevant
functions into jets there and compares two evaluation routes.  A sampled
check can refute an inequality but only supplies evidence for it; the reports
say which one happened.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from . import jet as J
from .fields import Bracket
from .parallel import map_points
from .quad import QuadratureGrid, integrate
from .reports import Entry, IdentityReport, InequalityReport, SpectrumReport, Witness, WorstTracker
from .sampling import random_polynomial_text, sobol_points
from .smooth import Bump, Expression, SmoothFunction, as_function, derivative_values, univariate
from .triple import MarkovTriple, _scaled


class ConfigurationError(ValueError):
    pass


@dataclass
class ProblemInstance:
    """``L u + F(u) = 0`` for the generator of ``triple``, integrated over ``grid``."""

    triple: MarkovTriple
    u: SmoothFunction
    F: SmoothFunction
    grid: QuadratureGrid

    def __post_init__(self):
        n = self.triple.dimension
        self.u = as_function(self.u, n)
        self.F = univariate(self.F)
        if self.grid.dimension != n:
            raise ConfigurationError(f"grid is {self.grid.dimension}-dimensional, triple is {n}-dimensional")
        if self.grid.density is None and self.triple.log_weight is not None:
            self.grid = self.grid.with_log_weight(self.triple.log_weight)


# ---------------------------------------------------------------------------
# residual of the equation

def default_test_bumps(grid: QuadratureGrid, per_axis: int = 3) -> list:
    """A small lattice of radial bumps whose supports lie inside the grid box."""
    lo, hi = grid.lower, grid.upper
    rho = float(np.min(hi - lo)) / (2 * per_axis)
    axes = [np.linspace(a + rho, b - rho, per_axis) for a, b in zip(lo, hi)]
    centers = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)
    return [Bump(c, rho) for c in centers]


def _apply(F: SmoothFunction, values: np.ndarray) -> np.ndarray:
    """Values of a univariate function at an array of arguments."""
    values = np.asarray(values, dtype=float)
    return F(values.reshape(-1, 1)).reshape(values.shape)


def _pointwise_equation_values(T, u, F, pts) -> np.ndarray:
    def fn(chunk):
        loc = T.at(chunk, 2)
        U = loc.fn(u)
        return {"r": np.abs(loc.L(U).value + _apply(F, U.value))}
    return map_points(fn, pts)["r"]


def _pointwise_equation(p: ProblemInstance, pts: np.ndarray) -> np.ndarray:
    return _pointwise_equation_values(p.triple, p.u, p.F, pts)


def residual(p: ProblemInstance, points=None, test_functions: Sequence | None = None,
             tol: float = 1e-6) -> IdentityReport:
    """Pointwise ``sup |L u + F(u)|`` and the weak-form residual.

    The weak residual is ``max_phi |int Gamma(u, phi) dmu - int F(u) phi dmu| / ||phi||``
    with the ``L^2(mu)`` norm.  ``points`` defaults to the grid nodes.
    """
    pts = p.grid.nodes if points is None else np.atleast_2d(points)
    r = _pointwise_equation(p, pts)
    tr = WorstTracker()
    tr.offer(r, pts)
    pw = float(r.max()) if r.size else 0.0
    tests = default_test_bumps(p.grid) if test_functions is None else [as_function(t, p.triple.dimension)
                                                                          for t in test_functions]

    def weak(chunk):
        loc = p.triple.at(chunk, 1)
        U = loc.fn(p.u)
        out = {"Fu": _apply(p.F, U.value)}
        for k, phi in enumerate(tests):
            P = loc.fn(phi)
            out[f"g{k}"] = loc.gamma(U, P).value
            out[f"phi{k}"] = P.value
        return out

    wv = map_points(weak, p.grid.nodes)
    worst_w, worst_k = 0.0, None
    for k in range(len(tests)):
        phi = wv[f"phi{k}"]
        norm = np.sqrt(integrate(p.grid, phi * phi))
        if norm == 0.0:
            continue
        val = abs(integrate(p.grid, wv[f"g{k}"]) - integrate(p.grid, wv["Fu"] * phi)) / norm
        if worst_k is None or val > worst_w:
            worst_w, worst_k = val, k
    entries = [
        Entry("pointwise", pw, pw < tol, tr.best),
        Entry("weak", worst_w, worst_w < tol, None,
              {"test_function": tests[worst_k].label if worst_k is not None else None, "tests": len(tests)}),
    ]
    return IdentityReport("residual", entries, tol, meta={"points": len(pts)})


# ---------------------------------------------------------------------------
# stability of the second variation

def bump_basis(grid: QuadratureGrid, per_axis, overlap: float = 3.0, power: int = 4) -> list:
    """Radial bumps on an interior lattice; radius ``overlap`` times the spacing.

    Centers are placed so that every support lies inside the grid box.
    """
    n = grid.dimension
    per_axis = [int(per_axis)] * n if np.ndim(per_axis) == 0 else [int(m) for m in per_axis]
    lo, hi = grid.lower, grid.upper
    spacing = (hi - lo) / (np.asarray(per_axis) - 1 + 2 * overlap)
    rho = float(overlap * np.min(spacing))
    axes = [np.linspace(lo[i] + rho, hi[i] - rho, per_axis[i]) if per_axis[i] > 1
            else np.array([(lo[i] + hi[i]) / 2]) for i in range(n)]
    centers = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)
    return [Bump(c, rho, power) for c in centers]


def stability_matrices(p: ProblemInstance, basis: Sequence[SmoothFunction]):
    """``A_ij = int Gamma(phi_i, phi_j) - F'(u) phi_i phi_j dmu`` and ``M_ij = int phi_i phi_j dmu``."""
    T = p.triple
    nodes = p.grid.nodes
    w = p.grid.measure_weights

    def fn(chunk):
        loc = T.at(chunk, 1)
        U = loc.fn(p.u)
        out = {"dF": derivative_values(p.F, U.value)}
        for i, phi in enumerate(basis):
            P = loc.fn(phi)
            out[f"v{i}"] = P.value
            for j, z in enumerate(loc.grad(P)):
                out[f"z{i}_{j}"] = z.value
        return out

    vals = map_points(fn, nodes)
    Phi = np.stack([vals[f"v{i}"] for i in range(len(basis))])
    bad = ~np.isfinite(vals["dF"])
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        raise ConfigurationError(f"F'(u) is not finite at node {nodes[k].tolist()}")
    A = -(Phi * (w * vals["dF"])) @ Phi.T
    for j in range(T.m):
        G = np.stack([vals[f"z{i}_{j}"] for i in range(len(basis))])
        A += (G * w) @ G.T
    M = (Phi * w) @ Phi.T
    return (A + A.T) / 2, (M + M.T) / 2


def stability_spectrum(p: ProblemInstance, basis_size=None, tol: float = 1e-6, k: int = 5,
                       basis: Sequence[SmoothFunction] | None = None, overlap: float = 3.0) -> SpectrumReport:
    """Smallest generalized eigenvalues of the second variation on a bump basis.

    ``lambda_min >= -tol`` certifies stability on the tested subspace only;
    ``lambda_min < -tol`` is a genuine counterexample up to quadrature error.
    """
    if basis is None:
        if basis_size is None:
            raise ConfigurationError("give basis_size or an explicit basis")
        basis = bump_basis(p.grid, basis_size, overlap)
        desc = f"radial bumps ((1-|x-c|^2/rho^2)_+)^4, {len(basis)} on an interior lattice, overlap {overlap}"
    else:
        desc = f"{len(basis)} user-supplied functions"
    for phi in basis:
        if isinstance(phi, Bump):
            lo, hi = phi.support_box()
            if not p.grid.contains(lo, hi):
                raise ConfigurationError(f"{phi.label} is not supported inside the grid box")
    A, M = stability_matrices(p, basis)
    try:
        chol = scipy.linalg.cholesky(M, lower=True)
    except np.linalg.LinAlgError as exc:
        raise ConfigurationError(f"mass matrix is not positive definite ({exc}); the basis is degenerate") from exc
    piv = np.diag(chol)
    # pivots this small mean cond(M) > 1e14: numerically dependent basis
    if piv.min() <= 1e-7 * piv.max():
        raise ConfigurationError(f"mass matrix is numerically singular (pivot ratio {piv.min() / piv.max():.1e}); "
                                 "the basis is degenerate")
    k = min(k, len(basis))
    vals, vecs = scipy.linalg.eigh(A, M, subset_by_index=[0, k - 1])
    resid = float(np.max(np.abs(A @ vecs - (M @ vecs) * vals))) if k else 0.0
    return SpectrumReport(desc, A.shape, vals, tol, vecs[:, 0].copy(),
                          meta={"eigen_residual": resid, "basis": len(basis), "nodes": p.grid.size})


# ---------------------------------------------------------------------------
# geometric Poincare inequality

def default_epsilon(sup_gamma: float) -> float:
    return 1e-8 * (1.0 + sup_gamma)


def random_bumps(grid: QuadratureGrid, count: int, seed: int = 0, min_radius: float | None = None) -> list:
    """Radial bumps with random centers and radii, each supported inside the grid box."""
    rng = np.random.default_rng(seed)
    lo, hi = grid.lower, grid.upper
    half = float(np.min(hi - lo)) / 2
    rmin = half / 20 if min_radius is None else min_radius
    out = []
    for _ in range(count):
        r = rng.uniform(rmin, half * 0.9)
        c = rng.uniform(lo + r, hi - r)
        out.append(Bump(c, r))
    return out


def poincare_certificate(p: ProblemInstance, test_functions: Sequence, epsilon: float | None = None,
                         tol: float = 1e-4, *, residual_report: IdentityReport | None = None,
                         stability: SpectrumReport | None = None, basis_size=None,
                         gate_tol: float = 1e-6) -> InequalityReport:
    """Compare ``int (Gamma_2(u) - Gamma(sqrt(Gamma(u)+eps))) phi^2`` with ``int Gamma(u) Gamma(phi)``.

    A verdict is claimed only when the residual and stability gates pass (the
    inequality is a theorem about stable solutions); otherwise the values are
    reported with a hypothesis warning.  The regularized term never exceeds
    its limit, so the certified side only gets smaller.
    """
    T = p.triple
    tests = [as_function(t, T.dimension) for t in test_functions]
    nodes = p.grid.nodes

    def base(chunk):
        loc = T.at(chunk, 3)
        U = loc.fn(p.u)
        return {"g2": loc.gamma2(U).value, "gu": loc.gamma(U).value}

    bv = map_points(base, nodes)
    eps = default_epsilon(float(bv["gu"].max())) if epsilon is None else float(epsilon)
    if eps <= 0:
        raise ValueError("epsilon must be positive")

    def rest(chunk):
        loc = T.at(chunk, 2)
        U = loc.fn(p.u)
        out = {"reg": loc.gamma_sqrt_reg(U, eps).value}
        for k, phi in enumerate(tests):
            P = loc.fn(phi, 1)
            out[f"phi{k}"] = P.value
            out[f"gphi{k}"] = loc.gamma(P).value
        return out

    rv = map_points(rest, nodes)
    density = bv["g2"] - rv["reg"]
    lhs, rhs = [], []
    for k in range(len(tests)):
        phi2 = rv[f"phi{k}"] ** 2
        lhs.append(integrate(p.grid, density * phi2))
        rhs.append(integrate(p.grid, bv["gu"] * rv[f"gphi{k}"]))
    margins = np.asarray(rhs) - np.asarray(lhs)
    kmin = int(np.argmin(margins)) if len(tests) else None
    margin = float(margins[kmin]) if len(tests) else 0.0

    warnings = []
    if residual_report is None:
        residual_report = residual(p, tol=gate_tol)
    if stability is None and basis_size is not None:
        stability = stability_spectrum(p, basis_size, tol=gate_tol)
    res_ok = residual_report.passed
    stab_ok = stability is not None and stability.stable
    if not res_ok:
        warnings.append(f"u is not certified as a solution (residual {residual_report.max_residual:.3e} "
                        f"above {residual_report.tol:g}); no verdict is claimed")
    if stability is None:
        warnings.append("stability was not checked; no verdict is claimed")
    elif not stab_ok:
        warnings.append(f"stability gate failed (lambda_min = {stability.lambda_min:.3e}); no verdict is claimed")
    witness = Witness(margin, None, None, tests[kmin].label, kmin) if kmin is not None else None
    return InequalityReport(
        "geometric-poincare", lhs, rhs, margin, tol, witness, hypotheses_ok=res_ok and stab_ok,
        warnings=warnings,
        meta={"epsilon": eps, "max_abs_lhs": float(np.max(np.abs(lhs))) if lhs else 0.0,
              "residual": residual_report.max_residual,
              "lambda_min": None if stability is None else stability.lambda_min,
              "theorem_verified": bool(res_ok and stab_ok and margin >= -tol)})


# ---------------------------------------------------------------------------
# curvature-dimension checks

def _cd_margins(T, K: float, functions, pts):
    def fn(chunk):
        loc = T.at(chunk, 3)
        out = {}
        for k, f in enumerate(functions):
            F = loc.fn(f)
            G = loc.gamma(F)
            g2 = loc.gamma2(F).value
            gg = loc.gamma(G).value
            g = G.value
            m1 = g2 - K * g
            out[f"m1_{k}"] = m1
            out[f"m2_{k}"] = 4 * g * g2 - 4 * K * g * g - gg
            out[f"alt_{k}"] = 4 * g * m1 - gg
        return out
    return map_points(fn, pts)


def cd_check(T: MarkovTriple, K: float, sample_functions: Sequence, sample_points, tol: float = 1e-8) -> InequalityReport:
    """Margins ``m1 = Gamma_2(f) - K Gamma(f)`` and ``m2 = 4 Gamma(f) m1 - Gamma(Gamma(f))``.

    ``m2`` is computed from the expanded product and, separately, from ``m1``;
    the largest disagreement goes in ``meta["two_path"]``.  The witness is the
    smallest margin; ties go to the earliest function, then the lowest point index.
    """
    fs = [as_function(f, T.dimension) for f in sample_functions]
    pts = np.atleast_2d(np.asarray(sample_points, dtype=float))
    v = _cd_margins(T, K, fs, pts)
    tr1, tr2 = WorstTracker(), WorstTracker()
    two_path = 0.0
    per_point = np.full(len(pts), np.inf)
    for k, f in enumerate(fs):
        m1, m2 = v[f"m1_{k}"], v[f"m2_{k}"]
        tr1.offer(-m1, pts, f.label, k)
        tr2.offer(-m2, pts, f.label, k)
        two_path = max(two_path, float(np.max(_scaled(m2 - v[f"alt_{k}"], m2))))
        per_point = np.minimum(per_point, np.minimum(m1, m2))
    m1_min = -tr1.best.value
    m2_min = -tr2.best.value
    worst = tr1.best if m1_min <= m2_min else tr2.best
    margin = min(m1_min, m2_min)
    w = Witness(margin, worst.point, worst.point_index, worst.function, worst.function_index)
    verdict_text = "no violation found" if margin >= -tol else "violation"
    return InequalityReport(
        f"CD({K:g},inf)", {"m1_min": m1_min}, {"m2_min": m2_min}, margin, tol, w,
        meta={"K": K, "two_path": two_path, "functions": len(fs), "points": len(pts), "result": verdict_text,
              "m1_refutes": bool(m1_min < -tol),
              "m1_witness": tr1.best.to_dict(), "m2_witness": tr2.best.to_dict()},
        rows=[(pt, m) for pt, m in zip(pts.tolist(), per_point.tolist())])


@dataclass
class SearchResult:
    found: bool
    trials: int
    function: str | None = None
    point: list | None = None
    m1: float | None = None


def find_cd_violation(T: MarkovTriple, K: float, trials: int = 500, seed: int = 0, points: int = 32,
                      box: float = 1.0, tol: float = 1e-8) -> SearchResult:
    """Random search over quadratic and cubic polynomials for a point with ``m1 < -tol``."""
    rng = np.random.default_rng(seed)
    pts = sobol_points([(-box, box)] * T.dimension, points, seed)
    for t in range(trials):
        f = Expression(random_polynomial_text(T.dimension, rng, degree=3, min_degree=2), T.dimension)
        m1 = _cd_margins(T, K, [f], pts)["m1_0"]
        k = int(np.argmin(m1))
        if m1[k] < -tol:
            return SearchResult(True, t + 1, f.label, pts[k].tolist(), float(m1[k]))
    return SearchResult(False, trials)


# ---------------------------------------------------------------------------
# Carnot groups: Bochner formula

def _entry(name, lhs, rhs, terms, pts, tol, detail=None):
    r = _scaled(lhs - rhs, lhs, *terms)
    tr = WorstTracker()
    tr.offer(r, pts)
    return Entry(name, tr.best.value, bool(tr.best.value < tol), tr.best, detail or {})


def _horizontal_hessian(loc, U):
    zu = loc.grad(U)
    return zu, [[loc.Z(i + 1, zu[j]) for j in range(len(zu))] for i in range(len(zu))]


def bochner_carnot_check(T: MarkovTriple, u, points, tol: float = 1e-8) -> IdentityReport:
    """Residuals of the Bochner formula and of ``Gamma_2(u) = ||Z^2 u||^2 + R(u)``.

    ``||Z^2 u||^2 = sum_ij (Z_i Z_j u)^2``.  The unsquared-norm variant is
    reported in the entry details for comparison.
    """
    if not T.carnot:
        raise ConfigurationError(f"{T.name} is not a Carnot catalog triple")
    u = as_function(u, T.dimension)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    m = T.m
    br = {(i, j): Bracket(T.frame[i], T.frame[j]) for i in range(m) for j in range(m) if i != j}
    br2 = {(i, j): Bracket(T.frame[i], br[i, j]) for (i, j) in br}

    def fn(chunk):
        loc = T.at(chunk, 3)
        U = loc.fn(u)
        zu, H = _horizontal_hessian(loc, U)
        norm2 = sum(H[i][j] * H[i][j] for i in range(m) for j in range(m)).value
        norm1 = np.sqrt(norm2)
        G = sum(z * z for z in zu)
        half_lap = 0.5 * loc.delta_Z(G).value
        lap = loc.delta_Z(U)
        t_lap = sum(zu[j].truncate(0) * loc.Z(j + 1, lap) for j in range(m)).value
        t_br = np.zeros_like(norm2)
        t_br2 = np.zeros_like(norm2)
        for (i, j), B in br.items():
            t_br = t_br + 2 * zu[j].value * loc.apply(B, zu[i]).value
            t_br2 = t_br2 + zu[j].value * loc.apply(br2[i, j], U).value
        g2 = loc.gamma2(U).value
        return {"half_lap": half_lap, "norm2": norm2, "norm1": norm1, "t_lap": t_lap, "t_br": t_br,
                "t_br2": t_br2, "g2": g2}

    v = map_points(fn, pts)
    R = v["t_br"] + v["t_br2"]
    rhs_b = v["norm2"] + v["t_lap"] + R
    rhs_g = v["norm2"] + R
    unsq_b = float(np.max(_scaled(v["half_lap"] - (v["norm1"] + v["t_lap"] + R), v["half_lap"])))
    unsq_g = float(np.max(_scaled(v["g2"] - (v["norm1"] + R), v["g2"])))
    entries = [
        _entry("bochner-formula", v["half_lap"], rhs_b, (v["norm2"], v["t_lap"], v["t_br"], v["t_br2"]), pts, tol,
               {"unsquared_norm_residual": unsq_b}),
        _entry("gamma2-hessian-plus-R", v["g2"], rhs_g, (v["norm2"], v["t_br"], v["t_br2"]), pts, tol,
               {"unsquared_norm_residual": unsq_g}),
    ]
    return IdentityReport(f"bochner[{T.name}]", entries, tol,
                          meta={"u": u.label, "points": len(pts), "max_abs_R": float(np.max(np.abs(R)))})


# ---------------------------------------------------------------------------
# Grushin plane

def _require(T: MarkovTriple, kind: str) -> None:
    if T.meta.get("kind") != kind:
        raise ConfigurationError(f"this check needs a {kind} triple, got {T.name}")


def grushin_gamma2_check(T: MarkovTriple, u, F=None, points=None, tol: float = 1e-8,
                         gate_tol: float = 1e-8) -> IdentityReport:
    """Commutation identities and the Gamma_2 formula on the Grushin plane.

    With ``Z3 = [Z1, Z2]``:

    * ``Delta Z1 u = Z1 Delta u - 2 Z3 Z2 u`` holds for every alpha;
    * ``Delta Z2 u = Z2 Delta u + 2 Z3 Z1 u + [Z1, Z3] u``, where the last term
      is ``alpha (alpha - 1) x^(alpha-2) d_y u`` and vanishes only for alpha = 1;
    * ``Gamma_2(u) = ||Z^2 u||^2 - 2 Z1u Z3Z2u + 2 Z2u Z3Z1u + Z2u [Z1, Z3]u``.

    Entries use the complete forms.  Residuals of the forms without the
    ``[Z1, Z3]`` term are in ``detail["without_correction"]``.  When ``F`` is
    given and ``u`` passes the pointwise residual gate, the gradient and
    Gamma forms of the equation are checked too.
    """
    _require(T, "grushin")
    u = as_function(u, 2)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    Z1, Z2 = T.frame
    Z3 = Bracket(Z1, Z2, "Z3")
    Z13 = Bracket(Z1, Z3, "[Z1,Z3]")
    Fu = None if F is None else univariate(F)

    def fn(chunk):
        loc = T.at(chunk, 3)
        U = loc.fn(u)
        z1, z2 = loc.Z(1, U), loc.Z(2, U)
        lap = loc.delta_Z(U)
        out = {
            "lapZ1": loc.delta_Z(z1).value, "Z1lap": loc.Z(1, lap).value,
            "lapZ2": loc.delta_Z(z2).value, "Z2lap": loc.Z(2, lap).value,
            "Z3Z1": loc.apply(Z3, z1).value, "Z3Z2": loc.apply(Z3, z2).value,
            "c": loc.apply(Z13, U).value,
            "g2": loc.gamma2(U).value,
            "z1": z1.value, "z2": z2.value,
            "gul": loc.gamma(U, lap).value,
        }
        _, H = _horizontal_hessian(loc, U)
        out["norm2"] = sum(H[i][j] * H[i][j] for i in range(2) for j in range(2)).value
        if Fu is not None:
            out["dF"] = derivative_values(Fu, U.value)
        return out

    v = map_points(fn, pts)
    rhs1 = v["Z1lap"] - 2 * v["Z3Z2"]
    rhs2_disp = v["Z2lap"] + 2 * v["Z3Z1"]
    rhs2 = rhs2_disp + v["c"]
    g2_disp = v["norm2"] - 2 * v["z1"] * v["Z3Z2"] + 2 * v["z2"] * v["Z3Z1"]
    g2_full = g2_disp + v["z2"] * v["c"]
    g2_unsq = np.sqrt(v["norm2"]) - 2 * v["z1"] * v["Z3Z2"] + 2 * v["z2"] * v["Z3Z1"] + v["z2"] * v["c"]
    entries = [
        _entry("commutation-Z1", v["lapZ1"], rhs1, (v["Z1lap"], 2 * v["Z3Z2"]), pts, tol),
        _entry("commutation-Z2", v["lapZ2"], rhs2, (v["Z2lap"], 2 * v["Z3Z1"], v["c"]), pts, tol,
               {"without_correction": float(np.max(_scaled(v["lapZ2"] - rhs2_disp, v["lapZ2"], rhs2_disp)))}),
        _entry("gamma2-formula", v["g2"], g2_full, (v["norm2"], 2 * v["z1"] * v["Z3Z2"], 2 * v["z2"] * v["Z3Z1"],
                                                    v["z2"] * v["c"]), pts, tol,
               {"without_correction": float(np.max(_scaled(v["g2"] - g2_disp, v["g2"], g2_disp))),
                "unsquared_norm": float(np.max(_scaled(v["g2"] - g2_unsq, v["g2"], g2_unsq)))}),
    ]
    warnings = []
    gate = None
    if Fu is not None:
        p_res = _pointwise_equation_values(T, u, Fu, pts)
        gate = float(p_res.max())
        if gate < gate_tol:
            dF = v["dF"]
            entries.append(_entry("equation-Z1", v["Z1lap"], -dF * v["z1"], (dF * v["z1"],), pts, tol))
            entries.append(_entry("equation-Z2", v["Z2lap"], -dF * v["z2"], (dF * v["z2"],), pts, tol))
            g = v["z1"] ** 2 + v["z2"] ** 2
            entries.append(_entry("equation-gamma", v["gul"], -dF * g, (dF * g,), pts, tol))
        else:
            warnings.append(f"u is not a solution (sup |L u + F(u)| = {gate:.3e}); "
                            "solution-gated identities skipped")
    return IdentityReport(f"grushin[alpha={T.meta.get('alpha')}]", entries, tol, warnings,
                          meta={"u": u.label, "points": len(pts), "equation_residual": gate})


# ---------------------------------------------------------------------------
# filiform level sets

def filiform_levelset_check(T: MarkovTriple, u, points, tol: float = 1e-6, floor: float = 1e-6) -> IdentityReport:
    """Level-set decomposition of ``||Z^2 u||^2 - <H_Z u nu, nu>`` on ``{Zu != 0}``.

    ``M_ij = Z_i Z_j u`` (raw ordering), ``H_Z u = M M^T``, ``nu = Zu/|Zu|``,
    ``v = (Z2u, -Z1u)/|Zu|``, ``Z3 = [Z2, Z1]``, ``p = -Z3 u/|Zu|`` and
    ``h = Z1 nu_1 + Z2 nu_2``.  The right side is
    ``|Zu|^2 (h^2 + (p + <M v, nu>/|Zu|)^2)``.  ``h`` is also computed as
    ``<M v, v>/|Zu|`` for a second route.  Points with ``|Zu| < floor`` are
    skipped and counted.
    """
    _require(T, "filiform")
    if T.dimension < 3:
        raise ConfigurationError("the level-set identity needs a filiform group of dimension >= 3")
    u = as_function(u, T.dimension)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    Z1, Z2 = T.frame
    Z3 = Bracket(Z2, Z1, "Z3")

    loc0 = T.at(pts, 1)
    U0 = loc0.fn(u)
    grad_norm = np.sqrt(sum(z.value ** 2 for z in loc0.grad(U0)))
    keep = grad_norm >= floor
    skipped = int(np.count_nonzero(~keep))
    good = pts[keep]
    if good.shape[0] == 0:
        return IdentityReport("filiform-levelset", [], tol, [f"all {skipped} points below the |Zu| floor"],
                              meta={"skipped": skipped, "points": len(pts)})

    def fn(chunk):
        loc = T.at(chunk, 3)
        U = loc.fn(u)
        zu, H = _horizontal_hessian(loc, U)
        g = np.stack([z.value for z in zu])  # (2, N)
        M = np.array([[H[i][j].value for j in range(2)] for i in range(2)])  # (2, 2, N)
        r = np.sqrt(g[0] ** 2 + g[1] ** 2)
        nu = g / r
        vv = np.stack([g[1], -g[0]]) / r
        norm2 = np.sum(M * M, axis=(0, 1))
        Mt_nu = np.einsum("ijn,in->jn", M, nu)
        lhs = norm2 - np.sum(Mt_nu * Mt_nu, axis=0)
        Mv = np.einsum("ijn,jn->in", M, vv)
        mixed = np.sum(Mv * nu, axis=0)
        z3 = loc.apply(Z3, U).value
        p = -z3 / r
        # first route: differentiate the unit normal as a jet
        inv = 1.0 / J.sqrt(zu[0] * zu[0] + zu[1] * zu[1])
        h = (loc.Z(1, zu[0] * inv) + loc.Z(2, zu[1] * inv)).value
        h_alt = np.sum(Mv * vv, axis=0) / r
        rhs = r * r * (h * h + (p + mixed / r) ** 2)
        S = 0.5 * (M + np.transpose(M, (1, 0, 2)))
        St_nu = np.einsum("ijn,in->jn", S, nu)
        lhs_s = np.sum(S * S, axis=(0, 1)) - np.sum(St_nu * St_nu, axis=0)
        mixed_s = np.sum(np.einsum("ijn,jn->in", S, vv) * nu, axis=0)
        h_s = np.sum(np.einsum("ijn,jn->in", S, vv) * vv, axis=0) / r
        rhs_s = r * r * (h_s * h_s + (p + mixed_s / r) ** 2)
        return {"lhs": lhs, "rhs": rhs, "h": h, "h_alt": h_alt, "p": p, "r": r,
                "lhs_s": lhs_s, "rhs_s": rhs_s}

    v = map_points(fn, good)
    sym = float(np.max(_scaled(v["lhs_s"] - v["rhs_s"], v["lhs_s"], v["rhs_s"])))
    entries = [
        _entry("levelset-identity", v["lhs"], v["rhs"], (v["rhs"],), good, tol,
               {"symmetrized_hessian_residual": sym}),
        _entry("mean-curvature-two-routes", v["h"], v["h_alt"], (), good, tol),
    ]
    return IdentityReport("filiform-levelset", entries, tol,
                          meta={"skipped": skipped, "points": len(pts), "h": v["h"], "p": v["p"]})


# ---------------------------------------------------------------------------
# rigidity diagnostics

@dataclass
class RigidityReport:
    K: float
    energy: float
    sup_gamma: float
    mean_gamma: float
    sup_defect: float  # sup |Gamma_2(u) - Gamma(sqrt(Gamma(u)+eps))|
    lower_bound_margin: float  # min of 4 Gamma Gamma_2 - Gamma(Gamma) - 4 K Gamma^2
    epsilon: float
    tol: float
    witness: Witness | None = None
    notes: list = field(default_factory=list)

    @property
    def consistent(self) -> bool:
        return self.lower_bound_margin >= -self.tol

    @property
    def status(self) -> str:
        return "holds" if self.consistent else "hypothesis-inconsistent"

    def to_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "witness"}
        d["witness"] = self.witness.to_dict() if self.witness else None
        d["status"] = self.status
        d["kind"] = "rigidity"
        return d


def rigidity_report(p: ProblemInstance, K: float, points=None, epsilon: float | None = None,
                    tol: float = 1e-8) -> RigidityReport:
    """Diagnostics for the rigidity conclusions; nothing here is a verdict on a theorem.

    A negative ``lower_bound_margin`` means the sampled data contradict the
    claimed curvature bound ``K``, so the hypothesis is flagged as inconsistent.
    """
    T = p.triple
    pts = p.grid.nodes if points is None else np.atleast_2d(points)

    def fn(nodes):
        loc = T.at(nodes, 3)
        U = loc.fn(p.u)
        G = loc.gamma(U)
        return {"g": G.value, "g2": loc.gamma2(U).value, "gg": loc.gamma(G).value}

    grid_vals = map_points(fn, p.grid.nodes)
    energy = integrate(p.grid, grid_vals["g"])
    v = grid_vals if points is None else map_points(fn, pts)
    g, g2, gg = v["g"], v["g2"], v["gg"]
    eps = default_epsilon(float(g.max())) if epsilon is None else float(epsilon)
    defect = np.abs(g2 - gg / (4 * (g + eps)))
    lb = 4 * g * g2 - gg - 4 * K * g * g
    tr = WorstTracker()
    tr.offer(-lb, pts)
    notes = []
    if tr.best.value > tol:
        notes.append(f"4 Gamma(u) Gamma_2(u) - Gamma(Gamma(u)) < 4 K Gamma(u)^2 at sampled points: "
                     f"the curvature bound K = {K:g} is inconsistent with this instance")
    return RigidityReport(K, energy, float(g.max()), float(g.mean()), float(defect.max()), -tr.best.value,
                          eps, tol, tr.best, notes)
