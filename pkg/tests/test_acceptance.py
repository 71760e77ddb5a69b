"""One test per acceptance criterion; each prints a PASS/FAIL line."""
import json
import math
import pathlib
import time

import numpy as np
import pytest

from carre import jet as J
from carre.cli import main
from carre.expr import eval_jet, parse
from carre.fields import hormander_depth
from carre.geometries import by_name
from carre.quad import build_grid, cutoff, euclidean_distance
from carre.sampling import random_pairs, random_polynomial_text, random_polynomials, sobol_points
from carre.smooth import Expression
from carre.triple import GeneralOperator, gamma_from_L, validate_axioms
from carre import verify as V

from conftest import record
from test_verify import fd_lowest_eigenvalue

DEMOS = pathlib.Path(__file__).resolve().parents[1] / "demos" / "configs"

BUILTINS = [("euclidean-weighted", {"dimension": 2}), ("ornstein-uhlenbeck", {"dimension": 2}),
            ("heisenberg", {}), ("engel", {}), ("filiform", {"dimension": 5}),
            ("grushin", {"alpha": 1}), ("grushin", {"alpha": 2})]


def test_criterion_01_axioms():
    t0 = time.perf_counter()
    worst, failed = 0.0, []
    for kind, params in BUILTINS:
        T = by_name(kind, **params)
        pts = sobol_points([(-1, 1)] * T.dimension, 200, seed=1)
        rep = validate_axioms(T, random_pairs(T.dimension, 20, seed=2), pts, 1e-7)
        worst = max(worst, rep.max_residual)
        if not rep.passed:
            failed.append(T.name)
    D = GeneralOperator.dalembert()
    pairs = [(Expression("x1", 2), Expression("x2", 2))] + random_pairs(2, 5, seed=3)
    drep = validate_axioms(D, pairs, sobol_points([(-1, 1)] * 2, 64), 1e-7)
    pos = drep.entry("positivity")
    elapsed = time.perf_counter() - t0
    ok = not failed and worst < 1e-7 and not pos.passed and pos.witness is not None and elapsed < 30
    assert record(1, "structural axioms on 7 built-ins; d'Alembert positivity fails", ok,
                  f"max residual {worst:.1e}, failed {failed}, witness {pos.witness.function if pos.witness else None}"
                  f" at {pos.witness.point if pos.witness else None}, {elapsed:.1f}s")


def test_criterion_02_counterexamples():
    rng = np.random.default_rng(5)
    srcs = [random_polynomial_text(2, rng) for _ in range(20)] + ["sin(x1)*exp(x2)", "tanh(x1 - 2*x2)"]
    pts = rng.uniform(-1, 1, (50, 2))
    D, d1 = GeneralOperator.dalembert(), GeneralOperator.derivative()
    e_dal = e_der = 0.0
    for s in srcs:
        g = eval_jet(parse(s, 2), pts, 1).gradient  # independent route: first-order jet only
        e_dal = max(e_dal, np.abs(gamma_from_L(D, s, s, pts) - (g[0] ** 2 - g[1] ** 2)).max())
        e_der = max(e_der, np.abs(gamma_from_L(d1, s.replace("x2", "0.5"), s.replace("x2", "0.5"),
                                               pts[:, :1])).max())
    e_div = 0.0
    for _ in range(10):
        c = rng.uniform(0.2, 1.0, 6)
        a = [[f"2 + sin({c[0]:.3f}*x1 + {c[1]:.3f}*x2)", f"{c[2]:.3f}*cos(x1*x2)"],
             [f"{c[2]:.3f}*cos(x1*x2)", f"2 + {c[3]:.3f}*x1^2 + tanh({c[4]:.3f}*x2)"]]
        LD, LN = GeneralOperator.divergence(a), GeneralOperator.nondivergence(a)
        f, g = random_polynomial_text(2, rng), random_polynomial_text(2, rng)
        e_div = max(e_div, np.abs(gamma_from_L(LD, f, g, pts) - gamma_from_L(LN, f, g, pts)).max())
    ok = e_dal < 1e-9 and e_der <= 1e-9 and e_div < 1e-8
    assert record(2, "d'Alembert / derivative / divergence-form counterexamples", ok,
                  f"dalembert {e_dal:.1e}, derivative {e_der:.1e}, div vs nondiv {e_div:.1e}")


def test_criterion_03_bochner():
    t0 = time.perf_counter()
    worst = {}
    for kind, params in [("heisenberg", {}), ("engel", {}), ("filiform", {"dimension": 5})]:
        T = by_name(kind, **params)
        pts = sobol_points([(-1, 1)] * T.dimension, 64, seed=4)
        w = 0.0
        for u in random_polynomials(T.dimension, 100, seed=6):
            rep = V.bochner_carnot_check(T, u, pts, 1e-6)
            w = max(w, rep.entry("bochner-formula").max_residual, rep.entry("gamma2-hessian-plus-R").max_residual)
        worst[T.name] = w
    elapsed = time.perf_counter() - t0
    ok = max(worst.values()) < 1e-6 and elapsed < 60
    assert record(3, "Bochner formula and Gamma_2 = |Z^2 u|^2 + R(u) on Carnot groups", ok,
                  ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f", {elapsed:.1f}s")


def test_criterion_04_grushin():
    pts = sobol_points([(-1, 1)] * 2, 64, seed=7)
    free = {}
    display_alpha1 = 0.0
    display_alpha2 = 0.0
    for alpha in (1, 2):
        G = by_name("grushin", alpha=alpha)
        w = 0.0
        for u in random_polynomials(2, 100, seed=8):
            rep = V.grushin_gamma2_check(G, u, None, pts, 1e-8)
            w = max(w, rep.max_residual)
            disp = max(rep.entry("commutation-Z2").detail["without_correction"],
                       rep.entry("gamma2-formula").detail["without_correction"])
            if alpha == 1:
                display_alpha1 = max(display_alpha1, disp)
            else:
                display_alpha2 = max(display_alpha2, disp)
        free[alpha] = w
    # manufactured solutions u(x) with F = -(Delta_Z u) o u^-1
    cases = [("tanh(x1/sqrt(2))", "s - s^3")]
    for c in (0.5, 1.3):
        cases.append((f"tanh({c}*x1)", f"2*{c}^2*s*(1 - s^2)"))
    cases += [("exp(x1)", "-s"), ("(exp(x1) - exp(-x1))/2", "-s")]
    gated = 0.0
    gated_ok = True
    for alpha in (1, 2):
        G = by_name("grushin", alpha=alpha)
        for u, F in cases:
            rep = V.grushin_gamma2_check(G, u, F, pts, 1e-8)
            names = {e.name for e in rep.entries}
            gated_ok &= rep.passed and not rep.warnings and {"equation-Z1", "equation-Z2", "equation-gamma"} <= names
            gated = max(gated, rep.max_residual)
    ok = max(free.values()) < 1e-8 and display_alpha1 < 1e-8 and gated_ok and gated < 1e-8
    assert record(4, "Grushin commutation, Gamma(u, Lu) and Gamma_2 identities", ok,
                  f"PDE-free alpha=1 {free[1]:.1e}, alpha=2 {free[2]:.1e}; displayed forms alpha=1 "
                  f"{display_alpha1:.1e}, alpha=2 {display_alpha2:.1e} (missing [Z1,Z3] term); "
                  f"manufactured {gated:.1e}")


def _instance(u, L, panels):
    T = by_name("euclidean-weighted", dimension=1)
    return V.ProblemInstance(T, u, "s - s^3", build_grid([(-L, L)], 8, panels=panels))


def test_criterion_05_stability():
    t0 = time.perf_counter()
    rep = V.stability_spectrum(_instance("tanh(x1/sqrt(2))", 10.0, 60), 150, tol=1e-3)
    t_tanh = time.perf_counter() - t0
    oracle = fd_lowest_eigenvalue(lambda x: 3 * np.tanh(x / math.sqrt(2)) ** 2 - 1, 10.0)
    ok = -1e-3 <= rep.lambda_min <= 0.05 and abs(rep.lambda_min - oracle) < 2e-2 and t_tanh < 60
    detail = [f"tanh {rep.lambda_min:.2e} vs FD {oracle:.2e} ({t_tanh:.1f}s)"]
    for L in (5.0, 10.0):
        t0 = time.perf_counter()
        z = V.stability_spectrum(_instance("0", L, int(6 * L)), 150, tol=1e-6)
        exact = -1 + (math.pi / (2 * L)) ** 2
        dt = time.perf_counter() - t0
        ok &= abs(z.lambda_min - exact) < 5e-2 and z.verdict == "unstable" and dt < 60
        detail.append(f"u=0 L={L:g} {z.lambda_min:.4f} vs {exact:.4f} ({dt:.1f}s)")
    assert record(5, "stability spectrum (tanh kink stable, u = 0 unstable)", ok, "; ".join(detail))


def test_criterion_06_poincare():
    p = _instance("tanh(x1/sqrt(2))", 10.0, 60)
    tests = V.random_bumps(p.grid, 20, seed=9)
    rep = V.poincare_certificate(p, tests, tol=1e-4, basis_size=150, gate_tol=1e-3)
    lhs = max(abs(v) for v in rep.lhs)
    ok = rep.margin >= -1e-4 and lhs < 1e-5 and rep.hypotheses_ok and rep.status == "holds"
    assert record(6, "geometric Poincare certificate on the tanh kink", ok,
                  f"margin {rep.margin:.2e}, max |LHS| {lhs:.1e}, epsilon {rep.meta['epsilon']:.1e}")


def test_criterion_07_cd():
    OU = by_name("ornstein-uhlenbeck", dimension=2)
    pts = sobol_points([(-2, 2)] * 2, 200, seed=10)
    ou = V.cd_check(OU, 1.0, random_polynomials(2, 50, seed=11), pts, 1e-8)
    E = by_name("euclidean-weighted", dimension=3)
    flat = V.cd_check(E, 0.0, random_polynomials(3, 50, seed=12), sobol_points([(-1, 1)] * 3, 200), 1e-8)
    found = V.find_cd_violation(by_name("heisenberg"), 0.0, trials=500, seed=13)
    ok = ou.margin >= -1e-8 and flat.margin >= -1e-8 and found.found
    assert record(7, "CD(1) on Gaussian space, CD(0) flat, Heisenberg violates CD(0)", ok,
                  f"OU margin {ou.margin:.1e}, flat margin {flat.margin:.1e}, Heisenberg witness after "
                  f"{found.trials} trials: m1 = {found.m1:.3g} for {found.function}")


def test_criterion_08_hormander():
    got = {}
    for kind, params, n in [("heisenberg", {}, 3), ("engel", {}, 4)] + \
            [("filiform", {"dimension": k}, k) for k in (3, 4, 5, 6)]:
        T = by_name(kind, **params)
        got[f"{kind}{params.get('dimension', '')}"] = hormander_depth(T.frame, sobol_points([(-1, 1)] * n, 100)).depth
    want = {"heisenberg": 2, "engel": 3, "filiform3": 2, "filiform4": 3, "filiform5": 4, "filiform6": 5}
    rng = np.random.default_rng(14)
    strip = np.stack([rng.uniform(-1e-3, 1e-3, 100), rng.uniform(-1, 1, 100)], axis=1)
    rest = sobol_points([(-1, 1)] * 2, 100, seed=15)
    rest = rest[np.abs(rest[:, 0]) >= 1e-3]
    G = by_name("grushin", alpha=2)
    ds = hormander_depth(G.frame, strip, tol=1e-6).per_point_depth
    dr = hormander_depth(G.frame, rest, tol=1e-6).per_point_depth
    ok = got == want and np.all(ds == 2) and np.all(dr == 1)
    assert record(8, "Hormander bracket depths", ok,
                  f"{got}; grushin strip depths {sorted(set(ds.tolist()))}, elsewhere {sorted(set(dr.tolist()))}")


def test_criterion_09_cutoff():
    rows, ok = [], True
    for n in (1, 2):
        E = by_name("euclidean-weighted", dimension=n)
        for k in (4, 16, 64):
            r = cutoff(k, euclidean_distance(n), E)
            ok &= r.sup_gamma <= 1 / k + 1e-9 and r.fourth_power_margin >= -1e-9
            ok &= r.min_value >= 0.0 and r.max_value <= 1.0
            rows.append(f"n={n} k={k}: {r.sup_gamma:.3g}")
    assert record(9, "cutoff sequence Gamma(xi_k) <= 1/k and fourth-power bound", ok, ", ".join(rows))


def test_criterion_10_determinism(tmp_path):
    configs = sorted(DEMOS.glob("*.ini"))
    same = True
    for cfg in configs:
        outs = []
        for t in (1, 4):
            d = tmp_path / f"{cfg.stem}-{t}"
            main(["--config", str(cfg), "--out", str(d), "--threads", str(t), "--seed", "0"])
            outs.append(b"".join(p.read_bytes() for p in sorted(d.iterdir())))
        same &= outs[0] == outs[1]
    assert record(10, "byte-identical reports across thread counts", same,
                  f"{len(configs)} configs, threads 1 vs 4")
