"""Batch runner: ``carre --config run.ini --out reports/``.

Config file (INI)::

    [geometry]
    kind = euclidean-weighted      # or ornstein-uhlenbeck, heisenberg, engel,
    dimension = 1                  #    filiform, grushin, custom
    # alpha = 2                    # grushin
    # eta = -x1^2/2                # euclidean-weighted / custom
    # field1 = 1; 0                # custom frame, coefficients separated by ';'

    [problem]
    u = tanh(x1/sqrt(2))
    F = s - s^3                    # nonlinearity in the variable s

    [grid]
    box = -10 10                   # "lo hi" per axis, axes separated by ';'
    nodes = 6
    panels = 400
    rule = gauss-legendre

    [run]
    checks = residual, stability, poincare, rigidity
    seed = 0
    samples = 200

Each check may have its own section (``[stability]``, ``[cd]``, ...) with a
``tol`` and check-specific keys; see ``CHECK_KEYS``.

Exit status: 0 all checks hold, 2 a genuine violation, 3 hypothesis-gate
warnings only, 1 configuration error.  ``report.json`` is written in every
case; ``margins.csv`` holds per-point margins of checks that produce them.
"""
from __future__ import annotations

import argparse
import configparser
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import parallel
from .expr import ParseError
from .fields import hormander_depth
from .geometries import CARNOT, GeometryError, GeometrySpec, make
from .quad import QuadratureError, build_grid
from .reports import SCHEMA, dumps, rows_to_csv
from .sampling import random_pairs, random_polynomials, sobol_points
from .triple import validate_axioms
from . import verify as V

CHECKS = ("residual", "axioms", "stability", "poincare", "cd", "bochner", "grushin", "filiform",
          "rigidity", "hormander")

CHECK_KEYS = {
    "residual": {"tol"},
    "axioms": {"tol", "pairs"},
    "stability": {"tol", "basis", "eigenvalues", "overlap"},
    "poincare": {"tol", "tests", "epsilon", "basis", "gate_tol"},
    "cd": {"tol", "k", "functions", "f", "search_trials"},
    "bochner": {"tol", "functions"},
    "grushin": {"tol", "functions"},
    "filiform": {"tol", "floor", "functions"},
    "rigidity": {"tol", "k", "epsilon"},
    "hormander": {"tol", "max_depth"},
}

SECTION_KEYS = {
    "geometry": {"kind", "dimension", "alpha", "eta"},
    "problem": {"u", "f"},
    "grid": {"box", "nodes", "panels", "rule"},
    "run": {"checks", "seed", "samples", "sample_box", "threads"},
    "output": {"json", "csv"},
}

EXIT_OK, EXIT_CONFIG, EXIT_VIOLATION, EXIT_WARNING = 0, 1, 2, 3


class ConfigError(Exception):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line, self.column = line, column
        where = f"line {line}" + (f", column {column}" if column else "") + ": " if line else ""
        super().__init__(where + message)


@dataclass
class RunConfig:
    path: str
    parser: configparser.ConfigParser
    lines: list
    spec: GeometrySpec
    u: str | None
    F: str | None
    grid: dict
    checks: list
    seed: int
    samples: int
    sample_box: list | None
    threads: int
    options: dict = field(default_factory=dict)

    def locate(self, section: str, key: str) -> tuple:
        """1-based (line, column of the value) of ``key`` in ``section``."""
        current = None
        for i, raw in enumerate(self.lines, 1):
            s = raw.strip()
            if s.startswith("[") and s.endswith("]"):
                current = s[1:-1].strip().lower()
                continue
            if current == section and "=" in raw:
                k, _, rest = raw.partition("=")
                if k.strip().lower() == key.lower():
                    return i, len(k) + 2 + (len(rest) - len(rest.lstrip()))
        return None, None

    def opt(self, check: str, key: str, default, cast=float):
        if not self.parser.has_option(check, key):
            return default
        raw = self.parser.get(check, key)
        try:
            return cast(raw)
        except ValueError as exc:
            line, col = self.locate(check, key)
            raise ConfigError(f"[{check}] {key} = {raw!r}: {exc}", line, col) from None


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from None
    except UnicodeDecodeError as exc:
        raise ConfigError(f"config is not valid UTF-8 (byte {exc.start})") from None
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    try:
        cp.read_string(text, source=path)
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r} in [{exc.section}]", exc.lineno) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", exc.lineno) from None
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("content before the first [section] header", exc.lineno) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError("malformed line", line) from None
    lines = text.splitlines()
    dummy = RunConfig(path, cp, lines, None, None, None, {}, [], 0, 0, None, 1)

    for sec in cp.sections():
        allowed = SECTION_KEYS.get(sec, CHECK_KEYS.get(sec))
        if allowed is None:
            line, _ = _section_line(lines, sec)
            raise ConfigError(f"unknown section [{sec}]", line)
        for key in cp[sec]:
            ok = key in allowed or (sec == "geometry" and key.startswith("field") and key[5:].isdigit())
            if not ok:
                line, col = dummy.locate(sec, key)
                raise ConfigError(f"unknown key {key!r} in [{sec}]", line, col)

    if not cp.has_section("geometry") or not cp.has_option("geometry", "kind"):
        raise ConfigError("missing [geometry] kind")
    g = cp["geometry"]

    def geo_int(key):
        if key not in g:
            return None
        try:
            return int(g[key])
        except ValueError:
            line, col = dummy.locate("geometry", key)
            raise ConfigError(f"{key} must be an integer, got {g[key]!r}", line, col) from None

    frame = None
    fields_ = sorted((k for k in g if k.startswith("field")), key=lambda k: int(k[5:]))
    if fields_:
        frame = tuple(tuple(c.strip() for c in g[k].split(";")) for k in fields_)
    spec = GeometrySpec(g["kind"].strip(), geo_int("dimension"), geo_int("alpha"), g.get("eta"), frame)

    prob = cp["problem"] if cp.has_section("problem") else {}
    grid = {}
    if cp.has_section("grid"):
        gs = cp["grid"]
        if "box" in gs:
            try:
                grid["box"] = [tuple(float(t) for t in ax.split()) for ax in gs["box"].split(";")]
                if any(len(ax) != 2 for ax in grid["box"]):
                    raise ValueError("each axis needs 'lo hi'")
            except ValueError as exc:
                line, col = dummy.locate("grid", "box")
                raise ConfigError(f"bad box {gs['box']!r}: {exc}", line, col) from None
        grid["nodes"] = dummy.opt("grid", "nodes", 8, int)
        grid["panels"] = dummy.opt("grid", "panels", 1, int)
        grid["rule"] = gs.get("rule", "gauss-legendre").strip()

    checks = []
    if cp.has_option("run", "checks"):
        checks = [c.strip() for c in cp.get("run", "checks").split(",") if c.strip()]
    sample_box = None
    if cp.has_option("run", "sample_box"):
        try:
            sample_box = [tuple(float(t) for t in ax.split()) for ax in cp.get("run", "sample_box").split(";")]
        except ValueError as exc:
            line, col = dummy.locate("run", "sample_box")
            raise ConfigError(f"bad sample_box: {exc}", line, col) from None
    return RunConfig(path, cp, lines, spec, prob.get("u"), prob.get("f"), grid, checks,
                     dummy.opt("run", "seed", 0, int), dummy.opt("run", "samples", 200, int), sample_box,
                     dummy.opt("run", "threads", 1, int))


def _section_line(lines, sec):
    for i, raw in enumerate(lines, 1):
        if raw.strip().lower() == f"[{sec}]":
            return i, 1
    return None, None


# ---------------------------------------------------------------------------

def _run_check(name: str, cfg: RunConfig, T, instance, pts, rows: list) -> dict:
    seed = cfg.seed
    n = T.dimension
    tol = lambda default: cfg.opt(name, "tol", default)  # noqa: E731

    def need_instance():
        if instance is None:
            raise ConfigError(f"check {name!r} needs [problem] u, F and a [grid] box")
        return instance

    if name == "residual":
        rep = V.residual(need_instance(), tol=tol(1e-6))
        out = rep.to_dict()
        out["status"] = "holds" if rep.passed else "hypothesis-warning"
        return out
    if name == "axioms":
        pairs = random_pairs(n, cfg.opt(name, "pairs", 20, int), seed)
        return validate_axioms(T, pairs, pts, tol(1e-7)).to_dict()
    if name == "stability":
        p = need_instance()
        rep = V.stability_spectrum(p, cfg.opt(name, "basis", 100, int), tol(1e-6),
                                   cfg.opt(name, "eigenvalues", 5, int), overlap=cfg.opt(name, "overlap", 3.0))
        return rep.to_dict()
    if name == "poincare":
        p = need_instance()
        tests = V.random_bumps(p.grid, cfg.opt(name, "tests", 20, int), seed)
        eps = cfg.opt(name, "epsilon", None)
        rep = V.poincare_certificate(p, tests, eps, tol(1e-4), basis_size=cfg.opt(name, "basis", 100, int),
                                     gate_tol=cfg.opt(name, "gate_tol", 1e-6))
        return rep.to_dict()
    if name == "cd":
        K = cfg.opt(name, "k", 0.0)
        fs = random_polynomials(n, cfg.opt(name, "functions", 50, int), seed)
        if cfg.parser.has_option(name, "f"):
            fs = [s.strip() for s in cfg.parser.get(name, "f").split(";") if s.strip()] + fs
        if cfg.u:
            fs = [cfg.u] + fs
        rep = V.cd_check(T, K, fs, pts, tol(1e-8))
        trials = cfg.opt(name, "search_trials", 0, int)
        out = rep.to_dict()
        if trials and rep.verdict:
            found = V.find_cd_violation(T, K, trials, seed)
            out["search"] = found.__dict__
            if found.found:
                out["status"] = "violated"
                out["verdict"] = False
                out["witness"] = {"value": found.m1, "point": found.point, "function": found.function}
        rows += [(pt, m, name) for pt, m in rep.rows]
        return out
    if name == "bochner":
        if T.meta.get("kind") not in CARNOT:
            raise ConfigError(f"check 'bochner' needs a Carnot geometry ({', '.join(CARNOT)}), got {T.name}")
        fs = ([cfg.u] if cfg.u else []) + random_polynomials(n, cfg.opt(name, "functions", 10, int), seed)
        return _merge(name, [V.bochner_carnot_check(T, f, pts, tol(1e-8)) for f in fs])
    if name == "grushin":
        if T.meta.get("kind") != "grushin":
            raise ConfigError(f"check 'grushin' needs a grushin geometry, got {T.name}")
        reps = []
        if cfg.u:
            reps.append(V.grushin_gamma2_check(T, cfg.u, cfg.F, pts, tol(1e-8)))
        reps += [V.grushin_gamma2_check(T, f, None, pts, tol(1e-8))
                 for f in random_polynomials(n, cfg.opt(name, "functions", 10, int), seed)]
        return _merge(name, reps)
    if name == "filiform":
        if T.meta.get("kind") != "filiform":
            raise ConfigError(f"check 'filiform' needs a filiform geometry, got {T.name}")
        fs = ([cfg.u] if cfg.u else []) + random_polynomials(n, cfg.opt(name, "functions", 10, int), seed)
        reps = [V.filiform_levelset_check(T, f, pts, tol(1e-6), cfg.opt(name, "floor", 1e-6)) for f in fs]
        for r in reps:
            r.meta.pop("h", None)
            r.meta.pop("p", None)
        return _merge(name, reps)
    if name == "rigidity":
        rep = V.rigidity_report(need_instance(), cfg.opt(name, "k", 0.0), None, cfg.opt(name, "epsilon", None),
                                tol(1e-8))
        out = rep.to_dict()
        out["status"] = "holds" if rep.consistent else "hypothesis-warning"
        out["diagnosis"] = rep.status
        return out
    if name == "hormander":
        rep = hormander_depth(T.frame, pts, cfg.opt(name, "max_depth", 6, int), tol(1e-9), drift=T.drift)
        out = rep.to_dict()
        out["kind"] = "hormander"
        out["status"] = "holds" if rep.ok else "violated"
        return out
    raise ConfigError(f"unknown check {name!r}; expected one of {', '.join(CHECKS)}")


def _merge(name: str, reports: list) -> dict:
    statuses = [r.status for r in reports]
    status = "violated" if "violated" in statuses else ("hypothesis-warning" if "hypothesis-warning" in statuses
                                                       else "holds")
    return {"schema": SCHEMA, "kind": "identity-batch", "name": name, "status": status,
            "max_residual": max((r.max_residual for r in reports), default=0.0),
            "reports": [r.to_dict() for r in reports]}


def _exit_code(statuses) -> int:
    if "violated" in statuses:
        return EXIT_VIOLATION
    if "hypothesis-warning" in statuses:
        return EXIT_WARNING
    return EXIT_OK


def execute(cfg: RunConfig) -> tuple:
    """Run every requested check; returns ``(exit_code, report_dict, csv_rows)``."""
    try:
        T = make(cfg.spec)
    except GeometryError as exc:
        line, col = cfg.locate("geometry", "kind")
        raise ConfigError(str(exc), line, col) from None
    except ParseError as exc:
        raise _expr_error(cfg, "geometry", exc) from None
    n = T.dimension
    instance = None
    try:
        if cfg.u is not None:
            from .smooth import Expression
            u = Expression(cfg.u, n)
        if cfg.F is not None:
            from .smooth import univariate
            Fn = univariate(cfg.F)
    except ParseError as exc:
        key = "u" if cfg.u is not None and _fails(cfg.u, n) else "f"
        raise _expr_error(cfg, "problem", exc, key) from None
    if cfg.u is not None and cfg.F is not None and "box" in cfg.grid:
        if len(cfg.grid["box"]) != n:
            line, col = cfg.locate("grid", "box")
            raise ConfigError(f"box has {len(cfg.grid['box'])} axes, geometry has dimension {n}", line, col)
        try:
            grid = build_grid(cfg.grid["box"], cfg.grid["nodes"], cfg.grid["rule"], panels=cfg.grid["panels"],
                              log_weight=T.log_weight)
        except QuadratureError as exc:
            line, col = cfg.locate("grid", "box")
            raise ConfigError(str(exc), line, col) from None
        instance = V.ProblemInstance(T, u, Fn, grid)
    box = cfg.sample_box or (cfg.grid.get("box") if "box" in cfg.grid else [(-1.0, 1.0)] * n)
    if len(box) != n:
        raise ConfigError(f"sample box has {len(box)} axes, geometry has dimension {n}")
    pts = sobol_points(box, cfg.samples, cfg.seed)

    results, rows = [], []
    for name in cfg.checks:
        if name not in CHECKS:
            line, col = cfg.locate("run", "checks")
            raise ConfigError(f"unknown check {name!r}; expected one of {', '.join(CHECKS)}", line, col)
        try:
            out = _run_check(name, cfg, T, instance, pts, rows)
        except V.ConfigurationError as exc:
            raise ConfigError(f"{name}: {exc}") from None
        out["check"] = name
        results.append(out)
    code = _exit_code([r["status"] for r in results])
    report = {"schema": SCHEMA, "config": os.path.basename(cfg.path), "geometry": T.name,
              "geometry_meta": T.meta, "seed": cfg.seed, "samples": cfg.samples,
              "u": cfg.u, "F": cfg.F, "checks": results, "exit_code": code}
    return code, report, rows


def _fails(src, n) -> bool:
    from .expr import parse
    try:
        parse(src, n)
        return False
    except ParseError:
        return True


def _expr_error(cfg: RunConfig, section: str, exc: ParseError, key: str | None = None) -> ConfigError:
    d = exc.diagnostics[0]
    line, col = cfg.locate(section, key) if key else (None, None)
    return ConfigError(f"[{section}] {key or 'expression'}: {d.message} (offset {d.offset})",
                       line, None if col is None else col + d.offset)


def _write(out_dir: str, report: dict, rows: list) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        fh.write(dumps(report))
    if rows:
        by_check = {}
        for pt, m, name in rows:
            by_check.setdefault(name, []).append((pt, m))
        with open(os.path.join(out_dir, "margins.csv"), "w", encoding="utf-8") as fh:
            first = True
            for name, rs in by_check.items():
                text = rows_to_csv(rs, name)
                fh.write(text if first else text.split("\n", 1)[1])
                first = False


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="carre", description="Certify carre du champ inequalities on a configured instance.")
    ap.add_argument("--config", required=True, help="INI run configuration")
    ap.add_argument("--out", default="carre-reports", help="directory for report.json and margins.csv")
    ap.add_argument("--threads", type=int, default=None, help="worker threads for pointwise evaluation")
    ap.add_argument("--seed", type=int, default=None, help="seed for sample points and random functions")
    ap.add_argument("--check", action="append", choices=CHECKS, help="check to run (repeatable, overrides the config)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.check:
            cfg.checks = list(args.check)
        threads = args.threads if args.threads is not None else cfg.threads
        if threads < 1:
            raise ConfigError("--threads must be at least 1")
        parallel.set_threads(threads)
        code, report, rows = execute(cfg)
    except ConfigError as exc:
        print(f"{args.config}: {exc}", file=sys.stderr)
        _write(args.out, {"schema": SCHEMA, "config": os.path.basename(args.config), "error": str(exc),
                          "exit_code": EXIT_CONFIG}, [])
        return EXIT_CONFIG
    finally:
        parallel.set_threads(1)
    _write(args.out, report, rows)
    for r in report["checks"]:
        print(f"{r['check']:<10} {r['status']}")
    return code


if __name__ == "__main__":
    sys.exit(main())
