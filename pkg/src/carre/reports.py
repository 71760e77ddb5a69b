"""Structured verdicts with worst-case witnesses, serializable to JSON and CSV."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

SCHEMA = "carre.report/1"


def _clean(obj: Any) -> Any:
    """Make numpy-laden structures JSON-ready (non-finite floats become strings)."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


def dumps(obj: dict) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


@dataclass
class Witness:
    value: float
    point: list | None = None
    point_index: int | None = None
    function: str | None = None
    function_index: int | None = None
    reported: float | None = None  # the unscaled quantity at the witness

    def to_dict(self) -> dict:
        return dict(self.__dict__)


class WorstTracker:
    """Track the worst (largest) score; ties keep the earliest candidate."""

    def __init__(self):
        self.best: Witness | None = None

    def offer(self, scores: np.ndarray, points: np.ndarray, function: str | None = None,
              function_index: int | None = None, value=None) -> None:
        scores = np.atleast_1d(np.asarray(scores, dtype=float))
        scores = np.where(np.isnan(scores), np.inf, scores)
        k = int(np.argmax(scores))  # first occurrence on ties
        s = float(scores[k])
        if self.best is None or s > self.best.value:
            v = s if value is None else float(np.atleast_1d(value)[k])
            pts = np.atleast_2d(points)
            self.best = Witness(s, pts[k].tolist(), k, function, function_index, v)


@dataclass
class Entry:
    name: str
    max_residual: float
    passed: bool
    witness: Witness | None = None
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "max_residual": self.max_residual, "passed": self.passed,
                "witness": self.witness.to_dict() if self.witness else None, "detail": self.detail}


@dataclass
class IdentityReport:
    name: str
    entries: list
    tol: float
    warnings: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def entry(self, name: str) -> Entry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    @property
    def max_residual(self) -> float:
        return max((e.max_residual for e in self.entries), default=0.0)

    @property
    def status(self) -> str:
        if not self.passed:
            return "violated"
        return "hypothesis-warning" if self.warnings else "holds"

    def to_dict(self) -> dict:
        return {"schema": SCHEMA, "kind": "identity", "name": self.name, "tol": self.tol,
                "status": self.status, "passed": self.passed,
                "entries": [e.to_dict() for e in self.entries],
                "warnings": self.warnings, "meta": self.meta}


@dataclass
class InequalityReport:
    """``margin`` is the smallest sampled value of (right side - left side)."""

    name: str
    lhs: Any
    rhs: Any
    margin: float
    tol: float
    witness: Witness | None = None
    hypotheses_ok: bool | None = None
    warnings: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)  # per-point (coords, margin) for CSV

    @property
    def verdict(self) -> bool:
        return bool(self.margin >= -self.tol)

    @property
    def status(self) -> str:
        if self.hypotheses_ok is False:
            return "hypothesis-warning"
        if not self.verdict:
            return "violated"
        return "holds"

    def to_dict(self) -> dict:
        return {"schema": SCHEMA, "kind": "inequality", "name": self.name, "lhs": self.lhs,
                "rhs": self.rhs, "margin": self.margin, "tol": self.tol, "verdict": self.verdict,
                "status": self.status, "hypotheses_ok": self.hypotheses_ok,
                "witness": self.witness.to_dict() if self.witness else None,
                "warnings": self.warnings, "meta": self.meta}


@dataclass
class SpectrumReport:
    basis: str
    shape: tuple
    eigenvalues: np.ndarray
    tol: float
    witness: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def lambda_min(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def stable(self) -> bool:
        return self.lambda_min >= -self.tol

    @property
    def verdict(self) -> str:
        return "stable within tol" if self.stable else "unstable"

    @property
    def status(self) -> str:
        return "holds" if self.stable else "violated"

    def to_dict(self) -> dict:
        return {"schema": SCHEMA, "kind": "spectrum", "basis": self.basis, "shape": list(self.shape),
                "eigenvalues": self.eigenvalues, "lambda_min": self.lambda_min, "tol": self.tol,
                "verdict": self.verdict, "status": self.status,
                "witness": None if self.stable or self.witness is None else self.witness,
                "meta": self.meta}


def rows_to_csv(rows, check: str) -> str:
    """CSV with columns ``x1..xn, margin, check``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if rows:
        n = len(rows[0][0])
        w.writerow([f"x{i + 1}" for i in range(n)] + ["margin", "check"])
        for pt, m in rows:
            w.writerow([repr(float(v)) for v in pt] + [repr(float(m)), check])
    else:
        w.writerow(["margin", "check"])
    return buf.getvalue()
