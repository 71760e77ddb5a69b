"""Seeded sample points and random test functions."""
from __future__ import annotations

import numpy as np
import scipy.stats.qmc

from .smooth import Expression


def sobol_points(box, count: int, seed: int = 0) -> np.ndarray:
    """``count`` scrambled Sobol points in ``box = [(lo, hi), ...]``, shape (count, n)."""
    box = np.asarray(box, dtype=float).reshape(-1, 2)
    sampler = scipy.stats.qmc.Sobol(d=box.shape[0], scramble=True, seed=seed)
    m = int(np.ceil(np.log2(max(count, 1))))
    u = sampler.random_base2(m)[:count]
    return scipy.stats.qmc.scale(u, box[:, 0], box[:, 1])


def cube(n: int, half_width: float = 1.0) -> list:
    return [(-half_width, half_width)] * n


def random_polynomial_text(n: int, rng: np.random.Generator, degree: int = 3,
                           terms: tuple = (3, 8), min_degree: int = 1) -> str:
    """A sparse polynomial with coefficients in [-1, 1] printed to 3 decimals."""
    k = int(rng.integers(terms[0], terms[1] + 1))
    parts = []
    for _ in range(k):
        d = int(rng.integers(min_degree, degree + 1))
        idx = rng.integers(0, n, size=d)
        c = float(np.round(rng.uniform(-1, 1), 3)) or 0.5
        mono = "*".join(f"x{i + 1}" for i in sorted(idx.tolist()))
        parts.append(f"{c!r}*{mono}")
    return " + ".join(parts).replace("+ -", "- ")


def random_polynomials(n: int, count: int, seed: int = 0, **kw) -> list:
    rng = np.random.default_rng(seed)
    return [Expression(random_polynomial_text(n, rng, **kw), n) for _ in range(count)]


def random_pairs(n: int, count: int, seed: int = 0, **kw) -> list:
    polys = random_polynomials(n, 2 * count, seed, **kw)
    return list(zip(polys[::2], polys[1::2]))
