"""
The Allen-Cahn kink on the line
===============================

u = tanh(x / sqrt 2) solves u'' + u - u^3 = 0.  It is stable, and in one
dimension Gamma_2(u) equals Gamma(sqrt Gamma(u)), so the left side of the
geometric Poincare inequality vanishes.  The constant solution u = 0 is a
solution too, but unstable on long intervals.
"""

# %%
import math

import numpy as np
import scipy.linalg

from carre.geometries import by_name
from carre.quad import build_grid
from carre import verify as V

T = by_name("euclidean-weighted", dimension=1)
grid = build_grid([(-10, 10)], 8, panels=50)
kink = V.ProblemInstance(T, "tanh(x1/sqrt(2))", "s - s^3", grid)

# %%
res = V.residual(kink)
print("pointwise residual:", res.entry("pointwise").max_residual)
print("weak residual     :", res.entry("weak").max_residual)

# %% [markdown]
# Second variation on 120 compactly supported bumps, compared with a
# dense finite-difference eigensolve of -phi'' + (3u^2 - 1) phi.

# %%
spec = V.stability_spectrum(kink, 120, tol=1e-3)
xs = np.linspace(-10, 10, 4002)[1:-1]
h = xs[1] - xs[0]
fd = scipy.linalg.eigh_tridiagonal(2 / h**2 + 3 * np.tanh(xs / math.sqrt(2)) ** 2 - 1, -np.ones(len(xs) - 1) / h**2,
                                   select="i", select_range=(0, 0))[0][0]
print("lowest eigenvalues:", np.round(spec.eigenvalues, 5), spec.verdict)
print("finite differences:", fd)

# %%
cert = V.poincare_certificate(kink, V.random_bumps(grid, 20, seed=0), basis_size=120, gate_tol=1e-3)
print(cert.status, "margin", cert.margin, "max |LHS|", max(map(abs, cert.lhs)))

# %%
print(V.rigidity_report(kink, 0.0).status, V.rigidity_report(kink, 1.0).status)

# %% [markdown]
# u = 0: the bottom Dirichlet eigenvalue is -1 + (pi / 2L)^2.

# %%
for L in (5, 10):
    zero = V.ProblemInstance(T, "0", "s - s^3", build_grid([(-L, L)], 8, panels=5 * L))
    s = V.stability_spectrum(zero, 120)
    print(f"L={L}: {s.lambda_min:.4f} (exact {-1 + (math.pi / (2 * L)) ** 2:.4f}) {s.verdict}")
