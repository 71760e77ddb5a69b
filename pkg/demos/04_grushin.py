"""
The Grushin plane
=================

Z1 = d/dx and Z2 = x^alpha d/dy.  Here Z3 = [Z1, Z2] = alpha x^(alpha-1) d/dy
is not central once alpha >= 2: [Z1, Z3] = alpha (alpha-1) x^(alpha-2) d/dy.
That bracket enters the commutation of Delta_Z with Z2 and the Gamma_2
formula.
"""

# %%
import numpy as np

from carre.fields import hormander_depth
from carre.geometries import by_name
from carre.sampling import sobol_points
from carre import verify as V

pts = sobol_points([(-1, 1)] * 2, 64)

# %%
for alpha in (1, 2, 3):
    G = by_name("grushin", alpha=alpha)
    rep = V.grushin_gamma2_check(G, "x2", points=pts)
    g2 = rep.entry("gamma2-formula")
    print(f"alpha={alpha}: complete form {g2.max_residual:.1e}, without [Z1,Z3] term "
          f"{g2.detail['without_correction']:.1e}")

# %% [markdown]
# Gamma_2(y) computed from the definition is alpha (2 alpha - 1) x^(2 alpha - 2).

# %%
from carre.smooth import Expression

for alpha in (1, 2, 3):
    G = by_name("grushin", alpha=alpha)
    loc = G.at(pts, 4)
    g2 = loc.gamma2(loc.fn(Expression("x2", 2))).value
    hand = alpha * (2 * alpha - 1) * pts[:, 0] ** (2 * alpha - 2)
    print(f"alpha={alpha}: max |Gamma_2(y) - alpha(2 alpha - 1) x^(2 alpha - 2)| = {np.abs(g2 - hand).max():.1e}")

G = by_name("grushin", alpha=2)

# %% [markdown]
# Solutions depending on x only: tanh(x / sqrt 2) with F(s) = s - s^3.

# %%
rep = V.grushin_gamma2_check(G, "tanh(x1/sqrt(2))", "s - s^3", pts)
for e in rep.entries:
    print(f"{e.name:<16} {e.max_residual:.1e}")

# %% [markdown]
# Bracket depth: one step off the axis, two in a thin strip, three on it.

# %%
probe = np.array([[0.5, 0.0], [5e-4, 0.0], [0.0, 0.0]])
print(hormander_depth(G.frame, probe, tol=1e-6).per_point_depth)
