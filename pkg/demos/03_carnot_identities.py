"""
Bochner identities and curvature on Carnot groups
=================================================
"""

# %%
from carre.fields import hormander_depth
from carre.geometries import by_name
from carre.sampling import random_polynomials, sobol_points
from carre import verify as V

# %%
for kind, params in [("heisenberg", {}), ("engel", {}), ("filiform", {"dimension": 5})]:
    T = by_name(kind, **params)
    pts = sobol_points([(-1, 1)] * T.dimension, 64)
    worst = max(V.bochner_carnot_check(T, u, pts).max_residual for u in random_polynomials(T.dimension, 20))
    print(f"{T.name:<11} depth {hormander_depth(T.frame, pts).depth}  Bochner residual {worst:.1e}")

# %% [markdown]
# No Carnot group of step >= 2 has a lower curvature bound.  A short random
# search finds a function and a point where Gamma_2(f) < 0.

# %%
H = by_name("heisenberg")
found = V.find_cd_violation(H, 0.0, trials=500, seed=0)
print(found)

# %% [markdown]
# Level sets on the filiform group: the Hessian-norm decomposition and the
# two quantities h (mean curvature) and p.

# %%
E4 = by_name("filiform", dimension=4)
rep = V.filiform_levelset_check(E4, "x1^2 + x2*x3 - x4", sobol_points([(-1, 1)] * 4, 8))
for e in rep.entries:
    print(e.name, e.max_residual)
print("h:", rep.meta["h"][:4])
print("p:", rep.meta["p"][:4])
