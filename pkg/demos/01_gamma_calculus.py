"""
Gamma calculus on a few model spaces
====================================

Gamma, L and Gamma_2 evaluated from Taylor jets, and the ways a
second-order operator can fail to produce a good carre du champ.
"""

# %%
import numpy as np

from carre import gamma, gamma2, operator_L, validate_axioms
from carre.geometries import by_name
from carre.sampling import random_pairs, sobol_points
from carre.triple import GeneralOperator, gamma_from_L

# %% [markdown]
# Flat plane versus Gaussian space.  For the Gaussian weight the drift
# adds |grad f|^2 to Gamma_2, which is the curvature bound K = 1.

# %%
E = by_name("euclidean-weighted", dimension=2)
OU = by_name("ornstein-uhlenbeck", dimension=2)
x = np.array([0.5, -1.0])
print("L(x1^2 + x2^2), flat      :", operator_L(E, "x1^2 + x2^2", x))
print("L(x1), Gaussian at x1=0.5 :", operator_L(OU, "x1", x))
print("Gamma_2(x1 x2), flat      :", gamma2(E, "x1*x2", "x1*x2", x))
print("Gamma_2(x1 x2), Gaussian  :", gamma2(OU, "x1*x2", "x1*x2", x))

# %% [markdown]
# Heisenberg group, X = d1 - (x2/2) d3 and Y = d2 + (x1/2) d3.

# %%
H = by_name("heisenberg")
print("Gamma(x1^2 + x2^2) at (1,1,0):", gamma(H, "x1^2 + x2^2", "x1^2 + x2^2", [1.0, 1.0, 0.0]))

# %% [markdown]
# The wave operator f_xx - f_yy gives an indefinite Gamma; a first-order
# operator gives Gamma = 0.  Divergence and non-divergence forms with the
# same coefficients share Gamma.

# %%
D = GeneralOperator.dalembert()
print("wave operator, Gamma(y):", gamma_from_L(D, "x2", "x2", [0.2, 0.3]))
print("d/dx, Gamma(sin x):", gamma_from_L(GeneralOperator.derivative(), "sin(x1)", "sin(x1)", [0.4]))
a = [["2 + sin(x1*x2)", "x1/3"], ["x1/3", "1 + x2^2"]]
pts = sobol_points([(-1, 1)] * 2, 5)
print("div vs non-div:", gamma_from_L(GeneralOperator.divergence(a), "x1^2*x2", "x2^3", pts)
      - gamma_from_L(GeneralOperator.nondivergence(a), "x1^2*x2", "x2^3", pts))

# %%
rep = validate_axioms(D, random_pairs(2, 4, seed=0), sobol_points([(-1, 1)] * 2, 64))
for e in rep.entries:
    print(f"{e.name:<22} {'ok ' if e.passed else 'BAD'} {e.max_residual:.2e}")
