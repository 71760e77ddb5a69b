"""Carre du champ calculus for frames of vector fields, with numerical certificates."""
from .expr import ExprAst, ParseDiagnostic, ParseError, eval_jet, parse, pretty
from .fields import VectorField, bracket, hormander_depth
from .geometries import GeometrySpec, make
from .jet import Jet
from .quad import build_grid, cutoff, integrate
from .smooth import Bump, Expression, SmoothFunction, TensorBump, as_function, univariate
from .triple import (GeneralOperator, MarkovTriple, gamma, gamma2, gamma_from_L, gamma_sqrt_reg,
                     operator_L, validate_axioms)

__version__ = "0.1.0"
