"""Numerical construction and validation of special Lagrangian 3-folds in C^3
built from evolution equations."""

__version__ = "0.1.0"

from . import analysis, cgeom, evodata, families, flow, specfun, symmetry  # noqa: E402,F401
from .cgeom import cross, herm, omega  # noqa: E402,F401
from .families import assemble_phi  # noqa: E402,F401
