"""Two-phase Bernoulli free boundaries on flat two-dimensional cones.

Numerical tools for minimizers of

    J(u) = int |Du|^2 + lam_plus * chi{u>0} + lam_minus * chi{u<0}

on a cone of length ``l`` (the quotient of the universal cover of the
punctured plane by rotations of angle ``l``), together with the
half-plane competitor construction used to keep the free boundary away
from the vertex when ``l < 2*pi``.
"""

from conefree.cone import ConeParams, ConePoint, WedgeRegion, geodesic_distance, unroll_to_wedge
from conefree.fourier import FourierHarmonic
from conefree.grids import CartesianGrid, PolarGrid, ScalarField

__all__ = [
    "CartesianGrid",
    "ConeParams",
    "ConePoint",
    "FourierHarmonic",
    "PolarGrid",
    "ScalarField",
    "WedgeRegion",
    "geodesic_distance",
    "unroll_to_wedge",
]

__version__ = "0.1.0"
