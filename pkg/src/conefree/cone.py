"""Flat cones of length ``l``: points, geodesics and the unrolled wedge.

A cone of length ``l`` is the punctured plane's universal cover modulo
rotations by ``l``, plus one vertex.  Angles are stored reduced into
``[0, l)``; the seam ``theta = 0 ~ theta = l`` is the same for every
module in the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from conefree.polygons import PlanarPolygonSet

TIE_TOL = 1e-12
BOUNDARY_TOL = 1e-12


@dataclass(frozen=True)
class ConeParams:
    """Cone length and the derived Hölder exponent ``2*pi/l``."""

    length: float

    def __post_init__(self):
        if not (self.length > 0 and math.isfinite(self.length)):
            raise ValueError(f"cone length must be positive and finite, got {self.length!r}")

    @property
    def holder_exponent(self) -> float:
        return 2.0 * math.pi / self.length

    @property
    def half_angle(self) -> float:
        return self.length / 2.0

    def reduce(self, theta):
        """Reduce angle(s) into ``[0, l)``."""
        t = np.mod(theta, self.length)
        if np.ndim(t) == 0:
            t = float(t)
            return 0.0 if t >= self.length else t
        return np.where(t >= self.length, 0.0, t)

    def unrolled_wedge(self) -> "WedgeRegion":
        """Planar region the cone unrolls onto (only for ``l < 2*pi``)."""
        return WedgeRegion(2.0 * math.pi - self.length)


@dataclass(frozen=True)
class ConePoint:
    r: float
    theta: float = 0.0

    def __post_init__(self):
        if self.r < 0:
            raise ValueError("radius must be nonnegative")

    @classmethod
    def on(cls, cone: ConeParams, r: float, theta: float) -> "ConePoint":
        """Point with its angle reduced mod ``l``; the vertex gets ``theta = 0``."""
        if r == 0:
            return cls(0.0, 0.0)
        return cls(float(r), cone.reduce(theta))

    @property
    def is_vertex(self) -> bool:
        return self.r == 0


def angular_gap(theta_p: float, theta_q: float, length: float) -> float:
    d = abs(theta_p - theta_q) % length
    return min(d, length - d)


def geodesic_distance(p: ConePoint, q: ConePoint, cone: ConeParams) -> tuple[float, bool]:
    """Intrinsic distance on the cone and whether the shortest path hits the vertex.

    For an angular gap below ``pi`` the straight chord in the unrolled
    sector is shorter than going through the vertex; at or above ``pi``
    the radial path ``r_p + r_q`` wins.  A gap of exactly ``pi`` (within
    ``1e-12``) is a tie and is reported as through the vertex.
    """
    if p.r == 0 or q.r == 0:
        return p.r + q.r, True
    gap = angular_gap(p.theta, q.theta, cone.length)
    if gap < math.pi - TIE_TOL:
        # law of cosines in a form without cancellation for nearby points
        return math.hypot(p.r - q.r, 2.0 * math.sqrt(p.r * q.r) * math.sin(0.5 * gap)), False
    return p.r + q.r, True


def unroll_to_wedge(p: ConePoint, cone: ConeParams) -> tuple[float, float]:
    """Isometric image of ``p`` in the plane, bisector on the positive x2-axis.

    The polar angle of the image is ``pi/2 + l/2 - theta``: the seam
    ``theta = 0`` goes to the ray on the ``x1 < 0`` side and ``theta = l``
    to the ray on the ``x1 > 0`` side.  For ``l < 2*pi`` the image lies in
    ``cone.unrolled_wedge()``; for larger ``l`` the cut sector overlaps
    itself and only the local isometry survives.
    """
    if p.r == 0:
        raise ValueError("the vertex has no tangent plane; unroll is defined off the vertex")
    phi = 0.5 * math.pi + 0.5 * cone.length - p.theta
    return p.r * math.cos(phi), p.r * math.sin(phi)


@dataclass(frozen=True)
class WedgeRegion:
    """``Omega = {x2 > -cot(l/2)|x1|}``: the plane minus a closed downward sector.

    The removed sector ``R^2 \\ Omega`` has opening ``l`` and is bisected
    by the negative x2-axis, so ``Omega`` itself has opening ``2*pi - l``.
    This is the frame of the half-plane competitor construction.
    """

    length: float

    def __post_init__(self):
        if not (0 < self.length < 2.0 * math.pi):
            raise ValueError("wedge needs 0 < l < 2*pi")

    @property
    def slope(self) -> float:
        """``-cot(l/2)``; the boundary rays are ``x2 = slope*|x1|``."""
        return -1.0 / math.tan(self.length / 2.0)

    def signed_margin(self, x1, x2):
        return np.asarray(x2) - self.slope * np.abs(x1)

    def contains(self, x1, x2):
        return self.signed_margin(x1, x2) > BOUNDARY_TOL

    def on_boundary(self, x1, x2):
        return np.abs(self.signed_margin(x1, x2)) < BOUNDARY_TOL

    def complement_halfplanes(self, slope=None) -> list[tuple]:
        """Half-planes ``a*x1 + b*x2 <= c`` cutting out ``R^2 \\ Omega`` when it is convex.

        Only valid for ``l <= pi`` (where the complement is the convex
        region below two rays).  ``slope`` may be passed as an exact
        rational to keep clipping exact.
        """
        if self.length > math.pi:
            raise ValueError("complement is not convex for l > pi")
        k = self.slope if slope is None else slope
        # x2 <= k*|x1| with k <= 0  <=>  x2 - k*x1 <= 0 and x2 + k*x1 <= 0
        return [(-k, 1, 0), (k, 1, 0)]


def exact_slope(length: float):
    """``-cot(l/2)`` as a Fraction when ``l`` is a rational multiple of pi with rational cotangent."""
    from fractions import Fraction

    known = {0.5: Fraction(-1), 1.0: Fraction(0), 1.5: Fraction(1)}
    ratio = length / math.pi
    for key, val in known.items():
        if abs(ratio - key) < 1e-14:
            return val
    return -1.0 / math.tan(length / 2.0)


def wedge_complement_strip(cone: ConeParams, depth, width=None) -> PlanarPolygonSet:
    """``(R^2 \\ Omega) ∩ {-depth <= x2 <= 0}`` as a polygon.

    For ``l < pi`` it is the triangle with apex at the origin and
    half-width ``depth*tan(l/2)`` at the bottom.  For ``pi <= l < 2*pi``
    the set is the whole strip (the removed sector covers the lower
    half-plane), which is cut to ``|x1| <= width/2``; ``width`` defaults
    to ``2*depth``.
    """
    from fractions import Fraction

    l = cone.length
    if l >= 2.0 * math.pi:
        raise ValueError("Omega is undefined for l >= 2*pi")
    depth = Fraction(depth) if isinstance(depth, (int, Fraction)) else depth
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    if depth == 0:
        return PlanarPolygonSet.empty()
    if l < math.pi - 1e-15:
        k = exact_slope(l)
        half = depth / (-k) if not isinstance(k, float) else depth * math.tan(l / 2.0)
        loop = [(0 * depth, 0 * depth), (-half, -depth), (half, -depth)]
        return PlanarPolygonSet.from_loops([loop], symmetric=True)
    w = 2 * depth if width is None else width
    half = w / 2
    loop = [(-half, 0 * depth), (-half, -depth), (half, -depth), (half, 0 * depth)]
    return PlanarPolygonSet.from_loops([loop], symmetric=True)
