"""Exact planar polygons for the half-plane competitor sets.

Coordinates are :class:`fractions.Fraction` whenever the inputs are
rational, so areas and clipped vertices come out exact.  Mixing in a
``float`` (an irrational wedge slope, say) silently degrades the
arithmetic to floating point; nothing else changes.

Competitor sets built by the iteration are always *depth profiles*

    E = {(x1, x2) : -d(x1) < x2 < 0,  |x1| < w}

with ``d`` piecewise linear and ``d(+-w) = 0``.  :class:`DepthProfile`
stores that representation and converts to the loop representation of
:class:`PlanarPolygonSet`.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from numbers import Real
from typing import Iterable, Sequence

import numpy as np

Point = tuple[Real, Real]


def as_exact(value) -> Real:
    """Convert ints/strings/Fractions to Fraction; leave floats alone."""
    if isinstance(value, (Fraction, int)):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    return float(value)


def shoelace(loop: Sequence[Point]) -> Real:
    """Signed area of a closed vertex loop (positive when counter-clockwise)."""
    n = len(loop)
    if n < 3:
        return Fraction(0)
    acc = Fraction(0)
    for i in range(n):
        x0, y0 = loop[i]
        x1, y1 = loop[(i + 1) % n]
        acc += x0 * y1 - x1 * y0
    return acc / 2


def clip_halfplane(loop: Sequence[Point], a, b, c) -> list[Point]:
    """Sutherland-Hodgman clip of ``loop`` to ``a*x + b*y <= c``."""
    if not loop:
        return []

    def side(p):
        return a * p[0] + b * p[1] - c

    out: list[Point] = []
    n = len(loop)
    for i in range(n):
        cur = loop[i]
        nxt = loop[(i + 1) % n]
        sc, sn = side(cur), side(nxt)
        if sc <= 0:
            out.append(cur)
        if (sc < 0 < sn) or (sn < 0 < sc):
            lam = sc / (sc - sn)
            out.append((cur[0] + lam * (nxt[0] - cur[0]), cur[1] + lam * (nxt[1] - cur[1])))
    return _dedupe(out)


def clip_convex(loop: Sequence[Point], halfplanes: Iterable[tuple]) -> list[Point]:
    """Clip against the intersection of half-planes ``a*x + b*y <= c``."""
    out = list(loop)
    for a, b, c in halfplanes:
        out = clip_halfplane(out, a, b, c)
        if len(out) < 3:
            return []
    return out


def _dedupe(loop: list[Point]) -> list[Point]:
    out: list[Point] = []
    for p in loop:
        if not out or (p[0] != out[-1][0] or p[1] != out[-1][1]):
            out.append(p)
    if len(out) > 1 and out[0][0] == out[-1][0] and out[0][1] == out[-1][1]:
        out.pop()
    return out


@dataclass(frozen=True)
class PlanarPolygonSet:
    """A finite union of simple polygons with disjoint interiors.

    Loops are stored counter-clockwise.  ``symmetric`` records that the
    set was built symmetric about ``{x1 = 0}``; :meth:`is_symmetric`
    checks it on the vertex coordinates.
    """

    loops: tuple[tuple[Point, ...], ...]
    symmetric: bool = False

    @classmethod
    def from_loops(cls, loops: Iterable[Sequence[Sequence]], symmetric: bool = False) -> "PlanarPolygonSet":
        fixed = []
        for loop in loops:
            pts = [(as_exact(x), as_exact(y)) for x, y in loop]
            pts = _dedupe(pts)
            if len(pts) < 3:
                continue
            if shoelace(pts) < 0:
                pts.reverse()
            fixed.append(tuple(pts))
        return cls(tuple(fixed), symmetric)

    @classmethod
    def empty(cls) -> "PlanarPolygonSet":
        return cls((), True)

    @property
    def is_empty(self) -> bool:
        return len(self.loops) == 0

    @property
    def area(self) -> Real:
        return sum((shoelace(loop) for loop in self.loops), Fraction(0))

    def bounds(self) -> tuple[Real, Real, Real, Real]:
        if self.is_empty:
            return (0, 0, 0, 0)
        xs = [p[0] for loop in self.loops for p in loop]
        ys = [p[1] for loop in self.loops for p in loop]
        return (min(xs), max(xs), min(ys), max(ys))

    @property
    def half_width(self) -> Real:
        x0, x1, _, _ = self.bounds()
        return max(abs(x0), abs(x1))

    def in_lower_strip(self) -> bool:
        """True when every vertex lies in ``R x [-1, 0]``."""
        _, _, y0, y1 = self.bounds()
        return self.is_empty or (y0 >= -1 and y1 <= 0)

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        """Mirror test about ``{x1 = 0}`` on the vertex sets."""
        mine = sorted((float(x), float(y)) for loop in self.loops for x, y in loop)
        mirrored = sorted((-float(x), float(y)) for loop in self.loops for x, y in loop)
        if len(mine) != len(mirrored):
            return False
        return all(abs(a[0] - b[0]) <= tol and abs(a[1] - b[1]) <= tol for a, b in zip(mine, mirrored))

    def scaled(self, t) -> "PlanarPolygonSet":
        t = as_exact(t)
        return PlanarPolygonSet(
            tuple(tuple((t * x, t * y) for x, y in loop) for loop in self.loops), self.symmetric
        )

    def translated(self, dx, dy) -> "PlanarPolygonSet":
        dx, dy = as_exact(dx), as_exact(dy)
        return PlanarPolygonSet(
            tuple(tuple((x + dx, y + dy) for x, y in loop) for loop in self.loops), self.symmetric
        )

    def clipped(self, halfplanes: Sequence[tuple]) -> "PlanarPolygonSet":
        """Intersection with a convex region given as half-planes."""
        loops = [clip_convex(loop, halfplanes) for loop in self.loops]
        return PlanarPolygonSet(tuple(tuple(lp) for lp in loops if len(lp) >= 3), False)

    def contains_points(self, pts: np.ndarray) -> np.ndarray:
        """Even-odd membership for an ``(n, 2)`` array (boundary unspecified)."""
        pts = np.asarray(pts, dtype=float)
        inside = np.zeros(len(pts), dtype=bool)
        x, y = pts[:, 0], pts[:, 1]
        for loop in self.loops:
            v = np.array([(float(a), float(b)) for a, b in loop])
            xa, ya = v[:, 0], v[:, 1]
            xb, yb = np.roll(xa, -1), np.roll(ya, -1)
            for k in range(len(v)):
                crosses = (ya[k] > y) != (yb[k] > y)
                with np.errstate(divide="ignore", invalid="ignore"):
                    xint = xa[k] + (y - ya[k]) * (xb[k] - xa[k]) / (yb[k] - ya[k])
                inside ^= crosses & (x < xint)
        return inside

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["loop", "index", "x1", "x2"])
        for li, loop in enumerate(self.loops):
            for vi, (x, y) in enumerate(loop):
                w.writerow([li, vi, _fmt(x), _fmt(y)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, symmetric: bool = False) -> "PlanarPolygonSet":
        rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].startswith("#")]
        loops: dict[int, list] = {}
        for row in rows[1:]:
            loops.setdefault(int(row[0]), []).append((_parse(row[2]), _parse(row[3])))
        return cls(tuple(tuple(loops[k]) for k in sorted(loops)), symmetric)


def _fmt(v) -> str:
    if isinstance(v, Fraction):
        return str(v)
    return repr(float(v))


def _parse(s: str):
    if "." in s or "e" in s or "inf" in s or "nan" in s:
        return float(s)
    return Fraction(s)


@dataclass(frozen=True)
class DepthProfile:
    """The set ``{-d(x1) < x2 < 0}`` for a piecewise-linear depth ``d``.

    ``xs`` is strictly increasing with ``d = 0`` at both ends and
    ``d > 0`` strictly inside.
    """

    xs: tuple
    ds: tuple

    def __post_init__(self):
        if len(self.xs) != len(self.ds):
            raise ValueError("xs and ds differ in length")
        if len(self.xs) < 3:
            raise ValueError("a depth profile needs at least three breakpoints")
        if self.ds[0] != 0 or self.ds[-1] != 0:
            raise ValueError("depth must vanish at both ends")
        if any(b <= a for a, b in zip(self.xs, self.xs[1:])):
            raise ValueError("breakpoints must increase strictly")
        if any(d <= 0 for d in self.ds[1:-1]):
            raise ValueError("depth must be positive inside")

    @property
    def half_width(self):
        return max(abs(self.xs[0]), abs(self.xs[-1]))

    @property
    def max_depth(self):
        return max(self.ds)

    @property
    def area(self):
        acc = Fraction(0)
        for i in range(len(self.xs) - 1):
            acc += (self.xs[i + 1] - self.xs[i]) * (self.ds[i] + self.ds[i + 1]) / 2
        return acc

    def depth(self, x: np.ndarray) -> np.ndarray:
        """Float evaluation of ``d`` (zero outside the support)."""
        xs = np.array([float(v) for v in self.xs])
        ds = np.array([float(v) for v in self.ds])
        return np.interp(x, xs, ds, left=0.0, right=0.0)

    def is_symmetric(self) -> bool:
        n = len(self.xs)
        return all(self.xs[i] == -self.xs[n - 1 - i] and self.ds[i] == self.ds[n - 1 - i] for i in range(n))

    def scaled(self, t) -> "DepthProfile":
        t = as_exact(t)
        return DepthProfile(tuple(t * x for x in self.xs), tuple(t * d for d in self.ds))

    def to_polygon(self) -> PlanarPolygonSet:
        # bottom left->right; the closing edge is the top, traversed right->left
        loop = _dedupe([(x, -d) for x, d in zip(self.xs, self.ds)])
        return PlanarPolygonSet((tuple(loop),), self.is_symmetric())

    @classmethod
    def from_polygon(cls, poly: PlanarPolygonSet) -> "DepthProfile":
        """Recover the profile of a single-loop set hanging from ``{x2 = 0}``."""
        if len(poly.loops) != 1:
            raise ValueError("depth profiles have exactly one loop")
        loop = list(poly.loops[0])
        # rotate so the loop starts at the leftmost top vertex
        tops = [i for i, p in enumerate(loop) if p[1] == 0]
        if len(tops) != 2:
            raise ValueError("set must touch {x2 = 0} along exactly one edge")
        i_left = min(tops, key=lambda i: loop[i][0])
        loop = loop[i_left:] + loop[:i_left]
        xs = [p[0] for p in loop]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("lower boundary is not a graph over x1")
        if any(p[1] >= 0 for p in loop[1:-1]):
            raise ValueError("interior vertices must lie strictly below {x2 = 0}")
        return cls(tuple(xs), tuple(-p[1] for p in loop))


def triangle_profile(c) -> DepthProfile:
    """Isosceles triangle with top edge ``[-c, c] x {0}`` and apex ``(0, -1)``."""
    c = as_exact(c)
    if c <= 0:
        raise ValueError("c must be positive")
    return DepthProfile((-c, Fraction(0), c), (Fraction(0), Fraction(1), Fraction(0)))


def trapezoid_profile(t, a, b) -> DepthProfile:
    """Trapezoid with vertices ``(+-a, 0)`` and ``(+-b, -(1 - t))``."""
    t, a, b = as_exact(t), as_exact(a), as_exact(b)
    if not a > b > 0:
        raise ValueError("need a > b > 0")
    h = 1 - t
    return DepthProfile((-a, -b, b, a), (0 * h, h, h, 0 * h))


def shrink_translate_union(profile: DepthProfile, t, a, b) -> DepthProfile:
    """Exact profile of ``T_{t,a,b}`` united with ``t*E - (1 - t) e2``.

    The shifted copy hangs from the bottom edge of the trapezoid, so the
    union is again a depth profile as long as ``t * w <= b``.
    """
    t, a, b = as_exact(t), as_exact(a), as_exact(b)
    if not 0 < t < 1:
        raise ValueError("t must lie in (0, 1)")
    if not a > b > 0:
        raise ValueError("need a > b > 0")
    h = 1 - t
    inner = profile.scaled(t)
    if inner.half_width > b:
        raise ValueError("scaled set is wider than the trapezoid floor; increase b")
    xs = [-a, -b] if inner.xs[0] > -b else [-a]
    ds = [0 * h, h] if inner.xs[0] > -b else [0 * h]
    for x, d in zip(inner.xs, inner.ds):
        xs.append(x)
        ds.append(h + d)
    if inner.xs[-1] < b:
        xs += [b, a]
        ds += [h, 0 * h]
    else:
        xs.append(a)
        ds.append(0 * h)
    # merge collinear breakpoints on the flat floor
    return _simplify(DepthProfile(tuple(xs), tuple(ds)))


def _simplify(p: DepthProfile) -> DepthProfile:
    xs, ds = list(p.xs), list(p.ds)
    i = 1
    while i < len(xs) - 1:
        x0, x1, x2 = xs[i - 1], xs[i], xs[i + 1]
        d0, d1, d2 = ds[i - 1], ds[i], ds[i + 1]
        if (d1 - d0) * (x2 - x1) == (d2 - d1) * (x1 - x0):
            del xs[i], ds[i]
        else:
            i += 1
    return DepthProfile(tuple(xs), tuple(ds))
