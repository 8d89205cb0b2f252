"""Zero contours of polar fields: marching squares in ``(r, theta)`` with seam wrap.

The boundary of ``{u > 0}`` and the boundary of ``{u < 0}`` are traced
separately, so a zero layer between the phases produces two contours
and a direct sign change produces two coincident ones.  Cells touching
the vertex are triangles ``(vertex, (1, j), (1, j+1))``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from conefree.grids import PolarGrid, ScalarField

# marching-squares corner order: (i, j), (i+1, j), (i+1, j+1), (i, j+1)
_CELL_EDGES = ((0, 1), (1, 2), (2, 3), (3, 0))


@dataclass
class FreeBoundary:
    """Contour segments in polar coordinates, tagged ``+1`` for ``d{u>0}``, ``-1`` for ``d{u<0}``."""

    segments: list = field(default_factory=list)
    tags: list = field(default_factory=list)
    vertex_distance: float = math.inf

    @property
    def points(self) -> np.ndarray:
        if not self.segments:
            return np.zeros((0, 2))
        return np.array([p for seg in self.segments for p in seg])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["segment", "phase", "r", "theta"])
        for k, (seg, tag) in enumerate(zip(self.segments, self.tags)):
            for r, th in seg:
                w.writerow([k, tag, repr(float(r)), repr(float(th))])
        return buf.getvalue()


def _crossing(pa, pb, fa, fb):
    # fa > 0 >= fb; fraction measured from a
    t = fa / (fa - fb)
    return (pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1]))


def _trace(grid: PolarGrid, f: np.ndarray, tag: int, out: FreeBoundary) -> None:
    nr, nt, dr, dt = grid.n_r, grid.n_theta, grid.dr, grid.dtheta
    l = grid.cone.length
    inside = f > 0
    ring = inside[1:].reshape(nr, nt)
    vals = f[1:].reshape(nr, nt)

    # quad cells between rings i and i+1 (1-based rings), wrapping in theta
    a, b = ring[:-1], ring[1:]
    c, d = np.roll(b, -1, axis=1), np.roll(a, -1, axis=1)
    count = a.astype(int) + b + c + d
    for i0, j in zip(*np.nonzero((count > 0) & (count < 4))):
        i = i0 + 1
        pts = [(i * dr, j * dt), ((i + 1) * dr, j * dt), ((i + 1) * dr, (j + 1) * dt), (i * dr, (j + 1) * dt)]
        fv = [vals[i0, j], vals[i0 + 1, j], vals[i0 + 1, (j + 1) % nt], vals[i0, (j + 1) % nt]]
        ins = [v > 0 for v in fv]
        cross = []
        for e, (p, q) in enumerate(_CELL_EDGES):
            if ins[p] != ins[q]:
                if ins[p]:
                    cross.append((e, _crossing(pts[p], pts[q], fv[p], fv[q])))
                else:
                    cross.append((e, _crossing(pts[q], pts[p], fv[q], fv[p])))
        if len(cross) == 2:
            segs = [(cross[0][1], cross[1][1])]
        else:
            # saddle: connect so that the center's class separates correctly
            center_in = sum(fv) / 4.0 > 0
            by_edge = dict(cross)
            if ins[0] == center_in:
                segs = [(by_edge[0], by_edge[1]), (by_edge[2], by_edge[3])]
            else:
                segs = [(by_edge[3], by_edge[0]), (by_edge[1], by_edge[2])]
        for s, e in segs:
            out.segments.append(((s[0], s[1] % l), (e[0], e[1] % l)))
            out.tags.append(tag)

    # vertex fan triangles
    v_in = bool(inside[0])
    v_pt = (0.0, 0.0)
    for j in range(nt):
        k = (j + 1) % nt
        pts = [v_pt, (dr, j * dt), (dr, (j + 1) * dt)]
        fv = [f[0], vals[0, j], vals[0, k]]
        ins = [v_in, bool(ring[0, j]), bool(ring[0, k])]
        if all(ins) or not any(ins):
            continue
        cross = []
        for p, q in ((0, 1), (1, 2), (2, 0)):
            if ins[p] != ins[q]:
                if ins[p]:
                    cross.append(_crossing(pts[p], pts[q], fv[p], fv[q]))
                else:
                    cross.append(_crossing(pts[q], pts[p], fv[q], fv[p]))
        (r0, t0), (r1, t1) = cross
        # the vertex has no angle of its own
        t0 = t1 if r0 == 0.0 else t0
        t1 = t0 if r1 == 0.0 else t1
        out.segments.append(((r0, t0 % l), (r1, t1 % l)))
        out.tags.append(tag)


def vertex_passage(grid: PolarGrid, values: np.ndarray, contour_min_r: float) -> bool:
    """Grid-honest test for the free boundary passing through the vertex."""
    if contour_min_r <= grid.dr * (1 + 1e-12):
        return True
    if values[0] != 0.0:
        return False
    first = values[1 : 1 + grid.n_theta]
    classes = set(np.sign(first).astype(int).tolist())
    return len(classes) >= 2 and classes != {0}


def extract_free_boundary(field: ScalarField) -> FreeBoundary:
    grid, u = field.grid, field.values
    fb = FreeBoundary()
    _trace(grid, u, 1, fb)
    _trace(grid, -u, -1, fb)
    if not fb.segments:
        return fb
    rmin = float(fb.points[:, 0].min())
    fb.vertex_distance = 0.0 if vertex_passage(grid, u, rmin) else rmin
    return fb
