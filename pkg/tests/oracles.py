"""Independent reference computations used only by the tests."""

from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra


def cone_graph(length: float, n_theta: int = 2048, n_r: int = 32, radius: float = 1.0,
               ring_reach: int = 2, direction_step: float = 0.08):
    """Weighted graph on a polar lattice of the cone; node 0 is the vertex.

    From every node, edges go to the rings up to ``ring_reach`` further out
    at angular offsets chosen so that the edge directions are spaced about
    ``direction_step`` radians apart, plus the two ring neighbours.  Edge
    lengths come from the flat law of cosines, valid because each edge
    spans well under ``pi`` of angle.  Path lengths then exceed true
    distances by roughly ``direction_step**2 / 8``.
    """
    dr, dt = radius / n_r, length / n_theta
    j = np.arange(n_theta)
    idx = lambda a, b: 1 + (a - 1) * n_theta + (b % n_theta)
    rows, cols, w = [], [], []

    def add(i0, i1, dj):
        r0, r1 = i0 * dr, i1 * dr
        gap = abs(dj) * dt
        if gap >= 0.5 * math.pi:
            return
        rows.append(idx(i0, j))
        cols.append(idx(i1, j + dj))
        w.append(np.full(n_theta, math.sqrt(max(r0 * r0 + r1 * r1 - 2 * r0 * r1 * math.cos(gap), 0.0))))

    targets = np.arange(direction_step, 0.5 * math.pi, direction_step)
    for i in range(1, n_r + 1):
        add(i, i, 1)
        for di in range(1, ring_reach + 1):
            for i0, i1 in ((i, i + di), (i + di, i)):
                if max(i0, i1) > n_r:
                    continue
                r_in = min(i0, i1) * dr
                steps = {0}
                for ang in targets:
                    steps.add(int(round(math.tan(ang) * di * dr / (r_in * dt))))
                for dj in sorted(steps):
                    for sgn in ((1, -1) if dj else (1,)):
                        if i0 < i1 or dj:
                            add(i0, i1, sgn * dj)
    for k in range(1, ring_reach + 1):
        rows.append(np.zeros(n_theta, dtype=int))
        cols.append(idx(k, j))
        w.append(np.full(n_theta, k * dr))
    rows, cols, w = np.concatenate(rows), np.concatenate(cols), np.concatenate(w)
    n = 1 + n_r * n_theta
    graph = sp.coo_matrix((w, (rows, cols)), shape=(n, n)).tocsr()
    return graph, idx, dr, dt


def graph_distance(length: float, p: tuple[float, float], q: tuple[float, float], **kw) -> tuple[float, bool]:
    """Shortest-path length between two lattice points and whether the path visits the vertex.

    ``p`` and ``q`` are ``(r, theta)`` and must sit on lattice nodes.
    """
    graph, idx, dr, dt = cone_graph(length, **kw)
    return lattice_distance(graph, idx, dr, dt, p, q)


def lattice_distance(graph, idx, dr, dt, p, q) -> tuple[float, bool]:
    return lattice_distances(graph, idx, dr, dt, p, [q])[0]


def lattice_distances(graph, idx, dr, dt, p, qs) -> list[tuple[float, bool]]:
    """One Dijkstra run from ``p``; distance and vertex visit for every target."""
    node = lambda pt: 0 if pt[0] == 0 else int(idx(int(round(pt[0] / dr)), int(round(pt[1] / dt))))
    a = node(p)
    dist, pred = dijkstra(graph, directed=False, indices=a, return_predecessors=True)
    out = []
    for q in qs:
        path, k = [], node(q)
        b = k
        while k != a and k >= 0:
            path.append(k)
            k = pred[k]
        out.append((float(dist[b]), 0 in path or a == 0))
    return out
