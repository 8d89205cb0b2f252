"""Polar and Cartesian grids, nodal fields and the discrete energy.

The polar grid has one vertex node plus ``n_r`` rings of ``n_theta``
nodes at ``r_i = i*dr``, ``theta_j = j*l/n_theta``.  The discrete
Dirichlet energy is the finite-volume form ``sum_e w_e (u_i - u_j)**2``
over radial and angular edges, with weights taken from the dual cells:

* radial edge between rings ``i`` and ``i+1``: ``r_{i+1/2} dtheta / dr``
  (vertex to ring 1: ``dtheta/2``);
* angular edge on ring ``i``: ``dr / (r_i dtheta)``, halved on the outer
  ring whose dual cell is only half as tall.

Dual-cell areas add up to ``l R**2 / 2`` exactly.  The measure terms of
the functional are integrated with these areas, a node counting as
positive or negative phase by the sign of its value (exact zeros count
for neither).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from conefree.cone import ConeParams, ConePoint


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True, eq=False)
class PolarGrid:
    cone: ConeParams
    n_r: int
    n_theta: int
    radius: float = 1.0

    def __post_init__(self):
        if self.n_r < 2 or self.n_theta < 4:
            raise ValueError("polar grid needs n_r >= 2 and n_theta >= 4")
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    @property
    def dr(self) -> float:
        return self.radius / self.n_r

    @property
    def dtheta(self) -> float:
        return self.cone.length / self.n_theta

    @property
    def n_nodes(self) -> int:
        return 1 + self.n_r * self.n_theta

    def index(self, i, j):
        """Flat index of ring ``i >= 1``, angle ``j`` (wrapping); ring 0 is the vertex."""
        i = np.asarray(i)
        j = np.mod(np.asarray(j), self.n_theta)
        return np.where(i == 0, 0, 1 + (i - 1) * self.n_theta + j)

    @cached_property
    def ring(self) -> np.ndarray:
        out = np.zeros(self.n_nodes, dtype=int)
        out[1:] = 1 + np.arange(self.n_r * self.n_theta) // self.n_theta
        return out

    @cached_property
    def col(self) -> np.ndarray:
        out = np.zeros(self.n_nodes, dtype=int)
        out[1:] = np.arange(self.n_r * self.n_theta) % self.n_theta
        return out

    @cached_property
    def r(self) -> np.ndarray:
        return self.ring * self.dr

    @cached_property
    def theta(self) -> np.ndarray:
        return self.col * self.dtheta

    @cached_property
    def radii(self) -> np.ndarray:
        """Ring radii ``r_0 = 0, ..., r_{n_r} = R``."""
        return np.arange(self.n_r + 1) * self.dr

    @cached_property
    def boundary(self) -> np.ndarray:
        return self.ring == self.n_r

    @cached_property
    def areas(self) -> np.ndarray:
        dr, dt = self.dr, self.dtheta
        a = np.empty(self.n_nodes)
        a[0] = 0.5 * self.cone.length * (0.5 * dr) ** 2
        i = self.ring[1:].astype(float)
        lo = (i - 0.5) * dr
        hi = np.minimum(i + 0.5, self.n_r) * dr
        a[1:] = 0.5 * dt * (hi**2 - lo**2)
        return a

    @cached_property
    def edges(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """``(tail, head, weight, kind)`` with kind 0 radial, 1 angular; tail is the inner/left node."""
        nr, nt, dr, dt = self.n_r, self.n_theta, self.dr, self.dtheta
        j = np.arange(nt)
        tails, heads, ws, kinds = [], [], [], []
        # vertex spokes
        tails.append(np.zeros(nt, dtype=int))
        heads.append(self.index(1, j))
        ws.append(np.full(nt, 0.5 * dt))
        kinds.append(np.zeros(nt, dtype=int))
        for i in range(1, nr):
            tails.append(self.index(i, j))
            heads.append(self.index(i + 1, j))
            ws.append(np.full(nt, (i + 0.5) * dr * dt / dr))
            kinds.append(np.zeros(nt, dtype=int))
        for i in range(1, nr + 1):
            w = dr / (i * dr * dt) * (0.5 if i == nr else 1.0)
            tails.append(self.index(i, j))
            heads.append(self.index(i, j + 1))
            ws.append(np.full(nt, w))
            kinds.append(np.ones(nt, dtype=int))
        return (np.concatenate(tails), np.concatenate(heads), np.concatenate(ws), np.concatenate(kinds))

    @cached_property
    def laplacian(self) -> sp.csr_matrix:
        """Symmetric graph Laplacian ``L`` with ``u @ L @ u`` the discrete Dirichlet energy."""
        t, h, w, _ = self.edges
        n = self.n_nodes
        rows = np.concatenate([t, h, t, h])
        cols = np.concatenate([h, t, t, h])
        vals = np.concatenate([-w, -w, w, w])
        return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))

    def sample(self, func) -> np.ndarray:
        """Nodal values of ``func(r, theta)``; the vertex uses ``theta = 0``."""
        return np.asarray(func(self.r, self.theta), dtype=float) * np.ones(self.n_nodes)

    def interpolate(self, values: np.ndarray, r, theta) -> np.ndarray:
        """Bilinear interpolation in ``(r, theta)`` with seam wrap; linear in ``r`` inside ring 1."""
        values = np.asarray(values, dtype=float)
        r = np.atleast_1d(np.asarray(r, dtype=float))
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        r, theta = np.broadcast_arrays(r, theta)
        if np.any(r < 0) or np.any(r > self.radius * (1 + 1e-12)):
            raise ValueError("interpolation point outside the grid")
        s = np.clip(r / self.dr, 0.0, self.n_r)
        t = np.mod(theta, self.cone.length) / self.dtheta
        j0 = np.floor(t).astype(int) % self.n_theta
        ft = t - np.floor(t)
        i0 = np.minimum(np.floor(s).astype(int), self.n_r - 1)
        fs = s - i0

        def ring_val(i):
            lo = values[self.index(np.maximum(i, 1), j0)]
            hi = values[self.index(np.maximum(i, 1), j0 + 1)]
            v = (1 - ft) * lo + ft * hi
            return np.where(i == 0, values[0], v)

        return (1 - fs) * ring_val(i0) + fs * ring_val(i0 + 1)


def ring_profile(grid: PolarGrid, edge_values: np.ndarray, node_values: np.ndarray) -> np.ndarray:
    """Cumulative sums over ``C_{r_k}``, k = 0..n_r, of edge and node quantities.

    Angular edges on the circle ``r = r_k`` count by half and the dual
    cells of ring ``k`` by their inner area fraction, so ``k = n_r`` agrees
    with the sum over the whole grid.
    """
    t, h, _, kind = grid.edges
    nr = grid.n_r
    rad = kind == 0
    radial = np.zeros(nr + 1)
    np.add.at(radial, grid.ring[h[rad]], edge_values[rad])
    ang = np.zeros(nr + 1)
    np.add.at(ang, grid.ring[t[~rad]], edge_values[~rad])
    nodes = np.zeros(nr + 1)
    np.add.at(nodes, grid.ring, node_values)
    k = np.arange(nr + 1, dtype=float)
    cell_frac = np.ones(nr + 1)
    cell_frac[1:nr] = (k[1:nr] - 0.25) / (2.0 * k[1:nr])
    edge_frac = np.full(nr + 1, 0.5)
    edge_frac[nr] = 1.0
    before = lambda a: np.concatenate([[0.0], np.cumsum(a)[:-1]])
    res = np.cumsum(radial) + before(ang) + edge_frac * ang + before(nodes) + cell_frac * nodes
    res[0] = 0.0
    return res


@dataclass(eq=False)
class ScalarField:
    grid: PolarGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n_nodes,):
            raise ValueError(f"expected {self.grid.n_nodes} nodal values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        self.values = v

    @classmethod
    def from_function(cls, grid: PolarGrid, func) -> "ScalarField":
        return cls(grid, grid.sample(func))

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())

    @property
    def positive_part(self) -> "ScalarField":
        return ScalarField(self.grid, np.maximum(self.values, 0.0))

    @property
    def negative_part(self) -> "ScalarField":
        return ScalarField(self.grid, np.maximum(-self.values, 0.0))

    def at(self, r, theta):
        out = self.grid.interpolate(self.values, r, theta)
        return out if out.size > 1 else float(out[0])

    def to_csv(self) -> str:
        g = self.grid
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["i", "j", "r", "theta", "value"])
        for n in range(g.n_nodes):
            w.writerow([int(g.ring[n]), int(g.col[n]), repr(float(g.r[n])), repr(float(g.theta[n])), repr(float(self.values[n]) + 0.0)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, grid: PolarGrid) -> "ScalarField":
        rows = [row for row in csv.reader(io.StringIO(text)) if row and not row[0].startswith("#")]
        if rows and rows[0][0] == "i":
            rows = rows[1:]
        vals = np.zeros(grid.n_nodes)
        seen = np.zeros(grid.n_nodes, dtype=bool)
        for row in rows:
            n = int(grid.index(int(row[0]), int(row[1])))
            vals[n] = float(row[4])
            seen[n] = True
        if not seen.all():
            raise ValueError("CSV does not cover every grid node")
        return cls(grid, vals)


@dataclass(frozen=True)
class EnergyBreakdown:
    dirichlet: float
    positive_area: float
    negative_area: float
    lambda_plus: float
    lambda_minus: float

    @property
    def total(self) -> float:
        return self.dirichlet + self.lambda_plus * self.positive_area + self.lambda_minus * self.negative_area


def edge_energies(grid: PolarGrid, values: np.ndarray) -> np.ndarray:
    t, h, w, _ = grid.edges
    return w * (values[t] - values[h]) ** 2


def discrete_energy(field: ScalarField, lambda_plus: float, lambda_minus: float, mask=None) -> EnergyBreakdown:
    """Discrete ``J``; with ``mask`` only edges with both ends masked and masked nodes count."""
    if lambda_plus < 0 or lambda_minus < 0:
        raise ValueError("phase weights must be nonnegative")
    g = field.grid
    u = field.values
    e = edge_energies(g, u)
    area = g.areas
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        t, h, _, _ = g.edges
        e = e[mask[t] & mask[h]]
        u = u[mask]
        area = area[mask]
    return EnergyBreakdown(
        dirichlet=float(e.sum()),
        positive_area=float(area[u > 0].sum()),
        negative_area=float(area[u < 0].sum()),
        lambda_plus=float(lambda_plus),
        lambda_minus=float(lambda_minus),
    )


def laplacian_residual(field: ScalarField, nodes=None) -> np.ndarray:
    """``(L u)_n / area_n``, a consistent approximation of ``-Laplace u`` at each node."""
    g = field.grid
    res = (g.laplacian @ field.values) / g.areas
    return res if nodes is None else res[nodes]


def harmonic_replacement(field: ScalarField, free=None, tol: float = 1e-8) -> ScalarField:
    """Discrete harmonic function equal to ``field`` off ``free`` (default: all interior nodes)."""
    g = field.grid
    free = ~g.boundary if free is None else np.asarray(free, dtype=bool) & ~g.boundary
    out = field.values.copy()
    if free.any():
        L = g.laplacian
        fixed = ~free
        A = L[free][:, free].tocsc()
        rhs = -(L[free][:, fixed] @ out[fixed])
        out[free] = spla.spsolve(A, rhs)
    res_field = ScalarField(g, out)
    res = np.abs(laplacian_residual(res_field, free)).max() if free.any() else 0.0
    scale = max(1.0, float(np.abs(out).max()))
    if not res <= tol * scale:
        raise ConvergenceError(f"harmonic replacement residual {res:.3e} above tolerance {tol:.1e}", residual=float(res))
    return res_field


def mean_value_check(field: ScalarField, center: ConePoint, radius: float, n_quad: int = 256) -> float:
    """Circle average of ``field`` around ``center`` minus its value there.

    Around the vertex the circle is ``{r = radius}``.  Around other points
    the disc must be flat (``radius < center.r``) and inside the grid.
    """
    g = field.grid
    if radius <= 0:
        raise ValueError("radius must be positive")
    if center.r + radius > g.radius + 1e-12:
        raise ValueError("disc exits the grid domain")
    if center.r == 0:
        th = (np.arange(n_quad) + 0.5) * g.cone.length / n_quad
        return float(g.interpolate(field.values, np.full(n_quad, radius), th).mean() - field.values[0])
    if radius >= center.r:
        raise ValueError("disc around a non-vertex point must not reach the vertex")
    phi = 2.0 * math.pi * (np.arange(n_quad) + 0.5) / n_quad
    # local chart: center at (center.r, 0), angle measured from the center's ray
    x = center.r + radius * np.cos(phi)
    y = radius * np.sin(phi)
    rr = np.hypot(x, y)
    tt = center.theta + np.arctan2(y, x)
    avg = g.interpolate(field.values, rr, tt).mean()
    return float(avg - g.interpolate(field.values, center.r, center.theta)[0])


@dataclass(frozen=True, eq=False)
class CartesianGrid:
    """Uniform node lattice on ``[x_min, x_max] x [y_min, y_max]`` with spacing ``h``."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    h: float

    def __post_init__(self):
        if not (self.h > 0 and self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError("degenerate Cartesian grid")

    @property
    def shape(self) -> tuple[int, int]:
        return (int(round((self.y_max - self.y_min) / self.h)) + 1, int(round((self.x_max - self.x_min) / self.h)) + 1)

    @cached_property
    def x(self) -> np.ndarray:
        return self.x_min + self.h * np.arange(self.shape[1])

    @cached_property
    def y(self) -> np.ndarray:
        return self.y_min + self.h * np.arange(self.shape[0])

    @property
    def n_nodes(self) -> int:
        ny, nx = self.shape
        return ny * nx

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y)
