"""Half-plane competitor sets: the functional ``F``, the explicit triangle competitor and the shrink-translate iteration.

For a set ``E`` hanging from the line ``{x2 = 0}`` let ``u_E`` be harmonic
in ``E`` together with the upper half-plane, equal to ``x2^-`` elsewhere
and decaying at infinity.  Then

    F(E) = |E| - int u_E(x1, 0) dx1,

which also equals the total Dirichlet energy of ``u_E``.  The main solver
uses P1 finite elements on a column mesh of ``E`` and represents the
upper half-plane exactly through its Dirichlet-to-Neumann form on the
top line, so no truncation radius is involved.  A Cartesian
Shortley-Weller solver on ``E`` plus a half-disc, extrapolated in the
radius, serves as an independent check on small sets.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from conefree.cone import ConeParams, WedgeRegion, exact_slope, wedge_complement_strip
from conefree.grids import ConvergenceError
from conefree.polygons import (
    DepthProfile,
    PlanarPolygonSet,
    as_exact,
    clip_convex,
    shoelace,
    shrink_translate_union,
    triangle_profile,
)

D_DEPTH = Fraction(3, 5)


class ContainmentError(ValueError):
    """The terminal competitor set does not contain the target region."""


# explicit competitor -----------------------------------------------------------


def triangle_Ac(c) -> PlanarPolygonSet:
    """Isosceles triangle with vertices ``(-c, 0)``, ``(c, 0)`` and apex ``(0, -1)``."""
    return triangle_profile(c).to_polygon()


@dataclass(frozen=True)
class ExplicitCompetitor:
    c: float
    h: float
    gap: float

    def field(self, x1, x2) -> np.ndarray:
        """Piecewise-linear ``w`` on the kite ``(-c,0),(0,h),(c,0),(0,-1)``, ``x2^+`` outside."""
        x1, x2 = np.broadcast_arrays(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float))
        c, h = self.c, self.h
        ax = np.abs(x1)
        inside = (ax < c) & (x2 < h * (1.0 - ax / c)) & (x2 > ax / c - 1.0)
        w = h / (c * (h + 1.0)) * (-ax + c * x2 + c)
        return np.where(inside, w, np.maximum(x2, 0.0))

    @property
    def kite_area(self) -> float:
        return self.c * (self.h + 1.0)


def explicit_w_gap(c: float, h="optimal") -> ExplicitCompetitor:
    """Energy gap of the kite competitor against ``x2^+`` on any disc containing the kite."""
    if c <= 0:
        raise ValueError("c must be positive")
    if isinstance(h, str):
        if h != "optimal":
            raise ValueError("h must be positive or 'optimal'")
        # sqrt(c^2+1) - 1 without cancellation for small c
        h = c * c / (math.sqrt(c * c + 1.0) + 1.0)
    if h <= 0:
        raise ValueError("h must be positive")
    gap = c + h * h / (h + 1.0) * (c * c + 1.0) / c - c * h
    return ExplicitCompetitor(float(c), float(h), float(gap))


# finite elements with a half-plane boundary form -------------------------------------


@dataclass(frozen=True)
class FEMSettings:
    """Mesh and solver controls for :func:`solve_F`.

    ``h`` is the column spacing at sharp corners of the profile; spacing
    grows like ``growth`` times the distance to the nearest corner.
    ``layers`` is the number of vertical element layers (default
    ``ceil(1/(4h))`` clipped to ``[8, 96]``).  A solve whose energy
    identity defect exceeds ``identity_tol`` times the energy is rejected:
    that happens once the set is so wide that double precision cannot
    resolve the O(1) energy against the area.
    """

    h: float = 1.0 / 256
    growth: float = 0.2
    layers: int | None = None
    cg_tol: float = 1e-12
    max_cg: int = 3000
    band: int = 8
    near: float = 6.0
    identity_tol: float = 0.01

    @property
    def n_layers(self) -> int:
        if self.layers is not None:
            return int(self.layers)
        return int(min(96, max(8, math.ceil(0.25 / self.h))))


def _graded(p: float, q: float, hp: float, hq: float, growth: float) -> list[float]:
    """Interior points of ``[p, q]`` refined towards both ends."""
    L = q - p
    fwd, d = [], 0.0
    while True:
        d += max(hp, growth * d)
        if d >= 0.5 * L:
            break
        fwd.append(d)
    bwd, d = [], 0.0
    while True:
        d += max(hq, growth * d)
        if d >= 0.5 * L:
            break
        bwd.append(d)
    pts = [p + s for s in fwd] + [q - s for s in reversed(bwd)]
    # drop a sliver at the junction
    if fwd and bwd:
        left, right = p + fwd[-1], q - bwd[-1]
        local = max(hp, growth * fwd[-1], hq, growth * bwd[-1])
        if right - left < 0.3 * local:
            del pts[len(fwd) - 1]
    return pts


def _corner_spacing(xs: np.ndarray, ds: np.ndarray, settings: FEMSettings) -> np.ndarray:
    slopes = np.diff(ds) / np.diff(xs)
    kink = np.abs(np.diff(np.concatenate([[0.0], slopes, [0.0]])))
    seg = np.diff(xs)
    adj = np.minimum(np.concatenate([[np.inf], seg]), np.concatenate([seg, [np.inf]]))
    # weak corners only need resolving on the scale where they bend noticeably
    with np.errstate(divide="ignore"):
        hb = np.where(kink > 0, settings.h / kink, np.inf)
    hb = np.maximum(hb, np.maximum(settings.h, 1e-9 * np.abs(xs)))
    return np.minimum(hb, 0.25 * adj)


def _profile_columns(profile: DepthProfile, settings: FEMSettings) -> np.ndarray:
    xs = np.array([float(v) for v in profile.xs])
    ds = np.array([float(v) for v in profile.ds])
    sym = profile.is_symmetric()
    if sym and not np.any(xs == 0.0):
        j = int(np.searchsorted(xs, 0.0))
        xs = np.insert(xs, j, 0.0)
        ds = np.insert(ds, j, float(np.interp(0.0, xs[xs != 0.0], ds)))
    hb = _corner_spacing(xs, ds, settings)
    first = int(np.flatnonzero(xs == 0.0)[0]) if sym else 0
    cols = [xs[first]]
    for i in range(first, len(xs) - 1):
        cols += _graded(xs[i], xs[i + 1], hb[i], hb[i + 1], settings.growth)
        cols.append(xs[i + 1])
    cols = np.array(cols)
    if sym:
        # mirror the right half so the mesh is exactly symmetric
        return np.concatenate([-cols[:0:-1], cols])
    return cols


@dataclass
class ColumnMesh:
    x: np.ndarray  # column abscissae
    depth: np.ndarray
    layers: int
    nodes: np.ndarray  # (n, 2)
    triangles: np.ndarray  # (m, 3)
    top: np.ndarray  # node ids on {x2 = 0}, one per column
    bottom: np.ndarray  # Dirichlet node ids (bottom and both ends)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)


def build_column_mesh(profile: DepthProfile, settings: FEMSettings) -> ColumnMesh:
    x = _profile_columns(profile, settings)
    dep = profile.depth(x)
    dep[0] = dep[-1] = 0.0
    N = len(x) - 1
    m = settings.n_layers
    eta = np.arange(m + 1) / m

    def nid(i, k):
        i, k = np.broadcast_arrays(i, k)
        out = 1 + (i - 1) * (m + 1) + k
        out = np.where(i == 0, 0, out)
        return np.where(i == N, 1 + (N - 1) * (m + 1), out)

    n_nodes = 2 + (N - 1) * (m + 1)
    nodes = np.zeros((n_nodes, 2))
    ii, kk = np.meshgrid(np.arange(1, N), np.arange(m + 1), indexing="ij")
    ids = nid(ii, kk)
    nodes[ids, 0] = x[ii]
    nodes[ids, 1] = -eta[kk] * dep[ii]
    nodes[0] = (x[0], 0.0)
    nodes[-1] = (x[-1], 0.0)

    ic, kc = np.meshgrid(np.arange(N), np.arange(m), indexing="ij")
    A, B, C, D = nid(ic, kc), nid(ic + 1, kc), nid(ic + 1, kc + 1), nid(ic, kc + 1)
    left = (0.5 * (x[ic] + x[ic + 1]) < 0)
    t1 = np.where(left[..., None], np.stack([A, B, D], -1), np.stack([A, B, C], -1))
    t2 = np.where(left[..., None], np.stack([B, C, D], -1), np.stack([A, C, D], -1))
    tris = np.concatenate([t1.reshape(-1, 3), t2.reshape(-1, 3)])
    ok = (tris[:, 0] != tris[:, 1]) & (tris[:, 1] != tris[:, 2]) & (tris[:, 0] != tris[:, 2])
    tris = tris[ok]
    top = nid(np.arange(N + 1), 0)
    bottom = np.concatenate([[0], nid(np.arange(1, N), m), [n_nodes - 1]])
    return ColumnMesh(x, dep, m, nodes, tris, top, bottom)


def _stiffness(nodes: np.ndarray, tris: np.ndarray) -> tuple[sp.csr_matrix, np.ndarray]:
    p = nodes[tris]
    e = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
    area = 0.5 * np.abs(e[:, 2, 0] * (-e[:, 1, 1]) - e[:, 2, 1] * (-e[:, 1, 0]))
    K = np.einsum("tid,tjd->tij", e, e) / (4.0 * area)[:, None, None]
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    n = len(nodes)
    return sp.csr_matrix((K.ravel(), (rows, cols)), shape=(n, n)), area


def triangle_gradients(nodes: np.ndarray, tris: np.ndarray, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Constant gradient of the P1 interpolant on every triangle, and the areas."""
    p = nodes[tris]
    u = values[tris]
    d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    du1, du2 = u[:, 1] - u[:, 0], u[:, 2] - u[:, 0]
    gx = (du1 * d2[:, 1] - du2 * d1[:, 1]) / det
    gy = (du2 * d1[:, 0] - du1 * d2[:, 0]) / det
    return np.stack([gx, gy], axis=1), 0.5 * np.abs(det)


# log-kernel double integrals over pairs of intervals
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def _F1(z):
    z = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(z == 0, 0.0, z * np.log(np.abs(z)) - z)


def _F2(z):
    z = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(z == 0, 0.0, 0.5 * z * z * np.log(np.abs(z)) - 0.75 * z * z)


def _near_pairs(a, b, c, d):
    """``int_a^b int_c^d log|x - y| dy dx`` with ``[a, b]`` the shorter interval."""
    h = b - a
    mid = 0.5 * (a + b)
    xq = mid[:, None] + 0.5 * h[:, None] * _GL_X[None, :]

    def term(q):
        dist = np.maximum(np.maximum(a - q, q - b), 0.0)
        gauss = 0.5 * h * (_GL_W[None, :] * _F1(xq - q[:, None])).sum(axis=1)
        exact = _F2(b - q) - _F2(a - q)
        return np.where(dist >= h, gauss, exact)

    return term(c) - term(d)


def log_kernel_matrix(x: np.ndarray, near: float = 6.0, block: int = 256) -> np.ndarray:
    """``I[e, f] = int_e int_f log|x - y|`` for the elements between consecutive ``x``."""
    a, b = x[:-1], x[1:]
    h = b - a
    mid = 0.5 * (a + b)
    N = len(h)
    out = np.empty((N, N))
    for s in range(0, N, block):
        sl = slice(s, min(N, s + block))
        dm = mid[sl, None] - mid[None, :]
        hi, hj = h[sl, None], h[None, :]
        gap = np.abs(dm) - 0.5 * (hi + hj)
        far = gap > near * np.maximum(hi, hj)
        with np.errstate(divide="ignore", invalid="ignore"):
            approx = hi * hj * (np.log(np.abs(dm)) - (hi * hi + hj * hj) / (24.0 * dm * dm))
        blockv = np.where(far, approx, 0.0)
        ri, cj = np.nonzero(~far)
        gi = ri + s
        small = h[gi] <= h[cj]
        sa = np.where(small, a[gi], a[cj])
        sb = np.where(small, b[gi], b[cj])
        la = np.where(small, a[cj], a[gi])
        lb = np.where(small, b[cj], b[gi])
        blockv[ri, cj] = _near_pairs(sa, sb, la, lb)
        out[sl] = blockv
    return 0.5 * (out + out.T)


def half_plane_form(x: np.ndarray, near: float = 6.0) -> np.ndarray:
    """Matrix of ``f -> int_{x2>0} |D U|^2`` for P1 traces ``f`` vanishing at both ends of ``x``.

    ``U`` is the decaying harmonic extension; the form equals
    ``-(1/pi) int int f'(x) f'(y) log|x - y|``.  Rows and columns refer to
    the interior nodes ``x[1:-1]``.
    """
    h = np.diff(x)
    S = log_kernel_matrix(x, near) / np.outer(h, h)
    P = np.pad(S, 1)
    full = P[:-1, :-1] - P[:-1, 1:] - P[1:, :-1] + P[1:, 1:]
    return -full[1:-1, 1:-1] / math.pi


@dataclass
class FSolution:
    """Discrete ``u_E`` and the pieces of ``F(E)``."""

    value: float
    area: float
    trace_integral: float
    lower_energy: float
    upper_energy: float
    mesh: ColumnMesh | None = None
    values: np.ndarray | None = None
    iterations: int = 0

    @property
    def identity_defect(self) -> float:
        """``|energy - (|E| - int u_E)|``: discretely zero, so only solver and roundoff error remain."""
        return abs(self.value - self.area_formula)

    @property
    def area_formula(self) -> float:
        """``|E| - int u_E(x1, 0)``; agrees with :attr:`value` up to roundoff in ``|E|``."""
        return self.area - self.trace_integral

    def trace(self, x) -> np.ndarray:
        """``u_E(x1, 0)``, zero outside the set."""
        if self.mesh is None:
            return np.zeros_like(np.asarray(x, dtype=float))
        return np.interp(x, self.mesh.x, self.values[self.mesh.top], left=0.0, right=0.0)

    def complement_weights(self, length: float) -> np.ndarray:
        """Area of every triangle inside ``R^2 \\ Omega`` for the wedge of the given length."""
        mesh = self.mesh
        if length >= math.pi:
            # the removed sector covers the whole lower half-plane
            return triangle_gradients(mesh.nodes, mesh.triangles, self.values)[1]
        k = WedgeRegion(length).slope
        halves = [(-k, 1.0, 0.0), (k, 1.0, 0.0)]
        p = mesh.nodes[mesh.triangles]
        s1 = -k * p[..., 0] + p[..., 1]
        s2 = k * p[..., 0] + p[..., 1]
        full = (s1 <= 0).all(axis=1) & (s2 <= 0).all(axis=1)
        none = (s1 >= 0).all(axis=1) | (s2 >= 0).all(axis=1)
        _, area = triangle_gradients(mesh.nodes, mesh.triangles, self.values)
        w = np.where(full, area, 0.0)
        for t in np.flatnonzero(~full & ~none):
            loop = [tuple(v) for v in p[t]]
            w[t] = abs(float(shoelace(clip_convex(loop, halves))))
        return w

    def omega_gap(self, length: float) -> float:
        """``lim_R J(v_E, B_R ∩ Omega) - J(v, B_R ∩ Omega)`` with ``v_E = u_E + x2``.

        Equals ``F(E)`` minus the integral of ``|D u_E + e2|^2 + 1`` over
        ``E \\ Omega``.  Needs ``l <= pi`` so that ``Omega`` contains the
        upper half-plane.
        """
        if length > math.pi:
            raise ValueError("the half-plane form only covers Omega containing {x2 > 0}, i.e. l <= pi")
        if self.mesh is None:
            return 0.0
        g, _ = triangle_gradients(self.mesh.nodes, self.mesh.triangles, self.values)
        dens = g[:, 0] ** 2 + (g[:, 1] + 1.0) ** 2 + 1.0
        return float(self.value - (self.complement_weights(length) * dens).sum())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x1", "x2", "value"])
        if self.mesh is not None:
            for (x1, x2), v in zip(self.mesh.nodes, self.values):
                w.writerow([repr(float(x1)), repr(float(x2)), repr(float(v))])
        return buf.getvalue()


def _as_profile(E) -> DepthProfile | None:
    if E is None:
        return None
    if isinstance(E, DepthProfile):
        return E
    if isinstance(E, PlanarPolygonSet):
        if E.is_empty:
            return None
        return DepthProfile.from_polygon(E)
    raise TypeError("E must be a DepthProfile or PlanarPolygonSet")


def solve_F(E, settings: FEMSettings | None = None) -> FSolution:
    """``F(E)`` for a set hanging from ``{x2 = 0}`` (empty set allowed)."""
    settings = settings or FEMSettings()
    profile = _as_profile(E)
    if profile is None:
        return FSolution(0.0, 0.0, 0.0, 0.0, 0.0)
    if profile.max_depth > 1:
        raise ValueError("set leaves the strip R x [-1, 0]")
    mesh = build_column_mesh(profile, settings)
    A, _ = _stiffness(mesh.nodes, mesh.triangles)
    Lam = half_plane_form(mesh.x, settings.near)

    n = mesh.n_nodes
    fixed = np.zeros(n, dtype=bool)
    fixed[mesh.bottom] = True
    ub = np.zeros(n)
    ub[mesh.bottom] = -mesh.nodes[mesh.bottom, 1]
    free = np.flatnonzero(~fixed)
    pos = -np.ones(n, dtype=int)
    pos[free] = np.arange(len(free))
    top_free = pos[mesh.top[1:-1]]

    Aff = A[free][:, free].tocsr()
    rhs = -(A[free][:, fixed] @ ub[fixed])
    nf = len(free)

    # preconditioner: exact FEM block plus a band of the half-plane form
    nt = len(top_free)
    bi, bj = np.nonzero(np.abs(np.subtract.outer(np.arange(nt), np.arange(nt))) <= settings.band)
    band = sp.csr_matrix((Lam[bi, bj], (top_free[bi], top_free[bj])), shape=(nf, nf))
    lu = spla.splu((Aff + band).tocsc())

    def matvec(v):
        out = Aff @ v
        out[top_free] += Lam @ v[top_free]
        return out

    # symmetric diagonal scaling: element sizes span many decades, so an
    # unscaled residual is dominated by the widest elements
    diag = Aff.diagonal().copy()
    diag[top_free] += np.diag(Lam)
    sc = 1.0 / np.sqrt(diag)
    op = spla.LinearOperator((nf, nf), matvec=lambda v: sc * matvec(sc * v), dtype=float)
    prec = spla.LinearOperator((nf, nf), matvec=lambda v: lu.solve(v / sc) / sc, dtype=float)
    count = [0]

    def cb(_):
        count[0] += 1

    srhs = sc * rhs
    y0 = lu.solve(rhs) / sc
    y, info = spla.cg(op, srhs, x0=y0, rtol=settings.cg_tol, atol=0.0, maxiter=settings.max_cg, M=prec, callback=cb)
    res = float(np.linalg.norm(op @ y - srhs) / max(np.linalg.norm(srhs), 1e-300))
    if info != 0 and res > 1e3 * settings.cg_tol:
        raise ConvergenceError(f"conjugate gradients stopped at relative residual {res:.2e}", res)
    sol = sc * y
    u = ub.copy()
    u[free] = sol
    f = u[mesh.top]
    lower = float(u @ (A @ u))
    upper = float(f[1:-1] @ (Lam @ f[1:-1]))
    integral = float(np.sum(0.5 * (f[1:] + f[:-1]) * np.diff(mesh.x)))
    out = FSolution(
        value=lower + upper,
        area=float(profile.area),
        trace_integral=integral,
        lower_energy=lower,
        upper_energy=upper,
        mesh=mesh,
        values=u,
        iterations=count[0],
    )
    if out.identity_defect > settings.identity_tol * max(abs(out.value), 1e-12):
        raise ConvergenceError(
            f"energy identity off by {out.identity_defect:.2e} at |E| = {out.area:.3e}; precision exhausted",
            out.identity_defect)
    return out


# Cartesian cross-check -----------------------------------------------------------


@dataclass
class RectilinearField:
    """Nodal values on the tensor grid ``x`` by ``y``; ``values[iy, ix]``."""

    x: np.ndarray
    y: np.ndarray
    values: np.ndarray
    inside: np.ndarray
    arms: dict | None = field(default=None, repr=False)  # per direction: (neighbour inside, arm, boundary value, neighbour id)

    def at(self, x1, x2) -> np.ndarray:
        """Bilinear interpolation."""
        from scipy.interpolate import RegularGridInterpolator

        f = RegularGridInterpolator((self.y, self.x), self.values)
        x1, x2 = np.broadcast_arrays(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float))
        return f(np.stack([x2.ravel(), x1.ravel()], axis=1)).reshape(x1.shape)


@dataclass
class CartesianF:
    value: float
    by_radius: dict
    field: RectilinearField | None = None


def _horizontal_crossing(profile_x, profile_d, x0, step, level):
    """First ``s`` in ``(0, |step|]`` where the depth drops to ``level`` moving from ``x0``."""
    sgn = 1.0 if step > 0 else -1.0
    pts = [0.0]
    for px in profile_x:
        s = (px - x0) * sgn
        if 0 < s < abs(step):
            pts.append(s)
    pts.append(abs(step))
    pts.sort()
    vals = [np.interp(x0 + sgn * s, profile_x, profile_d, left=0.0, right=0.0) - level for s in pts]
    for s0, s1, v0, v1 in zip(pts, pts[1:], vals, vals[1:]):
        if v0 > 0 >= v1:
            return s0 + (s1 - s0) * v0 / (v0 - v1)
    return abs(step)


def cartesian_axes(profile: DepthProfile | None, h: float, R: float, growth: float | None = None,
                   fine: float = 0.0):
    """Node abscissae and ordinates of the grid over ``[-R, R] x [-1, R]``.

    Without ``growth`` both axes are uniform with spacing ``h``.  With it,
    ``x1`` spacing is ``h`` at the profile breakpoints and grows like
    ``growth`` times the distance to them; ``x2`` stays uniform on
    ``[-1, 0]`` and grows like ``growth * x2`` above.
    """
    n_low = int(round(1.0 / h))
    low = -1.0 + h * np.arange(n_low + 1)
    low[-1] = 0.0
    if growth is None:
        n = int(round(2 * R / h))
        xs = -R + h * np.arange(n + 1)
        ys = np.concatenate([low, h * np.arange(1, int(round(R / h)) + 1)])
        return xs, ys
    fine = h * math.floor(min(fine, R) / h)
    brk = {-R, R, -fine, fine, *(float(v) for v in (profile.xs if profile is not None else ()))}
    brk = sorted(b for b in brk if abs(b) >= fine) + list(h * np.arange(-round(fine / h) + 1, round(fine / h)))
    brk.sort()
    xs = [brk[0]]
    for p, q in zip(brk, brk[1:]):
        xs += _graded(p, q, h, h, growth) if q - p > 1.5 * h else []
        xs.append(q)
    up = [0.0]
    while up[-1] < R:
        up.append(up[-1] + max(h, growth * up[-1]))
    up[-1] = R
    if up[-1] - up[-2] < 0.3 * (up[-2] - up[-3]):
        del up[-2]
    return np.array(xs), np.concatenate([low, up[1:]])


def _cartesian_once(profile: DepthProfile | None, xs: np.ndarray, ys: np.ndarray, R: float, keep_field: bool = False):
    X, Y = np.meshgrid(xs, ys)
    if profile is not None:
        px = np.array([float(v) for v in profile.xs])
        pd = np.array([float(v) for v in profile.ds])
        depth = np.interp(X, px, pd, left=0.0, right=0.0)
        w0, w1 = px[0], px[-1]
    else:
        px = pd = None
        depth = np.zeros_like(X)
        w0 = w1 = 0.0
    y0 = int(np.flatnonzero(ys == 0.0)[0])  # row of the line x2 = 0
    inside = np.zeros(X.shape, dtype=bool)
    inside[y0 + 1:] = X[y0 + 1:] ** 2 + Y[y0 + 1:] ** 2 < R * R
    inside[y0] = (X[y0] > w0) & (X[y0] < w1) & (depth[y0] > 0)
    inside[:y0] = Y[:y0] > -depth[:y0]
    inside[:, 0] = inside[:, -1] = False
    inside[0] = inside[-1] = False
    bval = np.where(Y < 0, -Y, 0.0)

    idx = -np.ones(X.shape, dtype=int)
    iy, ix = np.nonzero(inside)
    idx[iy, ix] = np.arange(len(iy))
    n = len(iy)
    hx, hy = np.diff(xs), np.diff(ys)
    rows, cols, vals = [], [], []
    rhs = np.zeros(n)
    diag = np.zeros(n)
    arms = {}
    for name, dy, dx in (("E", 0, 1), ("W", 0, -1), ("N", 1, 0), ("S", -1, 0)):
        jy, jx = iy + dy, ix + dx
        nb_in = inside[jy, jx]
        arm = hx[np.minimum(ix, jx)] if dx else hy[np.minimum(iy, jy)]
        value = bval[jy, jx].copy()
        for p in np.flatnonzero(~nb_in):
            xp, yp, hp = X[iy[p], ix[p]], Y[iy[p], ix[p]], arm[p]
            if yp > 0 and (xp + dx * hp) ** 2 + (yp + dy * hp) ** 2 >= R * R:
                # leave the half-disc through the circle
                bq = 2 * (xp * dx + yp * dy)
                cq = xp * xp + yp * yp - R * R
                s = 0.5 * (-bq + math.sqrt(bq * bq - 4 * cq))
                arm[p], value[p] = min(max(s, 1e-12 * hp), hp), 0.0
            elif yp < 0 or (yp == 0 and dy == -1):
                if dy == -1:
                    d = float(np.interp(xp, px, pd, left=0.0, right=0.0))
                    arm[p], value[p] = max(yp + d, 1e-12 * hp), d
                elif dx != 0:
                    s = _horizontal_crossing(px, pd, xp, dx * hp, -yp)
                    arm[p], value[p] = max(s, 1e-12 * hp), -yp
            elif yp == 0 and dx != 0:
                edge = w1 if dx > 0 else w0
                arm[p], value[p] = max(min(abs(edge - xp), hp), 1e-12 * hp), 0.0
        arms[name] = (nb_in, arm, value, idx[jy, jx])
    for a, b in (("E", "W"), ("N", "S")):
        for me, other in ((a, b), (b, a)):
            nb_in, arm, val, j = arms[me]
            coef = 2.0 / (arm * (arm + arms[other][1]))
            diag -= coef
            rows.append(np.flatnonzero(nb_in))
            cols.append(j[nb_in])
            vals.append(coef[nb_in])
            rhs -= np.where(nb_in, 0.0, coef * val)
    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(diag)
    M = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    sol = spla.spsolve(M.tocsc(), rhs) if n else np.zeros(0)
    U = bval.copy()
    U[iy, ix] = sol
    line = U[y0].copy()
    line[~inside[y0]] = 0.0
    integral = float(np.trapezoid(line, xs))
    area = float(profile.area) if profile is not None else 0.0
    out = RectilinearField(xs, ys, U, inside, arms) if keep_field else None
    return area - integral, out


def _radius(profile, h, R, margin, growth):
    if abs(1.0 / h - round(1.0 / h)) > 1e-9:
        raise ValueError("1/h must be an integer so that x2 = 0 and x2 = -1 are grid lines")
    w = float(profile.half_width) if profile is not None else 0.0
    if R is None:
        R = w + margin if growth is None else 4.0 * (w + margin)
    if R <= w:
        raise ValueError("truncation radius must exceed the half-width of E")
    return h * math.ceil(R / h)


def solve_F_cartesian(E, h: float = 1.0 / 64, R: float | None = None, margin: float = 1.0,
                      keep_field: bool = False, growth: float | None = None) -> CartesianF:
    """``F`` on a Cartesian grid over ``E`` plus the half-disc of radius ``R``, then ``2R``.

    The truncation error decays like ``R**-2``, so the two values are
    combined as ``(4 F(2R) - F(R)) / 3``.  ``1/h`` must be an integer.
    ``growth`` switches to the graded grid of :func:`cartesian_axes`,
    which makes wide sets affordable; ``R`` then defaults to four times
    the half-width plus margin.
    """
    profile = _as_profile(E)
    R = _radius(profile, h, R, margin, growth)
    f1, _ = _cartesian_once(profile, *cartesian_axes(profile, h, R, growth), R)
    f2, fld = _cartesian_once(profile, *cartesian_axes(profile, h, 2 * R, growth), 2 * R, keep_field)
    return CartesianF((4.0 * f2 - f1) / 3.0, {R: f1, 2 * R: f2}, fld)


def _edge_quadrature(fld: RectilinearField, length: float, R: float) -> float:
    """``int (|D v_E|^2 - |D v|^2)`` over ``B_R ∩ Omega`` from grid edges and boundary arms.

    Every edge carries one difference quotient and a control area equal
    to its length times the dual width at its ends.  Vertical edges end
    on the boundary through the shortened arms, so fields linear across
    a thin layer are integrated exactly up to the boundary.
    """
    X, Y = np.meshgrid(fld.x, fld.y)
    iy, ix = np.nonzero(fld.inside)
    xp, yp = X[iy, ix], Y[iy, ix]
    up = fld.values[iy, ix]
    arms = fld.arms
    # x-differences: the dual height uses the arms; y-differences: full column widths, so the
    # column sums are the trapezoid rule in x1, exact for the piecewise-linear depth
    hx = np.diff(fld.x)
    width = {"x": 0.5 * (arms["N"][1] + arms["S"][1]), "y": 0.5 * (hx[ix - 1] + hx[ix])}
    wedge = WedgeRegion(length)
    total = 0.0
    for name, dx, dy in (("E", 1, 0), ("W", -1, 0), ("N", 0, 1), ("S", 0, -1)):
        nb_in, arm, bval, j = arms[name]
        dual = width["x" if dx else "y"]
        end_x, end_y = xp + dx * arm, yp + dy * arm
        end_u = np.where(nb_in, 0.0, bval)
        # interior edges are visited from both ends: count them once, from the E/N side
        own = ~nb_in | (name in ("E", "N"))
        jj = np.where(nb_in, j, 0)
        end_u = np.where(nb_in, up[jj], end_u)
        ctrl = arm * np.where(nb_in, 0.5 * (dual + dual[jj]), dual)
        d_ve = (end_u + end_y) - (up + yp)
        d_v = np.maximum(end_y, 0.0) - np.maximum(yp, 0.0)
        mx, my = 0.5 * (xp + end_x), 0.5 * (yp + end_y)
        weight = np.where(wedge.contains(mx, my), 1.0, np.where(wedge.on_boundary(mx, my), 0.5, 0.0))
        weight = weight * (mx**2 + my**2 < R * R) * own
        total += float((weight * ctrl * (d_ve**2 - d_v**2) / arm**2).sum())
    return total


def _omega_gap_once(profile, length, h, R, growth):
    # the boundary rays of Omega cross the strip -1 < x2 < 0 for |x1| <= 1/|slope|
    slope = WedgeRegion(length).slope
    fine = min(float(profile.half_width), 1.0 / abs(slope)) if slope < 0 else 0.0
    xs, ys = cartesian_axes(profile, h, R, growth, fine)
    _, fld = _cartesian_once(profile, xs, ys, R, keep_field=True)
    # {v_E > 0} and {v > 0} differ by E exactly, so the measure term is a polygon area
    return _edge_quadrature(fld, length, R) + float(profile.area - outside_area(profile, length))


def omega_gap_cartesian(E, length: float, h: float = 1.0 / 64, R: float | None = None, margin: float = 1.0,
                        growth: float | None = None) -> float:
    """``J(v_{E,R}, B_R ∩ Omega) - J(v, B_R ∩ Omega)`` on a Cartesian grid, extrapolated in ``R``.

    The Dirichlet part sums grid edges whose midpoint lies in
    ``B_R ∩ Omega`` (see :func:`_edge_quadrature`); the measure part is
    the exact area ``|E ∩ Omega|``.  A check on :meth:`FSolution.omega_gap`.
    """
    profile = _as_profile(E)
    if profile is None:
        return 0.0
    R = _radius(profile, h, R, margin, growth)
    g1 = _omega_gap_once(profile, length, h, R, growth)
    g2 = _omega_gap_once(profile, length, h, 2 * R, growth)
    return (4.0 * g2 - g1) / 3.0


# shrink-translate iteration -------------------------------------------------------


def inductive_step(E, t, a, b):
    """Trapezoid ``T_{t,a,b}`` united with the shrunk copy ``t E - (1 - t) e2`` hung below it.

    Returns the same representation as the input.
    """
    profile = _as_profile(E)
    t = as_exact(t)
    if t == 1:
        # no shrink and no shift: the trapezoid degenerates, only the clip remains
        if profile is None:
            return E
        a, b = as_exact(a), as_exact(b)
        poly = profile.to_polygon().clipped([(1, 0, a), (-1, 0, a)])
        return poly if isinstance(E, PlanarPolygonSet) else DepthProfile.from_polygon(poly)
    if profile is None:
        tz = DepthProfile((-as_exact(a), -as_exact(b), as_exact(b), as_exact(a)),
                          (Fraction(0), 1 - t, 1 - t, Fraction(0)))
        return tz.to_polygon() if isinstance(E, PlanarPolygonSet) else tz
    out = shrink_translate_union(profile, t, a, b)
    return out.to_polygon() if isinstance(E, PlanarPolygonSet) else out


def recurrence_bound(F: float) -> float:
    return 3.0 * F / (3.0 + F)


def envelope(k: int) -> float:
    """Iterating the recurrence from ``F_0 = 2``: ``6 / (3 + 2k)``."""
    return 6.0 / (3.0 + 2.0 * k)


def required_iterations(target: float, f0: float = 2.0) -> int:
    """Fewest steps after which the recurrence guarantees ``F_k < target``.

    ``1/F_k >= 1/F_0 + k/3``, so ``k > 3/target - 3/F_0`` suffices.
    """
    if target <= 0:
        raise ValueError("target must be positive")
    if f0 < target:
        return 0
    return int(math.floor(3.0 / target - 3.0 / f0)) + 1


@dataclass
class CompetitorStep:
    k: int
    F: float
    area: float
    half_width: float
    profile: DepthProfile
    t: Fraction | None = None
    a: Fraction | None = None
    b: Fraction | None = None
    doublings: int = 0
    stable: bool = True
    trials: list = field(default_factory=list)
    identity_defect: float = 0.0

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "F": self.F,
            "area": self.area,
            "half_width": self.half_width,
            "t": None if self.t is None else str(self.t),
            "a": None if self.a is None else str(self.a),
            "b": None if self.b is None else str(self.b),
            "doublings": self.doublings,
            "stable": self.stable,
            "trials": self.trials,
            "identity_defect": self.identity_defect,
            "xs": [str(v) for v in self.profile.xs],
            "ds": [str(v) for v in self.profile.ds],
        }


@dataclass
class CompetitorTrace:
    c: Fraction
    steps: list = field(default_factory=list)
    target: float | None = None
    settings: FEMSettings = field(default_factory=FEMSettings)

    @property
    def values(self) -> list[float]:
        return [s.F for s in self.steps]

    @property
    def terminal(self) -> CompetitorStep:
        return self.steps[-1]

    def recurrence_excess(self) -> list[float]:
        """``F_{k+1} - 3 F_k / (3 + F_k)`` for every recorded step."""
        F = self.values
        return [F[k + 1] - recurrence_bound(F[k]) for k in range(len(F) - 1)]

    def check(self, tol: float = 0.05) -> list[str]:
        """Recurrence and envelope violations beyond ``tol`` (per step for the envelope)."""
        bad = [f"step {k}->{k + 1}: excess {e:.4f}" for k, e in enumerate(self.recurrence_excess()) if e > tol]
        bad += [f"F_{k}={F:.4f} above envelope" for k, F in enumerate(self.values) if F > envelope(k) + k * tol]
        return bad

    def to_json(self) -> str:
        return json.dumps({
            "c": str(self.c),
            "target": self.target,
            "settings": {"h": self.settings.h, "growth": self.settings.growth, "layers": self.settings.n_layers},
            "steps": [s.to_dict() for s in self.steps],
        }, indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "F_k", "bound", "envelope"])
        for s in self.steps:
            bound = "" if s.k == 0 else repr(recurrence_bound(self.steps[s.k - 1].F))
            w.writerow([s.k, repr(s.F), bound, repr(envelope(s.k))])
        return buf.getvalue()


def _step_parameter(F: float) -> Fraction:
    return Fraction(3.0 / (3.0 + F)).limit_denominator(10**9)


def _advance(profile: DepthProfile, F: float, settings: FEMSettings, stability: float, max_doublings: int,
             workers: int = 1):
    t = _step_parameter(F)
    b0 = 10 * Fraction(profile.half_width)
    # trial j uses b = b0 * 2**j, a = 2b
    trials: list[tuple] = []

    def run(j):
        b = b0 * 2**j
        nxt = shrink_translate_union(profile, t, 2 * b, b)
        sol = solve_F(nxt, settings)
        return (2 * b, b, nxt, sol.value, sol.identity_defect)

    chosen = None
    batch = max(1, workers)
    with ThreadPoolExecutor(max_workers=batch) as pool:
        while chosen is None and len(trials) <= max_doublings:
            nxt_j = range(len(trials), min(len(trials) + batch, max_doublings + 1))
            trials.extend(pool.map(run, nxt_j))
            # first j whose doubling moves F by less than the threshold
            for j in range(len(trials) - 1):
                f0, f1 = trials[j][3], trials[j + 1][3]
                if abs(f1 - f0) <= stability * abs(f0):
                    chosen = j
                    break
    stable = chosen is not None
    if stable:
        # drop speculative trials so the record does not depend on the worker count
        trials = trials[:chosen + 2]
    pick = chosen if stable else len(trials) - 1
    a, b, nxt, Fn, defect = trials[pick]
    info = [{"a": str(x[0]), "b": str(x[1]), "F": x[3]} for x in trials]
    return t, a, b, nxt, Fn, defect, pick, stable, info


def run_iteration(c, k_max: int, settings: FEMSettings | None = None, stability: float = 0.005,
                  max_doublings: int = 6, workers: int = 1, stop_below: float | None = None) -> CompetitorTrace:
    """``E_0 = A_c`` and ``E_{k+1} = (E_k)_{t_k, a_k, b_k}`` with ``t_k = 3 / (3 + F_k)``.

    ``a_k, b_k`` start at ``b = 10 * half-width, a = 2b`` and are doubled
    until ``F`` moves by less than ``stability`` (relative); the smaller
    pair of the first stable couple is kept.  ``stop_below`` ends the
    run early once ``F_k`` drops below it.
    """
    if k_max < 0:
        raise ValueError("k_max must be nonnegative")
    settings = settings or FEMSettings()
    c = as_exact(c)
    prof = triangle_profile(c)
    sol = solve_F(prof, settings)
    F = sol.value
    trace = CompetitorTrace(c=c, settings=settings)
    trace.steps.append(CompetitorStep(0, F, float(prof.area), float(prof.half_width), prof,
                                      identity_defect=sol.identity_defect))
    for k in range(k_max):
        if stop_below is not None and F < stop_below:
            break
        t, a, b, prof, F, defect, dbl, stable, info = _advance(prof, F, settings, stability, max_doublings, workers)
        trace.steps.append(CompetitorStep(k + 1, F, float(prof.area), float(prof.half_width), prof, t, a, b, dbl,
                                          stable, info, defect))
    return trace


# strict improvement ----------------------------------------------------------------


def _halfplanes_Ac(c) -> list[tuple]:
    c = as_exact(c)
    return [(0, 1, 0), (1 / c, -1, 1), (-1 / c, -1, 1)]


def target_region(length: float, c) -> PlanarPolygonSet:
    """``D = A_c ∩ (R^2 \\ Omega) ∩ {x2 >= -3/5}``."""
    cone = ConeParams(length)
    c = as_exact(c)
    strip = wedge_complement_strip(cone, D_DEPTH, width=2 * c if length >= math.pi else None)
    return strip.clipped(_halfplanes_Ac(c))


def outside_area(profile: DepthProfile, length: float):
    """``|E ∩ (R^2 \\ Omega)|``, exact when the wedge slope is rational."""
    poly = profile.to_polygon()
    if length >= math.pi:
        return poly.area
    return poly.clipped(WedgeRegion(length).complement_halfplanes(exact_slope(length))).area


def contains_region(profile: DepthProfile, region: PlanarPolygonSet) -> bool:
    """True when ``region`` lies in the closure of the profile set (zero-area difference)."""
    if region.is_empty:
        return True
    xs, ds = profile.xs, profile.ds
    missing = Fraction(0)
    for loop in region.loops:
        # parts left and right of the support
        for hp in ((1, 0, xs[0]), (-1, 0, -xs[-1])):
            missing += abs(shoelace(clip_convex(list(loop), [hp])))
        for i in range(len(xs) - 1):
            x0, x1, d0, d1 = xs[i], xs[i + 1], ds[i], ds[i + 1]
            # below the segment: x2 <= -(d0 + (d1 - d0)(x1' - x0)/(x1 - x0))
            s = (d1 - d0) / (x1 - x0)
            hps = [(-1, 0, -x0), (1, 0, x1), (s, 1, s * x0 - d0)]
            missing += abs(shoelace(clip_convex(list(loop), hps)))
    return missing == 0


@dataclass
class StrictImprovement:
    length: float
    c: float
    k: int
    F: float
    outside: float
    gap: float
    direct_gap: float | None
    d_area: float
    contains_d: bool
    status: str
    required_iterations: int
    cartesian_gap: float | None = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def strict_improvement_check(length: float, c, trace: CompetitorTrace, settings: FEMSettings | None = None,
                             solution: FSolution | None = None, cartesian_h: float | None = None,
                             cartesian_growth: float = 0.1) -> StrictImprovement:
    """``F(E) - |E ∩ (R^2 \\ Omega)|`` for the terminal set, with the direct energy gap on ``Omega``.

    ``cartesian_h`` adds the same gap from :func:`omega_gap_cartesian` on
    a graded grid.  Raises :class:`ContainmentError` when the terminal
    set misses part of the target region ``D``.
    """
    if not 0 < length < 2 * math.pi:
        raise ValueError("need 0 < l < 2*pi")
    settings = settings or trace.settings
    step = trace.terminal
    D = target_region(length, c)
    d_area = float(D.area)
    if not contains_region(step.profile, D):
        raise ContainmentError("the terminal set does not contain D; increase c")
    sol = solution or solve_F(step.profile, settings)
    out = float(outside_area(step.profile, length))
    gap = sol.value - out
    return StrictImprovement(
        length=length,
        c=float(c),
        k=step.k,
        F=sol.value,
        outside=out,
        gap=gap,
        direct_gap=sol.omega_gap(length) if length <= math.pi else None,
        d_area=d_area,
        contains_d=True,
        status="improved" if gap < 0 else "insufficient iterations",
        required_iterations=required_iterations(d_area) if d_area > 0 else -1,
        cartesian_gap=(omega_gap_cartesian(step.profile, length, h=cartesian_h, growth=cartesian_growth)
                       if cartesian_h and length <= math.pi else None),
    )


def full_target_c(length: float) -> Fraction:
    """Smallest power of two ``c`` for which ``D`` is the whole wedge strip."""
    cone = ConeParams(length)
    full = wedge_complement_strip(cone, D_DEPTH).area if length < math.pi else None
    c = Fraction(1)
    while full is not None and target_region(length, c).area < full:
        c *= 2
    return c


def auto_competitor(length: float, k_max: int, settings: FEMSettings | None = None, c=None,
                    max_escalations: int = 4, stop_early: bool = True, cartesian_h: float | None = None, **kw):
    """Run the iteration, escalating ``c`` until the terminal set contains ``D``.

    ``c`` starts at the smallest power of two for which ``D`` is the
    whole wedge strip.  With ``stop_early`` the run ends as soon as
    ``F_k`` falls below ``|D|``.  Returns the trace and the
    strict-improvement record.
    """
    settings = settings or FEMSettings()
    c = full_target_c(length) if c is None else as_exact(c)
    d_area = float(target_region(length, c).area)
    for _ in range(max_escalations + 1):
        trace = run_iteration(c, k_max, settings, stop_below=d_area if stop_early else None, **kw)
        trace.target = d_area
        try:
            return trace, strict_improvement_check(length, c, trace, settings, cartesian_h=cartesian_h)
        except ContainmentError:
            c *= 2
            d_area = float(target_region(length, c).area)
    raise ContainmentError(f"D not contained after {max_escalations} escalations of c")
