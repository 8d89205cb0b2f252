"""Checks on computed fields: free-boundary flux jump, blow-ups, lattice pairs, regularity, barriers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from conefree.grids import PolarGrid, ScalarField, discrete_energy


class ProbeError(ValueError):
    pass


# flux jump ----------------------------------------------------------------


@dataclass(frozen=True)
class FluxJump:
    measured: float
    target: float
    slope_plus: float
    slope_minus: float
    normal: tuple[float, float]


def _chart_sample(field: ScalarField, r0: float, theta0: float, x, y):
    """Values at chart points; the chart puts the probe centre at ``(r0, 0)``."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    return field.grid.interpolate(field.values, np.hypot(x, y), theta0 + np.arctan2(y, x))


def _side_slope(s, v):
    # quadratic fit v = c0 + c1 s + c2 s^2; slope at s = 0
    A = np.stack([np.ones_like(s), s, s * s], axis=1)
    coef, *_ = np.linalg.lstsq(A, v, rcond=None)
    return float(coef[1])


def flux_jump_check(field: ScalarField, fb_point: tuple[float, float], probe_radius: float,
                    lambda_plus: float, lambda_minus: float, n_probe: int = 4) -> FluxJump:
    """One-sided normal slopes at a free-boundary point and ``|Du+|^2 - |Du-|^2``.

    The normal comes from a least-squares plane through a ring of samples
    around the point.  Each side is fitted by a quadratic in the signed
    distance along the normal.  The returned target is ``lambda_+**2 - lambda_-**2``.
    """
    r0, theta0 = fb_point
    R = field.grid.radius
    if r0 <= 4 * probe_radius or r0 + 4 * probe_radius >= R:
        raise ProbeError("probe window must stay 4 probe radii away from the vertex and the outer circle")
    phi = 2.0 * math.pi * np.arange(64) / 64
    ring_x = r0 + 2 * probe_radius * np.cos(phi)
    ring_y = 2 * probe_radius * np.sin(phi)
    vals = _chart_sample(field, r0, theta0, ring_x, ring_y)
    A = np.stack([np.ones_like(phi), np.cos(phi), np.sin(phi)], axis=1)
    coef, *_ = np.linalg.lstsq(A, vals, rcond=None)
    grad = coef[1:]
    if np.hypot(*grad) == 0:
        raise ProbeError("no sign change around the probe point")
    n = grad / np.hypot(*grad)
    s = probe_radius * np.arange(1, n_probe + 1)
    u0 = float(_chart_sample(field, r0, theta0, r0, 0.0)[0])
    up = _chart_sample(field, r0, theta0, r0 + s * n[0], s * n[1])
    um = _chart_sample(field, r0, theta0, r0 - s * n[0], -s * n[1])
    if not np.all(up > 0) or not np.all(um <= 0):
        raise ProbeError("probe window is not clean: each side must stay in one phase")
    sp_ = _side_slope(np.concatenate([[0.0], s]), np.concatenate([[u0], up]))
    sm_ = _side_slope(np.concatenate([[0.0], s]), np.concatenate([[u0], -um]))
    return FluxJump(
        measured=sp_**2 - sm_**2,
        target=lambda_plus**2 - lambda_minus**2,
        slope_plus=sp_,
        slope_minus=sm_,
        normal=(float(n[0]), float(n[1])),
    )


# blow-up --------------------------------------------------------------------


def blow_up_rescale(field: ScalarField, rho: float, min_rings: int = 8) -> ScalarField:
    """``u_rho(x) = u(rho x) / rho`` on a fresh grid of the same shape."""
    g = field.grid
    if not 0 < rho <= 1:
        raise ValueError("scale must lie in (0, 1]")
    if rho * g.n_r < min_rings:
        raise ValueError(f"only {rho * g.n_r:.1f} rings inside the rescaled disc; need {min_rings}")
    if rho == 1:
        return field.copy()
    vals = g.interpolate(field.values, rho * g.r, g.theta) / rho
    return ScalarField(PolarGrid(g.cone, g.n_r, g.n_theta, g.radius), vals)


# lattice ----------------------------------------------------------------------


def lattice_combine(u: ScalarField, v: ScalarField, spec) -> tuple[ScalarField, ScalarField, float]:
    """Pointwise min and max, and ``|J(min) + J(max) - J(u) - J(v)|``."""
    if u.grid is not v.grid and (u.grid.n_r, u.grid.n_theta) != (v.grid.n_r, v.grid.n_theta):
        raise ValueError("fields live on different grids")
    lo = ScalarField(u.grid, np.minimum(u.values, v.values))
    hi = ScalarField(u.grid, np.maximum(u.values, v.values))
    lp, lm = spec.lambda_plus, spec.lambda_minus
    J = lambda f: discrete_energy(f, lp, lm).total
    return lo, hi, abs(J(lo) + J(hi) - J(u) - J(v))


# regularity ---------------------------------------------------------------------


def cell_gradients(field: ScalarField) -> tuple[np.ndarray, np.ndarray]:
    """``|Du|`` on every grid cell and the cell-centre radius (vertex triangles first)."""
    g = field.grid
    nr, nt, dr, dt = g.n_r, g.n_theta, g.dr, g.dtheta
    ring = field.values[1:].reshape(nr, nt)
    nxt = np.roll(ring, -1, axis=1)
    # vertex triangles
    v_dr = (0.5 * (ring[0] + nxt[0]) - field.values[0]) / dr
    v_dt = (nxt[0] - ring[0]) / (dr * dt)
    tri = np.hypot(v_dr, v_dt)
    tri_r = np.full(nt, 0.5 * dr)
    # quads between rings i and i+1
    rc = (np.arange(1, nr) + 0.5)[:, None] * dr
    q_dr = 0.5 * ((ring[1:] - ring[:-1]) + (nxt[1:] - nxt[:-1])) / dr
    q_dt = 0.5 * ((nxt[:-1] - ring[:-1]) + (nxt[1:] - ring[1:])) / (rc * dt)
    quad = np.hypot(q_dr, q_dt)
    return np.concatenate([tri, quad.ravel()]), np.concatenate([tri_r, np.broadcast_to(rc, quad.shape).ravel()])


@dataclass
class RegularityReport:
    radii: list
    sup_gradient: list
    exponent: float
    beta: float
    holder_quotient: float
    lipschitz_ok: bool | None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def holder_quotient(field: ScalarField, beta: float, n_random: int = 20000, seed: int = 0) -> float:
    """Max of ``|u(x) - u(y)| / d(x, y)**beta`` over edges, vertex spokes and random node pairs."""
    g = field.grid
    u = field.values
    t, h, _, _ = g.edges
    rng = np.random.default_rng(seed)
    a = np.concatenate([t, rng.integers(0, g.n_nodes, n_random)])
    b = np.concatenate([h, rng.integers(0, g.n_nodes, n_random)])
    keep = a != b
    a, b = a[keep], b[keep]
    gap = np.abs(g.theta[a] - g.theta[b]) % g.cone.length
    gap = np.minimum(gap, g.cone.length - gap)
    chord = np.sqrt(np.maximum(g.r[a] ** 2 + g.r[b] ** 2 - 2 * g.r[a] * g.r[b] * np.cos(gap), 0.0))
    dist = np.where(gap < math.pi, chord, g.r[a] + g.r[b])
    ok = dist > 0
    return float((np.abs(u[a] - u[b])[ok] / dist[ok] ** beta).max())


def regularity_scan(field: ScalarField, beta: float | None = None, seed: int = 0) -> RegularityReport:
    g = field.grid
    l = g.cone.length
    beta = 0.5 * min(1.0, 2.0 * math.pi / l) if beta is None else beta
    grad, rc = cell_gradients(field)
    radii, sups = [], []
    r = 0.5 * g.radius
    while r >= 2 * g.dr:
        sel = (rc >= r) & (rc < 2 * r)
        if sel.any():
            radii.append(r)
            sups.append(float(grad[sel].max()))
        r *= 0.5
    pos = [(x, y) for x, y in zip(radii, sups) if y > 0]
    if len(pos) >= 2:
        xs, ys = np.log([p[0] for p in pos]), np.log([p[1] for p in pos])
        exponent = float(np.polyfit(xs, ys, 1)[0])
    else:
        exponent = 0.0
    lip = None if l > 2 * math.pi + 1e-12 else bool(exponent > -0.5)
    return RegularityReport(radii, sups, exponent, beta, holder_quotient(field, beta, seed=seed), lip)


# barrier ------------------------------------------------------------------------


@dataclass(frozen=True)
class Barrier:
    r0: float
    roots: tuple
    variant: str
    lambda_plus: float

    def profile(self, r):
        """``lambda_+ r0 ln^+(r0 / r)``."""
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            val = self.lambda_plus * self.r0 * np.log(self.r0 / r)
        return np.where(r >= self.r0, 0.0, val)


def _bisect(f, lo, hi, iters=200):
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def barrier_radius(delta: float, eps: float, lambda_plus: float, variant: str = "corrected") -> Barrier:
    """Radius ``r0`` of the logarithmic barrier.

    ``corrected``: ``lambda_+ r0 ln(eps/r0) = delta``, two roots in
    ``(0, eps)`` around the maximum at ``eps/e``; the larger one is used.
    ``literal``: ``lambda_+ r0 ln(r0/eps) = delta``, a single root above ``eps``.
    """
    if delta <= 0 or eps <= 0 or lambda_plus <= 0:
        raise ValueError("delta, eps and lambda_plus must be positive")
    if variant == "corrected":
        f = lambda r: lambda_plus * r * math.log(eps / r) - delta
        peak = eps / math.e
        top = lambda_plus * peak
        if delta > top * (1 + 1e-14):
            raise ValueError(f"no root: delta exceeds lambda_plus*eps/e = {top}")
        if delta >= top * (1 - 1e-14):
            return Barrier(peak, (peak,), variant, lambda_plus)
        small = _bisect(f, 0.0 + 1e-300, peak)
        large = _bisect(f, peak, eps)
        return Barrier(large, (small, large), variant, lambda_plus)
    if variant == "literal":
        f = lambda r: lambda_plus * r * math.log(r / eps) - delta
        hi = 2 * eps
        while f(hi) < 0:
            hi *= 2
        root = _bisect(f, eps, hi)
        return Barrier(root, (root,), variant, lambda_plus)
    raise ValueError(f"unknown barrier variant {variant!r}")
