"""Monotone quantities along radii: ACF product, Weiss energy and their scans."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from conefree.diagnostics import blow_up_rescale
from conefree.grids import PolarGrid, ScalarField, edge_energies, ring_profile


@dataclass
class MonotoneScan:
    radii: list
    values: list
    tolerance: float
    violations: list = field(default_factory=list)

    @classmethod
    def build(cls, radii, values, tolerance: float) -> "MonotoneScan":
        radii = [float(r) for r in radii]
        values = [float(v) for v in values]
        viol = [(r0, r1, v0 - v1) for r0, r1, v0, v1 in zip(radii, radii[1:], values, values[1:]) if v0 - v1 > tolerance]
        return cls(radii, values, float(tolerance), viol)

    def to_csv(self) -> str:
        bad = {v[1] for v in self.violations}
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "value", "violation_flag"])
        for r, v in zip(self.radii, self.values):
            w.writerow([repr(r), repr(v), int(r in bad)])
        return buf.getvalue()


def _check_radii(grid: PolarGrid, radii) -> np.ndarray:
    radii = np.asarray(radii, dtype=float)
    if np.any(radii <= 0) or np.any(radii > grid.radius * (1 + 1e-12)) or np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be increasing within (0, R]")
    return radii


def dirichlet_on_discs(u: ScalarField, radii) -> np.ndarray:
    """``int_{C_r} |Du|^2`` at each radius, interpolated between ring radii."""
    g = u.grid
    prof = ring_profile(g, edge_energies(g, u.values), np.zeros(g.n_nodes))
    return np.interp(radii, g.radii, prof)


def energy_on_discs(u: ScalarField, lambda_plus: float, lambda_minus: float, radii) -> np.ndarray:
    g = u.grid
    lam = np.where(u.values > 0, lambda_plus, np.where(u.values < 0, lambda_minus, 0.0))
    prof = ring_profile(g, edge_energies(g, u.values), lam * g.areas)
    return np.interp(radii, g.radii, prof)


def coarsened(u: ScalarField) -> ScalarField | None:
    """Every other ring and angle of ``u``, or None when the grid does not halve."""
    g = u.grid
    if g.n_r % 2 or g.n_theta % 2 or g.n_r < 4 or g.n_theta < 8:
        return None
    cg = PolarGrid(g.cone, g.n_r // 2, g.n_theta // 2, g.radius)
    idx = g.index(2 * cg.ring, 2 * cg.col)
    return ScalarField(cg, u.values[idx])


# ACF --------------------------------------------------------------------------


def _phi(u_plus: ScalarField, u_minus: ScalarField, alpha: float, radii) -> np.ndarray:
    return np.asarray(radii) ** (-2 * alpha) * dirichlet_on_discs(u_plus, radii) * dirichlet_on_discs(u_minus, radii)


def acf_phi(u_plus: ScalarField, u_minus: ScalarField, alpha: float, radii, tolerance: float | None = None,
            force: bool = False) -> MonotoneScan:
    """``r**(-2 alpha) D(C_r, u+) D(C_r, u-)`` over the radii.

    The default tolerance is three times the largest change of the
    values when both fields are coarsened by a factor two.
    """
    g = u_plus.grid
    if u_minus.grid.n_nodes != g.n_nodes:
        raise ValueError("fields live on different grids")
    if np.any(u_plus.values < 0) or np.any(u_minus.values < 0):
        raise ValueError("both fields must be nonnegative")
    if np.any(u_plus.values * u_minus.values != 0):
        raise ValueError("supports overlap")
    l = g.cone.length
    if l > 2 * math.pi + 1e-12 and not force:
        raise ValueError("the product is only monotone on cones of length at most 2*pi")
    if alpha > 4 * math.pi / l + 1e-12 and not force:
        raise ValueError(f"alpha={alpha} exceeds 4*pi/l={4 * math.pi / l}")
    radii = _check_radii(g, radii)
    vals = _phi(u_plus, u_minus, alpha, radii)
    if tolerance is None:
        cp, cm = coarsened(u_plus), coarsened(u_minus)
        est = float(np.abs(vals - _phi(cp, cm, alpha, radii)).max()) if cp is not None else 0.0
        tolerance = 3.0 * est
    return MonotoneScan.build(radii, vals, tolerance)


# Weiss ----------------------------------------------------------------------------


def radial_derivative_integral(u: ScalarField) -> np.ndarray:
    """``int_0^{r_k} int (d_t u)^2 dtheta dt`` at ring radii.

    ``d_t u`` on each radial segment is the centred difference at the
    segment midpoint, so the integrand never needs a value at the vertex.
    """
    g = u.grid
    rings = np.vstack([np.full(g.n_theta, u.values[0]), u.values[1:].reshape(g.n_r, g.n_theta)])
    slope = np.diff(rings, axis=0) / g.dr
    per_segment = (slope**2).sum(axis=1) * g.dtheta * g.dr
    return np.concatenate([[0.0], np.cumsum(per_segment)])


def _weiss_values(u: ScalarField, lambda_plus: float, lambda_minus: float, radii) -> np.ndarray:
    """Both terms are formed at ring radii and the scaled values interpolated.

    Interpolating the scaled terms keeps a 1-homogeneous field's W flat
    between rings; interpolating the disc energy itself would not.
    """
    g = u.grid
    rk = g.radii[1:]
    lam = np.where(u.values > 0, lambda_plus, np.where(u.values < 0, lambda_minus, 0.0))
    energy = ring_profile(g, edge_energies(g, u.values), lam * g.areas)[1:]
    first = energy / rk**2
    second = radial_derivative_integral(u)[1:] / rk
    return np.interp(np.asarray(radii, dtype=float), rk, first - second)


def _require_vertex_zero(u: ScalarField, tol: float) -> None:
    scale = max(1.0, float(np.abs(u.values).max()))
    if abs(u.values[0]) > tol * scale:
        raise ValueError(f"the Weiss energy needs u = 0 at the vertex, got {u.values[0]:.3e}")


def weiss_energy(u: ScalarField, spec, r: float, vertex_tol: float = 1e-9) -> float:
    """``r**-2 J(C_r, u) - r**-1 int_0^r int (d_t u(t, theta))**2 dtheta dt``."""
    _require_vertex_zero(u, vertex_tol)
    _check_radii(u.grid, [r])
    return float(_weiss_values(u, spec.lambda_plus, spec.lambda_minus, [r])[0])


def weiss_scan(u: ScalarField, spec, radii, rel_tol: float = 1e-3, vertex_tol: float = 1e-9) -> MonotoneScan:
    _require_vertex_zero(u, vertex_tol)
    radii = _check_radii(u.grid, radii)
    vals = _weiss_values(u, spec.lambda_plus, spec.lambda_minus, radii)
    return MonotoneScan.build(radii, vals, rel_tol * float(np.abs(vals).max()))


@dataclass(frozen=True)
class RescalingDefect:
    corrected: float
    literal: float


def weiss_rescaling_check(u: ScalarField, spec, r: float, R: float) -> RescalingDefect:
    """Compare ``W(C_R, u_r)`` with ``W(C_{rR}, u)`` (and, for the record, ``W(C_{rR}, u_r)``)."""
    ur = blow_up_rescale(u, r)
    lhs = weiss_energy(ur, spec, R)
    return RescalingDefect(
        corrected=abs(lhs - weiss_energy(u, spec, r * R)),
        literal=abs(lhs - weiss_energy(ur, spec, r * R)),
    )


def interpolation_error(u: ScalarField) -> float:
    """Max change at the nodes of the coarsened grid when ``u`` is interpolated from it."""
    cu = coarsened(u)
    if cu is None:
        return 0.0
    back = cu.grid.interpolate(cu.values, u.grid.r, u.grid.theta)
    return float(np.abs(back - u.values).max())
