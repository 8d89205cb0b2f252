"""Fields whose free boundary runs through the vertex, and a numerical minimality check.

On a cone of length at least ``2*pi`` a whole plane's worth of angle fits
around the vertex, so the planar one-phase solution ``x2^+`` can be laid
on the cone and extended by zero.  Several such half-plane solutions
can share the vertex when there is room for all of them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from conefree.grids import PolarGrid, ScalarField, discrete_energy
from conefree.minimizer import MinimizeOptions, ProblemSpec, minimize_J
from conefree.diagnostics import lattice_combine

SNAP = 1e-12


def _linear_lobe(r, theta, center):
    """``r*cos(theta - center)`` where positive, exact zeros elsewhere."""
    c = np.cos(theta - center)
    return np.where(c > SNAP, r * c, 0.0)


def _angular_offset(theta, center, length):
    return (theta - center + 0.5 * length) % length - 0.5 * length


def slit_profile(length: float):
    """Boundary function (of the angle) of the transplanted half-plane solution."""
    if length < 2.0 * math.pi - 1e-12:
        raise ValueError("the half-plane solution needs a cone of length at least 2*pi")
    center = 0.5 * length

    def g(theta, r=1.0):
        theta = np.asarray(theta, dtype=float)
        off = _angular_offset(theta, center, length)
        return np.where(np.abs(off) < math.pi, _linear_lobe(r, off, 0.0), 0.0)

    return g


def slit_transplant(length: float, grid: PolarGrid) -> ScalarField:
    """Half-plane solution centred on the bisector ``theta = l/2``, zero off its sector."""
    if abs(grid.cone.length - length) > 1e-14:
        raise ValueError("grid lives on a different cone")
    g = slit_profile(length)
    vals = g(grid.theta, grid.r)
    vals[0] = 0.0
    return ScalarField(grid, vals)


def paste_centers(length: float, phases: int) -> np.ndarray:
    return (0.5 * length + np.arange(phases) * length / phases) % length


def multi_phase_paste(length: float, phases: int, grid: PolarGrid, threshold: float | None = None) -> ScalarField:
    """``phases`` positive lobes of angular width ``pi`` spread evenly around the vertex.

    ``threshold`` is the smallest admissible length; the default
    ``2*pi*phases`` is the room the lobes and their separating gaps need.
    """
    if phases < 1:
        raise ValueError("need at least one phase")
    threshold = 2.0 * math.pi * phases if threshold is None else threshold
    if length < threshold - 1e-12:
        raise ValueError(f"length {length} below the threshold {threshold} for {phases} phases")
    if abs(grid.cone.length - length) > 1e-14:
        raise ValueError("grid lives on a different cone")
    vals = np.zeros(grid.n_nodes)
    for c in paste_centers(length, phases):
        off = _angular_offset(grid.theta, c, length)
        vals = vals + np.where(np.abs(off) < 0.5 * math.pi, _linear_lobe(grid.r, off, 0.0), 0.0)
    vals[0] = 0.0
    return ScalarField(grid, vals)


def reflect(field_: ScalarField) -> ScalarField:
    """``v(r, -theta)``; the bisector and the seam are fixed lines of the reflection."""
    g = field_.grid
    j = (-g.col) % g.n_theta
    idx = g.index(g.ring, j)
    out = field_.values[idx]
    out[0] = field_.values[0]
    return ScalarField(g, out)


def bump(grid: PolarGrid, r0: float, theta0: float, radius: float) -> np.ndarray:
    """Smooth bump ``(1 - (d/radius)**2)**2`` on a disc that avoids the vertex (``radius < r0``)."""
    dth = _angular_offset(grid.theta, theta0, grid.cone.length)
    d2 = (grid.r**2 + r0**2 - 2.0 * grid.r * r0 * np.cos(dth)) / radius**2
    out = np.where((d2 < 1.0) & (np.abs(dth) < 0.5 * math.pi), (1.0 - d2) ** 2, 0.0)
    out[grid.boundary] = 0.0
    return out


def vertex_bump(grid: PolarGrid, radius: float) -> np.ndarray:
    out = np.where(grid.r < radius, (1.0 - (grid.r / radius) ** 2) ** 2, 0.0)
    out[grid.boundary] = 0.0
    return out


@dataclass
class MinimalityReport:
    energy: float
    min_gap: float
    gaps: list = field(default_factory=list)
    descent_energy: float = float("nan")
    descent_gap: float = float("nan")
    certified: bool = False
    lattice_defect: float = float("nan")
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "energy": self.energy,
            "min_gap": self.min_gap,
            "n_perturbations": len(self.gaps),
            "descent_energy": self.descent_energy,
            "descent_gap": self.descent_gap,
            "certified": self.certified,
            "lattice_defect": self.lattice_defect,
            "seed": self.seed,
        }


def verify_local_minimality(u: ScalarField, spec: ProblemSpec, n_perturbations: int = 200, seed: int = 0,
                            opts: MinimizeOptions | None = None, run_descent: bool = True) -> MinimalityReport:
    """Perturbation and descent test of a candidate minimizer with its own boundary data.

    Perturbations are seeded random bumps inside the disc, half of them
    followed by the lattice operations with the reflected field.
    """
    grid = u.grid
    J0 = discrete_energy(u, spec.lambda_plus, spec.lambda_minus).total
    rng = np.random.default_rng(seed)
    gaps = []
    defect = 0.0
    for n in range(n_perturbations):
        rad = rng.uniform(0.05, 0.3)
        r0 = rng.uniform(0.0, 1.0 - rad - grid.dr)
        th0 = rng.uniform(0.0, grid.cone.length)
        amp = rng.uniform(-0.2, 0.2)
        shape = vertex_bump(grid, rad) if r0 < rad else bump(grid, r0, th0, rad)
        v = ScalarField(grid, u.values + amp * shape)
        if n % 2:
            lo, hi, dfc = lattice_combine(v, reflect(v), spec)
            defect = max(defect, dfc)
            v = lo if n % 4 == 1 else hi
        Jv = discrete_energy(v, spec.lambda_plus, spec.lambda_minus).total
        gaps.append(Jv - J0)
    report = MinimalityReport(energy=J0, min_gap=min(gaps) if gaps else 0.0, gaps=gaps, lattice_defect=defect, seed=seed)
    if run_descent:
        own = ProblemSpec(spec.cone, spec.lambda_plus, spec.lambda_minus, _ring_boundary(u), name="own")
        res = minimize_J(own, grid, opts or MinimizeOptions(starts=1), initial_fields=[u.values])
        report.descent_energy = res.energy
        report.descent_gap = res.energy - J0
        report.certified = res.certified
    return report


def _ring_boundary(u: ScalarField):
    g = u.grid
    outer = u.values[g.boundary].copy()

    def boundary(theta):
        j = np.rint(np.asarray(theta) / g.dtheta).astype(int) % g.n_theta
        return outer[j]

    return boundary


def positive_components(field_: ScalarField) -> tuple[int, np.ndarray]:
    """Connected components of ``{u > 0}`` along grid edges (flood fill with seam wrap)."""
    g = field_.grid
    pos = field_.values > 0
    t, h, _, _ = g.edges
    keep = pos[t] & pos[h]
    nbrs = [[] for _ in range(g.n_nodes)]
    for a, b in zip(t[keep], h[keep]):
        nbrs[a].append(b)
        nbrs[b].append(a)
    labels = -np.ones(g.n_nodes, dtype=int)
    count = 0
    for s in np.flatnonzero(pos):
        if labels[s] >= 0:
            continue
        labels[s] = count
        stack = [s]
        while stack:
            a = stack.pop()
            for b in nbrs[a]:
                if labels[b] < 0:
                    labels[b] = count
                    stack.append(b)
        count += 1
    return count, labels
