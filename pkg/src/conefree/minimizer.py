"""Discrete minimizers of the two-phase functional on ``C_1``.

Every discrete minimizer is harmonic (``(L u)_i = 0``) at each interior
node where it is nonzero, so it is determined by its zero set ``Z``:
``u_Z`` vanishes on ``Z``, equals ``g`` on the outer ring and is discrete
harmonic on the remaining interior nodes ``F``.  The search runs over
zero sets.

Moves add one node to ``Z`` or release one from it, and are scored
exactly with the current factorization of ``L_FF``:

* adding ``k``: ``u' = u - (u_k / G_kk) G[:, k]``, Dirichlet energy up by ``u_k**2 / G_kk``;
* releasing ``k``: ``u_k' = -rho_k / S_k`` with ``rho = (L u)_k`` and Schur
  complement ``S_k``, energy down by ``rho_k**2 / S_k``;

where ``G = L_FF^{-1}``.  The measure change is recomputed from the new
field, so each score is the exact change of ``J``.  Improving moves are
applied in batches and the batch is halved until ``J`` actually drops.
Levels run coarse to fine, each level starting from the prolonged zero
set of the previous one.  The final certificate checks every interior
node against both single-node alternatives (value 0 and the local
harmonic value) without relaxation.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse.linalg as spla

from conefree.cone import ConeParams
from conefree.contour import FreeBoundary, extract_free_boundary
from conefree.grids import PolarGrid, ScalarField, discrete_energy

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProblemSpec:
    cone: ConeParams
    lambda_plus: float
    lambda_minus: float
    boundary: Callable[[np.ndarray], np.ndarray]
    name: str = "custom"

    def __post_init__(self):
        if self.lambda_plus < 0 or self.lambda_minus < 0:
            raise ValueError("phase weights must be nonnegative")
        if self.lambda_plus == self.lambda_minus:
            raise ValueError("equal phase weights are not supported")

    def boundary_values(self, grid: PolarGrid) -> np.ndarray:
        th = np.arange(grid.n_theta) * grid.dtheta
        g = np.asarray(self.boundary(th), dtype=float) * np.ones(grid.n_theta)
        if not np.all(np.isfinite(g)):
            raise ValueError("boundary samples must be finite")
        return g

    def phase_weights(self, values: np.ndarray) -> np.ndarray:
        return np.where(values > 0, self.lambda_plus, np.where(values < 0, self.lambda_minus, 0.0))


@dataclass
class MinimizeOptions:
    starts: int = 4
    levels: int = 4
    min_rings: int = 16
    max_iterations: int = 400
    chunk: int = 128
    window: int = 4
    rel_tol: float = 1e-11
    keep_within: float = 1e-6


@dataclass
class MinimizerResult:
    field: ScalarField
    energy: float
    phase_pos: np.ndarray
    phase_neg: np.ndarray
    free_boundary: FreeBoundary
    vertex_distance: float
    certified: bool
    converged: bool
    diagnostics: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "energy": self.energy,
            "vertex_distance": self.vertex_distance if math.isfinite(self.vertex_distance) else "inf",
            "certificate": self.certified,
            "converged": self.converged,
            "iterations": self.diagnostics.get("iterations"),
            "best_start": self.diagnostics.get("best_start"),
            "near_optimal_starts": self.diagnostics.get("near_optimal_starts"),
            "n_r": self.field.grid.n_r,
            "n_theta": self.field.grid.n_theta,
        }

    def write(self, directory: str, config: dict | None = None) -> None:
        """``field.csv``, ``free_boundary.csv`` and ``summary.json``, each recording ``config``."""
        from conefree.records import dumps_json, header_block, write_atomic

        config = config or {}
        header = header_block(config)
        os.makedirs(directory, exist_ok=True)
        write_atomic(os.path.join(directory, "field.csv"), header + self.field.to_csv())
        write_atomic(os.path.join(directory, "free_boundary.csv"), header + self.free_boundary.to_csv())
        body = {
            "config": {k: str(v) for k, v in config.items()},
            "summary": self.summary(),
            "starts": self.diagnostics.get("starts", []),
            "descent": self.diagnostics.get("descent", {}),
        }
        write_atomic(os.path.join(directory, "summary.json"), dumps_json(body))


class ZeroSetProblem:
    """Zero-set parametrization of the discrete problem on one grid."""

    def __init__(self, spec: ProblemSpec, grid: PolarGrid, rel_tol: float = 1e-11):
        if abs(grid.cone.length - spec.cone.length) > 1e-14:
            raise ValueError("grid and problem live on different cones")
        self.spec, self.grid, self.rel_tol = spec, grid, rel_tol
        self.L = grid.laplacian.tocsr()
        self.diag = self.L.diagonal()
        self.areas = grid.areas
        self.interior = ~grid.boundary
        self.g = np.zeros(grid.n_nodes)
        self.g[grid.boundary] = spec.boundary_values(grid)
        t, h, _, _ = grid.edges
        self.edge_t, self.edge_h = t, h

    # field and energy -------------------------------------------------
    def factor(self, zero: np.ndarray):
        free = self.interior & ~zero
        idx = np.flatnonzero(free)
        if len(idx) == 0:
            return idx, None
        A = self.L[idx][:, idx].tocsc()
        lu = spla.splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0, options={"SymmetricMode": True})
        return idx, lu

    def solve(self, zero: np.ndarray, fac=None):
        idx, lu = fac if fac is not None else self.factor(zero)
        u = self.g.copy()
        if lu is not None:
            rhs = -(self.L[idx] @ self.g)
            u[idx] = lu.solve(rhs)
        return u, (idx, lu)

    def energy(self, u: np.ndarray) -> float:
        return float(u @ (self.L @ u) + self.areas @ self.spec.phase_weights(u))

    def tol(self, J: float) -> float:
        return self.rel_tol * max(1.0, abs(J))

    # certificate --------------------------------------------------------
    def single_node_gains(self, u: np.ndarray) -> np.ndarray:
        """Best decrease of ``J`` from changing one interior node alone (0 if none)."""
        Lu = self.L @ u
        W = self.diag
        m = u - Lu / W
        lam = self.spec.phase_weights
        cur = W * (u - m) ** 2 + self.areas * lam(u)
        alt0 = W * m**2
        altm = self.areas * lam(m)
        gain = cur - np.minimum(alt0, altm)
        gain[~self.interior] = 0.0
        return np.maximum(gain, 0.0)

    def certificate(self, u: np.ndarray, J: float) -> tuple[bool, float]:
        gain = self.single_node_gains(u)
        worst = float(gain.max()) if gain.size else 0.0
        return worst <= self.tol(J), worst

    # move scoring -------------------------------------------------------
    def candidates(self, u: np.ndarray, zero: np.ndarray) -> np.ndarray:
        cls = np.where(zero, 0, np.where(u > 0, 1, np.where(u < 0, -1, 0)))
        differ = cls[self.edge_t] != cls[self.edge_h]
        band = np.zeros(self.grid.n_nodes, dtype=bool)
        band[self.edge_t[differ]] = True
        band[self.edge_h[differ]] = True
        band |= self.single_node_gains(u) > 0
        band &= self.interior
        return np.flatnonzero(band)

    def score(self, u, zero, fac, cand, chunk=128):
        """Exact ``Delta J`` and new node value for each candidate move."""
        idx, lu = fac
        pos = -np.ones(self.grid.n_nodes, dtype=int)
        pos[idx] = np.arange(len(idx))
        uF = u[idx]
        lamF = self.spec.phase_weights(uF)
        aF = self.areas[idx]
        base_meas = aF @ lamF
        Lu = self.L @ u
        dJ = np.full(len(cand), np.inf)
        for s in range(0, len(cand), chunk):
            block = cand[s : s + chunk]
            nb = len(block)
            rhs = np.zeros((len(idx), nb))
            adding = ~zero[block]
            rows = []
            for c, k in enumerate(block):
                if adding[c]:
                    rhs[pos[k], c] = 1.0
                    rows.append(None)
                else:
                    # L is symmetric: column k of L_F. is row k restricted to F
                    lo, hi = self.L.indptr[k], self.L.indptr[k + 1]
                    p = pos[self.L.indices[lo:hi]]
                    sel = p >= 0
                    rhs[p[sel], c] = self.L.data[lo:hi][sel]
                    rows.append((p[sel], self.L.data[lo:hi][sel]))
            X = lu.solve(rhs)
            coef = np.zeros(nb)
            dQ = np.zeros(nb)
            newk = np.zeros(nb)
            for c, k in enumerate(block):
                if adding[c]:
                    Gkk = X[pos[k], c]
                    coef[c] = u[k] / Gkk
                    dQ[c] = u[k] ** 2 / Gkk
                else:
                    p, w = rows[c]
                    S = self.diag[k] - float(w @ X[p, c])
                    if S <= 0:
                        continue
                    xk = -Lu[k] / S
                    coef[c] = xk
                    newk[c] = xk
                    dQ[c] = -Lu[k] ** 2 / S
            Unew = uF[:, None] - X * coef[None, :]
            for c, k in enumerate(block):
                if adding[c]:
                    Unew[pos[k], c] = 0.0
            meas = aF @ self.spec.phase_weights(Unew)
            extra = np.where(adding, 0.0, self.areas[block] * self.spec.phase_weights(newk))
            dJ[s : s + nb] = dQ + meas + extra - base_meas
        return dJ

    def score_local(self, u, zero, cand, radius=4):
        """Approximate ``Delta J`` with the relaxation confined to a window around each node.

        The window is the ``(2*radius+1)**2`` block of ring/angle offsets
        plus the vertex.  Nodes outside it stay frozen, so an improvement
        found here is a real improvement of the frozen-outside problem.
        All windows share one shape and are solved as one batch.  The
        vertex itself is left to the exact scorer.
        """
        g = self.grid
        nr, nt, dt = g.n_r, g.n_theta, g.dtheta
        d = radius
        dJ = np.full(len(cand), np.inf)
        if 2 * d + 1 >= nt:
            return dJ
        sel = np.flatnonzero(cand != 0)
        if len(sel) == 0:
            return dJ
        k = cand[sel]
        n, w = len(k), 2 * d + 1
        m = w * w + 1
        off = np.arange(-d, d + 1)
        I = g.ring[k][:, None, None] + off[None, :, None]
        J = (g.col[k][:, None, None] + off[None, None, :]) % nt
        I, J = np.broadcast_arrays(I, J)
        valid = (I >= 1) & (I <= nr - 1)
        N = np.where(valid, g.index(np.clip(I, 1, nr), J), 0)
        free = self.interior & ~zero
        center = np.zeros((n, w, w), dtype=bool)
        center[:, d, d] = True
        act = valid & (free[N] | center)
        vert_act = (free[0] & (g.ring[k] - d <= 1))
        Nf = np.concatenate([N.reshape(n, -1), np.zeros((n, 1), dtype=int)], axis=1)
        actf = np.concatenate([act.reshape(n, -1), vert_act[:, None]], axis=1)

        A = np.zeros((n, m, m))
        diag = np.where(actf, self.diag[Nf], 1.0)
        A[:, np.arange(m), np.arange(m)] = diag
        flat = np.arange(w * w).reshape(w, w)
        Iw = I.astype(float)
        # radial couplings (a, b) - (a+1, b)
        p, q = flat[:-1, :].ravel(), flat[1:, :].ravel()
        both = actf[:, p] & actf[:, q]
        wr = (Iw[:, :-1, :].reshape(n, -1) + 0.5) * dt
        A[:, p, q] = np.where(both, -wr, 0.0)
        A[:, q, p] = A[:, p, q]
        # angular couplings (a, b) - (a, b+1)
        p, q = flat[:, :-1].ravel(), flat[:, 1:].ravel()
        both = actf[:, p] & actf[:, q]
        wa = 1.0 / (np.maximum(Iw[:, :, :-1], 1.0).reshape(n, -1) * dt)
        A[:, p, q] = np.where(both, -wa, 0.0)
        A[:, q, p] = A[:, p, q]
        # vertex spokes to ring 1
        ring1 = (I == 1).reshape(n, -1) & actf[:, : w * w] & vert_act[:, None]
        A[:, : w * w, m - 1] = np.where(ring1, -0.5 * dt, 0.0)
        A[:, m - 1, : w * w] = A[:, : w * w, m - 1]

        c = d * w + d
        e = np.zeros((n, m, 1))
        e[:, c, 0] = 1.0
        z = np.linalg.solve(A, e)[:, :, 0]
        zk = z[:, c]
        Lu = self.L @ u
        old = np.where(actf, u[Nf], 0.0)
        adding = ~zero[k]
        scale = np.where(adding, -u[k] / zk, -Lu[k])
        new = old + scale[:, None] * z
        new[adding, c] = 0.0
        dQ = np.where(adding, u[k] ** 2 / zk, -Lu[k] ** 2 * zk)
        lam = self.spec.phase_weights
        areas = np.where(actf, self.areas[Nf], 0.0)
        dmeas = (areas * (lam(new) - lam(old))).sum(axis=1)
        out = dQ + dmeas
        out[zk <= 0] = np.inf
        dJ[sel] = out
        return dJ

    def _apply_best(self, u, zero, fac, J, cand, dJ):
        good = np.flatnonzero(dJ < -self.tol(J))
        if len(good) == 0:
            return None
        order = good[np.argsort(dJ[good], kind="stable")]
        batch = self._spread(cand[order])
        while len(batch):
            trial = zero.copy()
            trial[batch] = ~trial[batch]
            u2, fac2 = self.solve(trial)
            J2 = self.energy(u2)
            if J2 < J - self.tol(J):
                return trial, u2, fac2, J2
            if len(batch) == 1:
                return None
            batch = batch[: len(batch) // 2]
        return None

    def descend(self, zero: np.ndarray, max_iterations: int, chunk: int = 128, window: int = 4, exact: bool = True):
        """Batch descent over zero sets; returns final zero set, field, J, log and convergence flag.

        Moves are screened with windowed scores first; the exact global
        scores are used only once the windowed pass finds nothing, so with
        ``exact`` the stopping test is exact.
        """
        zero = zero & self.interior
        u, fac = self.solve(zero)
        J = self.energy(u)
        history = [J]
        converged = False
        for _ in range(max_iterations):
            cand = self.candidates(u, zero)
            if len(cand) == 0:
                converged = True
                break
            step = None
            if window > 0:
                step = self._apply_best(u, zero, fac, J, cand, self.score_local(u, zero, cand, window))
            if step is None and (exact or window <= 0):
                if fac[1] is None:
                    # no free node left: score releases by direct solves
                    dJ = self._score_all_zero(u, zero, cand)
                else:
                    dJ = self.score(u, zero, fac, cand, chunk)
                step = self._apply_best(u, zero, fac, J, cand, dJ)
            if step is None:
                converged = True
                break
            zero, u, fac, J = step
            history.append(J)
        return zero, u, J, history, converged

    def _score_all_zero(self, u, zero, cand):
        dJ = np.full(len(cand), np.inf)
        for c, k in enumerate(cand):
            trial = zero.copy()
            trial[k] = False
            u2, _ = self.solve(trial)
            dJ[c] = self.energy(u2) - self.energy(u)
        return dJ

    def _spread(self, ordered: np.ndarray) -> np.ndarray:
        """Greedy subset of candidates with no two sharing an edge, in score order."""
        taken = np.zeros(self.grid.n_nodes, dtype=bool)
        blocked = np.zeros(self.grid.n_nodes, dtype=bool)
        indptr, indices = self.L.indptr, self.L.indices
        out = []
        for k in ordered:
            if blocked[k]:
                continue
            out.append(k)
            taken[k] = True
            blocked[indices[indptr[k] : indptr[k + 1]]] = True
        return np.array(out, dtype=int)


def grid_levels(grid: PolarGrid, opts: MinimizeOptions) -> list[PolarGrid]:
    levels = [grid]
    while len(levels) < opts.levels:
        g = levels[-1]
        if g.n_r % 2 or g.n_theta % 2 or g.n_r // 2 < opts.min_rings or g.n_theta // 2 < 8:
            break
        levels.append(PolarGrid(g.cone, g.n_r // 2, g.n_theta // 2, g.radius))
    return levels[::-1]


def prolong_zero_set(coarse: PolarGrid, zero: np.ndarray, fine: PolarGrid) -> np.ndarray:
    ind = coarse.interpolate(zero.astype(float), fine.r, fine.theta)
    return (ind >= 0.5) & ~fine.boundary


def initial_radial(problem: ZeroSetProblem) -> np.ndarray:
    """Zero set of the 1-homogeneous extension ``r*g(theta)``."""
    grid = problem.grid
    outer = problem.g[grid.boundary]
    return (outer[grid.col] == 0.0) & problem.interior


def initial_zero_sets(problem: ZeroSetProblem, count: int, finest: ZeroSetProblem | None = None) -> list[tuple[str, np.ndarray]]:
    """Named starting zero sets; the radial start is dropped when it coincides with the harmonic one."""
    grid = problem.grid
    h, _ = problem.solve(np.zeros(grid.n_nodes, dtype=bool))
    scale = max(float(np.abs(problem.g).max()), 1e-300)
    inner = problem.interior
    radial = initial_radial(finest or problem)
    starts = [("harmonic", np.zeros(grid.n_nodes, dtype=bool))]
    if radial.any():
        starts.append(("radial", radial))
    starts += [
        ("truncated", (np.abs(h) <= 0.1 * scale) & inner),
        ("core_quarter", (grid.r < 0.25 * grid.radius) & inner),
        ("core_half", (grid.r < 0.5 * grid.radius) & inner),
    ]
    return starts[: max(1, count)]


def _build_result(problem: ZeroSetProblem, u: np.ndarray, certified: bool, converged: bool, diagnostics: dict) -> MinimizerResult:
    f = ScalarField(problem.grid, u)
    fb = extract_free_boundary(f)
    J = discrete_energy(f, problem.spec.lambda_plus, problem.spec.lambda_minus).total
    return MinimizerResult(
        field=f,
        energy=J,
        phase_pos=u > 0,
        phase_neg=u < 0,
        free_boundary=fb,
        vertex_distance=fb.vertex_distance,
        certified=certified,
        converged=converged,
        diagnostics=diagnostics,
    )


def minimize_J(spec: ProblemSpec, grid: PolarGrid, opts: MinimizeOptions | None = None, initial_fields=None) -> MinimizerResult:
    """Lowest-energy certified discrete minimizer over the multi-start set.

    ``initial_fields`` adds starts on the finest grid whose zero sets are
    taken from given nodal values.
    """
    opts = opts or MinimizeOptions()
    levels = grid_levels(grid, opts)
    problems = [ZeroSetProblem(spec, g, opts.rel_tol) for g in levels]
    runs = []
    for name, z0 in initial_zero_sets(problems[0], opts.starts, problems[-1]):
        if name == "radial":
            # sign patterns of the data are resolution independent: start on the finest grid
            runs.append((name, len(levels) - 1, initial_radial(problems[-1])))
        else:
            runs.append((name, 0, z0))
    for n, values in enumerate(initial_fields or []):
        runs.append((f"given_{n}", len(levels) - 1, (np.asarray(values) == 0) & problems[-1].interior))

    outcomes = []
    for name, first_level, zero in runs:
        descent = []
        iterations = 0
        ok = True
        for lev in range(first_level, len(levels)):
            if lev > first_level:
                zero = prolong_zero_set(levels[lev - 1], zero, levels[lev])
            zero, u, J, hist, conv = problems[lev].descend(
                zero, opts.max_iterations, opts.chunk, opts.window, exact=lev == len(levels) - 1
            )
            descent.append({"n_r": levels[lev].n_r, "energies": hist})
            iterations += len(hist) - 1
            ok = ok and conv
        cert, worst = problems[-1].certificate(u, J)
        log.info("start %s: J=%.12g certified=%s iterations=%d", name, J, cert, iterations)
        outcomes.append({"start": name, "energy": J, "certified": cert, "worst_gain": worst, "converged": ok, "iterations": iterations, "descent": descent, "u": u})

    best = min(outcomes, key=lambda o: (not o["certified"], o["energy"]))
    near = [o["start"] for o in outcomes if o["certified"] and o["energy"] <= best["energy"] + opts.keep_within]
    diagnostics = {
        "best_start": best["start"],
        "iterations": best["iterations"],
        "near_optimal_starts": near,
        "starts": [{k: v for k, v in o.items() if k not in ("u", "descent")} for o in outcomes],
        "descent": {o["start"]: o["descent"] for o in outcomes},
        "worst_single_node_gain": best["worst_gain"],
    }
    return _build_result(problems[-1], best["u"], best["certified"], best["converged"], diagnostics)
