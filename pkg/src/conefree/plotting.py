"""Static SVG figures for the report commands.

Figures are written with a fixed hash salt and no date so that repeated
runs produce identical files.
"""

from __future__ import annotations

import io
import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from conefree.contour import FreeBoundary  # noqa: E402
from conefree.grids import ScalarField  # noqa: E402

_RC = {"svg.hashsalt": "conefree", "svg.fonttype": "none", "font.size": 9}


def _svg(fig) -> str:
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None}, bbox_inches="tight")
    plt.close(fig)
    return buf.getvalue()


def _planar(r, theta, length):
    # spread the full angle of the cone over one turn for display
    phi = 2.0 * math.pi * np.asarray(theta) / length
    return np.asarray(r) * np.cos(phi), np.asarray(r) * np.sin(phi)


def field_figure(field: ScalarField, free_boundary: FreeBoundary | None = None, title: str = "") -> str:
    """Polar field drawn on a disc (angle rescaled by ``2*pi/l``) with its zero contours."""
    g = field.grid
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.6, 4.0))
        x, y = _planar(g.r, g.theta, g.cone.length)
        vmax = float(np.abs(field.values).max()) or 1.0
        tpc = ax.tripcolor(x, y, field.values, shading="gouraud", cmap="RdBu_r", vmin=-vmax, vmax=vmax)
        fig.colorbar(tpc, ax=ax, shrink=0.8)
        if free_boundary is not None:
            for seg, tag in zip(free_boundary.segments, free_boundary.tags):
                (r0, t0), (r1, t1) = seg
                px, py = _planar([r0, r1], [t0, t1], g.cone.length)
                ax.plot(px, py, color="k" if tag > 0 else "0.4", lw=0.8)
        ax.set_aspect("equal")
        ax.set_axis_off()
        ax.set_title(title or f"l = {g.cone.length:.4f}")
        return _svg(fig)


def scan_figure(radii, values, violations=(), ylabel: str = "value", reference: float | None = None) -> str:
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.6, 3.2))
        ax.plot(radii, values, marker="o", ms=2.5, lw=1.0)
        if reference is not None:
            ax.axhline(reference, color="0.5", ls="--", lw=0.8)
        for _, r1, _ in violations:
            ax.axvline(r1, color="tab:red", lw=0.6)
        ax.set_xlabel("r")
        ax.set_ylabel(ylabel)
        return _svg(fig)


def competitor_figure(trace) -> str:
    """``F_k`` against the one-step bound and the envelope, plus the central part of each set."""
    from conefree.competitor import envelope, recurrence_bound

    ks = [s.k for s in trace.steps]
    F = trace.values
    with plt.rc_context(_RC):
        fig, (a1, a2) = plt.subplots(1, 2, figsize=(8.0, 3.2))
        a1.plot(ks, F, marker="o", label="F_k")
        a1.plot(ks[1:], [recurrence_bound(f) for f in F[:-1]], ls=":", label="3F/(3+F)")
        a1.plot(ks, [envelope(k) for k in ks], ls="--", label="6/(3+2k)")
        if trace.target is not None:
            a1.axhline(trace.target, color="0.5", lw=0.8, label="|D|")
        a1.set_xlabel("k")
        a1.legend(frameon=False)
        for s in trace.steps:
            xs = np.array([float(v) for v in s.profile.xs])
            ds = np.array([float(v) for v in s.profile.ds])
            grid = np.linspace(-4.0, 4.0, 801)
            a2.plot(grid, -np.interp(grid, xs, ds, left=0.0, right=0.0), lw=0.9, label=f"k={s.k}")
        a2.set_xlabel("x1")
        a2.set_ylabel("x2")
        a2.set_ylim(-1.05, 0.05)
        return _svg(fig)
