"""Exact harmonic functions on a cone as finite Fourier sums.

Every harmonic function on a cone of length ``l`` is a sum of separated
solutions ``r**(2*pi*k/l) * (a_k cos(2*pi*k*theta/l) + b_k sin(...))``.
Truncations are exactly harmonic, and their Dirichlet energies on
``C_r`` have the closed form ``pi * sum_k k r**(4*pi*k/l) (a_k**2 + b_k**2)``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from conefree.cone import ConeParams

DEFAULT_ORDER = 64


@dataclass(frozen=True)
class FourierHarmonic:
    cone: ConeParams
    a: np.ndarray
    b: np.ndarray = field(default=None)

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=float)).copy()
        b = np.zeros_like(a) if self.b is None else np.atleast_1d(np.asarray(self.b, dtype=float)).copy()
        if a.shape != b.shape:
            raise ValueError("a and b must have the same length")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("coefficients must be finite")
        b[0] = 0.0
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @classmethod
    def mode(cls, cone: ConeParams, k: int, a: float = 1.0, b: float = 0.0) -> "FourierHarmonic":
        av = np.zeros(k + 1)
        bv = np.zeros(k + 1)
        av[k], bv[k] = a, b
        return cls(cone, av, bv)

    @property
    def order(self) -> int:
        return len(self.a) - 1

    @property
    def exponents(self) -> np.ndarray:
        return self.cone.holder_exponent * np.arange(len(self.a))

    def evaluate(self, r, theta):
        """Value at polar coordinates (broadcasting); ``a_0`` at the vertex."""
        r = np.asarray(r, dtype=float)
        theta = np.asarray(theta, dtype=float)
        w = self.cone.holder_exponent
        out = np.zeros(np.broadcast(r, theta).shape)
        for k in range(len(self.a)):
            if self.a[k] == 0.0 and self.b[k] == 0.0:
                continue
            if k == 0:
                out = out + self.a[0]
                continue
            rk = np.power(r, w * k)
            out = out + rk * (self.a[k] * np.cos(w * k * theta) + self.b[k] * np.sin(w * k * theta))
        return out if out.ndim else float(out)

    def radial_derivative(self, r, theta):
        r = np.asarray(r, dtype=float)
        theta = np.asarray(theta, dtype=float)
        w = self.cone.holder_exponent
        out = np.zeros(np.broadcast(r, theta).shape)
        for k in range(1, len(self.a)):
            if self.a[k] == 0.0 and self.b[k] == 0.0:
                continue
            p = w * k
            out = out + p * np.power(r, p - 1) * (self.a[k] * np.cos(p * theta) + self.b[k] * np.sin(p * theta))
        return out

    def dirichlet_energy(self, r: float) -> float:
        """Closed-form ``int_{C_r} |Dh|^2``."""
        if r <= 0:
            raise ValueError("radius must be positive")
        k = np.arange(len(self.a))
        terms = k * np.power(r, 2.0 * self.exponents) * (self.a**2 + self.b**2)
        return float(math.pi * terms[1:].sum())

    def scaled_energy_scan(self, alpha: float, radii) -> tuple[list[tuple[float, float]], list[tuple[float, float, float]]]:
        """``r**(-2 alpha) D(C_r, h)`` on increasing radii, plus relative drops above ``1e-12``."""
        radii = [float(r) for r in radii]
        if any(r <= 0 for r in radii) or any(b <= a for a, b in zip(radii, radii[1:])):
            raise ValueError("radii must be positive and strictly increasing")
        # closed-form energies for all radii at once
        rr = np.asarray(radii)[:, None]
        k = np.arange(1, len(self.a))
        weights = k * (self.a[1:] ** 2 + self.b[1:] ** 2)
        energy = math.pi * (weights * np.power(rr, 2.0 * self.exponents[1:])).sum(axis=1)
        scan = list(zip(radii, (rr[:, 0] ** (-2.0 * alpha) * energy).tolist()))
        violations = []
        for (r0, v0), (r1, v1) in zip(scan, scan[1:]):
            if v1 < v0 - 1e-12 * max(abs(v0), abs(v1)):
                violations.append((r0, r1, v0 - v1))
        return scan, violations

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "a_k", "b_k"])
        for k, (ak, bk) in enumerate(zip(self.a, self.b)):
            w.writerow([k, repr(float(ak)), repr(float(bk))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, cone: ConeParams) -> "FourierHarmonic":
        rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].startswith("#")]
        body = rows[1:] if rows and rows[0][0] == "k" else rows
        n = max(int(r[0]) for r in body) + 1
        a, b = np.zeros(n), np.zeros(n)
        for r in body:
            a[int(r[0])] = float(r[1])
            b[int(r[0])] = float(r[2])
        return cls(cone, a, b)


def exponent_margins(cone: ConeParams, alpha: float, order: int) -> np.ndarray:
    """Exponents ``4*pi*k/l - 2*alpha`` of the scaled energy, k = 1..order."""
    k = np.arange(1, order + 1)
    return 2.0 * cone.holder_exponent * k - 2.0 * alpha


def fit_dirichlet(samples, cone: ConeParams, order: int = DEFAULT_ORDER, radius: float = 1.0) -> FourierHarmonic:
    """Harmonic function on ``C_radius`` matching uniform boundary samples.

    Sample ``j`` sits at ``theta_j = j*l/N``.  The discrete Fourier
    projection is exact for trigonometric data of order ``<= order`` and
    needs ``N >= 2*order + 2`` to avoid aliasing.
    """
    g = np.asarray(samples, dtype=float)
    n = len(g)
    if n < 2 * order + 2:
        raise ValueError(f"{n} samples alias modes up to order {order}; need at least {2 * order + 2}")
    c = np.fft.rfft(g) / n
    a = np.zeros(order + 1)
    b = np.zeros(order + 1)
    a[0] = c[0].real
    a[1:] = 2.0 * c[1 : order + 1].real
    b[1:] = -2.0 * c[1 : order + 1].imag
    scale = np.power(radius, -cone.holder_exponent * np.arange(order + 1))
    return FourierHarmonic(cone, a * scale, b * scale)
