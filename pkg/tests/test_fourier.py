import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conefree.cone import ConeParams
from conefree.fourier import FourierHarmonic, exponent_margins, fit_dirichlet
from conefree.grids import PolarGrid, ScalarField, laplacian_residual

PI = math.pi


def polar_quadrature_energy(h: FourierHarmonic, r: float, n: int = 800) -> float:
    """Midpoint rule for the disc integral of |Dh|^2, derivatives by centred differences."""
    l = h.cone.length
    rr = (np.arange(n) + 0.5) * r / n
    tt = (np.arange(4 * n) + 0.5) * l / (4 * n)
    R, T = np.meshgrid(rr, tt, indexing="ij")
    e = 1e-6
    ur = (h.evaluate(R + e, T) - h.evaluate(R - e, T)) / (2 * e)
    ut = (h.evaluate(R, T + e) - h.evaluate(R, T - e)) / (2 * e)
    return float(((ur**2 + (ut / R) ** 2) * R).sum() * (r / n) * (l / (4 * n)))


def test_plane_linear_function():
    h = FourierHarmonic.mode(ConeParams(2 * PI), 1)
    r, t = np.array([0.3, 1.0, 2.0]), np.array([0.1, 2.0, 5.0])
    assert np.allclose(h.evaluate(r, t), r * np.cos(t), atol=1e-15)


def test_evaluate_examples():
    assert FourierHarmonic.mode(ConeParams(4 * PI), 1).evaluate(1.0, 2 * PI) == pytest.approx(-1.0, abs=1e-15)
    assert FourierHarmonic.mode(ConeParams(PI), 2).evaluate(0.5, PI / 4) == pytest.approx(-0.0625, abs=1e-15)


def test_vertex_value_is_constant_term():
    h = FourierHarmonic(ConeParams(3.0), [1.5, 2.0, -1.0], [0.0, 0.5, 0.25])
    assert h.evaluate(0.0, 1.234) == 1.5


def test_sin_coefficient_of_constant_mode_ignored():
    h = FourierHarmonic(ConeParams(PI), [1.0, 0.0], [7.0, 0.0])
    assert h.b[0] == 0.0


def test_nonfinite_coefficients_rejected():
    with pytest.raises(ValueError):
        FourierHarmonic(ConeParams(PI), [1.0, float("nan")])
    with pytest.raises(ValueError):
        FourierHarmonic(ConeParams(PI), [1.0, 2.0], [0.0])


@settings(max_examples=50)
@given(st.floats(0.3, 15), st.lists(st.floats(-3, 3), min_size=2, max_size=6), st.floats(0, 1.5), st.floats(-10, 10))
def test_periodic_in_angle(length, coeffs, r, theta):
    h = FourierHarmonic(ConeParams(length), coeffs, coeffs[::-1])
    scale = sum(abs(c) for c in coeffs) * max(1.0, r) ** (2 * PI / length * len(coeffs)) + 1
    assert abs(h.evaluate(r, theta) - h.evaluate(r, theta + length)) <= 1e-13 * scale


def test_discrete_harmonicity_second_order():
    h = FourierHarmonic(ConeParams(1.5 * PI), [0.2, 1.0, -0.5, 0.3], [0.0, 0.4, 0.1, -0.2])
    errs = []
    for nr in (16, 32, 64):
        g = PolarGrid(h.cone, nr, 4 * nr)
        u = ScalarField(g, h.evaluate(g.r, g.theta))
        patch = (g.r >= 0.3) & (g.r <= 0.7)
        errs.append(np.abs(laplacian_residual(u)[patch]).max())
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert min(orders) >= 1.9


def test_fit_recovers_basis_function():
    cone = ConeParams(2.5)
    th = np.arange(256) * cone.length / 256
    h = fit_dirichlet(np.cos(2 * PI * th / cone.length), cone, order=16)
    assert abs(h.a[1] - 1) < 1e-12
    rest = np.concatenate([h.a[[0]], h.a[2:], h.b])
    assert np.abs(rest).max() < 1e-12


def test_fit_constant():
    h = fit_dirichlet(np.full(64, 3.0), ConeParams(PI), order=8)
    assert h.a[0] == pytest.approx(3.0, abs=1e-14)
    assert np.abs(h.a[1:]).max() < 1e-14 and np.abs(h.b).max() < 1e-14


def test_fit_sawtooth_matches_sampled_series():
    # samples j/N have the closed-form discrete series a_0 = (N-1)/(2N), a_k = -1/N, b_k = -cot(pi k/N)/N
    n, order = 64, 8
    cone = ConeParams(2 * PI)
    h = fit_dirichlet(np.arange(n) / n, cone, order=order)
    k = np.arange(1, order + 1)
    assert h.a[0] == pytest.approx((n - 1) / (2 * n), abs=1e-12)
    assert np.abs(h.a[1:] + 1 / n).max() < 1e-10
    assert np.abs(h.b[1:] + 1 / (np.tan(PI * k / n) * n)).max() < 1e-10


def test_fit_sawtooth_approaches_continuum_series():
    # continuum sawtooth theta/(2 pi): b_k = -1/(pi k); the sampling error is O(1/N)
    k = np.arange(1, 9)
    errs = []
    for n in (256, 1024):
        h = fit_dirichlet(np.arange(n) / n, ConeParams(2 * PI), order=8)
        errs.append(np.abs(h.b[1:] + 1 / (PI * k)).max())
    assert errs[1] < errs[0] / 3.5 and errs[1] < 1e-3


def test_fit_rescales_to_radius():
    cone = ConeParams(PI)
    th = np.arange(64) * PI / 64
    h = fit_dirichlet(np.cos(2 * th), cone, order=8, radius=2.0)
    assert h.evaluate(2.0, 0.3) == pytest.approx(math.cos(0.6), abs=1e-12)
    assert h.a[1] == pytest.approx(0.25, abs=1e-14)


def test_fit_rejects_aliasing():
    with pytest.raises(ValueError):
        fit_dirichlet(np.zeros(10), ConeParams(PI), order=8)


def test_energy_of_plane_linear_function():
    h = FourierHarmonic.mode(ConeParams(2 * PI), 1)
    assert h.dirichlet_energy(1.0) == pytest.approx(PI, rel=1e-15)
    assert polar_quadrature_energy(h, 1.0) == pytest.approx(PI, rel=1e-3)


def test_energy_of_degree_two_mode():
    h = FourierHarmonic.mode(ConeParams(PI), 2)
    assert h.dirichlet_energy(0.5) == pytest.approx(PI / 128, rel=1e-14)
    assert polar_quadrature_energy(h, 0.5) == pytest.approx(PI / 128, rel=5e-3)


def test_energy_of_mixed_list_matches_quadrature():
    h = FourierHarmonic(ConeParams(3.0), [0.7, 1.0, -0.4, 0.2], [0.0, 0.3, 0.6, -0.1])
    assert h.dirichlet_energy(0.8) == pytest.approx(polar_quadrature_energy(h, 0.8), rel=5e-3)


def test_energy_vanishes_at_small_radius():
    h = FourierHarmonic(ConeParams(5.0), [0.0, 1.0, 1.0], [0.0, 1.0, 1.0])
    vals = [h.dirichlet_energy(r) for r in (1e-2, 1e-4, 1e-8)]
    assert all(b < a for a, b in zip(vals, vals[1:])) and vals[-1] < 1e-6
    with pytest.raises(ValueError):
        h.dirichlet_energy(0.0)


def test_scaled_scan_constant_at_critical_exponent():
    h = FourierHarmonic.mode(ConeParams(2 * PI), 1)
    scan, viol = h.scaled_energy_scan(1.0, [0.1, 0.3, 0.5, 0.9])
    assert not viol and all(v == pytest.approx(PI, rel=1e-13) for _, v in scan)


def test_scaled_scan_flags_every_step_above_critical_exponent():
    h = FourierHarmonic.mode(ConeParams(2 * PI), 1)
    radii = [0.1, 0.3, 0.5, 0.9]
    scan, viol = h.scaled_energy_scan(1.5, radii)
    assert [(a, b) for a, b, _ in viol] == list(zip(radii, radii[1:]))
    assert all(v == pytest.approx(PI / r) for r, v in scan)


def test_scaled_scan_without_weight_is_raw_energy():
    h = FourierHarmonic(ConeParams(3.0), [0.0, 1.0, -2.0], [0.0, 0.5, 0.5])
    radii = np.linspace(0.1, 1.0, 10)
    scan, viol = h.scaled_energy_scan(0.0, radii)
    assert not viol
    assert [v for _, v in scan] == [h.dirichlet_energy(r) for r in radii]


def test_scaled_scan_rejects_bad_radii():
    h = FourierHarmonic.mode(ConeParams(PI), 1)
    for radii in ([0.5, 0.5], [0.0, 0.5], [0.6, 0.5]):
        with pytest.raises(ValueError):
            h.scaled_energy_scan(1.0, radii)


@settings(max_examples=100)
@given(st.sampled_from([PI / 2, PI, 2 * PI, 3 * PI, 7.0]), st.floats(0.01, 1.0),
       st.lists(st.floats(-5, 5), min_size=2, max_size=8))
def test_scaled_scan_monotone_up_to_critical_exponent(length, frac, coeffs):
    cone = ConeParams(length)
    alpha = frac * cone.holder_exponent
    assert np.all(exponent_margins(cone, alpha, len(coeffs)) >= 0)
    h = FourierHarmonic(cone, coeffs, coeffs[::-1])
    _, viol = h.scaled_energy_scan(alpha, np.geomspace(1e-3, 1.0, 25))
    assert not viol


def test_mean_over_circle_is_constant_term():
    h = FourierHarmonic(ConeParams(2.2), [0.37, 1.0, -0.3, 0.8], [0.0, 0.2, 0.4, -0.6])
    n = 512
    th = np.arange(n) * 2.2 / n
    for r in (0.1, 0.5, 1.0):
        assert abs(h.evaluate(r, th).mean() - 0.37) < 1e-10


def test_hoelder_rate_of_first_mode():
    cone = ConeParams(1.3 * PI)
    h = FourierHarmonic(cone, [0.5, 0.3], [0.0, -0.4])
    th = np.linspace(0, cone.length, 20001)
    for r in (0.5, 0.1, 0.01):
        sup = np.abs(h.evaluate(r, th) - 0.5).max()
        assert sup == pytest.approx(r ** cone.holder_exponent * 0.5, rel=1e-7)


def test_csv_round_trip():
    cone = ConeParams(PI)
    h = FourierHarmonic(cone, [0.1, -2.0, 1 / 3], [0.0, 0.5, 1e-300])
    back = FourierHarmonic.from_csv("# header line\n" + h.to_csv(), cone)
    assert np.array_equal(back.a, h.a) and np.array_equal(back.b, h.b)
    assert h.to_csv().splitlines()[0] == "k,a_k,b_k"
