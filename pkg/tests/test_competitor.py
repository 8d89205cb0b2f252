import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conefree.competitor import (
    ContainmentError,
    FEMSettings,
    explicit_w_gap,
    full_target_c,
    half_plane_form,
    inductive_step,
    omega_gap_cartesian,
    recurrence_bound,
    envelope,
    required_iterations,
    run_iteration,
    solve_F,
    solve_F_cartesian,
    strict_improvement_check,
    target_region,
    triangle_Ac,
)
from conefree.grids import ConvergenceError
from conefree.polygons import PlanarPolygonSet, triangle_profile

PI = math.pi
COARSE = FEMSettings(h=1 / 64)


@pytest.fixture(scope="module")
def unit_triangle():
    return solve_F(triangle_profile(1), COARSE)


def test_triangle_areas():
    assert triangle_Ac(1).area == 1 and triangle_Ac(2).area == 2
    assert triangle_Ac(Fraction(1, 3)).area == Fraction(1, 3)


def test_kite_gap_closed_form():
    k = explicit_w_gap(1.0)
    assert k.h == pytest.approx(math.sqrt(2) - 1)
    assert k.gap == pytest.approx(2 * math.sqrt(2) - 2, abs=1e-12)


def test_kite_gap_by_monte_carlo():
    # gap = int over the kite of |Dw|^2 + 1, minus twice the part of the kite above the axis
    k = explicit_w_gap(1.0)
    rng = np.random.default_rng(0)
    n = 400_000
    x1 = rng.uniform(-k.c, k.c, n)
    x2 = rng.uniform(-1, k.h, n)
    eps = 1e-7
    w = k.field(x1, x2)
    g1 = (k.field(x1 + eps, x2) - k.field(x1 - eps, x2)) / (2 * eps)
    g2 = (k.field(x1, x2 + eps) - k.field(x1, x2 - eps)) / (2 * eps)
    box = 2 * k.c * (k.h + 1)
    inside = (w > 0) & (np.abs(x1) < k.c * (1 - np.maximum(x2, 0) / k.h)) & (x2 > np.abs(x1) / k.c - 1)
    dens = np.where(inside, g1**2 + g2**2 + 1, 0.0) - np.where(inside & (x2 > 0), 2.0, 0.0)
    est = dens.mean() * box
    assert abs(est - k.gap) < 5 * dens.std() * box / math.sqrt(n)


def test_kite_gap_limits():
    assert explicit_w_gap(1e4).gap == pytest.approx(2.0, rel=1e-3)
    small = explicit_w_gap(1e-4)
    assert small.gap == pytest.approx(1e-4, rel=1e-3)
    # a non-optimal height never beats the optimal one
    for c in (0.3, 1.0, 5.0):
        best = explicit_w_gap(c).gap
        assert all(explicit_w_gap(c, h).gap >= best - 1e-12 for h in (0.1, 0.5, 1.0, 3.0))


def test_kite_rejects_bad_input():
    for args in ((0.0,), (1.0, -1.0), (1.0, "best")):
        with pytest.raises(ValueError):
            explicit_w_gap(*args)


def test_F_of_empty_set():
    assert solve_F(PlanarPolygonSet.empty(), COARSE).value == 0
    assert solve_F(None).value == 0
    assert solve_F_cartesian(PlanarPolygonSet.empty(), h=1 / 16).value == 0


def test_F_of_unit_triangle(unit_triangle):
    assert 0 < unit_triangle.value <= 0.878
    assert unit_triangle.identity_defect < 1e-10
    assert unit_triangle.value == pytest.approx(unit_triangle.area_formula, abs=1e-12)
    assert unit_triangle.value == pytest.approx(unit_triangle.lower_energy + unit_triangle.upper_energy, rel=1e-9)


def test_F_scales_quadratically(unit_triangle):
    half = solve_F(triangle_profile(1).scaled(Fraction(1, 2)), COARSE)
    assert half.value / unit_triangle.value == pytest.approx(0.25, rel=2e-3)


def test_half_plane_form_on_cauchy_profile():
    # the decaying extension of 1/(1+x^2) carries pi/4 of energy
    x = np.sinh(np.linspace(-8, 8, 4001))
    f = 1 / (1 + x**2)
    f = f - np.interp(x, [x[0], x[-1]], [f[0], f[-1]])
    form = half_plane_form(x)
    assert f[1:-1] @ form @ f[1:-1] == pytest.approx(PI / 4, rel=1e-4)
    assert np.allclose(form, form.T)
    small = half_plane_form(np.linspace(-3, 3, 201))
    assert np.linalg.eigvalsh(small).min() > 0


def test_fem_and_cartesian_agree(unit_triangle):
    uniform = solve_F_cartesian(triangle_profile(1), h=1 / 32)
    graded = solve_F_cartesian(triangle_profile(1), h=1 / 32, growth=0.1)
    for other in (uniform, graded):
        assert other.value == pytest.approx(unit_triangle.value, rel=5e-3)


def test_larger_set_has_larger_trace(unit_triangle):
    wide = solve_F(triangle_profile(2), COARSE)
    x = np.linspace(-1, 1, 41)
    assert np.all(wide.trace(x) >= unit_triangle.trace(x) - 1e-9)
    assert np.all(unit_triangle.trace(np.array([-3.0, 3.0])) == 0)


def test_inductive_step_area_exact_and_by_sampling():
    E = inductive_step(triangle_Ac(1), Fraction(3, 5), 20, 10)
    assert isinstance(E, PlanarPolygonSet)
    # trapezoid of depth 2/5 plus the shrunk triangle of area 9/25
    assert E.area == Fraction(2, 5) * 30 + Fraction(9, 25)
    rng = np.random.default_rng(2)
    n = 400_000
    x0, x1, y0, y1 = (float(v) for v in E.bounds())
    pts = np.column_stack([rng.uniform(x0, x1, n), rng.uniform(y0, y1, n)])
    est = E.contains_points(pts).mean() * (x1 - x0) * (y1 - y0)
    assert est == pytest.approx(float(E.area), rel=5e-3)


def test_inductive_step_degenerate_parameters():
    A = triangle_Ac(1)
    assert inductive_step(A, 1, 20, 10).area == A.area
    assert inductive_step(PlanarPolygonSet.empty(), Fraction(3, 5), 20, 10).area == 12
    thin = inductive_step(A, Fraction(1, 10**6), 20, 10)
    assert float(thin.area) == pytest.approx(30 * (1 - 1e-6), rel=1e-9)


def test_recurrence_helpers():
    assert envelope(0) == 2 and envelope(3) == pytest.approx(recurrence_bound(recurrence_bound(recurrence_bound(2.0))))
    assert required_iterations(3.0) == 0
    assert required_iterations(0.36) == 7
    with pytest.raises(ValueError):
        required_iterations(0)


@settings(max_examples=50)
@given(st.floats(0.01, 1.9))
def test_required_iterations_is_sufficient(target):
    k = required_iterations(target)
    assert envelope(k) < target
    if k > 0:
        assert envelope(k - 1) >= target - 1e-12


def test_required_iterations_blow_up_for_thin_cones():
    counts = [required_iterations(float(target_region(l, full_target_c(l)).area)) for l in (1.0, 0.5, 0.1, 0.02)]
    assert all(b > a for a, b in zip(counts, counts[1:]))


def test_zero_step_trace():
    tr = run_iteration(2, 0, COARSE)
    assert len(tr.steps) == 1 and tr.steps[0].t is None
    assert tr.to_csv().splitlines()[1].split(",")[2] == ""
    with pytest.raises(ValueError):
        run_iteration(2, -1)


def test_iteration_obeys_recurrence():
    tr = run_iteration(4, 3, COARSE)
    assert len(tr.steps) == 4 and tr.check() == []
    assert max(tr.recurrence_excess()) <= 0
    for s in tr.steps[1:]:
        assert s.stable and s.t == Fraction(3 / (3 + tr.steps[s.k - 1].F)).limit_denominator(10**9)
        assert s.a == 2 * s.b
    assert '"steps"' in tr.to_json()


def test_early_iterate_on_thin_cone_is_insufficient():
    tr = run_iteration(1, 0, COARSE)
    rec = strict_improvement_check(0.5, 1, tr)
    assert rec.status == "insufficient iterations" and rec.gap > 0
    assert rec.required_iterations > 0
    with pytest.raises(ValueError):
        strict_improvement_check(2 * PI, 1, tr)


def test_missing_target_region_is_reported():
    tr = run_iteration(Fraction(1, 4), 0, COARSE)
    with pytest.raises(ContainmentError):
        strict_improvement_check(PI / 2, 1, tr)


def test_precision_exhaustion_is_detected():
    with pytest.raises(ConvergenceError):
        solve_F(triangle_profile(1e13), COARSE)
    with pytest.raises(ConvergenceError):
        solve_F(triangle_profile(1), FEMSettings(h=1 / 64, identity_tol=1e-20))


def test_omega_gap_fem_vs_cartesian(unit_triangle):
    fem = unit_triangle.omega_gap(PI / 2)
    cart = omega_gap_cartesian(triangle_profile(1), PI / 2, h=1 / 32)
    assert abs(fem - cart) <= 0.05 * abs(fem) + 2e-3
    with pytest.raises(ValueError):
        unit_triangle.omega_gap(1.5 * PI)


def test_trace_independent_of_worker_count():
    serial = run_iteration(2, 2, COARSE, workers=1)
    parallel = run_iteration(2, 2, COARSE, workers=3)
    assert serial.to_json() == parallel.to_json()
