import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conefree.cone import ConeParams
from conefree.grids import PolarGrid, ScalarField
from conefree.minimizer import ProblemSpec
from conefree.monotonicity import (
    MonotoneScan,
    acf_phi,
    coarsened,
    interpolation_error,
    weiss_energy,
    weiss_rescaling_check,
    weiss_scan,
)
from conefree.vertex_examples import slit_transplant

PI = math.pi
RADII = np.linspace(0.1, 1.0, 10)


@pytest.fixture(scope="module")
def plane():
    return PolarGrid(ConeParams(2 * PI), 64, 256)


@pytest.fixture(scope="module")
def half_planes(plane):
    up = ScalarField.from_function(plane, lambda r, t: np.maximum(r * np.sin(t), 0.0))
    um = ScalarField.from_function(plane, lambda r, t: np.maximum(-r * np.sin(t), 0.0))
    return up, um


@pytest.fixture(scope="module")
def one_phase(plane):
    return ProblemSpec(plane.cone, 1.0, 0.0, np.cos)


def test_acf_constant_for_half_planes(half_planes):
    # each half disc carries pi r^2 / 2 of Dirichlet energy
    scan = acf_phi(*half_planes, 2.0, RADII)
    assert np.allclose(scan.values, PI**2 / 4, rtol=0.02)
    assert scan.violations == []


def test_acf_zero_partner(plane, half_planes):
    zero = ScalarField(plane, np.zeros(plane.n_nodes))
    scan = acf_phi(half_planes[0], zero, 2.0, RADII)
    assert all(v == 0 for v in scan.values) and scan.violations == []


def test_acf_large_exponent_decreases(half_planes):
    with pytest.raises(ValueError):
        acf_phi(*half_planes, 3.0, RADII)
    scan = acf_phi(*half_planes, 3.0, RADII, tolerance=0.0, force=True)
    assert len(scan.violations) == len(RADII) - 1


def test_acf_input_checks(plane, half_planes):
    up, um = half_planes
    with pytest.raises(ValueError):
        acf_phi(ScalarField(plane, -up.values), um, 2.0, RADII)
    with pytest.raises(ValueError):
        acf_phi(up, up, 2.0, RADII)
    with pytest.raises(ValueError):
        acf_phi(up, um, 2.0, [0.5, 0.4])
    with pytest.raises(ValueError):
        acf_phi(up, um, 2.0, [0.0, 0.5])
    long_grid = PolarGrid(ConeParams(3 * PI), 8, 48)
    z = ScalarField(long_grid, np.zeros(long_grid.n_nodes))
    with pytest.raises(ValueError):
        acf_phi(z, z, 0.5, RADII)
    assert acf_phi(z, z, 0.5, RADII, force=True).violations == []


def test_weiss_of_slit_is_half_pi(plane, one_phase):
    s = slit_transplant(2 * PI, plane)
    scan = weiss_scan(s, one_phase, RADII)
    assert np.allclose(scan.values, PI / 2, rtol=0.02)
    assert scan.violations == []
    assert weiss_energy(s, one_phase, 0.5) == pytest.approx(scan.values[4])


def test_weiss_of_zero_field(plane, one_phase):
    z = ScalarField(plane, np.zeros(plane.n_nodes))
    assert weiss_energy(z, one_phase, 0.7) == 0


def test_weiss_of_degree_two_mode_increases(plane, one_phase):
    u = ScalarField.from_function(plane, lambda r, t: r**2 * np.cos(2 * t))
    vals = weiss_scan(u, one_phase, RADII).values
    assert np.all(np.diff(vals) > 0)


def test_weiss_needs_vertex_zero(plane, one_phase):
    u = ScalarField.from_function(plane, lambda r, t: 1.0 + r * np.cos(t))
    with pytest.raises(ValueError):
        weiss_energy(u, one_phase, 0.5)
    with pytest.raises(ValueError):
        weiss_scan(u, one_phase, RADII)


def test_rescaling_of_one_homogeneous_field(plane, one_phase):
    s = slit_transplant(2 * PI, plane)
    d = weiss_rescaling_check(s, one_phase, 0.5, 0.5)
    assert d.corrected <= 2e-3
    unit = weiss_rescaling_check(s, one_phase, 1.0, 0.5)
    assert unit.corrected == 0 and unit.literal == 0


def test_rescaling_separates_the_two_readings(plane, one_phase):
    u = ScalarField.from_function(plane, lambda r, t: r**2 * np.cos(2 * t))
    d = weiss_rescaling_check(u, one_phase, 0.5, 0.5)
    assert d.corrected <= 5 * interpolation_error(u)
    assert d.literal > 50 * d.corrected


def test_coarsening(plane):
    u = ScalarField.from_function(plane, lambda r, t: r * np.cos(t))
    c = coarsened(u)
    assert (c.grid.n_r, c.grid.n_theta) == (32, 128)
    assert np.allclose(c.values, c.grid.sample(lambda r, t: r * np.cos(t)), atol=1e-14)
    odd = PolarGrid(ConeParams(PI), 7, 32)
    assert coarsened(ScalarField(odd, np.zeros(odd.n_nodes))) is None
    assert interpolation_error(ScalarField(odd, np.zeros(odd.n_nodes))) == 0


@given(st.lists(st.floats(-10, 10), min_size=2, max_size=30), st.floats(0, 1))
def test_scan_violations_are_scale_invariant(values, tol):
    radii = np.arange(1, len(values) + 1) / len(values)
    base = MonotoneScan.build(radii, values, tol)
    # doubling is exact in floating point
    scaled = MonotoneScan.build(radii, [2 * v for v in values], 2 * tol)
    assert [v[:2] for v in base.violations] == [v[:2] for v in scaled.violations]
    assert all(drop > tol for _, _, drop in base.violations)
    assert len(base.violations) == sum(a - b > tol for a, b in zip(values, values[1:]))


def test_scan_csv():
    scan = MonotoneScan.build([0.25, 0.5, 1.0], [1.0, 0.5, 0.75], 0.1)
    lines = scan.to_csv().splitlines()
    assert lines[0] == "r,value,violation_flag"
    assert [line.split(",")[2] for line in lines[1:]] == ["0", "1", "0"]
