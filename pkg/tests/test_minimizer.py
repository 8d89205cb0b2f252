import math

import numpy as np
import pytest
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from conefree.cone import ConeParams
from conefree.contour import extract_free_boundary
from conefree.grids import PolarGrid, ScalarField, discrete_energy, harmonic_replacement
from conefree.minimizer import MinimizeOptions, ProblemSpec, minimize_J
from conefree.vertex_examples import slit_profile, slit_transplant

PI = math.pi


def J(field, spec):
    return discrete_energy(field, spec.lambda_plus, spec.lambda_minus).total


@pytest.fixture(scope="module")
def small_two_phase():
    cone = ConeParams(PI)
    spec = ProblemSpec(cone, 1.0, 0.25, lambda th: np.cos(2 * np.asarray(th)))
    grid = PolarGrid(cone, 8, 32)
    return spec, grid, minimize_J(spec, grid, MinimizeOptions(levels=1, min_rings=8))


def test_spec_validation():
    cone = ConeParams(PI)
    with pytest.raises(ValueError):
        ProblemSpec(cone, 1.0, 1.0, np.cos)
    with pytest.raises(ValueError):
        ProblemSpec(cone, -1.0, 0.0, np.cos)
    bad = ProblemSpec(cone, 1.0, 0.0, lambda th: np.full_like(th, np.nan))
    with pytest.raises(ValueError):
        bad.boundary_values(PolarGrid(cone, 4, 8))


def test_grid_must_match_cone():
    spec = ProblemSpec(ConeParams(PI), 1.0, 0.0, np.cos)
    with pytest.raises(ValueError):
        minimize_J(spec, PolarGrid(ConeParams(2 * PI), 8, 32))


def test_zero_data_gives_zero():
    cone = ConeParams(1.5 * PI)
    spec = ProblemSpec(cone, 1.0, 0.5, lambda th: np.zeros_like(th))
    res = minimize_J(spec, PolarGrid(cone, 16, 64))
    assert np.all(res.field.values == 0) and res.energy == 0 and res.certified


def test_large_constant_stays_harmonic():
    cone = ConeParams(PI)
    spec = ProblemSpec(cone, 1.0, 0.5, lambda th: np.full_like(th, 5.0))
    res = minimize_J(spec, PolarGrid(cone, 16, 64))
    assert np.abs(res.field.values - 5.0).max() < 1e-10
    assert res.free_boundary.segments == [] and res.vertex_distance == math.inf
    assert res.summary()["vertex_distance"] == "inf"


def test_slit_data_reproduces_transplant():
    cone = ConeParams(2 * PI)
    grid = PolarGrid(cone, 32, 128)
    spec = ProblemSpec(cone, 1.0, 0.0, slit_profile(2 * PI))
    res = minimize_J(spec, grid)
    exact = slit_transplant(2 * PI, grid)
    assert np.abs(res.field.values - exact.values).max() <= 0.02 * np.abs(exact.values).max()
    assert res.energy == pytest.approx(J(exact, spec), rel=0.01)
    assert res.vertex_distance == 0


def test_result_invariants(small_two_phase):
    spec, grid, res = small_two_phase
    u = res.field.values
    assert np.array_equal(res.phase_pos, u > 0) and np.array_equal(res.phase_neg, u < 0)
    assert abs(res.energy - J(res.field, spec)) <= 1e-12 * max(1.0, res.energy)
    fb = res.free_boundary
    if fb.segments:
        assert res.vertex_distance == 0 or res.vertex_distance == pytest.approx(fb.points[:, 0].min())
    assert np.allclose(u[grid.boundary], spec.boundary_values(grid))


def test_descent_is_monotone(small_two_phase):
    _, _, res = small_two_phase
    for runs in res.diagnostics["descent"].values():
        for level in runs:
            e = np.array(level["energies"])
            assert np.all(np.diff(e) <= 1e-12 * np.abs(e[:-1]).clip(1.0))


def test_certificate_by_brute_force(small_two_phase):
    # every interior node alone set to 0 or to its neighbour mean: J never drops
    spec, grid, res = small_two_phase
    assert res.certified
    u = res.field.values
    L = grid.laplacian
    J0 = J(res.field, spec)
    for n in np.flatnonzero(~grid.boundary):
        mean = u[n] - (L @ u)[n] / L[n, n]
        for value in (0.0, mean):
            trial = u.copy()
            trial[n] = value
            assert J(ScalarField(grid, trial), spec) >= J0 - 1e-10


def test_no_zero_set_toggle_helps(small_two_phase):
    # re-solving with one node added to or removed from the zero set never lowers J
    spec, grid, res = small_two_phase
    u = res.field.values
    zero = (u == 0) & ~grid.boundary
    J0 = res.energy
    for n in np.flatnonzero(~grid.boundary):
        z = zero.copy()
        z[n] = not z[n]
        start = np.where(z, 0.0, u)
        trial = harmonic_replacement(ScalarField(grid, start), ~z & ~grid.boundary)
        assert J(trial, spec) >= J0 - 1e-9


def test_two_phase_vertex_avoided(small_two_phase):
    _, grid, res = small_two_phase
    assert res.vertex_distance > grid.dr


def test_write_round_trip(tmp_path, small_two_phase):
    _, grid, res = small_two_phase
    res.write(str(tmp_path), {"l": PI, "grid": (8, 32)})
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["field.csv", "free_boundary.csv", "summary.json"]
    back = ScalarField.from_csv((tmp_path / "field.csv").read_text(), grid)
    assert np.array_equal(back.values, res.field.values)
    head = (tmp_path / "free_boundary.csv").read_text().splitlines()
    assert head[0].startswith("#") and "segment,phase,r,theta" in head


def test_deterministic(small_two_phase):
    spec, grid, res = small_two_phase
    again = minimize_J(spec, grid, MinimizeOptions(levels=1, min_rings=8))
    assert np.array_equal(again.field.values, res.field.values) and again.energy == res.energy


# contour -----------------------------------------------------------------------


def test_contour_of_linear_function_is_two_rays():
    g = PolarGrid(ConeParams(2 * PI), 16, 64)
    fb = extract_free_boundary(ScalarField.from_function(g, lambda r, t: r * np.cos(t)))
    assert fb.vertex_distance == 0
    th = fb.points[fb.points[:, 0] > 1e-12, 1]
    near = np.minimum(np.abs(th - PI / 2), np.abs(th - 1.5 * PI))
    assert near.max() < 1e-12


def test_contour_of_constant_is_empty():
    g = PolarGrid(ConeParams(PI), 8, 32)
    fb = extract_free_boundary(ScalarField(g, np.ones(g.n_nodes)))
    assert fb.segments == [] and fb.vertex_distance == math.inf and fb.points.shape == (0, 2)


def test_contour_of_shifted_linear_function():
    g = PolarGrid(ConeParams(2 * PI), 64, 256)
    fb = extract_free_boundary(ScalarField.from_function(g, lambda r, t: r * np.cos(t) + 0.3))
    assert fb.vertex_distance == pytest.approx(0.3, abs=1e-9)
    # every contour point satisfies r cos(theta) = -0.3 up to interpolation error
    r, t = fb.points[:, 0], fb.points[:, 1]
    assert np.abs(r * np.cos(t) + 0.3).max() < 2 * g.dr**2 / 0.3 + 1e-3


def test_contour_wraps_the_seam():
    g = PolarGrid(ConeParams(3.0), 16, 48)
    # zero line crossing theta = 0
    u = ScalarField.from_function(g, lambda r, t: r * np.sin(2 * PI * t / 3.0) + 0.0 * r)
    fb = extract_free_boundary(u)
    assert fb.segments and np.all((fb.points[:, 1] >= 0) & (fb.points[:, 1] < 3.0))


def test_contour_csv():
    g = PolarGrid(ConeParams(2 * PI), 8, 32)
    text = extract_free_boundary(ScalarField.from_function(g, lambda r, t: r * np.cos(t))).to_csv()
    assert text.splitlines()[0] == "segment,phase,r,theta"


def test_flood_fill_components_match_scipy():
    from conefree.vertex_examples import positive_components

    rng = np.random.default_rng(4)
    g = PolarGrid(ConeParams(2.5 * PI), 12, 60)
    for _ in range(5):
        u = ScalarField(g, rng.normal(size=g.n_nodes))
        count, labels = positive_components(u)
        t, h, _, _ = g.edges
        pos = u.values > 0
        keep = pos[t] & pos[h]
        adj = coo_matrix((np.ones(keep.sum()), (t[keep], h[keep])), shape=(g.n_nodes, g.n_nodes))
        _, ref = connected_components(adj, directed=False)
        assert count == len(set(ref[pos]))
        # same partition of the positive nodes
        pairs = set(zip(labels[pos], ref[pos]))
        assert len(pairs) == count
