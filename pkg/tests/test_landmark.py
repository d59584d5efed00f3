import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shiftplan.landmark import LandmarkGrid, apply_offset, boustrophedon_order, grid_landmarks
from shiftplan.surface import PointCloud, fit_surface


def flat_surface(size=10.0, z=0.0, n=30):
    xs = np.linspace(0, size, n)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    return fit_surface(PointCloud(np.column_stack([X.ravel(), Y.ravel(), np.full(X.size, z)])), 3, (6, 6))


def toy_grid(n_u, n_v, z=None, valid=None):
    us = np.arange(n_u, dtype=float)
    vs = np.arange(n_v, dtype=float)
    U, V = np.meshgrid(us, vs, indexing="ij")
    Z = np.zeros_like(U) if z is None else z
    pts = np.stack([U, V, Z], axis=-1)
    return LandmarkGrid(us, vs, pts, np.ones((n_u, n_v), bool) if valid is None else valid)


def test_flat_ten_metre_grid():
    g = grid_landmarks(flat_surface(10.0, 1.0), 1.0)
    assert g.shape == (11, 11)
    assert g.du == pytest.approx(1.0) and g.dv == pytest.approx(1.0)
    assert np.allclose(g.points[..., 2], 1.0, atol=1e-9)
    assert g.valid.all()


def test_landmarks_lie_on_surface():
    xs = np.linspace(-1, 1, 30)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    s = fit_surface(PointCloud(np.column_stack([X.ravel(), Y.ravel(), (X ** 2 + Y ** 2).ravel()])), 3, (8, 8))
    g = grid_landmarks(s, 0.2)
    for i in range(0, g.shape[0], 3):
        for j in range(0, g.shape[1], 4):
            z = s.evaluate_points([g.us[i]], [g.vs[j]])[0, 0][0]
            np.testing.assert_allclose(g.points[i, j], z, atol=1e-9)


def test_spacing_too_large():
    with pytest.raises(ValueError):
        grid_landmarks(flat_surface(10.0), 100.0)
    with pytest.raises(ValueError):
        grid_landmarks(flat_surface(10.0), 0.0)


def test_offset_zero_is_identity():
    g = apply_offset(grid_landmarks(flat_surface(4.0), 1.0), 0.0)
    assert np.array_equal(g.adjusted, g.points)


def test_offset_on_flat_grid():
    g = apply_offset(grid_landmarks(flat_surface(4.0, 1.0), 1.0), 0.5)
    assert np.allclose(g.adjusted[..., 2], 1.5, atol=1e-9)


def test_negative_offset_rejected():
    with pytest.raises(ValueError):
        apply_offset(toy_grid(2, 2), -0.1)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 8), st.integers(1, 8), st.floats(0.0, 5.0), st.integers(0, 2 ** 31 - 1))
def test_offset_constant_shift(n_u, n_v, off, seed):
    z = np.random.default_rng(seed).normal(size=(n_u, n_v))
    g = apply_offset(toy_grid(n_u, n_v, z), off)
    d = g.adjusted - g.points
    assert np.all(d[..., :2] == 0.0)
    assert np.all(d[..., 2] == (z + off) - z)


def test_zigzag_two_by_three():
    # rows are lines of constant v, so a 2x3 (row, column) lattice is 3 u-nodes by 2 v-nodes
    path = boustrophedon_order(toy_grid(3, 2))
    assert path.cells() == [(0, 0), (0, 1), (0, 2), (1, 2), (1, 1), (1, 0)]
    assert path.directions == {0: 1, 1: -1}


def test_single_row_is_identity():
    path = boustrophedon_order(toy_grid(7, 1))
    assert path.cells() == [(0, c) for c in range(7)]


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 9), st.integers(1, 9), st.booleans(), st.integers(0, 2 ** 31 - 1))
def test_zigzag_is_permutation(n_u, n_v, transpose, seed):
    valid = np.random.default_rng(seed).uniform(size=(n_u, n_v)) < 0.8
    if not valid.any():
        valid[0, 0] = True
    path = boustrophedon_order(toy_grid(n_u, n_v, valid=valid), transpose)
    cells = path.cells()
    mask = valid if transpose else valid.T
    expect = {(r, c) for r in range(mask.shape[0]) for c in range(mask.shape[1]) if mask[r, c]}
    assert len(cells) == len(expect) and set(cells) == expect
    # rows monotone, columns move in the row's direction
    rows = [r for r, _ in cells]
    assert rows == sorted(rows)
    for (r0, c0), (r1, c1) in zip(cells, cells[1:]):
        if r0 == r1:
            assert (c1 - c0) * path.directions[r0] > 0


def test_full_rows_step_one_column():
    path = boustrophedon_order(toy_grid(5, 4))
    for (r0, c0), (r1, c1) in zip(path.cells(), path.cells()[1:]):
        if r0 == r1:
            assert abs(c1 - c0) == 1


def test_flat_zigzag_length():
    spacing = 0.5
    g = grid_landmarks(flat_surface(4.0), spacing)
    path = boustrophedon_order(g)
    rows, cols = g.shape[1], g.shape[0]
    expect = (cols - 1) * rows * spacing + (rows - 1) * spacing
    assert path.length() == pytest.approx(expect, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.floats(0.0, 3.0), st.integers(0, 2 ** 31 - 1))
def test_offset_commutes_with_order(n_u, n_v, off, seed):
    z = np.random.default_rng(seed).normal(size=(n_u, n_v))
    g = toy_grid(n_u, n_v, z)
    a = boustrophedon_order(apply_offset(g, off))
    b = boustrophedon_order(g)
    assert a.cells() == b.cells()
    shifted = b.positions + np.array([0.0, 0.0, off])
    assert np.array_equal(a.positions, shifted)


def test_empty_grid_rejected():
    g = LandmarkGrid(np.zeros(0), np.zeros(0), np.zeros((0, 0, 3)), np.zeros((0, 0), bool))
    with pytest.raises(ValueError):
        boustrophedon_order(g)


def test_path_json(tmp_path):
    path = boustrophedon_order(toy_grid(2, 2))
    rec = path.to_json()
    assert rec[1] == {"x": 1.0, "y": 0.0, "z": 0.0, "row": 0, "col": 1}
    path.save(tmp_path / "p.json")
    assert (tmp_path / "p.json").read_text().startswith("[")
