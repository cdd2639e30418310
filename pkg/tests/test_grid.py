import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thinfb.grid import (BOX, INTERIOR, SLIT, Ball, GridConfigError, ScalarField, SlitMask,
                         ball_nodes, build_grid, distance_to_sets)


@pytest.mark.parametrize("n,h,nodes,slit", [(1, 1 / 64, 129**2, 129), (2, 1 / 16, 33**3, 33**2)])
def test_node_counts(n, h, nodes, slit):
    g = build_grid(n, h)
    assert g.size == nodes
    assert int(np.prod(g.slit_shape)) == slit


@pytest.mark.parametrize("h,hw", [(1 / 3, 1.0), (0.3, 1.0), (0.25, 0.3), (0.1, 1.0)])
def test_non_divisible_spacing_rejected(h, hw):
    with pytest.raises(GridConfigError):
        build_grid(1, h, hw)


@pytest.mark.parametrize("n,h", [(0, 0.25), (3, 0.25), (1, -0.25), (1, math.inf)])
def test_bad_parameters_rejected(n, h):
    with pytest.raises(GridConfigError):
        build_grid(n, h)


def test_slit_layer_is_at_zero():
    g = build_grid(1, 1 / 8)
    assert g.axis[g.mid] == 0.0
    assert g.coords()[-1].ravel()[g.mid] == 0.0


@pytest.mark.parametrize("n,h", [(1, 1 / 8), (2, 1 / 4)])
def test_node_class_is_partition(n, h):
    g = build_grid(n, h)
    cls = g.node_class
    assert set(np.unique(cls)) <= {INTERIOR, SLIT, BOX}
    assert np.all(cls[..., g.mid] == SLIT)
    assert np.all((cls == BOX) == (g.on_box_boundary & (np.arange(g.N) != g.mid)))
    counts = sum(np.count_nonzero(cls == c) for c in (INTERIOR, SLIT, BOX))
    assert counts == g.size


def test_ball_full_box_and_empty():
    g = build_grid(1, 1 / 8)
    assert len(ball_nodes(g, None, math.sqrt(2) * g.halfwidth)) == g.size
    # r = halfwidth covers the inscribed ball, in particular every axis node
    assert Ball(1.0).node_mask(g)[:, g.mid].all()
    assert len(ball_nodes(g, [g.h / 2, g.h / 2], g.h / 4)) == 0


def test_ball_area_count():
    h = 1 / 64
    g = build_grid(1, h)
    count = len(ball_nodes(g, None, 0.5))
    assert abs(count - math.pi * 0.25 / h**2) <= 0.02 * math.pi * 0.25 / h**2


@settings(max_examples=30, deadline=None)
@given(r1=st.floats(0, 1.5), r2=st.floats(0, 1.5),
       cx=st.floats(-0.5, 0.5), cy=st.floats(-0.5, 0.5))
def test_ball_nodes_monotone(r1, r2, cx, cy):
    g = build_grid(1, 1 / 16)
    a, b = sorted((r1, r2))
    small = set(ball_nodes(g, [cx, cy], a).tolist())
    big = set(ball_nodes(g, [cx, cy], b).tolist())
    assert small <= big


def test_distances_halfspace():
    g = build_grid(1, 1 / 16)
    mask = SlitMask.halfspace(g)
    d = distance_to_sets(g, mask)
    i = np.argmin(abs(g.axis - 0.5))
    j = np.argmin(abs(g.axis - 0.25))
    assert d.d_F[i, j] == pytest.approx(math.hypot(0.5, 0.25), abs=1e-12)
    k = np.argmin(abs(g.axis + 0.5))
    assert d.d_Z[k, g.mid] == 0.0


def test_distances_empty_sets_flagged():
    g = build_grid(1, 1 / 8)
    d = distance_to_sets(g, SlitMask(g, np.ones(g.slit_cell_shape, bool)))
    assert d.z_empty and d.f_empty
    assert np.isinf(d.d_Z).all() and np.isinf(d.d_F).all()


def _brute(g, nodes):
    pts = np.zeros((nodes.sum(), g.dim))
    pts[:, : g.n] = g.axis[np.argwhere(nodes)]
    allp = g.points(np.arange(g.size))
    return np.sqrt(((allp[:, None, :] - pts[None]) ** 2).sum(-1)).min(1).reshape(g.shape)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_distances_match_brute_force(seed):
    g = build_grid(2, 1 / 4)
    rng = np.random.default_rng(seed)
    pos = np.zeros(g.slit_cell_shape, bool)
    flat = rng.choice(pos.size, 9, replace=False)
    pos.ravel()[flat] = True
    mask = SlitMask(g, pos)
    d = distance_to_sets(g, mask)
    np.testing.assert_allclose(d.d_Z, _brute(g, mask.z_nodes), atol=1e-12)
    np.testing.assert_allclose(d.d_F, _brute(g, mask.f_nodes), atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(bits=st.lists(st.booleans(), min_size=64, max_size=64))
def test_distances_are_lipschitz(bits):
    g = build_grid(2, 1 / 4)
    pos = np.array(bits, bool).reshape(g.slit_cell_shape)
    d = distance_to_sets(g, SlitMask(g, pos))
    for field in (d.d_Z, d.d_F):
        if np.isinf(field).all():
            continue
        for ax in range(g.dim):
            diff = np.abs(np.diff(field, axis=ax))
            assert diff.max() <= g.h * math.sqrt(g.dim) + 1e-12


def test_scalar_field_sample_is_exact_on_multilinear():
    g = build_grid(1, 1 / 8)
    u = ScalarField.from_function(g, lambda x, y: 2 * x - 3 * y + x * y)
    pts = np.array([[0.13, -0.41], [0.0, 0.0], [-0.77, 0.9]])
    exact = 2 * pts[:, 0] - 3 * pts[:, 1] + pts[:, 0] * pts[:, 1]
    # bilinear interpolation reproduces the bilinear function exactly
    np.testing.assert_allclose(u.sample(pts), exact, atol=1e-12)


def test_mask_from_field_and_interfaces():
    g = build_grid(1, 1 / 8)
    # a cell is positive only when u > 0 at all of its corners
    u = ScalarField.from_function(g, lambda x, y: np.maximum(x + g.h / 2, 0) + 0 * y)
    m = SlitMask.from_field(u)
    assert m.interface_count == 1
    np.testing.assert_allclose(m.interface_midpoints(), [[0.0]])
    assert np.array_equal(m.positive, SlitMask.halfspace(g).positive)


def test_mask_cell_with_zero_corner_is_not_positive():
    g = build_grid(1, 1 / 8)
    u = ScalarField.from_function(g, lambda x, y: np.maximum(x, 0) + 0 * y)
    np.testing.assert_allclose(SlitMask.from_field(u).interface_midpoints(), [[g.h]])
