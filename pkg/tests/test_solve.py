import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thinfb.analysis import hausdorff_distance, holder_seminorm
from thinfb.energy import almost_min_defect, energy
from thinfb.exact import U_field, eval_U
from thinfb.generators import GeneratorError, boundary_field, coefficient_field
from thinfb.grid import Ball, ScalarField, SlitMask, build_grid
from thinfb.solve import (CoefficientField, DirichletForm, InfeasibleConstraintError,
                          SolverError, SolverSettings, blowup_rescale, dump_field, even_part,
                          generate_almost_minimizer, harmonic_replacement, linearized_solve,
                          load_field, minimize_energy, minimize_given_support)
from thinfb.solve.fieldio import FieldFormatError


def _field(g, f, even=True):
    c = g.coords()
    return ScalarField(g, np.array(np.broadcast_to(f(*c), g.shape), dtype=float), even=even)


def _laplacian_residual(u, free):
    form = DirichletForm(u.grid.shape, u.grid.h, u.grid.n)
    r = form.residual(u.values).reshape(u.grid.shape)
    return np.abs(r[free]).max()


# ------------------------------------------------------------- linear solves


@pytest.mark.parametrize("method", ["direct", "cg"])
def test_harmonic_replacement_of_discrete_harmonic(method):
    g = build_grid(1, 1 / 32)
    u = boundary_field(g, "affine", {"c": 0.3, "slope": [1.0]})
    v = harmonic_replacement(u, Ball(0.5), settings=SolverSettings(method=method))
    np.testing.assert_allclose(v.values, u.values, atol=1e-8)


def test_harmonic_replacement_of_constant():
    g = build_grid(2, 1 / 8)
    u = ScalarField(g, np.ones(g.shape), even=True)
    np.testing.assert_allclose(harmonic_replacement(u, None).values, 1.0, atol=1e-12)


def test_harmonic_replacement_of_U_with_P_fixed():
    errs = []
    for h in (1 / 32, 1 / 64):
        g = build_grid(1, h)
        U = U_field(g)
        v = harmonic_replacement(U, Ball(7 / 8), fixed=g.on_P)
        errs.append(np.abs(v.values - U.values).max())
    # the discrete solution differs from U by the truncation error near L only
    assert errs[1] < errs[0] <= 0.05


def test_harmonic_replacement_residual_and_max_principle():
    g = build_grid(1, 1 / 32)
    u = U_field(g)
    v = harmonic_replacement(u, Ball(0.5))
    free = Ball(0.5).node_mask(g) & ~g.on_box_boundary
    assert _laplacian_residual(v, free) <= 1e-8
    assert v.values.min() >= u.values.min() and v.values.max() <= u.values.max()


def test_linear_solver_reports_non_convergence():
    g = build_grid(1, 1 / 32)
    data = boundary_field(g, "U-trace")
    with pytest.raises(SolverError) as info:
        linearized_solve(data, settings=SolverSettings(method="cg", max_iterations=2))
    assert info.value.residual is not None and info.value.residual > 0


def test_solver_settings_validation():
    with pytest.raises(ValueError):
        SolverSettings(method="lu")
    with pytest.raises(ValueError):
        SolverSettings(search="random")
    with pytest.raises(ValueError):
        SolverSettings(tolerance=0.0)


# ---------------------------------------------------------- given support


def test_given_support_U_trace_halfspace():
    errs = []
    for h in (1 / 32, 1 / 64, 1 / 128):
        g = build_grid(1, h)
        u = minimize_given_support(boundary_field(g, "U-trace"), SlitMask.halfspace(g))
        errs.append(np.abs(u.values - U_field(g).values).max())
        assert errs[-1] <= 2 * math.sqrt(h)
    assert errs[0] > errs[1] > errs[2]


def test_given_support_all_positive_constant():
    g = build_grid(1, 1 / 16)
    data = ScalarField(g, np.ones(g.shape), even=True)
    u = minimize_given_support(data, SlitMask(g, np.ones(g.slit_cell_shape, bool)))
    np.testing.assert_allclose(u.values, 1.0, atol=1e-12)


def test_given_support_all_zero():
    g = build_grid(1, 1 / 16)
    data = _field(g, lambda x, y: np.abs(y) + 0 * x)
    u = minimize_given_support(data, SlitMask(g, np.zeros(g.slit_cell_shape, bool)))
    assert np.all(u.slit == 0)
    np.testing.assert_array_equal(u.values, u.values[:, ::-1])


@pytest.mark.parametrize("n,h", [(1, 1 / 32), (2, 1 / 8)])
def test_given_support_residual_vanishes_at_free_nodes(n, h):
    g = build_grid(n, h)
    mask = SlitMask.halfspace(g, offset=0.1)
    u = minimize_given_support(boundary_field(g, "U-trace"), mask)
    free = ~g.on_box_boundary
    free[..., g.mid] = False
    free[..., g.mid] |= mask.node_touches(mask.positive) & ~g.slit_on_box_boundary
    assert _laplacian_residual(u, free) <= 1e-8
    assert np.all(u.slit[mask.zero_nodes] == 0)


def test_given_support_infeasible():
    g = build_grid(1, 1 / 8)
    data = boundary_field(g, "U-trace")  # zero at x_1 = -1 on the slit
    with pytest.raises(InfeasibleConstraintError):
        minimize_given_support(data, SlitMask(g, np.ones(g.slit_cell_shape, bool)))


# ------------------------------------------------------------ free boundary


@pytest.mark.parametrize("search", ["graph", "cell-flip"])
def test_minimize_energy_recovers_U(search):
    g = build_grid(1, 1 / 64)
    res = minimize_energy(boundary_field(g, "U-trace"), settings=SolverSettings(search=search),
                          return_trace=True)
    mids = res.mask.interface_midpoints()
    assert len(mids) == 1 and abs(mids[0, 0]) <= 2 * g.h
    assert np.all(np.diff(res.trace) <= 1e-12)


def test_minimize_energy_small_lambda_is_harmonic():
    g = build_grid(1, 1 / 32)
    data = boundary_field(g, "affine", {"c": 1.0, "slope": [0.5]})
    u, mask = minimize_energy(data, 1e-9)
    assert mask.positive.all()
    np.testing.assert_allclose(u.values, harmonic_replacement(data, None).values, atol=1e-10)


def _cut_data(g):
    return _field(g, lambda x, y: 0.7 * eval_U(x + 0.5, y))


@pytest.mark.parametrize("lam", [0.3, 1.0, 3.0, 10.0, 30.0])
def test_minimize_energy_matches_exhaustive_graph_search(lam):
    g = build_grid(1, 1 / 8)
    data = _cut_data(g)
    res = minimize_energy(data, lam, return_trace=True)
    best = math.inf
    for k in range(g.N):
        pos = np.zeros(g.slit_cell_shape, bool)
        pos[k:] = True
        try:
            f = minimize_given_support(data, SlitMask(g, pos), lam)
        except InfeasibleConstraintError:
            continue
        best = min(best, energy(f, None, lam).total)
    assert energy(res.field, None, lam).total == pytest.approx(best, rel=1e-12)
    assert np.all(np.diff(res.trace) <= 1e-12)
    assert res.trace[-1] <= res.trace[0]


def test_large_lambda_shrinks_support():
    g = build_grid(1, 1 / 16)
    data = _cut_data(g)
    sizes = [int(minimize_energy(data, lam)[1].positive.sum()) for lam in (0.5, 2.0, 8.0, 32.0)]
    assert sizes == sorted(sizes, reverse=True)
    assert sizes[-1] == 0


def test_minimize_energy_rejects_negative_trace():
    g = build_grid(1, 1 / 8)
    with pytest.raises(ValueError):
        minimize_energy(boundary_field(g, "constant", {"c": -1.0}))


def test_minimize_energy_n2_flat():
    g = build_grid(2, 1 / 16)
    u, mask = minimize_energy(boundary_field(g, "U-trace"))
    mids = mask.interface_midpoints()
    inner = np.abs(mids[:, 0]) <= 0.5
    assert np.abs(mids[inner, 1]).max() <= 2 * g.h


# ------------------------------------------------------------ almost minimizers


def test_almost_minimizer_with_unit_coefficient_is_minimizer():
    g = build_grid(1, 1 / 32)
    data = boundary_field(g, "tilted-U", {"bend": 0.05})
    u = generate_almost_minimizer(coefficient_field(g, "one"), data)
    v, _ = minimize_energy(data)
    np.testing.assert_allclose(u.values, v.values, atol=1e-12)
    assert almost_min_defect(u, Ball(0.5)) <= 2e-9


@pytest.mark.parametrize("name", ["radial", "sine"])
@pytest.mark.parametrize("kappa", [0.05, 0.1])
def test_almost_minimizer_defect_bound(name, kappa):
    g = build_grid(1, 1 / 64)
    data = boundary_field(g, "U-trace")
    u = generate_almost_minimizer(coefficient_field(g, name, kappa), data)
    u1 = generate_almost_minimizer(coefficient_field(g, "one"), data)
    for c, r in [((0, 0), 0.25), ((0.3, 0), 0.2), ((0, 0), 0.5), ((-0.3, 0.1), 0.3)]:
        assert almost_min_defect(u, Ball(r, c)) <= kappa * (2 * r) + 1e-9
    # free boundary moves by O(kappa)
    assert hausdorff_distance(SlitMask.from_field(u), SlitMask.from_field(u1)) <= kappa + 2 * g.h


def test_coefficient_bounds_rejected():
    g = build_grid(1, 1 / 8)
    with pytest.raises(GeneratorError):
        coefficient_field(g, "radial", 1.5)
    with pytest.raises(ValueError):
        CoefficientField(g, np.zeros(g.cell_shape))
    from thinfb.energy import AlmostMinParams
    with pytest.raises(ValueError):
        generate_almost_minimizer(coefficient_field(g, "radial", 0.1), boundary_field(g, "U-trace"),
                                  params=AlmostMinParams(kappa=0.01))


def test_harnack_floor_is_stable():
    g = build_grid(1, 1 / 64)
    data = boundary_field(g, "affine", {"c": 1.0, "slope": [0.5]})
    x = g.coords()[0]
    B1, Bh = Ball(1.0).node_mask(g), Ball(0.5).node_mask(g)
    mu = 0.2
    floors = []
    for kappa in (0.2, 0.1, 0.05):
        u = generate_almost_minimizer(coefficient_field(g, "radial", kappa), data)
        # harmonic w below u, touching it only on one side of the unit ball
        w = harmonic_replacement(u.with_values(u.values - mu * (1 + x) / 2), Ball(1.0))
        d = u.values - w.values
        assert d[B1].min() >= -1e-10
        assert d[g.mid, g.mid] > 0
        floors.append(d[Bh].min() / d[g.mid, g.mid])
    assert min(floors) >= 0.4
    assert max(floors) - min(floors) <= 0.1


@pytest.mark.parametrize("name", ["radial", "sine"])
def test_replacement_gap_shrinks_with_kappa(name):
    g = build_grid(1, 1 / 64)
    data = boundary_field(g, "affine", {"c": 1.0, "slope": [0.5]})
    Bh = Ball(0.5).node_mask(g)
    gaps = []
    for kappa in (0.2, 0.1, 0.05):
        u = generate_almost_minimizer(coefficient_field(g, name, kappa), data)
        gaps.append(np.abs(u.values - harmonic_replacement(u, Ball(1.0)).values)[Bh].max())
    assert gaps[0] > gaps[1] > gaps[2]


# ------------------------------------------------------------ transforms


def test_even_part():
    g = build_grid(1, 1 / 16)
    odd = _field(g, lambda x, y: x * y, even=False)
    assert np.abs(even_part(odd).values).max() == 0.0
    U = U_field(g)
    np.testing.assert_array_equal(even_part(U).values, U.values)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_even_part_idempotent(seed):
    g = build_grid(1, 1 / 8)
    u = ScalarField(g, np.random.default_rng(seed).normal(size=g.shape))
    e = even_part(u)
    np.testing.assert_array_equal(even_part(e).values, e.values)


@pytest.mark.parametrize("rho", [0.5, 0.25])
def test_blowup_of_U_is_U(rho):
    # the coarse target maps onto source nodes, so no interpolation is involved
    g = build_grid(1, 1 / 64)
    coarse = build_grid(1, g.h / rho)
    np.testing.assert_allclose(blowup_rescale(U_field(g), rho, target=coarse).values,
                               U_field(coarse).values, atol=1e-14)


def test_blowup_identity_and_range():
    g = build_grid(1, 1 / 16)
    u = boundary_field(g, "tilted-U", {"bend": 0.1})
    assert blowup_rescale(u, 1.0) is u
    for rho in (0.0, -1.0, 1.5):
        with pytest.raises(ValueError):
            blowup_rescale(u, rho)


def test_blowup_preserves_half_holder_seminorm():
    g = build_grid(1, 1 / 64)
    u = boundary_field(g, "tilted-U", {"bend": 0.1})
    rho = 0.5
    ur = blowup_rescale(u, rho)
    a = holder_seminorm(ur, 0.5, Ball(0.5))
    b = holder_seminorm(u, 0.5, Ball(rho * 0.5))
    assert a == pytest.approx(b, rel=0.05)


# ------------------------------------------------------------ linearized


def test_linearized_constant():
    g = build_grid(1, 1 / 32)
    h = linearized_solve(boundary_field(g, "constant", {"c": 0.7}))
    np.testing.assert_allclose(h.values, 0.7, atol=1e-8)


def test_linearized_n2_linear_in_x1():
    g = build_grid(2, 1 / 16)
    data = boundary_field(g, "affine", {"slope": [1.0, 0.0]})
    h = linearized_solve(data)
    assert np.abs(h.values - data.values).max() <= 5 * g.h


@settings(max_examples=10, deadline=None)
@given(a=st.floats(-2, 2), b=st.floats(-2, 2), c=st.floats(-1, 1))
def test_linearized_is_linear_and_constant_invariant(a, b, c):
    g = build_grid(1, 1 / 16)
    f = boundary_field(g, "U-trace")
    k = boundary_field(g, "affine", {"slope": [1.0]})
    Lf, Lk = linearized_solve(f), linearized_solve(k)
    comb = f.scaled(a) + k.scaled(b)
    np.testing.assert_allclose(linearized_solve(comb).values, a * Lf.values + b * Lk.values,
                               atol=1e-10)
    shifted = comb + ScalarField(g, np.full(g.shape, c), even=True)
    np.testing.assert_allclose(linearized_solve(shifted).values,
                               linearized_solve(comb).values + c, atol=1e-10)


def test_linearized_maximum_principle():
    g = build_grid(1, 1 / 32)
    data = boundary_field(g, "tilted-U", {"bend": 0.1})
    h = linearized_solve(data)
    b = data.values[g.on_box_boundary]
    assert h.values.min() >= b.min() and h.values.max() <= b.max()


# ------------------------------------------------------------ field dumps


def test_field_dump_roundtrip(tmp_path):
    g = build_grid(1, 1 / 8)
    u = boundary_field(g, "tilted-U", {"bend": 0.1})
    j, _ = dump_field(u, tmp_path / "u", {"note": "x"})
    v = load_field(j)
    assert v.grid == g and v.even == u.even
    np.testing.assert_array_equal(v.values, u.values)


def test_field_dump_rejects_foreign_header(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"format": "other"}')
    with pytest.raises(FieldFormatError):
        load_field(p)
