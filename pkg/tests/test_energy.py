import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thinfb.energy import (LAMBDA_DEFAULT, AlmostMinParams, UnderResolvedError,
                           almost_min_defect, boundary_integral, caccioppoli_check,
                           cell_dirichlet, energy, rescaled_dirichlet_avg, weiss)
from thinfb.exact import ProfileParams, U_field, eval_V, profile_field
from thinfb.generators import boundary_field
from thinfb.grid import Ball, ScalarField, build_grid
from thinfb.solve import minimize_energy


def _const(g, c):
    return ScalarField(g, np.full(g.shape, float(c)), even=True)


def test_energy_of_zero():
    g = build_grid(1, 1 / 16)
    rep = energy(_const(g, 0.0), Ball(1.0))
    assert (rep.dirichlet, rep.thin, rep.total) == (0.0, 0.0, 0.0)


@pytest.mark.parametrize("h", [1 / 16, 1 / 64])
def test_energy_of_positive_constant(h):
    rep = energy(_const(build_grid(1, h), 0.7), Ball(1.0))
    assert rep.dirichlet == 0.0
    assert rep.thin == pytest.approx(2.0)
    assert rep.total == pytest.approx(math.pi)


def test_energy_of_U_converges_first_order():
    hs = [1 / 32, 1 / 64, 1 / 128]
    reps = [energy(U_field(build_grid(1, h)), Ball(1.0)) for h in hs]
    errs = [abs(r.total - math.pi) for r in reps]
    assert errs[0] > errs[1] > errs[2]
    assert np.polyfit(np.log(hs), np.log(errs), 1)[0] >= 0.8
    # continuum split: dirichlet pi/2, slit positivity length 1
    assert reps[-1].dirichlet == pytest.approx(math.pi / 2, rel=0.01)
    assert reps[-1].thin == pytest.approx(1.0, abs=2 * hs[-1])


def test_dirichlet_of_linear_is_exact():
    g = build_grid(2, 1 / 8)
    u = boundary_field(g, "affine", {"slope": [0.5, -1.0]})
    dens = cell_dirichlet(u.values, g.h)
    np.testing.assert_allclose(dens, 1.25 * g.h**3, rtol=1e-12)


@pytest.mark.parametrize("r", [0.25, 0.5, 1.0])
def test_rescaled_average_of_linear(r):
    g = build_grid(1, 1 / 64)
    u = boundary_field(g, "affine", {"slope": [2.0]})
    assert rescaled_dirichlet_avg(u, r) == pytest.approx(math.sqrt(r * 4.0), rel=1e-12)


def test_rescaled_average_of_U_and_zero():
    g = build_grid(1, 1 / 256)
    for r in (0.25, 0.5, 1.0):
        assert rescaled_dirichlet_avg(U_field(g), r) == pytest.approx(math.sqrt(2) / 2, rel=0.02)
    assert rescaled_dirichlet_avg(_const(g, 0.0), 0.5) == 0.0


def test_radius_checks():
    g = build_grid(1, 1 / 16)
    with pytest.raises(UnderResolvedError):
        rescaled_dirichlet_avg(U_field(g), 0.2)
    with pytest.raises(UnderResolvedError):
        weiss(U_field(g), 0.2)
    with pytest.raises(ValueError):
        weiss(U_field(g), 1.5)


def test_weiss_of_U_is_constant():
    g = build_grid(1, 1 / 256)
    W = [weiss(U_field(g), r) for r in (0.125, 0.25, 0.5)]
    assert max(W) - min(W) <= 0.02 * W[-1]
    for w in W:
        assert w == pytest.approx(math.pi / 2, rel=0.05)


def test_weiss_of_zero():
    g = build_grid(1, 1 / 32)
    assert all(weiss(_const(g, 0.0), r) == 0.0 for r in (0.25, 0.5, 1.0))


def test_boundary_integral_of_constant():
    # quadrature of a constant on the circle / sphere is exact
    for n, area in ((1, 2 * math.pi * 0.5), (2, 4 * math.pi * 0.25)):
        g = build_grid(n, 1 / 8)
        assert boundary_integral(_const(g, 1.0), 0.5) == pytest.approx(area, rel=1e-12)


def _scaled_pair(h, rho, p):
    g1, g2 = build_grid(1, h), build_grid(1, rho * h)
    pts = g1.points(np.arange(g1.size)).reshape(g1.shape + (2,))
    u_rho = ScalarField(g1, rho**-0.5 * eval_V(rho * pts, p), even=True)
    return u_rho, profile_field(g2, p)


@pytest.mark.parametrize("r", [0.5, 1.0])
def test_energy_scaling_law(r):
    rho = 0.5
    u_rho, u = _scaled_pair(1 / 32, rho, ProfileParams(1, a=0.1))
    lhs = energy(u_rho, Ball(r)).total
    rhs = rho**-1 * energy(u, Ball(rho * r)).total
    assert lhs == pytest.approx(rhs, rel=1e-12)


@pytest.mark.parametrize("r", [0.25, 0.5, 1.0])
def test_weiss_of_blowup(r):
    rho = 0.5
    u_rho, u = _scaled_pair(1 / 32, rho, ProfileParams(1, a=0.1))
    assert weiss(u_rho, r) == pytest.approx(weiss(u, rho * r), abs=1 / 32)


@settings(max_examples=25, deadline=None)
@given(cut=st.lists(st.integers(0, 32), min_size=1, max_size=8))
def test_thin_part_monotone_under_truncation(cut):
    g = build_grid(1, 1 / 16)
    u = U_field(g)
    vals = u.values.copy()
    vals[cut, g.mid] = 0.0
    v = u.with_values(vals)
    assert energy(v, Ball(1.0)).thin <= energy(u, Ball(1.0)).thin


def test_defect_of_U_decreases():
    d = [almost_min_defect(U_field(build_grid(1, h)), Ball(0.5)) for h in (1 / 32, 1 / 64, 1 / 128)]
    assert d[0] > d[1] > d[2] >= 0
    assert d[2] <= 0.02


@pytest.mark.parametrize("data", [("U-trace", {}), ("tilted-U", {"bend": 0.05})])
def test_defect_of_minimizer_within_tolerance(data):
    g = build_grid(1, 1 / 64)
    u, _ = minimize_energy(boundary_field(g, *data))
    for c, r in [((0, 0), 0.25), ((0.3, 0.2), 0.2), ((-0.4, 0), 0.3), ((0, 0), 0.9)]:
        assert almost_min_defect(u, Ball(r, c)) <= 2e-9


def test_defect_of_bumped_U_is_positive():
    g = build_grid(1, 1 / 64)
    bump = np.maximum(0.0, 1 - 16 * g.radius() ** 2)
    u = ScalarField(g, U_field(g).values + 0.2 * bump, even=True)
    assert almost_min_defect(u, Ball(0.5)) > 0.05


def test_defect_infinite_when_competitor_has_zero_energy():
    g = build_grid(1, 1 / 16)
    u = ScalarField(g, np.where(g.radius() < 0.25, 0.1, 0.0), even=True)
    assert almost_min_defect(u, Ball(0.5)) == math.inf


def test_caccioppoli():
    assert caccioppoli_check(_const(build_grid(1, 1 / 16), 0.0)) == 0.0
    assert caccioppoli_check(_const(build_grid(1, 1 / 16), 1.0)) == 0.0
    vals = [caccioppoli_check(U_field(build_grid(1, h))) for h in (1 / 64, 1 / 128)]
    assert 0 < vals[1] < math.inf
    assert vals[0] == pytest.approx(vals[1], rel=0.02)


def test_almost_min_params_validation():
    with pytest.raises(ValueError):
        AlmostMinParams(kappa=-0.1)
    with pytest.raises(ValueError):
        AlmostMinParams(beta=0.0)
    assert LAMBDA_DEFAULT == pytest.approx(math.pi / 2)
