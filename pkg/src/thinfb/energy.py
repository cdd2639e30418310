"""
Discrete thin one-phase energy

    E(u, B) = int_B |grad u|^2 dX + Lambda * H^n({(x, 0) in B : u(x, 0) > 0}),

the rescaled Dirichlet average, the Weiss quantity and the almost-minimality
defect. Reductions use ``math.fsum`` so results do not depend on summation
order.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .grid import (Ball, Region, ScalarField, SlitGrid, SlitMask, describe_region,
                   region_cells, region_nodes, region_slit_cells)

LAMBDA_DEFAULT = math.pi / 2


class UnderResolvedError(ValueError):
    """Radius too small for the grid spacing."""


@dataclass
class EnergyReport:
    dirichlet: float
    thin: float
    lam: float
    total: float
    region: object = "box"

    def to_json(self) -> dict:
        return {"dirichlet": self.dirichlet, "thin": self.thin, "lambda": self.lam,
                "total": self.total, "region": self.region}


@dataclass(frozen=True)
class AlmostMinParams:
    """Constant kappa, exponent beta and flat defect sigma of an almost minimizer."""

    kappa: float = 0.0
    beta: float = 1.0
    sigma: float = 0.0

    def __post_init__(self):
        if self.kappa < 0 or self.sigma < 0:
            raise ValueError("kappa and sigma must be non-negative")
        if not 0 < self.beta <= 2:
            raise ValueError("beta must lie in (0, 2]")


def fsum(a) -> float:
    return math.fsum(np.ravel(a).tolist()) if np.size(a) < 64 else math.fsum(np.ravel(a))


def cell_dirichlet(values: np.ndarray, h: float, weight: np.ndarray = None) -> np.ndarray:
    """Per-cell Dirichlet energy h^{n+1} * sum_d mean over the cell's d-edges of (du/h)^2.

    ``weight`` (cell-shaped) multiplies the cell contribution.
    """
    dim = values.ndim
    total = None
    for d in range(dim):
        sq = np.diff(values, axis=d) ** 2
        for e in range(dim):
            if e == d:
                continue
            lo = [slice(None)] * dim
            hi = [slice(None)] * dim
            lo[e] = slice(None, -1)
            hi[e] = slice(1, None)
            sq = 0.5 * (sq[tuple(lo)] + sq[tuple(hi)])
        total = sq if total is None else total + sq
    out = total * h ** (dim - 2)
    if weight is not None:
        out = out * weight
    return out


def positive_slit_cells(u: ScalarField) -> np.ndarray:
    """Slit cells on which u > 0 at every corner node."""
    return SlitMask.from_field(u).positive


def energy(u: ScalarField, region: Region = None, lam: float = LAMBDA_DEFAULT,
           weight: np.ndarray = None) -> EnergyReport:
    """Discrete energy of ``u`` over the cells whose center lies in ``region``."""
    g = u.grid
    cells = region_cells(g, region)
    dens = cell_dirichlet(u.values, g.h, weight)
    dirichlet = fsum(dens[cells])
    slit_cells = region_slit_cells(g, region) & positive_slit_cells(u)
    thin = np.count_nonzero(slit_cells) * g.h**g.n
    return EnergyReport(dirichlet, thin, float(lam), dirichlet + lam * thin,
                        describe_region(region))


def _check_radius(g: SlitGrid, r: float, lo: float = 4.0):
    if r < lo * g.h - 1e-12:
        raise UnderResolvedError(f"radius {r} is below {lo}h = {lo * g.h}")
    if r > g.halfwidth + 1e-12:
        raise ValueError(f"radius {r} exceeds the grid halfwidth {g.halfwidth}")


def rescaled_dirichlet_avg(u: ScalarField, r: float, center=None) -> float:
    """a(r) = (r * mean_{B_r} |grad u|^2)^{1/2}, the mean taken over the discrete ball volume."""
    g = u.grid
    _check_radius(g, r)
    cells = Ball(r, center).cell_mask(g)
    dens = cell_dirichlet(u.values, g.h)
    vol = np.count_nonzero(cells) * g.h**g.dim
    return math.sqrt(r * fsum(dens[cells]) / vol)


def sphere_quadrature(dim: int, r: float, h: float) -> tuple:
    """Nodes (k, dim) and weights of a quadrature on the sphere of radius r.

    Circle: trapezoid rule in the angle. 2-sphere: Gauss-Legendre in the
    polar cosine times trapezoid in the azimuth. About four points per h of arc.
    """
    k = max(16, int(math.ceil(4 * 2 * math.pi * r / h)))
    phi = (np.arange(k) + 0.5) * (2 * math.pi / k)
    if dim == 2:
        pts = r * np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        return pts, np.full(k, 2 * math.pi * r / k)
    m = max(8, k // 2)
    z, wz = np.polynomial.legendre.leggauss(m)
    s = np.sqrt(1 - z * z)
    pts = r * np.stack([np.outer(s, np.cos(phi)), np.outer(s, np.sin(phi)),
                        np.outer(z, np.ones(k))], axis=-1).reshape(-1, 3)
    w = np.outer(wz, np.full(k, 2 * math.pi / k)).ravel() * r * r
    return pts, w


def boundary_integral(u: ScalarField, r: float, center=None) -> float:
    """int_{dB_r} u^2 by sphere quadrature of the multilinear interpolant of u."""
    g = u.grid
    pts, w = sphere_quadrature(g.dim, r, g.h)
    pts = pts + np.asarray(g._center(center))
    return fsum(w * u.sample(pts) ** 2)


def weiss(u: ScalarField, r: float, lam: float = LAMBDA_DEFAULT, center=None) -> float:
    """W(u, r) = r^{-n} E(u, B_r) - (1/2) r^{-n-1} int_{dB_r} u^2."""
    g = u.grid
    _check_radius(g, r)
    E = energy(u, Ball(r, center), lam).total
    return E / r**g.n - 0.5 * boundary_integral(u, r, center) / r ** (g.n + 1)


def caccioppoli_check(u: ScalarField) -> float:
    """int_{B_{1/2}} |grad u|^2 / (int_{B_1} u^2 + 1)."""
    g = u.grid
    if g.halfwidth < 1:
        raise ValueError("grid must cover B_1")
    dens = cell_dirichlet(u.values, g.h)
    num = fsum(dens[Ball(0.5).cell_mask(g)])
    den = fsum(u.values[Ball(1.0).node_mask(g)] ** 2) * g.h**g.dim
    return num / (den + 1.0)


class DefectSolverFailure(RuntimeError):
    """The competitor search returned an energy above the tested field's own energy."""


def almost_min_defect(u: ScalarField, ball: Ball, lam: float = LAMBDA_DEFAULT,
                      competitor_solver: Callable = None, tol: float = 1e-9) -> float:
    """E(u, ball) / E(v*, ball) - 1 for the best competitor v* with v* = u off the ball.

    ``competitor_solver(u, ball, lam)`` returns the competitor field; the
    default runs the free-boundary descent restricted to the ball. A
    negative ratio within ``tol`` (relative) is reported as 0; below that it
    is a solver failure.
    """
    if competitor_solver is None:
        from .solve import ball_competitor
        competitor_solver = ball_competitor
    v = competitor_solver(u, ball, lam)
    Eu = energy(u, ball, lam).total
    Ev = energy(v, ball, lam).total
    if Ev <= 0:
        return math.inf if Eu > 0 else 0.0
    d = Eu / Ev - 1.0
    if d < 0:
        if d >= -tol:
            return 0.0
        raise DefectSolverFailure(
            f"competitor energy {Ev!r} exceeds E(u) = {Eu!r} beyond tolerance")
    return d
