"""Touching tests against comparison profiles and subsolution certificates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..exact import ProfileParams, _surface, eval_U, eval_V, profile_field, signed_distance
from ..grid import Ball, Region, ScalarField, SlitGrid, region_nodes


@dataclass
class TangencyWitness:
    classification: str  # "strictly-above" | "tangent" | "crossing"
    t_star: float
    gap_min: float
    X0: list

    def to_json(self) -> dict:
        return {"classification": self.classification, "t_star": self.t_star,
                "gap_min": self.gap_min, "X0": self.X0}


def comparison_touch_test(u: ScalarField, p: ProfileParams, region: Region = None,
                          resolution: float = None, t_max: float = 1.0) -> TangencyWitness:
    """Largest t >= 0 with u >= V(. + t e_n) on the region (default B_{1/4}).

    Bisection to ``resolution`` (default h/4). Classified as "crossing" when
    u >= V fails already at t = 0, "tangent" when t* <= h/2, otherwise
    "strictly-above" with witness t0 = t*.
    """
    g = u.grid
    region = Ball(0.25) if region is None else region
    res = g.h / 4 if resolution is None else float(resolution)
    idx = np.flatnonzero(region_nodes(g, region))
    pts = g.points(idx)
    uv = u.values.ravel()[idx]
    tol = 1e-12 * max(1.0, float(np.abs(uv).max(initial=0.0)))

    def gap(t):
        return uv - eval_V(pts, p.translated(t))

    def above(t):
        return bool(gap(t).min() >= -tol)

    g0 = gap(0.0)
    if g0.min() < -tol:
        i = int(np.argmin(g0))
        return TangencyWitness("crossing", None, float(g0[i]), pts[i].tolist())
    lo, hi = 0.0, res
    while above(hi):
        lo = hi
        hi *= 2
        if hi > t_max:
            hi = t_max
            if above(hi):
                lo = hi
            break
    while hi - lo > res:
        mid = 0.5 * (lo + hi)
        if above(mid):
            lo = mid
        else:
            hi = mid
    gl = gap(lo)
    i = int(np.argmin(gl))
    cls = "tangent" if lo <= g.h / 2 else "strictly-above"
    return TangencyWitness(cls, float(lo), float(gl[i]), pts[i].tolist())


@dataclass
class SubsolutionReport:
    margin: float
    tolerance: float
    passes: bool
    evaluated: int
    skipped: int
    expansion: float

    def to_json(self) -> dict:
        return dict(self.__dict__)


def discrete_laplacian(values: np.ndarray, h: float) -> np.ndarray:
    """Standard (2(n+1)+1)-point Laplacian; NaN on the box boundary."""
    out = np.full(values.shape, np.nan)
    inner = tuple(slice(1, -1) for _ in range(values.ndim))
    acc = -2.0 * values.ndim * values[inner]
    for d in range(values.ndim):
        lo = list(inner)
        hi = list(inner)
        lo[d] = slice(0, -2)
        hi[d] = slice(2, None)
        acc = acc + values[tuple(lo)] + values[tuple(hi)]
    out[inner] = acc / h**2
    return out


def _profile_rho(X: np.ndarray, p: ProfileParams) -> np.ndarray:
    Y = np.array(X, dtype=float)
    Y[..., p.n - 1] += p.t0
    return np.hypot(signed_distance(Y, p), Y[..., -1])


def _edge_points(p: ProfileParams) -> list:
    """Sample points x0 on F(V) with unit normals nu(x0) (pointing into {V > 0})."""
    if p.n == 1:
        return [(np.array([-p.t0]), np.array([1.0]))]
    out = []
    for y in (-0.5, 0.0, 0.5):
        gy, dg, _ = _surface(p, y)
        nu = np.array([-dg, 1.0]) / math.hypot(dg, 1.0)
        out.append((np.array([y, gy - p.t0]), nu))
    return out


def subsolution_certificate(p: ProfileParams, grid: SlitGrid, mu: float = None,
                            tolerance: float = None, rho_min_cells: float = 10.0,
                            radius: float = 2.0) -> SubsolutionReport:
    """Check Delta_h V >= mu^2 |x_{n+1}| on {V > 0} within B_radius, away from F(V).

    ``margin`` is the minimum of Delta_h V - mu^2 |x_{n+1}| over nodes with
    rho >= rho_min_cells * h (rho the distance to F(V) in the normal plane);
    the certificate passes when margin >= -tolerance (default 5h).
    ``expansion`` is max |V(x0 + r nu, s) - U(r, s)| / (r^2 + s^2)^{1/2} over
    sample points x0 of F(V) and small (r, s), which stays bounded when V
    expands as U at its free boundary.
    """
    mu = p.mu if mu is None else mu
    if mu is None:
        raise ValueError("mu is required (profile class bound)")
    h = grid.h
    tol = 5 * h if tolerance is None else float(tolerance)
    V = profile_field(grid, p).values
    lap = discrete_laplacian(V, h)
    pts = np.stack(np.meshgrid(*([grid.axis] * grid.dim), indexing="ij"), axis=-1)
    rho = _profile_rho(pts, p)
    sample = (grid.radius() <= radius * (1 + 1e-12)) & (V > 0) & ~grid.on_box_boundary
    ok = sample & (rho >= rho_min_cells * h)
    skipped = int(np.count_nonzero(sample & ~ok))
    marg = lap[ok] - mu**2 * np.abs(pts[..., -1][ok])
    margin = float(marg.min()) if marg.size else math.nan
    # expansion check at the free boundary of V
    worst = 0.0
    for x0, nu in _edge_points(p):
        for rr in (4 * h, 8 * h, 16 * h):
            for th in np.linspace(-0.9 * math.pi, 0.9 * math.pi, 9):
                r, s = rr * math.cos(th), rr * math.sin(th)
                X = np.concatenate([x0 + r * nu, [s]])
                diff = abs(float(eval_V(X, p)) - float(eval_U(r, s)))
                worst = max(worst, diff / rr)
    return SubsolutionReport(margin, tol, bool(margin >= -tol), int(ok.sum()), skipped, worst)
