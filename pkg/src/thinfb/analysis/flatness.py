"""
Flatness with respect to translates of U and the improvement-of-flatness run.

A field u is eps-flat in direction nu on a region when

    U(x.nu - eps, x_{n+1}) <= u(X) <= U(x.nu + eps, x_{n+1})

at every region node. Because U(., s) is monotone, the smallest such eps is
available in closed form from the level-set inverse t*(w, s) of U:

    eps_X = |x.nu - t*(u(X), x_{n+1})|      for u(X) > 0,
    eps_X = max(x.nu, 0)                    for u(X) = 0 on the slit,
    eps_X = inf                             for u(X) = 0 off the slit or u(X) < 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..exact import U_inverse_t
from ..grid import Ball, Region, ScalarField, SlitMask, region_nodes

TRAP_LIMIT = 0.2


def _unit(nu, n: int) -> np.ndarray:
    nu = np.atleast_1d(np.asarray(nu, dtype=float))
    if nu.shape != (n,):
        raise ValueError(f"direction must have {n} components")
    if abs(np.linalg.norm(nu) - 1.0) > 1e-9:
        raise ValueError("direction must be a unit vector")
    return nu


def _pointwise(u: ScalarField, mask: np.ndarray, center) -> tuple:
    """(x' coordinates relative to center, u values, x_{n+1}) at region nodes."""
    g = u.grid
    idx = np.flatnonzero(mask)
    pts = g.points(idx)
    c = np.zeros(g.dim) if center is None else np.asarray(center, dtype=float)
    x = pts[:, : g.n] - c[: g.n]
    return x, u.values.ravel()[idx], pts[:, -1]


def _eps_from(xnu: np.ndarray, w: np.ndarray, s: np.ndarray) -> float:
    if xnu.size == 0:
        return 0.0
    if np.any(w < 0) or np.any((w == 0) & (s != 0)):
        return math.inf
    pos = w > 0
    e = 0.0
    if pos.any():
        e = float(np.max(np.abs(xnu[pos] - U_inverse_t(w[pos], s[pos]))))
    if (~pos).any():
        e = max(e, float(np.max(xnu[~pos])), 0.0)
    return e if e <= 1.0 else math.inf


def flatness_eps(u: ScalarField, region: Region, nu=None, center=None) -> float:
    """Smallest eps trapping u between U(x.nu -+ eps, x_{n+1}) on the region; inf if eps > 1.

    ``center`` shifts the origin of x.nu (default 0).
    """
    g = u.grid
    nu = np.eye(g.n)[-1] if nu is None else _unit(nu, g.n)
    x, w, s = _pointwise(u, region_nodes(g, region), center)
    return _eps_from(x @ nu, w, s)


def _angle_dir(th: float) -> np.ndarray:
    # angle measured from e_n towards e_1
    return np.array([math.sin(th), math.cos(th)])


def best_direction_flatness(u: ScalarField, region: Region, center=None,
                            min_step: float = 1e-4) -> tuple:
    """Direction nu in the slit (|nu| = 1) minimizing flatness_eps, and the minimum.

    n = 1: nu in {e_1, -e_1}. n = 2: 64 angles on the circle, then local
    refinement with halving steps until the step is below eps/4 (or
    ``min_step``). The result never exceeds flatness along e_n.
    """
    g = u.grid
    x, w, s = _pointwise(u, region_nodes(g, region), center)
    if g.n == 1:
        cands = [(np.array([1.0]), _eps_from(x[:, 0], w, s)),
                 (np.array([-1.0]), _eps_from(-x[:, 0], w, s))]
        return min(cands, key=lambda c: c[1])

    def ev(th):
        return _eps_from(x @ _angle_dir(th), w, s)

    k = 64
    grid_th = [2 * math.pi * i / k for i in range(k)]
    vals = [ev(th) for th in grid_th]
    i = int(np.argmin(vals))
    best_th, best = grid_th[i], vals[i]
    if not math.isfinite(best):
        return np.array([0.0, 1.0]), math.inf
    step0 = step = 2 * math.pi / k
    while step > max(min(best / 4, step0 / 8), min_step):
        step /= 2
        improved = True
        while improved:
            improved = False
            for th in (best_th - step, best_th + step):
                e = ev(th)
                if e < best:
                    best_th, best, improved = th, e, True
    nu = _angle_dir(best_th)
    e_n = ev(0.0)
    if e_n <= best:
        return np.array([0.0, 1.0]), e_n
    return nu, best


@dataclass
class FlatnessReport:
    """Per-scale flatness records (r_k, nu_k, eps_k) and the fitted exponent."""

    eta: float
    depth: int
    center: list
    records: list = field(default_factory=list)
    alpha_hat: float = None
    truncated: bool = False
    truncated_at: int = None

    @property
    def ratios(self) -> list:
        return [r["eps"] / r["r"] for r in self.records]

    def to_json(self) -> dict:
        return {"eta": self.eta, "depth": self.depth, "center": self.center,
                "records": self.records, "alpha_hat": self.alpha_hat,
                "truncated": self.truncated, "truncated_at": self.truncated_at}


def fit_alpha(radii, eps) -> float:
    """Slope of log(eps_k / r_k) against log r_k; None with fewer than two positive values."""
    r = np.asarray(radii, float)
    e = np.asarray(eps, float)
    ok = (e > 0) & np.isfinite(e)
    if ok.sum() < 2:
        return None
    return float(np.polyfit(np.log(r[ok]), np.log(e[ok] / r[ok]), 1)[0])


def _origin_on_F(u: ScalarField, tol_cells: float = 2.0) -> np.ndarray:
    mask = SlitMask.from_field(u)
    mids = mask.interface_midpoints()
    if len(mids) == 0:
        raise ValueError("the field has no free boundary")
    d = np.linalg.norm(mids, axis=1)
    i = int(np.argmin(d))
    if d[i] > tol_cells * u.grid.h + 1e-12:
        raise ValueError(f"nearest free-boundary interface is {d[i]:.4g} from the origin "
                         f"(more than {tol_cells}h)")
    return mids[i]


def improvement_of_flatness_run(u: ScalarField, eta: float = 0.25, depth: int = 3,
                                center=None, trap_limit: float = TRAP_LIMIT) -> FlatnessReport:
    """Flatness of the rescalings u_{r_k} on B_1 at r_k = eta^k, k = 0..depth.

    The flatness of u_r on B_1 equals eps(u, B_r(x0)) / r, so it is measured
    directly on u. The center x0 on the slit is picked once: the shift (in
    steps of h/4, at most 2h from the free-boundary face nearest the origin)
    minimizing the finest-scale flatness. The run stops with a flag when
    eps_k > trap_limit * r_k.
    """
    g = u.grid
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")
    if eta**depth < 16 * g.h - 1e-15:
        raise ValueError(f"eta^depth = {eta**depth:.4g} is below 16h; increase h resolution")
    if center is None:
        face = _origin_on_F(u)
        r_f = eta**depth
        best = None
        for j in range(-8, 9):
            c = np.zeros(g.dim)
            c[: g.n] = face
            c[g.n - 1] += j * g.h / 4
            _, e = best_direction_flatness(u, Ball(r_f, tuple(c)), center=c)
            if best is None or e < best[0] - 1e-15:
                best = (e, c)
        center = best[1]
    center = np.asarray(center, dtype=float)
    rep = FlatnessReport(eta, depth, center.tolist())
    for k in range(depth + 1):
        r = eta**k
        nu, e = best_direction_flatness(u, Ball(r, tuple(center)), center=center)
        rep.records.append({"k": k, "r": r, "nu": nu.tolist(), "eps": e,
                            "eps_over_r": e / r})
        if e > trap_limit * r:
            rep.truncated, rep.truncated_at = True, k
            break
    rep.alpha_hat = fit_alpha([x["r"] for x in rep.records], [x["eps"] for x in rep.records])
    return rep
