"""Dichotomy traces, Hoelder seminorms, nondegeneracy and distance lower bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..energy import UnderResolvedError, rescaled_dirichlet_avg
from ..grid import (Ball, Region, ScalarField, SlitMask, distance_to_sets, region_nodes,
                    slit_node_points)


# ---------------------------------------------------------------------------
# dichotomy
# ---------------------------------------------------------------------------


def default_C(eta: float, n: int) -> float:
    """eta^{-n/2}: a(eta r) <= eta^{-n/2} a(r) holds for every field."""
    return eta ** (-n / 2)


@dataclass
class DichotomyTrace:
    eta: float
    M_hat: float
    C_eta: float
    radii: list = field(default_factory=list)
    a: list = field(default_factory=list)
    alternative: list = field(default_factory=list)
    recursion_ok: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(self.recursion_ok)

    def to_json(self) -> dict:
        return {"eta": self.eta, "M_hat": self.M_hat, "C_eta": self.C_eta, "radii": self.radii,
                "a": self.a, "alternative": self.alternative,
                "recursion_ok": self.recursion_ok, "ok": self.ok}


def dichotomy_sequence(u: ScalarField, eta: float = 0.25, depth: int = 3, M_hat: float = 1.0,
                       C_eta: float = None, center=None) -> DichotomyTrace:
    """a(eta^k), k = 0..depth, with each step labelled by the alternative that holds.

    Step k -> k+1 is "first" when a(eta^k) <= M_hat, "second" when
    a(eta^{k+1}) <= a(eta^k)/2, "neither" otherwise. ``recursion_ok`` checks
    a(eta^{k+1}) <= C_eta * M_hat + a(eta^k)/2.
    """
    g = u.grid
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")
    if eta**depth < 16 * g.h - 1e-15:
        raise UnderResolvedError(f"eta^depth = {eta**depth:.4g} is below 16h")
    C = default_C(eta, g.n) if C_eta is None else float(C_eta)
    tr = DichotomyTrace(eta, float(M_hat), C)
    for k in range(depth + 1):
        r = eta**k
        tr.radii.append(r)
        tr.a.append(rescaled_dirichlet_avg(u, r, center))
    for k in range(depth):
        a0, a1 = tr.a[k], tr.a[k + 1]
        if a0 <= M_hat:
            tr.alternative.append("first")
        elif a1 <= a0 / 2 * (1 + 1e-12):
            tr.alternative.append("second")
        else:
            tr.alternative.append("neither")
        tr.recursion_ok.append(bool(a1 <= C * M_hat + a0 / 2 + 1e-12))
    return tr


# ---------------------------------------------------------------------------
# Hoelder seminorms
# ---------------------------------------------------------------------------


def _subsample(mask: np.ndarray, cap: int) -> np.ndarray:
    """Strided sub-lattice of a node mask with at most ``cap`` nodes (origin kept when present)."""
    count = int(mask.sum())
    if count <= cap:
        return mask
    stride = 2
    while True:
        keep = np.zeros_like(mask)
        mid = [(s - 1) // 2 for s in mask.shape]
        sl = tuple(slice(m % stride, None, stride) for m in mid)
        keep[sl] = True
        sub = mask & keep
        if int(sub.sum()) <= cap:
            return sub
        stride += 1


def _pair_max(pts: np.ndarray, vals: np.ndarray, exponent: float) -> float:
    best = 0.0
    chunk = max(1, 2_000_000 // max(1, len(pts)))
    for i0 in range(0, len(pts), chunk):
        p = pts[i0:i0 + chunk]
        v = vals[i0:i0 + chunk]
        d = np.sqrt(((p[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
        dv = np.abs(v[:, None] - vals[None, :])
        if dv.ndim == 3:
            dv = np.sqrt((dv**2).sum(-1))
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(d > 0, dv / d**exponent, 0.0)
        best = max(best, float(q.max()))
    return best


def holder_seminorm(u: ScalarField, exponent: float, region: Region = None,
                    max_nodes: int = None) -> float:
    """max |u(X) - u(Y)| / |X - Y|^exponent over region node pairs.

    Exact on regions with at most ``max_nodes`` (default 33^{n+1}) nodes;
    larger regions are reduced to a strided sub-lattice.
    """
    if not 0 < exponent <= 1:
        raise ValueError("exponent must lie in (0, 1]")
    g = u.grid
    cap = 33**g.dim if max_nodes is None else int(max_nodes)
    mask = _subsample(region_nodes(g, region), cap)
    idx = np.flatnonzero(mask)
    return _pair_max(g.points(idx), u.values.ravel()[idx], exponent)


def gradient_holder_seminorm(u: ScalarField, gamma: float, region: Region = None,
                             max_nodes: int = None) -> float:
    """Hoelder seminorm of the central-difference gradient (region must avoid F and the box edge)."""
    if not 0 < gamma <= 1:
        raise ValueError("gamma must lie in (0, 1]")
    g = u.grid
    mask = region_nodes(g, region) & ~g.on_box_boundary
    grads = np.stack(np.gradient(u.values, g.h), axis=-1)
    cap = 33**g.dim if max_nodes is None else int(max_nodes)
    mask = _subsample(mask, cap)
    idx = np.flatnonzero(mask)
    return _pair_max(g.points(idx), grads.reshape(-1, g.dim)[idx], gamma)


# ---------------------------------------------------------------------------
# nondegeneracy and distance bounds
# ---------------------------------------------------------------------------


def free_boundary_points(mask: SlitMask) -> np.ndarray:
    """Interface midpoints as points (k, n+1) on the slit."""
    mids = mask.interface_midpoints()
    return np.concatenate([mids, np.zeros((len(mids), 1))], axis=1)


def nondegeneracy_scan(u: ScalarField, mask: SlitMask, radii, points=None,
                       region: Region = None) -> float:
    """min over free-boundary points X0 and radii r of max_{B_r(X0)} u / r^{1/2}.

    ``points`` overrides the interface midpoints of ``mask``; ``region``
    (a Ball) restricts which free-boundary points are used.
    """
    g = u.grid
    radii = [float(r) for r in radii]
    if min(radii) < 8 * g.h - 1e-12:
        raise UnderResolvedError("radii must be at least 8h")
    pts = free_boundary_points(mask) if points is None else np.atleast_2d(points)
    if region is not None:
        if not isinstance(region, Ball):
            raise ValueError("region must be a Ball")
        c = np.asarray(g._center(region.center))
        pts = pts[np.linalg.norm(pts - c, axis=1) <= region.r * (1 + 1e-12)]
    if len(pts) == 0:
        raise ValueError("free boundary is empty")
    best = math.inf
    co = g.coords()
    vals = u.values
    for p in pts:
        d2 = np.broadcast_to(sum((ci - pi) ** 2 for ci, pi in zip(co, p)), g.shape)
        for r in radii:
            inside = d2 <= (r * (1 + 1e-12)) ** 2
            best = min(best, float(vals[inside].max()) / math.sqrt(r))
    return best


@dataclass
class DistanceBound:
    floor: float
    evaluated: int
    skipped: int
    argmin: list = None

    def to_json(self) -> dict:
        return {"floor": self.floor, "evaluated": self.evaluated, "skipped": self.skipped,
                "argmin": self.argmin}


def distance_bound_check(u: ScalarField, mask: SlitMask, region: Region = None,
                         min_dz_cells: float = 2.0) -> DistanceBound:
    """min over region nodes of u(X) d_F(X)^{1/2} / d_Z(X).

    Nodes with d_Z < 2h (this includes Z itself) or non-finite distances are
    skipped and counted.
    """
    g = u.grid
    dist = distance_to_sets(g, mask)
    if dist.z_empty or dist.f_empty:
        raise ValueError("Z or F is empty; the distance bound is undefined")
    sel = region_nodes(g, region)
    ok = sel & (dist.d_Z >= min_dz_cells * g.h - 1e-12) & np.isfinite(dist.d_F)
    skipped = int(np.count_nonzero(sel & ~ok))
    if not ok.any():
        return DistanceBound(math.nan, 0, skipped)
    ratio = u.values[ok] * np.sqrt(dist.d_F[ok]) / dist.d_Z[ok]
    i = int(np.argmin(ratio))
    where = g.points(np.flatnonzero(ok)[i]).tolist()
    return DistanceBound(float(ratio[i]), int(ok.sum()), skipped, where)


__all__ = ["DichotomyTrace", "DistanceBound", "default_C", "dichotomy_sequence",
           "distance_bound_check", "free_boundary_points", "gradient_holder_seminorm",
           "holder_seminorm", "nondegeneracy_scan", "slit_node_points"]
