"""
Closed-form profiles: the trivial cone U, the two-dimensional profiles v_a,
the comparison family V_{M, xi', a}, its quadratic approximant gamma_V, and
the eps-normalized hodograph transform of arbitrary fields.

Coordinates follow the grid convention: a point X is an array whose last
axis holds (x_1, ..., x_n, x_{n+1}); (t, s) are the coordinates in the 2-D
plane orthogonal to the free boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .grid import ScalarField, SlitGrid, region_nodes

MU0_DEFAULT = 0.2


class FootPointError(RuntimeError):
    """Foot-point projection onto the surface S did not converge."""


# ---------------------------------------------------------------------------
# U and v_a
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PolarPoint:
    """(t, s) with derived polar coordinates, theta in [-pi, pi]."""

    t: float
    s: float

    @property
    def rho(self):
        return np.hypot(self.t, self.s)

    @property
    def theta(self):
        return np.arctan2(self.s, self.t)


def eval_U(t, s):
    """U(t, s) = rho^{1/2} cos(theta/2), the real part of sqrt(t + i s).

    sqrt((rho + t)/2) for t >= 0 and |s| / sqrt(2 (rho - t)) for t < 0, so
    there is no cancellation near P and the value is exactly zero on
    {t <= 0, s = 0} regardless of the sign of a zero ``s``.
    """
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    rho = np.hypot(t, s)
    with np.errstate(divide="ignore", invalid="ignore"):
        neg = np.abs(s) / np.sqrt(2.0 * (rho - t))
    return np.where(t >= 0, np.sqrt((rho + t) * 0.5), np.where(rho > 0, neg, 0.0))


def eval_U_t(t, s):
    """dU/dt = rho^{-1/2} cos(theta/2) / 2 = U / (2 rho); +inf at the origin."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    rho = np.hypot(t, s)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = eval_U(t, s) / (2.0 * rho)
    return np.where(rho > 0, out, np.inf)


def U_inverse_t(w, s):
    """The t with U(t, s) = w for w > 0: t = w^2 - s^2 / (4 w^2).

    For w == 0 the level set is {t <= 0} on s == 0 and empty otherwise;
    returns 0.0 resp. -inf there (callers treat those cases explicitly).
    """
    w = np.asarray(w, dtype=float)
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = w * w - s * s / (4.0 * w * w)
    return np.where(w > 0, t, np.where(s == 0, 0.0, -np.inf))


def eval_v_a(t, s, a):
    """v_a(t, s) = (1 + a rho / 4) U(t, s)."""
    rho = np.hypot(np.asarray(t, dtype=float), np.asarray(s, dtype=float))
    return (1.0 + 0.25 * a * rho) * eval_U(t, s)


# ---------------------------------------------------------------------------
# Comparison profiles V_{M, xi', a}
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProfileParams:
    """Parameters of V_{M, xi', a}(X + t0 e_n).

    ``M`` is a symmetric (n-1)x(n-1) matrix and ``xi`` a vector in R^{n-1}
    (both empty for n = 1). Membership in the class V_mu is checked on
    construction when ``mu`` is given.
    """

    n: int
    a: float = 0.0
    M: np.ndarray = None
    xi: np.ndarray = None
    t0: float = 0.0
    mu: float = None

    def __post_init__(self):
        k = self.n - 1
        M = np.zeros((k, k)) if self.M is None else np.atleast_2d(np.asarray(self.M, float))
        xi = np.zeros(k) if self.xi is None else np.atleast_1d(np.asarray(self.xi, float))
        if k == 0:
            M, xi = np.zeros((0, 0)), np.zeros(0)
        if M.shape != (k, k) or xi.shape != (k,):
            raise ValueError(f"M must be {k}x{k} and xi of length {k} for n={self.n}")
        if not np.allclose(M, M.T, rtol=0, atol=1e-14):
            raise ValueError("M must be symmetric")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "xi", xi)
        if self.mu is not None:
            norm_M = np.linalg.norm(M, 2) if k else 0.0
            if norm_M > self.mu + 1e-14 or abs(self.a) > self.mu + 1e-14 or \
                    np.linalg.norm(xi) > self.mu + 1e-14:
                raise ValueError("parameters are not in the class V_mu")

    @property
    def trace_M(self) -> float:
        return float(np.trace(self.M)) if self.n > 1 else 0.0

    @property
    def flat(self) -> bool:
        return self.n == 1 or (not np.any(self.M) and not np.any(self.xi))

    def translated(self, dt: float) -> "ProfileParams":
        """Same profile evaluated at X + (t0 + dt) e_n."""
        return ProfileParams(self.n, self.a, self.M, self.xi, self.t0 + dt, self.mu)

    def to_dict(self) -> dict:
        return {"n": self.n, "a": self.a, "M": self.M.tolist(), "xi": self.xi.tolist(),
                "t0": self.t0, "mu": self.mu}


def _surface(p: ProfileParams, y):
    """g(y), g'(y), g''(y) for S = {x_n = xi y + M y^2 / 2} (n = 2)."""
    xi = p.xi[0]
    m = p.M[0, 0]
    return xi * y + 0.5 * m * y * y, xi + m * y, m


def signed_distance(X, p: ProfileParams, tol: float = 1e-13, max_iter: int = 50):
    """Signed distance from x to S (positive above S in the x_n direction).

    Damped Newton iteration on the foot-point condition, seeded from the
    vertical projection. The translation t0 is not applied here.
    """
    X = np.asarray(X, dtype=float)
    if p.n == 1:
        return X[..., 0]
    x1 = X[..., 0]
    x2 = X[..., 1]
    if p.flat:
        return x2.copy()
    y = x1.copy()
    for _ in range(max_iter):
        g, dg, d2g = _surface(p, y)
        f = (y - x1) + (g - x2) * dg
        df = 1.0 + dg * dg + (g - x2) * d2g
        df = np.where(df > 0.1, df, 0.1)  # damping keeps the step a descent direction
        step = f / df
        y = y - step
        if np.all(np.abs(step) <= tol * (1.0 + np.abs(y))):
            break
    else:
        raise FootPointError("foot-point iteration did not converge; projection not unique")
    g, dg, d2g = _surface(p, y)
    f = (y - x1) + (g - x2) * dg
    if np.any(np.abs(f) > 1e-9) or np.any(1.0 + dg * dg + (g - x2) * d2g <= 0):
        raise FootPointError("foot point is not a strict local minimizer of the distance")
    dist = np.hypot(x1 - y, x2 - g)
    side = np.sign(x2 - _surface(p, x1)[0])
    return np.where(side < 0, -dist, dist)


def eval_V(X, p: ProfileParams):
    """V_{M, xi', a}(X + t0 e_n) = v_a(t, s), t the signed distance of x to S, s = x_{n+1}."""
    X = np.array(X, dtype=float)
    if X.shape[-1] != p.n + 1:
        raise ValueError(f"points must have {p.n + 1} coordinates")
    X[..., p.n - 1] += p.t0
    t = signed_distance(X, p)
    return eval_v_a(t, X[..., -1], p.a)


def gamma_V(X, p: ProfileParams):
    """-xi'.x' - x'^T M x' / 2 + (a/2)(x_n^2 + x_{n+1}^2), plus t0 for translated profiles."""
    X = np.asarray(X, dtype=float)
    xp = X[..., : p.n - 1]
    quad = np.einsum("...i,ij,...j->...", xp, p.M, xp) if p.n > 1 else 0.0
    lin = xp @ p.xi if p.n > 1 else 0.0
    return -lin - 0.5 * quad + 0.5 * p.a * (X[..., p.n - 1] ** 2 + X[..., p.n] ** 2) + p.t0


def profile_field(grid: SlitGrid, p: ProfileParams) -> ScalarField:
    """V sampled at every grid node (even in x_{n+1} by construction)."""
    pts = np.stack(np.meshgrid(*([grid.axis] * grid.dim), indexing="ij"), axis=-1)
    return ScalarField(grid, eval_V(pts, p), even=True)


def U_field(grid: SlitGrid, b: float = 0.0) -> ScalarField:
    """The cone U_b(X) = U(x_n + b, x_{n+1}) sampled on the grid."""
    c = grid.coords()
    vals = np.broadcast_to(eval_U(c[-2] + b, c[-1]), grid.shape)
    return ScalarField(grid, np.array(vals), even=True)


# ---------------------------------------------------------------------------
# Hodograph transform
# ---------------------------------------------------------------------------


@dataclass
class HodographField:
    """eps-normalized hodograph of a field on a node region.

    ``lo``/``hi`` bracket the (possibly set-valued) solution; ``value`` is
    their midpoint. ``undefined`` nodes have no root in [-1, 1];
    ``multivalued`` nodes have a plateau or a non-monotone search segment.
    """

    grid: SlitGrid
    eps: float
    nodes: np.ndarray  # flat node indices
    value: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    undefined: np.ndarray
    multivalued: np.ndarray
    nonmonotone: np.ndarray = None

    def points(self) -> np.ndarray:
        return self.grid.points(self.nodes)

    @property
    def defined(self) -> np.ndarray:
        return ~self.undefined


def _line_interp(u: ScalarField, base_idx: tuple, pos: np.ndarray) -> np.ndarray:
    """Linear interpolation of u along the x_n grid line through each node.

    ``pos`` is the x_n coordinate; other coordinates are those of the node.
    """
    g = u.grid
    n_axis = g.n - 1
    s = (pos + g.halfwidth) / g.h
    s = np.clip(s, 0.0, g.N - 1)
    i0 = np.minimum(np.floor(s).astype(np.int64), g.N - 2)
    w = s - i0
    idx0 = list(base_idx)
    idx1 = list(base_idx)
    idx0[n_axis] = i0
    idx1[n_axis] = i0 + 1
    return (1 - w) * u.values[tuple(idx0)] + w * u.values[tuple(idx1)]


def _monotone_segments(u: ScalarField) -> np.ndarray:
    """Cumulative count of decreasing x_n-edges, for O(1) monotonicity queries."""
    g = u.grid
    d = np.diff(u.values, axis=g.n - 1)
    bad = (d < 0).astype(np.int64)
    pad = [(0, 0)] * g.dim
    pad[g.n - 1] = (1, 0)
    return np.cumsum(np.pad(bad, pad), axis=g.n - 1)


def hodograph(u: Union[ScalarField, Callable], eps: float, region, grid: SlitGrid = None,
              tol: float = 1e-10, exclude_P: bool = True) -> HodographField:
    """Solve U(X) = u(X - eps * w e_n) for w in [-1, 1] at every region node.

    ``u`` is either a grid field (linearly interpolated along the e_n line)
    or a callable evaluated exactly at points of shape (k, n+1); for a
    callable ``grid`` supplies the node set. Roots are bracketed by two
    bisections to ``tol``: the smallest w with u(X - eps w e_n) <= U(X) and
    the largest w with u(X - eps w e_n) >= U(X).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if isinstance(u, ScalarField):
        grid = u.grid
    elif grid is None:
        raise ValueError("a grid is required when u is a callable")
    mask = region_nodes(grid, region)
    if exclude_P:
        mask = mask & ~grid.on_P
    nodes = np.flatnonzero(mask)
    idx = np.unravel_index(nodes, grid.shape)
    pts = grid.points(nodes)
    target = eval_U(pts[:, grid.n - 1], pts[:, -1])
    xn = pts[:, grid.n - 1]

    if isinstance(u, ScalarField):
        # keep the search segment inside the box
        if np.any(np.abs(xn) + eps > grid.halfwidth + 1e-12):
            raise ValueError("search segment leaves the grid; shrink the region or eps")

        def g_of(w):
            return _line_interp(u, idx, xn - eps * w)
    else:
        def g_of(w):
            q = pts.copy()
            q[:, grid.n - 1] = xn - eps * w
            return np.asarray(u(q), dtype=float)

    # g(w) is nonincreasing in w when u is nondecreasing along e_n
    g_lo_end = g_of(np.full(len(nodes), -1.0))  # largest value
    g_hi_end = g_of(np.full(len(nodes), 1.0))  # smallest value
    undefined = (target > g_lo_end + 1e-14) | (target < g_hi_end - 1e-14)

    iters = int(np.ceil(np.log2(2.0 / tol))) + 1
    # smallest w with g(w) <= target
    a = np.full(len(nodes), -1.0)
    b = np.full(len(nodes), 1.0)
    for _ in range(iters):
        c = 0.5 * (a + b)
        ok = g_of(c) <= target
        b = np.where(ok, c, b)
        a = np.where(ok, a, c)
    lo = b
    # largest w with g(w) >= target
    a = np.full(len(nodes), -1.0)
    b = np.full(len(nodes), 1.0)
    for _ in range(iters):
        c = 0.5 * (a + b)
        ok = g_of(c) >= target
        a = np.where(ok, c, a)
        b = np.where(ok, b, c)
    hi = a

    nonmono = np.zeros(len(nodes), dtype=bool)
    if isinstance(u, ScalarField):
        cum = _monotone_segments(u)
        n_axis = grid.n - 1
        h = grid.h
        i_lo = np.clip(np.floor((xn - eps + grid.halfwidth) / h + 1e-9).astype(np.int64), 0, grid.N - 1)
        i_hi = np.clip(np.ceil((xn + eps + grid.halfwidth) / h - 1e-9).astype(np.int64), 0, grid.N - 1)
        a_idx = list(idx)
        b_idx = list(idx)
        a_idx[n_axis] = i_lo
        b_idx[n_axis] = i_hi
        nonmono = (cum[tuple(b_idx)] - cum[tuple(a_idx)]) > 0
    lo, hi = np.minimum(lo, hi), np.maximum(lo, hi)
    multivalued = nonmono | ((hi - lo) > 4 * tol)
    lo = np.where(undefined, np.nan, lo)
    hi = np.where(undefined, np.nan, hi)
    return HodographField(grid, eps, nodes, 0.5 * (lo + hi), lo, hi, undefined,
                          multivalued & ~undefined, nonmono)
