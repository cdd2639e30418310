"""
Discrete Dirichlet forms and linear solves.

The form of a node array u with per-cell weights g is

    Q(u) = sum_cells g_c h^{n-1} sum_d mean_{d-edges of c} (du)^2
         = sum_edges W_e (u_i - u_j)^2,

so the energy module's ``cell_dirichlet`` and ``DirichletForm.quad`` agree
exactly. Q(u) = u^T A u with A the weighted graph Laplacian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg, splu

from ..exact import eval_U
from ..grid import Region, ScalarField, SlitGrid, region_nodes

METHODS = ("auto", "cg", "direct")
SEARCHES = ("graph", "cell-flip")


class SolverError(RuntimeError):
    """A linear or free-boundary solve failed; ``residual``/``trace`` carry diagnostics."""

    def __init__(self, msg, residual=None, trace=None):
        super().__init__(msg)
        self.residual = residual
        self.trace = trace


@dataclass(frozen=True)
class SolverSettings:
    """Linear tolerance (relative residual), iteration cap, method and free-boundary search.

    ``method``: "cg" (Jacobi-preconditioned conjugate gradients), "direct"
    (sparse LU) or "auto" (LU in 2-D and on small 3-D problems).
    ``energy_tol``: smallest total-energy decrease accepted as a descent step.
    """

    tolerance: float = 1e-10
    max_iterations: int = 20000
    method: str = "auto"
    search: str = "graph"
    energy_tol: float = 1e-12
    max_moves: int = 10000

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1 or self.max_moves < 0:
            raise ValueError("iteration caps must be positive")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.search not in SEARCHES:
            raise ValueError(f"unknown search {self.search!r}; expected one of {SEARCHES}")
        if self.energy_tol < 0:
            raise ValueError("energy_tol must be non-negative")

    def to_dict(self) -> dict:
        return {"tolerance": self.tolerance, "max_iterations": self.max_iterations,
                "method": self.method, "search": self.search,
                "energy_tol": self.energy_tol, "max_moves": self.max_moves}


@dataclass(frozen=True, eq=False)
class CoefficientField:
    """Positive per-cell weight g for the form int g |grad u|^2."""

    grid: SlitGrid
    values: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.values, dtype=float)
        if g.shape != self.grid.cell_shape:
            raise ValueError(f"weight shape {g.shape} != cell shape {self.grid.cell_shape}")
        if not np.all(np.isfinite(g)) or not np.all(g > 0):
            raise ValueError("coefficient must be finite and strictly positive")
        g = g.copy()
        g.setflags(write=False)
        object.__setattr__(self, "values", g)

    @classmethod
    def from_function(cls, grid: SlitGrid, f) -> "CoefficientField":
        """Evaluate ``f(x_1, ..., x_{n+1})`` at cell centers."""
        vals = np.broadcast_to(np.asarray(f(*grid.cell_coords()), dtype=float), grid.cell_shape)
        return cls(grid, np.array(vals))

    @classmethod
    def ones(cls, grid: SlitGrid) -> "CoefficientField":
        return cls(grid, np.ones(grid.cell_shape))

    @property
    def g_min(self) -> float:
        return float(self.values.min())

    @property
    def g_max(self) -> float:
        return float(self.values.max())

    @property
    def even(self) -> bool:
        return bool(np.array_equal(self.values, self.values[..., ::-1]))

    def ratio_on(self, cells: np.ndarray) -> float:
        """g_max / g_min over a cell mask."""
        v = self.values[cells]
        return float(v.max() / v.min())


def _edge_weights(cell_weight: np.ndarray, h: float, n: int) -> list:
    """Per axis d, the weight of every d-edge: h^{n-1} 2^{-n} sum of adjacent cell weights."""
    dim = cell_weight.ndim
    out = []
    for d in range(dim):
        w = cell_weight
        for e in range(dim):
            if e == d:
                continue
            pad = [(0, 0)] * dim
            pad[e] = (1, 1)
            wp = np.pad(w, pad)
            lo = [slice(None)] * dim
            hi = [slice(None)] * dim
            lo[e] = slice(None, -1)
            hi[e] = slice(1, None)
            w = wp[tuple(lo)] + wp[tuple(hi)]
        out.append(w * (h ** (n - 1) / 2**n))
    return out


class DirichletForm:
    """Weighted graph Laplacian A on a node array, Q(u) = u^T A u."""

    def __init__(self, shape: tuple, h: float, n: int, cell_weight: np.ndarray = None):
        self.shape = tuple(shape)
        self.h = float(h)
        self.n = int(n)
        cshape = tuple(s - 1 for s in self.shape)
        if cell_weight is None:
            cell_weight = np.ones(cshape)
        if cell_weight.shape != cshape:
            raise ValueError("cell weight shape does not match node shape")
        self.edge_w = _edge_weights(np.asarray(cell_weight, float), self.h, self.n)
        self.A = self._assemble()

    def _assemble(self) -> sp.csr_array:
        size = int(np.prod(self.shape))
        idx = np.arange(size).reshape(self.shape)
        rows, cols, vals = [], [], []
        dim = len(self.shape)
        for d in range(dim):
            lo = [slice(None)] * dim
            hi = [slice(None)] * dim
            lo[d] = slice(None, -1)
            hi[d] = slice(1, None)
            i = idx[tuple(lo)].ravel()
            j = idx[tuple(hi)].ravel()
            w = self.edge_w[d].ravel()
            rows += [i, j]
            cols += [j, i]
            vals += [-w, -w]
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        vals = np.concatenate(vals)
        off = sp.coo_array((vals, (rows, cols)), shape=(size, size)).tocsr()
        diag = -np.asarray(off.sum(axis=1)).ravel()
        return (off + sp.diags_array(diag)).tocsr()

    def quad(self, values: np.ndarray) -> float:
        """Q(u) by compensated summation over edges."""
        total = []
        for d, w in enumerate(self.edge_w):
            total.append(math.fsum((w * np.diff(values, axis=d) ** 2).ravel()))
        return math.fsum(total)

    def residual(self, values: np.ndarray) -> np.ndarray:
        """(A u) reshaped to the node array (half the gradient of Q)."""
        return (self.A @ values.ravel()).reshape(self.shape)


def _use_direct(settings: SolverSettings, A: sp.csr_array, dim: int) -> bool:
    if settings.method == "direct":
        return True
    if settings.method == "cg":
        return False
    return dim == 2 or A.shape[0] <= 20000


class LinearSolver:
    """Solver for A_FF x = b; factorizes once for repeated right-hand sides."""

    def __init__(self, A_FF: sp.csr_array, settings: SolverSettings, dim: int):
        self.A = A_FF
        self.settings = settings
        self.direct = _use_direct(settings, A_FF, dim)
        self._lu = None
        if A_FF.shape[0] and self.direct:
            self._lu = splu(sp.csc_array(A_FF), permc_spec="COLAMD")
        else:
            d = A_FF.diagonal()
            self._dinv = 1.0 / d

    def solve(self, b: np.ndarray, x0: np.ndarray = None) -> np.ndarray:
        if self.A.shape[0] == 0:
            return np.zeros(b.shape)
        if b.ndim == 2:
            return np.column_stack([self.solve(b[:, k]) for k in range(b.shape[1])])
        tol = self.settings.tolerance
        bn = float(np.linalg.norm(b))
        if bn == 0:
            return np.zeros_like(b)
        if self._lu is not None:
            x = self._lu.solve(b)
        else:
            M = sp.diags_array(self._dinv)
            x, info = cg(self.A, b, x0=x0, rtol=tol, atol=0.0,
                         maxiter=self.settings.max_iterations, M=M)
            if info != 0:
                res = float(np.linalg.norm(b - self.A @ x)) / bn
                raise SolverError(f"conjugate gradients did not converge (residual {res:.3e})",
                                  residual=res)
        res = float(np.linalg.norm(b - self.A @ x)) / bn
        if not np.isfinite(res) or res > max(10 * tol, 1e-12):
            raise SolverError(f"linear solve residual {res:.3e} above tolerance {tol:.1e}",
                              residual=res)
        return x


def solve_with_fixed(form: DirichletForm, values: np.ndarray, free: np.ndarray,
                     settings: SolverSettings, clip: tuple = None):
    """Minimize Q over the ``free`` nodes with all other nodes held at ``values``.

    Returns (solution array, LinearSolver, free flat indices). ``clip``
    bounds the result (discrete maximum principle, removes roundoff).
    """
    free_idx = np.flatnonzero(free)
    u = np.array(values, dtype=float).ravel()
    A = form.A
    A_FF = A[free_idx][:, free_idx]
    fixed_vals = u.copy()
    fixed_vals[free_idx] = 0.0
    b = -(A[free_idx] @ fixed_vals)
    solver = LinearSolver(A_FF, settings, len(form.shape))
    x = solver.solve(b)
    if clip is not None:
        x = np.clip(x, clip[0], clip[1])
    u[free_idx] = x
    return u.reshape(form.shape), solver, free_idx


def harmonic_replacement(u: ScalarField, region: Region, fixed: Region = None,
                         settings: SolverSettings = None, weight: np.ndarray = None) -> ScalarField:
    """Discrete-harmonic v on ``region`` with v = u on ``fixed``, off the region and on the box boundary.

    Constrained zero nodes are expressed by including them in ``fixed``
    (where u already vanishes). Satisfies the discrete maximum principle.
    """
    settings = settings or SolverSettings()
    g = u.grid
    free = region_nodes(g, region) & ~g.on_box_boundary
    if fixed is not None:
        free &= ~region_nodes(g, fixed)
    bvals = u.values[~free]
    clip = (bvals.min(), bvals.max()) if bvals.size else None
    form = DirichletForm(g.shape, g.h, g.n, weight)
    vals, _, _ = solve_with_fixed(form, u.values, free, settings, clip)
    even = u.even and (weight is None or np.array_equal(weight, weight[..., ::-1])) \
        and np.array_equal(free, free[..., ::-1])
    if even:
        vals = 0.5 * (vals + vals[..., ::-1])
    return ScalarField(g, vals, even)


def linearized_weight(grid: SlitGrid) -> np.ndarray:
    """U_n^2 at cell centers, capped at its largest value on the circle rho = h/2."""
    c = grid.cell_coords()
    t, s = c[-2], c[-1]
    rho = np.hypot(t, s)
    w = (eval_U(t, s) / (2.0 * rho)) ** 2
    w = np.minimum(w, 1.0 / (2.0 * grid.h))
    return np.array(np.broadcast_to(w, grid.cell_shape))


def upper_half(values: np.ndarray, grid: SlitGrid) -> np.ndarray:
    return values[..., grid.mid:]


def mirror_upper(upper: np.ndarray, grid: SlitGrid) -> np.ndarray:
    """Even extension of an upper-half array (x_{n+1} >= 0) to the full grid."""
    return np.concatenate([upper[..., :0:-1], upper], axis=-1)


def linearized_solve(boundary: ScalarField, grid: SlitGrid = None,
                     settings: SolverSettings = None) -> ScalarField:
    """Solve div(U_n^2 grad h) = 0 with h = boundary on the box boundary; h even in x_{n+1}.

    The variational form imposes the natural condition on the slit, so no
    condition is set on P or L. The boundary data is symmetrized first.
    """
    settings = settings or SolverSettings()
    grid = grid or boundary.grid
    if boundary.grid != grid:
        raise ValueError("boundary data lives on a different grid")
    data = 0.5 * (boundary.values + boundary.values[..., ::-1])
    w = linearized_weight(grid)[..., grid.mid:]  # cells with x_{n+1} > 0
    up = upper_half(data, grid)
    form = DirichletForm(up.shape, grid.h, grid.n, w)
    box = upper_half(grid.on_box_boundary, grid).copy()
    # the slit layer of the half problem is interior (natural condition), except on the box sides
    bvals = data[grid.on_box_boundary]
    vals, _, _ = solve_with_fixed(form, up, ~box, settings, (bvals.min(), bvals.max()))
    return ScalarField(grid, mirror_upper(vals, grid), even=True)
