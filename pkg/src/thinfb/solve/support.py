"""
Support-constrained minimization and free-boundary descent.

A configuration is a set D of *designated* positive slit cells. Slit nodes
adjacent to a cell of D are free; the remaining active slit nodes are held
at zero. The energy of a configuration is

    E = q * Q(u_D) + Lambda * h^n * #(slit cells with every corner positive),

where u_D minimizes the Dirichlet form under those constraints and q = 2
when the solve runs on the upper half grid of an even problem.

Trial moves change the free node set by a set K that is either only added
or only removed; the exact change of Q is a Schur complement:

* constraining K (currently free) to 0 raises Q by  u_K^T (A^{-1})_{KK}^{-1} u_K,
* freeing K (currently 0) lowers Q by  r_K^T S^{-1} r_K,
  with r = (A u)_K and S = A_KK - A_KF A_FF^{-1} A_FK,

so one factorization per accepted move and |K| back-substitutions per trial.
The graph search moves one column cut per step and doubles the jump while
the exact decrease keeps improving, so long moves cost O(log) factorizations.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from ..energy import LAMBDA_DEFAULT
from ..grid import Ball, ScalarField, SlitGrid, SlitMask, _corner_all
from .linear import (CoefficientField, DirichletForm, SolverError, SolverSettings,
                     mirror_upper, solve_with_fixed)

log = logging.getLogger(__name__)
# longest cut jump (in distinct slit states) tried by the graph line search
_MAX_JUMP = 64


class InfeasibleConstraintError(ValueError):
    """Boundary data contradicts the requested support."""


def touches(cells: np.ndarray) -> np.ndarray:
    """Nodes (one more entry per axis) that are a corner of at least one True cell."""
    shape = tuple(s + 1 for s in cells.shape)
    out = np.zeros(shape, dtype=bool)
    for corner in itertools.product((0, 1), repeat=cells.ndim):
        sl = tuple(slice(c, c + s) for c, s in zip(corner, cells.shape))
        out[sl] |= cells
    return out


@dataclass
class DescentResult:
    field: ScalarField
    mask: SlitMask
    trace: list
    moves: int
    designated: np.ndarray = None


@dataclass
class _State:
    D: np.ndarray
    phi: np.ndarray
    u: np.ndarray
    solver: object
    free_idx: np.ndarray
    pos: np.ndarray
    energy: float
    k: np.ndarray = None


class _SupportProblem:
    """Dirichlet problem on a node array whose slit layer is ``layer`` on the last axis."""

    def __init__(self, grid: SlitGrid, values: np.ndarray, fixed: np.ndarray, layer: int,
                 q_factor: float, lam: float, settings: SolverSettings,
                 weight: np.ndarray = None):
        self.grid = grid
        self.layer = layer
        self.q = q_factor
        self.lam = float(lam)
        self.settings = settings
        self.fixed = fixed
        self.form = DirichletForm(values.shape, grid.h, grid.n, weight)
        self.active = ~fixed[..., layer]
        self.values = np.array(values, dtype=float)
        self.values[..., layer][self.active] = 0.0
        self.slit_pos_fixed = fixed[..., layer] & (self.values[..., layer] > 0)
        bvals = self.values[fixed]
        self.clip = (min(float(bvals.min()), 0.0), max(float(bvals.max()), 0.0)) \
            if bvals.size else None
        self.cell_area = grid.h**grid.n
        # slit cells with at least one active corner; only these can change
        self.relevant = ~_corner_all(~self.active)
        # cells that can be positive at all; a designated cell with a corner held at zero
        # would free its other corners without ever paying for the cell
        self.realizable = _corner_all(self.active | self.slit_pos_fixed)

    # ------------------------------------------------------------ helpers
    def phi_of(self, D: np.ndarray) -> np.ndarray:
        return self.active & touches(D & self.realizable)

    def count(self, phi: np.ndarray) -> int:
        return int(np.count_nonzero(_corner_all(phi | self.slit_pos_fixed)))

    def slit_flat(self, slit_mask: np.ndarray) -> np.ndarray:
        idx = np.nonzero(slit_mask)
        full = idx + (np.full(len(idx[0]), self.layer),)
        return np.ravel_multi_index(full, self.values.shape)

    def solve(self, D: np.ndarray, phi: np.ndarray = None) -> _State:
        phi = self.phi_of(D) if phi is None else phi
        free = ~self.fixed
        free[..., self.layer] = phi
        vals = self.values.copy()
        u, solver, free_idx = solve_with_fixed(self.form, vals, free, self.settings, self.clip)
        pos = np.full(u.size, -1, dtype=np.int64)
        pos[free_idx] = np.arange(len(free_idx))
        st = _State(D, phi, u, solver, free_idx, pos, 0.0)
        st.energy = self.realized_energy(u)
        return st

    def realized_energy(self, u: np.ndarray) -> float:
        cells = _corner_all(u[..., self.layer] > 0)
        return self.q * self.form.quad(u) + self.lam * self.cell_area * np.count_nonzero(cells)

    def delta(self, st: _State, phi_new: np.ndarray) -> float:
        """Exact change of E when the free slit set changes from st.phi to phi_new."""
        add = phi_new & ~st.phi
        rem = st.phi & ~phi_new
        if add.any() and rem.any():
            raise ValueError("a move must only add or only remove free nodes")
        d_cells = self.count(phi_new) - self.count(st.phi)
        A = self.form.A
        if rem.any():
            K = self.slit_flat(rem)
            k = st.pos[K]
            E = np.zeros((len(st.free_idx), len(K)))
            E[k, np.arange(len(K))] = 1.0
            X = st.solver.solve(E)
            B = X[k, :]
            uK = st.u.ravel()[K]
            dQ = float(uK @ np.linalg.solve(B, uK))
        elif add.any():
            K = self.slit_flat(add)
            rows = A[K]
            r = rows @ st.u.ravel()
            A_KF = rows[:, st.free_idx].toarray()
            Y = st.solver.solve(A_KF.T)
            S = rows[:, K].toarray() - A_KF @ Y
            dQ = -float(r @ np.linalg.solve(S, r))
        else:
            dQ = 0.0
        return self.q * dQ + self.lam * self.cell_area * d_cells

    # ----------------------------------------------------------- searches
    def _graph_bounds(self):
        """Per column of slit cells, the range of cut indices touching relevant cells."""
        rel = self.relevant
        ncol = rel.shape[-1]
        any_rel = rel.any(axis=-1)
        first = np.where(any_rel, np.argmax(rel, axis=-1), 0)
        last = np.where(any_rel, ncol - 1 - np.argmax(rel[..., ::-1], axis=-1), -1)
        return first, last + 1, any_rel

    def _graph_D(self, k: np.ndarray) -> np.ndarray:
        j = np.arange(self.relevant.shape[-1])
        return j >= k[..., None]

    def _graph_k0(self, D0: np.ndarray) -> np.ndarray:
        lo, hi, _ = self._graph_bounds()
        rel = self.relevant
        ncol = rel.shape[-1]
        # cut above the last relevant non-designated cell
        bad = rel & ~D0
        any_bad = bad.any(axis=-1)
        last_bad = ncol - 1 - np.argmax(bad[..., ::-1], axis=-1)
        return np.where(any_bad, last_bad + 1, lo).astype(np.int64)

    def _graph_states(self, st: _State, col, step):
        """Successive distinct (D, phi, k) reached by moving one column cut in one direction."""
        lo, hi, _ = self._graph_bounds()
        k = st.k.copy()
        phi_prev = st.phi
        while True:
            k[col] += step
            if k[col] < lo[col] or k[col] > hi[col]:
                return
            D = self._graph_D(k)
            phi = self.phi_of(D)
            if not np.array_equal(phi, phi_prev):
                phi_prev = phi
                yield D, phi, k.copy()

    def graph_candidates(self, st: _State):
        """Per column and direction: the unit move, then jumps of 2, 4, ... states while the
        exact energy change keeps improving."""
        _, _, any_rel = self._graph_bounds()
        thresh = -max(self.settings.energy_tol, 1e-13 * abs(st.energy))
        for col in np.ndindex(st.k.shape):
            if not any_rel[col]:
                continue
            for step in (-1, 1):
                last = None
                nxt = 1
                for i, (D, phi, k) in enumerate(self._graph_states(st, col, step), start=1):
                    if i > _MAX_JUMP:
                        break
                    if i != nxt:
                        continue
                    dE = self.delta(st, phi)
                    if last is not None and dE >= last:
                        break
                    yield (col, step, i), D, phi, k, dE
                    if dE >= thresh:
                        break
                    last = dE
                    nxt *= 2

    def flip_candidates(self, st: _State):
        for c in zip(*np.nonzero(self.relevant)):
            D = st.D.copy()
            D[c] = not D[c]
            phi = self.phi_of(D)
            if not np.array_equal(phi, st.phi):
                yield c, D, phi, None, self.delta(st, phi)

    def descend(self, D0: np.ndarray) -> tuple:
        s = self.settings
        if s.search == "graph":
            k = self._graph_k0(D0)
            D = self._graph_D(k)
        else:
            k = None
            D = D0.copy()
        st = self.solve(D)
        st.k = k
        trace = [st.energy]
        moves = 0
        while True:
            cands = self.graph_candidates(st) if s.search == "graph" else self.flip_candidates(st)
            best = None
            thresh = -max(s.energy_tol, 1e-13 * abs(st.energy))
            for key, D, phi, kk, dE in cands:
                if dE < thresh and (best is None or dE < best[0]):
                    best = (dE, D, phi, kk)
            if best is None:
                break
            if moves >= s.max_moves:
                raise SolverError(f"free-boundary descent exceeded {s.max_moves} moves",
                                  trace=trace)
            dE, D, phi, kk = best
            prev = st.energy
            st = self.solve(D, phi)
            st.k = kk
            moves += 1
            trace.append(st.energy)
            log.debug("move %d: predicted dE %.3e, realized %.3e", moves, dE, st.energy - prev)
            if st.energy > prev + 1e-9 * max(1.0, abs(prev)):
                raise SolverError("oscillating descent: total energy increased", trace=trace)
        return st, trace, moves


def _half_problem(boundary: ScalarField, lam: float, settings: SolverSettings,
                  weight: np.ndarray = None, fixed_full: np.ndarray = None) -> _SupportProblem:
    g = boundary.grid
    if not boundary.even:
        if not np.array_equal(boundary.values, boundary.values[..., ::-1]):
            raise InfeasibleConstraintError("boundary data must be even in x_{n+1}")
    if weight is not None and not np.array_equal(weight, weight[..., ::-1]):
        raise ValueError("coefficient field must be even in x_{n+1}")
    fixed = g.on_box_boundary if fixed_full is None else fixed_full | g.on_box_boundary
    w = None if weight is None else weight[..., g.mid:]
    return _SupportProblem(g, boundary.values[..., g.mid:], np.array(fixed[..., g.mid:]),
                           0, 2.0, lam, settings, w)


def _full_problem(u: ScalarField, lam, settings, fixed, weight=None) -> _SupportProblem:
    g = u.grid
    return _SupportProblem(g, u.values, np.array(fixed | g.on_box_boundary), g.mid, 1.0,
                           lam, settings, weight)


def _to_field(prob: _SupportProblem, u: np.ndarray) -> ScalarField:
    g = prob.grid
    if prob.layer == 0:
        return ScalarField(g, mirror_upper(u, g), even=True)
    return ScalarField(g, u, even=False)


def minimize_given_support(boundary: ScalarField, mask: SlitMask, lam: float = LAMBDA_DEFAULT,
                           settings: SolverSettings = None, weight: np.ndarray = None) -> ScalarField:
    """Energy minimizer with u = boundary on the box boundary and u = 0 on the Z-nodes of ``mask``.

    Z-nodes are the interior slit nodes not adjacent to a positive cell. The
    result is even in x_{n+1} and exactly zero on Z. The support is infeasible
    when a positive cell has a box-boundary corner with data <= 0, or a zero
    cell has only box-boundary corners, all with positive data.
    """
    settings = settings or SolverSettings()
    g = boundary.grid
    if mask.grid != g:
        raise ValueError("mask belongs to a different grid")
    prob = _half_problem(boundary, lam, settings, weight)
    box = g.slit_on_box_boundary
    box_pos = box & (boundary.slit > 0)
    bad_pos = mask.positive & ~_corner_all(~(box & ~box_pos))
    bad_zero = ~mask.positive & _corner_all(box_pos)
    if bad_pos.any() or bad_zero.any():
        raise InfeasibleConstraintError(
            f"boundary data contradicts the support on {int(bad_pos.sum() + bad_zero.sum())} "
            "box-adjacent cells")
    st = prob.solve(np.asarray(mask.positive))
    return _to_field(prob, st.u)


def _initial_cells(guess: ScalarField) -> np.ndarray:
    return np.array(SlitMask.from_field(guess).positive)


def minimize_energy(boundary: ScalarField, lam: float = LAMBDA_DEFAULT,
                    settings: SolverSettings = None, initial: SlitMask = None,
                    weight: np.ndarray = None, return_trace: bool = False):
    """Local minimizer of the energy with u = boundary on the box boundary.

    Interior values of ``boundary`` seed the initial positivity set unless
    ``initial`` is given. Returns (field, mask), plus the energy trace when
    ``return_trace`` is set.
    """
    settings = settings or SolverSettings()
    if np.any(boundary.values[boundary.grid.on_box_boundary] < 0):
        raise ValueError("boundary trace must be non-negative")
    prob = _half_problem(boundary, lam, settings, weight)
    D0 = np.array(initial.positive) if initial is not None else _initial_cells(boundary)
    st, trace, moves = prob.descend(D0)
    u = _to_field(prob, st.u)
    res = DescentResult(u, SlitMask.from_field(u), trace, moves, st.D)
    if return_trace:
        return res
    return res.field, res.mask


def ball_free_nodes(grid: SlitGrid, ball: Ball) -> np.ndarray:
    """Nodes all of whose adjacent cells have centers inside the ball."""
    return ~touches(~ball.cell_mask(grid)) & ~grid.on_box_boundary


def ball_competitor(u: ScalarField, ball: Ball, lam: float = LAMBDA_DEFAULT,
                    settings: SolverSettings = None) -> ScalarField:
    """Best competitor found by descent among fields equal to u outside the ball."""
    settings = settings or SolverSettings()
    g = u.grid
    fixed = ~ball_free_nodes(g, ball)
    if u.even:
        prob = _half_problem(u, lam, settings, fixed_full=fixed)
    else:
        prob = _full_problem(u, lam, settings, fixed)
    D0 = _initial_cells(u)
    st, _, _ = prob.descend(D0)
    return _to_field(prob, st.u)


def generate_almost_minimizer(g: CoefficientField, boundary: ScalarField,
                              lam: float = LAMBDA_DEFAULT, settings: SolverSettings = None,
                              params=None, return_trace: bool = False):
    """Minimizer of int g |grad u|^2 + Lambda * thin with the given boundary data.

    With ``params`` (AlmostMinParams) the coefficient must satisfy
    ||g - 1||_inf <= kappa. Returns the field (or the DescentResult).
    """
    if g.grid != boundary.grid:
        raise ValueError("coefficient and boundary live on different grids")
    if params is not None and float(np.max(np.abs(g.values - 1.0))) > params.kappa + 1e-12:
        raise ValueError(f"||g - 1|| exceeds kappa = {params.kappa}")
    if not g.even:
        raise ValueError("coefficient field must be even in x_{n+1}")
    res = minimize_energy(boundary, lam, settings, weight=np.asarray(g.values),
                          return_trace=True)
    return res if return_trace else res.field
