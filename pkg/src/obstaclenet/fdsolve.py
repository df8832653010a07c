"""Finite-difference reference solvers on uniform node grids.

Three solvers share the standard 3-point (1-D) / 5-point (2-D) Laplacian
with homogeneous Dirichlet data:

* projected SOR for the obstacle problem,
* damped Newton for the penalized equation ``-Lap u - f = beta_eps(phi - u)``,
* a direct sparse solve for ``-Lap u = f``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numba import njit

from .method2 import PenaltyFamily
from .problems import ObstacleProblem


@dataclass
class FDGrid:
    """Node values on a uniform grid, boundary included; ``u`` is ``(M,)`` or ``(M, M)``."""

    axes: tuple[np.ndarray, ...]
    h: tuple[float, ...]
    u: np.ndarray
    iterations: int = 0
    info: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def nodes(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])

    @property
    def spacing(self) -> float:
        return max(self.h)

    def interior(self) -> np.ndarray:
        mask = np.ones(self.u.shape, dtype=bool)
        for k in range(self.dim):
            idx = [slice(None)] * self.dim
            idx[k] = 0
            mask[tuple(idx)] = False
            idx[k] = -1
            mask[tuple(idx)] = False
        return mask


def node_grid(problem: ObstacleProblem, M: int):
    if M < 3:
        raise ValueError("M must be at least 3")
    axes = tuple(np.linspace(lo, hi, M) for lo, hi in problem.domain.bounds)
    h = tuple((hi - lo) / (M - 1) for lo, hi in problem.domain.bounds)
    empty = FDGrid(axes, h, np.zeros((M,) * problem.dim))
    return empty, empty.nodes


def _sample(fn, nodes, shape):
    return np.ascontiguousarray(fn(nodes).reshape(shape), dtype=float)


def neg_laplacian(values: np.ndarray, h) -> np.ndarray:
    """``-Lap_h`` applied at interior nodes; boundary entries are zero."""
    out = np.zeros_like(values)
    if values.ndim == 1:
        out[1:-1] = (2 * values[1:-1] - values[:-2] - values[2:]) / h[0] ** 2
    else:
        c = values[1:-1, 1:-1]
        out[1:-1, 1:-1] = (
            (2 * c - values[:-2, 1:-1] - values[2:, 1:-1]) / h[0] ** 2
            + (2 * c - values[1:-1, :-2] - values[1:-1, 2:]) / h[1] ** 2
        )
    return out


def obstacle_constant(problem: ObstacleProblem, M: int) -> float:
    """Grid estimate of ``C* = max (-Lap phi - f)^+`` over interior nodes."""
    grid, nodes = node_grid(problem, M)
    phi = _sample(problem.obstacle, nodes, grid.u.shape)
    f = _sample(problem.force, nodes, grid.u.shape)
    r = (neg_laplacian(phi, grid.h) - f)[grid.interior()]
    return float(max(r.max(), 0.0))


# ---------------------------------------------------------------------------
# projected SOR


@njit(cache=True)
def _psor_1d(u, phi, f, h, omega, tol, max_sweeps):
    M = u.shape[0]
    h2 = h * h
    for sweep in range(1, max_sweeps + 1):
        change = 0.0
        for i in range(1, M - 1):
            gs = 0.5 * (u[i - 1] + u[i + 1] + h2 * f[i])
            new = (1.0 - omega) * u[i] + omega * gs
            if new < phi[i]:
                new = phi[i]
            d = abs(new - u[i])
            if d > change:
                change = d
            u[i] = new
        if change <= tol:
            return sweep, change
    return -1, change


@njit(cache=True)
def _psor_2d(u, phi, f, hx, hy, omega, tol, max_sweeps):
    Mx, My = u.shape
    ax, ay = 1.0 / (hx * hx), 1.0 / (hy * hy)
    diag = 2.0 * ax + 2.0 * ay
    for sweep in range(1, max_sweeps + 1):
        change = 0.0
        for i in range(1, Mx - 1):
            for j in range(1, My - 1):
                gs = (ax * (u[i - 1, j] + u[i + 1, j]) + ay * (u[i, j - 1] + u[i, j + 1]) + f[i, j]) / diag
                new = (1.0 - omega) * u[i, j] + omega * gs
                if new < phi[i, j]:
                    new = phi[i, j]
                d = abs(new - u[i, j])
                if d > change:
                    change = d
                u[i, j] = new
        if change <= tol:
            return sweep, change
    return -1, change


def optimal_omega(M: int) -> float:
    """Over-relaxation factor minimizing the SOR spectral radius for the linear problem."""
    return 2.0 / (1.0 + math.sin(math.pi / (M - 1)))


def solve_obstacle_psor(problem: ObstacleProblem, M: int, omega: Optional[float] = None,
                        tol: float = 1e-10, max_sweeps: int = 1_000_000) -> FDGrid:
    """Projected SOR in lexicographic order, starting from ``max(phi, 0)``.

    ``omega=None`` picks :func:`optimal_omega`. Sweeps stop once the largest
    nodal update is at most ``tol``.
    """
    if omega is None:
        omega = optimal_omega(M)
    if not 1.0 < omega < 2.0:
        raise ValueError("omega must lie in (1, 2)")
    if tol <= 0:
        raise ValueError("tol must be positive")
    grid, nodes = node_grid(problem, M)
    shape = grid.u.shape
    phi = _sample(problem.obstacle, nodes, shape)
    f = _sample(problem.force, nodes, shape)
    u = np.where(grid.interior(), np.maximum(phi, 0.0), 0.0)
    if problem.dim == 1:
        sweeps, change = _psor_1d(u, phi, f, grid.h[0], omega, tol, max_sweeps)
    else:
        sweeps, change = _psor_2d(u, phi, f, grid.h[0], grid.h[1], omega, tol, max_sweeps)
    if sweeps < 0:
        raise RuntimeError(f"PSOR did not converge in {max_sweeps} sweeps (last update {change:.3g})")
    grid.u = u
    grid.iterations = sweeps
    grid.info = {"omega": omega, "last_update": change, "phi": phi, "f": f}
    return grid


# ---------------------------------------------------------------------------
# linear and penalized solves


def laplacian_matrix(M: int, h, dim: int) -> sp.csc_matrix:
    """``-Lap_h`` restricted to interior unknowns (Dirichlet rows eliminated)."""
    n = M - 2
    T = [sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]) / hk**2 for hk in h]
    if dim == 1:
        return sp.csc_matrix(T[0])
    I = sp.identity(n)
    return sp.csc_matrix(sp.kron(T[0], I) + sp.kron(I, T[1]))


def _interior_view(values, dim):
    return values[1:-1] if dim == 1 else values[1:-1, 1:-1]


def solve_poisson(problem: ObstacleProblem, M: int) -> FDGrid:
    """Direct solve of ``-Lap_h u = f`` with zero boundary values."""
    grid, nodes = node_grid(problem, M)
    shape = grid.u.shape
    f = _sample(problem.force, nodes, shape)
    A = laplacian_matrix(M, grid.h, problem.dim)
    rhs = _interior_view(f, problem.dim).ravel()
    u = np.zeros(shape)
    _interior_view(u, problem.dim)[...] = spla.spsolve(A, rhs).reshape(_interior_view(u, problem.dim).shape)
    grid.u = u
    grid.iterations = 1
    grid.info = {"residual": float(np.max(np.abs(A @ _interior_view(u, problem.dim).ravel() - rhs)))}
    return grid


def solve_penalized_newton(problem: ObstacleProblem, pen: Optional[PenaltyFamily], M: int,
                           tol: float = 1e-8, max_newton: int = 200) -> FDGrid:
    """Damped Newton for ``-Lap_h u - f - beta_eps(phi - u) = 0``.

    The Jacobian is ``-Lap_h + diag(beta_eps'(phi - u))``; steps are halved
    until the sup-norm residual decreases. Starts from the Poisson solution
    lifted to the obstacle. ``pen=None`` switches the penalty off and
    returns the Poisson solve.
    """
    if pen is None:
        return solve_poisson(problem, M)
    dim = problem.dim
    grid, nodes = node_grid(problem, M)
    shape = grid.u.shape
    phi = _interior_view(_sample(problem.obstacle, nodes, shape), dim).ravel()
    f = _interior_view(_sample(problem.force, nodes, shape), dim).ravel()
    A = laplacian_matrix(M, grid.h, dim)

    def residual(v):
        return A @ v - f - pen.beta(phi - v)

    v = np.maximum(_interior_view(solve_poisson(problem, M).u, dim).ravel(), phi)
    r = residual(v)
    rnorm = float(np.max(np.abs(r)))
    history = [rnorm]
    it = 0
    while rnorm > tol:
        if it >= max_newton:
            raise RuntimeError(f"Newton did not converge in {max_newton} steps (residual {rnorm:.3g})")
        J = sp.csc_matrix(A + sp.diags(pen.beta_prime(phi - v)))
        # beta' >= 0 keeps J a weakly diagonally dominant M-matrix
        diag = J.diagonal()
        off = np.asarray(abs(J).sum(axis=1)).ravel() - np.abs(diag)
        assert np.all(diag >= off * (1 - 1e-12)), "Newton Jacobian lost diagonal dominance"
        d = spla.spsolve(J, -r)
        lam = 1.0
        while True:
            trial = v + lam * d
            rt = residual(trial)
            tnorm = float(np.max(np.abs(rt)))
            if tnorm < rnorm or lam < 1e-12:
                break
            lam *= 0.5
        if not tnorm < rnorm:
            raise RuntimeError(f"Newton stagnated at residual {rnorm:.3g}")
        v, r, rnorm = trial, rt, tnorm
        history.append(rnorm)
        it += 1
    u = np.zeros(shape)
    _interior_view(u, dim)[...] = v.reshape(_interior_view(u, dim).shape)
    grid.u = u
    grid.iterations = it
    grid.info = {"residual_history": history}
    return grid


# ---------------------------------------------------------------------------
# grid diagnostics


def complementarity(sol: FDGrid, problem: ObstacleProblem):
    """Interior arrays ``(-Lap_h u - f, u - phi)``."""
    nodes = sol.nodes
    phi = _sample(problem.obstacle, nodes, sol.u.shape)
    f = _sample(problem.force, nodes, sol.u.shape)
    mask = sol.interior()
    return (neg_laplacian(sol.u, sol.h) - f)[mask], (sol.u - phi)[mask]


def contact_radius(sol: FDGrid, problem: ObstacleProblem, thresh: float = 1e-9) -> float:
    """Largest distance from the origin among interior nodes with ``u - phi <= thresh``."""
    nodes = sol.nodes
    gap = sol.u.ravel() - problem.obstacle(nodes)
    mask = sol.interior().ravel() & (gap <= thresh)
    if not mask.any():
        return 0.0
    return float(np.max(np.linalg.norm(nodes[mask], axis=1)))


def discrete_h1(values: np.ndarray, h, seminorm: bool = False) -> float:
    """Discrete H^1 norm of nodal values: forward differences plus (optionally) the L^2 part."""
    cell = math.prod(h)
    total = 0.0
    for k in range(values.ndim):
        d = np.diff(values, axis=k) / h[k]
        total += cell * float(np.sum(d * d))
    if not seminorm:
        total += cell * float(np.sum(values * values))
    return math.sqrt(total)


def to_csv_rows(sol: FDGrid):
    nodes = sol.nodes
    vals = sol.u.ravel()
    for pt, v in zip(nodes, vals):
        yield [*pt.tolist(), float(v)]
