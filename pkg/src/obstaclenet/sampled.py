"""Problem fields sampled once on a quadrature grid."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problems import ObstacleProblem
from .quadrature import QuadratureGrid


@dataclass(frozen=True, eq=False)
class SampledProblem:
    problem: ObstacleProblem
    grid: QuadratureGrid
    x: np.ndarray
    q: np.ndarray
    f: np.ndarray
    phi: np.ndarray
    zeta: np.ndarray
    grad_zeta: np.ndarray
    # phi / zeta on interior nodes, -inf elsewhere
    phi_over_zeta: np.ndarray

    @classmethod
    def build(cls, problem: ObstacleProblem, grid: QuadratureGrid) -> "SampledProblem":
        if grid.dim != problem.dim:
            raise ValueError(f"grid is {grid.dim}-d but problem is {problem.dim}-d")
        x = grid.nodes
        zeta = problem.cutoff.value(x)
        phi = problem.obstacle(x)
        ratio = np.full(x.shape[0], -np.inf)
        scan = grid.interior_mask & (zeta > 0)
        ratio[scan] = phi[scan] / zeta[scan]
        return cls(
            problem=problem,
            grid=grid,
            x=x,
            q=grid.weights,
            f=problem.force(x),
            phi=phi,
            zeta=zeta,
            grad_zeta=problem.cutoff.gradient(x),
            phi_over_zeta=ratio,
        )
