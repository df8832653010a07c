"""Tensor-product integration grids on intervals and rectangles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problems import Domain


@dataclass(frozen=True)
class QuadratureGrid:
    nodes: np.ndarray          # (n, p)
    weights: np.ndarray        # (n,)
    interior_mask: np.ndarray  # (n,) bool
    boundary_nodes: np.ndarray
    h: float
    shape: tuple[int, ...] = ()

    def __len__(self):
        return self.nodes.shape[0]

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]


def boundary_points(domain: Domain, n: int) -> np.ndarray:
    """Points on the boundary: the two endpoints in 1-D, ``4n`` points in 2-D."""
    if domain.dim == 1:
        lo, hi = domain.bounds[0]
        return np.array([[lo], [hi]])
    (x0, x1), (y0, y1) = domain.bounds
    tx = np.linspace(x0, x1, n + 1)[:-1]
    ty = np.linspace(y0, y1, n + 1)[:-1]
    sides = [
        np.column_stack([tx, np.full(n, y0)]),
        np.column_stack([np.full(n, x1), ty]),
        np.column_stack([x1 + x0 - tx, np.full(n, y1)]),
        np.column_stack([np.full(n, x0), y1 + y0 - ty]),
    ]
    return np.vstack(sides)


def build_grid(domain: Domain, nodes_per_axis: int) -> QuadratureGrid:
    """Composite midpoint rule: cell centers, weight = product of cell widths.

    Nodes are ordered with the first axis varying slowest.
    """
    if nodes_per_axis < 3:
        raise ValueError("nodes_per_axis must be at least 3")
    axes, widths = [], []
    for lo, hi in domain.bounds:
        h = (hi - lo) / nodes_per_axis
        axes.append(lo + h * (np.arange(nodes_per_axis) + 0.5))
        widths.append(h)
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.column_stack([m.ravel() for m in mesh])
    weights = np.full(nodes.shape[0], float(np.prod(widths)))
    interior = domain.contains(nodes, closed=False)
    return QuadratureGrid(
        nodes=nodes,
        weights=weights,
        interior_mask=interior,
        boundary_nodes=boundary_points(domain, nodes_per_axis),
        h=max(widths),
        shape=(nodes_per_axis,) * domain.dim,
    )


def build_monte_carlo(domain: Domain, n_samples: int, seed: int = 0) -> QuadratureGrid:
    """Uniform random sample with equal weights ``|Omega| / n``."""
    rng = np.random.default_rng(seed)
    lo = np.array([b[0] for b in domain.bounds])
    hi = np.array([b[1] for b in domain.bounds])
    nodes = lo + (hi - lo) * rng.random((n_samples, domain.dim))
    weights = np.full(n_samples, domain.measure / n_samples)
    per_axis = int(round(n_samples ** (1.0 / domain.dim)))
    return QuadratureGrid(
        nodes=nodes,
        weights=weights,
        interior_mask=domain.contains(nodes, closed=False),
        boundary_nodes=boundary_points(domain, max(per_axis, 3)),
        h=float(np.max(hi - lo)) / max(per_axis, 1),
    )


def integrate(grid: QuadratureGrid, values) -> float:
    values = np.asarray(values, dtype=float)
    if values.shape != grid.weights.shape:
        raise ValueError(f"expected {grid.weights.shape[0]} values, got {values.shape}")
    # np.sum reduces pairwise, so the result does not depend on chunking
    return float(np.sum(grid.weights * values))


def max_on_interior(grid: QuadratureGrid, values):
    """Largest value over interior nodes and the node attaining it (first on ties)."""
    values = np.asarray(values, dtype=float)
    if values.shape != grid.weights.shape:
        raise ValueError(f"expected {grid.weights.shape[0]} values, got {values.shape}")
    idx = np.flatnonzero(grid.interior_mask)
    if idx.size == 0:
        raise ValueError("grid has no interior nodes")
    k = idx[np.argmax(values[idx])]
    return float(values[k]), grid.nodes[k].copy()
