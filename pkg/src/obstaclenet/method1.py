"""Feasibility-shift scheme.

The network output is lifted by the smallest constant ``delta`` that makes
``(U + delta) * zeta`` lie above the obstacle on the scan nodes, and the
Dirichlet energy of that lifted function is minimized. The boundary
condition holds exactly through ``zeta``; there is no penalty term.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .network import Activation, NetworkParams, evaluate, forward, grad_theta, pullback
from .problems import ObstacleProblem
from .quadrature import QuadratureGrid
from .sampled import SampledProblem

RELU2 = Activation("relu2")


@dataclass
class Method1State:
    params: NetworkParams
    delta_u: float
    argmax_point: Optional[np.ndarray]
    grid: QuadratureGrid


class Method1:
    """Energy ``F1`` and its gradient for a fixed problem, grid and activation.

    With ``freeze_delta`` the gradient drops the envelope contribution of
    the shift (the shift is then treated as a constant).
    """

    def __init__(self, problem: ObstacleProblem, grid: QuadratureGrid,
                 act: Activation = RELU2, freeze_delta: bool = False):
        self.data = SampledProblem.build(problem, grid)
        self.act = act
        self.freeze_delta = freeze_delta

    def _shift(self, U):
        if not np.all(np.isfinite(U)):
            raise FloatingPointError("non-finite network output")
        gap = self.data.phi_over_zeta - U
        k = int(np.argmax(gap))
        if not np.isfinite(gap[k]):
            raise ValueError("grid has no interior scan nodes")
        if gap[k] > 0:
            return float(gap[k]), k
        return 0.0, None

    def delta_u(self, params: NetworkParams):
        U = forward(params, self.act, self.data.x)
        delta, k = self._shift(U)
        return delta, (None if k is None else self.data.x[k].copy())

    def state(self, params: NetworkParams) -> Method1State:
        delta, pt = self.delta_u(params)
        return Method1State(params, delta, pt, self.data.grid)

    def _pieces(self, params):
        d = self.data
        U, gU = evaluate(params, self.act, d.x)
        delta, k = self._shift(U)
        lifted = U + delta
        w = lifted * d.zeta
        g = d.zeta[:, None] * gU + lifted[:, None] * d.grad_zeta
        integrand = 0.5 * np.sum(g * g, axis=1) - w * d.f
        if not np.all(np.isfinite(integrand)):
            raise FloatingPointError("non-finite integrand in F1")
        return integrand, g, k

    def value(self, params: NetworkParams) -> float:
        integrand, _, _ = self._pieces(params)
        return float(np.sum(self.data.q * integrand))

    def value_and_grad(self, params: NetworkParams):
        d = self.data
        integrand, g, k = self._pieces(params)
        c = d.q * (np.sum(g * d.grad_zeta, axis=1) - d.zeta * d.f)
        a = (d.q * d.zeta)[:, None] * g
        grad = pullback(params, self.act, d.x, c, a)
        if k is not None and not self.freeze_delta:
            # d(delta)/d(theta) = -dU(x*)/d(theta); it multiplies sum_i c_i
            gx = grad_theta(params, self.act, d.x[k])
            s = float(np.sum(c))
            grad = NetworkParams(grad.W1 - s * gx.W1, grad.b1 - s * gx.b1,
                                 grad.W2 - s * gx.W2, np.float64(grad.b2 - s * gx.b2))
        return float(np.sum(d.q * integrand)), grad

    def gradient(self, params: NetworkParams) -> NetworkParams:
        return self.value_and_grad(params)[1]

    def solution(self, params: NetworkParams):
        """Callable ``x -> (U(x) + delta) zeta(x)`` with the shift frozen at ``params``."""
        delta, _ = self.delta_u(params)
        problem, act = self.data.problem, self.act

        def u(x):
            return reconstruct(params, delta, problem, x, act)

        return u

    def solution_gradient(self, params: NetworkParams):
        delta, _ = self.delta_u(params)
        problem, act = self.data.problem, self.act

        def du(x):
            x = np.atleast_2d(x)
            U, gU = evaluate(params, act, x)
            zeta = problem.cutoff.value(x)
            return zeta[:, None] * gU + (U + delta)[:, None] * problem.cutoff.gradient(x)

        return du


def compute_delta_u(params, problem, grid, act: Activation = RELU2):
    return Method1(problem, grid, act).delta_u(params)


def reconstruct(params, delta_u, problem, x, act: Activation = RELU2):
    """``(U(x) + delta_u) * zeta(x)``; scalar for a single point."""
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    out = (forward(params, act, pts) + delta_u) * problem.cutoff.value(pts)
    return float(out[0]) if single else out


def objective_f1(params, problem, grid, act: Activation = RELU2) -> float:
    return Method1(problem, grid, act).value(params)


def gradient_g1(params, problem, grid, act: Activation = RELU2, freeze_delta: bool = False):
    return Method1(problem, grid, act, freeze_delta).gradient(params)
