"""Penalized scheme with optional homotopy continuation.

The constraint ``u >= phi`` is replaced by the smooth penalty
``B_eps(phi - u)``; the network approximates ``u_eps / zeta``. Homotopy
multiplies the penalty by ``t`` and walks ``t`` from 0 (a linear Poisson
problem) to 1, warm-starting every stage from the previous minimizer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import Activation, NetworkParams, evaluate, forward, init_params, pullback
from .optimize import OptimizerConfig, RunTrace, minimize
from .problems import ObstacleProblem
from .quadrature import QuadratureGrid
from .sampled import SampledProblem

RELU2 = Activation("relu2")


def beta1(s):
    s = np.asarray(s, dtype=float)
    return np.where(s >= 2.0, s - 1.0, np.where(s > 0.0, 0.25 * s * s, 0.0))


def beta1_prime(s):
    s = np.asarray(s, dtype=float)
    return np.where(s >= 2.0, 1.0, np.where(s > 0.0, 0.5 * s, 0.0))


def B1(s):
    """Antiderivative of ``beta1`` vanishing at 0."""
    s = np.asarray(s, dtype=float)
    return np.where(s >= 2.0, 0.5 * s * s - s + 2.0 / 3.0, np.where(s > 0.0, s**3 / 12.0, 0.0))


@dataclass(frozen=True)
class PenaltyFamily:
    eps: float

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")

    def beta(self, s):
        return beta1(np.asarray(s, dtype=float) / self.eps)

    def beta_prime(self, s):
        return beta1_prime(np.asarray(s, dtype=float) / self.eps) / self.eps

    def B(self, s):
        return self.eps * B1(np.asarray(s, dtype=float) / self.eps)


def beta_eps(pen: PenaltyFamily, s):
    out = pen.beta(s)
    return float(out) if np.ndim(out) == 0 else out


def big_b_eps(pen: PenaltyFamily, s):
    out = pen.B(s)
    return float(out) if np.ndim(out) == 0 else out


class Method2:
    """Penalized energy ``F(theta, t)`` and its gradient."""

    def __init__(self, problem: ObstacleProblem, grid: QuadratureGrid, pen: PenaltyFamily,
                 act: Activation = RELU2):
        self.data = SampledProblem.build(problem, grid)
        self.pen = pen
        self.act = act

    def _pieces(self, params, t):
        if not 0.0 <= t <= 1.0:
            raise ValueError(f"homotopy parameter t={t} outside [0, 1]")
        d = self.data
        U, gU = evaluate(params, self.act, d.x)
        w = U * d.zeta
        g = d.zeta[:, None] * gU + U[:, None] * d.grad_zeta
        gap = d.phi - w
        integrand = 0.5 * np.sum(g * g, axis=1) - w * d.f
        if t != 0.0:
            integrand = integrand + t * self.pen.B(gap)
        if not np.all(np.isfinite(integrand)):
            raise FloatingPointError("non-finite integrand in F2")
        return integrand, g, gap

    def value(self, params: NetworkParams, t: float = 1.0) -> float:
        integrand, _, _ = self._pieces(params, t)
        return float(np.sum(self.data.q * integrand))

    def value_and_grad(self, params: NetworkParams, t: float = 1.0):
        d = self.data
        integrand, g, gap = self._pieces(params, t)
        src = d.f
        if t != 0.0:
            src = src + t * self.pen.beta(gap)
        c = d.q * (np.sum(g * d.grad_zeta, axis=1) - d.zeta * src)
        a = (d.q * d.zeta)[:, None] * g
        return float(np.sum(d.q * integrand)), pullback(params, self.act, d.x, c, a)

    def gradient(self, params: NetworkParams, t: float = 1.0) -> NetworkParams:
        return self.value_and_grad(params, t)[1]

    def solution(self, params: NetworkParams):
        problem, act = self.data.problem, self.act

        def u(x):
            x = np.atleast_2d(x)
            return forward(params, act, x) * problem.cutoff.value(x)

        return u

    def solution_gradient(self, params: NetworkParams):
        problem, act = self.data.problem, self.act

        def du(x):
            x = np.atleast_2d(x)
            U, gU = evaluate(params, act, x)
            return problem.cutoff.value(x)[:, None] * gU + U[:, None] * problem.cutoff.gradient(x)

        return du


def objective_f2(params, problem, grid, pen, t: float = 1.0, act: Activation = RELU2) -> float:
    return Method2(problem, grid, pen, act).value(params, t)


def gradient_g2(params, problem, grid, pen, t: float = 1.0, act: Activation = RELU2):
    return Method2(problem, grid, pen, act).gradient(params, t)


@dataclass
class Method2Result:
    params: NetworkParams
    stage_t: list[float] = field(default_factory=list)
    stage_losses: list[float] = field(default_factory=list)
    traces: list[RunTrace] = field(default_factory=list)

    @property
    def diverged(self) -> bool:
        return any(tr.terminated_by == "divergence" for tr in self.traces)


def run_homotopy(problem, grid, pen, steps: int, config: OptimizerConfig, init: NetworkParams,
                 act: Activation = RELU2, stage_iters: int | None = None) -> Method2Result:
    """Minimize ``F(., 0)``, then ``F(., i/steps)`` for ``i = 1..steps``, warm-started.

    ``steps = 0`` runs a single cold stage at ``t = 1``. Each stage gets
    ``stage_iters`` iterations, by default an equal share of
    ``config.max_iters``. Stops early, flagging the trace, if a stage diverges.
    """
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    model = Method2(problem, grid, pen, act)
    ts = [1.0] if steps == 0 else [i / steps for i in range(steps + 1)]
    if stage_iters is None:
        stage_iters = max(1, config.max_iters // len(ts))
    stage_cfg = config.replace(max_iters=stage_iters)
    result = Method2Result(init.copy())
    theta = init
    for t in ts:
        theta, trace = minimize(
            lambda th, t=t: model.value(th, t),
            lambda th, t=t: model.gradient(th, t),
            theta,
            stage_cfg,
            value_and_grad=lambda th, t=t: model.value_and_grad(th, t),
        )
        result.stage_t.append(t)
        result.stage_losses.append(trace.final_loss)
        result.traces.append(trace)
        if trace.terminated_by == "divergence":
            break
    result.params = theta
    return result


def solve_method2(problem, grid, pen, config: OptimizerConfig, seed: int, N: int,
                  act: Activation = RELU2, init_scale: float = 1.0, steps: int = 0) -> Method2Result:
    init = init_params(problem.dim, N, seed, init_scale)
    return run_homotopy(problem, grid, pen, steps, config, init, act)
