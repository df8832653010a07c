"""First-order minimization over network parameters."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .network import NetworkParams

POLICIES = ("fixed", "backtracking", "adam")

ARMIJO_C = 1e-4
MAX_HALVINGS = 30
ADAM_BETA1, ADAM_BETA2, ADAM_EPS = 0.9, 0.999, 1e-8


@dataclass(frozen=True)
class OptimizerConfig:
    policy: str = "adam"
    alpha: float = 1e-2
    max_iters: int = 4000
    grad_tol: float = 0.0
    history_stride: int = 10
    # multiply the step by this factor once the final ``decay_after`` fraction is reached
    decay: float = 1.0
    decay_after: float = 1.0

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}; expected one of {POLICIES}")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.grad_tol < 0:
            raise ValueError("grad_tol must be nonnegative")
        if self.history_stride < 1:
            raise ValueError("history_stride must be at least 1")

    def replace(self, **changes) -> "OptimizerConfig":
        return dataclasses.replace(self, **changes)

    def step_size(self, k: int) -> float:
        if self.decay != 1.0 and k >= self.decay_after * self.max_iters:
            return self.alpha * self.decay
        return self.alpha


@dataclass
class RunTrace:
    losses: list[float] = field(default_factory=list)
    grad_norms: list[float] = field(default_factory=list)
    iterations_used: int = 0
    terminated_by: str = "max_iters"
    final_loss: float = math.nan


def minimize(objective: Callable, gradient: Callable, init: NetworkParams, config: OptimizerConfig,
             value_and_grad: Optional[Callable] = None):
    """Run ``theta <- theta - alpha_k * step(G(theta))`` from ``init``.

    ``objective`` and ``gradient`` act on :class:`NetworkParams`; passing a
    fused ``value_and_grad`` avoids evaluating the network twice.

    Policies: ``fixed`` uses ``alpha`` every step; ``backtracking`` starts
    from ``alpha`` and halves until the Armijo condition holds (a step that
    fails after 30 halvings is rejected and the run stops); ``adam``
    rescales the gradient by bias-corrected moment estimates.

    Returns the final parameters and a :class:`RunTrace`. On a non-finite
    loss or gradient the best parameters seen so far are returned and the
    trace is marked ``divergence``.
    """
    p, N = init.p, init.N
    if value_and_grad is None:
        def value_and_grad(th):
            return objective(th), gradient(th)

    def unpack(v):
        return NetworkParams.from_vector(v, p, N)

    def fg(v):
        try:
            with np.errstate(over="raise", invalid="raise"):
                val, g = value_and_grad(unpack(v))
                g = g.to_vector()
        except (FloatingPointError, OverflowError):
            return math.inf, None
        if not (math.isfinite(val) and np.all(np.isfinite(g))):
            return math.inf, None
        return val, g

    def f_only(v):
        try:
            with np.errstate(over="raise", invalid="raise"):
                val = objective(unpack(v))
        except (FloatingPointError, OverflowError):
            return math.inf
        return val if math.isfinite(val) else math.inf

    trace = RunTrace()
    theta = init.to_vector()
    best, best_loss = theta.copy(), math.inf
    m = np.zeros_like(theta)
    s = np.zeros_like(theta)
    loss, g = fg(theta)

    k = 0
    while True:
        if g is None:
            trace.terminated_by = "divergence"
            theta = best
            loss = best_loss
            break
        gnorm = float(np.linalg.norm(g))
        if loss < best_loss:
            best, best_loss = theta.copy(), loss
        if k % config.history_stride == 0:
            trace.losses.append(loss)
            trace.grad_norms.append(gnorm)
        if gnorm <= config.grad_tol:
            trace.terminated_by = "grad_tol"
            break
        if k >= config.max_iters:
            trace.terminated_by = "max_iters"
            break

        alpha = config.step_size(k)
        if config.policy == "fixed":
            theta = theta - alpha * g
        elif config.policy == "adam":
            m = ADAM_BETA1 * m + (1 - ADAM_BETA1) * g
            s = ADAM_BETA2 * s + (1 - ADAM_BETA2) * g * g
            mhat = m / (1 - ADAM_BETA1 ** (k + 1))
            shat = s / (1 - ADAM_BETA2 ** (k + 1))
            theta = theta - alpha * mhat / (np.sqrt(shat) + ADAM_EPS)
        else:
            gg = gnorm * gnorm
            for _ in range(MAX_HALVINGS + 1):
                trial = theta - alpha * g
                if f_only(trial) <= loss - ARMIJO_C * alpha * gg:
                    break
                alpha *= 0.5
            else:
                trace.terminated_by = "stalled"
                break
            theta = trial
        k += 1
        loss, g = fg(theta)

    trace.iterations_used = k
    trace.final_loss = float(loss)
    if trace.losses and (k % config.history_stride != 0 or trace.terminated_by == "divergence"):
        trace.losses.append(float(loss))
        trace.grad_norms.append(float(np.linalg.norm(g)) if g is not None else math.nan)
    return unpack(theta), trace
