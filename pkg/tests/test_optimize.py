import math

import numpy as np
import pytest

from obstaclenet.network import NetworkParams, init_params
from obstaclenet.optimize import OptimizerConfig, minimize

P, N = 1, 3
TARGET = np.linspace(-1, 1, P * N + 2 * N + 1)
SCALES = np.linspace(0.5, 2.0, TARGET.size)


def quad_value(th):
    d = th.to_vector() - TARGET
    return 0.5 * float(np.sum(SCALES * d * d))


def quad_grad(th):
    return NetworkParams.from_vector(SCALES * (th.to_vector() - TARGET), P, N)


START = init_params(P, N, seed=0, scale=3.0)


@pytest.mark.parametrize("policy,alpha", [("fixed", 0.4), ("backtracking", 1.0), ("adam", 0.05)])
def test_converges_on_quadratic(policy, alpha):
    cfg = OptimizerConfig(policy=policy, alpha=alpha, max_iters=3000)
    th, tr = minimize(quad_value, quad_grad, START, cfg)
    np.testing.assert_allclose(th.to_vector(), TARGET, atol=1e-4)
    assert tr.final_loss == pytest.approx(quad_value(th))


def test_backtracking_decreases_monotonically():
    cfg = OptimizerConfig(policy="backtracking", alpha=10.0, max_iters=50, history_stride=1)
    _, tr = minimize(quad_value, quad_grad, START, cfg)
    assert all(b <= a for a, b in zip(tr.losses, tr.losses[1:]))


def test_fixed_step_one_iteration():
    cfg = OptimizerConfig(policy="fixed", alpha=0.1, max_iters=1)
    th, tr = minimize(quad_value, quad_grad, START, cfg)
    expect = START.to_vector() - 0.1 * quad_grad(START).to_vector()
    np.testing.assert_allclose(th.to_vector(), expect)
    assert tr.iterations_used == 1


def test_grad_tol_stops_early():
    cfg = OptimizerConfig(policy="fixed", alpha=0.4, max_iters=10_000, grad_tol=1e-6)
    _, tr = minimize(quad_value, quad_grad, START, cfg)
    assert tr.terminated_by == "grad_tol"
    assert tr.iterations_used < 10_000


def test_history_stride():
    cfg = OptimizerConfig(policy="fixed", alpha=0.1, max_iters=25, history_stride=10)
    _, tr = minimize(quad_value, quad_grad, START, cfg)
    # iterations 0, 10, 20, plus the final state at 25
    assert len(tr.losses) == 4 and len(tr.grad_norms) == 4
    assert tr.losses[-1] == tr.final_loss


def test_divergence_returns_best_iterate():
    cfg = OptimizerConfig(policy="fixed", alpha=10.0, max_iters=1000)
    th, tr = minimize(quad_value, quad_grad, START, cfg)
    assert tr.terminated_by == "divergence"
    assert math.isfinite(tr.final_loss)
    assert np.all(np.isfinite(th.to_vector()))
    assert tr.final_loss == pytest.approx(quad_value(th))


def test_nan_objective_is_divergence():
    calls = {"n": 0}

    def value(th):
        calls["n"] += 1
        return math.nan if calls["n"] > 5 else quad_value(th)

    _, tr = minimize(value, quad_grad, START, OptimizerConfig(policy="fixed", alpha=0.1))
    assert tr.terminated_by == "divergence"


def test_backtracking_stalls_on_wrong_gradient():
    cfg = OptimizerConfig(policy="backtracking", alpha=1.0, max_iters=100)
    wrong = lambda th: NetworkParams.from_vector(-quad_grad(th).to_vector(), P, N)
    th, tr = minimize(quad_value, wrong, START, cfg)
    assert tr.terminated_by == "stalled"
    np.testing.assert_array_equal(th.to_vector(), START.to_vector())


def test_value_and_grad_used():
    seen = []

    def vg(th):
        seen.append(1)
        return quad_value(th), quad_grad(th)

    minimize(None, None, START, OptimizerConfig(max_iters=7), value_and_grad=vg)
    assert len(seen) == 8


def test_deterministic():
    cfg = OptimizerConfig(max_iters=200)
    a, _ = minimize(quad_value, quad_grad, START, cfg)
    b, _ = minimize(quad_value, quad_grad, START, cfg)
    np.testing.assert_array_equal(a.to_vector(), b.to_vector())


def test_step_decay():
    cfg = OptimizerConfig(alpha=1.0, max_iters=100, decay=0.1, decay_after=0.5)
    assert cfg.step_size(49) == 1.0 and cfg.step_size(50) == pytest.approx(0.1)


@pytest.mark.parametrize("kw", [{"policy": "sgd"}, {"alpha": 0.0}, {"max_iters": 0},
                                {"grad_tol": -1.0}, {"history_stride": 0}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        OptimizerConfig(**kw)
