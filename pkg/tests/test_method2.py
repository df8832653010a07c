import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from obstaclenet.experiment import finite_difference_gradient, relative_error
from obstaclenet.method2 import (
    B1,
    Method2,
    PenaltyFamily,
    beta1,
    beta1_prime,
    beta_eps,
    big_b_eps,
    gradient_g2,
    objective_f2,
    run_homotopy,
    solve_method2,
)
from obstaclenet.network import Activation, init_params
from obstaclenet.optimize import OptimizerConfig
from obstaclenet.problems import example_1d, example_2d
from obstaclenet.quadrature import build_grid

P1 = example_1d()
G1 = build_grid(P1.domain, 401)
P2 = example_2d()
G2 = build_grid(P2.domain, 41)


def test_beta1_pieces():
    np.testing.assert_allclose(beta1([-1.0, 0.0, 1.0, 2.0, 3.0]), [0, 0, 0.25, 1.0, 2.0])
    np.testing.assert_allclose(beta1_prime([-1.0, 1.0, 2.0, 5.0]), [0, 0.5, 1.0, 1.0])
    np.testing.assert_allclose(B1([-1.0, 0.0, 1.0, 2.0, 3.0]), [0, 0, 1 / 12, 2 / 3, 4.5 - 3 + 2 / 3])


def test_penalty_scaling():
    pen = PenaltyFamily(0.1)
    assert big_b_eps(pen, 0.05) == pytest.approx(0.1 * 0.5**3 / 12)
    assert big_b_eps(pen, 0.05) == pytest.approx(1.0417e-3, rel=1e-4)
    assert beta_eps(pen, 0.3) == pytest.approx(2.0)
    assert beta_eps(pen, -0.3) == 0.0
    assert pen.beta_prime(0.1) == pytest.approx(5.0)
    with pytest.raises(ValueError):
        PenaltyFamily(0.0)


@settings(max_examples=60, deadline=None)
@given(st.floats(-5, 5), st.sampled_from([1e-1, 1e-2, 1e-3]))
def test_B_is_antiderivative_of_beta(s, eps):
    pen = PenaltyFamily(eps)
    h = 1e-7 * max(eps, 1e-3)
    fd = (big_b_eps(pen, s + h) - big_b_eps(pen, s - h)) / (2 * h)
    assert fd == pytest.approx(beta_eps(pen, s), rel=1e-5, abs=1e-6)


@settings(max_examples=60, deadline=None)
@given(st.floats(-5, 5), st.floats(0, 3))
def test_beta_monotone_and_convex_B(s, d):
    pen = PenaltyFamily(0.01)
    assert beta_eps(pen, s + d) >= beta_eps(pen, s)
    assert big_b_eps(pen, s) >= 0.0


def test_poisson_stage_quadratic_in_b2():
    # U = b2, t = 0, f = 0: F = b2^2 int 1/2 (x/2)^2 = (2/3) b2^2
    th = init_params(1, 4, seed=0)
    th.W2[:] = 0.0
    th.b2 = np.float64(1.5)
    pen = PenaltyFamily(0.01)
    assert objective_f2(th, P1, G1, pen, t=0.0) == pytest.approx(2 / 3 * 1.5**2, rel=1e-4)
    assert gradient_g2(th, P1, G1, pen, t=0.0).b2 == pytest.approx(4 / 3 * 1.5, rel=1e-4)


def test_penalty_term_added_with_t():
    pen = PenaltyFamily(0.1)
    model = Method2(P1, G1, pen)
    th = init_params(1, 5, seed=1)
    base, full = model.value(th, 0.0), model.value(th, 1.0)
    d = model.data
    penalty = float(np.sum(d.q * pen.B(d.phi - model.solution(th)(d.x))))
    assert model.value(th, 0.5) == pytest.approx(base + 0.5 * penalty)
    assert full == pytest.approx(base + penalty)


@pytest.mark.parametrize("kind", ["relu2", "sigmoid", "tanh"])
@pytest.mark.parametrize("problem,grid", [(P1, G1), (P2, G2)])
@pytest.mark.parametrize("t", [0.0, 0.5, 1.0])
def test_gradient_matches_differences(kind, problem, grid, t):
    model = Method2(problem, grid, PenaltyFamily(0.1), Activation(kind))
    th = init_params(problem.dim, 5, seed=6)
    fd = finite_difference_gradient(lambda q: model.value(q, t), th)
    assert relative_error(model.gradient(th, t).to_vector(), fd) < 1e-5


def test_t_out_of_range():
    model = Method2(P1, G1, PenaltyFamily(0.1))
    with pytest.raises(ValueError):
        model.value(init_params(1, 3, seed=0), 1.5)


def test_solution_vanishes_on_boundary():
    model = Method2(P2, G2, PenaltyFamily(0.1))
    th = init_params(2, 6, seed=1)
    np.testing.assert_allclose(model.solution(th)(G2.boundary_nodes), 0.0, atol=1e-14)


def test_homotopy_stages_and_budget():
    cfg = OptimizerConfig(max_iters=220, history_stride=5)
    init = init_params(1, 6, seed=0)
    res = run_homotopy(P1, G1, PenaltyFamily(0.01), 10, cfg, init)
    assert res.stage_t == pytest.approx([i / 10 for i in range(11)])
    assert [tr.iterations_used for tr in res.traces] == [20] * 11
    assert len(res.stage_losses) == 11 and not res.diverged
    cold = run_homotopy(P1, G1, PenaltyFamily(0.01), 0, cfg, init)
    assert cold.stage_t == [1.0] and cold.traces[0].iterations_used == 220
    with pytest.raises(ValueError):
        run_homotopy(P1, G1, PenaltyFamily(0.01), -1, cfg, init)


def test_homotopy_lowers_first_stage_energy():
    # with f = 0 the t = 0 stage is a pure Dirichlet energy: nonnegative, and it should shrink
    cfg = OptimizerConfig(max_iters=400)
    res = solve_method2(P1, G1, PenaltyFamily(0.01), cfg, seed=3, N=8, steps=1)
    assert res.stage_t == [0.0, 1.0]
    assert 0.0 <= res.stage_losses[0] < res.traces[0].losses[0]
