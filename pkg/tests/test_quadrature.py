import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from obstaclenet.problems import Domain
from obstaclenet.quadrature import boundary_points, build_grid, build_monte_carlo, integrate, max_on_interior

SQUARE = Domain(((-2.0, 2.0), (-2.0, 2.0)))
LINE = Domain(((-2.0, 2.0),))


def test_grid_shapes_and_weights():
    g = build_grid(SQUARE, 8)
    assert g.nodes.shape == (64, 2)
    assert g.weights.sum() == pytest.approx(16.0)
    assert g.interior_mask.all()
    assert g.h == pytest.approx(0.5)
    # first axis varies slowest
    assert g.nodes[1, 0] == g.nodes[0, 0] and g.nodes[1, 1] > g.nodes[0, 1]


def test_grid_rejects_coarse():
    with pytest.raises(ValueError):
        build_grid(LINE, 2)


def test_boundary_points():
    assert boundary_points(LINE, 10).tolist() == [[-2.0], [2.0]]
    pts = boundary_points(SQUARE, 25)
    assert pts.shape == (100, 2)
    on_edge = np.isclose(np.abs(pts), 2.0).any(axis=1)
    assert on_edge.all()


def test_midpoint_is_second_order():
    # int_{-2}^{2} cos(x) dx = 2 sin 2
    errs = []
    for n in (50, 100):
        g = build_grid(LINE, n)
        errs.append(abs(integrate(g, np.cos(g.nodes[:, 0])) - 2 * math.sin(2)))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.01)


def test_midpoint_exact_for_linear_2d():
    g = build_grid(SQUARE, 5)
    vals = 3.0 + g.nodes[:, 0] - 2 * g.nodes[:, 1]
    assert integrate(g, vals) == pytest.approx(48.0)


def test_integrate_length_mismatch():
    g = build_grid(LINE, 5)
    with pytest.raises(ValueError):
        integrate(g, np.ones(4))


def test_max_on_interior_first_tie():
    g = build_grid(LINE, 5)
    vals = np.array([0.0, 2.0, 1.0, 2.0, 0.0])
    value, point = max_on_interior(g, vals)
    assert value == 2.0
    assert point[0] == pytest.approx(g.nodes[1, 0])


def test_monte_carlo_seeded():
    a = build_monte_carlo(SQUARE, 1000, seed=4)
    b = build_monte_carlo(SQUARE, 1000, seed=4)
    np.testing.assert_array_equal(a.nodes, b.nodes)
    assert a.weights.sum() == pytest.approx(16.0)
    assert integrate(a, np.ones(1000)) == pytest.approx(16.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(3, 40))
def test_integrate_linear(alpha, beta, n):
    g = build_grid(LINE, n)
    u = np.sin(g.nodes[:, 0])
    v = g.nodes[:, 0] ** 2
    lhs = integrate(g, alpha * u + beta * v)
    rhs = alpha * integrate(g, u) + beta * integrate(g, v)
    assert lhs == pytest.approx(rhs, abs=1e-12)
