"""Neural-network energy minimization for the classical obstacle problem."""

from .method1 import Method1, compute_delta_u, gradient_g1, objective_f1, reconstruct
from .method2 import (
    Method2,
    PenaltyFamily,
    beta_eps,
    big_b_eps,
    gradient_g2,
    objective_f2,
    run_homotopy,
)
from .network import Activation, NetworkParams, forward, grad_theta, grad_theta_of_grad_x, grad_x, init_params
from .optimize import OptimizerConfig, RunTrace, minimize
from .problems import Domain, ObstacleProblem, eval_problem, example_1d, example_2d, solve_rstar
from .quadrature import QuadratureGrid, build_grid, integrate, max_on_interior

__version__ = "0.1.0"
