"""Acceptance criteria, each checked at its stated tolerance.

Every test records a one-line verdict (printed, and repeated in the
terminal summary) before asserting.
"""

import math
import statistics
from functools import lru_cache

import numpy as np
import pytest

from obstaclenet.experiment import ExperimentConfig, gradcheck, replay, run_many
from obstaclenet.fdsolve import (
    contact_radius,
    discrete_h1,
    obstacle_constant,
    solve_obstacle_psor,
    solve_penalized_newton,
)
from obstaclenet.method1 import Method1
from obstaclenet.method2 import PenaltyFamily
from obstaclenet.metrics import rate_eps, rate_n
from obstaclenet.network import NetworkParams, init_params
from obstaclenet.problems import example_1d, example_2d
from obstaclenet.quadrature import build_grid

pytestmark = pytest.mark.slow

SEEDS = 10
# J[u] for the 1-D example: sqrt(3) (4 - 2 sqrt(3))^2 + (4/3)(2 - sqrt(3))^3
J_EXACT_1D = math.sqrt(3) * (4 - 2 * math.sqrt(3)) ** 2 + 4 / 3 * (2 - math.sqrt(3)) ** 3
# midpoint-rule and Adam-noise allowance added to the 2 eps (C* + 1) homotopy bound
QUADRATURE_ALLOWANCE = 1e-3


@lru_cache(maxsize=None)
def _runs(config: ExperimentConfig):
    outs = run_many([config.replace(runs=SEEDS, seed=0)])
    assert all(o.record.status == "ok" for o in outs), [o.record.status for o in outs]
    return tuple(outs)


def _linf(config):
    return [o.record.errors.linf for o in _runs(config)]


METHOD1 = ExperimentConfig(method=1, N=20)
METHOD2 = ExperimentConfig(method=2, N=20)


def test_c01_gradient_exactness(verdict):
    results = []
    for problem, nodes in (("example1d", 201), ("example2d", 41)):
        for method in (1, 2):
            cfg = ExperimentConfig(problem=problem, method=method, activation="sigmoid", eps=0.1, N=8)
            results += gradcheck(cfg, draws=5, grid_nodes=nodes)
    worst = {}
    for r in results:
        worst[r["case"]] = max(worst.get(r["case"], 0.0), r["rel_err"])
    ok = all(r["passed"] for r in results)
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    verdict(1, ok, f"{len(results)} checks, worst rel err per case: {detail}")
    assert ok


def test_c02_method1_feasibility(verdict):
    worst = math.inf
    for problem in (example_1d(), example_2d()):
        grid = build_grid(problem.domain, {1: 2001, 2: 257}[problem.dim])
        model = Method1(problem, grid)
        inner = grid.nodes[grid.interior_mask]
        phi = problem.obstacle(inner)
        for seed in range(50):
            th = init_params(problem.dim, 20, seed, scale=0.5 + seed % 4)
            u = model.solution(th)(inner)
            worst = min(worst, float(np.min(u - phi)))
    ok = worst >= -1e-9
    verdict(2, ok, f"min (U + delta) zeta - phi over 100 draws = {worst:.3e} (need >= -1e-9)")
    assert ok


def test_c03_energy_lower_bound(verdict):
    problem = example_1d()
    grid = build_grid(problem.domain, 2001)
    model = Method1(problem, grid)
    values = [model.value(init_params(1, 20, seed, scale=0.25 * (1 + seed % 8))) for seed in range(50)]
    values += [model.value(NetworkParams.from_dict(o.record.params)) for o in _runs(METHOD1)]
    lowest = min(values)
    ok = lowest >= J_EXACT_1D - 1e-3
    verdict(3, ok, f"min F1 over {len(values)} parameter sets = {lowest:.5f}, J[u] = {J_EXACT_1D:.5f}")
    assert ok


def test_c04_oracle_correctness(verdict):
    p1 = example_1d()
    s1 = solve_obstacle_psor(p1, 4001)
    e1 = float(np.max(np.abs(s1.u.ravel() - p1.exact(s1.nodes))))
    p2 = example_2d()
    s2 = solve_obstacle_psor(p2, 257)
    e2 = float(np.max(np.abs(s2.u.ravel() - p2.exact(s2.nodes))))
    r = contact_radius(s2, p2)
    rstar = p2.meta["rstar"]
    parts = [e1 <= 5e-4, e2 <= 5e-3, abs(r - rstar) <= 0.02]
    verdict(4, all(parts), f"1-D linf {e1:.2e} (<= 5e-4), 2-D linf {e2:.2e} (<= 5e-3), "
                           f"contact radius {r:.4f} vs r* {rstar:.4f} (within 0.02)")
    assert all(parts)


def test_c05_penalty_sandwich(verdict):
    p = example_1d()
    M = 4001
    u = solve_obstacle_psor(p, M, tol=1e-12)
    h2 = u.spacing**2
    cstar = obstacle_constant(p, M)
    worst_lo, worst_hi = math.inf, math.inf
    for eps in (1e-1, 1e-2, 1e-3):
        ue = solve_penalized_newton(p, PenaltyFamily(eps), M)
        d = u.u - ue.u
        worst_lo = min(worst_lo, float(np.min(d + 10 * h2)))
        worst_hi = min(worst_hi, float(np.min((cstar + 1) * eps + 10 * h2 - d)))
    ok = worst_lo >= 0 and worst_hi >= 0
    verdict(5, ok, f"C* = {cstar:g}; slack below {worst_lo:.2e}, slack above {worst_hi:.2e} (both >= 0)")
    assert ok


def test_c06_penalty_h1_rate(verdict):
    p = example_1d()
    M = 4001
    u = solve_obstacle_psor(p, M, tol=1e-12)
    epss = [1e-1, 1e-2, 1e-3, 1e-4]
    errs = [discrete_h1(u.u - solve_penalized_newton(p, PenaltyFamily(e), M).u, u.h) for e in epss]
    slope = float(np.polyfit(np.log10(epss), np.log10(errs), 1)[0])
    ok = abs(slope - 0.5) <= 0.15
    verdict(6, ok, f"H1 errors {', '.join(f'{e:.2e}' for e in errs)}; log-log slope {slope:.3f} (need 0.5 +- 0.15)")
    assert ok


def test_c07_method1_table(verdict):
    errs = _linf(METHOD1)
    med = statistics.median(errs)
    ok = med <= 2e-2
    verdict(7, ok, f"method 1, N=20, median linf {med:.3e} over {SEEDS} seeds (<= 2e-2; "
                   f"mean {statistics.fmean(errs):.3e})")
    assert ok


def test_c08_rate_formulas(verdict):
    r1 = rate_n(1.021e-2, 7.203e-3, 5.241e-3)
    r3 = rate_n(8.864e-2, 7.008e-2, 5.700e-2)
    r2 = rate_eps(2.243e-1, 3.380e-2, 1.594e-2)
    ok = abs(r1 - 0.616) < 5e-3 and abs(r3 - 0.505) < 5e-3 and abs(r2 - 1.03) < 5e-3
    verdict(8, ok, f"rate_n {r1:.4f} (0.616), rate_n {r3:.4f} (0.505), rate_eps {r2:.4f} (1.03)")
    assert ok


def test_c09_method2_eps_convergence(verdict):
    meds = [statistics.median(_linf(METHOD2.replace(eps=e))) for e in (1e-1, 1e-2, 1e-3)]
    rate = rate_eps(*meds)
    ok = meds[0] > meds[1] > meds[2] and 0.7 <= rate <= 1.3
    verdict(9, ok, f"median linf {', '.join(f'{m:.3e}' for m in meds)}; rate_eps {rate:.3f} (in [0.7, 1.3])")
    assert ok


def test_c10_homotopy_benefit(verdict):
    eps = 1e-3
    cstar = obstacle_constant(example_1d(), 4001)
    bound = 2 * eps * (cstar + 1) + QUADRATURE_ALLOWANCE
    warm = statistics.median(_linf(METHOD2.replace(eps=eps, homotopy_steps=10)))
    cold = statistics.median(_linf(METHOD2.replace(eps=eps)))
    ok = warm <= bound and warm <= cold
    verdict(10, ok, f"homotopy median linf {warm:.3e} (bound {bound:.1e}), cold start {cold:.3e}")
    assert ok


def test_c11_replay_determinism(verdict):
    records = [_runs(METHOD1)[0].record, _runs(METHOD2.replace(eps=1e-3, homotopy_steps=10))[3].record]
    ok = all(replay(rec)[0] for rec in records)
    verdict(11, ok, f"{len(records)} records replayed, final parameters bitwise identical: {ok}")
    assert ok
