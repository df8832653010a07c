"""Command-line entry point: ``obstaclenet {solve,benchmark,oracle,gradcheck,rates}``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from .experiment import (
    ExperimentConfig,
    benchmark,
    gradcheck,
    replay,
    resolve_problem,
    run_many,
    write_run,
)
from .fdsolve import solve_obstacle_psor, solve_penalized_newton, solve_poisson, to_csv_rows
from .method2 import PenaltyFamily
from .metrics import RateUndefined, RunRecord, rate_eps, rate_n

log = logging.getLogger("obstaclenet")

# flag name -> ExperimentConfig field
_EXPERIMENT_FLAGS = {
    "problem": "problem", "method": "method", "neurons": "N", "activation": "activation",
    "eps": "eps", "homotopy_steps": "homotopy_steps", "optimizer": "optimizer", "lr": "lr",
    "iters": "iters", "grad_tol": "grad_tol", "history_stride": "history_stride", "grid": "grid",
    "integration": "integration", "seed": "seed", "runs": "runs", "init_scale": "init_scale",
    "freeze_delta": "freeze_delta", "output": "output", "jobs": "jobs",
}


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="key = value file; explicit flags override it")
    p.add_argument("--problem", help="example1d, example2d, or a problem definition file")
    p.add_argument("--method", type=int, choices=(1, 2))
    p.add_argument("--neurons", type=int, metavar="N")
    p.add_argument("--activation", choices=("relu2", "sigmoid", "tanh"))
    p.add_argument("--eps", type=float, help="penalty parameter (method 2)")
    p.add_argument("--homotopy-steps", type=int, help="0 disables homotopy")
    p.add_argument("--optimizer", choices=("fixed", "backtracking", "adam"))
    p.add_argument("--lr", type=float, help="step size")
    p.add_argument("--iters", type=int, help="total iteration budget")
    p.add_argument("--grad-tol", type=float)
    p.add_argument("--history-stride", type=int)
    p.add_argument("--grid", type=int, help="quadrature nodes per axis (default 2001 in 1-D, 257 in 2-D)")
    p.add_argument("--integration", choices=("midpoint", "montecarlo"))
    p.add_argument("--seed", type=int, help="first seed")
    p.add_argument("--runs", type=int, help="number of seeds")
    p.add_argument("--init-scale", type=float)
    p.add_argument("--freeze-delta", action="store_true", default=None,
                   help="drop the shift's envelope term from the method-1 gradient")
    p.add_argument("--output", help="output directory")
    p.add_argument("--jobs", type=int, help="parallel worker processes")


def config_from_args(args) -> ExperimentConfig:
    base = ExperimentConfig()
    if getattr(args, "config", None):
        base = ExperimentConfig.from_text(args.config.read_text())
    changes = {field: getattr(args, flag) for flag, field in _EXPERIMENT_FLAGS.items()
               if getattr(args, flag, None) is not None}
    return base.replace(**changes)


def _check_problem(config: ExperimentConfig) -> None:
    resolve_problem(config.problem)


def cmd_solve(args) -> int:
    if args.replay:
        record = RunRecord.load(args.replay)
        same, _ = replay(record)
        print(f"replay {args.replay}: {'identical' if same else 'MISMATCH'}")
        return 0 if same else 1
    config = config_from_args(args)
    _check_problem(config)
    outdir = Path(config.output)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "config.txt").write_text(config.to_text())
    failed = 0
    for out in run_many([config], config.jobs):
        path = write_run(out, outdir)
        rec = out.record
        if rec.status != "ok":
            failed += 1
            print(f"seed {rec.seed}: {rec.status}", file=sys.stderr)
            continue
        err = f"linf={rec.errors.linf:.4e} l2={rec.errors.l2_norm:.4e}" if rec.errors else "no exact solution"
        stages = " ".join(f"{x:.6g}" for x in rec.stage_losses)
        print(f"seed {rec.seed}: {err} stage losses [{stages}] -> {path}")
    return 1 if failed else 0


def _parse_sweep(values, kind):
    return [kind(v) for v in values] if values else None


def cmd_benchmark(args) -> int:
    config = config_from_args(args)
    _check_problem(config)
    Ns = _parse_sweep(args.sweep_neurons, int) or [config.N]
    epss = _parse_sweep(args.sweep_eps, float) or [config.eps]
    homotopy = config.homotopy_steps
    records, rows, rates = benchmark(config.replace(homotopy_steps=0), Ns, epss, homotopy,
                                     config.output, config.jobs)
    for r in rows:
        eps = "" if r.eps is None else f" eps={r.eps:g}"
        hs = f" homotopy={r.homotopy_steps}" if r.homotopy_steps else ""
        print(f"method {r.method} N={r.N}{eps}{hs}: linf mean {r.linf_mean:.4e} "
              f"median {r.linf_median:.4e} min {r.linf_min:.4e} ({r.failures}/{r.runs} failed)")
    for r in rates:
        print(f"rate in {r['kind']} ({r['statistic']}, N={r['N']}, eps={r['eps']}, "
              f"homotopy={r['homotopy_steps']}): {r['rate']:.3f} {r['note']}")
    print(f"tables written to {config.output}")
    return 0


def cmd_oracle(args) -> int:
    problem = resolve_problem(args.problem)
    M = args.M or {1: 4001, 2: 257}[problem.dim]
    if args.solver == "psor":
        sol = solve_obstacle_psor(problem, M, omega=args.omega, tol=args.tol)
    elif args.solver == "penalized":
        sol = solve_penalized_newton(problem, PenaltyFamily(args.eps), M)
    else:
        sol = solve_poisson(problem, M)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(["x", "y"][: problem.dim] + ["u"])
        for row in to_csv_rows(sol):
            w.writerow([repr(v) for v in row])
    finally:
        if args.out:
            fh.close()
    log.info("oracle %s on %s: M=%d, %d iterations", args.solver, problem.name, M, sol.iterations)
    return 0


def cmd_gradcheck(args) -> int:
    config = config_from_args(args)
    _check_problem(config)
    results = gradcheck(config, draws=args.draws, grid_nodes=args.check_grid)
    ok = True
    for r in results:
        flag = "ok" if r["passed"] else "FAIL"
        extra = "" if r["delta_u"] is None else f" delta_u={r['delta_u']:.3g}"
        print(f"{flag} method {config.method} {r['case']} seed {r['seed']}{extra}: "
              f"rel err {r['rel_err']:.3e} (tol {r['tol']:g})")
        ok &= r["passed"]
    if config.method == 1 and config.freeze_delta and not ok:
        print("gradient omits the envelope term of the shift; mismatch expected where delta_u > 0")
    return 0 if ok else 1


def cmd_rates(args) -> int:
    try:
        if args.n:
            print(f"rate in N: {rate_n(*args.n):.4f}")
        if args.eps:
            print(f"rate in eps: {rate_eps(*args.eps):.4f}")
    except RateUndefined as exc:
        print(f"rate undefined: {exc}", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="obstaclenet", description="Neural-network solvers for the obstacle problem.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="train one network per seed and write records")
    _add_experiment_flags(p)
    p.add_argument("--replay", type=Path, help="re-run a RunRecord JSON and compare parameters bitwise")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("benchmark", help="sweep N and/or eps and emit error tables")
    _add_experiment_flags(p)
    p.add_argument("--sweep-neurons", nargs="+", metavar="N")
    p.add_argument("--sweep-eps", nargs="+", metavar="EPS")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("oracle", help="finite-difference reference solution as CSV")
    p.add_argument("--problem", default="example1d")
    p.add_argument("--solver", choices=("psor", "penalized", "poisson"), default="psor")
    p.add_argument("--M", type=int, help="nodes per axis including the boundary")
    p.add_argument("--omega", type=float, help="over-relaxation (default: optimal linear SOR value)")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--eps", type=float, default=1e-3)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("gradcheck", help="compare analytic gradients with finite differences")
    _add_experiment_flags(p)
    p.add_argument("--draws", type=int, default=5)
    p.add_argument("--check-grid", type=int, default=201)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("rates", help="empirical rates from three errors")
    p.add_argument("--n", nargs=3, type=float, metavar=("E_N", "E_2N", "E_4N"))
    p.add_argument("--eps", nargs=3, type=float, metavar=("E_1", "E_01", "E_001"))
    p.set_defaults(func=cmd_rates)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
