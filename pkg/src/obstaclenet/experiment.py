"""Reproducible runs: configuration, single-seed solves, replay, sweeps, gradient checks."""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .method1 import Method1
from .method2 import Method2, PenaltyFamily, run_homotopy
from .metrics import RateUndefined, RunRecord, SummaryRow, aggregate, error_report, rate_eps, rate_n
from .network import Activation, NetworkParams, forward, init_params
from .optimize import OptimizerConfig, minimize
from .problems import PROBLEM_IDS, ObstacleProblem, get_problem, load_problem
from .quadrature import build_grid, build_monte_carlo

log = logging.getLogger(__name__)

DEFAULT_GRID = {1: 2001, 2: 257}


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str = "example1d"
    method: int = 1
    N: int = 20
    activation: str = "relu2"
    eps: float = 1e-3
    homotopy_steps: int = 0
    optimizer: str = "adam"
    lr: float = 1e-2
    iters: int = 4000
    grad_tol: float = 0.0
    history_stride: int = 10
    grid: int = 0              # nodes per axis; 0 picks the per-dimension default
    integration: str = "midpoint"
    seed: int = 0
    runs: int = 1
    init_scale: float = 1.0
    freeze_delta: bool = False
    output: str = "runs"
    jobs: int = 1

    def __post_init__(self):
        if self.method not in (1, 2):
            raise ValueError(f"method must be 1 or 2, got {self.method}")
        if self.N < 1:
            raise ValueError("N must be at least 1")
        if self.method == 2 and not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.homotopy_steps < 0:
            raise ValueError("homotopy steps must be nonnegative")
        if self.integration not in ("midpoint", "montecarlo"):
            raise ValueError("integration must be 'midpoint' or 'montecarlo'")
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        Activation(self.activation)
        self.optimizer_config()

    @property
    def seeds(self) -> list[int]:
        return list(range(self.seed, self.seed + self.runs))

    def optimizer_config(self) -> OptimizerConfig:
        return OptimizerConfig(policy=self.optimizer, alpha=self.lr, max_iters=self.iters,
                               grad_tol=self.grad_tol, history_stride=self.history_stride)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    # plain-text key = value form

    def to_text(self) -> str:
        return "".join(f"{f.name} = {getattr(self, f.name)!r}\n" if f.type == "str"
                       else f"{f.name} = {getattr(self, f.name)}\n" for f in fields(self))

    @classmethod
    def from_text(cls, text: str, base: Optional["ExperimentConfig"] = None) -> "ExperimentConfig":
        kinds = {f.name: f.type for f in fields(cls)}
        values = {}
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            key, val = key.strip().replace("-", "_"), val.strip()
            if not sep or key not in kinds:
                raise ValueError(f"bad config line {raw!r}")
            values[key] = _coerce(val, kinds[key])
        return dataclasses.replace(base or cls(), **values)


def _coerce(text: str, kind: str):
    if kind == "str":
        if len(text) >= 2 and text[0] == text[-1] and text[0] in "'\"":
            return text[1:-1]
        return text
    if kind == "bool":
        low = text.lower()
        if low not in ("true", "false", "1", "0", "yes", "no"):
            raise ValueError(f"not a boolean: {text!r}")
        return low in ("true", "1", "yes")
    if kind == "int":
        return int(text)
    return float(text)


def resolve_problem(name: str) -> ObstacleProblem:
    if name in PROBLEM_IDS:
        return get_problem(name)
    if Path(name).is_file():
        return load_problem(name)
    raise KeyError(f"unknown problem {name!r}; valid ids: {', '.join(PROBLEM_IDS)} (or a problem file)")


def make_grid(config: ExperimentConfig, problem: ObstacleProblem, seed: int = 0):
    n = config.grid or DEFAULT_GRID[problem.dim]
    if config.integration == "montecarlo":
        return build_monte_carlo(problem.domain, n ** problem.dim, seed)
    return build_grid(problem.domain, n)


def make_model(config: ExperimentConfig, problem, grid):
    act = Activation(config.activation)
    if config.method == 1:
        return Method1(problem, grid, act, config.freeze_delta)
    return Method2(problem, grid, PenaltyFamily(config.eps), act)


# ---------------------------------------------------------------------------
# single runs


@dataclass
class RunOutput:
    record: RunRecord
    nodes: Optional[np.ndarray] = None
    u_numeric: Optional[np.ndarray] = None
    u_exact: Optional[np.ndarray] = None
    loss_rows: list = dataclasses.field(default_factory=list)


def train(config: ExperimentConfig, seed: int, problem=None, grid=None):
    """Train one network; returns ``(model, params, stage traces, stage t values)``."""
    problem = problem or resolve_problem(config.problem)
    grid = grid or make_grid(config, problem, seed)
    model = make_model(config, problem, grid)
    init = init_params(problem.dim, config.N, seed, config.init_scale)
    opt = config.optimizer_config()
    if config.method == 1:
        params, trace = minimize(model.value, model.gradient, init, opt,
                                 value_and_grad=model.value_and_grad)
        return model, params, [trace], [1.0]
    res = run_homotopy(problem, grid, model.pen, config.homotopy_steps, opt, init, model.act)
    return model, res.params, res.traces, res.stage_t


def run_one(config: ExperimentConfig, seed: int) -> RunOutput:
    problem = resolve_problem(config.problem)
    snapshot = dataclasses.asdict(config)
    snapshot.pop("output"), snapshot.pop("jobs")
    record = RunRecord(
        method=config.method, problem=problem.name, N=config.N,
        eps=config.eps if config.method == 2 else None,
        homotopy_steps=config.homotopy_steps if config.method == 2 else 0,
        seed=seed, config=snapshot, errors=None, wall_time=0.0,
    )
    t0 = time.perf_counter()
    try:
        grid = make_grid(config, problem, seed)
        model, params, traces, ts = train(config, seed, problem, grid)
    except Exception as exc:  # reported per run, never fatal for a sweep
        record.status = f"error: {exc}"
        record.wall_time = time.perf_counter() - t0
        return RunOutput(record)
    record.wall_time = time.perf_counter() - t0
    log.info("%s seed %d finished in %.2fs", run_name(record), seed, record.wall_time)
    record.params = params.to_dict()
    record.terminated_by = traces[-1].terminated_by
    record.stage_losses = [tr.final_loss for tr in traces]
    if record.terminated_by == "divergence":
        record.status = "diverged"

    u = model.solution(params)
    out = RunOutput(record, nodes=grid.nodes, u_numeric=u(grid.nodes))
    if problem.exact is not None:
        out.u_exact = problem.exact(grid.nodes)
        if record.status == "ok":
            record.errors = error_report(u, problem.exact, grid, model.solution_gradient(params))
    for t, tr in zip(ts, traces):
        stride = config.history_stride
        for i, (loss, gn) in enumerate(zip(tr.losses, tr.grad_norms)):
            it = min(i * stride, tr.iterations_used)
            out.loss_rows.append([t, it, loss, gn])
    return out


def replay(record: RunRecord) -> tuple[bool, NetworkParams]:
    """Re-run the recorded configuration and compare final parameters bitwise."""
    fields_ok = {f.name for f in fields(ExperimentConfig)}
    config = ExperimentConfig(**{k: v for k, v in record.config.items() if k in fields_ok})
    _, params, _, _ = train(config, record.seed)
    if record.params is None:
        return False, params
    stored = NetworkParams.from_dict(record.params).to_vector()
    return bool(np.array_equal(stored, params.to_vector())), params


def run_name(record: RunRecord) -> str:
    parts = [record.problem, f"m{record.method}", f"N{record.N}"]
    if record.method == 2:
        parts += [f"eps{record.eps:g}", f"h{record.homotopy_steps}"]
    parts.append(f"seed{record.seed}")
    return "_".join(parts)


def write_run(out: RunOutput, directory) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    name = run_name(out.record)
    out.record.save(directory / f"{name}.json")
    if out.nodes is not None:
        with open(directory / f"{name}_solution.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            coords = ["x", "y"][: out.nodes.shape[1]]
            w.writerow(coords + ["u_numeric", "u_exact", "error"])
            for i, pt in enumerate(out.nodes):
                ue = "" if out.u_exact is None else repr(float(out.u_exact[i]))
                err = "" if out.u_exact is None else repr(float(out.u_numeric[i] - out.u_exact[i]))
                w.writerow([repr(float(c)) for c in pt] + [repr(float(out.u_numeric[i])), ue, err])
    if out.loss_rows:
        with open(directory / f"{name}_loss.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "iteration", "loss", "grad_norm"])
            w.writerows(out.loss_rows)
    return directory / f"{name}.json"


def _job(args):
    config, seed = args
    return run_one(config, seed)


def run_many(configs: list[ExperimentConfig], jobs: int = 1) -> list[RunOutput]:
    """Every (config, seed) pair; results come back in submission order."""
    tasks = [(c, s) for c in configs for s in c.seeds]
    if jobs <= 1:
        return [_job(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_job, tasks))


# ---------------------------------------------------------------------------
# sweeps


def sweep_configs(base: ExperimentConfig, Ns, epss, homotopy_steps: int) -> list[ExperimentConfig]:
    """Grid of configurations; with ``homotopy_steps > 0`` each method-2 cell runs cold and warm."""
    out = []
    for N in Ns:
        for eps in (epss if base.method == 2 else [base.eps]):
            cfg = base.replace(N=N, eps=eps, homotopy_steps=0)
            out.append(cfg)
            if base.method == 2 and homotopy_steps > 0:
                out.append(cfg.replace(homotopy_steps=homotopy_steps))
    return out


TABLE_COLUMNS = [
    "problem", "method", "N", "eps", "homotopy_steps", "runs", "failures",
    "linf_mean", "linf_median", "linf_min",
    "l2_integral_mean", "l2_integral_median", "l2_norm_mean", "l2_norm_median",
]


def write_table(rows: list[SummaryRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TABLE_COLUMNS)
        for r in rows:
            w.writerow([getattr(r, c) if getattr(r, c) is not None else "" for c in TABLE_COLUMNS])


def table_rates(rows: list[SummaryRow]) -> list[dict]:
    """Empirical rates over every ``N, 2N, 4N`` and ``eps, eps/10, eps/100`` triple in ``rows``."""
    index = {(r.method, r.problem, r.N, r.eps, r.homotopy_steps): r for r in rows}
    found = []
    for m, prob, N, eps, hs in sorted(index, key=str):
        triples = [("N", [(m, prob, N * 2**i, eps, hs) for i in range(3)], rate_n)]
        if eps is not None:
            triples.append(("eps", [(m, prob, N, _tenth(eps, i), hs) for i in range(3)], rate_eps))
        for kind, keys, fn in triples:
            if not all(k in index for k in keys):
                continue
            for stat in ("linf_mean", "linf_median"):
                note = ""
                try:
                    value = fn(*(getattr(index[k], stat) for k in keys))
                except RateUndefined as exc:
                    value, note = math.nan, str(exc)
                found.append({"problem": prob, "method": m, "kind": kind, "N": N, "eps": eps,
                              "homotopy_steps": hs, "statistic": stat, "rate": value, "note": note})
    return found


def _tenth(eps: float, i: int) -> float:
    return float(f"{eps / 10**i:.12g}")


def write_rates(rates: list[dict], path) -> None:
    cols = ["problem", "method", "kind", "N", "eps", "homotopy_steps", "statistic", "rate", "note"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for r in rates:
            w.writerow(r)


def _record_sort_key(rec: RunRecord):
    return (*rec.key(), rec.seed)


def benchmark(base: ExperimentConfig, Ns, epss, homotopy_steps: int, outdir, jobs: int = 1):
    configs = sweep_configs(base, Ns, epss, homotopy_steps)
    outputs = run_many(configs, jobs)
    outdir = Path(outdir)
    for out in outputs:
        write_run(out, outdir / "runs")
    records = sorted((o.record for o in outputs), key=_record_sort_key)
    rows = aggregate(records)
    write_table(rows, outdir / "table.csv")
    rates = table_rates(rows)
    write_rates(rates, outdir / "rates.csv")
    return records, rows, rates


# ---------------------------------------------------------------------------
# gradient checks


def finite_difference_gradient(fn, params: NetworkParams, step: float = 1e-6) -> np.ndarray:
    v = params.to_vector()
    g = np.empty_like(v)
    for i in range(v.size):
        e = np.zeros_like(v)
        e[i] = step
        fp = fn(NetworkParams.from_vector(v + e, params.p, params.N))
        fm = fn(NetworkParams.from_vector(v - e, params.p, params.N))
        g[i] = (fp - fm) / (2 * step)
    return g


def shift_to_gap(model: Method1, params: NetworkParams, gap: float) -> NetworkParams:
    """Move ``b2`` so that ``max(phi/zeta - U)`` over the scan nodes equals ``gap``."""
    U = forward(params, model.act, model.data.x)
    current = float(np.max(model.data.phi_over_zeta - U))
    out = params.copy()
    out.b2 = np.float64(out.b2 + current - gap)
    return out


def relative_error(analytic: np.ndarray, reference: np.ndarray) -> float:
    return float(np.linalg.norm(analytic - reference) / max(np.linalg.norm(reference), 1e-300))


def gradcheck(config: ExperimentConfig, draws: int = 5, ts=(0.0, 0.5, 1.0),
              grid_nodes: int = 201, step: float = 1e-6) -> list[dict]:
    """Analytic gradients against central differences at seeded random parameters.

    Method 1 is checked in both regimes (shift zero and shift positive);
    method 2 at every ``t`` in ``ts``. Tolerances: 1e-4, or 1e-3 when the
    shift envelope term is active.
    """
    problem = resolve_problem(config.problem)
    grid = build_grid(problem.domain, grid_nodes)
    model = make_model(config, problem, grid)
    results = []
    for k in range(draws):
        seed = config.seed + k
        base = init_params(problem.dim, config.N, seed, config.init_scale)
        if config.method == 1:
            cases = [("shift=0", shift_to_gap(model, base, -0.5)),
                     ("shift>0", shift_to_gap(model, base, 0.5))]
            for name, th in cases:
                ga = model.gradient(th).to_vector()
                gf = finite_difference_gradient(model.value, th, step)
                delta, _ = model.delta_u(th)
                results.append({"case": name, "seed": seed, "delta_u": delta,
                                "rel_err": relative_error(ga, gf), "tol": 1e-4 if delta == 0 else 1e-3})
        else:
            for t in ts:
                ga = model.gradient(base, t).to_vector()
                gf = finite_difference_gradient(lambda th: model.value(th, t), base, step)
                results.append({"case": f"t={t:g}", "seed": seed, "delta_u": None,
                                "rel_err": relative_error(ga, gf), "tol": 1e-4})
    for r in results:
        r["passed"] = r["rel_err"] <= r["tol"]
    return results
