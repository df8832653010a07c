"""Error norms, empirical convergence rates, and run aggregation."""

from __future__ import annotations

import json
import math
import statistics
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .quadrature import QuadratureGrid

SCHEMA_VERSION = 1


class RateUndefined(ValueError):
    """The three errors do not define an empirical rate (zero or negative ratio)."""


@dataclass
class ErrorReport:
    linf: float
    l2_integral: float   # integral of e^2
    l2_norm: float       # its square root
    h1_seminorm: float
    n_eval_points: int


def central_gradient(fn: Callable, x: np.ndarray, step: float = 1e-6) -> np.ndarray:
    x = np.atleast_2d(x)
    out = np.empty_like(x, dtype=float)
    for k in range(x.shape[1]):
        e = np.zeros(x.shape[1])
        e[k] = step
        out[:, k] = (fn(x + e) - fn(x - e)) / (2 * step)
    return out


def error_report(candidate: Callable, reference: Callable, grid: QuadratureGrid,
                 candidate_grad: Optional[Callable] = None) -> ErrorReport:
    """Compare two pointwise-evaluable solutions on the nodes of ``grid``.

    The reference gradient always comes from central differences; the
    candidate gradient is analytic when ``candidate_grad`` is given.
    """
    x = grid.nodes
    e = candidate(x) - reference(x)
    g_cand = candidate_grad(x) if candidate_grad is not None else central_gradient(candidate, x)
    de = g_cand - central_gradient(reference, x)
    l2i = float(np.sum(grid.weights * e * e))
    return ErrorReport(
        linf=float(np.max(np.abs(e))),
        l2_integral=l2i,
        l2_norm=math.sqrt(l2i),
        h1_seminorm=math.sqrt(float(np.sum(grid.weights * np.sum(de * de, axis=1)))),
        n_eval_points=int(x.shape[0]),
    )


def _ratio(a: float, b: float, c: float) -> float:
    den = b - c
    if den == 0:
        raise RateUndefined("middle and last errors coincide")
    ratio = (a - b) / den
    if not ratio > 0:
        raise RateUndefined(f"error differences have ratio {ratio:.3g}; no rate")
    return ratio


def rate_n(e10: float, e20: float, e40: float) -> float:
    """Order in ``N`` from errors at ``N, 2N, 4N``: ``|log_{1/2}((e10-e20)/(e20-e40))|``."""
    return abs(math.log(_ratio(e10, e20, e40)) / math.log(0.5))


def rate_eps(e_1: float, e_01: float, e_001: float) -> float:
    """Order in ``eps`` from errors at ``eps, eps/10, eps/100``."""
    return math.log10(_ratio(e_1, e_01, e_001))


# ---------------------------------------------------------------------------
# run records


@dataclass
class RunRecord:
    method: int
    problem: str
    N: int
    eps: Optional[float]
    homotopy_steps: int
    seed: int
    config: dict
    errors: Optional[ErrorReport]
    wall_time: float
    params: Optional[dict] = None
    status: str = "ok"
    terminated_by: str = ""
    stage_losses: list = field(default_factory=list)
    version: int = SCHEMA_VERSION

    def key(self):
        return (self.method, self.problem, self.N, self.eps if self.eps is not None else -1.0,
                self.homotopy_steps)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunRecord":
        data = json.loads(text)
        version = data.get("version")
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported record version {version!r}")
        if data.get("errors") is not None:
            data["errors"] = ErrorReport(**data["errors"])
        return cls(**data)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "RunRecord":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


@dataclass
class SummaryRow:
    method: int
    problem: str
    N: int
    eps: Optional[float]
    homotopy_steps: int
    runs: int
    failures: int
    linf_mean: float
    linf_median: float
    linf_min: float
    l2_integral_mean: float
    l2_integral_median: float
    l2_norm_mean: float
    l2_norm_median: float


def aggregate(records: list[RunRecord]) -> list[SummaryRow]:
    """Mean/median/min of the errors per configuration, sorted by configuration."""
    if not records:
        raise ValueError("no records to aggregate")
    groups: dict = {}
    for rec in records:
        groups.setdefault(rec.key(), []).append(rec)
    rows = []
    for key in sorted(groups):
        recs = groups[key]
        ok = [r.errors for r in recs if r.status == "ok" and r.errors is not None]
        nan = math.nan

        def stat(fn, attr):
            vals = [getattr(e, attr) for e in ok]
            return fn(vals) if vals else nan

        first = recs[0]
        rows.append(SummaryRow(
            method=first.method, problem=first.problem, N=first.N, eps=first.eps,
            homotopy_steps=first.homotopy_steps, runs=len(recs), failures=len(recs) - len(ok),
            linf_mean=stat(statistics.fmean, "linf"),
            linf_median=stat(statistics.median, "linf"),
            linf_min=stat(min, "linf"),
            l2_integral_mean=stat(statistics.fmean, "l2_integral"),
            l2_integral_median=stat(statistics.median, "l2_integral"),
            l2_norm_mean=stat(statistics.fmean, "l2_norm"),
            l2_norm_median=stat(statistics.median, "l2_norm"),
        ))
    return rows
