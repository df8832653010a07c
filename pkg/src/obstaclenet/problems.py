"""Obstacle problem instances.

A problem is posed on an interval or a rectangle and consists of a force
``f``, an obstacle ``phi`` (negative on the boundary), a cutoff ``zeta``
vanishing exactly on the boundary, and optionally a closed-form solution.

All scalar fields take an ``(n, p)`` array of points and return ``(n,)``;
the cutoff gradient returns ``(n, p)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

Field = Callable[[np.ndarray], np.ndarray]

PROBLEM_IDS = ("example1d", "example2d")


@dataclass(frozen=True)
class Domain:
    """Axis-aligned box ``prod_k (lo_k, hi_k)`` in one or two dimensions."""

    bounds: tuple[tuple[float, float], ...]

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        object.__setattr__(self, "bounds", bounds)
        if len(bounds) not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {len(bounds)}")
        for lo, hi in bounds:
            if not lo < hi:
                raise ValueError(f"empty axis ({lo}, {hi})")

    @property
    def kind(self) -> str:
        return "interval" if self.dim == 1 else "rectangle"

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def measure(self) -> float:
        return math.prod(hi - lo for lo, hi in self.bounds)

    def contains(self, x: np.ndarray, closed: bool = True, atol: float = 1e-12) -> np.ndarray:
        x = np.atleast_2d(x)
        lo = np.array([b[0] for b in self.bounds])
        hi = np.array([b[1] for b in self.bounds])
        if closed:
            return np.all((x >= lo - atol) & (x <= hi + atol), axis=1)
        return np.all((x > lo) & (x < hi), axis=1)


@dataclass(frozen=True)
class Cutoff:
    """Cutoff function and its gradient."""

    value: Field
    gradient: Field


def box_cutoff(domain: Domain) -> Cutoff:
    """Normalized product cutoff ``prod_k (x_k - lo_k)(hi_k - x_k) / (L_k/2)^2``.

    Equals one at the box center, vanishes on the boundary, and has a
    nonzero normal derivative there.
    """
    lo = np.array([b[0] for b in domain.bounds])
    hi = np.array([b[1] for b in domain.bounds])
    scale = ((hi - lo) / 2.0) ** 2

    def factors(x):
        return (x - lo) * (hi - x) / scale

    def value(x):
        return np.prod(factors(np.atleast_2d(x)), axis=1)

    def gradient(x):
        x = np.atleast_2d(x)
        fac = factors(x)
        dfac = (lo + hi - 2.0 * x) / scale
        out = np.empty_like(x, dtype=float)
        for k in range(x.shape[1]):
            others = np.prod(np.delete(fac, k, axis=1), axis=1)
            out[:, k] = dfac[:, k] * others
        return out

    return Cutoff(value, gradient)


@dataclass(frozen=True)
class ObstacleProblem:
    name: str
    domain: Domain
    force: Field
    obstacle: Field
    cutoff: Cutoff
    exact: Optional[Field] = None
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def dim(self) -> int:
        return self.domain.dim


def check_boundary_negative(problem: ObstacleProblem, n: int = 400) -> None:
    """Raise if the obstacle is not strictly negative on sampled boundary points."""
    from .quadrature import boundary_points

    pts = boundary_points(problem.domain, n)
    phi = problem.obstacle(pts)
    if not np.all(phi < 0):
        worst = pts[np.argmax(phi)]
        raise ValueError(f"obstacle must be negative on the boundary; phi({worst}) = {phi.max():.3g}")


# ---------------------------------------------------------------------------
# builtin examples


def example_1d() -> ObstacleProblem:
    """``-u'' >= 0``, ``u >= 1 - x^2`` on ``(-2, 2)`` with zero boundary values."""
    domain = Domain(((-2.0, 2.0),))
    slope = 4.0 - 2.0 * math.sqrt(3.0)
    a = 2.0 - math.sqrt(3.0)

    def force(x):
        return np.zeros(np.atleast_2d(x).shape[0])

    def obstacle(x):
        x = np.atleast_2d(x)[:, 0]
        return 1.0 - x**2

    def exact(x):
        x = np.atleast_2d(x)[:, 0]
        return np.select(
            [x <= -a, x <= a],
            [slope * (x + 2.0), 1.0 - x**2],
            slope * (2.0 - x),
        )

    problem = ObstacleProblem("example1d", domain, force, obstacle, box_cutoff(domain), exact)
    check_boundary_negative(problem)
    return problem


def _rstar_residual(r: float) -> float:
    return r * r * (1.0 - math.log(r / 2.0)) - 1.0


def solve_rstar(tol: float = 1e-12) -> float:
    """Root of ``r^2 (1 - log(r/2)) = 1`` in ``[0.5, 1]`` by bisection.

    Iterates until the residual is within ``tol`` (or the bracket has
    collapsed to machine resolution).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    lo, hi = 0.5, 1.0
    glo, ghi = _rstar_residual(lo), _rstar_residual(hi)
    if glo * ghi >= 0:
        raise ArithmeticError("r* bracket [0.5, 1.0] does not change sign")
    mid = 0.5 * (lo + hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        gmid = _rstar_residual(mid)
        if abs(gmid) <= tol or hi - lo <= 4 * np.finfo(float).eps:
            break
        if (gmid < 0) == (glo < 0):
            lo, glo = mid, gmid
        else:
            hi = mid
    return mid


def example_2d() -> ObstacleProblem:
    """Radially symmetric problem on ``(-2, 2)^2`` with a spherical-cap obstacle."""
    domain = Domain(((-2.0, 2.0), (-2.0, 2.0)))
    rstar = solve_rstar(1e-12)
    c = rstar**2 / math.sqrt(1.0 - rstar**2)
    fval = -c / 2.0

    def bracket(r2):
        return -r2 / 8.0 + 0.5

    def force(x):
        return np.full(np.atleast_2d(x).shape[0], fval)

    def obstacle(x):
        x = np.atleast_2d(x)
        r2 = np.sum(x**2, axis=1)
        cap = np.sqrt(np.clip(1.0 - r2, 0.0, None))
        return np.where(r2 <= 1.0, cap, -1.0) - c * bracket(r2)

    def exact(x):
        x = np.atleast_2d(x)
        r2 = np.sum(x**2, axis=1)
        cap = np.sqrt(np.clip(1.0 - r2, 0.0, None))
        with np.errstate(divide="ignore"):
            logpart = -c * np.log(np.sqrt(r2) / 2.0)
        return np.select(
            [r2 <= rstar**2, r2 <= 4.0],
            [cap - c * bracket(r2), logpart - c * bracket(r2)],
            0.0,
        )

    problem = ObstacleProblem(
        "example2d", domain, force, obstacle, box_cutoff(domain), exact,
        meta={"rstar": rstar, "c": c},
    )
    check_boundary_negative(problem)
    return problem


# ---------------------------------------------------------------------------
# lookup and evaluation

_WHICH = ("force", "obstacle", "cutoff", "cutoff_grad", "exact")


def get_problem(name: str) -> ObstacleProblem:
    builders = {"example1d": example_1d, "example2d": example_2d}
    try:
        return builders[name]()
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; valid ids: {', '.join(PROBLEM_IDS)}") from None


def eval_problem(problem: ObstacleProblem, which: str, x):
    """Evaluate one field of ``problem`` at a single point ``x``.

    Returns a float, or a length-``p`` array for ``cutoff_grad``.
    """
    if which not in _WHICH:
        raise ValueError(f"unknown field {which!r}; expected one of {_WHICH}")
    pt = np.asarray(x, dtype=float).reshape(1, -1)
    if pt.shape[1] != problem.dim:
        raise ValueError(f"expected a {problem.dim}-d point, got {pt.shape[1]}-d")
    if not problem.domain.contains(pt)[0]:
        raise ValueError(f"point {pt[0]} lies outside the closed domain")
    if which == "force":
        return float(problem.force(pt)[0])
    if which == "obstacle":
        return float(problem.obstacle(pt)[0])
    if which == "cutoff":
        return float(problem.cutoff.value(pt)[0])
    if which == "cutoff_grad":
        return problem.cutoff.gradient(pt)[0]
    if problem.exact is None:
        raise ValueError(f"problem {problem.name!r} has no exact solution")
    return float(problem.exact(pt)[0])


# ---------------------------------------------------------------------------
# plain-text definition files
#
#   builtin = example1d
# or
#   domain = -1 1 [-1 1]
#   force = 2.0
#   obstacle = 0.5 0 -4        (1-D ascending coefficients)
#   obstacle = 0.5@0,0 -4@2,0  (monomial terms coef@i[,j])


def _parse_poly(text: str, dim: int) -> Field:
    terms = []
    tokens = text.split()
    if not tokens:
        raise ValueError("empty polynomial")
    if all("@" not in t for t in tokens):
        if dim != 1 and len(tokens) > 1:
            raise ValueError("2-d polynomials need coef@i,j terms")
        for i, tok in enumerate(tokens):
            terms.append((float(tok), (i,) + (0,) * (dim - 1)))
    else:
        for tok in tokens:
            coef, _, powers = tok.partition("@")
            exps = tuple(int(e) for e in powers.split(","))
            if len(exps) != dim or any(e < 0 for e in exps):
                raise ValueError(f"bad monomial {tok!r} for dimension {dim}")
            terms.append((float(coef), exps))

    def poly(x):
        x = np.atleast_2d(x)
        out = np.zeros(x.shape[0])
        for coef, exps in terms:
            out += coef * np.prod(x ** np.array(exps), axis=1)
        return out

    return poly


def load_problem(path) -> ObstacleProblem:
    """Read a problem definition from a ``key = value`` text file."""
    entries = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"malformed line {raw!r}")
        entries[key.strip().lower()] = value.strip()
    if "builtin" in entries:
        return get_problem(entries["builtin"])
    try:
        nums = [float(v) for v in entries["domain"].split()]
        force_text = entries["force"]
        obstacle_text = entries["obstacle"]
    except KeyError as exc:
        raise ValueError(f"problem file missing key {exc.args[0]!r}") from None
    if len(nums) not in (2, 4):
        raise ValueError("domain needs 2 or 4 numbers")
    domain = Domain(tuple(zip(nums[0::2], nums[1::2])))
    problem = ObstacleProblem(
        entries.get("name", Path(path).stem),
        domain,
        _parse_poly(force_text, domain.dim),
        _parse_poly(obstacle_text, domain.dim),
        box_cutoff(domain),
    )
    check_boundary_negative(problem)
    return problem
