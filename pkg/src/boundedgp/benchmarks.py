"""Synthetic benchmark problems and the replicated experiment harness.

Five noise-free test functions with known pointwise bounds: three 1-D
problems exercising a lower bound, two-sided bounds, and discontinuous
sign-switching one-sided bounds; a 2-D sum of damped sines; and the
three-input Ishigami function.  Each trial draws a Latin hypercube design,
infers hyperparameters, and scores accuracy and coverage on a fixed test
grid, all in original data units.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.spatial import distance
from scipy.special import beta as _beta_fn

from . import gp
from .inference import InferenceConfig, InferenceError
from .projection import BoundSpec
from .surrogate import SurrogateModel, fit_surrogate

__all__ = [
    "Problem",
    "MethodVariant",
    "TrialResult",
    "ExperimentResult",
    "VARIANTS",
    "get_variant",
    "lhs_sample",
    "r_squared",
    "rmse",
    "coverage",
    "problem_catalog",
    "get_problem",
    "run_experiment",
    "run_trial",
    "trials_csv",
    "summary_markdown",
    "plot_data_csv",
]

_VALIDATION_POINTS = 100_000
_VALIDATION_SEED = 20240914
_VALIDATION_TOL = 1e-9


@dataclass(frozen=True)
class Problem:
    """A benchmark function with its domain and known bounds."""

    name: str
    dim: int
    domain: np.ndarray  # (dim, 2) rows of (low, high)
    truth: Callable[[np.ndarray], np.ndarray]  # (m, dim) -> (m,)
    bounds: BoundSpec
    default_train_sizes: tuple[int, ...]
    rmse_scale: float = 1.0  # reporting scale: 100 for the 1-D problems


@dataclass(frozen=True)
class MethodVariant:
    """Which parts of the method are switched on.

    ``bounded_inference`` scores hyperparameters on projected leave-one-out
    means; ``project`` projects the predictive distribution itself.
    """

    name: str
    bounded_inference: bool
    project: bool


VARIANTS = {
    "bGP": MethodVariant("bGP", bounded_inference=True, project=True),
    "bGP_I": MethodVariant("bGP_I", bounded_inference=True, project=False),
    "bGP_P": MethodVariant("bGP_P", bounded_inference=False, project=True),
    "GP": MethodVariant("GP", bounded_inference=False, project=False),
}

_VARIANT_ORDER = ("bGP", "bGP_I", "bGP_P", "GP")


def get_variant(name: str) -> MethodVariant:
    key = name.replace("-", "_")
    if key not in VARIANTS:
        raise ValueError(f"unknown variant {name!r}; choose from {sorted(VARIANTS)}")
    return VARIANTS[key]


@dataclass(frozen=True)
class TrialResult:
    """Metrics from one replication, in original data units."""

    n_train: int
    seed: int
    r2: float
    rmse: float
    cp: float


@dataclass(frozen=True)
class ExperimentResult:
    """All replications of one (problem, variant, size) combination."""

    problem: str
    variant: str
    n_train: int
    trials: tuple[TrialResult, ...]
    failures: int

    def summary(self) -> dict[str, tuple[float, float]]:
        """Mean and sample standard deviation per metric."""
        out = {}
        for metric in ("r2", "rmse", "cp"):
            vals = np.array([getattr(t, metric) for t in self.trials])
            std = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
            out[metric] = (float(vals.mean()), std)
        return out


def lhs_sample(
    n: int, domain: np.ndarray, rng: np.random.Generator, candidates: int = 20
) -> np.ndarray:
    """Maximin Latin hypercube: one point per stratum in every dimension.

    Each dimension gets an independent stratum permutation and uniform
    jitter within strata.  Of ``candidates`` such draws the one with the
    largest minimum pairwise distance (on the unit cube) is kept; plain
    stratum jitter occasionally places near-duplicate points across a
    shared stratum boundary, which wrecks interpolation with a small
    nugget.  The draw order is fixed by the generator state.
    """
    dom = np.asarray(domain, dtype=float)
    if dom.ndim != 2 or dom.shape[1] != 2 or np.any(dom[:, 0] >= dom[:, 1]):
        raise ValueError("domain must be rows of (low, high) with low < high")
    if n < 1:
        raise ValueError("need at least one sample")
    if candidates < 1:
        raise ValueError("need at least one candidate draw")
    d = dom.shape[0]
    best = None
    best_sep = -np.inf
    for _ in range(candidates):
        cells = np.empty((n, d))
        for j in range(d):
            perm = rng.permutation(n)
            jitter = rng.uniform(size=n)
            cells[:, j] = (perm + jitter) / n
        if n == 1:
            best = cells
            break
        sep = np.min(distance.pdist(cells))
        if sep > best_sep:
            best_sep = sep
            best = cells
    return dom[:, 0] + best * (dom[:, 1] - dom[:, 0])


def r_squared(truth: np.ndarray, pred: np.ndarray) -> float:
    t = np.asarray(truth, dtype=float)
    p = np.asarray(pred, dtype=float)
    denom = float(np.sum(np.square(t - t.mean())))
    if denom == 0.0:
        raise ValueError("coefficient of determination is undefined for constant truth")
    return 1.0 - float(np.sum(np.square(t - p))) / denom


def rmse(truth: np.ndarray, pred: np.ndarray) -> float:
    t = np.asarray(truth, dtype=float)
    p = np.asarray(pred, dtype=float)
    return float(np.sqrt(np.mean(np.square(t - p))))


def coverage(truth: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> float:
    """Fraction of truth values inside the closed intervals."""
    t = np.asarray(truth, dtype=float)
    return float(np.mean((np.asarray(lower) <= t) & (t <= np.asarray(upper))))


# ---------------------------------------------------------------------------
# Problem definitions.


def _truth_a(x: np.ndarray) -> np.ndarray:
    # Scaled beta(1.4, 2.6) density bump on [3, 8], zero elsewhere.
    t = (np.asarray(x, dtype=float)[:, 0] - 3.0) / 5.0
    out = np.zeros_like(t)
    inside = (t > 0.0) & (t < 1.0)
    ti = t[inside]
    out[inside] = ti**0.4 * (1.0 - ti) ** 1.6 / (_beta_fn(1.4, 2.6) * 5.0)
    return out


def _truth_b(x: np.ndarray) -> np.ndarray:
    t = np.asarray(x, dtype=float)[:, 0]
    safe = np.where(t == 0.0, 1.0, t)
    return np.where(t == 0.0, 0.0, np.square(t) * np.sin(1.0 / safe))


def _truth_c(x: np.ndarray) -> np.ndarray:
    t = np.asarray(x, dtype=float)[:, 0]
    safe = np.where(t == 0.0, 1.0, t)
    val = np.sin(10.0 * math.pi * safe**2.5) / (10.0 * math.pi * safe)
    return np.where(t == 0.0, 0.0, val)


def _truth_c_scalar(t: float) -> float:
    return float(_truth_c(np.array([[t]]))[0])


def _truth_sinc2d(x: np.ndarray) -> np.ndarray:
    pts = np.asarray(x, dtype=float)
    # np.sinc(t / pi) = sin(t) / t with the removable singularity filled in.
    return -np.sinc(pts[:, 0] / np.pi) - np.sinc((pts[:, 1] + 2.0) / np.pi) + 2.0


def _env_lo(t: float) -> float:
    # Pointwise lower envelope of -sin(t)/t: max(-1/|t|, -1), -1 at t = 0.
    if t == 0.0:
        return -1.0
    return max(-1.0 / abs(t), -1.0)


def _env_hi(t: float) -> float:
    if t == 0.0:
        return 1.0
    return min(1.0 / abs(t), 1.0)


def _truth_ishigami(x: np.ndarray) -> np.ndarray:
    pts = np.asarray(x, dtype=float)
    return (
        np.sin(pts[:, 0]) * (1.0 + 0.1 * pts[:, 2] ** 4)
        + 7.0 * np.square(np.sin(pts[:, 1]))
    )


def _build_catalog() -> tuple[Problem, ...]:
    problems = (
        Problem(
            name="a",
            dim=1,
            domain=np.array([[0.0, 10.0]]),
            truth=_truth_a,
            bounds=BoundSpec.constant(lower=0.0),
            default_train_sizes=(10,),
            rmse_scale=100.0,
        ),
        Problem(
            name="b",
            dim=1,
            domain=np.array([[-math.pi / 8.0, math.pi / 8.0]]),
            truth=_truth_b,
            bounds=BoundSpec(
                lower=lambda p: -float(p[0]) ** 2,
                upper=lambda p: float(p[0]) ** 2,
            ),
            default_train_sizes=(15,),
            rmse_scale=100.0,
        ),
        Problem(
            name="c",
            dim=1,
            domain=np.array([[0.0, 1.0]]),
            truth=_truth_c,
            # One-sided bounds switching sides with the sign of the truth:
            # nonnegative stretches are bounded below by zero, negative ones
            # above by zero.
            bounds=BoundSpec(
                lower=lambda p: 0.0 if _truth_c_scalar(p[0]) >= 0.0 else None,
                upper=lambda p: None if _truth_c_scalar(p[0]) >= 0.0 else 0.0,
            ),
            default_train_sizes=(10,),
            rmse_scale=100.0,
        ),
        Problem(
            name="sinc2d",
            dim=2,
            domain=np.array([[-10.0, 10.0], [-10.0, 10.0]]),
            truth=_truth_sinc2d,
            bounds=BoundSpec(
                lower=lambda p: _env_lo(p[0]) + _env_lo(p[1] + 2.0) + 2.0,
                upper=lambda p: _env_hi(p[0]) + _env_hi(p[1] + 2.0) + 2.0,
            ),
            default_train_sizes=(30, 50),
        ),
        Problem(
            name="ishigami",
            dim=3,
            domain=np.array([[-math.pi, math.pi]] * 3),
            truth=_truth_ishigami,
            bounds=BoundSpec(
                lower=lambda p: max(min(p[0], 0.0), -1.0) * (1.0 + 0.1 * p[2] ** 4),
                upper=lambda p: min(max(p[0], 0.0), 1.0) * (1.0 + 0.1 * p[2] ** 4)
                + 7.0 * min(p[1] ** 2, 1.0),
            ),
            default_train_sizes=(20, 60, 100),
        ),
    )
    for problem in problems:
        validate_problem(problem)
    return problems


def validate_problem(
    problem: Problem,
    n_points: int = _VALIDATION_POINTS,
    seed: int = _VALIDATION_SEED,
) -> None:
    """Check that the declared bounds actually contain the truth.

    Samples the domain uniformly and requires l(x) <= f(x) <= u(x) up to a
    small numerical tolerance.  Raises ValueError with the worst violation
    otherwise.
    """
    rng = np.random.default_rng(seed)
    pts = rng.uniform(
        problem.domain[:, 0], problem.domain[:, 1], size=(n_points, problem.dim)
    )
    t = problem.truth(pts)
    lo, hi = problem.bounds.evaluate(pts)
    tol = _VALIDATION_TOL * (1.0 + np.abs(t))
    below = lo - t
    above = t - hi
    worst = max(float(np.max(below)), float(np.max(above)))
    if worst > np.max(tol):
        raise ValueError(
            f"problem {problem.name!r}: bounds fail to contain the truth "
            f"(worst violation {worst:.3e})"
        )


@functools.lru_cache(maxsize=1)
def problem_catalog() -> tuple[Problem, ...]:
    """The validated benchmark problems, built once per process."""
    return _build_catalog()


def get_problem(name: str) -> Problem:
    key = {"2d": "sinc2d"}.get(name, name)
    for problem in problem_catalog():
        if problem.name == key:
            return problem
    raise ValueError(
        f"unknown problem {name!r}; choose from {[p.name for p in problem_catalog()]}"
    )


# ---------------------------------------------------------------------------
# Experiment harness.


def _make_config(variant: MethodVariant, seed: int, overrides: Optional[dict]) -> InferenceConfig:
    kwargs = dict(overrides or {})
    kwargs["mode"] = "bounded" if variant.bounded_inference else "unbounded"
    kwargs["seed"] = seed
    return InferenceConfig(**kwargs)


def _design_and_model(
    problem: Problem,
    variant: MethodVariant,
    n_train: int,
    seed: int,
    config_overrides: Optional[dict],
) -> tuple[SurrogateModel, np.random.Generator]:
    """Fit one replication's surrogate; return the design stream too.

    Test points for multi-dimensional problems are drawn from the same
    stream after the design, so the stream is part of the trial contract.
    """
    design_rng = np.random.default_rng([seed, 0])
    x = lhs_sample(n_train, problem.domain, design_rng)
    y = problem.truth(x)
    needs_bounds = variant.bounded_inference or variant.project
    model = fit_surrogate(
        x,
        y,
        bounds=problem.bounds if needs_bounds else None,
        project=variant.project,
        config=_make_config(variant, seed, config_overrides),
    )
    return model, design_rng


def build_trial_model(
    problem: Problem,
    variant: MethodVariant,
    n_train: int,
    seed: int,
    config_overrides: Optional[dict] = None,
) -> SurrogateModel:
    """Fit the surrogate for one replication's design."""
    return _design_and_model(problem, variant, n_train, seed, config_overrides)[0]


def _test_points(problem: Problem, n_test: int, rng: np.random.Generator) -> np.ndarray:
    if problem.dim == 1:
        return np.linspace(problem.domain[0, 0], problem.domain[0, 1], n_test).reshape(-1, 1)
    return rng.uniform(problem.domain[:, 0], problem.domain[:, 1], size=(n_test, problem.dim))


def run_trial(
    problem: Problem,
    variant: MethodVariant,
    n_train: int,
    seed: int,
    n_test: int = 1000,
    config_overrides: Optional[dict] = None,
) -> TrialResult:
    """One replication: design, inference, prediction, metrics.

    The trial seed fixes the design draw, the test points (random for
    multi-dimensional problems, an equally spaced grid in 1-D), and the
    optimizer, so a replication is reproducible in isolation.
    """
    model, design_rng = _design_and_model(
        problem, variant, n_train, seed, config_overrides
    )
    x_test = _test_points(problem, n_test, design_rng)
    y_test = problem.truth(x_test)
    pred = model.predictor(x_test)
    lo, hi = model.interval(x_test, level=0.95)
    return TrialResult(
        n_train=n_train,
        seed=seed,
        r2=r_squared(y_test, pred),
        rmse=rmse(y_test, pred),
        cp=coverage(y_test, lo, hi),
    )


def run_experiment(
    problem: Problem,
    variant: MethodVariant,
    n_train: int,
    replications: int = 50,
    n_test: int = 1000,
    base_seed: int = 0,
    config_overrides: Optional[dict] = None,
) -> ExperimentResult:
    """Replicate one (problem, variant, size) cell over seeded designs.

    Replication k runs at seed base_seed + k.  Trials whose inference or
    fit fails are dropped and counted rather than aborting the cell.
    """
    trials = []
    failures = 0
    for rep in range(replications):
        seed = base_seed + rep
        try:
            trials.append(
                run_trial(problem, variant, n_train, seed, n_test, config_overrides)
            )
        except (InferenceError, gp.FitError):
            failures += 1
    return ExperimentResult(
        problem=problem.name,
        variant=variant.name,
        n_train=n_train,
        trials=tuple(trials),
        failures=failures,
    )


# ---------------------------------------------------------------------------
# Report assembly.  All functions return strings; callers write files.


def _fmt_float(v: float) -> str:
    return repr(float(v))


def trials_csv(results: Sequence[ExperimentResult]) -> str:
    lines = ["problem,variant,n_train,seed,r2,rmse,cp"]
    for res in results:
        for t in res.trials:
            lines.append(
                f"{res.problem},{res.variant},{t.n_train},{t.seed},"
                f"{_fmt_float(t.r2)},{_fmt_float(t.rmse)},{_fmt_float(t.cp)}"
            )
    return "\n".join(lines) + "\n"


def _fmt_cell(mean: float, std: float) -> str:
    return f"{mean:.3g} ± {std:.3g}"


def summary_markdown(results: Sequence[ExperimentResult]) -> str:
    """Markdown tables of mean ± sample std per metric.

    R-squared and coverage are reported times 100; RMSE is scaled by the
    problem's reporting scale (100 for the 1-D problems).
    """
    by_problem: dict[str, list[ExperimentResult]] = {}
    for res in results:
        by_problem.setdefault(res.problem, []).append(res)

    lines: list[str] = ["# Benchmark summary", ""]
    for pname, group in by_problem.items():
        problem = get_problem(pname)
        variants = [v for v in _VARIANT_ORDER if any(r.variant == v for r in group)]
        sizes = sorted({r.n_train for r in group})
        cells = {(r.variant, r.n_train): r for r in group}
        rmse_label = "RMSE×100" if problem.rmse_scale == 100.0 else "RMSE"

        lines.append(f"## Problem {pname}")
        lines.append("")
        lines.append("| N | metric | " + " | ".join(variants) + " |")
        lines.append("|---|--------|" + "|".join(["---"] * len(variants)) + "|")
        for n in sizes:
            for metric, label, scale in (
                ("r2", "R²×100", 100.0),
                ("rmse", rmse_label, problem.rmse_scale),
                ("cp", "CP×100", 100.0),
            ):
                row = [str(n), label]
                for v in variants:
                    res = cells.get((v, n))
                    if res is None or not res.trials:
                        row.append("-")
                    else:
                        mean, std = res.summary()[metric]
                        row.append(_fmt_cell(mean * scale, std * scale))
                lines.append("| " + " | ".join(row) + " |")
        failed = [
            f"{r.variant} N={r.n_train}: {r.failures}" for r in group if r.failures
        ]
        if failed:
            lines.append("")
            lines.append("Failed trials: " + "; ".join(failed))
        lines.append("")
    return "\n".join(lines)


def plot_data_csv(
    problem: Problem,
    variant: MethodVariant,
    n_train: int,
    seed: int = 0,
    resolution: int = 400,
    config_overrides: Optional[dict] = None,
) -> str:
    """Figure-regeneration data for 1-D problems.

    Grid columns: input, truth, bounds (empty cells where absent), the
    variant's point prediction, and its 95% interval endpoints.
    """
    if problem.dim != 1:
        raise ValueError("plot data is only defined for 1-D problems")
    model = build_trial_model(problem, variant, n_train, seed, config_overrides)
    grid = np.linspace(problem.domain[0, 0], problem.domain[0, 1], resolution).reshape(-1, 1)
    truth = problem.truth(grid)
    lo_b, hi_b = problem.bounds.evaluate(grid)
    pred = model.predictor(grid)
    lo95, hi95 = model.interval(grid, level=0.95)

    def bound_cell(v: float) -> str:
        return "" if not np.isfinite(v) else _fmt_float(v)

    lines = ["x,truth,l,u,mu_g,q025,q975"]
    for i in range(resolution):
        lines.append(
            ",".join(
                [
                    _fmt_float(grid[i, 0]),
                    _fmt_float(truth[i]),
                    bound_cell(lo_b[i]),
                    bound_cell(hi_b[i]),
                    _fmt_float(pred[i]),
                    _fmt_float(lo95[i]),
                    _fmt_float(hi95[i]),
                ]
            )
        )
    return "\n".join(lines) + "\n"
