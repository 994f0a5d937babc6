"""Density approximation by non-negative GP interpolation.

A target density is observed at a Latin hypercube design over a support
box, a surrogate is fitted with the constant lower bound 0, and the
prediction is normalized into a density by Monte Carlo integration over
the box.  Approximation quality is the squared Hellinger distance to the
target, estimated on the same uniform sample stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .benchmarks import MethodVariant, lhs_sample
from .inference import InferenceConfig, InferenceError
from .projection import BoundSpec
from .surrogate import SurrogateModel, fit_surrogate
from . import gp

__all__ = [
    "TargetDensity",
    "DensityApproximation",
    "DensityTrial",
    "DensityExperimentResult",
    "banana_pdf",
    "mixture_pdf",
    "target_catalog",
    "get_target",
    "build_approximation",
    "hellinger_sq",
    "run_density_experiment",
    "density_csv",
    "density_summary_markdown",
    "contour_csv",
]


def _gauss2(x: np.ndarray, mean, cov) -> np.ndarray:
    """Bivariate normal density at rows of x."""
    d = x - np.asarray(mean, dtype=float)
    a, b, c = cov[0][0], cov[0][1], cov[1][1]
    det = a * c - b * b
    q = (c * d[:, 0] ** 2 - 2.0 * b * d[:, 0] * d[:, 1] + a * d[:, 1] ** 2) / det
    return np.exp(-0.5 * q) / (2.0 * math.pi * math.sqrt(det))


def _eval_shape(x) -> tuple[np.ndarray, bool]:
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 1:
        return pts.reshape(1, -1), True
    return pts, False


def banana_pdf(x) -> np.ndarray:
    """Twisted Gaussian with banana-shaped contours.

    A zero-mean bivariate normal with variances (100, 1) evaluated at the
    bent coordinates (x1, x2 + 0.03 x1^2 - 3); the unit variance in the
    bent coordinate is what makes the contours banana-shaped rather than
    a blob.  Accepts a single 2-vector or an (n, 2) array.
    """
    pts, single = _eval_shape(x)
    bent = np.column_stack([pts[:, 0], pts[:, 1] + 0.03 * pts[:, 0] ** 2 - 3.0])
    out = _gauss2(bent, (0.0, 0.0), ((100.0, 0.0), (0.0, 1.0)))
    return float(out[0]) if single else out


def mixture_pdf(x) -> np.ndarray:
    """Three-component Gaussian mixture with correlations 0, +0.9, -0.9."""
    pts, single = _eval_shape(x)
    out = 0.34 * _gauss2(pts, (0.0, 0.0), ((1.0, 0.0), (0.0, 1.0)))
    out += 0.33 * _gauss2(pts, (-3.0, -3.0), ((1.0, 0.9), (0.9, 1.0)))
    out += 0.33 * _gauss2(pts, (2.0, 2.0), ((1.0, -0.9), (-0.9, 1.0)))
    return float(out[0]) if single else out


@dataclass(frozen=True)
class TargetDensity:
    """A non-negative target function on a box, treated as a density."""

    name: str
    dim: int
    pdf: callable
    support_box: np.ndarray  # (dim, 2) rows of (low, high)

    @property
    def volume(self) -> float:
        box = self.support_box
        return float(np.prod(box[:, 1] - box[:, 0]))

    def uniform_points(self, n: int, seed: int) -> np.ndarray:
        """The trial's shared Monte Carlo stream over the support box."""
        rng = np.random.default_rng([seed, 1])
        box = self.support_box
        return rng.uniform(box[:, 0], box[:, 1], size=(n, self.dim))


def target_catalog() -> dict[str, TargetDensity]:
    return {
        "nonlinear": TargetDensity(
            name="nonlinear",
            dim=2,
            pdf=banana_pdf,
            support_box=np.array([[-20.0, 20.0], [-10.0, 5.0]]),
        ),
        "multimodal": TargetDensity(
            name="multimodal",
            dim=2,
            pdf=mixture_pdf,
            support_box=np.array([[-6.0, 6.0], [-6.0, 6.0]]),
        ),
    }


def get_target(name: str) -> TargetDensity:
    catalog = target_catalog()
    if name not in catalog:
        raise ValueError(f"unknown target {name!r}; choose from {sorted(catalog)}")
    return catalog[name]


@dataclass(frozen=True, eq=False)
class DensityApproximation:
    """A fitted surrogate normalized into a density over the support box.

    The uniform Monte Carlo stream used for the normalizer is cached
    (points and floored predictions) so the Hellinger estimate reuses the
    exact same sample.
    """

    model: SurrogateModel
    variant: str
    normalizer: float
    mc_samples: int
    seed: int
    support_box: np.ndarray = field(repr=False)
    mc_points: np.ndarray = field(repr=False)
    mc_fhat: np.ndarray = field(repr=False)

    @property
    def volume(self) -> float:
        box = self.support_box
        return float(np.prod(box[:, 1] - box[:, 0]))

    def raw_prediction(self, x: np.ndarray) -> np.ndarray:
        """Surrogate prediction floored at zero (a no-op when projecting)."""
        return np.maximum(self.model.predictor(x), 0.0)

    def density(self, x: np.ndarray) -> np.ndarray:
        """The normalized approximation."""
        return self.raw_prediction(x) / self.normalizer

    def _stream(
        self, mc_samples: Optional[int], seed: Optional[int]
    ) -> tuple[np.ndarray, np.ndarray]:
        """Cached (points, floored predictions), or a fresh evaluation."""
        n = self.mc_samples if mc_samples is None else mc_samples
        s = self.seed if seed is None else seed
        if n == self.mc_samples and s == self.seed:
            return self.mc_points, self.mc_fhat
        rng = np.random.default_rng([s, 1])
        box = self.support_box
        pts = rng.uniform(box[:, 0], box[:, 1], size=(n, box.shape[0]))
        return pts, self.raw_prediction(pts)

    def normalized_mass(
        self, mc_samples: Optional[int] = None, seed: Optional[int] = None
    ) -> float:
        """Monte Carlo integral of the normalized density over the box.

        Exactly 1 on the cached stream (the normalizer's definition); a
        fresh seed re-estimates it as a self-consistency check.
        """
        _, fhat = self._stream(mc_samples, seed)
        return self.volume * float(fhat.mean()) / self.normalizer


_DEFAULT_MC = 1_000_000


def build_approximation(
    target: TargetDensity,
    variant: MethodVariant,
    n_train: int,
    seed: int,
    mc_samples: int = _DEFAULT_MC,
    config_overrides: Optional[dict] = None,
) -> DensityApproximation:
    """Fit one replication's density approximation.

    The design is a Latin hypercube over the support box; outputs are the
    raw target values.  Bound-aware variants use the constant lower bound
    0.  The normalizer is the uniform Monte Carlo integral of the floored
    prediction over the box.
    """
    if n_train < target.dim + 2:
        raise ValueError("need at least dim + 2 training points")
    if mc_samples < 1:
        raise ValueError("mc_samples must be positive")
    design_rng = np.random.default_rng([seed, 0])
    x = lhs_sample(n_train, target.support_box, design_rng)
    y = target.pdf(x)

    kwargs = dict(config_overrides or {})
    kwargs["mode"] = "bounded" if variant.bounded_inference else "unbounded"
    kwargs["seed"] = seed
    needs_bounds = variant.bounded_inference or variant.project
    model = fit_surrogate(
        x,
        y,
        bounds=BoundSpec.constant(lower=0.0) if needs_bounds else None,
        project=variant.project,
        config=InferenceConfig(**kwargs),
    )

    pts = target.uniform_points(mc_samples, seed)
    fhat = np.maximum(model.predictor(pts), 0.0)
    normalizer = target.volume * float(fhat.mean())
    if not normalizer > 0.0:
        raise InferenceError("approximation is nonpositive over the entire box")
    return DensityApproximation(
        model=model,
        variant=variant.name,
        normalizer=normalizer,
        mc_samples=mc_samples,
        seed=seed,
        support_box=np.array(target.support_box, copy=True),
        mc_points=pts,
        mc_fhat=fhat,
    )


def hellinger_sq(
    target: TargetDensity,
    approx: DensityApproximation,
    mc_samples: Optional[int] = None,
    seed: Optional[int] = None,
) -> float:
    """Monte Carlo estimate of the squared Hellinger distance.

    Integrates (1/2)(sqrt(f) - sqrt(fbar))^2 over the support box, where
    fbar is the normalized approximation.  Defaults to the stream cached
    at build time; passing a different seed or sample count draws a fresh
    stream and re-evaluates the surrogate.  The estimate is clamped into
    [0, 1], the analytic range.
    """
    pts, fhat = approx._stream(mc_samples, seed)
    fbar = fhat / approx.normalizer
    diff = np.sqrt(target.pdf(pts)) - np.sqrt(fbar)
    h2 = 0.5 * target.volume * float(np.mean(np.square(diff)))
    return min(max(h2, 0.0), 1.0)


@dataclass(frozen=True)
class DensityTrial:
    n_train: int
    seed: int
    h2: float
    normalizer: float


@dataclass(frozen=True)
class DensityExperimentResult:
    target: str
    variant: str
    n_train: int
    trials: tuple[DensityTrial, ...]
    failures: int

    def summary(self) -> tuple[float, float]:
        vals = np.array([t.h2 for t in self.trials])
        std = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
        return float(vals.mean()), std


def run_density_experiment(
    target: TargetDensity,
    variant: MethodVariant,
    n_train: int,
    replications: int = 50,
    mc_samples: int = _DEFAULT_MC,
    base_seed: int = 0,
    config_overrides: Optional[dict] = None,
) -> DensityExperimentResult:
    """Replicate one (target, variant, size) cell over seeded designs."""
    trials = []
    failures = 0
    for rep in range(replications):
        seed = base_seed + rep
        try:
            approx = build_approximation(
                target, variant, n_train, seed, mc_samples, config_overrides
            )
        except (InferenceError, gp.FitError):
            failures += 1
            continue
        trials.append(
            DensityTrial(
                n_train=n_train,
                seed=seed,
                h2=hellinger_sq(target, approx),
                normalizer=approx.normalizer,
            )
        )
    return DensityExperimentResult(
        target=target.name,
        variant=variant.name,
        n_train=n_train,
        trials=tuple(trials),
        failures=failures,
    )


def density_csv(results: Sequence[DensityExperimentResult]) -> str:
    """One row per trial, full float precision."""
    lines = ["target,variant,n_train,seed,h2,normalizer"]
    for res in results:
        for t in res.trials:
            lines.append(
                f"{res.target},{res.variant},{t.n_train},{t.seed},{t.h2!r},{t.normalizer!r}"
            )
    return "\n".join(lines) + "\n"


def density_summary_markdown(results: Sequence[DensityExperimentResult]) -> str:
    """Markdown table of mean +/- sample std of H^2 per cell."""
    by_target: dict[str, list[DensityExperimentResult]] = {}
    for res in results:
        by_target.setdefault(res.target, []).append(res)

    lines = ["# Density approximation summary", ""]
    for tname, group in by_target.items():
        variants = []
        for res in group:
            if res.variant not in variants:
                variants.append(res.variant)
        sizes = sorted({r.n_train for r in group})
        cells = {(r.variant, r.n_train): r for r in group}
        lines.append(f"## Target {tname} (squared Hellinger distance)")
        lines.append("")
        lines.append("| N | " + " | ".join(variants) + " |")
        lines.append("|---|" + "|".join(["---"] * len(variants)) + "|")
        for n in sizes:
            row = [str(n)]
            for v in variants:
                res = cells.get((v, n))
                if res is None or not res.trials:
                    row.append("-")
                else:
                    mean, std = res.summary()
                    row.append(f"{mean:.3g} ± {std:.3g}")
            lines.append("| " + " | ".join(row) + " |")
        lines.append("")
        failed = [f"{r.variant} N={r.n_train}: {r.failures}" for r in group if r.failures]
        if failed:
            lines.append("Dropped replications: " + "; ".join(failed))
            lines.append("")
    return "\n".join(lines)


def contour_csv(
    target: TargetDensity, approx: DensityApproximation, resolution: int = 200
) -> str:
    """Grid evaluations of the target and the raw approximation.

    Columns x1, x2, f, fhat over a resolution x resolution grid spanning
    the support box, for contour plotting.
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    box = target.support_box
    g1 = np.linspace(box[0, 0], box[0, 1], resolution)
    g2 = np.linspace(box[1, 0], box[1, 1], resolution)
    xx, yy = np.meshgrid(g1, g2)
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    f = target.pdf(pts)
    fhat = approx.raw_prediction(pts)
    lines = ["x1,x2,f,fhat"]
    for i in range(pts.shape[0]):
        lines.append(f"{pts[i, 0]!r},{pts[i, 1]!r},{f[i]!r},{fhat[i]!r}")
    return "\n".join(lines) + "\n"
