"""Fitted surrogate models: normalization, inference, projected prediction.

This is the layer everything downstream (benchmarks, density experiments,
the service) talks to.  It owns the round trip between original data units
and the normalized coordinates the GP works in, and it evaluates bounds
where they are needed: at training sites (through the inference criterion)
and at prediction sites (for projection).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import ndtri

from . import gp
from .inference import InferenceConfig, InferenceResult, infer
from .projection import (
    BoundSpec,
    projected_mean_var,
    projected_masses,
    projected_quantile,
)

__all__ = ["PredictionTable", "SurrogateModel", "fit_surrogate"]

# 95% central interval half-width in standard deviations.
Z95 = float(ndtri(0.975))

_PREDICT_CHUNK = 16384


@dataclass(frozen=True)
class PredictionTable:
    """Vectorized predictions at query points, all in original data units.

    ``lower`` / ``upper`` hold -inf / +inf where a bound is absent.  The
    projected columns (``mu_g`` etc.) equal their Gaussian counterparts when
    the model carries no bounds.
    """

    x: np.ndarray
    mu_f: np.ndarray
    sigma_f: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    mu_g: np.ndarray
    sigma_g: np.ndarray
    q025: np.ndarray
    q500: np.ndarray
    q975: np.ndarray
    mass_lower: np.ndarray
    mass_upper: np.ndarray


@dataclass(frozen=True)
class SurrogateModel:
    """A fitted GP plus everything needed to predict in original units."""

    fitted: gp.FittedGP
    bounds: Optional[BoundSpec]
    project: bool
    inference: InferenceResult

    @property
    def train(self) -> gp.TrainingSet:
        return self.fitted.train

    @property
    def params(self) -> gp.HyperParams:
        return self.fitted.params

    def predict_gaussian(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Unprojected posterior mean and standard deviation, original units."""
        pts = np.asarray(x, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, self.train.dim)
        mu = np.empty(pts.shape[0])
        sd = np.empty(pts.shape[0])
        scale = self.train.output_scale
        for start in range(0, pts.shape[0], _PREDICT_CHUNK):
            chunk = pts[start : start + _PREDICT_CHUNK]
            mean_n, var_n = gp.predict_many(self.fitted, self.train.normalize_inputs(chunk))
            mu[start : start + chunk.shape[0]] = self.train.denormalize_outputs(mean_n)
            sd[start : start + chunk.shape[0]] = np.sqrt(var_n) * scale
        return mu, sd

    def bound_arrays(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Bounds at the query points (original units; infinities if absent)."""
        pts = np.asarray(x, dtype=float)
        if self.bounds is None:
            m = pts.shape[0] if pts.ndim == 2 else 1
            return np.full(m, -np.inf), np.full(m, np.inf)
        return self.bounds.evaluate(pts)

    def predictor(self, x: np.ndarray) -> np.ndarray:
        """The model's point prediction: projected mean if projecting."""
        mu, sd = self.predict_gaussian(x)
        if not self.project or self.bounds is None:
            return mu
        lo, hi = self.bound_arrays(x)
        mu_g, _ = projected_mean_var(mu, sd, lo, hi)
        return mu_g

    def interval(self, x: np.ndarray, level: float = 0.95) -> tuple[np.ndarray, np.ndarray]:
        """Central credible interval per point.

        Projecting models use quantiles of the clipped distribution, others
        the Gaussian mean +/- z * sd; the two coincide when no bound is in
        reach.
        """
        if not 0.0 < level < 1.0:
            raise ValueError("interval level must lie strictly in (0, 1)")
        mu, sd = self.predict_gaussian(x)
        tail = (1.0 - level) / 2.0
        if not self.project or self.bounds is None:
            half = float(ndtri(1.0 - tail)) * sd
            return mu - half, mu + half
        lo, hi = self.bound_arrays(x)
        return (
            projected_quantile(mu, sd, lo, hi, tail),
            projected_quantile(mu, sd, lo, hi, 1.0 - tail),
        )

    def predict_table(self, x: np.ndarray) -> PredictionTable:
        """Full prediction table at the query points."""
        pts = np.asarray(x, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, self.train.dim)
        mu, sd = self.predict_gaussian(pts)
        lo, hi = self.bound_arrays(pts)
        mu_g, var_g = projected_mean_var(mu, sd, lo, hi)
        mass_l, mass_u, _ = projected_masses(mu, sd, lo, hi)
        return PredictionTable(
            x=pts,
            mu_f=mu,
            sigma_f=sd,
            lower=lo,
            upper=hi,
            mu_g=mu_g,
            sigma_g=np.sqrt(var_g),
            q025=projected_quantile(mu, sd, lo, hi, 0.025),
            q500=projected_quantile(mu, sd, lo, hi, 0.5),
            q975=projected_quantile(mu, sd, lo, hi, 0.975),
            mass_lower=mass_l,
            mass_upper=mass_u,
        )


def fit_surrogate(
    inputs: np.ndarray,
    outputs: np.ndarray,
    bounds: Optional[BoundSpec] = None,
    project: Optional[bool] = None,
    config: Optional[InferenceConfig] = None,
    normalize: bool = True,
) -> SurrogateModel:
    """Normalize data, infer hyperparameters, and condition the GP.

    ``config.mode`` decides whether inference sees the bounds; ``project``
    decides whether predictions do (default: whenever bounds exist).  The
    four combinations cover bound-aware inference with and without
    projected prediction and their unbounded counterparts.
    """
    train = gp.TrainingSet.from_data(inputs, outputs, normalize=normalize)
    if config is None:
        mode = "bounded" if bounds is not None else "unbounded"
        config = InferenceConfig(mode=mode)
    if config.mode == "bounded" and bounds is None:
        raise ValueError("bounded inference requires bounds")
    result = infer(train, bounds, config)
    fitted = gp.fit(train, result.params)
    if project is None:
        project = bounds is not None
    return SurrogateModel(fitted=fitted, bounds=bounds, project=bool(project), inference=result)
