"""Projection of Gaussian posteriors onto bound intervals.

Clipping a Gaussian random variable to an interval [l, u] produces a mixed
distribution: point masses at whichever bounds exist plus the untouched
Gaussian density in between.  Everything here is closed form; the moment
formulas are written so that no term divides by the interior mass, which
keeps them stable when the Gaussian sits many standard deviations outside
the interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy.special import ndtr, ndtri

from .gp import GaussianPrediction, TrainingSet, _as_2d

__all__ = [
    "BoundSpec",
    "ProjectedPosterior",
    "project_value",
    "project_posterior",
    "mean",
    "variance",
    "cdf",
    "quantile",
    "sample",
    "projected_mean_var",
    "projected_quantile",
    "projected_masses",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)

BoundFn = Callable[[np.ndarray], Optional[float]]
BoundLike = Union[None, float, int, BoundFn]


def _npdf(x: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * np.square(x)) / _SQRT_2PI


@dataclass(frozen=True)
class BoundSpec:
    """Pointwise bounds on a function: optional lower and upper callables.

    Each side may be absent entirely, a constant, or a callable mapping a
    single input point (1-d array) to a float, or to ``None`` where that
    side imposes no constraint at that particular point.  Wherever both
    sides are defined they must satisfy ``l(x) < u(x)`` strictly.
    """

    lower: BoundLike = None
    upper: BoundLike = None

    @classmethod
    def constant(cls, lower: Optional[float] = None, upper: Optional[float] = None) -> "BoundSpec":
        return cls(lower=lower, upper=upper)

    @property
    def is_unbounded(self) -> bool:
        return self.lower is None and self.upper is None

    @staticmethod
    def _side_at(side: BoundLike, x: np.ndarray, missing: float) -> float:
        if side is None:
            return missing
        val = side(x) if callable(side) else side
        if val is None:
            return missing
        val = float(val)
        if math.isnan(val):
            raise ValueError(f"bound evaluated to NaN at x={x!r}")
        return val

    def at(self, x) -> tuple[float, float]:
        """Evaluate both bounds at one point.

        Returns ``(lower, upper)`` with ``-inf`` / ``+inf`` standing in for
        an absent side.  Raises if the bounds cross or touch.
        """
        pt = np.asarray(x, dtype=float).reshape(-1)
        lo = self._side_at(self.lower, pt, -math.inf)
        hi = self._side_at(self.upper, pt, math.inf)
        if lo >= hi:
            raise ValueError(f"bounds must satisfy l < u strictly; got l={lo}, u={hi} at x={pt!r}")
        return lo, hi

    def evaluate(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Evaluate bounds at many points, shape (m, d) -> two (m,) arrays."""
        pts = _as_2d(x)
        m = pts.shape[0]
        if not callable(self.lower) and not callable(self.upper):
            lo = -math.inf if self.lower is None else float(self.lower)
            hi = math.inf if self.upper is None else float(self.upper)
            if lo >= hi:
                raise ValueError(f"bounds must satisfy l < u strictly; got l={lo}, u={hi}")
            return np.full(m, lo), np.full(m, hi)
        out_l = np.empty(m)
        out_u = np.empty(m)
        for i in range(m):
            out_l[i], out_u[i] = self.at(pts[i])
        return out_l, out_u

    def transform_normalized(self, train: TrainingSet) -> "BoundSpec":
        """Express these bounds in a training set's normalized coordinates.

        The returned spec takes normalized input points and yields bounds on
        the normalized output scale.  Clipping commutes with the affine
        output map, so projecting in either coordinate system agrees.
        """

        def _wrap(side: BoundLike) -> BoundLike:
            if side is None:
                return None

            def bound_n(xn: np.ndarray) -> Optional[float]:
                x = xn * train.input_scale + train.input_shift
                raw = side(x) if callable(side) else side
                if raw is None:
                    return None
                return (float(raw) - train.output_shift) / train.output_scale

            return bound_n

        return BoundSpec(lower=_wrap(self.lower), upper=_wrap(self.upper))


@dataclass(frozen=True)
class ProjectedPosterior:
    """The distribution of a Gaussian clipped to [lower, upper] at one point.

    ``mass_lower`` and ``mass_upper`` are the probabilities absorbed at the
    bounds, ``z`` the remaining interior mass; the three always sum to one.
    ``alpha`` and ``beta`` are the standardized bound positions, ``None``
    when the corresponding side is absent.
    """

    mu_f: float
    sigma_f: float
    lower: Optional[float]
    upper: Optional[float]
    alpha: Optional[float]
    beta: Optional[float]
    mass_lower: float
    mass_upper: float
    z: float

    @property
    def gamma(self) -> float:
        """Fraction of the absorbed mass sitting at the upper bound."""
        absorbed = 1.0 - self.z
        if absorbed <= 0.0:
            raise ValueError("gamma is undefined when no mass is absorbed at the bounds")
        return self.mass_upper / absorbed


def project_value(value: float, lower: Optional[float] = None, upper: Optional[float] = None) -> float:
    """Clip a scalar to [lower, upper]; either side may be None."""
    lo = -math.inf if lower is None else float(lower)
    hi = math.inf if upper is None else float(upper)
    if lo >= hi:
        raise ValueError(f"bounds must satisfy l < u strictly; got l={lo}, u={hi}")
    return float(min(max(float(value), lo), hi))


def project_posterior(
    pred: GaussianPrediction,
    lower: Optional[float] = None,
    upper: Optional[float] = None,
) -> ProjectedPosterior:
    """Describe the distribution of the clipped posterior at one point.

    A zero-variance prediction degenerates to a point mass at the clipped
    mean; otherwise the bound masses are Gaussian tail probabilities.
    """
    if not math.isfinite(pred.mean) or not math.isfinite(pred.variance) or pred.variance < 0:
        raise ValueError("prediction must have finite mean and nonnegative variance")
    lo = -math.inf if lower is None else float(lower)
    hi = math.inf if upper is None else float(upper)
    if lo >= hi:
        raise ValueError(f"bounds must satisfy l < u strictly; got l={lo}, u={hi}")
    mu = float(pred.mean)
    sigma = math.sqrt(pred.variance)

    if sigma == 0.0:
        # Point mass at the clipped mean; a mean at or below l counts as
        # absorbed at l, mirroring project_value's inclusive clipping.
        if mu <= lo:
            masses = (1.0, 0.0, 0.0)
        elif mu >= hi:
            masses = (0.0, 1.0, 0.0)
        else:
            masses = (0.0, 0.0, 1.0)
        alpha = math.inf if mu <= lo else -math.inf
        beta = -math.inf if mu >= hi else math.inf
        return ProjectedPosterior(
            mu_f=mu,
            sigma_f=0.0,
            lower=lower if lower is None else lo,
            upper=upper if upper is None else hi,
            alpha=None if lower is None else alpha,
            beta=None if upper is None else beta,
            mass_lower=masses[0],
            mass_upper=masses[1],
            z=masses[2],
        )

    alpha = (lo - mu) / sigma if lower is not None else None
    beta = (hi - mu) / sigma if upper is not None else None
    mass_lower = float(ndtr(alpha)) if alpha is not None else 0.0
    mass_upper = float(1.0 - ndtr(beta)) if beta is not None else 0.0
    z = max(0.0, 1.0 - mass_lower - mass_upper)
    return ProjectedPosterior(
        mu_f=mu,
        sigma_f=sigma,
        lower=None if lower is None else lo,
        upper=None if upper is None else hi,
        alpha=alpha,
        beta=beta,
        mass_lower=mass_lower,
        mass_upper=mass_upper,
        z=z,
    )


def projected_mean_var(
    mu: np.ndarray,
    sigma: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Mean and variance of clipped Gaussians, vectorized.

    ``lower`` / ``upper`` use -inf / +inf for absent sides.  The formulas
    are evaluated in the standardized variable (x - mu) / sigma, so large
    bound magnitudes do not feed catastrophic cancellation, and no term
    divides by the interior mass.
    """
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    lower = np.broadcast_to(np.asarray(lower, dtype=float), mu.shape)
    upper = np.broadcast_to(np.asarray(upper, dtype=float), mu.shape)

    out_mean = np.array(mu, dtype=float, copy=True)
    out_var = np.square(sigma)

    degenerate = sigma == 0.0
    if np.any(degenerate):
        out_mean[degenerate] = np.clip(mu[degenerate], lower[degenerate], upper[degenerate])
        out_var[degenerate] = 0.0

    live = ~degenerate
    if np.any(live):
        m, s = mu[live], sigma[live]
        lo, hi = lower[live], upper[live]
        has_l = np.isfinite(lo)
        has_u = np.isfinite(hi)
        alpha = np.where(has_l, (lo - m) / np.where(s > 0, s, 1.0), 0.0)
        beta = np.where(has_u, (hi - m) / np.where(s > 0, s, 1.0), 0.0)
        cdf_a = np.where(has_l, ndtr(alpha), 0.0)
        cdf_b = np.where(has_u, ndtr(beta), 1.0)
        pdf_a = np.where(has_l, _npdf(alpha), 0.0)
        pdf_b = np.where(has_u, _npdf(beta), 0.0)
        z = cdf_b - cdf_a
        # First and second moments of clip(W, alpha, beta) for standard W.
        m1 = pdf_a - pdf_b + alpha * cdf_a + beta * (1.0 - cdf_b)
        m2 = (
            z
            + alpha * pdf_a
            - beta * pdf_b
            + np.square(alpha) * cdf_a
            + np.square(beta) * (1.0 - cdf_b)
        )
        mean_live = m + s * m1
        var_live = np.square(s) * (m2 - np.square(m1))
        mean_live = np.clip(mean_live, lo, hi)
        var_live = np.clip(var_live, 0.0, np.square(s))
        out_mean[live] = mean_live
        out_var[live] = var_live

    return out_mean, out_var


def projected_masses(
    mu: np.ndarray,
    sigma: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Bound masses and interior mass of clipped Gaussians, vectorized."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    lower = np.broadcast_to(np.asarray(lower, dtype=float), mu.shape)
    upper = np.broadcast_to(np.asarray(upper, dtype=float), mu.shape)

    safe_s = np.where(sigma > 0, sigma, 1.0)
    has_l = np.isfinite(lower)
    has_u = np.isfinite(upper)
    mass_l = np.where(has_l, ndtr((lower - mu) / safe_s), 0.0)
    mass_u = np.where(has_u, ndtr((mu - upper) / safe_s), 0.0)

    degenerate = sigma == 0.0
    if np.any(degenerate):
        mass_l = np.where(degenerate, np.where(has_l & (mu <= lower), 1.0, 0.0), mass_l)
        mass_u = np.where(degenerate, np.where(has_u & (mu >= upper), 1.0, 0.0), mass_u)

    z = np.maximum(0.0, 1.0 - mass_l - mass_u)
    return mass_l, mass_u, z


def projected_quantile(
    mu: np.ndarray,
    sigma: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    p: float,
) -> np.ndarray:
    """p-quantile of clipped Gaussians, vectorized; p strictly in (0, 1)."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile level must lie strictly in (0, 1), got {p}")
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    lower = np.broadcast_to(np.asarray(lower, dtype=float), mu.shape)
    upper = np.broadcast_to(np.asarray(upper, dtype=float), mu.shape)

    mass_l, mass_u, _ = projected_masses(mu, sigma, lower, upper)
    interior = mu + sigma * ndtri(p)
    out = np.where(p <= mass_l, lower, np.where(p > 1.0 - mass_u, upper, interior))
    degenerate = sigma == 0.0
    if np.any(degenerate):
        out = np.where(degenerate, np.clip(mu, lower, upper), out)
    return out


def _bounds_of(pp: ProjectedPosterior) -> tuple[float, float]:
    lo = -math.inf if pp.lower is None else pp.lower
    hi = math.inf if pp.upper is None else pp.upper
    return lo, hi


def mean(pp: ProjectedPosterior) -> float:
    """Mean of the projected posterior; always lies within the bounds."""
    lo, hi = _bounds_of(pp)
    m, _ = projected_mean_var(
        np.array([pp.mu_f]), np.array([pp.sigma_f]), np.array([lo]), np.array([hi])
    )
    return float(m[0])


def variance(pp: ProjectedPosterior) -> float:
    """Variance of the projected posterior; never exceeds the Gaussian's."""
    lo, hi = _bounds_of(pp)
    _, v = projected_mean_var(
        np.array([pp.mu_f]), np.array([pp.sigma_f]), np.array([lo]), np.array([hi])
    )
    return float(v[0])


def cdf(pp: ProjectedPosterior, g: float) -> float:
    """Distribution function of the projected posterior.

    Zero below the lower bound, one at and above the upper bound, the
    underlying Gaussian CDF in between; the jumps at the bounds carry the
    absorbed masses.
    """
    g = float(g)
    lo, hi = _bounds_of(pp)
    if pp.sigma_f == 0.0:
        v = min(max(pp.mu_f, lo), hi)
        return 1.0 if g >= v else 0.0
    if g < lo:
        return 0.0
    if g >= hi:
        return 1.0
    return float(ndtr((g - pp.mu_f) / pp.sigma_f))


def quantile(pp: ProjectedPosterior, p: float) -> float:
    """Quantile function; maps levels inside the bound masses onto the bounds."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile level must lie strictly in (0, 1), got {p}")
    lo, hi = _bounds_of(pp)
    if pp.sigma_f == 0.0:
        return float(min(max(pp.mu_f, lo), hi))
    if p <= pp.mass_lower:
        return float(lo)
    if p > 1.0 - pp.mass_upper:
        return float(hi)
    return float(pp.mu_f + pp.sigma_f * ndtri(p))


def sample(pp: ProjectedPosterior, rng: np.random.Generator, size=None):
    """Draw from the projected posterior: sample the Gaussian, then clip."""
    lo, hi = _bounds_of(pp)
    draws = rng.normal(pp.mu_f, pp.sigma_f, size=size)
    clipped = np.clip(draws, lo, hi)
    if size is None:
        return float(clipped)
    return clipped
