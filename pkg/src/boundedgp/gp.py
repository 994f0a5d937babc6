"""Exact Gaussian process regression with a squared-exponential ARD kernel.

A zero-mean GP conditioned on noise-free observations.  All heavy linear
algebra goes through one Cholesky factorization per fit; leave-one-out
predictions come from closed-form identities on the inverse Gram matrix
rather than refitting.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.spatial.distance import cdist

__all__ = [
    "TrainingSet",
    "HyperParams",
    "GaussianPrediction",
    "FittedGP",
    "FitError",
    "kernel",
    "kernel_matrix",
    "fit",
    "predict",
    "predict_many",
    "loo_predictions",
    "loo_arrays",
]

# Jitter escalation schedule, as multiples of the signal variance.
_JITTER_START = 1e-10
_JITTER_MAX = 1e-4
_JITTER_FACTOR = 10.0


class FitError(RuntimeError):
    """Cholesky factorization failed even at the maximum jitter level.

    Attributes
    ----------
    jitter : float
        Last (largest) jitter value that was attempted, in absolute units.
    """

    def __init__(self, message: str, jitter: float):
        super().__init__(message)
        self.jitter = jitter


def _as_2d(x: np.ndarray) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-d array of points, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class TrainingSet:
    """Training data held in normalized coordinates.

    ``inputs`` and ``outputs`` are stored after the affine normalization has
    been applied; the shift/scale fields are what map original data into the
    stored representation, so ``inputs = (raw - input_shift) / input_scale``.

    Parameters
    ----------
    inputs : ndarray, shape (n, d)
        Normalized input sites, one row per observation.
    outputs : ndarray, shape (n,)
        Normalized responses.
    input_shift, input_scale : ndarray, shape (d,)
        Per-dimension affine map from original to stored inputs.
    output_shift, output_scale : float
        Affine map from original to stored outputs.
    """

    inputs: np.ndarray
    outputs: np.ndarray
    input_shift: np.ndarray
    input_scale: np.ndarray
    output_shift: float
    output_scale: float

    def __post_init__(self):
        inputs = _as_2d(self.inputs)
        outputs = np.asarray(self.outputs, dtype=float).reshape(-1)
        if inputs.shape[0] != outputs.shape[0]:
            raise ValueError(
                f"inputs have {inputs.shape[0]} rows but outputs have {outputs.shape[0]}"
            )
        if inputs.shape[0] == 0:
            raise ValueError("training set must contain at least one observation")
        if not np.all(np.isfinite(inputs)) or not np.all(np.isfinite(outputs)):
            raise ValueError("training data must be finite")
        # Exact duplicate rows make the Gram matrix singular for any jitter
        # the schedule allows, so reject them up front.
        if len(np.unique(inputs, axis=0)) != inputs.shape[0]:
            raise ValueError("training inputs contain duplicate rows")
        shift = np.asarray(self.input_shift, dtype=float).reshape(-1)
        scale = np.asarray(self.input_scale, dtype=float).reshape(-1)
        if shift.shape[0] != inputs.shape[1] or scale.shape[0] != inputs.shape[1]:
            raise ValueError("normalization metadata does not match input dimension")
        if np.any(scale <= 0) or float(self.output_scale) <= 0:
            raise ValueError("normalization scales must be positive")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "outputs", outputs)
        object.__setattr__(self, "input_shift", shift)
        object.__setattr__(self, "input_scale", scale)
        object.__setattr__(self, "output_shift", float(self.output_shift))
        object.__setattr__(self, "output_scale", float(self.output_scale))

    @classmethod
    def from_data(cls, inputs, outputs, normalize: bool = True) -> "TrainingSet":
        """Build a training set from raw data, optionally standardizing it.

        With ``normalize=True`` each input dimension and the outputs are
        shifted to zero mean and scaled to unit standard deviation.  A
        degenerate (constant) column keeps scale 1 so the map stays
        invertible.
        """
        raw_x = _as_2d(inputs)
        raw_y = np.asarray(outputs, dtype=float).reshape(-1)
        if not np.all(np.isfinite(raw_x)) or not np.all(np.isfinite(raw_y)):
            raise ValueError("training data must be finite")
        if normalize:
            shift = raw_x.mean(axis=0)
            scale = raw_x.std(axis=0)
            scale = np.where(scale > 0, scale, 1.0)
            y_shift = float(raw_y.mean())
            y_scale = float(raw_y.std())
            if y_scale <= 0:
                y_scale = 1.0
        else:
            shift = np.zeros(raw_x.shape[1])
            scale = np.ones(raw_x.shape[1])
            y_shift, y_scale = 0.0, 1.0
        return cls(
            inputs=(raw_x - shift) / scale,
            outputs=(raw_y - y_shift) / y_scale,
            input_shift=shift,
            input_scale=scale,
            output_shift=y_shift,
            output_scale=y_scale,
        )

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    def normalize_inputs(self, raw: np.ndarray) -> np.ndarray:
        return (_as_2d(raw) - self.input_shift) / self.input_scale

    def denormalize_inputs(self, normalized: np.ndarray) -> np.ndarray:
        return _as_2d(normalized) * self.input_scale + self.input_shift

    def normalize_outputs(self, raw) -> np.ndarray:
        return (np.asarray(raw, dtype=float) - self.output_shift) / self.output_scale

    def denormalize_outputs(self, normalized) -> np.ndarray:
        return np.asarray(normalized, dtype=float) * self.output_scale + self.output_shift


@dataclass(frozen=True)
class HyperParams:
    """Kernel hyperparameters: signal variance, ARD lengthscales, nugget.

    The nugget is an absolute value added to the Gram matrix diagonal; it is
    a numerical regularizer, not a noise model, and predictions at training
    sites still interpolate up to its magnitude.
    """

    sigma2: float
    lengthscales: np.ndarray
    nugget: float = 0.0

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        if ls.ndim != 1 or np.any(ls <= 0) or not np.all(np.isfinite(ls)):
            raise ValueError("lengthscales must be positive finite values")
        if not np.isfinite(self.sigma2) or self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive and finite")
        if self.nugget < 0 or not np.isfinite(self.nugget):
            raise ValueError("nugget must be nonnegative and finite")
        object.__setattr__(self, "lengthscales", ls)
        object.__setattr__(self, "sigma2", float(self.sigma2))
        object.__setattr__(self, "nugget", float(self.nugget))


@dataclass(frozen=True)
class GaussianPrediction:
    """Posterior mean and variance at a single point."""

    mean: float
    variance: float


@dataclass(frozen=True)
class FittedGP:
    """A conditioned GP: training data, hyperparameters and factorizations.

    ``chol`` is the lower Cholesky factor of ``K + nugget * I`` (plus any
    jitter the fit had to add), ``alpha`` solves ``K alpha = y``, and
    ``kinv_diag`` holds the diagonal of the inverse Gram matrix, which is
    what the closed-form leave-one-out identities consume.
    """

    train: TrainingSet
    params: HyperParams
    chol: np.ndarray
    alpha: np.ndarray
    kinv_diag: np.ndarray


def kernel(x: np.ndarray, x2: np.ndarray, params: HyperParams) -> float:
    """Squared-exponential ARD kernel between two points.

    k(x, x') = sigma2 * exp(-sum_i (x_i - x'_i)^2 / (2 * theta_i^2))
    """
    a = np.asarray(x, dtype=float).reshape(-1)
    b = np.asarray(x2, dtype=float).reshape(-1)
    if a.shape != b.shape:
        raise ValueError("points must share a dimension")
    if a.shape[0] != params.lengthscales.shape[0]:
        raise ValueError("point dimension does not match lengthscales")
    z = (a - b) / params.lengthscales
    return float(params.sigma2 * np.exp(-0.5 * np.dot(z, z)))


def kernel_matrix(x: np.ndarray, x2: np.ndarray, params: HyperParams) -> np.ndarray:
    """Cross-covariance matrix between two point sets, shape (n, m)."""
    a = _as_2d(x) / params.lengthscales
    b = _as_2d(x2) / params.lengthscales
    sq = cdist(a, b, metric="sqeuclidean")
    return params.sigma2 * np.exp(-0.5 * sq)


def fit(train: TrainingSet, params: HyperParams) -> FittedGP:
    """Condition the GP on the training set.

    Attempts a Cholesky factorization of ``K + nugget * I``; if that fails,
    escalates a diagonal jitter from 1e-10 * sigma2 by factors of 10 up to
    1e-4 * sigma2 before giving up with :class:`FitError`.
    """
    if train.dim != params.lengthscales.shape[0]:
        raise ValueError(
            f"training inputs have dimension {train.dim} but "
            f"{params.lengthscales.shape[0]} lengthscales were given"
        )
    gram = kernel_matrix(train.inputs, train.inputs, params)
    base = gram + params.nugget * np.eye(train.n)

    chol = None
    jitter = 0.0
    while True:
        try:
            chol = cholesky(base + jitter * np.eye(train.n), lower=True)
            break
        except np.linalg.LinAlgError:
            pass
        if jitter == 0.0:
            jitter = _JITTER_START * params.sigma2
        elif jitter < _JITTER_MAX * params.sigma2 * (1 - 1e-12):
            jitter = min(jitter * _JITTER_FACTOR, _JITTER_MAX * params.sigma2)
        else:
            raise FitError(
                f"Gram matrix is not positive definite even with jitter {jitter:g}; "
                "inputs may be nearly duplicated for these lengthscales",
                jitter=jitter,
            )

    alpha = cho_solve((chol, True), train.outputs)
    # diag(K^-1) from the factor: columns of L^-1 are triangular solves
    # against unit vectors; their squared norms are the diagonal entries.
    linv = solve_triangular(chol, np.eye(train.n), lower=True)
    kinv_diag = np.einsum("ij,ij->j", linv, linv)
    return FittedGP(train=train, params=params, chol=chol, alpha=alpha, kinv_diag=kinv_diag)


def predict_many(gp: FittedGP, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Posterior means and variances at many points (normalized coordinates).

    Returns
    -------
    means, variances : ndarray, shape (m,)
        Variances are clamped at zero; roundoff can otherwise push them
        slightly negative near training sites.
    """
    pts = _as_2d(x)
    if pts.shape[1] != gp.train.dim:
        raise ValueError(
            f"query points have dimension {pts.shape[1]}, expected {gp.train.dim}"
        )
    kx = kernel_matrix(gp.train.inputs, pts, gp.params)
    means = kx.T @ gp.alpha
    v = solve_triangular(gp.chol, kx, lower=True)
    variances = gp.params.sigma2 - np.einsum("ij,ij->j", v, v)
    return means, np.maximum(variances, 0.0)


def predict(gp: FittedGP, x: np.ndarray) -> GaussianPrediction:
    """Posterior prediction at a single point (normalized coordinates)."""
    means, variances = predict_many(gp, np.asarray(x, dtype=float).reshape(1, -1))
    return GaussianPrediction(mean=float(means[0]), variance=float(variances[0]))


def loo_arrays(gp: FittedGP) -> tuple[np.ndarray, np.ndarray]:
    """Leave-one-out posterior means and variances as arrays.

    Uses the closed-form identities

        mu_{-i}     = y_i - [K^-1 y]_i / [K^-1]_ii
        sigma2_{-i} = 1 / [K^-1]_ii

    so no refitting happens.  The nugget stays in K for every fold.
    """
    means = gp.train.outputs - gp.alpha / gp.kinv_diag
    variances = 1.0 / gp.kinv_diag
    return means, np.maximum(variances, 0.0)


def loo_predictions(gp: FittedGP) -> list[GaussianPrediction]:
    """Leave-one-out predictions, one per training site, in site order."""
    means, variances = loo_arrays(gp)
    return [
        GaussianPrediction(mean=float(m), variance=float(v))
        for m, v in zip(means, variances)
    ]
