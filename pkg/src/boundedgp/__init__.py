"""Bound-constrained Gaussian process regression.

A small library for fitting zero-mean Gaussian processes whose predictions
are projected onto known pointwise bounds, with bound-aware leave-one-out
hyperparameter inference, plus the benchmark and density-approximation
experiments built on top of it.
"""

from .gp import (
    FitError,
    FittedGP,
    GaussianPrediction,
    HyperParams,
    TrainingSet,
    fit,
    kernel,
    kernel_matrix,
    loo_predictions,
    predict,
    predict_many,
)
from .inference import (
    InferenceConfig,
    InferenceError,
    InferenceResult,
    infer,
    press_bounded,
    press_unbounded,
    sigma2_closed_form,
)
from .projection import (
    BoundSpec,
    ProjectedPosterior,
    cdf,
    mean,
    project_posterior,
    project_value,
    quantile,
    sample,
    variance,
)

__version__ = "0.1.0"

__all__ = [
    "BoundSpec",
    "FitError",
    "FittedGP",
    "GaussianPrediction",
    "HyperParams",
    "InferenceConfig",
    "InferenceError",
    "InferenceResult",
    "ProjectedPosterior",
    "TrainingSet",
    "cdf",
    "fit",
    "infer",
    "kernel",
    "kernel_matrix",
    "loo_predictions",
    "mean",
    "predict",
    "predict_many",
    "press_bounded",
    "press_unbounded",
    "project_posterior",
    "project_value",
    "quantile",
    "sample",
    "sigma2_closed_form",
    "variance",
    "__version__",
]
