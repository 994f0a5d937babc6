"""Request and response shapes for the HTTP service.

Bound sides travel as JSON-native values: ``null`` for an absent side, a
number for a constant, or a string holding an expression over ``x1 ... xd``
(see :mod:`boundedgp.expressions`).  Model state travels as the text model
file format, so a fit response can be written to disk verbatim and fed back
to later predict calls.
"""

from __future__ import annotations

from typing import Literal, Optional, Union

from pydantic import BaseModel, Field, field_validator

BoundSideField = Optional[Union[float, str]]


class BoundsPayload(BaseModel):
    lower: BoundSideField = None
    upper: BoundSideField = None


class InferenceOptions(BaseModel):
    """Optional overrides for the inference configuration; server defaults apply otherwise."""

    mode: Optional[Literal["bounded", "unbounded"]] = None
    c_l: Optional[float] = Field(default=None, gt=0)
    c_u: Optional[float] = Field(default=None, gt=0)
    cma_population: Optional[int] = Field(default=None, ge=4)
    cma_generations: Optional[int] = Field(default=None, ge=1)
    cma_initial_step: Optional[float] = Field(default=None, gt=0)
    restarts: Optional[int] = Field(default=None, ge=0)
    seed: Optional[int] = None
    nugget: Optional[float] = Field(default=None, ge=0)
    variance_cap: Optional[float] = Field(default=None, gt=0)
    plateau: Optional[float] = Field(default=None, ge=0)
    refine_step: Optional[float] = Field(default=None, gt=0)
    anchor_margin: Optional[float] = Field(default=None, ge=0)

    def overrides(self) -> dict:
        return {k: v for k, v in self.model_dump().items() if v is not None}


class FitRequest(BaseModel):
    inputs: list[list[float]] = Field(min_length=1)
    outputs: list[float] = Field(min_length=1)
    bounds: Optional[BoundsPayload] = None
    project: Optional[bool] = None
    normalize: bool = True
    config: Optional[InferenceOptions] = None

    @field_validator("inputs")
    @classmethod
    def rectangular(cls, rows: list[list[float]]) -> list[list[float]]:
        width = len(rows[0])
        if width == 0 or any(len(r) != width for r in rows):
            raise ValueError("inputs must be a non-empty rectangular matrix")
        return rows


class ParamsPayload(BaseModel):
    sigma2: float
    lengthscales: list[float]
    nugget: float


class FitResponse(BaseModel):
    model_file: str
    mode: Literal["bounded", "unbounded"]
    project: bool
    press: float
    evaluations: int
    converged: bool
    params: ParamsPayload


class PredictRequest(BaseModel):
    model_file: str
    points: list[list[float]] = Field(min_length=1)

    @field_validator("points")
    @classmethod
    def rectangular(cls, rows: list[list[float]]) -> list[list[float]]:
        width = len(rows[0])
        if width == 0 or any(len(r) != width for r in rows):
            raise ValueError("points must be a non-empty rectangular matrix")
        return rows


class PredictionRow(BaseModel):
    x: list[float]
    mu_f: float
    sigma_f: float
    lower: Optional[float]
    upper: Optional[float]
    mu_g: float
    sigma_g: float
    q025: float
    q500: float
    q975: float
    mass_lower: float
    mass_upper: float


class PredictResponse(BaseModel):
    rows: list[PredictionRow]


class BenchmarkRequest(BaseModel):
    problem: str
    variants: list[str] = Field(default=["bGP", "bGP_I", "bGP_P", "GP"], min_length=1)
    n_train: Optional[list[int]] = None
    replications: int = Field(default=50, ge=1)
    n_test: int = Field(default=1000, ge=1)
    base_seed: int = 0
    config: Optional[InferenceOptions] = None


class MetricSummary(BaseModel):
    mean: float
    std: float


class BenchmarkCell(BaseModel):
    problem: str
    variant: str
    n_train: int
    trials: int
    failures: int
    r2: MetricSummary
    rmse: MetricSummary
    cp: MetricSummary


class BenchmarkResponse(BaseModel):
    cells: list[BenchmarkCell]
    trials_csv: str
    summary_markdown: str


class DensityRequest(BaseModel):
    target: str
    variants: list[str] = Field(default=["bGP"], min_length=1)
    n_train: list[int] = Field(default=[50, 100, 200, 500], min_length=1)
    replications: int = Field(default=50, ge=1)
    mc_samples: int = Field(default=1_000_000, ge=1)
    base_seed: int = 0
    contour: bool = False
    contour_resolution: int = Field(default=200, ge=2)
    config: Optional[InferenceOptions] = None


class DensityCell(BaseModel):
    target: str
    variant: str
    n_train: int
    trials: int
    failures: int
    h2: MetricSummary


class DensityResponse(BaseModel):
    cells: list[DensityCell]
    density_csv: str
    summary_markdown: str
    contour_csv: Optional[str] = None


class HealthResponse(BaseModel):
    status: Literal["ok"]
    version: str


class ErrorDetail(BaseModel):
    kind: Literal["usage", "data", "numerical"]
    message: str
