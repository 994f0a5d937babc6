"""FastAPI application exposing fit, predict, and the experiment suites.

The service is stateless: a fit returns the model as a text document and
predict takes that document back, so nothing lives on the server between
requests.  Error bodies always carry ``{"kind", "message"}`` where kind is
``usage`` (malformed request), ``data`` (well-formed but unusable values),
or ``numerical`` (the computation itself failed); clients key off it.
"""

from __future__ import annotations

import math

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .. import __version__, benchmarks, density, gp
from ..expressions import ExpressionError
from ..inference import InferenceConfig, InferenceError
from ..modelfile import BoundDecl, ModelFileError, dumps_model, loads_model
from ..surrogate import fit_surrogate
from . import schemas

__all__ = ["app", "create_app"]


def _error(status: int, kind: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"detail": {"kind": kind, "message": message}})


def _build_config(mode: str, options: schemas.InferenceOptions | None) -> InferenceConfig:
    overrides = options.overrides() if options is not None else {}
    overrides.setdefault("mode", mode)
    return InferenceConfig(**overrides)


def _opt(value: float) -> float | None:
    return None if math.isinf(value) else float(value)


def create_app() -> FastAPI:
    app = FastAPI(title="boundedgp", version=__version__)

    @app.exception_handler(RequestValidationError)
    async def on_validation(request: Request, exc: RequestValidationError):
        return _error(422, "usage", str(exc))

    @app.exception_handler(ExpressionError)
    @app.exception_handler(ModelFileError)
    @app.exception_handler(ValueError)
    async def on_data(request: Request, exc: Exception):
        return _error(422, "data", str(exc))

    @app.exception_handler(InferenceError)
    @app.exception_handler(gp.FitError)
    async def on_numerical(request: Request, exc: Exception):
        return _error(500, "numerical", str(exc))

    @app.get("/health", response_model=schemas.HealthResponse)
    async def health() -> schemas.HealthResponse:
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/fit", response_model=schemas.FitResponse)
    def fit(req: schemas.FitRequest) -> schemas.FitResponse:
        x = np.asarray(req.inputs, dtype=float)
        y = np.asarray(req.outputs, dtype=float)
        if x.shape[0] != y.shape[0]:
            raise ValueError(
                f"{x.shape[0]} input rows but {y.shape[0]} outputs"
            )
        decl = BoundDecl(
            lower=req.bounds.lower if req.bounds else None,
            upper=req.bounds.upper if req.bounds else None,
        )
        spec = decl.to_spec(x.shape[1])
        mode = "bounded" if spec is not None else "unbounded"
        if req.config is not None and req.config.mode is not None:
            mode = req.config.mode
        config = _build_config(mode, req.config)
        model = fit_surrogate(
            x, y, bounds=spec, project=req.project, config=config, normalize=req.normalize
        )
        params = model.params
        return schemas.FitResponse(
            model_file=dumps_model(model, decl, x, y),
            mode=model.inference.mode,
            project=model.project,
            press=float(model.inference.objective),
            evaluations=model.inference.evaluations,
            converged=model.inference.converged,
            params=schemas.ParamsPayload(
                sigma2=params.sigma2,
                lengthscales=[float(v) for v in params.lengthscales],
                nugget=params.nugget,
            ),
        )

    @app.post("/predict", response_model=schemas.PredictResponse)
    def predict(req: schemas.PredictRequest) -> schemas.PredictResponse:
        model, _, _, _ = loads_model(req.model_file)
        pts = np.asarray(req.points, dtype=float)
        if pts.shape[1] != model.train.dim:
            raise ValueError(
                f"model expects {model.train.dim} input(s) but query rows have {pts.shape[1]}"
            )
        table = model.predict_table(pts)
        rows = [
            schemas.PredictionRow(
                x=[float(v) for v in pts[i]],
                mu_f=float(table.mu_f[i]),
                sigma_f=float(table.sigma_f[i]),
                lower=_opt(table.lower[i]),
                upper=_opt(table.upper[i]),
                mu_g=float(table.mu_g[i]),
                sigma_g=float(table.sigma_g[i]),
                q025=float(table.q025[i]),
                q500=float(table.q500[i]),
                q975=float(table.q975[i]),
                mass_lower=float(table.mass_lower[i]),
                mass_upper=float(table.mass_upper[i]),
            )
            for i in range(pts.shape[0])
        ]
        return schemas.PredictResponse(rows=rows)

    @app.post("/benchmark", response_model=schemas.BenchmarkResponse)
    def benchmark(req: schemas.BenchmarkRequest) -> schemas.BenchmarkResponse:
        if req.problem == "all":
            problems = list(benchmarks.problem_catalog())
        else:
            problems = [benchmarks.get_problem(req.problem)]
        variants = [benchmarks.get_variant(v) for v in req.variants]
        overrides = req.config.overrides() if req.config else {}
        overrides.pop("mode", None)
        overrides.pop("seed", None)
        results = [
            benchmarks.run_experiment(
                problem,
                variant,
                n,
                replications=req.replications,
                n_test=req.n_test,
                base_seed=req.base_seed,
                config_overrides=overrides or None,
            )
            for problem in problems
            for variant in variants
            for n in (req.n_train or list(problem.default_train_sizes))
        ]
        cells = []
        for res in results:
            summary = res.summary()
            cells.append(
                schemas.BenchmarkCell(
                    problem=res.problem,
                    variant=res.variant,
                    n_train=res.n_train,
                    trials=len(res.trials),
                    failures=res.failures,
                    r2=schemas.MetricSummary(mean=summary["r2"][0], std=summary["r2"][1]),
                    rmse=schemas.MetricSummary(mean=summary["rmse"][0], std=summary["rmse"][1]),
                    cp=schemas.MetricSummary(mean=summary["cp"][0], std=summary["cp"][1]),
                )
            )
        return schemas.BenchmarkResponse(
            cells=cells,
            trials_csv=benchmarks.trials_csv(results),
            summary_markdown=benchmarks.summary_markdown(results),
        )

    @app.post("/density", response_model=schemas.DensityResponse)
    def density_run(req: schemas.DensityRequest) -> schemas.DensityResponse:
        target = density.get_target(req.target)
        variants = [benchmarks.get_variant(v) for v in req.variants]
        overrides = req.config.overrides() if req.config else {}
        overrides.pop("mode", None)
        overrides.pop("seed", None)
        results = [
            density.run_density_experiment(
                target,
                variant,
                n,
                replications=req.replications,
                mc_samples=req.mc_samples,
                base_seed=req.base_seed,
                config_overrides=overrides or None,
            )
            for variant in variants
            for n in req.n_train
        ]
        cells = []
        for res in results:
            mean, std = res.summary()
            cells.append(
                schemas.DensityCell(
                    target=res.target,
                    variant=res.variant,
                    n_train=res.n_train,
                    trials=len(res.trials),
                    failures=res.failures,
                    h2=schemas.MetricSummary(mean=mean, std=std),
                )
            )
        contour = None
        if req.contour:
            approx = density.build_approximation(
                target,
                variants[0],
                max(req.n_train),
                seed=req.base_seed,
                mc_samples=req.mc_samples,
                config_overrides=overrides or None,
            )
            contour = density.contour_csv(target, approx, resolution=req.contour_resolution)
        return schemas.DensityResponse(
            cells=cells,
            density_csv=density.density_csv(results),
            summary_markdown=density.density_summary_markdown(results),
            contour_csv=contour,
        )

    return app


app = create_app()
